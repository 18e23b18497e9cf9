#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace evseg {

/// `key = value` lines; `#` starts a comment. Keys may repeat.
class KeyValueFile {
 public:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };

  static KeyValueFile parse(const std::string& text);
  static KeyValueFile load(const std::filesystem::path& path);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  /// Last value for `key`, if any.
  std::optional<std::string> get(const std::string& key) const;
  std::vector<std::string> get_all(const std::string& key) const;

  std::optional<double> get_double(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace evseg
