#pragma once

#include <charconv>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "chaoscipher/error.hpp"

namespace chaoscipher {

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Ordered flat key=value record, one pair per line.
class KeyValues {
public:
  void add(std::string key, std::string value) { entries_.emplace_back(std::move(key), std::move(value)); }
  void add(std::string key, const char* value) { add(std::move(key), std::string(value)); }
  void add(std::string key, bool value) { add(std::move(key), std::string(value ? "true" : "false")); }
  void add(std::string key, double value) { add(std::move(key), format_double(value)); }

  template <typename Int>
    requires(std::is_integral_v<Int> && !std::is_same_v<Int, bool>)
  void add(std::string key, Int value) {
    add(std::move(key), std::to_string(value));
  }

  void append(const KeyValues& other, const std::string& prefix = {}) {
    for (const auto& [k, v] : other.entries_) add(prefix + k, v);
  }

  [[nodiscard]] std::optional<std::string> get(std::string_view key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    return std::nullopt;
  }

  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
    return entries_;
  }

  [[nodiscard]] std::string to_string() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }

  static KeyValues parse(std::string_view text) {
    KeyValues kv;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      const auto body = trim(line);
      if (body.empty() || body.front() == '#') continue;
      const auto eq = body.find('=');
      require(eq != std::string_view::npos, ErrorKind::input, "malformed key=value line: " + line);
      kv.add(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
    }
    return kv;
  }

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace chaoscipher
