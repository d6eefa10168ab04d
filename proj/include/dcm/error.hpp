#pragma once

#include <stdexcept>
#include <string>

namespace dcm {

enum class errc {
  invalid_parameter,
  unknown_action,
  unknown_flow,
  empty_path,
  unreachable,
  budget_exceeded,
  parse_error,
  config_error,
  format_error,
};

inline const char* to_string(errc code) noexcept {
  switch (code) {
    case errc::invalid_parameter: return "invalid-parameter";
    case errc::unknown_action: return "unknown-action";
    case errc::unknown_flow: return "unknown-flow";
    case errc::empty_path: return "empty-path";
    case errc::unreachable: return "unreachable";
    case errc::budget_exceeded: return "budget-exceeded";
    case errc::parse_error: return "parse-error";
    case errc::config_error: return "config-error";
    case errc::format_error: return "format-error";
  }
  return "unknown";
}

class error : public std::runtime_error {
public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] errc code() const noexcept { return code_; }

private:
  errc code_;
};

// Parse failures carry the 1-based line (0 when not line-oriented) and the offending column name.
class parse_error : public error {
public:
  parse_error(std::size_t line, std::string column, const std::string& what)
      : error(errc::parse_error, describe(line, column, what)), line_(line), column_(std::move(column)) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }
  [[nodiscard]] const std::string& column() const noexcept { return column_; }

private:
  static std::string describe(std::size_t line, const std::string& column, const std::string& what) {
    std::string s = "line " + std::to_string(line);
    if (!column.empty()) s += ", column '" + column + "'";
    return s + ": " + what;
  }

  std::size_t line_;
  std::string column_;
};

}  // namespace dcm
