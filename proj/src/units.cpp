#include "sqz/units.hpp"

#include <charconv>
#include <string>

#include "sqz/errors.hpp"

namespace sqz {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct UnitEntry {
  std::string_view name;
  double scale;
  Dimension dimension;
};

constexpr UnitEntry kUnits[] = {
    {"m", 1.0, Dimension::length},       {"mm", 1e-3, Dimension::length},
    {"um", 1e-6, Dimension::length},     {"nm", 1e-9, Dimension::length},
    {"Hz", 1.0, Dimension::frequency},   {"kHz", 1e3, Dimension::frequency},
    {"MHz", 1e6, Dimension::frequency},  {"GHz", 1e9, Dimension::frequency},
    {"THz", 1e12, Dimension::frequency}, {"s", 1.0, Dimension::time},
    {"ms", 1e-3, Dimension::time},       {"us", 1e-6, Dimension::time},
    {"ns", 1e-9, Dimension::time},       {"ps", 1e-12, Dimension::time},
    {"fs", 1e-15, Dimension::time},      {"/s", 1.0, Dimension::rate},
    {"cps", 1.0, Dimension::rate},
};

}  // namespace

Quantity parse_quantity(std::string_view text) {
  const std::string_view s = trim(text);
  if (s.empty()) throw Error(ErrorKind::config, "empty value");
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{}) throw Error(ErrorKind::config, "not a number: '" + std::string(s) + "'");
  const std::string_view unit = trim(std::string_view(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr)));
  if (unit.empty()) return {value, Dimension::dimensionless};
  for (const auto& u : kUnits) {
    if (u.name == unit) return {value * u.scale, u.dimension};
  }
  throw Error(ErrorKind::config, "unknown unit '" + std::string(unit) + "'");
}

}  // namespace sqz
