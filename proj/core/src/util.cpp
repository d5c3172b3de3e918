#include "gvfacc/util.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace gvfacc {

PiecewiseLinear::PiecewiseLinear(std::vector<std::array<double, 2>> knots)
    : knots_(std::move(knots)) {
  if (knots_.empty()) {
    throw ConfigError("piecewise-linear curve needs at least one knot");
  }
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i][0] > knots_[i - 1][0])) {
      throw ConfigError("piecewise-linear knots must have strictly increasing x");
    }
  }
}

double PiecewiseLinear::operator()(double x) const {
  if (knots_.empty()) {
    throw ConfigError("evaluating an empty piecewise-linear curve");
  }
  if (x <= knots_.front()[0]) return knots_.front()[1];
  if (x >= knots_.back()[0]) return knots_.back()[1];
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (x <= knots_[i][0]) {
      const double x0 = knots_[i - 1][0];
      const double y0 = knots_[i - 1][1];
      const double x1 = knots_[i][0];
      const double y1 = knots_[i][1];
      return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    }
  }
  return knots_.back()[1];
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s.empty()) throw ConfigError("empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw ConfigError("malformed numeric field: '" + s + "'");
  }
  return v;
}

}  // namespace gvfacc
