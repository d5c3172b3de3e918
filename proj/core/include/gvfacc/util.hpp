#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace gvfacc {

// Error taxonomy. The CLI maps these onto its exit codes, so library code
// should throw the most specific one that applies.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad model files, missing models, or metadata that does not match the run.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or parameters during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Piecewise-linear curve over strictly increasing x knots. Evaluation clamps
// to the first/last knot value outside the covered span.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  explicit PiecewiseLinear(std::vector<std::array<double, 2>> knots);

  double operator()(double x) const;

  const std::vector<std::array<double, 2>>& knots() const { return knots_; }
  bool empty() const { return knots_.empty(); }

 private:
  std::vector<std::array<double, 2>> knots_;
};

// Round-trip-exact decimal formatting for exported files. Emits "nan" for
// missing values so exports stay byte-stable.
std::string format_double(double v);

// Strict parse of a full string as double; accepts "nan"/"inf" spellings.
double parse_double(const std::string& s);

}  // namespace gvfacc
