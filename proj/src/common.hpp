#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eit {

inline constexpr double kPi = 3.14159265358979323846;

// sin(x)/x with the removable singularity filled in
inline double sinc(double x) { return std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x; }

// Positive radial profile on [0,1] (argument is either r or the scaled depth
// zeta, depending on context).  Piecewise-constant fields carry their
// breakpoint table so they can be written out and integrated exactly.
struct LayeredConductivity {
  std::function<double(double)> eval;
  std::vector<double> breakpoints;  // ascending, first 0, last 1 (may be empty)
  std::vector<double> values;       // values.size() == breakpoints.size()-1

  double operator()(double t) const { return eval(t); }

  static LayeredConductivity constant(double c) {
    return {[c](double) { return c; }, {0.0, 1.0}, {c}};
  }
  static LayeredConductivity piecewise(std::vector<double> bp, std::vector<double> v) {
    auto look = [bp, v](double t) {
      if (t <= bp.front()) return v.front();
      for (size_t i = 0; i + 1 < bp.size(); ++i)
        if (t < bp[i + 1]) return v[i];
      return v.back();
    };
    return {look, std::move(bp), std::move(v)};
  }
};

}  // namespace eit
