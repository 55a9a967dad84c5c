#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ontotune/common.hpp"

namespace ontotune {

/// Log-min-max scaler over runtimes. phi maps a positive runtime into [0,1]
/// through log(1+y); phi_inv is its exact inverse on the fitted range.
/// Out-of-range inputs at prediction time clamp rather than error; every
/// clamp bumps a counter that run reports surface.
class LogMinMaxScaler {
public:
  LogMinMaxScaler(double l_min, double l_max) : l_min_(l_min), l_max_(l_max) {
    if (!(std::isfinite(l_min) && std::isfinite(l_max)) || !(l_max > l_min))
      throw ValidationError("scaler requires finite l_max > l_min");
  }

  static LogMinMaxScaler fit(std::span<const double> runtimes) {
    if (runtimes.empty()) throw ValidationError("scaler fit: empty runtime set");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double y : runtimes) {
      if (!(y > 0.0)) throw ValidationError("scaler fit: runtime must be positive, got " + format_double(y));
      double l = std::log1p(y);
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
    if (!(hi > lo)) throw ValidationError("scaler fit: degenerate sample, all runtimes equal");
    return LogMinMaxScaler(lo, hi);
  }

  double l_min() const { return l_min_; }
  double l_max() const { return l_max_; }

  double phi(double y) const {
    if (!(y > 0.0)) throw ValidationError("phi: runtime must be positive, got " + format_double(y));
    double c = (std::log1p(y) - l_min_) / (l_max_ - l_min_);
    if (c < 0.0) {
      ++clamp_count_;
      return 0.0;
    }
    if (c > 1.0) {
      ++clamp_count_;
      return 1.0;
    }
    return c;
  }

  double phi_inv(double c) const {
    if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("phi_inv: scaled cost outside [0,1]: " + format_double(c));
    return std::expm1(c * (l_max_ - l_min_) + l_min_);
  }

  std::uint64_t clamp_count() const { return clamp_count_; }
  void reset_clamp_count() const { clamp_count_ = 0; }

private:
  double l_min_;
  double l_max_;
  mutable std::uint64_t clamp_count_ = 0;
};

inline double complement(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("complement: input outside [0,1]: " + format_double(x));
  return 1.0 - x;
}

// r = 1 - phi(y): high reward means fast.
inline double reward_from_runtime(double y, const LogMinMaxScaler& s) {
  return complement(s.phi(y));
}

}  // namespace ontotune
