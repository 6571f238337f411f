#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "ctxscale/linalg.hpp"

namespace ctxscale {

/// y = c0 + c / x^gamma
struct PowerLawFit {
  double c0 = 0.0;
  double c = 0.0;
  double gamma = 1.0;
  double c0_stderr = 0.0;
  double c_stderr = 0.0;
  std::optional<double> gamma_stderr;  // empty when degenerate
  double r_squared = 0.0;
  bool degenerate = false;  // y constant: gamma is not identifiable

  double operator()(double x) const;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;

  double operator()(double x) const { return slope * x + intercept; }
};

/// log(value_i) = intercept - alpha * i over an index window.
struct SpectrumDecayFit {
  double alpha = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;

  /// Index at which the fitted line crosses `threshold`.
  double predicted_dim(double threshold) const;
};

/// Least-squares power-law fit. gamma is searched on a 0.005 grid over
/// [0.05, 5] with (c0, c) solved in closed form at each grid point, then
/// refined by Brent minimisation of the profiled residual and polished with
/// Gauss-Newton on all three parameters. Standard errors come from the
/// Gauss-Newton covariance at the optimum.
///
/// Requires at least 4 distinct positive x values.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

/// Ordinary least squares; requires at least two distinct x values.
LinearFit fit_linear(std::span<const double> x, std::span<const double> y);

/// Fits exponential decay on `values[begin, end)`, which must be positive and
/// non-increasing, with at least 4 entries.
SpectrumDecayFit fit_spectrum_decay(std::span<const double> values, std::size_t begin, std::size_t end);
SpectrumDecayFit fit_spectrum_decay(const EigenSpectrum& spectrum, std::size_t begin, std::size_t end);

/// Pearson correlation; zero when either input has no variance.
double correlation(std::span<const double> x, std::span<const double> y);

}  // namespace ctxscale
