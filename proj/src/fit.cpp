#include "ctxscale/fit.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ctxscale/error.hpp"

namespace ctxscale {

namespace {

constexpr double kGammaMin = 0.05;
constexpr double kGammaMax = 5.0;
constexpr double kGammaStep = 0.005;
constexpr double kGammaTolerance = 1e-8;

struct Profile {
  double c0 = 0.0;
  double c = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

// Closed-form (c0, c) at fixed gamma.
Profile profile_at(std::span<const double> x, std::span<const double> y, double gamma) {
  const std::size_t n = x.size();
  double sb = 0, sbb = 0, sy = 0, sby = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = std::pow(x[i], -gamma);
    sb += b;
    sbb += b * b;
    sy += y[i];
    sby += b * y[i];
  }
  const double dn = static_cast<double>(n);
  const double det = dn * sbb - sb * sb;
  Profile p;
  if (!(std::abs(det) > 1e-300)) return p;
  p.c = (dn * sby - sb * sy) / det;
  p.c0 = (sy - p.c * sb) / dn;
  p.sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - p.c0 - p.c * std::pow(x[i], -gamma);
    p.sse += r * r;
  }
  return p;
}

double sse_of(std::span<const double> x, std::span<const double> y, double c0, double c, double gamma) {
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - c0 - c * std::pow(x[i], -gamma);
    sse += r * r;
  }
  return sse;
}

Eigen::MatrixXd jacobian(std::span<const double> x, double c, double gamma) {
  Eigen::MatrixXd j(static_cast<Eigen::Index>(x.size()), 3);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double b = std::pow(x[i], -gamma);
    const auto r = static_cast<Eigen::Index>(i);
    j(r, 0) = 1.0;
    j(r, 1) = b;
    j(r, 2) = -c * b * std::log(x[i]);
  }
  return j;
}

double total_sum_squares(std::span<const double> y) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sst = 0.0;
  for (double v : y) sst += (v - mean) * (v - mean);
  return sst;
}

}  // namespace

double PowerLawFit::operator()(double x) const { return c0 + c * std::pow(x, -gamma); }

double SpectrumDecayFit::predicted_dim(double threshold) const {
  require(threshold > 0.0, "predicted_dim: threshold must be positive");
  return (intercept - std::log(threshold)) / alpha;
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "fit_power_law: x and y lengths differ");
  for (double v : x) require(v > 0.0 && std::isfinite(v), "fit_power_law: x must be positive and finite");
  for (double v : y) require(std::isfinite(v), "fit_power_law: y must be finite");
  require(std::set<double>(x.begin(), x.end()).size() >= 4, "fit_power_law: need at least 4 distinct x values");

  PowerLawFit fit;
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  const double yscale = std::max({1.0, std::abs(*ymin), std::abs(*ymax)});
  if (*ymax - *ymin <= 1e-12 * yscale) {
    double mean = 0.0;
    for (double v : y) mean += v;
    fit.c0 = mean / static_cast<double>(y.size());
    fit.c = 0.0;
    fit.gamma = 1.0;
    fit.degenerate = true;
    fit.r_squared = 1.0;
    return fit;
  }

  const int steps = static_cast<int>(std::lround((kGammaMax - kGammaMin) / kGammaStep));
  double best_gamma = kGammaMin;
  Profile best;
  for (int k = 0; k <= steps; ++k) {
    const double g = kGammaMin + kGammaStep * k;
    const Profile p = profile_at(x, y, g);
    if (p.sse < best.sse) {
      best = p;
      best_gamma = g;
    }
  }

  // Brent on the profiled residual inside the winning grid cell.
  const double lo = std::max(kGammaMin, best_gamma - kGammaStep);
  const double hi = std::min(kGammaMax, best_gamma + kGammaStep);
  const auto [g_refined, sse_refined] = boost::math::tools::brent_find_minima(
      [&](double g) { return profile_at(x, y, g).sse; }, lo, hi, std::numeric_limits<double>::digits / 2);
  if (sse_refined <= best.sse) {
    best_gamma = g_refined;
    best = profile_at(x, y, best_gamma);
  }

  // Damped Gauss-Newton polish on (c0, c, gamma).
  double c0 = best.c0, c = best.c, gamma = best_gamma, sse = best.sse;
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::MatrixXd j = jacobian(x, c, gamma);
    Eigen::VectorXd r(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i)
      r(static_cast<Eigen::Index>(i)) = y[i] - c0 - c * std::pow(x[i], -gamma);
    const Eigen::Vector3d step = j.colPivHouseholderQr().solve(r);
    if (!step.allFinite()) break;
    double damping = 1.0;
    bool accepted = false;
    for (int h = 0; h < 30; ++h) {
      const double g_new = gamma + damping * step(2);
      if (g_new > 0.0) {
        const double s_new = sse_of(x, y, c0 + damping * step(0), c + damping * step(1), g_new);
        if (s_new <= sse) {
          c0 += damping * step(0);
          c += damping * step(1);
          gamma = g_new;
          sse = s_new;
          accepted = true;
          break;
        }
      }
      damping *= 0.5;
    }
    if (!accepted || std::abs(damping * step(2)) < kGammaTolerance) break;
  }

  fit.c0 = c0;
  fit.c = c;
  fit.gamma = gamma;
  const double sst = total_sum_squares(y);
  fit.r_squared = 1.0 - sse / sst;

  const Eigen::MatrixXd j = jacobian(x, c, gamma);
  const Eigen::Matrix3d jtj = j.transpose() * j;
  const double dof = static_cast<double>(x.size()) - 3.0;
  const double s2 = dof > 0.0 ? sse / dof : 0.0;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(jtj);
  if (lu.isInvertible()) {
    const Eigen::Matrix3d cov = s2 * lu.inverse();
    fit.c0_stderr = std::sqrt(std::max(0.0, cov(0, 0)));
    fit.c_stderr = std::sqrt(std::max(0.0, cov(1, 1)));
    fit.gamma_stderr = std::sqrt(std::max(0.0, cov(2, 2)));
  } else {
    // c == 0 makes gamma unidentifiable.
    fit.c0_stderr = std::sqrt(s2 / static_cast<double>(x.size()));
    fit.c_stderr = std::numeric_limits<double>::infinity();
  }
  return fit;
}

LinearFit fit_linear(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "fit_linear: x and y lengths differ");
  require(std::set<double>(x.begin(), x.end()).size() >= 2, "fit_linear: need at least 2 distinct x values");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0.0) {
    fit.r_squared = 1.0;
  } else {
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - fit(x[i]);
      sse += r * r;
    }
    fit.r_squared = std::clamp(1.0 - sse / syy, 0.0, 1.0);
  }
  return fit;
}

SpectrumDecayFit fit_spectrum_decay(std::span<const double> values, std::size_t begin, std::size_t end) {
  require(begin < end && end <= values.size(), "fit_spectrum_decay: window outside spectrum");
  require(end - begin >= 4, "fit_spectrum_decay: need at least 4 indices");
  std::vector<double> idx, logv;
  for (std::size_t i = begin; i < end; ++i) {
    require(values[i] > 0.0, "fit_spectrum_decay: zero eigenvalue in window");
    if (i > begin) require(values[i] <= values[i - 1], "fit_spectrum_decay: spectrum not monotone in window");
    idx.push_back(static_cast<double>(i));
    logv.push_back(std::log(values[i]));
  }
  const LinearFit line = fit_linear(idx, logv);
  if (!(line.slope < 0.0)) throw NumericalError("fit_spectrum_decay: window shows no decay");
  return {.alpha = -line.slope, .intercept = line.intercept, .r_squared = line.r_squared};
}

SpectrumDecayFit fit_spectrum_decay(const EigenSpectrum& spectrum, std::size_t begin, std::size_t end) {
  return fit_spectrum_decay(spectrum.relative_eigenvalues, begin, end);
}

double correlation(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && !x.empty(), "correlation: length mismatch");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ctxscale
