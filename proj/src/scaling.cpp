#include "ctxscale/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctxscale/error.hpp"
#include "ctxscale/fit.hpp"
#include "ctxscale/rng.hpp"

namespace ctxscale::scaling {

double LossModelParams::dim(double l) const { return dim_inf - c_dim / std::pow(l, gamma); }

void LossModelParams::validate() const {
  require(std::isfinite(c0) && std::isfinite(c), "loss model: c0 and c must be finite");
  require(c >= 0.0, "loss model: c must be non-negative");
  require(gamma > 0.0, "loss model: gamma must be positive");
  require(dim_inf > 0.0, "loss model: dim_inf must be positive");
  require(c_dim >= 0.0, "loss model: c_dim must be non-negative");
  require(c_alpha > 0.0, "loss model: c_alpha must be positive");
  require(a0 >= 0.0 && beta >= 0.0, "loss model: a0 and beta must be non-negative");
}

double model_loss(const LossModelParams& p, double dataset_size, double context_length) {
  p.validate();
  require(dataset_size >= 1.0, "model_loss: D must be >= 1");
  require(context_length >= 1.0, "model_loss: l must be >= 1");
  const double dim = p.dim(context_length);
  require(dim > 0.0, "model_loss: dim(l) <= 0 at l = " + std::to_string(context_length));
  const double bayes = p.c0 + p.c / std::pow(context_length, p.gamma);
  if (p.a0 == 0.0) return bayes;
  const double alpha = p.c_alpha / dim;
  return bayes + p.a0 * std::pow(context_length, p.beta) * std::exp(-alpha * std::log(dataset_size));
}

int optimal_context(const LossModelParams& params, double dataset_size, std::span<const int> l_grid) {
  require(!l_grid.empty(), "optimal_context: empty grid");
  require(std::is_sorted(l_grid.begin(), l_grid.end()), "optimal_context: grid must be ascending");
  int best = l_grid.front();
  double best_loss = std::numeric_limits<double>::infinity();
  for (int l : l_grid) {
    const double v = model_loss(params, dataset_size, l);
    if (v < best_loss) {
      best_loss = v;
      best = l;
    }
  }
  return best;
}

double capped_nn_mean(const Matrix& points, double cap) {
  const auto n = points.rows();
  const auto d = points.cols();
  require(n >= 2, "capped_nn_mean: need at least two points");
  require(d >= 1, "capped_nn_mean: points need at least one coordinate");
  require(cap > 0.0, "capped_nn_mean: cap must be positive");
  require_finite(points, "capped_nn_mean");
  std::vector<double> best(static_cast<std::size_t>(n), cap * cap);
  const double* x = points.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* xi = x + i * d;
    double bi = best[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double* xj = x + j * d;
      double s = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double t = xi[k] - xj[k];
        s += t * t;
      }
      bi = std::min(bi, s);
      double& bj = best[static_cast<std::size_t>(j)];
      bj = std::min(bj, s);
    }
    best[static_cast<std::size_t>(i)] = bi;
  }
  double total = 0.0;
  for (double b : best) total += std::sqrt(b);
  return total / static_cast<double>(n);
}

Matrix sample_points(int dim, const Density& density, std::size_t n, std::uint64_t seed) {
  require(dim >= 1, "sample_points: dimension must be >= 1");
  if (density.kind == DensityKind::HeavyTail)
    require(density.epsilon > 0.0 && std::isfinite(density.epsilon), "sample_points: epsilon must be positive");
  Rng rng(seed);
  Matrix m(static_cast<Eigen::Index>(n), dim);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < dim; ++k) {
      switch (density.kind) {
        case DensityKind::UniformCube:
          m(i, k) = rng.uniform();
          break;
        case DensityKind::Gaussian:
          m(i, k) = rng.normal();
          break;
        case DensityKind::HeavyTail: {
          const double u = 1.0 - rng.uniform();  // (0, 1]
          const double mag = std::pow(u, -1.0 / density.epsilon) - 1.0;
          m(i, k) = rng.uniform() < 0.5 ? -mag : mag;
          break;
        }
      }
    }
  return m;
}

NnScalingResult nn_scaling_exponent(int dim, const Density& density, std::span<const std::size_t> dataset_sizes,
                                    int trials, double cap, std::uint64_t seed) {
  require(trials >= 10, "nn_scaling_exponent: need at least 10 trials");
  require(dataset_sizes.size() >= 2, "nn_scaling_exponent: need at least two dataset sizes");
  const auto [lo, hi] = std::minmax_element(dataset_sizes.begin(), dataset_sizes.end());
  require(*lo >= 2, "nn_scaling_exponent: dataset sizes must be >= 2");
  require(static_cast<double>(*hi) >= 100.0 * static_cast<double>(*lo),
          "nn_scaling_exponent: dataset sizes must span at least two decades");

  NnScalingResult r;
  std::vector<double> log_d, log_m;
  for (std::size_t g = 0; g < dataset_sizes.size(); ++g) {
    const std::size_t n = dataset_sizes[g];
    double sum = 0.0, sum_sq = 0.0;
    for (int t = 0; t < trials; ++t) {
      const auto stream = derive_seed(derive_seed(seed, n), static_cast<std::uint64_t>(t));
      const double v = capped_nn_mean(sample_points(dim, density, n, stream), cap);
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / trials;
    const double var = std::max(0.0, (sum_sq - trials * mean * mean) / (trials - 1));
    r.dataset_sizes.push_back(static_cast<double>(n));
    r.mean_distance.push_back(mean);
    r.std_error.push_back(std::sqrt(var / trials));
    if (!(mean > 0.0)) r.degenerate = true;
    log_d.push_back(std::log(static_cast<double>(n)));
    log_m.push_back(mean > 0.0 ? std::log(mean) : 0.0);
  }
  const auto [mlo, mhi] = std::minmax_element(log_m.begin(), log_m.end());
  if (*mhi - *mlo < 1e-12) r.degenerate = true;
  const LinearFit f = fit_linear(log_d, log_m);
  r.exponent = f.slope;
  r.intercept = f.intercept;
  r.r_squared = f.r_squared;
  return r;
}

}  // namespace ctxscale::scaling
