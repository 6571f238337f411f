#include "ctxscale/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ctxscale/error.hpp"

namespace ctxscale {

namespace {
constexpr double kDegenerateVariance = 1e-10;
constexpr Eigen::Index kBlockRows = 256;
}  // namespace

KdeEntropy gaussian_kde_entropy(const Matrix& samples, std::optional<double> bandwidth) {
  const Eigen::Index n = samples.rows();
  require(n >= 10, "gaussian_kde_entropy: need at least 10 samples");
  require(samples.cols() >= 1, "gaussian_kde_entropy: need at least one dimension");
  require_finite(samples, "gaussian_kde_entropy");
  if (bandwidth) require(*bandwidth > 0.0, "gaussian_kde_entropy: bandwidth must be positive");

  const auto eig = sym_eig(covariance(samples));
  const double top = eig.eigenvalues.front();
  if (!(top > 0.0)) throw InvalidArgument("gaussian_kde_entropy: covariance is singular in every direction");
  Eigen::Index k = 0;
  while (k < static_cast<Eigen::Index>(eig.eigenvalues.size()) &&
         eig.eigenvalues[static_cast<std::size_t>(k)] > kDegenerateVariance * top)
    ++k;

  Matrix whiten(samples.cols(), k);
  double log_volume = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double lambda = eig.eigenvalues[static_cast<std::size_t>(j)];
    whiten.col(j) = eig.eigenvectors.col(j) / std::sqrt(lambda);
    log_volume += 0.5 * std::log(lambda);
  }
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Matrix y = (samples.rowwise() - mean) * whiten;
  const Eigen::VectorXd sq = y.rowwise().squaredNorm();

  const double d = static_cast<double>(k);
  const double h = bandwidth.value_or(std::pow(static_cast<double>(n), -1.0 / (d + 4.0)));
  const double inv_two_h2 = 1.0 / (2.0 * h * h);
  const double log_norm = -std::log(static_cast<double>(n - 1)) - 0.5 * d * std::log(2.0 * std::numbers::pi * h * h);

  double sum_log_q = 0.0;
  Matrix expo;
  for (Eigen::Index r0 = 0; r0 < n; r0 += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, n - r0);
    expo.noalias() = 2.0 * y.middleRows(r0, rows) * y.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Eigen::Index gi = r0 + i;
      double peak = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == gi) continue;
        const double e = -(sq(gi) + sq(j) - expo(i, j)) * inv_two_h2;
        expo(i, j) = e;
        peak = std::max(peak, e);
      }
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != gi) acc += std::exp(expo(i, j) - peak);
      sum_log_q += log_norm + peak + std::log(acc);
    }
  }
  return {.entropy = -sum_log_q / static_cast<double>(n) + log_volume,
          .bandwidth = h,
          .dims_used = static_cast<std::size_t>(k)};
}

}  // namespace ctxscale
