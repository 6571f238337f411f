#pragma once

#include <cstddef>
#include <optional>

#include "ctxscale/linalg.hpp"

namespace ctxscale {

struct KdeEntropy {
  double entropy = 0.0;       // nats
  double bandwidth = 0.0;     // kernel scale in whitened coordinates
  std::size_t dims_used = 0;  // after dropping degenerate directions
};

/// Leave-one-out Gaussian-KDE differential entropy, -(1/n) sum_i log q_{-i}(x_i).
///
/// Samples are whitened by their covariance (directions with variance below
/// 1e-10 of the largest are dropped first); kernels are isotropic in the
/// whitened frame with scale `bandwidth`, or Scott's n^(-1/(d+4)) when empty.
/// The log-volume of the whitening map is added back, so the estimate
/// transforms like a differential entropy under affine maps.
KdeEntropy gaussian_kde_entropy(const Matrix& samples, std::optional<double> bandwidth = std::nullopt);

}  // namespace ctxscale
