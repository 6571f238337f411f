#pragma once

// Analytic optimal-context model and the capped nearest-neighbour sandbox.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ctxscale/linalg.hpp"

namespace ctxscale::scaling {

/// H(D, l) = c0 + c / l^gamma + A(l) / D^alpha(l), with
/// dim(l) = dim_inf - c_dim / l^gamma, alpha(l) = c_alpha / dim(l), A(l) = a0 * l^beta.
struct LossModelParams {
  double c0 = 0.0;
  double c = 0.0;
  double gamma = 1.0;
  double dim_inf = 1.0;
  double c_dim = 0.0;
  double c_alpha = 1.0;
  double a0 = 0.0;
  double beta = 0.5;

  double dim(double l) const;
  void validate() const;
};

/// Throws InvalidArgument when dim(l) <= 0 or the arguments are out of range.
double model_loss(const LossModelParams& params, double dataset_size, double context_length);

/// Smallest grid l minimising model_loss.
int optimal_context(const LossModelParams& params, double dataset_size, std::span<const int> l_grid);

/// Mean over rows of min(cap, distance to the nearest other row). All pairs.
double capped_nn_mean(const Matrix& points, double cap);

enum class DensityKind { UniformCube, Gaussian, HeavyTail };

struct Density {
  DensityKind kind = DensityKind::UniformCube;
  double epsilon = 1.0;  // HeavyTail: per-coordinate tail index

  static Density uniform() { return {DensityKind::UniformCube, 1.0}; }
  static Density gaussian() { return {DensityKind::Gaussian, 1.0}; }
  static Density heavy_tail(double epsilon) { return {DensityKind::HeavyTail, epsilon}; }
};

/// n i.i.d. points in d dimensions. HeavyTail coordinates are symmetric
/// Pareto-type, +-(U^(-1/epsilon) - 1).
Matrix sample_points(int dim, const Density& density, std::size_t n, std::uint64_t seed);

struct NnScalingResult {
  double exponent = 0.0;  // slope of log mean capped distance against log D
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<double> dataset_sizes;
  std::vector<double> mean_distance;  // averaged over trials
  std::vector<double> std_error;
  bool degenerate = false;  // non-positive means or a flat curve
};

NnScalingResult nn_scaling_exponent(int dim, const Density& density, std::span<const std::size_t> dataset_sizes,
                                    int trials, double cap, std::uint64_t seed);

}  // namespace ctxscale::scaling
