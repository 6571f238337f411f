#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace ctxscale {

/// Dense row-major real matrix. Rows are samples wherever a matrix holds data.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct SymEigResult {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column k pairs with eigenvalues[k]
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotations are applied until the off-diagonal Frobenius norm drops below
/// 1e-12 of the total Frobenius norm. Throws InvalidArgument when `m` is not
/// square or is asymmetric beyond 1e-10 relative to its largest entry.
SymEigResult sym_eig(const Matrix& m);

/// Sorted covariance spectrum of a sample cloud.
///
/// `relative_eigenvalues[i] = sqrt(raw[i] / raw[0])`, i.e. side lengths of the
/// covariance ellipsoid measured against the longest one.
struct EigenSpectrum {
  std::vector<double> raw_eigenvalues;
  std::vector<double> relative_eigenvalues;
  std::size_t source_dim = 0;
  bool degenerate = false;  // every raw eigenvalue is zero

  std::size_t size() const { return relative_eigenvalues.size(); }
  /// 1-based accessor matching the usual "index of the i-th eigenvalue" reading.
  double rel_eig(std::size_t index_1based) const { return relative_eigenvalues.at(index_1based - 1); }
};

/// Builds a spectrum from raw (unsorted, possibly slightly negative) eigenvalues.
EigenSpectrum make_spectrum(std::vector<double> raw, std::size_t source_dim);

/// Covariance (denominator n-1) of mean-centred rows.
Matrix covariance(const Matrix& samples);

/// PCA spectrum of `features` (n samples x d dims). Requires n >= 2, d >= 1 and
/// finite entries.
EigenSpectrum pca(const Matrix& features);

/// Throws InvalidArgument unless every entry is finite.
void require_finite(const Matrix& m, const char* what);

}  // namespace ctxscale
