#include "ctxscale/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ctxscale/error.hpp"

namespace ctxscale {

namespace {

constexpr double kOffDiagonalTolerance = 1e-12;
constexpr double kSymmetryTolerance = 1e-10;
constexpr int kMaxSweeps = 100;

double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index p = 0; p < n; ++p)
    for (Eigen::Index q = p + 1; q < n; ++q) sum += a(p, q) * a(p, q);
  return std::sqrt(2.0 * sum);
}

}  // namespace

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite entry");
}

SymEigResult sym_eig(const Matrix& m) {
  if (m.rows() != m.cols())
    throw InvalidArgument("sym_eig: matrix is " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected square");
  require_finite(m, "sym_eig");
  const Eigen::Index n = m.rows();
  const double scale = n > 0 ? m.cwiseAbs().maxCoeff() : 0.0;
  const double asym = n > 0 ? (m - m.transpose()).cwiseAbs().maxCoeff() : 0.0;
  if (asym > kSymmetryTolerance * std::max(scale, 1e-300) && asym > 0.0)
    throw InvalidArgument("sym_eig: matrix asymmetric (max |a_ij - a_ji| = " + std::to_string(asym) + ")");

  Matrix a = 0.5 * (m + m.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double total = a.norm();

  SymEigResult out;
  while (off_diagonal_norm(a) > kOffDiagonalTolerance * total) {
    if (++out.sweeps > kMaxSweeps) throw NumericalError("sym_eig: Jacobi sweeps did not converge");
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
          a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  out.eigenvalues.resize(static_cast<std::size_t>(n));
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues[static_cast<std::size_t>(k)] = a(src, src);
    out.eigenvectors.col(k) = v.col(src);
  }
  return out;
}

EigenSpectrum make_spectrum(std::vector<double> raw, std::size_t source_dim) {
  for (double& x : raw) x = std::max(x, 0.0);
  std::sort(raw.begin(), raw.end(), std::greater<>());
  EigenSpectrum s;
  s.source_dim = source_dim;
  s.relative_eigenvalues.assign(raw.size(), 0.0);
  s.degenerate = raw.empty() || raw.front() <= 0.0;
  if (!s.degenerate)
    for (std::size_t i = 0; i < raw.size(); ++i) s.relative_eigenvalues[i] = std::sqrt(raw[i] / raw.front());
  s.raw_eigenvalues = std::move(raw);
  return s;
}

Matrix covariance(const Matrix& samples) {
  require(samples.rows() >= 2, "covariance: need at least 2 samples");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Matrix centred = samples.rowwise() - mean;
  Matrix cov = (centred.transpose() * centred) / static_cast<double>(samples.rows() - 1);
  return 0.5 * (cov + cov.transpose());
}

EigenSpectrum pca(const Matrix& features) {
  require(features.rows() >= 2, "pca: need n >= 2 samples");
  require(features.cols() >= 1, "pca: need d >= 1 dims");
  require_finite(features, "pca");
  auto eig = sym_eig(covariance(features));
  return make_spectrum(std::move(eig.eigenvalues), static_cast<std::size_t>(features.cols()));
}

}  // namespace ctxscale
