#pragma once

// Intrinsic-dimension and entropy measurements over PCA spectra.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxscale/fit.hpp"
#include "ctxscale/linalg.hpp"

namespace ctxscale::idlab {

struct IdMeasurement {
  double threshold = 0.0;
  int measured_id = 0;   // largest 1-based i with rel_eig(i) >= threshold, 0 if none
  std::string spectrum;  // caller-supplied label of the measured spectrum
};

/// Throws InvalidArgument unless threshold lies in (0, 1].
IdMeasurement measure_id(const EigenSpectrum& spectrum, double threshold, std::string label = {});

/// One measurement per threshold.
std::vector<IdMeasurement> threshold_sweep(const EigenSpectrum& spectrum, std::span<const double> thresholds,
                                           const std::string& label = {});

/// Log-spaced thresholds over [0.002, 0.25].
std::vector<double> default_threshold_grid(std::size_t count = 25);

enum class EntropyMethod { PcaSubspace, Kde };

struct EntropyEstimate {
  double value = 0.0;  // nats; methods agree only up to an additive constant
  EntropyMethod method = EntropyMethod::PcaSubspace;
  std::optional<std::size_t> subspace_size;
};

/// Sum of log relative eigenvalues over the first n entries.
EntropyEstimate subspace_entropy(const EigenSpectrum& spectrum, std::size_t n);

/// Leave-one-out Gaussian KDE entropy of the feature rows.
EntropyEstimate kde_entropy(const Matrix& features);

/// Admissible thresholds y with lo < y <= hi.
struct ThresholdInterval {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double y) const { return y > lo && y <= hi; }
  double midpoint() const { return 0.5 * (lo + hi); }
};

/// Thresholds that measure true_ids[k] exactly on spectra[k] for every k, i.e.
/// the intersection of (rel_eig(t + 1), rel_eig(t)]. Empty when the bands do
/// not overlap.
std::optional<ThresholdInterval> find_consistent_threshold(std::span<const EigenSpectrum> spectra,
                                                           std::span<const int> true_ids);

/// The band (rel_eig(t + 1), rel_eig(t)] for one spectrum; empty when t is 0
/// or exceeds the spectrum length.
std::optional<ThresholdInterval> id_band(const EigenSpectrum& spectrum, int true_id);

struct CeIdPoint {
  int context_length = 0;
  double ce = 0.0;  // nats
  double id = 0.0;  // measured or theoretical
};

struct CeIdReport {
  LinearFit ce_vs_id;
  PowerLawFit id_vs_l;
  PowerLawFit ce_vs_l;
  std::size_t n_points = 0;
};

/// CE against ID by least squares, ID and CE against l by power law. Needs at
/// least four distinct context lengths.
CeIdReport ce_vs_id_report(std::span<const CeIdPoint> points);

}  // namespace ctxscale::idlab
