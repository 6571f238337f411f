#include "ctxscale/idlab.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ctxscale/density.hpp"
#include "ctxscale/error.hpp"

namespace ctxscale::idlab {

IdMeasurement measure_id(const EigenSpectrum& spectrum, double threshold, std::string label) {
  require(std::isfinite(threshold) && threshold > 0.0 && threshold <= 1.0, "measure_id: threshold must lie in (0, 1]");
  int id = 0;
  const auto& rel = spectrum.relative_eigenvalues;
  for (std::size_t i = 0; i < rel.size(); ++i)
    if (rel[i] >= threshold) id = static_cast<int>(i + 1);
  return {threshold, id, std::move(label)};
}

std::vector<IdMeasurement> threshold_sweep(const EigenSpectrum& spectrum, std::span<const double> thresholds,
                                           const std::string& label) {
  std::vector<IdMeasurement> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) out.push_back(measure_id(spectrum, t, label));
  return out;
}

std::vector<double> default_threshold_grid(std::size_t count) {
  require(count >= 2, "default_threshold_grid: need at least two thresholds");
  const double lo = std::log(0.002), hi = std::log(0.25);
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i)
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  grid.front() = 0.002;
  grid.back() = 0.25;
  return grid;
}

EntropyEstimate subspace_entropy(const EigenSpectrum& spectrum, std::size_t n) {
  require(n <= spectrum.size(), "subspace_entropy: subspace larger than the spectrum");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = spectrum.relative_eigenvalues[i];
    require(r > 0.0, "subspace_entropy: zero relative eigenvalue at index " + std::to_string(i + 1));
    s += std::log(r);
  }
  return {s, EntropyMethod::PcaSubspace, n};
}

EntropyEstimate kde_entropy(const Matrix& features) {
  return {gaussian_kde_entropy(features).entropy, EntropyMethod::Kde, std::nullopt};
}

std::optional<ThresholdInterval> id_band(const EigenSpectrum& spectrum, int true_id) {
  if (true_id < 1 || static_cast<std::size_t>(true_id) > spectrum.size()) return std::nullopt;
  const auto t = static_cast<std::size_t>(true_id);
  const double hi = spectrum.rel_eig(t);
  const double lo = t < spectrum.size() ? spectrum.rel_eig(t + 1) : 0.0;
  if (!(hi > lo)) return std::nullopt;
  return ThresholdInterval{lo, hi};
}

std::optional<ThresholdInterval> find_consistent_threshold(std::span<const EigenSpectrum> spectra,
                                                           std::span<const int> true_ids) {
  require(spectra.size() == true_ids.size(), "find_consistent_threshold: spectra and true_ids differ in length");
  require(spectra.size() >= 2, "find_consistent_threshold: need at least two context lengths");
  ThresholdInterval acc{0.0, 1.0};
  for (std::size_t k = 0; k < spectra.size(); ++k) {
    const auto band = id_band(spectra[k], true_ids[k]);
    if (!band) return std::nullopt;
    acc.lo = std::max(acc.lo, band->lo);
    acc.hi = std::min(acc.hi, band->hi);
    if (!(acc.hi > acc.lo)) return std::nullopt;
  }
  return acc;
}

CeIdReport ce_vs_id_report(std::span<const CeIdPoint> points) {
  std::set<int> lengths;
  for (const auto& p : points) lengths.insert(p.context_length);
  require(lengths.size() >= 4, "ce_vs_id_report: need at least four distinct context lengths");
  std::vector<double> l, ce, id;
  for (const auto& p : points) {
    l.push_back(p.context_length);
    ce.push_back(p.ce);
    id.push_back(p.id);
  }
  CeIdReport r;
  r.ce_vs_id = fit_linear(id, ce);
  r.id_vs_l = fit_power_law(l, id);
  r.ce_vs_l = fit_power_law(l, ce);
  r.n_points = points.size();
  return r;
}

}  // namespace ctxscale::idlab
