#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ctxscale/error.hpp"
#include "ctxscale/idlab.hpp"
#include "ctxscale/parity.hpp"
#include "ctxscale/rng.hpp"

using namespace ctxscale;
using namespace ctxscale::idlab;

namespace {

EigenSpectrum from_relative(const std::vector<double>& rel) {
  std::vector<double> raw;
  for (double r : rel) raw.push_back(r * r);
  return make_spectrum(raw, raw.size());
}

EigenSpectrum exponential(double log_gamma, double alpha, int n) {
  std::vector<double> rel{1.0};
  for (int i = 1; i < n; ++i) rel.push_back(std::exp(log_gamma - alpha * i));
  return from_relative(rel);
}

}  // namespace

TEST_CASE("measure_id") {
  const auto s = from_relative({1, 0.5, 0.2, 0.01});
  CHECK(measure_id(s, 0.1).measured_id == 3);
  CHECK(measure_id(s, 1.0).measured_id == 1);
  CHECK(measure_id(s, 0.2).measured_id == 3);
  CHECK(measure_id(s, 0.005, "x").spectrum == "x");
  CHECK_THROWS_AS(measure_id(s, 0.0), InvalidArgument);
  CHECK_THROWS_AS(measure_id(s, 1.5), InvalidArgument);

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> raw;
    for (int i = 0; i < 30; ++i) raw.push_back(rng.uniform());
    const auto sp = make_spectrum(raw, 30);
    int prev = 1 << 20;
    for (double t : default_threshold_grid()) {
      const int id = measure_id(sp, t).measured_id;
      CHECK(id <= prev);
      prev = id;
    }
  }
}

TEST_CASE("threshold grid") {
  const auto g = default_threshold_grid();
  CHECK(g.size() == 25);
  CHECK(g.front() == 0.002);
  CHECK(g.back() == 0.25);
  CHECK(std::is_sorted(g.begin(), g.end()));
  const auto sweep = threshold_sweep(from_relative({1, 0.3, 0.1}), g, "a");
  CHECK(sweep.size() == g.size());
}

TEST_CASE("subspace entropy") {
  const auto ones = from_relative({1, 1, 1, 1});
  for (std::size_t n = 0; n <= 4; ++n) CHECK(subspace_entropy(ones, n).value == 0.0);
  const auto e = subspace_entropy(from_relative({1, 0.5, 0.25}), 3);
  CHECK(e.value == doctest::Approx(std::log(0.125)).epsilon(1e-14));
  CHECK(e.subspace_size == 3u);
  CHECK_THROWS_AS(subspace_entropy(from_relative({1, 0.5, 0.0}), 3), InvalidArgument);
  CHECK_THROWS_AS(subspace_entropy(ones, 5), InvalidArgument);

  // independent blocks sharing a leading scale add
  const std::vector<double> a{1, 0.6, 0.3}, b{1, 0.8, 0.2, 0.1};
  std::vector<double> both = a;
  both.insert(both.end(), b.begin(), b.end());
  std::sort(both.rbegin(), both.rend());
  const double sum = subspace_entropy(from_relative(a), 3).value + subspace_entropy(from_relative(b), 4).value;
  CHECK(subspace_entropy(from_relative(both), 7).value == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("consistent threshold") {
  const auto s = from_relative({1, 0.9, 0.5, 0.2, 0.1});
  const std::vector<EigenSpectrum> same{s, s};
  const std::vector<int> ids{3, 3};
  const auto band = find_consistent_threshold(same, ids);
  REQUIRE(band.has_value());
  CHECK(band->lo == doctest::Approx(0.2));
  CHECK(band->hi == doctest::Approx(0.5));
  CHECK(measure_id(s, band->hi).measured_id == 3);
  CHECK(measure_id(s, band->lo).measured_id == 4);
  CHECK_FALSE(band->contains(band->lo));
  CHECK(band->contains(band->hi));

  const auto t = from_relative({1, 0.95, 0.9, 0.85, 0.8});
  const std::vector<EigenSpectrum> disjoint{s, t};
  CHECK_FALSE(find_consistent_threshold(disjoint, ids).has_value());

  const std::vector<int> zero{0, 3};
  CHECK_FALSE(find_consistent_threshold(same, zero).has_value());
  const std::vector<int> full{5, 5};
  const auto last = find_consistent_threshold(same, full);
  REQUIRE(last.has_value());
  CHECK(last->lo == 0.0);

  const std::vector<EigenSpectrum> one{s};
  CHECK_THROWS_AS(find_consistent_threshold(one, std::vector<int>{3}), InvalidArgument);
  CHECK_THROWS_AS(find_consistent_threshold(same, std::vector<int>{3}), InvalidArgument);

  // every admissible threshold measures every true ID
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<EigenSpectrum> spectra;
    std::vector<int> truth;
    for (int k = 0; k < 3; ++k) {
      std::vector<double> rel{1.0};
      const int dominant = 2 + static_cast<int>(rng.below(5));
      for (int i = 1; i < dominant; ++i) rel.push_back(0.6 + 0.4 * rng.uniform());
      for (int i = 0; i < 5; ++i) rel.push_back(0.3 * rng.uniform());
      std::sort(rel.rbegin() + 0, rel.rend() - 1);
      spectra.push_back(from_relative(rel));
      truth.push_back(dominant);
    }
    const auto y = find_consistent_threshold(spectra, truth);
    REQUIRE(y.has_value());
    for (double f : {0.01, 0.5, 1.0}) {
      const double thr = y->lo + f * (y->hi - y->lo);
      for (int k = 0; k < 3; ++k) CHECK(measure_id(spectra[k], thr).measured_id == truth[k]);
    }
  }
}

TEST_CASE("CE vs ID report on closed forms") {
  const auto c = parity::canonical_task_set();
  std::vector<CeIdPoint> pts;
  for (int l : {23, 25, 27, 30, 35, 40, 50, 60, 100, 200}) {
    const int t = parity::solvable_tasks(c, l);
    pts.push_back({l, (1.0 - t / 50.0) * std::numbers::ln2, static_cast<double>(t)});
  }
  const auto r = ce_vs_id_report(pts);
  CHECK(std::abs(r.ce_vs_id.r_squared - 1.0) < 1e-12);
  CHECK(r.ce_vs_id.slope == doctest::Approx(-std::numbers::ln2 / 50).epsilon(1e-12));
  CHECK(r.ce_vs_id.intercept == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  CHECK(r.id_vs_l.gamma >= 1.08);
  CHECK(r.id_vs_l.gamma <= 1.28);
  CHECK(r.n_points == pts.size());
  pts.resize(3);
  CHECK_THROWS_AS(ce_vs_id_report(pts), InvalidArgument);
}

TEST_CASE("threshold shifts on exponential spectra are additive constants") {
  const double alpha = 0.02;
  std::vector<double> id_a, id_b;
  for (double lg : {-2.5, -2.0, -1.6, -1.1, -0.7, -0.3, 0.0}) {
    const auto s = exponential(lg, alpha, 600);
    id_a.push_back(measure_id(s, 0.05).measured_id);
    id_b.push_back(measure_id(s, 0.005).measured_id);
    for (double thr : {0.06, 0.02, 0.005}) {
      const auto fit = fit_spectrum_decay(s, 1, 600);
      CHECK(std::abs(fit.predicted_dim(thr) - measure_id(s, thr).measured_id) <= 1.0);
    }
  }
  const auto f = fit_linear(id_a, id_b);
  CHECK(f.r_squared >= 0.999);
  CHECK(f.slope == doctest::Approx(1.0).epsilon(0.05));
}
