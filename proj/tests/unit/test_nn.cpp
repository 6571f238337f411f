#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "ctxscale/error.hpp"
#include "ctxscale/formats.hpp"
#include "ctxscale/nn.hpp"
#include "ctxscale/rng.hpp"
#include "ctxscale/train.hpp"

using namespace ctxscale;
using namespace ctxscale::nn;

namespace {

// Straight-line evaluation of one MLP stack; returns the final layer output.
std::vector<double> oracle_mlp(const MlpSpec& s, const std::vector<double>& p, std::size_t& at, std::vector<double> x) {
  for (int k = 0; k < s.n_layers(); ++k) {
    const int in = s.layer_dims[k], out = s.layer_dims[k + 1];
    std::vector<double> y(out, 0.0);
    for (int o = 0; o < out; ++o) {
      double z = 0.0;
      for (int i = 0; i < in; ++i) z += x[i] * p[at + static_cast<std::size_t>(i * out + o)];
      y[o] = z;
    }
    at += static_cast<std::size_t>(in * out);
    for (int o = 0; o < out; ++o) y[o] += p[at + o];
    at += static_cast<std::size_t>(out);
    if (k + 1 < s.n_layers() && s.activation_after[k])
      for (double& v : y) v = v > 0 ? v : s.leaky_slope * v;
    x = y;
  }
  return x;
}

double oracle_logit(const Model<double>& m, const std::vector<double>& input) {
  const auto& spec = m.spec();
  std::vector<double> p(m.params().begin(), m.params().end());
  std::size_t at = 0;
  if (const auto* mlp = std::get_if<MlpSpec>(&spec.arch)) return oracle_mlp(*mlp, p, at, input)[0];
  const auto& s = std::get<SplitModelSpec>(spec.arch);
  std::vector<double> ctx(input.begin(), input.begin() + spec.context_length);
  auto joined = oracle_mlp(s.encoder, p, at, ctx);
  joined.insert(joined.end(), input.begin() + spec.context_length, input.end());
  return oracle_mlp(s.decoder, p, at, joined)[0];
}

ModelSpec random_spec(Rng& rng, std::uint64_t seed) {
  const int l = 1 + static_cast<int>(rng.below(6));
  const int T = 1 + static_cast<int>(rng.below(4));
  if (rng.below(3) == 0) {
    const int enc_h = 2 + static_cast<int>(rng.below(5)), feat = 1 + static_cast<int>(rng.below(4));
    const int dec_h = 2 + static_cast<int>(rng.below(5));
    return make_split_spec(l, T, seed, enc_h, feat, dec_h);
  }
  const int n_hidden = 1 + static_cast<int>(rng.below(4));  // 2..5 linear layers
  std::vector<int> hidden;
  for (int k = 0; k < n_hidden; ++k) hidden.push_back(2 + static_cast<int>(rng.below(6)));
  auto spec = make_mlp_spec(l, T, hidden, seed);
  auto& mlp = std::get<MlpSpec>(spec.arch);
  for (std::size_t k = 0; k < mlp.activation_after.size(); ++k) mlp.activation_after[k] = rng.below(4) != 0;
  return spec;
}

MatrixT<double> random_inputs(Rng& rng, int rows, int cols) {
  MatrixT<double> x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = static_cast<double>(rng.below(3)) * 0.5;
  return x;
}

parity::ParityConfig xor_config() {
  parity::ParityConfig c;
  c.tasks = {parity::TaskSpec::make(2, 1)};
  c.n_context_bits = 2;
  c.seed = 0;
  return c;
}

}  // namespace

TEST_CASE("forward trivial cases") {
  auto spec = make_mlp_spec(3, 2, {4, 4}, 1);
  Model<double> zero(spec, std::vector<double>(Model<double>(spec).param_count(), 0.0));
  std::vector<double> x{1, 0, 1, 1, 0};
  CHECK(zero.forward(x) == 0.0);
  CHECK(sigmoid(zero.forward(x)) == 0.5);

  // identity weights through a linear junction
  ModelSpec id;
  id.context_length = 1;
  id.n_control_bits = 1;
  MlpSpec m;
  m.layer_dims = {2, 1, 1};
  m.activation_after = {false};
  id.arch = m;
  Model<double> ident(id, {1.0, 0.0, 0.0, 1.0, 0.0});
  CHECK(ident.forward(std::vector<double>{0.3, 0.0}) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(ident.forward(std::vector<double>{0.3}), InvalidArgument);
}

TEST_CASE("forward matches a straight-line oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = random_spec(rng, 100 + static_cast<std::uint64_t>(trial));
    const Model<double> model(spec);
    const auto x = random_inputs(rng, 7, spec.input_dim());
    ModelTape<double> tape;
    VectorT<double> logits;
    model.forward_batch(x, tape, logits);
    for (int i = 0; i < 7; ++i) {
      std::vector<double> row(x.row(i).data(), x.row(i).data() + x.cols());
      CHECK(std::abs(logits(i) - oracle_logit(model, row)) < 1e-10);
      CHECK(std::abs(model.forward(row) - logits(i)) < 1e-12);
    }
  }
}

TEST_CASE("gradients match central finite differences") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = random_spec(rng, 300 + static_cast<std::uint64_t>(trial));
    Model<double> model(spec);
    const auto x = random_inputs(rng, 9, spec.input_dim());
    std::vector<double> y(9);
    for (auto& v : y) v = static_cast<double>(rng.below(2));
    std::vector<double> grad;
    loss_and_gradient(model, x, std::span<const double>(y), grad);
    REQUIRE(grad.size() == model.param_count());
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < model.param_count(); ++k) {
      const double keep = model.params()[k];
      model.params()[k] = keep + h;
      const double up = mean_bce(model, x, std::span<const double>(y));
      model.params()[k] = keep - h;
      const double down = mean_bce(model, x, std::span<const double>(y));
      model.params()[k] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[k]) / std::max({std::abs(fd), std::abs(grad[k]), 1e-6}));
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("stationary point and weight decay gradient") {
  const auto spec = make_reference_mlp_spec(4, 2, 1);
  Model<double> zero(spec, std::vector<double>(Model<double>(spec).param_count(), 0.0));
  Rng rng(2);
  auto half = random_inputs(rng, 5, spec.input_dim());
  MatrixT<double> x(10, spec.input_dim());
  x.topRows(5) = half;
  x.bottomRows(5) = half;
  std::vector<double> y{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, grad;
  loss_and_gradient(zero, x, std::span<const double>(y), grad);
  for (double g : grad) CHECK(std::abs(g) < 1e-15);

  std::vector<double> p{1.5, -2.0, 0.0, 3.25}, out(4);
  weight_decay_gradient<double>(p, 1e-4, out);
  for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == 1e-4 * p[i]);
}

TEST_CASE("small learning rate descends on a fixed batch") {
  const auto spec = make_mlp_spec(6, 3, {16, 16}, 4);
  Model<double> model(spec);
  Rng rng(6);
  const auto x = random_inputs(rng, 32, spec.input_dim());
  std::vector<double> y(32), grad;
  for (auto& v : y) v = static_cast<double>(rng.below(2));
  TrainConfig cfg;
  cfg.learning_rate = 1e-5;
  cfg.weight_decay = 0.0;
  Adam<double> adam(model.param_count(), cfg);
  double prev = loss_and_gradient(model, x, std::span<const double>(y), grad);
  for (int step = 0; step < 50; ++step) {
    adam.step(model.params(), grad);
    const double now = loss_and_gradient(model, x, std::span<const double>(y), grad);
    CHECK(now <= prev + 1e-12);
    prev = now;
  }
}

TEST_CASE("training learns 2-bit xor") {
  const auto c = xor_config();
  const auto train_set = parity::gen_dataset(c, 10000, 1);
  const auto val_set = parity::gen_dataset(c, 2000, 2);
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.patience = 20;
  cfg.seed = 3;
  const auto r = train(make_mlp_spec(2, 1, {64, 64}, 7), cfg, train_set, val_set);
  CHECK(r.history.best_val_loss() < 0.01);
  CHECK(r.history.best_val_loss() == *std::min_element(r.history.val_loss.begin(), r.history.val_loss.end()));
  CHECK(evaluate_ce(r.model, val_set) == doctest::Approx(r.history.best_val_loss()).epsilon(1e-3));
}

TEST_CASE("unsolvable context stays at random guess") {
  const auto c = parity::canonical_task_set(1);
  const int l = 20;
  REQUIRE(parity::solvable_tasks(c, l) == 0);
  const auto s = parity::split_disjoint(c, 20000, 5000, 3);
  TrainConfig cfg;
  cfg.max_epochs = 12;
  cfg.patience = 4;
  const auto r = train(make_reference_mlp_spec(l, 50, 2), cfg, s.train, s.val);
  CHECK(std::abs(r.history.best_val_loss() - std::numbers::ln2) < 0.02);
  CHECK(r.history.best_val_loss() >= parity::bayes_risk(c, l) - 0.005);
  CHECK(r.history.stopped_early);
  CHECK(r.history.epochs() <= cfg.max_epochs);
}

TEST_CASE("training is deterministic") {
  const auto c = parity::canonical_task_set(1);
  const auto s = parity::split_disjoint(c, 3000, 1000, 8);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.patience = 3;
  cfg.seed = 12;
  for (auto prec : {Precision::F32, Precision::F64}) {
    cfg.precision = prec;
    const auto spec = make_split_spec(30, 50, 5, 32, 8, 16);
    const auto a = train(spec, cfg, s.train, s.val);
    const auto b = train(spec, cfg, s.train, s.val);
    CHECK(a.history == b.history);
    CHECK(std::equal(a.model.params().begin(), a.model.params().end(), b.model.params().begin()));
  }
}

TEST_CASE("training rejects bad setups") {
  const auto c = xor_config();
  const auto d = parity::gen_dataset(c, 100, 1);
  TrainConfig cfg;
  cfg.patience = cfg.max_epochs + 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = TrainConfig{};
  cfg.learning_rate = 1e30;
  cfg.max_epochs = 40;
  cfg.patience = 40;
  cfg.precision = Precision::F64;
  CHECK_THROWS_AS(train(make_mlp_spec(2, 1, {8}, 1), cfg, d, d), NumericalError);
  CHECK_THROWS_AS(train(make_mlp_spec(2, 3, {8}, 1), TrainConfig{}, d, d), InvalidArgument);
}

TEST_CASE("context features") {
  const auto c = parity::canonical_task_set(1);
  const auto d = parity::gen_dataset(c, 64, 4);
  const Model<double> split(make_split_spec(27, 50, 3));
  const Matrix f = extract_context_features(split, d);
  CHECK(f.rows() == 64);
  CHECK(f.cols() == 80);
  CHECK(f.allFinite());
  parity::Dataset twice(d.n_control_bits(), d.n_context_bits());
  twice.push_back(d.task(0), d.packed_bits(0), d.n_visible(0), d.label(0));
  twice.push_back(d.task(0), d.packed_bits(0), d.n_visible(0), d.label(0));
  const Matrix g = extract_context_features(split, twice);
  CHECK((g.row(0) - g.row(1)).norm() == 0.0);
  CHECK_THROWS_AS(extract_context_features(Model<double>(make_reference_mlp_spec(27, 50, 3)), d), InvalidArgument);
}

TEST_CASE("checkpoint round trip") {
  const Model<double> m(make_split_spec(10, 4, 9, 6, 3, 5));
  const auto bytes = checkpoint_to_bytes(m);
  CHECK(bytes.substr(0, 4) == "CSCK");
  const auto back = checkpoint_from_bytes(bytes);
  CHECK(Json(back.spec()) == Json(m.spec()));
  CHECK(std::equal(m.params().begin(), m.params().end(), back.params().begin(), back.params().end()));
  CHECK_THROWS_AS(checkpoint_from_bytes(bytes.substr(0, bytes.size() - 3)), IoError);

  const auto dir = std::filesystem::temp_directory_path() / "ctxscale_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir / "m.bin", m, Json{{"note", "x"}});
  CHECK(std::filesystem::exists(dir / "m.bin.json"));
  CHECK(checkpoint_to_bytes(load_checkpoint(dir / "m.bin")) == bytes);
  std::filesystem::remove_all(dir);
}
