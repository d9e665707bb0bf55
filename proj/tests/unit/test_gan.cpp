#include <cmath>
#include <limits>

#include "doctest.h"
#include "dpgan/error.hpp"
#include "dpgan/gan.hpp"
#include "dpgan/synth.hpp"
#include "oracles.hpp"

using namespace dpgan;

namespace {

Schema mixed_schema() {
  return Schema({
      {"x", ContinuousKind{-2.0, 2.0}},
      {"cat3", CategoricalKind{{"a", "b", "c"}}},
      {"flag", CategoricalKind{{"no", "yes"}}},
  });
}

GanArchitecture tiny_arch() {
  GanArchitecture arch;
  arch.noise_dim = 6;
  arch.gen_hidden = {16};
  arch.disc_hidden = {16};
  return arch;
}

}  // namespace

TEST_CASE("build_model is deterministic per seed and output width matches the head layout") {
  Schema s = mixed_schema();
  GanArchitecture arch = tiny_arch();
  GanModel a = build_model(arch, s, 42);
  GanModel b = build_model(arch, s, 42);
  REQUIRE(a.theta_g.size() == b.theta_g.size());
  for (std::size_t i = 0; i < a.theta_g.size(); ++i) CHECK(a.theta_g[i].values() == b.theta_g[i].values());
  for (std::size_t i = 0; i < a.theta_d.size(); ++i) CHECK(a.theta_d[i].values() == b.theta_d[i].values());

  // sum of categorical level counts + continuous count = 3 + 2 + 1
  CHECK(s.encoded_width() == 6);
  Tensor noise({4, arch.noise_dim});
  Tensor out = generator_forward(a, noise);
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 6);

  auto heads = head_layout(s);
  REQUIRE(heads.size() == 3);
  CHECK(heads[0].kind == HeadSpec::kTanhUnit);
  CHECK(heads[1].width == 3);
  CHECK(heads[2].width == 2);  // binary categorical -> head of width 2
}

TEST_CASE("generator heads: softmax groups sum to one, tanh units stay in (-1,1), identical noise is reproducible") {
  Schema s = mixed_schema();
  GanModel model = build_model(tiny_arch(), s, 7);
  Rng rng(3);
  Tensor noise({8, model.arch.noise_dim});
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
  Tensor out = generator_forward(model, noise);
  for (std::size_t r = 0; r < 8; ++r) {
    CHECK(out.at(r, 0) > -1.0);
    CHECK(out.at(r, 0) < 1.0);
    double s3 = out.at(r, 1) + out.at(r, 2) + out.at(r, 3);
    double s2 = out.at(r, 4) + out.at(r, 5);
    CHECK(s3 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s2 == doctest::Approx(1.0).epsilon(1e-12));
    for (int c = 1; c <= 5; ++c) CHECK(out.at(r, c) >= 0.0);
  }
  Tensor out2 = generator_forward(model, noise);
  CHECK(out.values() == out2.values());
}

TEST_CASE("recurrent generator emits a full-length series batch") {
  Schema s({{"load", SeriesKind{96}}});
  GanArchitecture arch;
  arch.generator_kind = GeneratorKind::kRecurrent;
  arch.noise_dim = 8;
  arch.lstm_hidden = 12;
  arch.disc_hidden = {16};
  GanModel model = build_model(arch, s, 5);
  Tensor noise({3, arch.noise_dim});
  Rng rng(9);
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
  Tensor out = generator_forward(model, noise);
  CHECK(out.rows() == 3);
  CHECK(out.cols() == 96);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i] > -1.0);
    CHECK(out[i] < 1.0);
  }

  Schema bad = mixed_schema();
  CHECK_THROWS_AS(build_generator_graph(arch, bad, 2), ConfigError);
}

TEST_CASE("gradient penalty closed forms on linear critics") {
  // critic with no hidden layers: D(x) = w . x + b
  Schema s({{"a", ContinuousKind{-1, 1}}, {"b", ContinuousKind{-1, 1}}, {"c", ContinuousKind{-1, 1}},
            {"d", ContinuousKind{-1, 1}}});
  GanArchitecture arch = tiny_arch();
  arch.disc_hidden = {};
  GanModel model = build_model(arch, s, 1);
  double d = 4.0;

  // unit input gradient: w_j = 1/sqrt(d) -> penalty 0
  for (std::size_t j = 0; j < 4; ++j) model.theta_d[0][j] = 1.0 / std::sqrt(d);
  model.theta_d[1][0] = 0.3;
  Rng rng(2);
  Tensor xr({5, 4}), xf({5, 4});
  for (std::size_t i = 0; i < xr.size(); ++i) {
    xr[i] = rng.uniform(-1.0, 1.0);
    xf[i] = rng.uniform(-1.0, 1.0);
  }
  CHECK(gradient_penalty(model, xr, xf, 10.0, rng) == doctest::Approx(0.0).epsilon(1e-4));

  // D = c * sum(x): penalty = gp_weight * (c sqrt(d) - 1)^2
  double c = 1.7;
  for (std::size_t j = 0; j < 4; ++j) model.theta_d[0][j] = c;
  double expected = 10.0 * std::pow(c * std::sqrt(d) - 1.0, 2.0);
  CHECK(gradient_penalty(model, xr, xf, 10.0, rng) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("penalty gradient w.r.t. critic parameters matches finite differences on a 2-layer critic") {
  Schema s({{"a", ContinuousKind{-1, 1}}, {"b", ContinuousKind{-1, 1}}, {"c", ContinuousKind{-1, 1}}});
  GanArchitecture arch = tiny_arch();
  arch.disc_hidden = {8, 8};
  GanModel model = build_model(arch, s, 11);
  CriticLossGraph cg = build_critic_loss_graph(arch, s, 2, 10.0, ParamMode::kGraphParam, &model);

  Rng rng(12);
  Tensor xr({2, 3}), xf({2, 3}), u({2, 1});
  for (std::size_t i = 0; i < xr.size(); ++i) {
    xr[i] = rng.uniform(-0.9, 0.9);
    xf[i] = rng.uniform(-0.9, 0.9);
  }
  u[0] = 0.35;
  u[1] = 0.8;
  FeedList feeds{{cg.x_real, xr}, {cg.x_fake, xf}, {cg.u, u}};
  // scale-invariant check through the penalty-only scalar
  NodeId target = cg.penalty;
  double err = finite_difference_check(cg.graph, target, cg.theta, feeds, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("losses for a zero critic: discriminator loss is the penalty term, generator loss is 0") {
  Schema s = mixed_schema();
  GanArchitecture arch = tiny_arch();
  GanModel model = build_model(arch, s, 3);
  for (Tensor& t : model.theta_d) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
  }
  Rng rng(4);
  Tensor xr({6, 6}), xf({6, 6});
  for (std::size_t i = 0; i < xr.size(); ++i) {
    xr[i] = rng.uniform(-0.5, 0.5);
    xf[i] = rng.uniform(-0.5, 0.5);
  }
  double gp_weight = 10.0;
  // |grad D| = 0 everywhere, so the penalty is (0 - 1)^2 = 1 per row
  CHECK(discriminator_loss(model, xr, xf, gp_weight, rng) == doctest::Approx(gp_weight).epsilon(1e-4));

  Tensor noise({6, arch.noise_dim});
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
  CHECK(generator_loss(model, noise) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("generator update path reads no dataset rows (structural)") {
  Schema s = mixed_schema();
  GeneratorLossGraph gl = build_generator_loss_graph(tiny_arch(), s, 4);
  // the only feed leaves are the noise tensor and the two parameter sets
  std::size_t expected = 1 + gl.theta_g.size() + gl.theta_d.size();
  CHECK(gl.graph.feed_inputs().size() == expected);
  for (NodeId id : gl.graph.feed_inputs()) {
    const Node& n = gl.graph.node(id);
    bool is_noise = id == gl.noise;
    bool is_theta = n.name.rfind("g.", 0) == 0 || n.name.rfind("d.", 0) == 0;
    CHECK((is_noise || is_theta));
  }
}

TEST_CASE("train: epsilon trace is nondecreasing, stays under target, C follows the decay schedule") {
  Table data = make_gaussian_mixture(400, 21);
  EncodedDataset ds = encode(data);
  GanArchitecture arch = tiny_arch();
  arch.noise_dim = 4;
  TrainLoopConfig cfg;
  cfg.dp.clip_bound = 1.0;
  cfg.dp.noise_scale = 4.0;
  cfg.dp.lot_size = 40.0;
  cfg.dp.learning_rate = 0.05;
  cfg.dp.clip_decay = 0.97;
  cfg.dp.decay_floor = 1e-3;
  cfg.epsilon_target = 2.0;
  cfg.n_disc = 2;
  cfg.batch_count = 1;
  cfg.max_generator_iterations = 40;
  cfg.gen_batch = 16;
  TrainResult res = train(ds, arch, cfg, 77);

  CHECK(!res.diverged);
  CHECK(res.generator_iterations > 0);
  REQUIRE(!res.trace.rows.empty());
  double prev_eps = 0.0;
  for (std::size_t i = 0; i < res.trace.rows.size(); ++i) {
    const TraceRow& row = res.trace.rows[i];
    CHECK(row.epsilon >= prev_eps);
    prev_eps = row.epsilon;
    CHECK(row.epsilon <= cfg.epsilon_target);
    double expected_c = std::max(cfg.dp.decay_floor, 1.0 * std::pow(cfg.dp.clip_decay, static_cast<double>(row.iteration)));
    CHECK(row.clip_bound == doctest::Approx(expected_c).epsilon(1e-12));
  }
  CHECK(res.privacy.epsilon <= cfg.epsilon_target);
}

TEST_CASE("train determinism: identical (seed, config, dataset) reproduce the trace and parameters exactly") {
  Table data = make_gaussian_mixture(300, 13);
  EncodedDataset ds = encode(data);
  GanArchitecture arch = tiny_arch();
  arch.noise_dim = 4;
  TrainLoopConfig cfg;
  cfg.dp.noise_scale = 2.0;
  cfg.dp.lot_size = 30.0;
  cfg.dp.clip_decay = 0.99;
  cfg.dp.decay_floor = 1e-3;
  cfg.epsilon_target = 4.0;
  cfg.n_disc = 1;
  cfg.max_generator_iterations = 10;
  cfg.gen_batch = 8;

  TrainResult a = train(ds, arch, cfg, 5);
  TrainResult b = train(ds, arch, cfg, 5);
  CHECK(a.trace.to_csv() == b.trace.to_csv());
  REQUIRE(a.model.theta_g.size() == b.model.theta_g.size());
  for (std::size_t i = 0; i < a.model.theta_g.size(); ++i) {
    CHECK(a.model.theta_g[i].values() == b.model.theta_g[i].values());
  }
  for (std::size_t i = 0; i < a.model.theta_d.size(); ++i) {
    CHECK(a.model.theta_d[i].values() == b.model.theta_d[i].values());
  }
}

TEST_CASE("DP-off training equals the batched reference loop within 1e-9 per coordinate") {
  Table data = make_gaussian_mixture(200, 3);
  EncodedDataset ds = encode(data);
  GanArchitecture arch = tiny_arch();
  arch.noise_dim = 4;
  TrainLoopConfig cfg;
  cfg.dp.clip_bound = 1e9;
  cfg.dp.noise_scale = 0.0;
  cfg.dp.lot_size = 25.0;
  cfg.dp.learning_rate = 0.02;
  cfg.dp.clip_decay = 1.0;
  cfg.dp.decay_floor = 1.0;
  cfg.n_disc = 2;
  cfg.max_generator_iterations = 3;
  cfg.gen_batch = 12;

  TrainResult dp_path = train(ds, arch, cfg, 31);
  oracle::RefWganResult ref = oracle::reference_wgan_run(ds, arch, cfg, 31, 3);

  REQUIRE(dp_path.model.theta_d.size() == ref.theta_d.size());
  for (std::size_t t = 0; t < ref.theta_d.size(); ++t) {
    for (std::size_t i = 0; i < ref.theta_d[t].size(); ++i) {
      CHECK(std::abs(dp_path.model.theta_d[t][i] - ref.theta_d[t][i]) < 1e-9);
    }
  }
  for (std::size_t t = 0; t < ref.theta_g.size(); ++t) {
    for (std::size_t i = 0; i < ref.theta_g[t].size(); ++i) {
      CHECK(std::abs(dp_path.model.theta_g[t][i] - ref.theta_g[t][i]) < 1e-9);
    }
  }
  CHECK(dp_path.privacy.epsilon == std::numeric_limits<double>::infinity());
}

TEST_CASE("generate: schema-conformant rows, degenerate softmax head always yields its hot level") {
  Schema s = mixed_schema();
  GanModel model = build_model(tiny_arch(), s, 19);
  Rng rng(23);
  Table rows = generate(model, 200, rng);
  REQUIRE(rows.n_rows() == 200);
  for (std::size_t r = 0; r < rows.n_rows(); ++r) {
    CHECK(rows.cell(r, 0) >= -2.0);
    CHECK(rows.cell(r, 0) <= 2.0);
    CHECK(rows.cell(r, 1) >= 0.0);
    CHECK(rows.cell(r, 1) <= 2.0);
    CHECK(rows.cell(r, 2) >= 0.0);
    CHECK(rows.cell(r, 2) <= 1.0);
  }

  // force the cat3 head to (1,0,0) through a huge output bias
  GanModel forced = build_model(tiny_arch(), s, 19);
  Tensor& wout = forced.theta_g[forced.theta_g.size() - 2];
  Tensor& bout = forced.theta_g.back();
  for (std::size_t i = 0; i < wout.size(); ++i) wout[i] = 0.0;
  bout[1] = 60.0;  // cat3 level 'a' logit
  bout[2] = 0.0;
  bout[3] = 0.0;
  Rng rng2(29);
  Table forced_rows = generate(forced, 500, rng2);
  for (std::size_t r = 0; r < forced_rows.n_rows(); ++r) CHECK(forced_rows.cell(r, 1) == 0.0);
}

TEST_CASE("generate determinism and count zero") {
  Schema s = mixed_schema();
  GanModel model = build_model(tiny_arch(), s, 19);
  Rng r1(5), r2(5);
  Table a = generate(model, 50, r1);
  Table b = generate(model, 50, r2);
  CHECK(a.cells() == b.cells());
  Rng r3(6);
  Table empty = generate(model, 0, r3);
  CHECK(empty.n_rows() == 0);
}

TEST_CASE("critic score fn refuses stripped models and scores finite values") {
  Schema s = mixed_schema();
  GanModel model = build_model(tiny_arch(), s, 33);
  RowScoreFn fn = critic_score_fn(model);
  std::vector<double> row(s.encoded_width(), 0.1);
  row[1] = 1.0;
  row[2] = 0.0;
  row[3] = 0.0;
  row[4] = 1.0;
  row[5] = 0.0;
  double score = fn(row);
  CHECK(std::isfinite(score));

  GanModel stripped = model;
  stripped.has_discriminator = false;
  stripped.theta_d.clear();
  CHECK_THROWS_AS(critic_score_fn(stripped), ConfigError);
}

TEST_CASE("non-private smoke run: critic loss trends down on the six-gaussian set (5-seed majority)") {
  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Table data = make_gaussian_mixture(600, seed * 100);
    EncodedDataset ds = encode(data);
    GanArchitecture arch;
    arch.noise_dim = 8;
    arch.gen_hidden = {32};
    arch.disc_hidden = {32};
    TrainLoopConfig cfg;
    cfg.dp.clip_bound = 1e9;
    cfg.dp.noise_scale = 0.0;
    cfg.dp.lot_size = 32.0;
    cfg.dp.learning_rate = 0.03;
    cfg.dp.decay_floor = 1.0;
    cfg.n_disc = 2;
    cfg.max_generator_iterations = 200;
    cfg.gen_batch = 32;
    cfg.gen_learning_rate = 5e-4;
    TrainResult res = train(ds, arch, cfg, seed);
    REQUIRE(res.trace.rows.size() >= 20);
    double early = 0.0, late = 0.0;
    for (std::size_t i = 1; i <= 10; ++i) {
      early += std::abs(res.trace.rows[i].wasserstein);
      late += std::abs(res.trace.rows[res.trace.rows.size() - i].wasserstein);
    }
    if (late < early) ++improved;
  }
  CHECK(improved >= 3);
}
