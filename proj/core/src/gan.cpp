#include "dpgan/gan.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "dpgan/error.hpp"

namespace dpgan {

void TrainLoopConfig::validate() const {
  dp.validate();
  if (!(epsilon_target > 0.0)) throw ConfigError("train: epsilon_target must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("train: delta must be in (0,1)");
  if (n_disc < 1) throw ConfigError("train: n_disc must be >= 1");
  if (batch_count < 1) throw ConfigError("train: batch_count must be >= 1");
  if (!(gp_weight >= 0.0)) throw ConfigError("train: gp_weight must be >= 0");
  if (max_generator_iterations < 1) throw ConfigError("train: max_generator_iterations must be >= 1");
  if (metrics_every < 1) throw ConfigError("train: metrics_every must be >= 1");
  if (!(gen_learning_rate > 0.0)) throw ConfigError("train: gen_learning_rate must be > 0");
}

std::size_t TrainLoopConfig::resolved_gen_batch() const {
  if (gen_batch > 0) return gen_batch;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(dp.lot_size)));
}

std::vector<HeadSpec> head_layout(const Schema& schema) {
  std::vector<HeadSpec> heads;
  for (std::size_t c = 0; c < schema.column_count(); ++c) {
    const Column& col = schema.column(c);
    std::size_t off = schema.encoded_offset(c);
    if (col.is_categorical()) {
      heads.push_back({HeadSpec::kSoftmaxGroup, off, col.categorical().levels.size()});
    } else {
      heads.push_back({HeadSpec::kTanhUnit, off, col.encoded_width()});
    }
  }
  return heads;
}

namespace {

struct ParamSpec {
  std::string name;
  Shape shape;
  bool weight;  // weight matrices get the uniform fan init, biases start at 0
};

std::vector<ParamSpec> generator_param_specs(const GanArchitecture& arch, const Schema& schema) {
  std::vector<ParamSpec> specs;
  if (arch.generator_kind == GeneratorKind::kMlp) {
    std::size_t in = arch.noise_dim;
    for (std::size_t i = 0; i < arch.gen_hidden.size(); ++i) {
      std::size_t h = arch.gen_hidden[i];
      specs.push_back({"g.W" + std::to_string(i), {in, h}, true});
      specs.push_back({"g.b" + std::to_string(i), {h}, false});
      in = h;
    }
    specs.push_back({"g.Wout", {in, schema.encoded_width()}, true});
    specs.push_back({"g.bout", {schema.encoded_width()}, false});
  } else {
    std::size_t h = arch.lstm_hidden;
    specs.push_back({"g.Wh0", {arch.noise_dim, h}, true});
    specs.push_back({"g.bh0", {h}, false});
    specs.push_back({"g.Wc0", {arch.noise_dim, h}, true});
    specs.push_back({"g.bc0", {h}, false});
    specs.push_back({"g.Wx", {1, 4 * h}, true});
    specs.push_back({"g.Wh", {h, 4 * h}, true});
    specs.push_back({"g.b", {4 * h}, false});
    specs.push_back({"g.Wo", {h, 1}, true});
    specs.push_back({"g.bo", {1}, false});
  }
  return specs;
}

std::vector<ParamSpec> critic_param_specs(const GanArchitecture& arch, const Schema& schema) {
  std::vector<ParamSpec> specs;
  std::size_t in = schema.encoded_width();
  for (std::size_t i = 0; i < arch.disc_hidden.size(); ++i) {
    std::size_t h = arch.disc_hidden[i];
    specs.push_back({"d.W" + std::to_string(i), {in, h}, true});
    specs.push_back({"d.b" + std::to_string(i), {h}, false});
    in = h;
  }
  specs.push_back({"d.Wout", {in, 1}, true});
  specs.push_back({"d.bout", {1}, false});
  return specs;
}

std::vector<NodeId> emit_params(ComputeGraph& g, const std::vector<ParamSpec>& specs, ParamMode mode,
                                const std::vector<Tensor>* init) {
  std::vector<NodeId> ids;
  ids.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (mode == ParamMode::kFeed) {
      ids.push_back(g.input(specs[i].shape, specs[i].name));
    } else {
      if (!init || init->size() != specs.size()) {
        throw std::invalid_argument("graph builder: kGraphParam mode needs an initialized model");
      }
      ids.push_back(g.parameter((*init)[i], specs[i].name));
    }
  }
  return ids;
}

/// y = x W + b, bias tiled over the batch with a ones-column matmul.
NodeId affine(ComputeGraph& g, NodeId x, NodeId w, NodeId b, NodeId ones_col) {
  const Shape& bs = g.node(b).shape;
  NodeId b_row = g.apply(OpKind::kReshape, {b}, {.shape = {1, bs[0]}});
  NodeId tiled = g.apply(OpKind::kMatmul, {ones_col, b_row});
  return g.apply(OpKind::kAdd, {g.apply(OpKind::kMatmul, {x, w}), tiled});
}

NodeId append_critic(ComputeGraph& g, const GanArchitecture& arch, std::span<const NodeId> theta, NodeId x,
                     NodeId ones_col) {
  NodeId cur = x;
  std::size_t p = 0;
  for (std::size_t i = 0; i < arch.disc_hidden.size(); ++i) {
    cur = g.apply(OpKind::kRelu, {affine(g, cur, theta[p], theta[p + 1], ones_col)});
    p += 2;
  }
  return affine(g, cur, theta[p], theta[p + 1], ones_col);  // [batch, 1]
}

/// Applies the per-column head activations to the raw generator output.
/// Adjacent tanh spans merge into one slice; adjacent softmax groups merge
/// into one grouped-softmax node.
NodeId apply_heads(ComputeGraph& g, const Schema& schema, NodeId raw, std::size_t batch) {
  std::vector<HeadSpec> heads = head_layout(schema);
  std::size_t width = schema.encoded_width();

  struct Span {
    HeadSpec::Kind kind;
    std::size_t offset;
    std::size_t width;
    std::vector<SoftmaxGroup> groups;
  };
  std::vector<Span> spans;
  for (const HeadSpec& h : heads) {
    if (!spans.empty() && spans.back().kind == h.kind) {
      Span& s = spans.back();
      if (h.kind == HeadSpec::kSoftmaxGroup) s.groups.push_back({h.offset - s.offset, h.width});
      s.width += h.width;
      continue;
    }
    Span s{h.kind, h.offset, h.width, {}};
    if (h.kind == HeadSpec::kSoftmaxGroup) s.groups.push_back({0, h.width});
    spans.push_back(std::move(s));
  }

  std::vector<NodeId> parts;
  parts.reserve(spans.size());
  for (const Span& s : spans) {
    NodeId piece = raw;
    if (!(s.offset == 0 && s.width == width)) {
      piece = g.apply(OpKind::kSlice, {raw}, {.begin = {0, s.offset}, .end = {batch, s.offset + s.width}});
    }
    if (s.kind == HeadSpec::kTanhUnit) {
      parts.push_back(g.apply(OpKind::kTanh, {piece}));
    } else {
      parts.push_back(g.apply(OpKind::kSoftmax, {piece}, {.groups = s.groups}));
    }
  }
  if (parts.size() == 1) return parts[0];
  return g.apply(OpKind::kConcat, parts, {.axis = 1});
}

NodeId append_generator(ComputeGraph& g, const GanArchitecture& arch, const Schema& schema,
                        std::span<const NodeId> theta, NodeId noise, std::size_t batch, NodeId ones_col) {
  if (arch.generator_kind == GeneratorKind::kMlp) {
    NodeId cur = noise;
    std::size_t p = 0;
    for (std::size_t i = 0; i < arch.gen_hidden.size(); ++i) {
      cur = g.apply(OpKind::kRelu, {affine(g, cur, theta[p], theta[p + 1], ones_col)});
      p += 2;
    }
    NodeId raw = affine(g, cur, theta[p], theta[p + 1], ones_col);
    return apply_heads(g, schema, raw, batch);
  }

  // recurrent generator: exactly one series column
  if (schema.column_count() != 1 || !schema.column(0).is_series()) {
    throw ConfigError("recurrent generator requires a schema with exactly one series column");
  }
  std::size_t steps = schema.column(0).series().length;
  std::size_t h_dim = arch.lstm_hidden;
  std::size_t p = 0;
  NodeId w_h0 = theta[p++], b_h0 = theta[p++];
  NodeId w_c0 = theta[p++], b_c0 = theta[p++];
  NodeId w_x = theta[p++], w_h = theta[p++], b_gates = theta[p++];
  NodeId w_o = theta[p++], b_o = theta[p++];

  NodeId h = g.apply(OpKind::kTanh, {affine(g, noise, w_h0, b_h0, ones_col)});
  NodeId c = g.apply(OpKind::kTanh, {affine(g, noise, w_c0, b_c0, ones_col)});

  NodeId gate_bias = g.apply(OpKind::kMatmul, {ones_col, g.apply(OpKind::kReshape, {b_gates}, {.shape = {1, 4 * h_dim}})});
  NodeId out_bias = g.apply(OpKind::kMatmul, {ones_col, g.apply(OpKind::kReshape, {b_o}, {.shape = {1, 1}})});
  NodeId x = g.constant(Tensor::zeros({batch, 1}), "y.init");

  auto cols = [&](NodeId node, std::size_t lo, std::size_t hi) {
    return g.apply(OpKind::kSlice, {node}, {.begin = {0, lo}, .end = {batch, hi}});
  };

  std::vector<NodeId> outputs;
  outputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    NodeId gates = g.apply(OpKind::kAdd, {g.apply(OpKind::kAdd, {g.apply(OpKind::kMatmul, {x, w_x}),
                                                                 g.apply(OpKind::kMatmul, {h, w_h})}),
                                          gate_bias});
    NodeId gi = g.apply(OpKind::kSigmoid, {cols(gates, 0, h_dim)});
    NodeId gf = g.apply(OpKind::kSigmoid, {cols(gates, h_dim, 2 * h_dim)});
    NodeId gc = g.apply(OpKind::kTanh, {cols(gates, 2 * h_dim, 3 * h_dim)});
    NodeId go = g.apply(OpKind::kSigmoid, {cols(gates, 3 * h_dim, 4 * h_dim)});
    c = g.apply(OpKind::kAdd, {g.apply(OpKind::kMultiply, {gf, c}), g.apply(OpKind::kMultiply, {gi, gc})});
    h = g.apply(OpKind::kMultiply, {go, g.apply(OpKind::kTanh, {c})});
    NodeId y = g.apply(OpKind::kTanh, {g.apply(OpKind::kAdd, {g.apply(OpKind::kMatmul, {h, w_o}), out_bias})});
    outputs.push_back(y);
    x = y;  // autoregressive feedback
  }
  return g.apply(OpKind::kConcat, outputs, {.axis = 1});
}

NodeId batch_ones(ComputeGraph& g, std::size_t batch) { return g.constant(Tensor::full({batch, 1}, 1.0), "ones"); }

}  // namespace

GeneratorGraph build_generator_graph(const GanArchitecture& arch, const Schema& schema, std::size_t batch,
                                     ParamMode mode, const GanModel* init) {
  GeneratorGraph out;
  out.noise = out.graph.input({batch, arch.noise_dim}, "z");
  out.theta = emit_params(out.graph, generator_param_specs(arch, schema), mode, init ? &init->theta_g : nullptr);
  out.out = append_generator(out.graph, arch, schema, out.theta, out.noise, batch, batch_ones(out.graph, batch));
  return out;
}

CriticLossGraph build_critic_loss_graph(const GanArchitecture& arch, const Schema& schema, std::size_t batch,
                                        double gp_weight, ParamMode mode, const GanModel* init) {
  CriticLossGraph out;
  ComputeGraph& g = out.graph;
  std::size_t width = schema.encoded_width();
  out.x_real = g.input({batch, width}, "x_real");
  out.x_fake = g.input({batch, width}, "x_fake");
  out.u = g.input({batch, 1}, "u");
  out.theta = emit_params(g, critic_param_specs(arch, schema), mode, init ? &init->theta_d : nullptr);
  NodeId ones_col = batch_ones(g, batch);

  NodeId d_real = append_critic(g, arch, out.theta, out.x_real, ones_col);
  NodeId d_fake = append_critic(g, arch, out.theta, out.x_fake, ones_col);

  NodeId ones_row = g.constant(Tensor::full({1, width}, 1.0));
  NodeId u_tiled = g.apply(OpKind::kMatmul, {out.u, ones_row});
  NodeId ones_bw = g.constant(Tensor::full({batch, width}, 1.0));
  NodeId x_hat = g.apply(OpKind::kAdd, {g.apply(OpKind::kMultiply, {u_tiled, out.x_real}),
                                        g.apply(OpKind::kMultiply,
                                                {g.apply(OpKind::kSubtract, {ones_bw, u_tiled}), out.x_fake})});
  NodeId d_hat = append_critic(g, arch, out.theta, x_hat, ones_col);
  NodeId d_hat_sum = g.apply(OpKind::kSumAll, {d_hat});
  NodeId grad_x = g.backward(d_hat_sum, std::vector<NodeId>{x_hat})[0];  // rows are independent

  NodeId ones_w1 = g.constant(Tensor::full({width, 1}, 1.0));
  NodeId norm_sq = g.apply(OpKind::kMatmul, {g.apply(OpKind::kSquare, {grad_x}), ones_w1});
  // epsilon under the root keeps the derivative finite when a relu critic
  // zeroes the input gradient
  NodeId norm = g.apply(OpKind::kSqrt, {g.apply(OpKind::kAdd, {norm_sq, g.constant(Tensor::full({batch, 1}, 1e-12))})});
  NodeId pen_vec = g.apply(OpKind::kSquare, {g.apply(OpKind::kSubtract, {norm, g.constant(Tensor::full({batch, 1}, 1.0))})});
  out.penalty = g.apply(OpKind::kMeanAll, {pen_vec});

  NodeId mean_real = g.apply(OpKind::kMeanAll, {d_real});
  NodeId mean_fake = g.apply(OpKind::kMeanAll, {d_fake});
  out.wasserstein = g.apply(OpKind::kSubtract, {mean_real, mean_fake});
  out.loss = g.apply(OpKind::kAdd, {g.apply(OpKind::kSubtract, {mean_fake, mean_real}),
                                    g.apply(OpKind::kScale, {out.penalty}, {.scale = gp_weight})});
  out.grads = g.backward(out.loss, out.theta);
  return out;
}

GeneratorLossGraph build_generator_loss_graph(const GanArchitecture& arch, const Schema& schema, std::size_t m,
                                              ParamMode mode, const GanModel* init) {
  GeneratorLossGraph out;
  ComputeGraph& g = out.graph;
  out.noise = g.input({m, arch.noise_dim}, "z");
  out.theta_g = emit_params(g, generator_param_specs(arch, schema), mode, init ? &init->theta_g : nullptr);
  out.theta_d = emit_params(g, critic_param_specs(arch, schema), mode, init ? &init->theta_d : nullptr);
  NodeId ones_col = batch_ones(g, m);
  NodeId fake = append_generator(g, arch, schema, out.theta_g, out.noise, m, ones_col);
  NodeId scores = append_critic(g, arch, out.theta_d, fake, ones_col);
  out.loss = g.apply(OpKind::kScale, {g.apply(OpKind::kMeanAll, {scores})}, {.scale = -1.0});
  out.grads = g.backward(out.loss, out.theta_g);
  return out;
}

CriticScoreGraph build_critic_score_graph(const GanArchitecture& arch, const Schema& schema, std::size_t batch) {
  CriticScoreGraph out;
  out.x = out.graph.input({batch, schema.encoded_width()}, "x");
  out.theta = emit_params(out.graph, critic_param_specs(arch, schema), ParamMode::kFeed, nullptr);
  out.scores = append_critic(out.graph, arch, out.theta, out.x, batch_ones(out.graph, batch));
  return out;
}

GanModel build_model(const GanArchitecture& arch, const Schema& schema, std::uint64_t seed) {
  GanModel model;
  model.arch = arch;
  model.schema = schema;
  model.build_seed = seed;
  Rng rng(Rng::derive_seed(seed, "weight_init"));
  auto init_set = [&](const std::vector<ParamSpec>& specs, std::vector<Tensor>& out) {
    out.clear();
    out.reserve(specs.size());
    for (const ParamSpec& s : specs) {
      Tensor t(s.shape);
      if (s.weight) {
        double fan_in = static_cast<double>(s.shape[0]);
        double fan_out = static_cast<double>(s.shape.size() > 1 ? s.shape[1] : s.shape[0]);
        double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
      }
      out.push_back(std::move(t));
    }
  };
  init_set(generator_param_specs(arch, schema), model.theta_g);
  init_set(critic_param_specs(arch, schema), model.theta_d);
  return model;
}

namespace {

void bind_all(Evaluator& ev, std::span<const NodeId> ids, std::span<const Tensor> values) {
  for (std::size_t i = 0; i < ids.size(); ++i) ev.bind(ids[i], &values[i]);
}

void fill_normal(Tensor& t, Rng& rng) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
}

}  // namespace

Tensor generator_forward(const GanModel& model, const Tensor& noise_batch) {
  if (noise_batch.rank() != 2 || noise_batch.cols() != model.arch.noise_dim) {
    throw std::invalid_argument("generator_forward: noise must be [batch, noise_dim]");
  }
  GeneratorGraph gg = build_generator_graph(model.arch, model.schema, noise_batch.rows());
  Evaluator ev(gg.graph, {gg.out});
  bind_all(ev, gg.theta, model.theta_g);
  ev.bind(gg.noise, &noise_batch);
  ev.run();
  return ev.value(gg.out);
}

namespace {

/// Shared evaluation for the standalone critic-side ops.
struct CriticEval {
  CriticLossGraph graph;
  Tensor u;
  double loss = 0.0, penalty = 0.0;
};

CriticEval eval_critic_loss(const GanModel& model, const Tensor& x_real, const Tensor& x_fake, double gp_weight,
                            Rng& rng) {
  if (!x_real.same_shape(x_fake) || x_real.rank() != 2) {
    throw std::invalid_argument("discriminator_loss: real/fake batches must share a [batch, width] shape");
  }
  CriticEval ce;
  ce.graph = build_critic_loss_graph(model.arch, model.schema, x_real.rows(), gp_weight);
  ce.u = Tensor({x_real.rows(), 1});
  for (std::size_t i = 0; i < ce.u.size(); ++i) ce.u[i] = rng.uniform();
  Evaluator ev(ce.graph.graph, {ce.graph.loss, ce.graph.penalty});
  bind_all(ev, ce.graph.theta, model.theta_d);
  ev.bind(ce.graph.x_real, &x_real);
  ev.bind(ce.graph.x_fake, &x_fake);
  ev.bind(ce.graph.u, &ce.u);
  ev.run();
  ce.loss = ev.value(ce.graph.loss)[0];
  ce.penalty = ev.value(ce.graph.penalty)[0];
  return ce;
}

}  // namespace

double gradient_penalty(const GanModel& model, const Tensor& x_real, const Tensor& x_fake, double gp_weight,
                        Rng& rng) {
  return gp_weight * eval_critic_loss(model, x_real, x_fake, gp_weight, rng).penalty;
}

double discriminator_loss(const GanModel& model, const Tensor& x_real, const Tensor& x_fake, double gp_weight,
                          Rng& rng) {
  return eval_critic_loss(model, x_real, x_fake, gp_weight, rng).loss;
}

double generator_loss(const GanModel& model, const Tensor& noise_batch) {
  GeneratorLossGraph gl = build_generator_loss_graph(model.arch, model.schema, noise_batch.rows());
  Evaluator ev(gl.graph, {gl.loss});
  bind_all(ev, gl.theta_g, model.theta_g);
  bind_all(ev, gl.theta_d, model.theta_d);
  ev.bind(gl.noise, &noise_batch);
  ev.run();
  return ev.value(gl.loss)[0];
}

std::string MetricsTrace::to_csv() const {
  auto fmt = [](double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  std::ostringstream os;
  os << "iteration,wasserstein,clip_bound,epsilon\n";
  for (const TraceRow& r : rows) {
    os << r.iteration << "," << fmt(r.wasserstein) << "," << fmt(r.clip_bound) << "," << fmt(r.epsilon) << "\n";
  }
  return os.str();
}

TrainResult train(const EncodedDataset& dataset, const GanArchitecture& arch, const TrainLoopConfig& cfg,
                  std::uint64_t seed) {
  cfg.validate();
  if (dataset.n_rows == 0) throw DataError("train: dataset is empty");
  const Schema& schema = dataset.schema;
  const std::size_t width = schema.encoded_width();
  const std::size_t n_records = dataset.n_rows;
  const double q = std::min(1.0, cfg.dp.lot_size / static_cast<double>(n_records));
  const bool is_private = cfg.dp.noise_scale > 0.0;
  const std::uint64_t steps_per_iter = cfg.n_disc * cfg.batch_count;
  const std::size_t gen_batch = cfg.resolved_gen_batch();

  TrainResult result;
  result.model = build_model(arch, schema, seed);
  GanModel& model = result.model;

  Rng root(seed);
  Rng lot_rng = root.fork("lot_sampling");
  Rng fake_noise_rng = root.fork("critic_fake_noise");
  Rng interp_rng = root.fork("gp_interpolation");
  Rng dp_noise_rng = root.fork("dp_noise");
  Rng gen_noise_rng = root.fork("generator_noise");

  CriticLossGraph critic = build_critic_loss_graph(arch, schema, 1, cfg.gp_weight);
  GeneratorGraph gen_fwd = build_generator_graph(arch, schema, 1);
  GeneratorLossGraph gen_loss = build_generator_loss_graph(arch, schema, gen_batch);

  std::vector<NodeId> critic_outputs(critic.grads);
  critic_outputs.push_back(critic.wasserstein);
  Evaluator critic_ev(critic.graph, critic_outputs);
  Evaluator gen_fwd_ev(gen_fwd.graph, {gen_fwd.out});
  Evaluator gen_loss_ev(gen_loss.graph, gen_loss.grads);

  bind_all(critic_ev, critic.theta, model.theta_d);
  bind_all(gen_fwd_ev, gen_fwd.theta, model.theta_g);
  bind_all(gen_loss_ev, gen_loss.theta_g, model.theta_g);
  bind_all(gen_loss_ev, gen_loss.theta_d, model.theta_d);

  Tensor x_real({1, width}), x_fake({1, width}), u({1, 1});
  Tensor z1({1, arch.noise_dim});
  Tensor zm({gen_batch, arch.noise_dim});
  critic_ev.bind(critic.x_real, &x_real);
  critic_ev.bind(critic.x_fake, &x_fake);
  critic_ev.bind(critic.u, &u);
  gen_fwd_ev.bind(gen_fwd.noise, &z1);
  gen_loss_ev.bind(gen_loss.noise, &zm);

  std::unique_ptr<MomentAccountant> accountant;
  if (is_private) accountant = std::make_unique<MomentAccountant>(MechanismParams{q, cfg.dp.noise_scale});

  AdamState adam(model.theta_g, cfg.adam);
  DpSgdConfig dp = cfg.dp;
  std::vector<Tensor> snapshot_g = model.theta_g;
  std::vector<Tensor> snapshot_d = model.theta_d;

  auto t_start = std::chrono::steady_clock::now();
  double wasserstein_estimate = 0.0;
  std::size_t iter = 0;
  for (; iter < cfg.max_generator_iterations; ++iter) {
    if (is_private &&
        accountant->epsilon_for_delta_at(accountant->steps() + steps_per_iter, cfg.delta) > cfg.epsilon_target) {
      break;  // the next iteration would overshoot the budget
    }
    const double c_in_effect = dp.clip_bound;
    try {
      double wass_sum = 0.0;
      std::size_t wass_count = 0;
      for (std::size_t t = 0; t < cfg.n_disc; ++t) {
        for (std::size_t j = 0; j < cfg.batch_count; ++j) {
          std::vector<std::size_t> lot = sample_lot(n_records, q, lot_rng);
          std::vector<GradientVector> clipped;
          clipped.reserve(lot.size());
          for (std::size_t rec : lot) {
            std::copy(dataset.row(rec), dataset.row(rec) + width, x_real.data());
            fill_normal(z1, fake_noise_rng);
            gen_fwd_ev.run();
            const Tensor& fake = gen_fwd_ev.value(gen_fwd.out);
            std::copy(fake.data(), fake.data() + width, x_fake.data());
            u[0] = interp_rng.uniform();
            critic_ev.run();
            std::vector<Tensor> per_example;
            per_example.reserve(critic.grads.size());
            for (NodeId gid : critic.grads) per_example.push_back(critic_ev.value(gid));
            clipped.push_back(clip(GradientVector(std::move(per_example)), dp.clip_bound));
            wass_sum += critic_ev.value(critic.wasserstein)[0];
            ++wass_count;
          }
          GradientVector update = noisy_aggregate(clipped, model.theta_d, dp, dp_noise_rng);
          sgd_step(model.theta_d, update, dp.learning_rate);
        }
      }
      if (wass_count > 0) wasserstein_estimate = wass_sum / static_cast<double>(wass_count);

      dp = decay_clip(dp);
      if (is_private) accountant->record_steps(steps_per_iter);

      fill_normal(zm, gen_noise_rng);
      gen_loss_ev.run();
      std::vector<Tensor> gen_grads;
      gen_grads.reserve(gen_loss.grads.size());
      for (NodeId gid : gen_loss.grads) gen_grads.push_back(gen_loss_ev.value(gid));
      adam.step(model.theta_g, GradientVector(std::move(gen_grads)), cfg.gen_learning_rate);
    } catch (const NumericError& e) {
      result.diverged = true;
      result.diagnostic = e.what();
      model.theta_g = snapshot_g;  // last-good parameters
      model.theta_d = snapshot_d;
      break;
    }

    snapshot_g = model.theta_g;
    snapshot_d = model.theta_d;

    if (iter % cfg.metrics_every == 0 || iter + 1 == cfg.max_generator_iterations) {
      TraceRow row;
      row.iteration = iter;
      row.wasserstein = wasserstein_estimate;
      row.clip_bound = c_in_effect;  // the C the critic updates actually used
      row.epsilon = is_private ? accountant->epsilon_for_delta(cfg.delta) : std::numeric_limits<double>::infinity();
      result.trace.rows.push_back(row);
    }
  }

  result.generator_iterations = iter;
  result.privacy.delta = cfg.delta;
  result.privacy.epsilon =
      is_private ? accountant->epsilon_for_delta(cfg.delta) : std::numeric_limits<double>::infinity();
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

Table generate(const GanModel& model, std::size_t count, Rng& rng) {
  const Schema& schema = model.schema;
  Table out(schema);
  if (count == 0) return out;

  const std::size_t width = schema.encoded_width();
  Tensor noise({count, model.arch.noise_dim});
  fill_normal(noise, rng);

  std::vector<double> encoded(count * width);
  constexpr std::size_t kChunk = 256;
  std::size_t done = 0;
  while (done < count) {
    std::size_t batch = std::min(kChunk, count - done);
    GeneratorGraph gg = build_generator_graph(model.arch, model.schema, batch);
    Evaluator ev(gg.graph, {gg.out});
    bind_all(ev, gg.theta, model.theta_g);
    Tensor z({batch, model.arch.noise_dim});
    std::copy(noise.data() + done * model.arch.noise_dim, noise.data() + (done + batch) * model.arch.noise_dim,
              z.data());
    ev.bind(gg.noise, &z);
    ev.run();
    const Tensor& o = ev.value(gg.out);
    std::copy(o.data(), o.data() + batch * width, encoded.data() + done * width);
    done += batch;
  }

  std::vector<double> row(schema.raw_width());
  for (std::size_t r = 0; r < count; ++r) {
    const double* enc = encoded.data() + r * width;
    std::size_t flat = 0;
    for (std::size_t c = 0; c < schema.column_count(); ++c) {
      const Column& col = schema.column(c);
      const double* head = enc + schema.encoded_offset(c);
      if (col.is_continuous()) {
        const auto& k = col.continuous();
        row[flat++] = std::clamp(k.min + (head[0] + 1.0) * 0.5 * (k.max - k.min), k.min, k.max);
      } else if (col.is_categorical()) {
        std::size_t levels = col.categorical().levels.size();
        double pick = rng.uniform();
        double acc = 0.0;
        std::size_t chosen = levels - 1;
        for (std::size_t l = 0; l < levels; ++l) {
          acc += head[l];
          if (pick < acc) {
            chosen = l;
            break;
          }
        }
        row[flat++] = static_cast<double>(chosen);
      } else {
        for (std::size_t k = 0; k < col.series().length; ++k) row[flat++] = head[k];
      }
    }
    out.append_row(row);
  }
  return out;
}

RowScoreFn critic_score_fn(const GanModel& model) {
  if (!model.has_discriminator) {
    throw ConfigError("critic_score_fn: checkpoint has no discriminator parameters (stripped release artifact)");
  }
  struct State {
    CriticScoreGraph graph;
    Evaluator ev;
    std::vector<Tensor> theta;
    Tensor x;
    State(const GanModel& m)
        : graph(build_critic_score_graph(m.arch, m.schema, 1)),
          ev(graph.graph, {graph.scores}),
          theta(m.theta_d),
          x({1, m.schema.encoded_width()}) {
      for (std::size_t i = 0; i < graph.theta.size(); ++i) ev.bind(graph.theta[i], &theta[i]);
      ev.bind(graph.x, &x);
    }
  };
  auto state = std::make_shared<State>(model);
  return [state](std::span<const double> row) {
    if (row.size() != state->x.size()) throw std::invalid_argument("critic score: row width mismatch");
    std::copy(row.begin(), row.end(), state->x.data());
    state->ev.run();
    return state->ev.value(state->graph.scores)[0];
  };
}

}  // namespace dpgan
