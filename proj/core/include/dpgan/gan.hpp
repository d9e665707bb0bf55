#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpgan/accountant.hpp"
#include "dpgan/attack.hpp"
#include "dpgan/dp_optim.hpp"
#include "dpgan/graph.hpp"
#include "dpgan/rng.hpp"
#include "dpgan/schema.hpp"
#include "dpgan/tensor.hpp"

namespace dpgan {

enum class GeneratorKind { kMlp, kRecurrent };

struct GanArchitecture {
  GeneratorKind generator_kind = GeneratorKind::kMlp;
  std::vector<std::size_t> gen_hidden = {128, 128};
  std::size_t noise_dim = 64;
  std::size_t lstm_hidden = 64;  // recurrent generator cell width
  std::vector<std::size_t> disc_hidden = {128, 128};
};

/// Output head layout derived from the schema: one tanh unit per continuous
/// cell (series cells included), one softmax group per categorical column.
struct HeadSpec {
  enum Kind { kTanhUnit, kSoftmaxGroup };
  Kind kind;
  std::size_t offset;  // into the encoded row
  std::size_t width;
};
std::vector<HeadSpec> head_layout(const Schema& schema);

struct GanModel {
  GanArchitecture arch;
  Schema schema;
  std::vector<Tensor> theta_g;
  std::vector<Tensor> theta_d;
  std::uint64_t build_seed = 0;
  bool has_discriminator = true;
};

struct TrainLoopConfig {
  DpSgdConfig dp;
  double epsilon_target = 8.0;
  double delta = 1e-5;
  std::size_t n_disc = 5;      // critic iterations per generator iteration
  std::size_t batch_count = 1; // lot draws per critic iteration
  double gp_weight = 10.0;
  std::size_t max_generator_iterations = 1000;
  std::size_t metrics_every = 1;
  std::size_t gen_batch = 0;  // m noise draws per generator update; 0: lot_size
  double gen_learning_rate = 1e-4;
  AdamConfig adam;

  void validate() const;
  std::size_t resolved_gen_batch() const;
};

struct TraceRow {
  std::size_t iteration = 0;
  double wasserstein = 0.0;  // lot estimate of E[D(real)] - E[D(fake)]
  double clip_bound = 0.0;   // C in effect during this iteration
  double epsilon = 0.0;      // cumulative after this iteration; +inf when sigma == 0
};

/// Wall-clock lives in the run sidecar, not here: the trace file is part of
/// the byte-reproducibility contract.
struct MetricsTrace {
  std::vector<TraceRow> rows;
  std::string to_csv() const;
};

struct TrainResult {
  GanModel model;
  MetricsTrace trace;
  PrivacySpent privacy;
  std::size_t generator_iterations = 0;
  bool diverged = false;
  std::string diagnostic;
  double wall_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// graph builders (exposed for tests and the reference training path)

/// How parameter leaves enter a built graph: bound feeds (training; the
/// caller binds model tensors) or in-graph parameters (finite-difference
/// checks).
enum class ParamMode { kFeed, kGraphParam };

struct GeneratorGraph {
  ComputeGraph graph;
  NodeId noise = 0;  // [batch, noise_dim]
  NodeId out = 0;    // [batch, encoded_width], head activations applied
  std::vector<NodeId> theta;
};
GeneratorGraph build_generator_graph(const GanArchitecture& arch, const Schema& schema, std::size_t batch,
                                     ParamMode mode = ParamMode::kFeed, const GanModel* init = nullptr);

struct CriticLossGraph {
  ComputeGraph graph;
  NodeId x_real = 0;  // [batch, W]
  NodeId x_fake = 0;  // [batch, W]
  NodeId u = 0;       // [batch, 1] interpolation coefficients
  NodeId loss = 0;    // mean(D(fake)) - mean(D(real)) + gp_weight * mean(penalty)
  NodeId penalty = 0; // mean over batch of (|grad_xhat D| - 1)^2
  NodeId wasserstein = 0;  // mean(D(real)) - mean(D(fake))
  std::vector<NodeId> theta;
  std::vector<NodeId> grads;  // d loss / d theta_d
};
CriticLossGraph build_critic_loss_graph(const GanArchitecture& arch, const Schema& schema, std::size_t batch,
                                        double gp_weight, ParamMode mode = ParamMode::kFeed,
                                        const GanModel* init = nullptr);

struct GeneratorLossGraph {
  ComputeGraph graph;
  NodeId noise = 0;  // [m, noise_dim]
  NodeId loss = 0;   // -mean(D(G(z))); reads no data rows by construction
  std::vector<NodeId> theta_g;
  std::vector<NodeId> theta_d;
  std::vector<NodeId> grads;  // d loss / d theta_g
};
GeneratorLossGraph build_generator_loss_graph(const GanArchitecture& arch, const Schema& schema, std::size_t m,
                                              ParamMode mode = ParamMode::kFeed, const GanModel* init = nullptr);

struct CriticScoreGraph {
  ComputeGraph graph;
  NodeId x = 0;       // [batch, W]
  NodeId scores = 0;  // [batch, 1]
  std::vector<NodeId> theta;
};
CriticScoreGraph build_critic_score_graph(const GanArchitecture& arch, const Schema& schema, std::size_t batch);

// ---------------------------------------------------------------------------
// operations

GanModel build_model(const GanArchitecture& arch, const Schema& schema, std::uint64_t seed);

/// One batched generator pass: noise [B, noise_dim] -> encoded rows [B, W].
Tensor generator_forward(const GanModel& model, const Tensor& noise_batch);

/// Mean improved-WGAN penalty over the batch, with interpolation
/// coefficients drawn from rng (one per row).
double gradient_penalty(const GanModel& model, const Tensor& x_real, const Tensor& x_fake, double gp_weight, Rng& rng);

/// Critic objective mean(D(fake)) - mean(D(real)) + gradient penalty.
double discriminator_loss(const GanModel& model, const Tensor& x_real, const Tensor& x_fake, double gp_weight,
                          Rng& rng);

/// -mean(D(G(z))); touches no dataset rows.
double generator_loss(const GanModel& model, const Tensor& noise_batch);

/// Algorithm-1 training loop, terminating when the next generator iteration
/// would overshoot the epsilon target (or at the iteration cap; with
/// sigma == 0 the accountant is bypassed and only the cap stops training).
TrainResult train(const EncodedDataset& dataset, const GanArchitecture& arch, const TrainLoopConfig& cfg,
                  std::uint64_t seed);

/// Draws noise, forwards the generator, samples every categorical head from
/// its softmax probabilities and denormalizes continuous heads. Output rows
/// conform to the model schema.
Table generate(const GanModel& model, std::size_t count, Rng& rng);

/// Row scorer backed by the stored discriminator (for membership attacks).
RowScoreFn critic_score_fn(const GanModel& model);

}  // namespace dpgan
