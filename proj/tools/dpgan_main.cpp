// dpgan: differentially private synthetic data CLI.
//
// Exit codes are a stable scripting contract:
//   0 success, 1 config/usage error, 2 data error, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dpgan/accountant.hpp"
#include "dpgan/attack.hpp"
#include "dpgan/checkpoint.hpp"
#include "dpgan/config.hpp"
#include "dpgan/error.hpp"
#include "dpgan/forest.hpp"
#include "dpgan/gan.hpp"
#include "dpgan/metrics.hpp"
#include "dpgan/synth.hpp"

namespace fs = std::filesystem;
using namespace dpgan;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
}

/// Every command leaves enough next to its outputs to reproduce the run.
void write_invocation(const fs::path& dir, const std::string& name, int argc, char** argv) {
  std::ostringstream os;
  for (int i = 0; i < argc; ++i) os << (i ? " " : "") << argv[i];
  os << "\n";
  write_text(dir / (name + ".invocation.txt"), os.str());
}

struct TrainArgs {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  bool strip_discriminator = false;
};

int cmd_train(const TrainArgs& args, int argc, char** argv) {
  RunConfig cfg = RunConfig::load(args.config_path);
  if (args.seed_given) cfg.seed = args.seed_override;
  if (!args.out_override.empty()) cfg.out_dir = args.out_override;
  cfg.validate();

  Schema schema = Schema::load(cfg.schema_path);
  Table table = load_csv(cfg.data_path, schema);
  EncodedDataset dataset = encode(table);

  TrainResult result = train(dataset, cfg.arch, cfg.train, cfg.seed);

  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  std::string resolved = cfg.serialize();
  write_text(out / "config.resolved.ini", resolved);
  write_text(out / "metrics.csv", result.trace.to_csv());
  write_invocation(out, "train", argc, argv);

  fs::path ckpt = out / "checkpoint.bin";
  save_checkpoint(result.model, ckpt.string(), args.strip_discriminator);
  CheckpointMeta meta;
  meta.seed = cfg.seed;
  meta.config_digest = config_digest(resolved);
  meta.is_private = cfg.train.dp.noise_scale > 0.0;
  meta.final_epsilon = result.privacy.epsilon;
  meta.delta = result.privacy.delta;
  meta.diverged = result.diverged;
  meta.wall_seconds = result.wall_seconds;
  save_checkpoint_meta(meta, meta_path_for(ckpt.string()));

  if (result.diverged) {
    std::cerr << "training diverged: " << result.diagnostic << "\n"
              << "last-good checkpoint written to " << ckpt.string() << "\n";
    return 3;
  }
  std::cout << "trained " << result.generator_iterations << " generator iterations";
  if (meta.is_private) std::cout << ", epsilon " << fmt(result.privacy.epsilon) << " at delta " << fmt(meta.delta);
  std::cout << "\ncheckpoint " << ckpt.string() << "\n";
  return 0;
}

int cmd_generate(const std::string& ckpt_path, std::size_t count, std::uint64_t seed, const std::string& out_path,
                 int argc, char** argv) {
  GanModel model = load_checkpoint(ckpt_path);
  Rng rng(Rng::derive_seed(seed, "generate"));
  Table rows = generate(model, count, rng);
  fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_csv(rows, out.string());
  write_invocation(out.has_parent_path() ? out.parent_path() : fs::path("."), out.filename().string(), argc, argv);
  std::cout << "wrote " << rows.n_rows() << " rows to " << out.string() << "\n";
  return 0;
}

/// The utility protocol needs a label; by convention it is the last binary
/// categorical column of the schema.
std::string infer_label_column(const Schema& schema) {
  for (std::size_t i = schema.column_count(); i-- > 0;) {
    const Column& c = schema.column(i);
    if (c.is_categorical() && c.categorical().levels.size() == 2) return c.name;
  }
  throw DataError("utility mode: schema has no binary categorical column to use as the label");
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_path, const std::string& schema_path,
                 const std::string& mode, std::uint64_t seed, const std::string& out_dir, int argc, char** argv) {
  if (mode != "distance" && mode != "utility") throw ConfigError("evaluate: --mode must be distance or utility");
  GanModel model = load_checkpoint(ckpt_path);
  Schema schema = Schema::load(schema_path);
  if (!(schema == model.schema)) {
    throw DataError("evaluate: schema file does not match the schema embedded in the checkpoint");
  }
  Table real = load_csv(data_path, schema);
  if (real.n_rows() == 0) throw DataError("evaluate: data file has no rows");

  fs::path out(out_dir);
  fs::create_directories(out);
  write_invocation(out, "evaluate", argc, argv);
  std::string run_id = fs::path(ckpt_path).filename().string();

  std::ostringstream csv;
  csv << "run,metric,value\n";

  if (mode == "distance") {
    Rng rng(Rng::derive_seed(seed, "evaluate"));
    Table synth = generate(model, real.n_rows(), rng);
    EncodedDataset enc_real = encode(real);
    EncodedDataset enc_synth = encode(synth);
    double sw = sliced_wasserstein(enc_real.rows, enc_synth.rows, enc_real.width(), 50, seed);
    csv << run_id << ",sliced_w1," << fmt(sw) << "\n";

    for (std::size_t c = 0; c < schema.column_count(); ++c) {
      const Column& col = schema.column(c);
      std::vector<double> rv, sv;
      std::size_t off = schema.raw_offset(c);
      for (std::size_t r = 0; r < real.n_rows(); ++r) {
        for (std::size_t k = 0; k < col.raw_width(); ++k) rv.push_back(real.cell(r, off + k));
      }
      for (std::size_t r = 0; r < synth.n_rows(); ++r) {
        for (std::size_t k = 0; k < col.raw_width(); ++k) sv.push_back(synth.cell(r, off + k));
      }
      csv << run_id << ",w1_" << col.name << "," << fmt(wasserstein1_1d(rv, sv)) << "\n";
    }

    for (std::size_t c = 0; c < schema.column_count(); ++c) {
      const Column& col = schema.column(c);
      if (!col.is_series()) continue;
      std::size_t off = schema.raw_offset(c);
      std::size_t len = col.series().length;
      std::size_t sample = std::min<std::size_t>(synth.n_rows(), 50);
      double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0, dsum = 0.0;
      for (std::size_t s = 0; s < sample; ++s) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < real.n_rows(); ++r) {
          best = std::min(best, dtw({synth.row(s) + off, len}, {real.row(r) + off, len}));
        }
        dmin = std::min(dmin, best);
        dmax = std::max(dmax, best);
        dsum += best;
      }
      csv << run_id << ",dtw_nearest_mean_" << col.name << "," << fmt(dsum / static_cast<double>(sample)) << "\n";
      csv << run_id << ",dtw_nearest_min_" << col.name << "," << fmt(dmin) << "\n";
      csv << run_id << ",dtw_nearest_max_" << col.name << "," << fmt(dmax) << "\n";
    }
  } else {
    std::string label = infer_label_column(schema);
    auto [train_tbl, test_tbl] = balanced_split(real, label, 0.25, seed);
    if (train_tbl.n_rows() == 0 || test_tbl.n_rows() == 0) {
      throw DataError("evaluate: balanced split produced an empty set; need more rows");
    }
    GanModel m = model;
    TableSampler sampler = [&m, seed](std::size_t count) {
      Rng rng(Rng::derive_seed(seed, "tstr_sample"));
      return generate(m, count, rng);
    };
    UtilityReport rep = tstr_utility(sampler, train_tbl, test_tbl, label, ForestConfig{}, train_tbl.n_rows(), seed);
    double epsilon = std::numeric_limits<double>::infinity();
    std::string meta_file = meta_path_for(ckpt_path);
    if (fs::exists(meta_file)) {
      CheckpointMeta meta = load_checkpoint_meta(meta_file);
      if (meta.is_private) epsilon = meta.final_epsilon;
    }
    csv << run_id << ",tstr_accuracy," << fmt(rep.tstr_accuracy) << "\n";
    csv << run_id << ",baseline_accuracy," << fmt(rep.baseline_accuracy) << "\n";
    csv << run_id << ",epsilon," << fmt(epsilon) << "\n";
    csv << run_id << ",label_column," << label << "\n";
  }

  write_text(out / "metrics.csv", csv.str());
  std::cout << "wrote " << (out / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_attack(const std::string& ckpt_path, const std::string& members_path, const std::string& nonmembers_path,
               const std::string& out_dir, int argc, char** argv) {
  GanModel model = load_checkpoint(ckpt_path);
  if (!model.has_discriminator) {
    throw ConfigError("attack: checkpoint '" + ckpt_path +
                      "' has no discriminator parameters (stripped release artifact)");
  }
  Table members = load_csv(members_path, model.schema);
  Table non_members = load_csv(nonmembers_path, model.schema);
  AttackResult res = membership_attack(critic_score_fn(model), encode(members), encode(non_members));

  fs::path out(out_dir);
  fs::create_directories(out);
  write_invocation(out, "attack", argc, argv);

  std::ostringstream scores;
  scores << "set,score\n";
  for (double s : res.member_scores) scores << "member," << fmt(s) << "\n";
  for (double s : res.non_member_scores) scores << "non_member," << fmt(s) << "\n";
  write_text(out / "scores.csv", scores.str());

  std::ostringstream roc;
  roc << "fpr,tpr\n";
  for (const RocPoint& p : res.roc) roc << fmt(p.fpr) << "," << fmt(p.tpr) << "\n";
  write_text(out / "roc.csv", roc.str());

  std::ostringstream summary;
  summary << "metric,value\n";
  summary << "auc," << fmt(res.auc) << "\n";
  summary << "accuracy_best_threshold," << fmt(res.accuracy) << "\n";
  summary << "accuracy_median_threshold," << fmt(res.accuracy_at_median) << "\n";
  write_text(out / "summary.csv", summary.str());

  std::cout << "auc " << fmt(res.auc) << ", best-threshold accuracy " << fmt(res.accuracy) << "\n";
  return 0;
}

int cmd_accounting(double q, double sigma, std::uint64_t steps, double delta) {
  MomentAccountant acc(MechanismParams{q, sigma});
  acc.record_steps(steps);
  int lambda = 0;
  double eps = acc.epsilon_for_delta(delta, &lambda);
  std::cout << "epsilon " << fmt(eps) << "\n";
  std::cout << "lambda " << lambda << "\n";
  return 0;
}

int cmd_synth_data(const std::string& kind, std::size_t n, std::uint64_t seed, const std::string& out_dir, int argc,
                   char** argv) {
  Table table;
  if (kind == "gaussians") {
    table = make_gaussian_mixture(n, seed);
  } else if (kind == "timeseries") {
    table = make_timeseries(n, 96, seed);
  } else if (kind == "adult") {
    table = make_adult_like(n, seed);
  } else {
    throw ConfigError("synth-data: unknown kind '" + kind + "' (expected gaussians, timeseries or adult)");
  }
  fs::path out(out_dir);
  fs::create_directories(out);
  save_csv(table, (out / "data.csv").string());
  table.schema().save((out / "schema.txt").string());
  write_invocation(out, "synth-data", argc, argv);
  std::cout << "wrote " << table.n_rows() << " rows to " << (out / "data.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private GAN toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a dp-GAN from a config file");
  train_cmd->add_option("--config", train_args.config_path, "run config file")->required();
  auto* seed_opt = train_cmd->add_option("--seed", train_args.seed_override, "override [run] seed");
  train_cmd->add_option("--out", train_args.out_override, "override [run] out_dir");
  train_cmd->add_flag("--strip-discriminator", train_args.strip_discriminator,
                      "drop discriminator parameters from the checkpoint (release artifact)");

  std::string ckpt, out_path = "generated.csv", data_path, schema_path, mode = "distance";
  std::string members_path, nonmembers_path, kind = "gaussians";
  std::size_t count = 100, n_rows = 1000;
  std::uint64_t seed = 1;
  double q = 0.01, sigma = 4.0, delta = 1e-5;
  std::uint64_t steps = 0;

  auto* gen_cmd = app.add_subcommand("generate", "sample rows from a trained generator");
  gen_cmd->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  gen_cmd->add_option("--count", count, "rows to generate");
  gen_cmd->add_option("--seed", seed, "sampling seed");
  gen_cmd->add_option("--out", out_path, "output CSV path");

  auto* eval_cmd = app.add_subcommand("evaluate", "distance or utility metrics against real data");
  eval_cmd->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", data_path, "real data CSV")->required();
  eval_cmd->add_option("--schema", schema_path, "schema sidecar")->required();
  eval_cmd->add_option("--mode", mode, "distance | utility");
  eval_cmd->add_option("--seed", seed, "evaluation seed");
  eval_cmd->add_option("--out", out_path, "output directory")->required();

  auto* attack_cmd = app.add_subcommand("attack", "white-box membership inference on a checkpoint");
  attack_cmd->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  attack_cmd->add_option("--members", members_path, "training-member rows CSV")->required();
  attack_cmd->add_option("--nonmembers", nonmembers_path, "held-out rows CSV")->required();
  attack_cmd->add_option("--out", out_path, "output directory")->required();

  auto* acct_cmd = app.add_subcommand("accounting", "standalone privacy calculator");
  acct_cmd->add_option("--q", q, "sampling probability");
  acct_cmd->add_option("--sigma", sigma, "noise scale");
  acct_cmd->add_option("--steps", steps, "composed mechanism invocations");
  acct_cmd->add_option("--delta", delta, "target delta");

  auto* synth_cmd = app.add_subcommand("synth-data", "write a synthetic benchmark dataset");
  synth_cmd->add_option("--kind", kind, "gaussians | timeseries | adult");
  synth_cmd->add_option("--n", n_rows, "row count");
  synth_cmd->add_option("--seed", seed, "generation seed");
  synth_cmd->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (train_cmd->parsed()) {
      train_args.seed_given = seed_opt->count() > 0;
      return cmd_train(train_args, argc, argv);
    }
    if (gen_cmd->parsed()) return cmd_generate(ckpt, count, seed, out_path, argc, argv);
    if (eval_cmd->parsed()) return cmd_evaluate(ckpt, data_path, schema_path, mode, seed, out_path, argc, argv);
    if (attack_cmd->parsed()) return cmd_attack(ckpt, members_path, nonmembers_path, out_path, argc, argv);
    if (acct_cmd->parsed()) return cmd_accounting(q, sigma, steps, delta);
    if (synth_cmd->parsed()) return cmd_synth_data(kind, n_rows, seed, out_path, argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
