#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "dpgan/accountant.hpp"
#include "dpgan/schema.hpp"

using namespace dpgan;
namespace fs = std::filesystem;

namespace {

struct RunOut {
  int exit_code;
  std::string stdout_text;
};

RunOut run_cli(const std::string& args) {
  std::string cmd = std::string(DPGAN_CLI_PATH) + " " + args + " 2>/dev/null";
  std::array<char, 4096> buf{};
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  int status = pclose(pipe);
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("dpgan_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string tiny_config(const fs::path& dir, double sigma, int iters) {
  std::ostringstream os;
  os << "[data]\ndata = " << (dir / "data.csv").string() << "\nschema = " << (dir / "schema.txt").string() << "\n";
  os << "[arch]\ngenerator = mlp\ngen_hidden = 16\nnoise_dim = 4\ndisc_hidden = 16\n";
  os << "[dp]\nclip_bound = 1\nnoise_scale = " << sigma << "\nlot_size = 24\nlearning_rate = 0.05\nclip_decay = 0.99\n";
  os << "[train]\nepsilon_target = 4\nn_disc = 1\nmax_generator_iterations = " << iters << "\ngen_batch = 8\n";
  os << "[run]\nseed = 42\nout_dir = " << (dir / "run").string() << "\n";
  return os.str();
}

}  // namespace

TEST_CASE("cli: synth-data writes loadable, deterministic datasets and rejects unknown kinds") {
  TempDir dir;
  auto out1 = run_cli("synth-data --kind gaussians --n 120 --seed 9 --out " + (dir.path / "a").string());
  CHECK(out1.exit_code == 0);
  Schema s = Schema::load((dir.path / "a" / "schema.txt").string());
  CHECK(s.column_count() == 3);  // x, y continuous + label
  CHECK(s.column(0).is_continuous());
  CHECK(s.column(1).is_continuous());
  CHECK(s.column(2).is_categorical());
  Table t = load_csv((dir.path / "a" / "data.csv").string(), s);
  CHECK(t.n_rows() == 120);

  auto out2 = run_cli("synth-data --kind gaussians --n 120 --seed 9 --out " + (dir.path / "b").string());
  CHECK(out2.exit_code == 0);
  CHECK(slurp(dir.path / "a" / "data.csv") == slurp(dir.path / "b" / "data.csv"));

  auto ts = run_cli("synth-data --kind timeseries --n 10 --seed 2 --out " + (dir.path / "ts").string());
  CHECK(ts.exit_code == 0);
  Schema ts_schema = Schema::load((dir.path / "ts" / "schema.txt").string());
  CHECK(ts_schema.column(0).series().length == 96);

  CHECK(run_cli("synth-data --kind images --n 5 --seed 1 --out " + (dir.path / "x").string()).exit_code == 1);
}

TEST_CASE("cli: accounting calculator matches the library and is monotone in steps") {
  auto zero = run_cli("accounting --q 0.01 --sigma 4 --steps 0 --delta 1e-5");
  CHECK(zero.exit_code == 0);
  CHECK(zero.stdout_text.find("epsilon 0") != std::string::npos);

  auto parse_eps = [](const std::string& text) {
    std::istringstream is(text);
    std::string key;
    double value = -1;
    is >> key >> value;
    REQUIRE(key == "epsilon");
    return value;
  };
  auto a = run_cli("accounting --q 0.01 --sigma 4 --steps 500 --delta 1e-5");
  auto b = run_cli("accounting --q 0.01 --sigma 4 --steps 1000 --delta 1e-5");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  double eps_a = parse_eps(a.stdout_text), eps_b = parse_eps(b.stdout_text);
  CHECK(eps_b >= eps_a);

  MomentAccountant acc({0.01, 4.0});
  acc.record_steps(500);
  CHECK(eps_a == doctest::Approx(acc.epsilon_for_delta(1e-5)).epsilon(1e-9));

  CHECK(run_cli("accounting --q 1.5 --sigma 4 --steps 10 --delta 1e-5").exit_code == 1);
}

TEST_CASE("cli: train, reproducible metrics, generate, evaluate, attack") {
  TempDir dir;
  REQUIRE(run_cli("synth-data --kind gaussians --n 240 --seed 5 --out " + dir.path.string()).exit_code == 0);

  std::ofstream(dir.path / "cfg.ini") << tiny_config(dir.path, 1.0, 6);
  auto t1 = run_cli("train --config " + (dir.path / "cfg.ini").string());
  REQUIRE(t1.exit_code == 0);
  CHECK(fs::exists(dir.path / "run" / "checkpoint.bin"));
  CHECK(fs::exists(dir.path / "run" / "checkpoint.bin.meta.json"));
  CHECK(fs::exists(dir.path / "run" / "config.resolved.ini"));
  std::string metrics1 = slurp(dir.path / "run" / "metrics.csv");

  // identical rerun: byte-identical trace
  auto t2 = run_cli("train --config " + (dir.path / "cfg.ini").string() + " --out " + (dir.path / "run2").string());
  REQUIRE(t2.exit_code == 0);
  CHECK(slurp(dir.path / "run2" / "metrics.csv") == metrics1);

  // generate: deterministic, schema-conformant, count 0 is header-only
  std::string ckpt = (dir.path / "run" / "checkpoint.bin").string();
  auto g1 = run_cli("generate --checkpoint " + ckpt + " --count 50 --seed 3 --out " + (dir.path / "g1.csv").string());
  auto g2 = run_cli("generate --checkpoint " + ckpt + " --count 50 --seed 3 --out " + (dir.path / "g2.csv").string());
  REQUIRE(g1.exit_code == 0);
  REQUIRE(g2.exit_code == 0);
  CHECK(slurp(dir.path / "g1.csv") == slurp(dir.path / "g2.csv"));
  Schema s = Schema::load((dir.path / "schema.txt").string());
  Table gen = load_csv((dir.path / "g1.csv").string(), s);  // validates against the schema loader
  CHECK(gen.n_rows() == 50);

  auto g0 = run_cli("generate --checkpoint " + ckpt + " --count 0 --seed 3 --out " + (dir.path / "g0.csv").string());
  REQUIRE(g0.exit_code == 0);
  std::string empty_csv = slurp(dir.path / "g0.csv");
  CHECK(empty_csv == "x,y,label\n");

  // evaluate: distance mode emits finite nonnegative metrics
  auto ev = run_cli("evaluate --checkpoint " + ckpt + " --data " + (dir.path / "data.csv").string() + " --schema " +
                    (dir.path / "schema.txt").string() + " --mode distance --seed 4 --out " +
                    (dir.path / "eval").string());
  REQUIRE(ev.exit_code == 0);
  std::string metrics = slurp(dir.path / "eval" / "metrics.csv");
  CHECK(metrics.find("sliced_w1") != std::string::npos);
  CHECK(metrics.find("w1_x") != std::string::npos);
  CHECK(metrics.find("-") == std::string::npos);  // no negative distances
  CHECK(metrics.find("nan") == std::string::npos);
  CHECK(metrics.find("inf") == std::string::npos);

  // attack with members == nonmembers: auc pinned at 1/2
  auto at = run_cli("attack --checkpoint " + ckpt + " --members " + (dir.path / "data.csv").string() +
                    " --nonmembers " + (dir.path / "data.csv").string() + " --out " + (dir.path / "atk").string());
  REQUIRE(at.exit_code == 0);
  std::string summary = slurp(dir.path / "atk" / "summary.csv");
  CHECK(summary.find("auc,0.5") != std::string::npos);
  std::string roc = slurp(dir.path / "atk" / "roc.csv");
  CHECK(roc.find("0,0") != std::string::npos);
  CHECK(roc.find("1,1") != std::string::npos);
}

TEST_CASE("cli: error exit codes are stable (config 1, data 2)") {
  TempDir dir;
  // missing schema file -> data error, exit 2, path named
  std::ofstream(dir.path / "cfg.ini") << tiny_config(dir.path, 0.0, 2);
  auto missing = run_cli("train --config " + (dir.path / "cfg.ini").string());
  CHECK(missing.exit_code == 2);

  // bad config key -> exit 1
  std::ofstream(dir.path / "bad.ini") << "[dp]\nwat = 1\n";
  CHECK(run_cli("train --config " + (dir.path / "bad.ini").string()).exit_code == 1);

  // missing config file -> exit 1
  CHECK(run_cli("train --config " + (dir.path / "nope.ini").string()).exit_code == 1);
}

TEST_CASE("cli: stripped checkpoints are refused by attack with an explicit error") {
  TempDir dir;
  REQUIRE(run_cli("synth-data --kind gaussians --n 240 --seed 6 --out " + dir.path.string()).exit_code == 0);
  std::ofstream(dir.path / "cfg.ini") << tiny_config(dir.path, 0.0, 2);
  auto t = run_cli("train --config " + (dir.path / "cfg.ini").string() + " --strip-discriminator");
  REQUIRE(t.exit_code == 0);
  std::string ckpt = (dir.path / "run" / "checkpoint.bin").string();
  auto at = run_cli("attack --checkpoint " + ckpt + " --members " + (dir.path / "data.csv").string() +
                    " --nonmembers " + (dir.path / "data.csv").string() + " --out " + (dir.path / "atk").string());
  CHECK(at.exit_code == 1);
}
