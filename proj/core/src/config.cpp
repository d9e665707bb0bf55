#include "dpgan/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dpgan/error.hpp"

namespace dpgan {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, const std::string& key) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("config: key '" + key + "': bad number '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("config: key '" + key + "': bad integer '" + v + "'");
  return out;
}

std::vector<std::size_t> to_size_list(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  std::istringstream is(v);
  std::string part;
  while (std::getline(is, part, ',')) out.push_back(static_cast<std::size_t>(to_u64(trim(part), key)));
  return out;
}

std::string size_list_str(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  bool decay_floor_set = false;
  std::istringstream is(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      if (section != "data" && section != "arch" && section != "dp" && section != "train" && section != "run") {
        throw ConfigError("config line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      }
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    std::string qual = section + "." + key;

    if (qual == "data.data") cfg.data_path = value;
    else if (qual == "data.schema") cfg.schema_path = value;
    else if (qual == "arch.generator") {
      if (value == "mlp") cfg.arch.generator_kind = GeneratorKind::kMlp;
      else if (value == "recurrent") cfg.arch.generator_kind = GeneratorKind::kRecurrent;
      else throw ConfigError("config: arch.generator must be mlp or recurrent, got '" + value + "'");
    }
    else if (qual == "arch.gen_hidden") cfg.arch.gen_hidden = to_size_list(value, qual);
    else if (qual == "arch.noise_dim") cfg.arch.noise_dim = to_u64(value, qual);
    else if (qual == "arch.lstm_hidden") cfg.arch.lstm_hidden = to_u64(value, qual);
    else if (qual == "arch.disc_hidden") cfg.arch.disc_hidden = to_size_list(value, qual);
    else if (qual == "dp.clip_bound") cfg.train.dp.clip_bound = to_double(value, qual);
    else if (qual == "dp.noise_scale") cfg.train.dp.noise_scale = to_double(value, qual);
    else if (qual == "dp.lot_size") cfg.train.dp.lot_size = to_double(value, qual);
    else if (qual == "dp.learning_rate") cfg.train.dp.learning_rate = to_double(value, qual);
    else if (qual == "dp.clip_decay") cfg.train.dp.clip_decay = to_double(value, qual);
    else if (qual == "dp.decay_floor") {
      cfg.train.dp.decay_floor = to_double(value, qual);
      decay_floor_set = true;
    }
    else if (qual == "train.epsilon_target") cfg.train.epsilon_target = to_double(value, qual);
    else if (qual == "train.delta") cfg.train.delta = to_double(value, qual);
    else if (qual == "train.n_disc") cfg.train.n_disc = to_u64(value, qual);
    else if (qual == "train.batch_count") cfg.train.batch_count = to_u64(value, qual);
    else if (qual == "train.gp_weight") cfg.train.gp_weight = to_double(value, qual);
    else if (qual == "train.max_generator_iterations") cfg.train.max_generator_iterations = to_u64(value, qual);
    else if (qual == "train.metrics_every") cfg.train.metrics_every = to_u64(value, qual);
    else if (qual == "train.gen_batch") cfg.train.gen_batch = to_u64(value, qual);
    else if (qual == "train.gen_learning_rate") cfg.train.gen_learning_rate = to_double(value, qual);
    else if (qual == "train.adam_beta1") cfg.train.adam.beta1 = to_double(value, qual);
    else if (qual == "train.adam_beta2") cfg.train.adam.beta2 = to_double(value, qual);
    else if (qual == "train.adam_epsilon") cfg.train.adam.epsilon = to_double(value, qual);
    else if (qual == "run.seed") cfg.seed = to_u64(value, qual);
    else if (qual == "run.out_dir") cfg.out_dir = value;
    else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "' in section [" + section + "]");
  }
  if (!decay_floor_set) cfg.train.dp.decay_floor = 1e-3 * cfg.train.dp.clip_bound;
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return parse(os.str());
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << "[data]\n";
  os << "data = " << data_path << "\n";
  os << "schema = " << schema_path << "\n";
  os << "\n[arch]\n";
  os << "generator = " << (arch.generator_kind == GeneratorKind::kMlp ? "mlp" : "recurrent") << "\n";
  os << "gen_hidden = " << size_list_str(arch.gen_hidden) << "\n";
  os << "noise_dim = " << arch.noise_dim << "\n";
  os << "lstm_hidden = " << arch.lstm_hidden << "\n";
  os << "disc_hidden = " << size_list_str(arch.disc_hidden) << "\n";
  os << "\n[dp]\n";
  os << "clip_bound = " << fmt(train.dp.clip_bound) << "\n";
  os << "noise_scale = " << fmt(train.dp.noise_scale) << "\n";
  os << "lot_size = " << fmt(train.dp.lot_size) << "\n";
  os << "learning_rate = " << fmt(train.dp.learning_rate) << "\n";
  os << "clip_decay = " << fmt(train.dp.clip_decay) << "\n";
  os << "decay_floor = " << fmt(train.dp.decay_floor) << "\n";
  os << "\n[train]\n";
  os << "epsilon_target = " << fmt(train.epsilon_target) << "\n";
  os << "delta = " << fmt(train.delta) << "\n";
  os << "n_disc = " << train.n_disc << "\n";
  os << "batch_count = " << train.batch_count << "\n";
  os << "gp_weight = " << fmt(train.gp_weight) << "\n";
  os << "max_generator_iterations = " << train.max_generator_iterations << "\n";
  os << "metrics_every = " << train.metrics_every << "\n";
  os << "gen_batch = " << train.gen_batch << "\n";
  os << "gen_learning_rate = " << fmt(train.gen_learning_rate) << "\n";
  os << "adam_beta1 = " << fmt(train.adam.beta1) << "\n";
  os << "adam_beta2 = " << fmt(train.adam.beta2) << "\n";
  os << "adam_epsilon = " << fmt(train.adam.epsilon) << "\n";
  os << "\n[run]\n";
  os << "seed = " << seed << "\n";
  os << "out_dir = " << out_dir << "\n";
  return os.str();
}

void RunConfig::validate() const {
  if (data_path.empty()) throw ConfigError("config: data.data is required");
  if (schema_path.empty()) throw ConfigError("config: data.schema is required");
  if (out_dir.empty()) throw ConfigError("config: run.out_dir must be nonempty");
  train.validate();
}

}  // namespace dpgan
