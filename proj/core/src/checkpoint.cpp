#include "dpgan/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "dpgan/error.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");

namespace dpgan {

namespace {

constexpr char kMagic[8] = {'D', 'P', 'G', 'A', 'N', 'C', 'K', '1'};

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError(std::string("checkpoint: truncated while reading ") + what);
  return v;
}

void write_sizes(std::ostream& os, const std::vector<std::size_t>& v) {
  write_pod<std::uint64_t>(os, v.size());
  for (std::size_t x : v) write_pod<std::uint64_t>(os, x);
}

std::vector<std::size_t> read_sizes(std::istream& is, const char* what) {
  std::uint64_t n = read_pod<std::uint64_t>(is, what);
  if (n > (1u << 20)) throw DataError(std::string("checkpoint: implausible list length for ") + what);
  std::vector<std::size_t> v(n);
  for (auto& x : v) x = read_pod<std::uint64_t>(is, what);
  return v;
}

void write_tensors(std::ostream& os, const std::vector<Tensor>& tensors) {
  write_pod<std::uint64_t>(os, tensors.size());
  for (const Tensor& t : tensors) {
    write_sizes(os, t.shape());
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
}

std::vector<Tensor> read_tensors(std::istream& is, const char* what) {
  std::uint64_t n = read_pod<std::uint64_t>(is, what);
  if (n > (1u << 20)) throw DataError(std::string("checkpoint: implausible tensor count for ") + what);
  std::vector<Tensor> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Shape shape = read_sizes(is, what);
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw DataError(std::string("checkpoint: truncated while reading ") + what);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

void save_checkpoint(const GanModel& model, const std::string& path, bool strip_discriminator) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot write '" + path + "'");
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, kCheckpointVersion);
  std::uint32_t flags = 0;
  bool keep_d = model.has_discriminator && !strip_discriminator;
  if (keep_d) flags |= 1u;
  write_pod<std::uint32_t>(os, flags);

  write_pod<std::uint32_t>(os, model.arch.generator_kind == GeneratorKind::kMlp ? 0u : 1u);
  write_pod<std::uint64_t>(os, model.arch.noise_dim);
  write_pod<std::uint64_t>(os, model.arch.lstm_hidden);
  write_sizes(os, model.arch.gen_hidden);
  write_sizes(os, model.arch.disc_hidden);

  std::string schema_text = model.schema.serialize();
  write_pod<std::uint64_t>(os, schema_text.size());
  os.write(schema_text.data(), static_cast<std::streamsize>(schema_text.size()));
  write_pod<std::uint64_t>(os, model.build_seed);

  write_tensors(os, model.theta_g);
  if (keep_d) write_tensors(os, model.theta_d);
  if (!os) throw DataError("checkpoint: write failed for '" + path + "'");
}

GanModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kMagic, 8)) {
    throw DataError("checkpoint '" + path + "': bad magic, not a checkpoint file");
  }
  std::uint32_t version = read_pod<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint '" + path + "': format version " + std::to_string(version) +
                      ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  std::uint32_t flags = read_pod<std::uint32_t>(is, "flags");

  GanModel model;
  std::uint32_t kind = read_pod<std::uint32_t>(is, "generator kind");
  if (kind > 1) throw DataError("checkpoint: unknown generator kind");
  model.arch.generator_kind = kind == 0 ? GeneratorKind::kMlp : GeneratorKind::kRecurrent;
  model.arch.noise_dim = read_pod<std::uint64_t>(is, "noise_dim");
  model.arch.lstm_hidden = read_pod<std::uint64_t>(is, "lstm_hidden");
  model.arch.gen_hidden = read_sizes(is, "gen_hidden");
  model.arch.disc_hidden = read_sizes(is, "disc_hidden");

  std::uint64_t schema_len = read_pod<std::uint64_t>(is, "schema length");
  if (schema_len > (1u << 24)) throw DataError("checkpoint: implausible schema length");
  std::string schema_text(schema_len, '\0');
  is.read(schema_text.data(), static_cast<std::streamsize>(schema_len));
  if (!is) throw DataError("checkpoint: truncated schema");
  model.schema = Schema::parse(schema_text);
  model.build_seed = read_pod<std::uint64_t>(is, "build seed");

  model.theta_g = read_tensors(is, "generator parameters");
  model.has_discriminator = (flags & 1u) != 0;
  if (model.has_discriminator) model.theta_d = read_tensors(is, "discriminator parameters");
  return model;
}

std::string meta_path_for(const std::string& checkpoint_path) { return checkpoint_path + ".meta.json"; }

void save_checkpoint_meta(const CheckpointMeta& meta, const std::string& path) {
  nlohmann::json j;
  j["seed"] = meta.seed;
  j["config_digest"] = meta.config_digest;
  j["private"] = meta.is_private;
  if (meta.is_private) j["final_epsilon"] = meta.final_epsilon;
  j["delta"] = meta.delta;
  j["diverged"] = meta.diverged;
  j["wall_seconds"] = meta.wall_seconds;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("sidecar: cannot write '" + path + "'");
  os << j.dump(2) << "\n";
}

CheckpointMeta load_checkpoint_meta(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("sidecar: cannot open '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(is, nullptr, true);
  CheckpointMeta meta;
  meta.seed = j.at("seed").get<std::uint64_t>();
  meta.config_digest = j.at("config_digest").get<std::string>();
  meta.is_private = j.at("private").get<bool>();
  if (meta.is_private) meta.final_epsilon = j.at("final_epsilon").get<double>();
  meta.delta = j.at("delta").get<double>();
  meta.diverged = j.value("diverged", false);
  meta.wall_seconds = j.value("wall_seconds", 0.0);
  return meta;
}

std::string config_digest(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace dpgan
