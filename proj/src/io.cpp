/*
 * Copyright 2026 The plsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "plsgd/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace plsgd {
namespace fs = std::filesystem;
namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected a JSON object");
}

void reject_unknown(const Json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw ConfigError(join(path, key), "unknown key");
  }
}

double get_double(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

std::uint64_t get_u64(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) throw ConfigError(path, "must be non-negative");
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0.0 && v == std::floor(v) && v < 1.8e19) return static_cast<std::uint64_t>(v);
  }
  throw ConfigError(path, "expected a non-negative integer");
}

int get_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

std::string get_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

Vector get_vector(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = get_double(j[i], fmt::format("{}[{}]", path, i));
  return v;
}

std::vector<std::size_t> get_sizes(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(static_cast<std::size_t>(get_u64(j[i], fmt::format("{}[{}]", path, i))));
  return out;
}

// Rethrows a library ConfigError with the section prefix on its field.
template <typename Fn>
void with_prefix(const std::string& prefix, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    if (e.field().rfind(prefix + ".", 0) == 0) throw;
    std::string msg = e.what();
    const std::string head = e.field() + ": ";
    if (msg.rfind(head, 0) == 0) msg = msg.substr(head.size());
    throw ConfigError(join(prefix, e.field()), msg);
  }
}

Vector default_w_star(int dim) {
  return Vector::Constant(dim, 1.0 / std::sqrt(static_cast<double>(std::max(dim, 1))));
}

Vector unit_direction(const ExperimentConfig& e) {
  ExperimentConfig probe = e;
  probe.problem.w_star = Vector::Zero(e.problem.dim);
  probe.problem.operating_radius = 1.0;
  probe.w0_offset = 1.0;
  return initial_point(probe);
}

void parse_experiment(const Json& j, ExperimentConfig& e) {
  const std::string p = "experiment";
  require_object(j, p);
  reject_unknown(j, p,
                 {"n_grid", "seeds_per_cell", "arms", "C", "w0_offset", "w0_direction",
                  "master_seed", "cap_steps", "constants", "post_epoch_sampling", "sweep_epochs",
                  "sweep_every_epochs", "eta_override", "max_unusable_fraction", "fit_floor"});
  for (const auto& [key, v] : j.items()) {
    const std::string f = join(p, key);
    if (key == "n_grid") e.n_grid = get_sizes(v, f);
    else if (key == "seeds_per_cell") e.seeds_per_cell = get_u64(v, f);
    else if (key == "arms") {
      if (!v.is_array()) throw ConfigError(f, "expected an array of arm names");
      e.arms.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string fi = fmt::format("{}[{}]", f, i);
        try {
          e.arms.push_back(arm_from_string(get_string(v[i], fi)));
        } catch (const ConfigError&) {
          throw ConfigError(fi, "unknown arm '" + v[i].dump() +
                                    "' (OnePassT1, MultiPassT3, OnePassT4, MultiPassT6, "
                                    "EpochSweep)");
        }
      }
    } else if (key == "C") e.C = get_double(v, f);
    else if (key == "w0_offset") e.w0_offset = get_double(v, f);
    else if (key == "w0_direction") e.w0_direction = get_vector(v, f);
    else if (key == "master_seed") e.master_seed = get_u64(v, f);
    else if (key == "cap_steps") e.cap_steps = get_u64(v, f);
    else if (key == "constants") {
      with_prefix(p, [&] { e.constants = constants_mode_from_string(get_string(v, f)); });
    } else if (key == "post_epoch_sampling") {
      const std::string s = get_string(v, f);
      try {
        e.post_epoch_sampling = sampling_mode_from_string(s);
      } catch (const ConfigError&) {
        throw ConfigError(f, "expected WithoutReplacement or WithReplacement");
      }
    } else if (key == "sweep_epochs") e.sweep_epochs = get_u64(v, f);
    else if (key == "sweep_every_epochs") e.sweep_every_epochs = get_u64(v, f);
    else if (key == "eta_override") {
      if (v.is_null()) e.eta_override.reset();
      else e.eta_override = get_double(v, f);
    } else if (key == "max_unusable_fraction") e.max_unusable_fraction = get_double(v, f);
    else if (key == "fit_floor") e.fit_floor = get_double(v, f);
  }
}

void parse_schedule(const Json& j, SingleRunSettings& s) {
  const std::string p = "schedule";
  require_object(j, p);
  reject_unknown(j, p, {"arm", "n", "seed_index", "checkpoint_every"});
  for (const auto& [key, v] : j.items()) {
    const std::string f = join(p, key);
    if (key == "arm") {
      try {
        s.arm = arm_from_string(get_string(v, f));
      } catch (const ConfigError&) {
        throw ConfigError(f, "unknown arm " + v.dump());
      }
    } else if (key == "n") s.n = get_u64(v, f);
    else if (key == "seed_index") s.seed_index = get_u64(v, f);
    else if (key == "checkpoint_every") s.checkpoint_every = get_u64(v, f);
  }
  if (s.n < 1) throw ConfigError("schedule.n", "must be >= 1");
}

void parse_gradgap(const Json& j, GapSettings& g) {
  const std::string p = "gradgap";
  require_object(j, p);
  reject_unknown(j, p,
                 {"region", "anchor", "reference_offset", "reference_w", "s",
                  "first_epoch_eta", "n_candidates", "delta", "C", "n_grid", "seeds",
                  "master_seed", "max_failed_fraction"});
  for (const auto& [key, v] : j.items()) {
    const std::string f = join(p, key);
    if (key == "region") {
      const std::string r = get_string(v, f);
      if (r == "ball") g.recipe.region = RegionKind::Ball;
      else if (r == "residual") g.recipe.region = RegionKind::Residual;
      else throw ConfigError(f, "expected 'ball' or 'residual'");
    } else if (key == "anchor") {
      const std::string a = get_string(v, f);
      if (a == "reference") g.recipe.anchor = AnchorKind::Reference;
      else if (a == "first_epoch") g.recipe.anchor = AnchorKind::FirstEpoch;
      else throw ConfigError(f, "expected 'reference' or 'first_epoch'");
    } else if (key == "reference_offset") g.reference_offset = get_double(v, f);
    else if (key == "reference_w") g.recipe.reference_w = get_vector(v, f);
    else if (key == "s") g.recipe.s = get_double(v, f);
    else if (key == "first_epoch_eta") g.recipe.first_epoch_eta = get_double(v, f);
    else if (key == "n_candidates") g.recipe.n_candidates = get_u64(v, f);
    else if (key == "delta") g.recipe.envelope.delta = get_double(v, f);
    else if (key == "C") g.recipe.envelope.C = get_double(v, f);
    else if (key == "n_grid") g.n_grid = get_sizes(v, f);
    else if (key == "seeds") g.seeds = get_u64(v, f);
    else if (key == "master_seed") g.master_seed = get_u64(v, f);
    else if (key == "max_failed_fraction") g.max_failed_fraction = get_double(v, f);
  }
  if (g.recipe.n_candidates < 1) throw ConfigError("gradgap.n_candidates", "must be >= 1");
  if (!(g.recipe.envelope.delta > 0.0 && g.recipe.envelope.delta < 1.0))
    throw ConfigError("gradgap.delta", "must lie in (0, 1)");
  if (!(g.recipe.envelope.C > 0.0)) throw ConfigError("gradgap.C", "must be positive");
  if (!(g.reference_offset >= 0.0)) throw ConfigError("gradgap.reference_offset", "must be >= 0");
  if (g.n_grid.size() < 4) throw ConfigError("gradgap.n_grid", "needs at least 4 points");
  for (std::size_t i = 1; i < g.n_grid.size(); ++i)
    if (g.n_grid[i] <= g.n_grid[i - 1])
      throw ConfigError("gradgap.n_grid", "must be strictly increasing");
  if (g.seeds < 1) throw ConfigError("gradgap.seeds", "must be >= 1");
}

std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

std::uint64_t get_u64_le(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("dataset", "truncated dump");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64_le(std::istream& in) {
  const std::uint64_t bits = get_u64_le(in);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string dump_bytes(const Dataset& data) {
  std::string out = "PLSGD1";
  const std::size_t n = data.size();
  const auto d = static_cast<std::size_t>(data.dim());
  out.reserve(6 + 16 + 8 * n * (d + 1));
  put_u64(out, d);
  put_u64(out, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      put_f64(out, data.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  for (std::size_t i = 0; i < n; ++i) put_f64(out, data.labels[static_cast<Eigen::Index>(i)]);
  return out;
}

}  // namespace

Json problem_to_json(const ProblemSpec& spec) {
  Json j;
  j["family"] = std::string(to_string(spec.family));
  j["dim"] = spec.dim;
  j["input_scale"] = spec.input_scale;
  j["link_amplitude"] = spec.link_amplitude;
  j["noise_std"] = spec.noise_std;
  j["w_star"] = std::vector<double>(spec.w_star.data(), spec.w_star.data() + spec.w_star.size());
  j["operating_radius"] = spec.operating_radius;
  j["seed"] = spec.seed;
  j["oracle_size"] = spec.oracle_size;
  j["pl_probes"] = spec.pl_probes;
  return j;
}

ProblemSpec problem_from_json(const Json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown(j, path,
                 {"family", "dim", "input_scale", "link_amplitude", "noise_std", "w_star",
                  "operating_radius", "seed", "oracle_size", "pl_probes"});
  ProblemSpec spec;
  bool has_w_star = false;
  for (const auto& [key, v] : j.items()) {
    const std::string f = join(path, key);
    if (key == "family") {
      with_prefix(path, [&] { spec.family = family_from_string(get_string(v, f)); });
    } else if (key == "dim") spec.dim = get_int(v, f);
    else if (key == "input_scale") spec.input_scale = get_double(v, f);
    else if (key == "link_amplitude") spec.link_amplitude = get_double(v, f);
    else if (key == "noise_std") spec.noise_std = get_double(v, f);
    else if (key == "w_star") {
      spec.w_star = get_vector(v, f);
      has_w_star = true;
    } else if (key == "operating_radius") spec.operating_radius = get_double(v, f);
    else if (key == "seed") spec.seed = get_u64(v, f);
    else if (key == "oracle_size") spec.oracle_size = get_u64(v, f);
    else if (key == "pl_probes") spec.pl_probes = get_int(v, f);
  }
  if (!j.contains("family")) throw ConfigError(join(path, "family"), "is required");
  if (!j.contains("dim")) throw ConfigError(join(path, "dim"), "is required");
  if (!has_w_star && spec.dim >= 1) spec.w_star = default_w_star(spec.dim);
  with_prefix(path, [&] { spec.validate(); });
  return spec;
}

Config parse_config(const std::string& text, const fs::path& base_dir) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("config", fmt::format("line {} column {}: {}", line, col, e.what()));
  }
  require_object(doc, "config");
  reject_unknown(doc, "", {"problem", "schedule", "experiment", "gradgap"});
  if (!doc.contains("problem")) throw ConfigError("problem", "is required");

  Config cfg;
  Json& pj = doc["problem"];
  if (pj.is_string()) {
    const fs::path p = base_dir / pj.get<std::string>();
    std::ifstream in(p);
    if (!in) throw ConfigError("problem", "cannot open problem file '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    Json inner;
    try {
      inner = Json::parse(ss.str());
    } catch (const Json::parse_error& e) {
      throw ConfigError("problem", "'" + p.string() + "': " + e.what());
    }
    pj = std::move(inner);
  }
  cfg.problem = problem_from_json(pj, "problem");
  cfg.experiment.problem = cfg.problem;

  if (doc.contains("experiment")) {
    cfg.has_experiment = true;
    parse_experiment(doc["experiment"], cfg.experiment);
  }
  with_prefix("experiment", [&] { cfg.experiment.validate_run_settings(); });
  if (doc.contains("schedule")) {
    cfg.has_schedule = true;
    parse_schedule(doc["schedule"], cfg.schedule);
  }
  if (doc.contains("gradgap")) {
    cfg.has_gradgap = true;
    parse_gradgap(doc["gradgap"], cfg.gradgap);
    if (cfg.gradgap.recipe.reference_w.size() == 0) {
      cfg.gradgap.recipe.reference_w =
          cfg.problem.w_star + cfg.gradgap.reference_offset * unit_direction(cfg.experiment);
    } else if (cfg.gradgap.recipe.reference_w.size() != cfg.problem.dim) {
      throw ConfigError("gradgap.reference_w", "length must equal problem.dim");
    }
  }
  cfg.document = std::move(doc);
  return cfg;
}

Config load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void validate_experiment(const Config& config) {
  if (!config.has_experiment) throw ConfigError("experiment", "section is required");
  with_prefix("experiment", [&] { config.experiment.validate(); });
}

void override_master_seed(Config& config, std::uint64_t seed) {
  config.experiment.master_seed = seed;
  config.gradgap.master_seed = seed;
  if (config.document.contains("experiment")) config.document["experiment"]["master_seed"] = seed;
  if (config.document.contains("gradgap")) config.document["gradgap"]["master_seed"] = seed;
}

void override_cap_steps(Config& config, std::uint64_t cap) {
  if (cap < 1) throw ConfigError("--cap-steps", "must be >= 1");
  config.experiment.cap_steps = cap;
  config.document["experiment"]["cap_steps"] = cap;
}

Json constants_to_json(const ProblemConstants& c) {
  Json j;
  j["mu"] = c.mu;
  j["gamma"] = c.gamma;
  j["L"] = c.L;
  j["G"] = c.G;
  j["B"] = c.B;
  j["sigma2"] = c.sigma2;
  j["mu_probed"] = c.mu_probed;
  return j;
}

Json schedule_to_json(const Schedule& s) {
  Json j;
  j["source"] = std::string(to_string(s.source));
  j["eta"] = s.eta;
  j["stop_iter"] = s.stop_iter;
  Json inputs = Json::object();
  for (const auto& [k, v] : s.inputs_used) inputs[k] = v;
  j["inputs_used"] = inputs;
  return j;
}

void write_dataset_binary(std::ostream& out, const Dataset& data) {
  const std::string bytes = dump_bytes(data);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Dataset read_dataset_binary(std::istream& in) {
  char magic[6];
  if (!in.read(magic, 6) || std::string(magic, 6) != "PLSGD1")
    throw ConfigError("dataset", "bad magic (expected PLSGD1)");
  const std::uint64_t d = get_u64_le(in);
  const std::uint64_t n = get_u64_le(in);
  if (d == 0 || d > (1u << 20) || n > (1ull << 32))
    throw ConfigError("dataset", "implausible header dimensions");
  Dataset data;
  data.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  data.labels.resize(static_cast<Eigen::Index>(n));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < d; ++j)
      data.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = get_f64_le(in);
  for (std::uint64_t i = 0; i < n; ++i) data.labels[static_cast<Eigen::Index>(i)] = get_f64_le(in);
  return data;
}

std::uint64_t dataset_hash(const Dataset& data) { return fnv1a(dump_bytes(data)); }

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

void prepare_out_dir(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec))
      throw ConfigError("--out", "'" + dir.string() + "' exists and is not a directory");
    if (!fs::is_empty(dir, ec) && !force)
      throw ConfigError("--out", "'" + dir.string() + "' is not empty (use --force)");
  }
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("--out", "cannot create '" + dir.string() + "': " + ec.message());
}

RunManifest::RunManifest(std::string command, std::uint64_t master_seed)
    : command_(std::move(command)),
      master_seed_(master_seed),
      start_(std::chrono::system_clock::now()),
      start_steady_(std::chrono::steady_clock::now()) {}

void RunManifest::set_config(const std::string& echoed_bytes) {
  config_hash_ = hex64(fnv1a(echoed_bytes));
}

void RunManifest::add_file(const fs::path& path) { files_.push_back(path); }

void RunManifest::write(const fs::path& dir) const {
  Json j;
  j["tool"] = "plsgd";
  j["version"] = kVersion;
  j["command"] = command_;
  j["master_seed"] = master_seed_;
  j["config_hash"] = config_hash_;
  j["started_at"] = utc_timestamp(start_);
  j["finished_at"] = utc_timestamp(std::chrono::system_clock::now());
  j["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_steady_).count();
  Json files = Json::array();
  for (const fs::path& p : files_) {
    Json f;
    f["name"] = p.filename().string();
    f["bytes"] = fs::file_size(p);
    files.push_back(f);
  }
  j["files"] = files;
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << "\n";
}

void write_output(const fs::path& dir, const std::string& name, const std::string& text,
                  RunManifest& manifest) {
  const fs::path p = dir / name;
  std::ofstream out(p, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("failed to write " + p.string());
  manifest.add_file(p);
}

}  // namespace plsgd
