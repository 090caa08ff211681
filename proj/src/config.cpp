#include "hjb/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace hjb {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
      return false;
  return true;
}

double parse_double(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    const double value = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return value;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + raw + "'");
  }
}

QuadraticTerminal parse_quadratic(const std::string& key, const std::string& raw) {
  const auto colon = raw.find(':');
  if (colon == std::string::npos)
    throw ConfigError(key, "expected offset:scale, got '" + raw + "'");
  return {parse_double(key, trim(raw.substr(0, colon))),
          parse_double(key, trim(raw.substr(colon + 1)))};
}

}  // namespace

ConfigMap ConfigMap::parse_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key))
      throw ConfigError("line " + std::to_string(line_no), "bad key '" + key + "'");
    map.values_[key] = trim(line.substr(eq + 1));
  }
  return map;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_text(buffer.str());
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError(key, "bad key");
  values_[key] = trim(value);
}

bool ConfigMap::has(const std::string& key) const { return values_.count(key) > 0; }

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string ConfigMap::require_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "required field is missing");
  return it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
  const double value = get_double(key, static_cast<double>(fallback));
  const int as_int = static_cast<int>(value);
  if (static_cast<double>(as_int) != value)
    throw ConfigError(key, "expected an integer");
  return as_int;
}

std::uint64_t ConfigMap::get_uint64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an unsigned integer, got '" + it->second + "'");
  }
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError(key, "expected true/false, got '" + it->second + "'");
}

std::vector<int> ConfigMap::get_int_list(const std::string& key,
                                         std::vector<int> fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  std::stringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<int>(parse_double(key, item)));
  }
  if (out.empty()) throw ConfigError(key, "expected a comma-separated integer list");
  return out;
}

std::string ConfigMap::canonical_text() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

std::uint64_t ConfigMap::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : canonical_text()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

RunConfig RunConfig::from_map(const ConfigMap& map) {
  RunConfig config;
  config.problem_id = map.get_string("problem.id", "vehicle2d");
  bool known = false;
  for (const auto& id : catalog_ids()) known = known || id == config.problem_id;
  if (!known) throw ConfigError("problem.id", "unknown problem '" + config.problem_id + "'");

  config.terminal_variant = map.get_string("problem.terminal", "norm");
  if (config.terminal_variant != "norm" && config.terminal_variant != "norm2")
    throw ConfigError("problem.terminal", "expected norm or norm2");

  const ProblemDefaults defaults = paper_defaults(config.problem_id);
  IterationConfig& it = config.iteration;
  it.h = map.get_double("scheme.h", defaults.h);
  if (!(it.h > 0.0 && it.h < 1.0)) throw ConfigError("scheme.h", "must lie in (0, 1)");
  it.viscosity_factor = map.get_double("scheme.N", defaults.viscosity_factor);
  if (!(it.viscosity_factor > 0.0)) throw ConfigError("scheme.N", "must be positive");
  it.rounds = map.get_int("scheme.M", defaults.rounds);
  if (it.rounds < 0) throw ConfigError("scheme.M", "must be nonnegative");
  config.horizon_override = map.get_double("scheme.T", 0.0);
  if (config.horizon_override < 0.0) throw ConfigError("scheme.T", "must be positive");

  it.sensor_count = map.get_int("net.k", it.sensor_count);
  if (it.sensor_count < 1) throw ConfigError("net.k", "need at least one sensor");
  it.latent_dim = map.get_int("net.p", it.latent_dim);
  if (it.latent_dim < 1) throw ConfigError("net.p", "must be positive");
  it.branch_hidden = map.get_int_list("net.branch_hidden", it.branch_hidden);
  it.trunk_hidden = map.get_int_list("net.trunk_hidden", it.trunk_hidden);
  for (const auto* key : {"net.branch_hidden", "net.trunk_hidden"}) {
    const auto& widths =
        std::string(key) == "net.branch_hidden" ? it.branch_hidden : it.trunk_hidden;
    for (int w : widths)
      if (w < 1) throw ConfigError(key, "widths must be positive");
  }
  try {
    it.activation = activation_from_string(map.get_string("net.activation", "tanh"));
  } catch (const Error&) {
    throw ConfigError("net.activation", "expected tanh, relu, or sin");
  }
  it.seed = map.get_uint64("net.seed", 1);

  TrainConfig& train = it.train;
  train.epochs = map.get_int("train.epochs", train.epochs);
  if (train.epochs < 0) throw ConfigError("train.epochs", "must be nonnegative");
  train.lr = map.get_double("train.lr", train.lr);
  if (!(train.lr > 0.0)) throw ConfigError("train.lr", "must be positive");
  train.lr_decay = map.get_double("train.lr_decay", train.lr_decay);
  if (!(train.lr_decay > 0.0 && train.lr_decay <= 1.0))
    throw ConfigError("train.lr_decay", "must lie in (0, 1]");
  train.alpha1 = map.get_double("train.alpha1", train.alpha1);
  train.alpha2 = map.get_double("train.alpha2", train.alpha2);
  if (train.alpha1 < 0.0) throw ConfigError("train.alpha1", "must be nonnegative");
  if (train.alpha2 < 0.0) throw ConfigError("train.alpha2", "must be nonnegative");
  train.interior_points = map.get_int("train.interior", train.interior_points);
  train.terminal_points = map.get_int("train.terminal", train.terminal_points);
  if (train.interior_points < 1) throw ConfigError("train.interior", "must be positive");
  if (train.terminal_points < 1) throw ConfigError("train.terminal", "must be positive");
  train.sup_probe_points = map.get_int("train.sup_probes", train.sup_probe_points);
  if (train.sup_probe_points < 1) throw ConfigError("train.sup_probes", "must be positive");
  train.seed = map.get_uint64("train.seed", 0);
  train.record_every = map.get_int("train.record_every", train.record_every);
  train.deterministic = map.get_bool("run.deterministic", true);
  it.strict_viscosity_bound = map.get_bool("run.strict_n_bound", true);

  GFamilyConfig& family = config.g_family;
  const std::string kind = map.get_string("gfamily.kind", "default");
  if (kind == "default") {
    family.kind = GFamilyConfig::Kind::ProblemDefault;
  } else if (kind == "list") {
    family.kind = GFamilyConfig::Kind::QuadraticList;
    std::stringstream in(map.require_string("gfamily.list"));
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) family.list.push_back(parse_quadratic("gfamily.list", item));
    }
    if (family.list.empty()) throw ConfigError("gfamily.list", "no quadratics given");
  } else if (kind == "random") {
    family.kind = GFamilyConfig::Kind::QuadraticRandom;
    family.count = map.get_int("gfamily.count", family.count);
    if (family.count < 1) throw ConfigError("gfamily.count", "must be positive");
    family.seed = map.get_uint64("gfamily.seed", family.seed);
    family.offset_lo = map.get_double("gfamily.offset_lo", family.offset_lo);
    family.offset_hi = map.get_double("gfamily.offset_hi", family.offset_hi);
    family.scale_lo = map.get_double("gfamily.scale_lo", family.scale_lo);
    family.scale_hi = map.get_double("gfamily.scale_hi", family.scale_hi);
    if (family.offset_hi < family.offset_lo)
      throw ConfigError("gfamily.offset_hi", "range is empty");
    if (family.scale_hi < family.scale_lo)
      throw ConfigError("gfamily.scale_hi", "range is empty");
  } else {
    throw ConfigError("gfamily.kind", "expected default, list, or random");
  }

  config.out_dir = map.get_string("run.out_dir", "");
  config.rollout_dt = map.get_double("rollout.dt", 0.0);
  if (config.rollout_dt < 0.0) throw ConfigError("rollout.dt", "must be nonnegative");
  return config;
}

ConfigMap RunConfig::to_map() const {
  ConfigMap map;
  char buffer[64];
  const auto put_double = [&](const std::string& key, double value) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    map.set(key, buffer);
  };
  const auto put_int_list = [&](const std::string& key, const std::vector<int>& list) {
    std::string joined;
    for (std::size_t i = 0; i < list.size(); ++i)
      joined += (i ? "," : "") + std::to_string(list[i]);
    map.set(key, joined);
  };
  map.set("problem.id", problem_id);
  map.set("problem.terminal", terminal_variant);
  put_double("scheme.h", iteration.h);
  put_double("scheme.N", iteration.viscosity_factor);
  map.set("scheme.M", std::to_string(iteration.rounds));
  if (horizon_override > 0.0) put_double("scheme.T", horizon_override);
  map.set("net.k", std::to_string(iteration.sensor_count));
  map.set("net.p", std::to_string(iteration.latent_dim));
  put_int_list("net.branch_hidden", iteration.branch_hidden);
  put_int_list("net.trunk_hidden", iteration.trunk_hidden);
  map.set("net.activation", to_string(iteration.activation));
  map.set("net.seed", std::to_string(iteration.seed));
  map.set("train.epochs", std::to_string(iteration.train.epochs));
  put_double("train.lr", iteration.train.lr);
  put_double("train.lr_decay", iteration.train.lr_decay);
  put_double("train.alpha1", iteration.train.alpha1);
  put_double("train.alpha2", iteration.train.alpha2);
  map.set("train.interior", std::to_string(iteration.train.interior_points));
  map.set("train.terminal", std::to_string(iteration.train.terminal_points));
  map.set("train.sup_probes", std::to_string(iteration.train.sup_probe_points));
  map.set("train.seed", std::to_string(iteration.train.seed));
  map.set("train.record_every", std::to_string(iteration.train.record_every));
  map.set("run.deterministic", iteration.train.deterministic ? "true" : "false");
  map.set("run.strict_n_bound", iteration.strict_viscosity_bound ? "true" : "false");
  switch (g_family.kind) {
    case GFamilyConfig::Kind::ProblemDefault:
      map.set("gfamily.kind", "default");
      break;
    case GFamilyConfig::Kind::QuadraticList: {
      map.set("gfamily.kind", "list");
      std::string joined;
      for (std::size_t i = 0; i < g_family.list.size(); ++i) {
        char pair[64];
        std::snprintf(pair, sizeof(pair), "%.17g:%.17g", g_family.list[i].offset,
                      g_family.list[i].scale);
        joined += (i ? "," : "") + std::string(pair);
      }
      map.set("gfamily.list", joined);
      break;
    }
    case GFamilyConfig::Kind::QuadraticRandom:
      map.set("gfamily.kind", "random");
      map.set("gfamily.count", std::to_string(g_family.count));
      map.set("gfamily.seed", std::to_string(g_family.seed));
      put_double("gfamily.offset_lo", g_family.offset_lo);
      put_double("gfamily.offset_hi", g_family.offset_hi);
      put_double("gfamily.scale_lo", g_family.scale_lo);
      put_double("gfamily.scale_hi", g_family.scale_hi);
      break;
  }
  // The output location is run metadata, not configuration: leaving it out
  // keeps reruns into fresh directories bitwise identical.
  if (rollout_dt > 0.0) put_double("rollout.dt", rollout_dt);
  return map;
}

CatalogEntry RunConfig::resolve_problem() const {
  CatalogEntry entry = build_problem(problem_id);
  if (horizon_override > 0.0) {
    entry.problem.horizon = horizon_override;
    entry.defaults.horizon = horizon_override;
  }
  if (problem_id == "vehicle2d" && terminal_variant == "norm2") {
    entry.default_terminal = quadratic_terminal_fn({0.0, 1.0});
    entry.default_terminal_gradient = quadratic_terminal_gradient({0.0, 1.0});
  }
  return entry;
}

std::vector<ScalarFieldFn> RunConfig::resolve_terminal_costs(const CatalogEntry& entry) const {
  std::vector<ScalarFieldFn> costs;
  switch (g_family.kind) {
    case GFamilyConfig::Kind::ProblemDefault:
      if (entry.training_family.empty()) {
        costs.push_back(entry.default_terminal);
      } else {
        for (const auto& q : entry.training_family)
          costs.push_back(quadratic_terminal_fn(q));
      }
      break;
    case GFamilyConfig::Kind::QuadraticList:
      for (const auto& q : g_family.list) costs.push_back(quadratic_terminal_fn(q));
      break;
    case GFamilyConfig::Kind::QuadraticRandom: {
      std::mt19937_64 rng(g_family.seed);
      std::uniform_real_distribution<double> offset(g_family.offset_lo, g_family.offset_hi);
      std::uniform_real_distribution<double> scale(g_family.scale_lo, g_family.scale_hi);
      for (int i = 0; i < g_family.count; ++i) {
        const double a = offset(rng);
        const double b = scale(rng);
        costs.push_back(quadratic_terminal_fn({a, b}));
      }
      break;
    }
  }
  return costs;
}

void apply_paper_scale(ConfigMap& map, const std::string& problem_id) {
  const ProblemDefaults defaults = paper_defaults(problem_id);
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", defaults.h);
  map.set("scheme.h", buffer);
  std::snprintf(buffer, sizeof(buffer), "%.17g", defaults.viscosity_factor);
  map.set("scheme.N", buffer);
  map.set("scheme.M", std::to_string(defaults.rounds));
}

void apply_desk_scale(ConfigMap& map, const std::string& problem_id) {
  apply_paper_scale(map, problem_id);
  map.set("train.epochs", "2000");
  map.set("train.interior", "2000");
  map.set("train.terminal", "500");
  if (problem_id == "vehicle2d") {
    map.set("scheme.h", "0.05");
  } else if (problem_id == "lqr10x5") {
    // Reduced collocation keeps the ten-dimensional run desk-sized.
    map.set("train.epochs", "1500");
    map.set("train.interior", "800");
    map.set("train.terminal", "300");
    map.set("train.sup_probes", "4000");
  }
}

}  // namespace hjb
