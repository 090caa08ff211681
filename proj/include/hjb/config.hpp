#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hjb/errors.hpp"
#include "hjb/policy.hpp"
#include "hjb/problems.hpp"

namespace hjb {

/// Flat typed key-value configuration: one `section.key = value` per line,
/// `#` comments. Keys are dotted paths; values are parsed on access and
/// errors carry the offending field path.
class ConfigMap {
 public:
  static ConfigMap parse_text(const std::string& text);
  static ConfigMap parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

  /// Sorted `key = value` lines; the canonical form used for hashing and
  /// manifest echoes.
  std::string canonical_text() const;
  std::uint64_t hash() const;  // FNV-1a over the canonical text

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Terminal-cost family used for operator training.
struct GFamilyConfig {
  enum class Kind { ProblemDefault, QuadraticList, QuadraticRandom };
  Kind kind = Kind::ProblemDefault;
  std::vector<QuadraticTerminal> list;  // QuadraticList
  int count = 20;                       // QuadraticRandom
  std::uint64_t seed = 0;
  double offset_lo = 0.0, offset_hi = 0.6;
  double scale_lo = 0.1, scale_hi = 0.7;
};

/// Fully validated run settings; every field checked before any compute.
struct RunConfig {
  std::string problem_id = "vehicle2d";
  std::string terminal_variant = "norm";  // vehicle: "norm" or "norm2"
  double horizon_override = 0.0;          // 0 keeps the problem default

  IterationConfig iteration;  // scheme + network + training
  GFamilyConfig g_family;

  std::string out_dir;
  double rollout_dt = 0.0;  // 0 = horizon / 100

  static RunConfig from_map(const ConfigMap& map);
  ConfigMap to_map() const;

  /// Catalog entry with the horizon override applied.
  CatalogEntry resolve_problem() const;
  /// Training terminal costs implied by the g-family settings.
  std::vector<ScalarFieldFn> resolve_terminal_costs(const CatalogEntry& entry) const;
};

/// Published scheme parameters for the problem, as config overrides.
void apply_paper_scale(ConfigMap& map, const std::string& problem_id);
/// Laptop-scale preset: coarser spacing for the vehicle, published spacing
/// for the LQR instances, reduced collocation in ten dimensions.
void apply_desk_scale(ConfigMap& map, const std::string& problem_id);

}  // namespace hjb
