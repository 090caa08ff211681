#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hjb/config.hpp"
#include "hjb/deeponet.hpp"
#include "hjb/policy.hpp"
#include "hjb/trajectory.hpp"

namespace hjb {

inline constexpr const char* kCodeVersion = "hjb 0.1.0";

/// CSV with a header row and a trailing `# config_hash=...` comment.
class CsvFile {
 public:
  CsvFile(const std::string& path, const std::vector<std::string>& columns);
  void row(const std::vector<double>& values);
  void row_mixed(const std::vector<std::string>& values);
  void comment(const std::string& text);  // '# ...' line
  /// Writes the trailing manifest comment and closes the file.
  void finish(std::uint64_t config_hash);
  ~CsvFile();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string format_double(double value);  // %.17g, round-trip exact

/// Creates the directory (parents included). Completed run directories are
/// write-once: refuses to reuse a nonempty one.
void create_run_dir(const std::string& path);

/// Resolves a possibly relative output path against HJB_OUT_ROOT.
std::string resolve_out_dir(const std::string& requested);

/// Written artifacts of a training run.
struct RunPaths {
  std::string dir;
  std::string manifest() const { return dir + "/manifest.txt"; }
  std::string eps_csv() const { return dir + "/eps.csv"; }
  std::string training_csv(int round) const {
    return dir + "/training_n" + std::to_string(round) + ".csv";
  }
  std::string operator_checkpoint(int round) const {
    return dir + "/operator_n" + std::to_string(round) + ".bin";
  }
  std::string final_operator() const { return dir + "/operator_final.bin"; }
};

/// Manifest (config echo + seed + code version), per-round training CSVs and
/// checkpoints, the residual-sup CSV, and the final operator.
void export_ledger(const RunPaths& paths, const RunConfig& config,
                   const IterationLedger& ledger);

/// What later commands need back from a run directory.
struct LoadedRun {
  ConfigMap manifest;
  RunConfig config;
  OperatorNetwork final_network;
  std::vector<double> eps1, eps2;
};

LoadedRun load_run(const std::string& dir);

/// Minimal standalone polyline plot; one series per call.
void write_svg_series(const std::string& path, const std::string& title,
                      const Eigen::VectorXd& xs, const std::vector<Eigen::VectorXd>& series,
                      const std::vector<std::string>& labels);

}  // namespace hjb
