#include "hjb/run_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hjb {
namespace fs = std::filesystem;

struct CsvFile::Impl {
  std::ofstream out;
  std::size_t columns = 0;
  bool finished = false;
  std::string path;
};

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

CsvFile::CsvFile(const std::string& path, const std::vector<std::string>& columns)
    : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) throw Error("cannot open " + path + " for writing");
  impl_->columns = columns.size();
  impl_->path = path;
  for (std::size_t i = 0; i < columns.size(); ++i)
    impl_->out << (i ? "," : "") << columns[i];
  impl_->out << "\n";
}

void CsvFile::row(const std::vector<double>& values) {
  if (values.size() != impl_->columns) throw Error("csv row width mismatch");
  for (std::size_t i = 0; i < values.size(); ++i)
    impl_->out << (i ? "," : "") << format_double(values[i]);
  impl_->out << "\n";
}

void CsvFile::row_mixed(const std::vector<std::string>& values) {
  if (values.size() != impl_->columns) throw Error("csv row width mismatch");
  for (std::size_t i = 0; i < values.size(); ++i)
    impl_->out << (i ? "," : "") << values[i];
  impl_->out << "\n";
}

void CsvFile::comment(const std::string& text) { impl_->out << "# " << text << "\n"; }

void CsvFile::finish(std::uint64_t config_hash) {
  char line[64];
  std::snprintf(line, sizeof(line), "# config_hash=%016llx",
                static_cast<unsigned long long>(config_hash));
  impl_->out << line << "\n";
  impl_->out.close();
  if (!impl_->out) throw Error("failed writing " + impl_->path);
  impl_->finished = true;
}

CsvFile::~CsvFile() = default;

void create_run_dir(const std::string& path) {
  const fs::path dir(path);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw Error(path + " exists and is not a directory");
    if (!fs::is_empty(dir))
      throw Error(path + " is not empty; completed run directories are write-once");
    return;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + path + ": " + ec.message());
}

std::string resolve_out_dir(const std::string& requested) {
  if (requested.empty()) throw Error("no output directory given");
  fs::path p(requested);
  if (p.is_absolute()) return requested;
  if (const char* root = std::getenv("HJB_OUT_ROOT"); root && *root)
    return (fs::path(root) / p).string();
  return requested;
}

void export_ledger(const RunPaths& paths, const RunConfig& config,
                   const IterationLedger& ledger) {
  const ConfigMap echo = config.to_map();
  const std::uint64_t hash = echo.hash();

  {
    std::ofstream manifest(paths.manifest());
    if (!manifest) throw Error("cannot write " + paths.manifest());
    manifest << "# run manifest\n";
    manifest << "run.kind = train\n";
    manifest << "code.version = " << kCodeVersion << "\n";
    char line[64];
    std::snprintf(line, sizeof(line), "config.hash = %016llx\n",
                  static_cast<unsigned long long>(hash));
    manifest << line;
    manifest << "rounds.completed = " << ledger.iterates.size() << "\n";
    manifest << echo.canonical_text();
  }

  {
    CsvFile eps(paths.eps_csv(), {"n", "eps1", "eps2"});
    for (const auto& iterate : ledger.iterates)
      eps.row({static_cast<double>(iterate.index), iterate.eps1, iterate.eps2});
    eps.finish(hash);
  }

  for (const auto& iterate : ledger.iterates) {
    CsvFile csv(paths.training_csv(iterate.index),
                {"epoch", "L1", "L2", "eps1_hat", "eps2_hat", "wall_ms"});
    for (const auto& row : iterate.report.history)
      csv.row({static_cast<double>(row.epoch), row.loss1, row.loss2, row.eps1, row.eps2,
               row.wall_ms});
    csv.finish(hash);
    save_operator_file(paths.operator_checkpoint(iterate.index), *iterate.network);
  }
  if (ledger.final_network)
    save_operator_file(paths.final_operator(), *ledger.final_network);
}

LoadedRun load_run(const std::string& dir) {
  const RunPaths paths{dir};
  LoadedRun run;
  run.manifest = ConfigMap::parse_file(paths.manifest());
  ConfigMap config_only;
  for (const auto& [key, value] : run.manifest.entries())
    if (key.rfind("run.kind", 0) != 0 && key.rfind("code.", 0) != 0 &&
        key.rfind("config.hash", 0) != 0 && key.rfind("rounds.", 0) != 0)
      config_only.set(key, value);
  run.config = RunConfig::from_map(config_only);
  run.final_network = load_operator_file(paths.final_operator());

  std::ifstream eps(paths.eps_csv());
  if (eps) {
    std::string line;
    std::getline(eps, line);  // header
    while (std::getline(eps, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::stringstream row(line);
      std::string cell;
      std::vector<double> cells;
      while (std::getline(row, cell, ',')) cells.push_back(std::atof(cell.c_str()));
      if (cells.size() == 3) {
        run.eps1.push_back(cells[1]);
        run.eps2.push_back(cells[2]);
      }
    }
  }
  return run;
}

void write_svg_series(const std::string& path, const std::string& title,
                      const Eigen::VectorXd& xs, const std::vector<Eigen::VectorXd>& series,
                      const std::vector<std::string>& labels) {
  if (series.empty() || xs.size() < 2) throw Error("svg plot needs data");
  for (const auto& ys : series)
    if (ys.size() != xs.size()) throw Error("svg series length mismatch");

  const double width = 640, height = 400, margin = 48;
  double ymin = series[0].minCoeff(), ymax = series[0].maxCoeff();
  for (const auto& ys : series) {
    ymin = std::min(ymin, ys.minCoeff());
    ymax = std::max(ymax, ys.maxCoeff());
  }
  if (ymax - ymin < 1e-12) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  const double xmin = xs.minCoeff(), xmax = xs.maxCoeff();
  const auto map_x = [&](double x) {
    return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
  };
  const auto map_y = [&](double y) {
    return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
  };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
                                  "#bcbd22", "#17becf"};
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
      << height << "' viewBox='0 0 " << width << " " << height << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='14'>"
      << title << "</text>\n";
  // axes
  out << "<line x1='" << margin << "' y1='" << height - margin << "' x2='"
      << width - margin << "' y2='" << height - margin << "' stroke='black'/>\n";
  out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
      << height - margin << "' stroke='black'/>\n";
  char label[64];
  std::snprintf(label, sizeof(label), "%.3g", xmin);
  out << "<text x='" << margin << "' y='" << height - margin + 16
      << "' font-size='11' text-anchor='middle'>" << label << "</text>\n";
  std::snprintf(label, sizeof(label), "%.3g", xmax);
  out << "<text x='" << width - margin << "' y='" << height - margin + 16
      << "' font-size='11' text-anchor='middle'>" << label << "</text>\n";
  std::snprintf(label, sizeof(label), "%.3g", ymin);
  out << "<text x='" << margin - 6 << "' y='" << height - margin
      << "' font-size='11' text-anchor='end'>" << label << "</text>\n";
  std::snprintf(label, sizeof(label), "%.3g", ymax);
  out << "<text x='" << margin - 6 << "' y='" << margin + 4
      << "' font-size='11' text-anchor='end'>" << label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 10];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (Eigen::Index i = 0; i < xs.size(); ++i)
      out << map_x(xs(i)) << "," << map_y(series[s](i)) << " ";
    out << "'/>\n";
    if (s < labels.size())
      out << "<text x='" << width - margin - 4 << "' y='" << margin + 16 * (s + 1)
          << "' font-size='12' text-anchor='end' fill='" << color << "'>" << labels[s]
          << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw Error("failed writing " + path);
}

}  // namespace hjb
