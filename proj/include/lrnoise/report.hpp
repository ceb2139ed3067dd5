#pragma once

// results.csv: one line per (row, eta), columns
//   model,dataset,learning_rate,optimizer,seed,eta_percent,trials,
//   baseline_acc,mean_acc,std_acc,normalized_acc
// summary.json mirrors the rows and adds avg_normalized_acc. Reals are
// printed with 6 significant digits, '.' decimal point, '\n' line ends.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "lrnoise/noise.hpp"
#include "lrnoise/train.hpp"

namespace lrnoise {

struct SweepRow {
  std::string model;
  std::string dataset;
  double learning_rate = 0.0;
  std::string optimizer;
  std::uint64_t seed = 0;
  NoiseSweepResult result;
  TrainingHistory history;  // not persisted in results.csv
};

struct SweepReport {
  std::vector<SweepRow> rows;
};

inline constexpr const char* kResultsHeader =
    "model,dataset,learning_rate,optimizer,seed,eta_percent,trials,baseline_acc,mean_acc,std_acc,"
    "normalized_acc";

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Value as it reads back from its 6-significant-digit text form.
inline double round6(double v) { return std::stod(format_real(v)); }

inline std::string results_csv(const SweepReport& report) {
  if (report.rows.empty()) throw std::invalid_argument("emit_report: empty report");
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& row : report.rows)
    for (std::size_t k = 0; k < row.result.points.size(); ++k) {
      const auto& p = row.result.points[k];
      out += row.model + "," + row.dataset + "," + format_real(row.learning_rate) + "," +
             row.optimizer + "," + std::to_string(row.seed) + "," + format_real(p.eta * 100.0) +
             "," + std::to_string(p.trials) + "," + format_real(row.result.baseline_acc) + "," +
             format_real(p.mean_acc) + "," + format_real(p.std_acc) + "," +
             format_real(row.result.normalized[k]) + "\n";
    }
  return out;
}

inline nlohmann::json summary_json(const SweepReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t k = 0; k < row.result.points.size(); ++k)
      points.push_back({{"eta_percent", round6(row.result.points[k].eta * 100.0)},
                        {"mean_acc", round6(row.result.points[k].mean_acc)},
                        {"normalized_acc", round6(row.result.normalized[k])}});
    rows.push_back({{"model", row.model},
                    {"dataset", row.dataset},
                    {"learning_rate", round6(row.learning_rate)},
                    {"optimizer", row.optimizer},
                    {"seed", row.seed},
                    {"baseline_acc", round6(row.result.baseline_acc)},
                    {"avg_normalized_acc", row.result.avg_normalized
                                               ? nlohmann::json(round6(*row.result.avg_normalized))
                                               : nlohmann::json(nullptr)},
                    {"points", points}});
  }
  return {{"rows", rows}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

/// Writes results.csv and summary.json into `dir` (created if needed).
inline void emit_report(const SweepReport& report, const std::filesystem::path& dir) {
  const std::string csv = results_csv(report);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "results.csv", csv);
  write_text(dir / "summary.json", summary_json(report).dump(2) + "\n");
}

/// Reads results.csv text back into a report. Per-trial accuracies are not
/// stored, so points carry only trials/mean/std; avg_normalized is
/// recomputed from the non-baseline normalized values.
inline SweepReport parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader)
    throw std::runtime_error("results.csv: unexpected header");
  SweepReport report;
  std::size_t lineno = 1;
  auto finish = [](SweepRow& row) {
    std::vector<double> non_baseline;
    for (std::size_t k = 0; k < row.result.points.size(); ++k)
      if (row.result.points[k].eta != 0.0) non_baseline.push_back(row.result.normalized[k]);
    if (!non_baseline.empty()) row.result.avg_normalized = average_normalized_accuracy(non_baseline);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11)
      throw std::runtime_error("results.csv:" + std::to_string(lineno) + ": expected 11 columns");
    try {
      SweepRow key;
      key.model = f[0];
      key.dataset = f[1];
      key.learning_rate = std::stod(f[2]);
      key.optimizer = f[3];
      key.seed = std::stoull(f[4]);
      const bool same = !report.rows.empty() && report.rows.back().model == key.model &&
                        report.rows.back().dataset == key.dataset &&
                        report.rows.back().learning_rate == key.learning_rate &&
                        report.rows.back().optimizer == key.optimizer &&
                        report.rows.back().seed == key.seed;
      if (!same) {
        if (!report.rows.empty()) finish(report.rows.back());
        key.result.baseline_acc = std::stod(f[7]);
        report.rows.push_back(std::move(key));
      }
      NoiseTrialResult p;
      p.eta = std::stod(f[5]) / 100.0;
      p.trials = std::stoull(f[6]);
      p.mean_acc = std::stod(f[8]);
      p.std_acc = std::stod(f[9]);
      report.rows.back().result.points.push_back(p);
      report.rows.back().result.normalized.push_back(std::stod(f[10]));
    } catch (const std::logic_error&) {
      throw std::runtime_error("results.csv:" + std::to_string(lineno) + ": malformed number");
    }
  }
  if (!report.rows.empty()) finish(report.rows.back());
  return report;
}

inline SweepReport read_results_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_results_csv(ss.str());
}

}  // namespace lrnoise
