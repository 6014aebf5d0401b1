#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fedsel/engine.hpp"

namespace fedsel {

/// Shortest round-trippable decimal representation ("%.17g").
std::string format_double(double v);

/// Stable per-run metrics table, one row per round:
///   round,t,global_loss,eval_metric,selected_ids,lr
/// selected_ids joins the chosen client ids with ';'.
void write_metrics_csv(std::ostream& out, std::span<const RoundRecord> records);
void write_metrics_file(const std::filesystem::path& path, std::span<const RoundRecord> records);

struct MetricsRow {
  int round = 0;
  long long iteration = 0;
  double global_loss = 0.0;
  double eval_metric = 0.0;
  std::vector<int> selected;
  double lr = 0.0;
};

std::vector<MetricsRow> read_metrics_csv(std::istream& in);
std::vector<MetricsRow> read_metrics_file(const std::filesystem::path& path);

/// "key = value" report files, order preserved.
using KeyValueList = std::vector<std::pair<std::string, std::string>>;
void write_key_values(const std::filesystem::path& path, const KeyValueList& values);

/// Writes a whole text file atomically enough for our purposes (single
/// stream, no partial flushes).
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace fedsel
