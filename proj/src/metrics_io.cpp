#include "fedsel/metrics_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedsel {

std::string format_double(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

void write_metrics_csv(std::ostream& out, std::span<const RoundRecord> records) {
  out << "round,t,global_loss,eval_metric,selected_ids,lr\n";
  for (const RoundRecord& rec : records) {
    out << rec.round << ',' << rec.iteration << ',' << format_double(rec.global_loss) << ','
        << format_double(rec.eval_metric) << ',';
    for (std::size_t i = 0; i < rec.selected.size(); ++i) {
      if (i > 0) out << ';';
      out << rec.selected[i];
    }
    out << ',' << format_double(rec.lr) << '\n';
  }
}

void write_metrics_file(const std::filesystem::path& path, std::span<const RoundRecord> records) {
  std::ostringstream buffer;
  write_metrics_csv(buffer, records);
  write_text_file(path, buffer.str());
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::vector<MetricsRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics: empty file");
  if (line.rfind("round,t,global_loss,eval_metric,selected_ids,lr", 0) != 0) {
    throw std::runtime_error("metrics: unexpected header: " + line);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    MetricsRow rec;
    std::getline(row, field, ',');
    rec.round = std::stoi(field);
    std::getline(row, field, ',');
    rec.iteration = std::stoll(field);
    std::getline(row, field, ',');
    rec.global_loss = std::stod(field);
    std::getline(row, field, ',');
    rec.eval_metric = std::stod(field);
    if (!std::getline(row, field, ',')) {
      throw std::runtime_error("metrics: missing selected_ids column in: " + line);
    }
    std::istringstream ids(field);
    std::string id;
    while (std::getline(ids, id, ';')) {
      if (!id.empty()) rec.selected.push_back(std::stoi(id));
    }
    if (!std::getline(row, field, ',')) {
      throw std::runtime_error("metrics: missing lr column in: " + line);
    }
    rec.lr = std::stod(field);
    rows.push_back(std::move(rec));
  }
  return rows;
}

std::vector<MetricsRow> read_metrics_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("metrics: cannot open " + path.string());
  return read_metrics_csv(in);
}

void write_key_values(const std::filesystem::path& path, const KeyValueList& values) {
  std::ostringstream buffer;
  for (const auto& [key, value] : values) {
    buffer << key << " = " << value << '\n';
  }
  write_text_file(path, buffer.str());
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace fedsel
