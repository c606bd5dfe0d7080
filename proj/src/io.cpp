#include "wadiro/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wadiro/errors.hpp"

namespace wadiro {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t offset) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  while (ptr != end && (*ptr == ' ' || *ptr == '\t' || *ptr == '\r')) ++ptr;
  if (ec != std::errc() || ptr != end)
    throw ParseError("csv: cannot parse numeric cell '" + cell + "'", offset);
  return value;
}

}  // namespace

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path.string());

  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line)) throw ParseError("csv: empty file", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  if (header.size() < 2) throw ParseError("csv: need at least one feature and a label column", 0);
  offset += line.size() + 1;

  const std::size_t cols = header.size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      offset += 1;
      continue;
    }
    const auto cells = split_line(line);
    if (cells.size() != cols)
      throw ParseError("csv: row has " + std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(cols),
                       offset);
    for (const auto& cell : cells) values.push_back(parse_cell(cell, offset));
    offset += line.size() + 1;
    ++rows;
  }
  if (rows == 0) throw ParseError("csv: no data rows", offset);

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols - 1));
  out.labels.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c + 1 < cols; ++c)
      out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          values[r * cols + c];
    out.labels[static_cast<Eigen::Index>(r)] = values[r * cols + cols - 1];
  }
  out.feature_names.assign(header.begin(), header.end() - 1);
  out.validate();
  return out;
}

namespace {

void write_rows(std::ofstream& out, const Dataset& dataset, const std::string& label_name,
                const Eigen::VectorXd* predictions, const std::string& prediction_name) {
  out.precision(17);
  const Eigen::Index d = dataset.dim();
  for (Eigen::Index c = 0; c < d; ++c) {
    if (c < static_cast<Eigen::Index>(dataset.feature_names.size()))
      out << dataset.feature_names[static_cast<std::size_t>(c)];
    else
      out << "x" << c;
    out << ',';
  }
  out << label_name;
  if (predictions) out << ',' << prediction_name;
  out << '\n';
  for (Eigen::Index r = 0; r < dataset.size(); ++r) {
    for (Eigen::Index c = 0; c < d; ++c) out << dataset.features(r, c) << ',';
    out << dataset.labels[r];
    if (predictions) out << ',' << (*predictions)[r];
    out << '\n';
  }
}

}  // namespace

void write_csv(const std::filesystem::path& path, const Dataset& dataset,
               const std::string& label_name) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path.string());
  write_rows(out, dataset, label_name, nullptr, "");
}

void write_csv_with_predictions(const std::filesystem::path& path, const Dataset& dataset,
                                const Eigen::VectorXd& predictions,
                                const std::string& label_name,
                                const std::string& prediction_name) {
  if (predictions.size() != dataset.size())
    throw std::invalid_argument("prediction count does not match dataset size");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path.string());
  write_rows(out, dataset, label_name, &predictions, prediction_name);
}

}  // namespace wadiro
