#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wadiro/core.hpp"

namespace wadiro {

/// Reads a dataset CSV: header row, one feature per column, last column
/// is the label. UTF-8, '.' decimal separator.
Dataset read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const Dataset& dataset,
               const std::string& label_name = "label");

/// Writes the dataset with one extra trailing column of predictions.
void write_csv_with_predictions(const std::filesystem::path& path, const Dataset& dataset,
                                const Eigen::VectorXd& predictions,
                                const std::string& label_name = "label",
                                const std::string& prediction_name = "prediction");

}  // namespace wadiro
