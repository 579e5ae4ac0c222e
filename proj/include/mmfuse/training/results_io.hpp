#pragma once

#include <string>
#include <vector>

#include "mmfuse/training/experiment.hpp"

namespace mmfuse {

/// One row per repeat: repeat, seed, split sizes, train/val/test F1, the
/// unimodal test F1s and the chosen hyperparameters as a JSON string.
std::string repeats_csv(const ExperimentResult& result);

/// Medians for every experiment plus the three comparison tables:
///   table1  multimodal median test F1 per (scale, architecture)
///   table2  percentage difference, multimodal vs best unimodal
///   table5  best unimodal and multimodal medians side by side
util::Json summary_json(const std::vector<ExperimentResult>& results);

std::string table1_csv(const std::vector<ExperimentResult>& results);
std::string table2_csv(const std::vector<ExperimentResult>& results);
std::string table5_csv(const std::vector<ExperimentResult>& results);

/// CSV field quoting (RFC 4180).
std::string csv_field(const std::string& text);
/// Fixed-precision decimal used in every CSV.
std::string format_number(double value, int decimals = 6);

}  // namespace mmfuse
