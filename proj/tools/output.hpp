#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "esilc/ilc.hpp"

namespace esilc::cli {

/// Shortest round-trip text; "nan", "inf" and "-inf" for non-finite values.
std::string num(double v);

/// Comma-separated numbers, as given to --delta-hat or --x0.
Vec parse_list(const std::string& text, const std::string& flag);

/// 10 significant digits, for console summaries.
std::string show(double v);

/// [[a, b], [c, d]] with show().
std::string format_matrix(const Mat& m);

/// CSV with a header row and LF line endings.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);
  std::size_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::size_t rows_ = 0;
};

/// One row per step: k, x_i, u_i, y_i, xbar_i, e_i, r_i, feasible. Steps
/// after an infeasible one hold nan and feasible = 0.
void write_trajectory_csv(const std::filesystem::path& path, const TrialRecord& record);

nlohmann::json to_json(const Mat& m);
nlohmann::json to_json(const Vec& v);
nlohmann::json to_json(const Polytope& set);
/// Non-finite numbers become null.
nlohmann::json number_json(double v);
nlohmann::json trial_summary_json(const TrialRecord& record);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace esilc::cli
