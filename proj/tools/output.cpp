#include "output.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

namespace esilc::cli {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

Vec parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string item = text.substr(pos, comma - pos);
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    item = first == std::string::npos ? "" : item.substr(first, last - first + 1);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
      throw Error(ErrorCode::Parse, fmt::format("{}: '{}' is not a finite number", flag, item));
    }
    values.push_back(v);
    pos = comma + 1;
  }
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string show(double v) { return std::isfinite(v) ? fmt::format("{:.10g}", v) : num(v); }

std::string format_matrix(const Mat& m) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    s += i ? ", [" : "[";
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += (j ? ", " : "") + show(m(i, j));
    s += "]";
  }
  return s + "]";
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()) {
  if (!out_) throw Error(ErrorCode::InvalidArgument, fmt::format("{}: cannot write file", path.string()));
  row(header);
  rows_ = 0;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) {
    throw Error(ErrorCode::InvalidArgument, "CSV row width does not match the header");
  }
  for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
  out_ << '\n';
  ++rows_;
}

void write_trajectory_csv(const std::filesystem::path& path, const TrialRecord& rec) {
  std::vector<std::string> header{"k"};
  auto names = [&](const char* base, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) header.push_back(fmt::format("{}_{}", base, i));
  };
  names("x", rec.x.rows());
  names("u", rec.u.rows());
  names("y", rec.y.rows());
  names("xbar", rec.xbar.rows());
  names("e", rec.e.rows());
  names("r", rec.r.rows());
  header.emplace_back("feasible");
  CsvWriter csv(path, header);
  for (int k = 0; k < rec.trial_length(); ++k) {
    std::vector<std::string> row{std::to_string(k)};
    for (const Mat* m : {&rec.x, &rec.u, &rec.y, &rec.xbar, &rec.e, &rec.r}) {
      for (Eigen::Index i = 0; i < m->rows(); ++i) row.push_back(num((*m)(i, k)));
    }
    row.emplace_back(k < rec.steps ? "1" : "0");
    csv.row(row);
  }
}

nlohmann::json number_json(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

nlohmann::json to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number_json(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json to_json(const Vec& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_json(v(i)));
  return out;
}

nlohmann::json to_json(const Polytope& set) {
  return {{"normals", to_json(set.normals())}, {"offsets", to_json(set.offsets())}};
}

nlohmann::json trial_summary_json(const TrialRecord& rec) {
  nlohmann::json j;
  j["estimate"] = {{"dA", to_json(rec.estimate.dA)}, {"dB", to_json(rec.estimate.dB)}};
  j["Q"] = number_json(rec.cost);
  j["synthesized"] = rec.synthesized;
  j["feasible"] = rec.feasible;
  j["trial_length"] = rec.trial_length();
  j["steps"] = rec.steps;
  j["infeasible_step"] = rec.infeasible_step ? nlohmann::json(*rec.infeasible_step) : nlohmann::json();
  j["failure"] = rec.failure_code ? nlohmann::json(std::string(to_string(*rec.failure_code))) : nlohmann::json();
  j["failure_message"] = rec.failure;
  j["max_tube_error"] = rec.max_tube_error();
  j["tube_violations"] = rec.tube_violations();
  j["constraint_violations"] = rec.constraint_violations();
  j["tail_error"] = number_json(tail_tracking_error(rec));
  return j;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, fmt::format("{}: cannot write file", path.string()));
  out << doc.dump(2) << '\n';
}

}  // namespace esilc::cli
