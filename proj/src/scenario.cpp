#include "esilc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace esilc {

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Mark& mark, const std::string& path, const std::string& message,
                         ErrorCode code = ErrorCode::Parse) const {
    throw Error(code, fmt::format("{}: {}: {}", where(mark), path, message));
  }
  [[noreturn]] void fail(const YAML::Node& node, const std::string& path, const std::string& message) const {
    fail(node.Mark(), path, message);
  }

  std::string where(const YAML::Mark& mark) const {
    if (mark.is_null()) return source_;
    return fmt::format("{}:{}:{}", source_, mark.line + 1, mark.column + 1);
  }

  void expect_map(const YAML::Node& node, const std::string& path,
                  std::initializer_list<std::string_view> allowed) const {
    if (!node.IsMap()) fail(node, path, "expected a mapping");
    for (const auto& kv : node) {
      const std::string key = kv.first.Scalar();
      bool known = false;
      for (std::string_view a : allowed) known = known || key == a;
      if (!known) {
        std::string list;
        for (std::string_view a : allowed) list += fmt::format("{}{}", list.empty() ? "" : ", ", a);
        fail(kv.first, path, fmt::format("unknown key '{}' (expected one of: {})", key, list));
      }
    }
  }

  YAML::Node required(const YAML::Node& map, const std::string& path, const char* key) const {
    YAML::Node child = map[key];
    if (!child) fail(map, path, fmt::format("missing required key '{}'", key));
    return child;
  }

  double number(const YAML::Node& node, const std::string& path) const {
    if (!node.IsScalar()) fail(node, path, "expected a number");
    double v = 0.0;
    try {
      v = node.as<double>();
    } catch (const YAML::Exception&) {
      fail(node, path, fmt::format("'{}' is not a number", node.Scalar()));
    }
    if (!std::isfinite(v)) fail(node, path, "number must be finite");
    return v;
  }

  int integer(const YAML::Node& node, const std::string& path) const {
    if (!node.IsScalar()) fail(node, path, "expected an integer");
    long long v = 0;
    try {
      v = node.as<long long>();
    } catch (const YAML::Exception&) {
      fail(node, path, fmt::format("'{}' is not an integer", node.Scalar()));
    }
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      fail(node, path, "integer out of range");
    }
    return static_cast<int>(v);
  }

  Vec vector(const YAML::Node& node, const std::string& path, Eigen::Index expected = -1) const {
    if (!node.IsSequence()) fail(node, path, "expected a flat array of numbers");
    Vec v(static_cast<Eigen::Index>(node.size()));
    for (std::size_t i = 0; i < node.size(); ++i) {
      v(static_cast<Eigen::Index>(i)) = number(node[i], fmt::format("{}[{}]", path, i));
    }
    if (expected >= 0 && v.size() != expected) {
      fail(node, path, fmt::format("expected {} entries, got {}", expected, v.size()));
    }
    return v;
  }

  Mat matrix(const YAML::Node& node, const std::string& path, Eigen::Index rows = -1,
             Eigen::Index cols = -1) const {
    if (!node.IsSequence() || node.size() == 0) fail(node, path, "expected a nested array (list of rows)");
    const std::size_t r = node.size();
    std::size_t c = 0;
    for (std::size_t i = 0; i < r; ++i) {
      const YAML::Node row = node[i];
      const std::string rp = fmt::format("{}[{}]", path, i);
      if (!row.IsSequence()) fail(row, rp, "expected a row (array of numbers)");
      if (i == 0) c = row.size();
      if (row.size() == 0 || row.size() != c) {
        fail(row, rp, fmt::format("rows must be nonempty and of equal length ({} expected)", c));
      }
    }
    Mat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            number(node[i][j], fmt::format("{}[{}][{}]", path, i, j));
      }
    }
    if ((rows >= 0 && m.rows() != rows) || (cols >= 0 && m.cols() != cols)) {
      fail(node, path,
           fmt::format("expected a {}x{} matrix, got {}x{}", rows >= 0 ? fmt::to_string(rows) : "?",
                       cols >= 0 ? fmt::to_string(cols) : "?", m.rows(), m.cols()));
    }
    return m;
  }

  Polytope polytope(const YAML::Node& node, const std::string& path, Eigen::Index dim) const {
    if (!node.IsMap()) fail(node, path, "expected {box: ...} or {normals: ..., offsets: ...}");
    if (node["box"]) {
      expect_map(node, path, {"box"});
      const YAML::Node box = node["box"];
      const std::string bp = path + ".box";
      if (box.IsScalar()) {
        const double r = number(box, bp);
        if (r < 0.0) fail(box, bp, "box radius must be nonnegative");
        return Polytope::box(dim, r);
      }
      expect_map(box, bp, {"lower", "upper"});
      const Vec lo = vector(required(box, bp, "lower"), bp + ".lower", dim);
      const Vec hi = vector(required(box, bp, "upper"), bp + ".upper", dim);
      if ((lo.array() > hi.array()).any()) fail(box, bp, "lower must not exceed upper");
      return Polytope::box(lo, hi);
    }
    expect_map(node, path, {"normals", "offsets"});
    const Mat h = matrix(required(node, path, "normals"), path + ".normals", -1, dim);
    const Vec c = vector(required(node, path, "offsets"), path + ".offsets", h.rows());
    return Polytope(h, c);
  }

 private:
  std::string source_;
};

// Validation messages name their section first; point at that section.
YAML::Mark section_mark(const std::string& message, const YAML::Node& root) {
  for (const char* key : {"plant", "truth", "bounds", "constraints", "tuning", "reference", "learning", "x0"}) {
    if (message.rfind(key, 0) == 0 && root[key]) return root[key].Mark();
  }
  return root.Mark();
}

Scenario read(const YAML::Node& root, const Reader& in) {
  in.expect_map(root, "scenario",
                {"name", "plant", "truth", "bounds", "constraints", "tuning", "reference", "learning", "x0"});
  Scenario s;
  if (root["name"]) {
    if (!root["name"].IsScalar()) in.fail(root["name"], "name", "expected a string");
    s.name = root["name"].Scalar();
  }

  const YAML::Node plant = in.required(root, "scenario", "plant");
  in.expect_map(plant, "plant", {"A", "B", "C", "D"});
  s.plant.A = in.matrix(in.required(plant, "plant", "A"), "plant.A");
  const Eigen::Index n = s.plant.A.rows();
  if (s.plant.A.cols() != n) in.fail(plant["A"], "plant.A", "A must be square");
  s.plant.B = in.matrix(in.required(plant, "plant", "B"), "plant.B", n);
  const Eigen::Index m = s.plant.B.cols();
  s.plant.C = in.matrix(in.required(plant, "plant", "C"), "plant.C", -1, n);
  const Eigen::Index p = s.plant.C.rows();
  s.plant.D = plant["D"] ? in.matrix(plant["D"], "plant.D", p, m) : Mat::Zero(p, m);

  s.truth = Uncertainty::zero(n, m);
  if (const YAML::Node truth = root["truth"]) {
    in.expect_map(truth, "truth", {"dA", "dB"});
    if (truth["dA"]) s.truth.dA = in.matrix(truth["dA"], "truth.dA", n, n);
    if (truth["dB"]) s.truth.dB = in.matrix(truth["dB"], "truth.dB", n, m);
  }

  const YAML::Node bounds = in.required(root, "scenario", "bounds");
  in.expect_map(bounds, "bounds", {"ell_A", "ell_B", "mask"});
  s.ell_a = in.number(in.required(bounds, "bounds", "ell_A"), "bounds.ell_A");
  s.ell_b = in.number(in.required(bounds, "bounds", "ell_B"), "bounds.ell_B");
  if (const YAML::Node mask = bounds["mask"]) {
    in.expect_map(mask, "bounds.mask", {"dA", "dB"});
    Uncertainty free{Mat::Ones(n, n), Mat::Ones(n, m)};
    if (mask["dA"]) free.dA = in.matrix(mask["dA"], "bounds.mask.dA", n, n);
    if (mask["dB"]) free.dB = in.matrix(mask["dB"], "bounds.mask.dB", n, m);
    s.mask = free.flatten().unaryExpr([](double v) { return v != 0.0 ? 1.0 : 0.0; });
  }

  const YAML::Node cons = in.required(root, "scenario", "constraints");
  in.expect_map(cons, "constraints", {"X", "U"});
  s.X = in.polytope(in.required(cons, "constraints", "X"), "constraints.X", n);
  s.U = in.polytope(in.required(cons, "constraints", "U"), "constraints.U", m);

  const YAML::Node tun = in.required(root, "scenario", "tuning");
  in.expect_map(tun, "tuning", {"Qt", "R", "Tw", "N", "lambda"});
  s.tuning.Q = in.matrix(in.required(tun, "tuning", "Qt"), "tuning.Qt", n, n);
  s.tuning.R = in.matrix(in.required(tun, "tuning", "R"), "tuning.R", m, m);
  s.tuning.T = in.matrix(in.required(tun, "tuning", "Tw"), "tuning.Tw", p, p);
  s.tuning.horizon = in.integer(in.required(tun, "tuning", "N"), "tuning.N");
  if (tun["lambda"]) s.tuning.lambda = in.number(tun["lambda"], "tuning.lambda");

  const YAML::Node ref = in.required(root, "scenario", "reference");
  in.expect_map(ref, "reference", {"steps"});
  const YAML::Node steps = in.required(ref, "reference", "steps");
  if (!steps.IsSequence() || steps.size() == 0) in.fail(steps, "reference.steps", "expected a nonempty list");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const YAML::Node st = steps[i];
    const std::string sp = fmt::format("reference.steps[{}]", i);
    in.expect_map(st, sp, {"k", "value"});
    ReferenceStep step;
    step.start = in.integer(in.required(st, sp, "k"), sp + ".k");
    const YAML::Node value = in.required(st, sp, "value");
    if (value.IsScalar() && p == 1) {
      step.value = Vec::Constant(1, in.number(value, sp + ".value"));
    } else {
      step.value = in.vector(value, sp + ".value", p);
    }
    if (i > 0 && step.start <= s.reference.back().start) {
      in.fail(st, sp, "step starts must be strictly increasing");
    }
    s.reference.push_back(std::move(step));
  }

  s.x0 = root["x0"] ? in.vector(root["x0"], "x0", n) : Vec::Zero(n);

  if (const YAML::Node learn = root["learning"]) {
    in.expect_map(learn, "learning", {"kind", "budget", "delta_term", "trial_length", "noise", "epsilon"});
    if (const YAML::Node kind = learn["kind"]) {
      const auto k = kind.IsScalar() ? parse_cost_kind(kind.Scalar()) : std::nullopt;
      if (!k) in.fail(kind, "learning.kind", "expected 'identification' or 'performance'");
      s.learning.kind = *k;
    }
    if (learn["budget"]) s.learning.budget = in.integer(learn["budget"], "learning.budget");
    if (learn["delta_term"]) s.learning.delta_term = in.number(learn["delta_term"], "learning.delta_term");
    if (learn["trial_length"]) {
      s.learning.trial_length = in.integer(learn["trial_length"], "learning.trial_length");
    }
    if (learn["noise"]) s.learning.noise = in.number(learn["noise"], "learning.noise");
    if (learn["epsilon"]) s.learning.epsilon = in.number(learn["epsilon"], "learning.epsilon");
  }

  try {
    s.validate();
  } catch (const Error& e) {
    in.fail(section_mark(e.message(), root), "invalid scenario", e.message(), e.code());
  }
  return s;
}

// Shortest text that parses back to the same double.
std::string num(double v) { return fmt::format("{}", v); }

void emit_vector(YAML::Emitter& out, const Vec& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << num(v(i));
  out << YAML::EndSeq;
}

void emit_matrix(YAML::Emitter& out, const Mat& m) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << num(m(i, j));
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

// Bounds of an axis-aligned box stored exactly as Polytope::box lays it out.
std::optional<std::pair<Vec, Vec>> as_box(const Polytope& set) {
  const Eigen::Index n = set.dim();
  if (set.flagged_empty() || set.num_facets() != 2 * n) return std::nullopt;
  Vec lo(n), hi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < 2 * n; ++r) {
      const double v = set.normals()(r, i);
      if (v == 1.0) hi(i) = set.offsets()(r);
      if (v == -1.0) lo(i) = -set.offsets()(r);
    }
  }
  const Polytope rebuilt = Polytope::box(lo, hi);
  if (rebuilt.normals() != set.normals() || rebuilt.offsets() != set.offsets()) return std::nullopt;
  return std::make_pair(lo, hi);
}

void emit_polytope(YAML::Emitter& out, const Polytope& set) {
  out << YAML::BeginMap;
  if (auto box = as_box(set)) {
    const auto& [lo, hi] = *box;
    out << YAML::Key << "box";
    if ((hi.array() == -lo.array()).all() && (hi.array() == hi(0)).all()) {
      out << YAML::Value << num(hi(0));
    } else {
      out << YAML::Value << YAML::BeginMap;
      out << YAML::Key << "lower" << YAML::Value;
      emit_vector(out, lo);
      out << YAML::Key << "upper" << YAML::Value;
      emit_vector(out, hi);
      out << YAML::EndMap;
    }
  } else {
    out << YAML::Key << "normals" << YAML::Value;
    emit_matrix(out, set.normals());
    out << YAML::Key << "offsets" << YAML::Value;
    emit_vector(out, set.offsets());
  }
  out << YAML::EndMap;
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorCode::Parse, fmt::format("{}:{}:{}: {}", source, e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  return read(root, Reader(source));
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::Parse, fmt::format("{}: cannot open file", path.string()));
  std::ostringstream text;
  text << file.rdbuf();
  return parse_scenario(text.str(), path.string());
}

std::string serialize_scenario(const Scenario& s) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  if (!s.name.empty()) out << YAML::Key << "name" << YAML::Value << s.name;

  out << YAML::Key << "plant" << YAML::Value << YAML::BeginMap;
  for (auto [key, m] : {std::pair{"A", &s.plant.A}, {"B", &s.plant.B}, {"C", &s.plant.C}, {"D", &s.plant.D}}) {
    out << YAML::Key << key << YAML::Value;
    emit_matrix(out, *m);
  }
  out << YAML::EndMap;

  out << YAML::Key << "truth" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dA" << YAML::Value;
  emit_matrix(out, s.truth.dA);
  out << YAML::Key << "dB" << YAML::Value;
  emit_matrix(out, s.truth.dB);
  out << YAML::EndMap;

  out << YAML::Key << "bounds" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "ell_A" << YAML::Value << num(s.ell_a);
  out << YAML::Key << "ell_B" << YAML::Value << num(s.ell_b);
  if (s.mask) {
    const Uncertainty free = Uncertainty::unflatten(*s.mask, s.plant.states(), s.plant.inputs());
    out << YAML::Key << "mask" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "dA" << YAML::Value;
    emit_matrix(out, free.dA);
    out << YAML::Key << "dB" << YAML::Value;
    emit_matrix(out, free.dB);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  out << YAML::Key << "constraints" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "X" << YAML::Value;
  emit_polytope(out, s.X);
  out << YAML::Key << "U" << YAML::Value;
  emit_polytope(out, s.U);
  out << YAML::EndMap;

  out << YAML::Key << "tuning" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "Qt" << YAML::Value;
  emit_matrix(out, s.tuning.Q);
  out << YAML::Key << "R" << YAML::Value;
  emit_matrix(out, s.tuning.R);
  out << YAML::Key << "Tw" << YAML::Value;
  emit_matrix(out, s.tuning.T);
  out << YAML::Key << "N" << YAML::Value << s.tuning.horizon;
  out << YAML::Key << "lambda" << YAML::Value << num(s.tuning.lambda);
  out << YAML::EndMap;

  out << YAML::Key << "reference" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "steps" << YAML::Value << YAML::BeginSeq;
  for (const ReferenceStep& st : s.reference) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "k" << YAML::Value << st.start;
    out << YAML::Key << "value" << YAML::Value;
    emit_vector(out, st.value);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "x0" << YAML::Value;
  emit_vector(out, s.x0);

  out << YAML::Key << "learning" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << std::string(to_string(s.learning.kind));
  out << YAML::Key << "budget" << YAML::Value << s.learning.budget;
  out << YAML::Key << "delta_term" << YAML::Value << num(s.learning.delta_term);
  out << YAML::Key << "trial_length" << YAML::Value << s.learning.trial_length;
  out << YAML::Key << "noise" << YAML::Value << num(s.learning.noise);
  out << YAML::Key << "epsilon" << YAML::Value << num(s.learning.epsilon);
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::InvalidArgument, fmt::format("{}: cannot write file", path.string()));
  file << serialize_scenario(scenario);
}

}  // namespace esilc
