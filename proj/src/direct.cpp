#include "esilc/direct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "esilc/error.hpp"

namespace esilc {

namespace {

constexpr double kSameDiameter = 1e-12;

double side_length(int level) { return std::pow(3.0, -level); }

}  // namespace

SearchDomain::SearchDomain(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size() || lower_.size() == 0) {
    throw Error(ErrorCode::InvalidArgument, "search domain bounds must be nonempty and equally sized");
  }
  require_finite(lower_, "search domain lower bound");
  require_finite(upper_, "search domain upper bound");
  if ((upper_ - lower_).minCoeff() < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "search domain has lower > upper on some axis");
  }
}

SearchDomain SearchDomain::for_uncertainty(Eigen::Index n, Eigen::Index m, double ell_a, double ell_b,
                                           const std::optional<Vec>& mask) {
  if (n < 1 || m < 1) throw Error(ErrorCode::InvalidArgument, "uncertainty dimensions must be positive");
  if (!(ell_a >= 0.0) || !(ell_b >= 0.0) || !std::isfinite(ell_a) || !std::isfinite(ell_b)) {
    throw Error(ErrorCode::InvalidArgument, "uncertainty bounds must be finite and nonnegative");
  }
  const Eigen::Index d = n * (n + m);
  const Vec free = mask ? *mask : Vec::Ones(d);
  if (free.size() != d) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("uncertainty mask has {} entries, expected {}", free.size(), d));
  }
  Vec bound = Vec::Zero(d);
  auto fill_rows = [&](Eigen::Index offset, Eigen::Index row_len, double ell) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index start = offset + i * row_len;
      Eigen::Index count = 0;
      for (Eigen::Index j = 0; j < row_len; ++j) count += free(start + j) != 0.0 ? 1 : 0;
      for (Eigen::Index j = 0; j < row_len; ++j) {
        if (free(start + j) != 0.0) bound(start + j) = ell / static_cast<double>(count);
      }
    }
  };
  fill_rows(0, n, ell_a);
  fill_rows(n * n, m, ell_b);
  return SearchDomain(Vec::Zero(d) - bound, bound);  // +0 rather than -0 on frozen axes
}

Eigen::Index SearchDomain::free_dims() const {
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < dim(); ++i) k += frozen(i) ? 0 : 1;
  return k;
}

Vec SearchDomain::to_point(const Vec& unit) const {
  if (unit.size() != dim()) throw Error(ErrorCode::InvalidArgument, "to_point: dimension mismatch");
  Vec p(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) {
    p(i) = frozen(i) ? lower_(i) : lower_(i) + unit(i) * (upper_(i) - lower_(i));
  }
  return p;
}

Vec SearchDomain::to_unit(const Vec& point) const {
  if (point.size() != dim()) throw Error(ErrorCode::InvalidArgument, "to_unit: dimension mismatch");
  Vec u(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) {
    u(i) = frozen(i) ? 0.5 : (point(i) - lower_(i)) / (upper_(i) - lower_(i));
  }
  return u;
}

bool SearchDomain::contains(const Vec& point, double tol) const {
  if (point.size() != dim()) return false;
  return ((point - lower_).array() >= -tol).all() && ((upper_ - point).array() >= -tol).all();
}

std::vector<std::size_t> select_potentially_optimal(const std::vector<SelectionCandidate>& candidates,
                                                    double epsilon) {
  if (candidates.empty()) return {};
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].diameter < candidates[b].diameter;
  });

  // One representative per diameter: lowest value, then oldest.
  std::vector<std::size_t> reps;
  double f_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < order.size(); ++k) {
    const SelectionCandidate& c = candidates[order[k]];
    f_min = std::min(f_min, c.value);
    const bool same_group =
        !reps.empty() && c.diameter - candidates[reps.back()].diameter <=
                             kSameDiameter * std::max(1.0, c.diameter);
    if (!same_group) {
      reps.push_back(order[k]);
      continue;
    }
    const SelectionCandidate& r = candidates[reps.back()];
    if (c.value < r.value || (c.value == r.value && c.id < r.id)) reps.back() = order[k];
  }

  const double threshold = f_min - epsilon * std::abs(f_min);
  std::vector<std::size_t> selected;
  for (std::size_t g = reps.size(); g-- > 0;) {
    const SelectionCandidate& j = candidates[reps[g]];
    if (g + 1 == reps.size()) {
      selected.push_back(reps[g]);
      continue;
    }
    double k_lo = -std::numeric_limits<double>::infinity();
    double k_hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < reps.size(); ++i) {
      if (i == g) continue;
      const SelectionCandidate& o = candidates[reps[i]];
      const double slope = (j.value - o.value) / (j.diameter - o.diameter);
      if (i < g) {
        k_lo = std::max(k_lo, slope);
      } else {
        k_hi = std::min(k_hi, slope);
      }
    }
    if (!(k_hi > 0.0) || k_lo > k_hi) continue;
    if (j.value - k_hi * j.diameter <= threshold) selected.push_back(reps[g]);
  }
  return selected;
}

DirectOptimizer::DirectOptimizer(SearchDomain domain, DirectOptions options)
    : domain_(std::move(domain)), options_(options) {
  if (domain_.dim() == 0) throw Error(ErrorCode::InvalidArgument, "DIRECT needs a nonempty domain");
  if (!(options_.epsilon >= 0.0) || !(options_.delta_term >= 0.0) || options_.budget < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "DIRECT options need epsilon >= 0, delta_term >= 0 and budget >= 1");
  }
  const Vec center = Vec::Constant(domain_.dim(), 0.5);
  pending_.push_back({0, center, domain_.to_point(center)});
  proposed_units_.push_back(center);
  initial_pending_ = true;
}

Rect DirectOptimizer::make_rect(Vec center, std::vector<int> level, double value) {
  Rect r;
  r.id = next_rect_id_++;
  r.center = std::move(center);
  r.level = std::move(level);
  r.value = value;
  fill_geometry(r);
  return r;
}

void DirectOptimizer::fill_geometry(Rect& r) const {
  std::vector<double> sides;
  for (Eigen::Index i = 0; i < domain_.dim(); ++i) {
    if (!domain_.frozen(i)) sides.push_back(side_length(r.level[static_cast<std::size_t>(i)]));
  }
  // Sorted so equal level multisets give bit-identical diameters.
  std::sort(sides.begin(), sides.end());
  double sq = 0.0;
  r.volume = 1.0;
  for (double s : sides) {
    sq += s * s;
    r.volume *= s;
  }
  r.diameter = 0.5 * std::sqrt(sq);
}

std::vector<Proposal> DirectOptimizer::ask() {
  if (pending_.empty()) {
    if (terminated()) return {};
    start_sweep();
  }
  std::vector<Proposal> out;
  for (const Proposal& p : pending_) {
    if (p.id >= values_.size() && !buffered_.count(p.id)) out.push_back(p);
  }
  return out;
}

std::size_t DirectOptimizer::remaining_budget() const {
  const std::size_t used = proposed_units_.size();
  const auto budget = static_cast<std::size_t>(options_.budget);
  return used >= budget ? 0 : budget - used;
}

void DirectOptimizer::start_sweep() {
  std::vector<SelectionCandidate> cands;
  cands.reserve(rects_.size());
  for (const Rect& r : rects_) cands.push_back({r.diameter, r.value, r.id});
  const std::vector<std::size_t> chosen = select_potentially_optimal(cands, options_.epsilon);

  std::size_t available = remaining_budget();
  for (std::size_t idx : chosen) {
    const Rect& r = rects_[idx];
    int min_level = std::numeric_limits<int>::max();
    for (Eigen::Index i = 0; i < domain_.dim(); ++i) {
      if (!domain_.frozen(i)) min_level = std::min(min_level, r.level[static_cast<std::size_t>(i)]);
    }
    std::vector<Eigen::Index> axes;
    for (Eigen::Index i = 0; i < domain_.dim(); ++i) {
      if (!domain_.frozen(i) && r.level[static_cast<std::size_t>(i)] == min_level) axes.push_back(i);
    }
    axes.resize(std::min(axes.size(), available / 2));
    if (axes.empty()) break;
    available -= 2 * axes.size();

    Split split{idx, axes, proposed_units_.size()};
    const double delta = side_length(min_level) / 3.0;
    for (Eigen::Index axis : axes) {
      for (double sign : {-1.0, 1.0}) {
        Vec u = r.center;
        u(axis) += sign * delta;
        const std::size_t id = proposed_units_.size();
        proposed_units_.push_back(u);
        pending_.push_back({id, u, domain_.to_point(u)});
      }
    }
    splits_.push_back(std::move(split));
  }
  if (pending_.empty()) stalled_ = true;
  ++sweeps_;
}

void DirectOptimizer::tell(std::size_t id, double value) {
  const bool outstanding = !pending_.empty() && id >= pending_.front().id && id <= pending_.back().id &&
                           id >= values_.size() && !buffered_.count(id);
  if (!outstanding) {
    throw Error(ErrorCode::UnknownPoint, fmt::format("evaluation {} is not an outstanding proposal", id));
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("evaluation {} told a non-finite value", id));
  }
  buffered_[id] = value;
  apply_ready();
}

void DirectOptimizer::tell(const Vec& point, double value) {
  for (const Proposal& p : pending_) {
    if (p.point.size() != point.size()) continue;
    const double scale = std::max(1.0, p.point.cwiseAbs().maxCoeff());
    if ((p.point - point).cwiseAbs().maxCoeff() <= 1e-12 * scale && p.id >= values_.size() &&
        !buffered_.count(p.id)) {
      tell(p.id, value);
      return;
    }
  }
  throw Error(ErrorCode::UnknownPoint, "told point was never proposed or was already told");
}

void DirectOptimizer::apply_ready() {
  for (auto it = buffered_.find(values_.size()); it != buffered_.end();
       it = buffered_.find(values_.size())) {
    const std::size_t id = it->first;
    const double value = it->second;
    buffered_.erase(it);
    values_.push_back(value);
    if (!best_ || value < best_->value) {
      const Vec& u = proposed_units_[id];
      best_ = DirectBest{u, domain_.to_point(u), value, id};
    }
    best_history_.push_back(best_->value);
  }
  if (pending_.empty() || values_.size() <= pending_.back().id) return;

  if (initial_pending_) {
    initial_pending_ = false;
    rects_.push_back(make_rect(proposed_units_[0], std::vector<int>(static_cast<std::size_t>(domain_.dim()), 0),
                               values_[0]));
    rects_.back().evaluation = 0;
  } else {
    finish_sweep();
  }
  pending_.clear();
}

void DirectOptimizer::finish_sweep() {
  for (const Split& split : splits_) {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t k = 0; k < split.axes.size(); ++k) {
      const double lo = values_[split.first_proposal + 2 * k];
      const double hi = values_[split.first_proposal + 2 * k + 1];
      order.emplace_back(std::min(lo, hi), k);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<int> level = rects_[split.rect_index].level;
    for (const auto& [w, k] : order) {
      const Eigen::Index axis = split.axes[k];
      ++level[static_cast<std::size_t>(axis)];
      for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t eval = split.first_proposal + 2 * k + side;
        Rect child = make_rect(proposed_units_[eval], level, values_[eval]);
        child.evaluation = eval;
        rects_.push_back(std::move(child));
      }
    }
    Rect& parent = rects_[split.rect_index];
    parent.level = std::move(level);
    fill_geometry(parent);
  }
  splits_.clear();
}

bool DirectOptimizer::terminated() const {
  if (!pending_.empty()) return false;
  if (stalled_) return true;
  const std::size_t used = values_.size();
  if (used >= static_cast<std::size_t>(options_.budget)) return true;
  if (remaining_budget() < 2) return true;
  for (const Rect& r : rects_) {
    if (r.evaluation == best_->evaluation) return r.diameter <= options_.delta_term;
  }
  return false;
}

const DirectBest& DirectOptimizer::best() const {
  if (!best_) throw Error(ErrorCode::InvalidArgument, "DIRECT has no evaluations yet");
  return *best_;
}

double DirectOptimizer::max_diameter() const {
  double d = 0.0;
  for (const Rect& r : rects_) d = std::max(d, r.diameter);
  return d;
}

double DirectOptimizer::total_volume() const {
  double v = 0.0;
  for (const Rect& r : rects_) v += r.volume;
  return v;
}

}  // namespace esilc
