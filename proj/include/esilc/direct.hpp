#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "esilc/linalg.hpp"

namespace esilc {

/// Box [lower, upper] searched by DIRECT, with the affine map to and from the
/// unit cube. Axes with lower == upper are frozen and never divided.
class SearchDomain {
 public:
  SearchDomain() = default;
  SearchDomain(Vec lower, Vec upper);

  /// Box for the flattened (dA, dB) that keeps every point inside
  /// |dA|_inf <= ell_a and |dB|_inf <= ell_b: each row splits its budget
  /// evenly over its free entries. `mask` (same flattening, nonzero = free)
  /// pins the other entries to zero; without a mask every entry is free.
  static SearchDomain for_uncertainty(Eigen::Index n, Eigen::Index m, double ell_a, double ell_b,
                                      const std::optional<Vec>& mask = std::nullopt);

  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  Eigen::Index dim() const { return lower_.size(); }
  bool frozen(Eigen::Index axis) const { return lower_(axis) == upper_(axis); }
  Eigen::Index free_dims() const;

  Vec to_point(const Vec& unit) const;
  Vec to_unit(const Vec& point) const;
  bool contains(const Vec& point, double tol = 1e-12) const;

 private:
  Vec lower_;
  Vec upper_;
};

/// Hyperrectangle of the unit-cube partition. Side along axis i is
/// 3^-level[i] (frozen axes keep level 0 and do not count in the diameter).
struct Rect {
  std::size_t id = 0;          // creation order
  std::size_t evaluation = 0;  // proposal that sampled the center
  Vec center;
  std::vector<int> level;
  double value = 0.0;
  double diameter = 0.0;  // half the Euclidean norm of the free side lengths
  double volume = 0.0;    // product of the free side lengths
};

/// (diameter, value) pair considered by the selection rule.
struct SelectionCandidate {
  double diameter = 0.0;
  double value = 0.0;
  std::size_t id = 0;  // smaller is older
};

/// Potentially optimal candidates: per distinct diameter, the lowest value
/// (then oldest) is a candidate; it is kept when some slope K > 0 puts it on
/// the lower-right hull and value - K * diameter <= f_min - epsilon * |f_min|.
/// A largest-diameter candidate is always kept. Returns indices into
/// `candidates`, largest diameter first.
std::vector<std::size_t> select_potentially_optimal(const std::vector<SelectionCandidate>& candidates,
                                                    double epsilon);

struct DirectOptions {
  double epsilon = 1e-4;
  double delta_term = 1e-3;  // in unit-cube coordinates
  int budget = 200;
};

struct Proposal {
  std::size_t id = 0;  // evaluation index, dense from 0
  Vec unit;
  Vec point;
};

struct DirectBest {
  Vec unit;
  Vec point;
  double value = 0.0;
  std::size_t evaluation = 0;
};

/// DIRECT in ask/tell form. A sweep selects rects, proposes the samples
/// c +- side/3 * e_i along their longest free axes and, once every sample has
/// been told, trisects them. Values may arrive in any order; they are
/// applied in proposal order.
class DirectOptimizer {
 public:
  explicit DirectOptimizer(SearchDomain domain, DirectOptions options = {});

  /// Outstanding proposals, starting a new sweep when none are pending.
  /// Empty once terminated.
  std::vector<Proposal> ask();

  /// Throws UnknownPoint for ids or points that are not outstanding and
  /// InvalidArgument for non-finite values.
  void tell(std::size_t id, double value);
  void tell(const Vec& point, double value);

  /// Budget exhausted (or too little left for one trisection) or the rect
  /// holding the best point has diameter <= delta_term.
  bool terminated() const;

  bool has_best() const { return best_.has_value(); }
  const DirectBest& best() const;

  const SearchDomain& domain() const { return domain_; }
  const DirectOptions& options() const { return options_; }
  const std::vector<Rect>& rects() const { return rects_; }
  std::size_t evaluations() const { return values_.size(); }
  /// Told values in proposal order.
  const std::vector<double>& values() const { return values_; }
  /// Best value after each evaluation.
  const std::vector<double>& best_history() const { return best_history_; }
  /// Proposed unit points in proposal order.
  const std::vector<Vec>& proposed() const { return proposed_units_; }
  int sweeps() const { return sweeps_; }
  double max_diameter() const;
  double total_volume() const;

 private:
  struct Split {
    std::size_t rect_index;
    std::vector<Eigen::Index> axes;
    std::size_t first_proposal;  // minus sample of axes[k] at first + 2k, plus at first + 2k + 1
  };

  Rect make_rect(Vec center, std::vector<int> level, double value);
  void fill_geometry(Rect& r) const;
  void start_sweep();
  void apply_ready();
  void finish_sweep();
  std::size_t remaining_budget() const;

  SearchDomain domain_;
  DirectOptions options_;
  std::vector<Rect> rects_;
  std::size_t next_rect_id_ = 0;
  int sweeps_ = 0;

  std::vector<Vec> proposed_units_;
  std::vector<double> values_;
  std::vector<double> best_history_;
  std::map<std::size_t, double> buffered_;
  std::vector<Proposal> pending_;
  std::vector<Split> splits_;
  bool initial_pending_ = false;
  bool stalled_ = false;
  std::optional<DirectBest> best_;
};

}  // namespace esilc
