#pragma once

#include "penning/coulomb.hpp"

#include <array>
#include <span>
#include <vector>

namespace penning {

struct FmmOptions {
  double epsilon = 1e-7;
  /// A box is split while it holds more than this many charges.
  int leaf_min = 64;
  int max_depth = 10;
  /// Results are reproducible bit-for-bit in either mode: every accumulation is owned by one
  /// target box and runs in a fixed order. Kept so callers can state the requirement.
  bool deterministic = false;
  /// Expansion order; 0 selects it from epsilon.
  int order = 0;
};

/// Expansion order used for a requested relative precision.
int fmm_order(double epsilon);

/// Adaptive octree over a set of points, with the interaction lists of the adaptive FMM:
///   U  leaves touching a leaf (itself included)        -> direct sums
///   V  children of the parent's colleagues not touching -> multipole-to-local
///   W  descendants of a leaf's colleagues whose parent touches it but which do not
///                                                      -> multipole evaluated at targets
///   X  dual of W                                       -> sources into local expansion
class FmmTree {
 public:
  struct Box {
    int level = 0;
    std::array<int, 3> coord{0, 0, 0};
    int parent = -1;
    int child_begin = -1;
    int child_count = 0;
    int begin = 0;  // range in the sorted order
    int end = 0;
    bool leaf() const { return child_count == 0; }
    int count() const { return end - begin; }
  };

  FmmTree(const Positions& x, int leaf_min, int max_depth);

  const std::vector<Box>& boxes() const { return boxes_; }
  /// sorted slot -> original index
  const std::vector<Eigen::Index>& order() const { return order_; }
  /// Positions in tree units: the root cube is [0,1)^3.
  const std::array<std::vector<double>, 3>& unit_positions() const { return unit_; }
  const Vec3& origin() const { return origin_; }
  double side() const { return side_; }
  int depth() const { return depth_; }
  int max_depth() const { return max_depth_; }
  /// first box index of each level, plus a terminal entry
  const std::vector<int>& level_begin() const { return level_begin_; }

  Vec3 unit_center(int b) const;
  double unit_side(int b) const;

  std::span<const int> colleagues(int b) const { return list(colleagues_, b); }
  std::span<const int> u_list(int b) const { return list(u_, b); }
  std::span<const int> v_list(int b) const { return list(v_, b); }
  std::span<const int> w_list(int b) const { return list(w_, b); }
  std::span<const int> x_list(int b) const { return list(x_, b); }

  /// Closed boxes share at least one point (nested boxes included).
  bool touches(int a, int b) const;

 private:
  struct Lists {
    std::vector<int> start;
    std::vector<int> items;
  };
  static std::span<const int> list(const Lists& l, int b) {
    return {l.items.data() + l.start[b], std::size_t(l.start[b + 1] - l.start[b])};
  }
  void build_lists();

  std::vector<Box> boxes_;
  std::vector<Eigen::Index> order_;
  std::array<std::vector<double>, 3> unit_;
  Vec3 origin_ = Vec3::Zero();
  double side_ = 1.0;
  int depth_ = 0;
  int max_depth_ = 0;
  std::vector<int> level_begin_;
  Lists colleagues_, u_, v_, w_, x_;
};

/// Potential and field at every charge by the fast multipole method.
/// epsilon must lie in [1e-12, 1e-1].
FieldResult fmm_solve(const ChargeSystem& sys, const FmmOptions& options = {});

}  // namespace penning
