#include "penning/fmm.hpp"

#include "kernels.hpp"
#include "penning/constants.hpp"
#include "penning/expansions.hpp"
#include "penning/harmonics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace penning {

namespace h = harmonics;
using cplx = std::complex<double>;

namespace detail {
[[noreturn]] void throw_singular_pair(const Positions& x);
}

int fmm_order(double epsilon) {
  // expansion radius sqrt(3)/2 s seen from the nearest well-separated center, 2 s away
  return truncation_order(epsilon, std::sqrt(3.0) / 4.0);
}

namespace {

std::uint64_t interleave(std::uint32_t x, std::uint32_t y, std::uint32_t z, int bits) {
  std::uint64_t key = 0;
  for (int k = 0; k < bits; ++k) {
    key |= std::uint64_t((x >> k) & 1u) << (3 * k);
    key |= std::uint64_t((y >> k) & 1u) << (3 * k + 1);
    key |= std::uint64_t((z >> k) & 1u) << (3 * k + 2);
  }
  return key;
}

}  // namespace

FmmTree::FmmTree(const Positions& x, int leaf_min, int max_depth) : max_depth_(max_depth) {
  if (leaf_min < 1) throw Error("leaf_min must be at least 1");
  if (max_depth < 0 || max_depth > 20) throw Error("max_depth must lie in [0, 20]");
  const Eigen::Index n = x.cols();
  if (n < 1) throw Error("tree needs at least one point");

  const Vec3 lo = x.rowwise().minCoeff();
  const Vec3 hi = x.rowwise().maxCoeff();
  double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) extent = std::max(1.0, hi.cwiseAbs().maxCoeff());
  side_ = extent * (1.0 + 1e-9);
  origin_ = 0.5 * (lo + hi) - Vec3::Constant(0.5 * side_);

  const std::uint32_t cells = 1u << max_depth;
  std::vector<std::uint64_t> keys(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint32_t c[3];
    for (int a = 0; a < 3; ++a) {
      const double u = (x(a, i) - origin_[a]) / side_;
      const double cell = std::floor(u * cells);
      c[a] = std::uint32_t(std::clamp(cell, 0.0, double(cells - 1)));
    }
    keys[i] = interleave(c[0], c[1], c[2], max_depth);
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), Eigen::Index(0));
  std::stable_sort(order_.begin(), order_.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return keys[a] < keys[b]; });
  for (int a = 0; a < 3; ++a) {
    unit_[a].resize(n);
    for (Eigen::Index i = 0; i < n; ++i) unit_[a][i] = (x(a, order_[i]) - origin_[a]) / side_;
  }

  Box root;
  root.end = int(n);
  boxes_.push_back(root);
  for (std::size_t cur = 0; cur < boxes_.size(); ++cur) {
    const Box box = boxes_[cur];
    if (box.count() <= leaf_min || box.level >= max_depth) continue;
    const int shift = 3 * (max_depth - box.level - 1);
    const int first = int(boxes_.size());
    int start = box.begin;
    while (start < box.end) {
      const unsigned oct = unsigned(keys[order_[start]] >> shift) & 7u;
      int stop = start;
      while (stop < box.end && (unsigned(keys[order_[stop]] >> shift) & 7u) == oct) ++stop;
      Box child;
      child.level = box.level + 1;
      child.coord = {2 * box.coord[0] + int(oct & 1u), 2 * box.coord[1] + int((oct >> 1) & 1u),
                     2 * box.coord[2] + int((oct >> 2) & 1u)};
      child.parent = int(cur);
      child.begin = start;
      child.end = stop;
      boxes_.push_back(child);
      start = stop;
    }
    boxes_[cur].child_begin = first;
    boxes_[cur].child_count = int(boxes_.size()) - first;
  }

  depth_ = boxes_.back().level;
  level_begin_.assign(depth_ + 2, int(boxes_.size()));
  for (int b = int(boxes_.size()) - 1; b >= 0; --b) level_begin_[boxes_[b].level] = b;

  build_lists();
}

Vec3 FmmTree::unit_center(int b) const {
  const Box& box = boxes_[b];
  const double s = unit_side(b);
  return {(box.coord[0] + 0.5) * s, (box.coord[1] + 0.5) * s, (box.coord[2] + 0.5) * s};
}

double FmmTree::unit_side(int b) const { return std::ldexp(1.0, -boxes_[b].level); }

bool FmmTree::touches(int a, int b) const {
  const Box& A = boxes_[a];
  const Box& B = boxes_[b];
  const int level = std::max(A.level, B.level);
  const long sa = 1L << (level - A.level), sb = 1L << (level - B.level);
  for (int k = 0; k < 3; ++k) {
    const long la = long(A.coord[k]) * sa, lb = long(B.coord[k]) * sb;
    if (la > lb + sb || lb > la + sa) return false;
  }
  return true;
}

void FmmTree::build_lists() {
  const int nb = int(boxes_.size());
  std::vector<std::vector<int>> coll(nb), u(nb), v(nb), w(nb), xl(nb);

  for (int b = 1; b < nb; ++b) {
    const int parent = boxes_[b].parent;
    auto consider_children = [&](int c) {
      const Box& box = boxes_[c];
      for (int k = box.child_begin; k < box.child_begin + box.child_count; ++k)
        if (k != b && touches(k, b)) coll[b].push_back(k);
    };
    consider_children(parent);
    for (int c : coll[parent]) consider_children(c);
    std::sort(coll[b].begin(), coll[b].end());
  }

  for (int b = 0; b < nb; ++b) {
    const Box& box = boxes_[b];
    if (box.level >= 2) {
      for (int c : coll[box.parent]) {
        const Box& cb = boxes_[c];
        for (int k = cb.child_begin; k < cb.child_begin + cb.child_count; ++k)
          if (!touches(k, b)) v[b].push_back(k);
      }
      std::sort(v[b].begin(), v[b].end());
    }
    if (!box.leaf()) continue;

    std::vector<int> stack{0};
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      if (!touches(c, b)) continue;
      const Box& cb = boxes_[c];
      if (cb.leaf()) {
        u[b].push_back(c);
      } else {
        for (int k = cb.child_begin; k < cb.child_begin + cb.child_count; ++k) stack.push_back(k);
      }
    }
    std::sort(u[b].begin(), u[b].end());

    for (int c : coll[b]) {
      const Box& cb = boxes_[c];
      if (cb.leaf()) continue;
      stack.assign(1, c);
      while (!stack.empty()) {
        const int d = stack.back();
        stack.pop_back();
        const Box& db = boxes_[d];
        for (int k = db.child_begin; k < db.child_begin + db.child_count; ++k) {
          if (!touches(k, b)) {
            w[b].push_back(k);
          } else if (!boxes_[k].leaf()) {
            stack.push_back(k);
          }
        }
      }
    }
    std::sort(w[b].begin(), w[b].end());
    for (int d : w[b]) xl[d].push_back(b);
  }

  auto flatten = [nb](std::vector<std::vector<int>>& src, Lists& dst) {
    dst.start.assign(nb + 1, 0);
    for (int b = 0; b < nb; ++b) dst.start[b + 1] = dst.start[b] + int(src[b].size());
    dst.items.clear();
    dst.items.reserve(dst.start[nb]);
    for (auto& l : src) dst.items.insert(dst.items.end(), l.begin(), l.end());
  };
  for (auto& l : xl) std::sort(l.begin(), l.end());
  flatten(coll, colleagues_);
  flatten(u, u_);
  flatten(v, v_);
  flatten(w, w_);
  flatten(xl, x_);
}

namespace {

int direct_threshold(int p) {
  return 2 * (p + 1) * (p + 1);
}

using RotationTable = std::vector<std::shared_ptr<const h::AxisRotation>>;

int offset_key(int dx, int dy, int dz) { return (dx + 3) * 49 + (dy + 3) * 7 + (dz + 3); }

// All V-list conversions of one level. Pairs sharing an offset share the rotation and the
// axial operator, so they are processed as matrix products over a batch of columns.
void batched_m2l(const FmmTree& tree, int level, int p, const std::vector<cplx>& M,
                 std::vector<cplx>& L, const RotationTable& rot_v) {
  const auto& boxes = tree.boxes();
  const int lo = tree.level_begin()[level], hi = tree.level_begin()[level + 1];
  const int stride = h::coeff_count(p);
  const double side = std::ldexp(1.0, -level);
  constexpr int batch = 64;

#pragma omp parallel
  {
    int nt = 1, id = 0;
#ifdef _OPENMP
    nt = omp_get_num_threads();
    id = omp_get_thread_num();
#endif
    // each thread owns a contiguous range of targets, so the result does not depend on timing
    const int t0 = lo + int((long(hi - lo) * id) / nt), t1 = lo + int((long(hi - lo) * (id + 1)) / nt);
    std::vector<std::vector<std::pair<int, int>>> groups(343);
    for (int t = t0; t < t1; ++t)
      for (int s : tree.v_list(t)) {
        const int dx = boxes[t].coord[0] - boxes[s].coord[0];
        const int dy = boxes[t].coord[1] - boxes[s].coord[1];
        const int dz = boxes[t].coord[2] - boxes[s].coord[2];
        groups[offset_key(dx, dy, dz)].emplace_back(s, t);
      }
    std::vector<double> are(stride * batch), aim(stride * batch), bre(stride * batch),
        bim(stride * batch), fact(2 * p + 1);
    std::vector<cplx> phase(p + 1);
    std::vector<const cplx*> src(batch);
    std::vector<cplx*> dst(batch);

    for (int key = 0; key < 343; ++key) {
      const auto& pairs = groups[key];
      if (pairs.empty()) continue;
      const int dx = key / 49 - 3, dy = (key / 7) % 7 - 3, dz = key % 7 - 3;
      const h::Direction dir = h::direction_of(Vec3(dx, dy, dz) * side);
      const h::AxisRotation& rot = *rot_v[key];
      const cplx e(dir.cos_phi, dir.sin_phi);
      phase[0] = 1.0;
      for (int m = 1; m <= p; ++m) phase[m] = phase[m - 1] * e;
      const double inv_d = 1.0 / dir.length;
      fact[0] = inv_d;
      for (int k = 1; k <= 2 * p; ++k) fact[k] = fact[k - 1] * k * inv_d;

      for (std::size_t first = 0; first < pairs.size(); first += batch) {
        const int cols = int(std::min<std::size_t>(batch, pairs.size() - first));
        for (int c = 0; c < cols; ++c) src[c] = M.data() + std::size_t(pairs[first + c].first) * stride;
        for (int n = 0; n <= p; ++n)
          for (int m = 0; m <= n; ++m) {
            const int r = h::idx(n, m);
            double* ore = are.data() + r * cols;
            double* oim = aim.data() + r * cols;
            for (int c = 0; c < cols; ++c) {
              const cplx v = src[c][r] * phase[m];
              ore[c] = v.real();
              oim[c] = v.imag();
            }
          }
        rot.apply_batch(h::AxisRotation::MultipoleForward, are.data(), aim.data(), bre.data(),
                        bim.data(), cols);
        for (int j = 0; j <= p; ++j)
          for (int k = 0; k <= j; ++k) {
            double* ore = are.data() + h::idx(j, k) * cols;
            double* oim = aim.data() + h::idx(j, k) * cols;
            std::fill(ore, ore + cols, 0.0);
            std::fill(oim, oim + cols, 0.0);
            for (int n = k; n <= p; ++n) {
              const double f = ((j + k) & 1) ? -fact[n + j] : fact[n + j];
              const double* ire = bre.data() + h::idx(n, k) * cols;
              const double* iim = bim.data() + h::idx(n, k) * cols;
#pragma omp simd
              for (int c = 0; c < cols; ++c) {
                ore[c] += f * ire[c];
                oim[c] += f * iim[c];
              }
            }
          }
        rot.apply_batch(h::AxisRotation::LocalBack, are.data(), aim.data(), bre.data(),
                        bim.data(), cols);
        for (int c = 0; c < cols; ++c) dst[c] = L.data() + std::size_t(pairs[first + c].second) * stride;
        for (int n = 0; n <= p; ++n)
          for (int m = 0; m <= n; ++m) {
            const int r = h::idx(n, m);
            const double* ire = bre.data() + r * cols;
            const double* iim = bim.data() + r * cols;
            const cplx back = std::conj(phase[m]);
            for (int c = 0; c < cols; ++c) dst[c][r] += cplx(ire[c], iim[c]) * back;
          }
      }
    }
  }
}

}  // namespace

FieldResult fmm_solve(const ChargeSystem& sys, const FmmOptions& options) {
  if (!(options.epsilon >= 1e-12 && options.epsilon <= 1e-1))
    throw Error("fmm precision must lie in [1e-12, 1e-1]");
  sys.validate();
  const int p = options.order > 0 ? options.order : fmm_order(options.epsilon);
  const FmmTree tree(sys.x, options.leaf_min, options.max_depth);
  if (tree.boxes().size() == 1) return direct_solve(sys);
  const auto& boxes = tree.boxes();
  const auto& order = tree.order();
  const auto& pos = tree.unit_positions();
  const int nb = int(boxes.size());
  const std::size_t n = std::size_t(sys.size());

  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = sys.q[order[i]];

  const int stride = h::coeff_count(p);
  std::vector<cplx> M(std::size_t(nb) * stride, 0.0), L(std::size_t(nb) * stride, 0.0);
  std::vector<char> has_local(nb, 0);

  // Rotations: parent/child shifts point along (+-1,+-1,+-1); interaction-list shifts are
  // integer multiples of the box side in [-3, 3]^3.
  const auto rot_up = h::AxisRotation::get(p, std::atan2(std::sqrt(2.0), 1.0));
  const auto rot_down = h::AxisRotation::get(p, std::atan2(std::sqrt(2.0), -1.0));
  std::vector<std::shared_ptr<const h::AxisRotation>> rot_v(343);
  for (int b = 0; b < nb; ++b)
    for (int s : tree.v_list(b)) {
      const int dx = boxes[b].coord[0] - boxes[s].coord[0];
      const int dy = boxes[b].coord[1] - boxes[s].coord[1];
      const int dz = boxes[b].coord[2] - boxes[s].coord[2];
      auto& slot = rot_v[offset_key(dx, dy, dz)];
      if (!slot) slot = h::AxisRotation::get(p, std::atan2(std::hypot(double(dx), double(dy)), double(dz)));
    }
  auto child_rotation = [&](int child) {
    return (boxes[child].coord[2] & 1) ? rot_up.get() : rot_down.get();
  };

  const auto& level_begin = tree.level_begin();
  const int depth = tree.depth();

  // upward pass
  for (int level = depth; level >= 0; --level) {
#pragma omp parallel
    {
      h::Workspace ws(p);
#pragma omp for schedule(dynamic, 4)
      for (int b = level_begin[level]; b < level_begin[level + 1]; ++b) {
        const FmmTree::Box& box = boxes[b];
        cplx* mb = M.data() + std::size_t(b) * stride;
        const Vec3 c = tree.unit_center(b);
        if (box.leaf()) {
          for (int i = box.begin; i < box.end; ++i)
            h::p2m(Vec3(pos[0][i], pos[1][i], pos[2][i]) - c, q[i], p, mb, ws);
        } else {
          for (int k = box.child_begin; k < box.child_begin + box.child_count; ++k)
            h::m2m(M.data() + std::size_t(k) * stride, tree.unit_center(k) - c, p, mb, ws,
                   child_rotation(k));
        }
      }
    }
  }

  // Far-field interactions with few ions on the near side are cheaper done pairwise.
  const int direct_limit = direct_threshold(p);
  // downward pass
  std::vector<char> has_v(nb, 0);
  for (int b = 0; b < nb; ++b) has_v[b] = !tree.v_list(b).empty();
  for (int level = 2; level <= depth; ++level) {
    const int lo = level_begin[level], hi = level_begin[level + 1];
#pragma omp parallel
    {
      h::Workspace ws(p);
#pragma omp for schedule(dynamic, 4)
      for (int b = lo; b < hi; ++b) {
        const FmmTree::Box& box = boxes[b];
        cplx* lb = L.data() + std::size_t(b) * stride;
        const Vec3 c = tree.unit_center(b);
        if (has_local[box.parent]) {
          h::l2l(L.data() + std::size_t(box.parent) * stride, c - tree.unit_center(box.parent), p,
                 lb, ws, child_rotation(b));
          has_local[b] = 1;
        }
        if (box.count() <= direct_limit) continue;
        for (int a : tree.x_list(b)) {
          const FmmTree::Box& src = boxes[a];
          for (int j = src.begin; j < src.end; ++j)
            h::p2l(Vec3(pos[0][j], pos[1][j], pos[2][j]) - c, q[j], p, lb, ws);
          has_local[b] = 1;
        }
      }
    }
    for (int b = lo; b < hi; ++b) has_local[b] |= has_v[b];
    batched_m2l(tree, level, p, M, L, rot_v);
  }
  // evaluation at leaves
  std::vector<double> phi(n, 0.0), gx(n, 0.0), gy(n, 0.0), gz(n, 0.0);
  std::vector<int> leaves;
  for (int b = 0; b < nb; ++b)
    if (boxes[b].leaf()) leaves.push_back(b);
  std::size_t zeros = 0;
#pragma omp parallel reduction(+ : zeros)
  {
    h::Workspace ws(p);
#pragma omp for schedule(dynamic, 1)
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      const int b = leaves[li];
      const FmmTree::Box& box = boxes[b];
      const Vec3 c = tree.unit_center(b);
      const cplx* lb = L.data() + std::size_t(b) * stride;
      for (int i = box.begin; i < box.end; ++i) {
        const Vec3 xi(pos[0][i], pos[1][i], pos[2][i]);
        Vec3 grad = Vec3::Zero();
        if (has_local[b]) {
          Vec3 g;
          phi[i] += h::l2p(lb, xi - c, p, &g, ws);
          grad += g;
        }
        for (int s : tree.w_list(b)) {
          if (boxes[s].count() <= direct_limit) continue;
          Vec3 g;
          phi[i] += h::m2p(M.data() + std::size_t(s) * stride, xi - tree.unit_center(s), p, &g, ws);
          grad += g;
        }
        gx[i] -= grad.x();
        gy[i] -= grad.y();
        gz[i] -= grad.z();
      }
      const std::size_t nt = std::size_t(box.count());
      auto pairwise = [&](int a) {
        const FmmTree::Box& src = boxes[a];
        const detail::SoaView view{pos[0].data() + src.begin, pos[1].data() + src.begin,
                                   pos[2].data() + src.begin, q.data() + src.begin,
                                   std::size_t(src.count())};
        zeros += detail::p2p(pos[0].data() + box.begin, pos[1].data() + box.begin,
                             pos[2].data() + box.begin, nt, view, phi.data() + box.begin,
                             gx.data() + box.begin, gy.data() + box.begin, gz.data() + box.begin);
      };
      for (int a : tree.u_list(b)) pairwise(a);
      for (int s : tree.w_list(b))
        if (boxes[s].count() <= direct_limit) pairwise(s);
      for (int a = b; a >= 0; a = boxes[a].parent) {
        if (boxes[a].count() > direct_limit) break;
        for (int s : tree.x_list(a)) pairwise(s);
      }
    }
  }
  if (zeros != n) detail::throw_singular_pair(sys.x);

  FieldResult r;
  r.phi.resize(long(n));
  r.E.resize(3, long(n));
  const double kp = constants::coulomb / tree.side();
  const double ke = kp / tree.side();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index o = order[i];
    r.phi[o] = kp * phi[i];
    r.E(0, o) = ke * gx[i];
    r.E(1, o) = ke * gy[i];
    r.E(2, o) = ke * gz[i];
  }
  return r;
}

}  // namespace penning
