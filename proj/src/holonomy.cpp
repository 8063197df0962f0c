#include "weakconn/holonomy.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace weakconn {

namespace {

std::vector<std::int64_t> site_strides(const Grid& g) {
  std::vector<std::int64_t> st(g.n, 1);
  for (int i = g.n - 2; i >= 0; --i) st[i] = st[i + 1] * g.S;
  return st;
}

// Factor of one edge step from `from` along `axis` in direction `dir`; the
// field is sampled at the edge's lower endpoint so opposite traversals are
// exact inverses.
Group edge_factor(const LatticeForm& A, std::int64_t from, std::int64_t to, int axis,
                  int dir) {
  const std::int64_t lower = dir > 0 ? from : to;
  return exp_alg(A.at(lower, axis) * (dir * A.grid.h));
}

Group plaquette_product(const LatticeForm& A, std::int64_t s, int i, int j,
                        const std::vector<std::int64_t>& st) {
  const double h = A.grid.h;
  Group p = exp_alg(A.at(s, i) * h);
  p = p * exp_alg(A.at(s + st[i], j) * h);
  p = p * exp_alg(A.at(s + st[j], i) * -h);
  p = p * exp_alg(A.at(s, j) * -h);
  return p;
}

}  // namespace

LatticePath rect_loop(const Grid& g, std::int64_t corner, int i, int j, int ki, int kj) {
  if (i < 0 || i >= g.n || j < 0 || j >= g.n || i == j)
    throw std::invalid_argument("loop axes out of range");
  if (ki < 1 || kj < 1) throw std::invalid_argument("loop sides must be positive");
  if (corner < 0 || corner >= g.sites()) throw std::invalid_argument("corner out of range");
  std::vector<int> idx(g.n);
  g.unpack(corner, idx);
  if (idx[i] + ki > g.S - 1 || idx[j] + kj > g.S - 1)
    throw std::invalid_argument("loop leaves the domain");

  const auto st = site_strides(g);
  LatticePath path;
  path.sites.reserve(2 * (ki + kj) + 1);
  std::int64_t s = corner;
  path.sites.push_back(s);
  for (int t = 0; t < ki; ++t) path.sites.push_back(s += st[i]);
  for (int t = 0; t < kj; ++t) path.sites.push_back(s += st[j]);
  for (int t = 0; t < ki; ++t) path.sites.push_back(s -= st[i]);
  for (int t = 0; t < kj; ++t) path.sites.push_back(s -= st[j]);
  return path;
}

Group path_ordered_exp(const LatticeForm& A, const LatticePath& path) {
  if (A.degree != 1) throw std::invalid_argument("path product needs a 1-form");
  const Grid& g = A.grid;
  const auto st = site_strides(g);
  if (path.sites.empty()) return Group::identity();

  std::vector<int> cur(g.n), nxt(g.n);
  if (path.sites.front() < 0 || path.sites.front() >= g.sites())
    throw std::invalid_argument("path site out of range");
  g.unpack(path.sites.front(), cur);

  Group p = Group::identity();
  int since_renorm = 0;
  for (std::size_t t = 0; t + 1 < path.sites.size(); ++t) {
    const std::int64_t a = path.sites[t], b = path.sites[t + 1];
    if (b < 0 || b >= g.sites()) throw std::invalid_argument("path site out of range");
    g.unpack(b, nxt);
    int axis = -1, dir = 0;
    for (int k = 0; k < g.n; ++k) {
      if (cur[k] == nxt[k]) continue;
      if (axis != -1 || std::abs(cur[k] - nxt[k]) != 1)
        throw std::invalid_argument("path steps must join adjacent sites");
      axis = k;
      dir = nxt[k] - cur[k];
    }
    if (axis == -1) throw std::invalid_argument("path steps must join adjacent sites");
    p = p * edge_factor(A, a, b, axis, dir);
    if (++since_renorm == 64) {
      p = normalized(p);
      since_renorm = 0;
    }
    std::swap(cur, nxt);
  }
  return normalized(p);
}

Alg loop_curvature(const LatticeForm& A, std::int64_t p, int i, int j, double eps) {
  if (A.degree != 1) throw std::invalid_argument("loop curvature needs a 1-form");
  const double h = A.grid.h;
  const int k = static_cast<int>(std::lround(eps / h));
  if (k < 1 || std::abs(k * h - eps) > 1e-9 * h)
    throw std::invalid_argument("loop side is not a multiple of the spacing");
  const LatticePath loop = rect_loop(A.grid, p, i, j, k, k);
  return log_alg(path_ordered_exp(A, loop)) * (1.0 / (eps * eps));
}

ReconstructResult reconstruct_gauge(const LatticeForm& A, const LatticeForm& B,
                                    std::int64_t basepoint) {
  if (A.degree != 1 || B.degree != 1)
    throw std::invalid_argument("reconstruction needs 1-forms");
  if (A.grid.n != B.grid.n || A.grid.S != B.grid.S)
    throw std::invalid_argument("reconstruction needs matching grids");
  const Grid& g = A.grid;
  if (basepoint < 0 || basepoint >= g.sites())
    throw std::invalid_argument("basepoint out of range");
  const int n = g.n;
  const int S = g.S;
  const auto st = site_strides(g);

  std::vector<int> base(n);
  g.unpack(basepoint, base);

  // Transport both fields along the staircase tree rooted at the basepoint:
  // axis 0 leg first, each site reached exactly once.
  std::vector<Group> pa(g.sites()), pb(g.sites());
  std::vector<std::uint8_t> seen(g.sites(), 0);
  pa[basepoint] = Group::identity();
  pb[basepoint] = Group::identity();
  seen[basepoint] = 1;

  std::deque<std::int64_t> queue{basepoint};
  std::vector<int> idx(n);
  while (!queue.empty()) {
    const std::int64_t x = queue.front();
    queue.pop_front();
    g.unpack(x, idx);
    int last = -1;
    for (int k = n - 1; k >= 0; --k)
      if (idx[k] != base[k]) {
        last = k;
        break;
      }
    for (int k = std::max(last, 0); k < n; ++k) {
      for (int dir : {1, -1}) {
        if (k == last) {
          // keep moving away from the base along the active axis
          if ((idx[k] > base[k] && dir < 0) || (idx[k] < base[k] && dir > 0)) continue;
        }
        const int row = idx[k] + dir;
        if (row < 0 || row >= S) continue;
        const std::int64_t y = x + dir * st[k];
        if (seen[y]) continue;
        seen[y] = 1;
        pa[y] = normalized(pa[x] * edge_factor(A, x, y, k, dir));
        pb[y] = normalized(pb[x] * edge_factor(B, x, y, k, dir));
        queue.push_back(y);
      }
    }
  }

  ReconstructResult res;
  res.gauge.grid = g;
  res.gauge.g.resize(g.sites());
  for (std::int64_t s = 0; s < g.sites(); ++s)
    res.gauge.g[s] = normalized(inverse(pa[s]) * pb[s]);

  double defect = 0.0;
  std::vector<int> it(n, 0);
  std::int64_t site = 0;
  do {
    for (int i = 0; i < n; ++i) {
      if (it[i] + 1 >= S) continue;
      for (int j = i + 1; j < n; ++j) {
        if (it[j] + 1 >= S) continue;
        const Group ua = plaquette_product(A, site, i, j, st);
        const Group ub = plaquette_product(B, site, i, j, st);
        const double d = std::sqrt((ua.w - ub.w) * (ua.w - ub.w) +
                                   (ua.x - ub.x) * (ua.x - ub.x) +
                                   (ua.y - ub.y) * (ua.y - ub.y) +
                                   (ua.z - ub.z) * (ua.z - ub.z));
        defect = std::max(defect, d);
      }
    }
    ++site;
  } while (g.next(it));
  res.report.defect = defect;
  return res;
}

}  // namespace weakconn
