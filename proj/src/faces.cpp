#include "weakconn/faces.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace weakconn {

namespace {

int floordiv(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// f is a subface of c (or equal) on the primal lattice.
bool is_subface(const FaceId& f, const FaceId& c) {
  for (int axis : f.axes)
    if (!c.is_free(axis)) return false;
  for (int i = 0; i < static_cast<int>(c.corner.size()); ++i) {
    if (f.is_free(i)) {
      if (f.corner[i] != c.corner[i]) return false;
    } else if (c.is_free(i)) {
      if (f.corner[i] != c.corner[i] && f.corner[i] != c.corner[i] + c.edge_hu) return false;
    } else {
      if (f.corner[i] != c.corner[i]) return false;
    }
  }
  return true;
}

}  // namespace

bool FaceId::is_free(int axis) const {
  return std::binary_search(axes.begin(), axes.end(), axis);
}

std::vector<int> FaceId::center2() const {
  std::vector<int> c(corner.size());
  for (std::size_t i = 0; i < corner.size(); ++i)
    c[i] = 2 * corner[i] + (is_free(static_cast<int>(i)) ? edge_hu : 0);
  return c;
}

bool FaceId::operator<(const FaceId& o) const {
  if (edge_hu != o.edge_hu) return edge_hu < o.edge_hu;
  if (axes != o.axes) return axes < o.axes;
  return corner < o.corner;
}

CubeComplex::CubeComplex(const Grid& g, int m_, std::vector<int> tau_)
    : grid(g), m(m_), tau(std::move(tau_)) {
  if (grid.n < 4 || grid.n > 8) throw std::invalid_argument("complex dimension out of range");
  if (m < 1 || m > grid.S) throw std::invalid_argument("cube edge out of range");
  r = m * grid.h;
  if (static_cast<int>(tau.size()) != grid.n)
    throw std::invalid_argument("offset dimension mismatch");
  alpha_lo.resize(grid.n);
  alpha_hi.resize(grid.n);
  for (int i = 0; i < grid.n; ++i) {
    if (tau[i] < 0 || tau[i] >= m) throw std::invalid_argument("offset outside [0, r)");
    alpha_lo[i] = (tau[i] == 0) ? 0 : -1;
    alpha_hi[i] = (grid.S - tau[i] - 1) / m;
  }
}

CubeComplex::CubeComplex(const Grid& g, double r_, const std::vector<double>& t_abs) {
  const int mm = static_cast<int>(std::lround(r_ / g.h));
  if (mm < 1 || std::abs(mm * g.h - r_) > 1e-9)
    throw std::invalid_argument("cube edge is not a whole number of cells");
  if (static_cast<int>(t_abs.size()) != g.n)
    throw std::invalid_argument("offset dimension mismatch");
  std::vector<int> tt(g.n);
  for (int i = 0; i < g.n; ++i) {
    // offsets are measured from the domain corner: cube corners sit at
    // -1 + t + r Z, so t = 0 tiles [-1,1]^n exactly when r divides 2
    const long k = std::lround(t_abs[i] / g.h);
    if (std::abs(k * g.h - t_abs[i]) > 1e-9)
      throw std::invalid_argument("offset is not on the site lattice");
    tt[i] = static_cast<int>(((k % mm) + mm) % mm);
  }
  *this = CubeComplex(g, mm, std::move(tt));
}

std::vector<double> CubeComplex::offset() const {
  std::vector<double> t(grid.n);
  for (int i = 0; i < grid.n; ++i) t[i] = tau[i] * grid.h;
  return t;
}

FaceId CubeComplex::cube(const std::vector<int>& alpha) const {
  FaceId f;
  f.edge_hu = 2;
  f.axes.resize(grid.n);
  f.corner.resize(grid.n);
  for (int i = 0; i < grid.n; ++i) {
    f.axes[i] = i;
    f.corner[i] = 2 * alpha[i];
  }
  return f;
}

double CubeComplex::face_lo(const FaceId& f, int axis) const {
  return -1.0 + grid.h * (tau[axis] + 0.5 * m * f.corner[axis]);
}

double CubeComplex::face_hi(const FaceId& f, int axis) const {
  const int e = f.is_free(axis) ? f.edge_hu : 0;
  return -1.0 + grid.h * (tau[axis] + 0.5 * m * (f.corner[axis] + e));
}

bool CubeComplex::face_meets_domain(const FaceId& f) const {
  // positions in units of h/2 so clipping tests stay integral
  for (int i = 0; i < grid.n; ++i) {
    const int lo2 = 2 * tau[i] + m * f.corner[i];
    const int hi2 = lo2 + (f.is_free(i) ? m * f.edge_hu : 0);
    if (hi2 < 0 || lo2 > 2 * grid.S) return false;
  }
  return true;
}

bool CubeComplex::face_clipped(const FaceId& f) const {
  for (int i = 0; i < grid.n; ++i) {
    const int lo2 = 2 * tau[i] + m * f.corner[i];
    const int hi2 = lo2 + (f.is_free(i) ? m * f.edge_hu : 0);
    if (lo2 < 0 || hi2 > 2 * grid.S) return true;
  }
  return false;
}

void CubeComplex::face_site_range(const FaceId& f, int axis, int& lo, int& hi) const {
  const int lo2 = 2 * tau[axis] + m * f.corner[axis];
  if (f.is_free(axis)) {
    const int hi2 = lo2 + m * f.edge_hu;
    lo = std::max(0, floordiv(lo2 + 1, 2));
    hi = std::min(grid.S, floordiv(hi2, 2));
    if (hi < lo) hi = lo;
    return;
  }
  if (lo2 % 2 != 0)
    throw std::invalid_argument("sample rows need planes on cell boundaries");
  int u = lo2 / 2 - 1;  // minus-side row; inside row on the lower boundary
  if (lo2 == 0) u = 0;
  if (u < 0 || u >= grid.S) {
    lo = hi = 0;
    return;
  }
  lo = u;
  hi = u + 1;
}

bool CubeComplex::next_cube(std::vector<int>& alpha) const {
  for (int i = grid.n - 1; i >= 0; --i) {
    if (++alpha[i] <= alpha_hi[i]) return true;
    alpha[i] = alpha_lo[i];
  }
  return false;
}

std::vector<FaceId> enumerate_faces(const CubeComplex& cx, int k) {
  const int n = cx.n();
  if (k < 0 || k > n) throw std::invalid_argument("face dimension out of range");
  std::vector<int> kmasks;
  for (int mask = 0; mask < (1 << n); ++mask)
    if (__builtin_popcount(static_cast<unsigned>(mask)) == k) kmasks.push_back(mask);

  std::set<FaceId> out;
  std::vector<int> alpha = cx.alpha_lo;
  do {
    for (int mask : kmasks) {
      std::vector<int> axes, fixed;
      for (int i = 0; i < n; ++i) (mask >> i & 1 ? axes : fixed).push_back(i);
      const int nf = static_cast<int>(fixed.size());
      for (int side = 0; side < (1 << nf); ++side) {
        FaceId f;
        f.axes = axes;
        f.edge_hu = 2;
        f.corner.resize(n);
        for (int i = 0; i < n; ++i) f.corner[i] = 2 * alpha[i];
        for (int j = 0; j < nf; ++j)
          if (side >> j & 1) f.corner[fixed[j]] += 2;
        if (cx.face_meets_domain(f)) out.insert(std::move(f));
      }
    }
  } while (cx.next_cube(alpha));
  return std::vector<FaceId>(out.begin(), out.end());
}

std::vector<FaceId> faces_of_cube(const FaceId& c) {
  std::vector<FaceId> out;
  out.reserve(2 * c.axes.size());
  for (std::size_t j = 0; j < c.axes.size(); ++j) {
    for (int side = 0; side < 2; ++side) {
      FaceId f;
      f.edge_hu = c.edge_hu;
      f.axes = c.axes;
      f.axes.erase(f.axes.begin() + static_cast<std::ptrdiff_t>(j));
      f.corner = c.corner;
      if (side) f.corner[c.axes[j]] += c.edge_hu;
      out.push_back(std::move(f));
    }
  }
  return out;
}

std::set<FaceId> close_complex(const std::vector<FaceId>& faces) {
  std::set<FaceId> out;
  std::vector<FaceId> todo(faces);
  while (!todo.empty()) {
    FaceId f = std::move(todo.back());
    todo.pop_back();
    if (!out.insert(f).second) continue;
    for (auto& g : faces_of_cube(f)) todo.push_back(std::move(g));
  }
  return out;
}

std::set<FaceId> dual_complex(const std::set<FaceId>& bad, const CubeComplex& cx) {
  const int n = cx.n();
  for (const auto& f : bad) {
    if (static_cast<int>(f.corner.size()) != n || f.edge_hu != 2)
      throw std::invalid_argument("dual_complex expects faces of the cubeulation");
    for (const auto& g : faces_of_cube(f))
      if (!bad.count(g)) throw std::invalid_argument("bad faces do not form a subcomplex");
  }
  std::set<FaceId> out;
  for (const auto& c : bad) {
    if (c.dim() < 5) continue;
    const auto cc = c.center2();
    for (const auto& f : bad) {
      if (f.dim() < 5 || !is_subface(f, c)) continue;
      const auto fc = f.center2();
      FaceId d;
      d.edge_hu = 1;
      d.corner.resize(n);
      for (int i = 0; i < n; ++i) {
        if (fc[i] != cc[i]) d.axes.push_back(i);
        d.corner[i] = std::min(fc[i], cc[i]) / 2;
      }
      out.insert(std::move(d));
    }
  }
  return out;
}

std::int64_t SliceSites::rank4(const std::array<int, 4>& idx4) const {
  std::int64_t v = 0;
  for (int a = 0; a < 4; ++a) v = v * S + idx4[a];
  return v;
}

std::array<int, 4> SliceSites::unrank4(std::int64_t rank) const {
  std::array<int, 4> out{};
  for (int a = 3; a >= 0; --a) {
    out[a] = static_cast<int>(rank % S);
    rank /= S;
  }
  return out;
}

SliceSites slice_sites(const CubeComplex& cx, const SlicePlane& p) {
  const int n = cx.n();
  if (static_cast<int>(p.I.size()) != n - 4 || p.T.size() != p.I.size())
    throw std::invalid_argument("slice needs n-4 fixed axes with matching levels");
  std::vector<bool> fixed(n, false);
  for (int axis : p.I) {
    if (axis < 0 || axis >= n || fixed[axis])
      throw std::invalid_argument("invalid fixed-axis set");
    fixed[axis] = true;
  }

  SliceSites out;
  out.S = cx.grid.S;
  int fa = 0;
  for (int i = 0; i < n; ++i)
    if (!fixed[i]) out.free_axes[fa++] = i;

  std::vector<int> idx(n, 0);
  out.fixed_rows.resize(p.I.size());
  for (std::size_t j = 0; j < p.I.size(); ++j) {
    if (p.T[j] < -1.0 - 1e-12 || p.T[j] > 1.0 + 1e-12)
      throw std::invalid_argument("slice level outside the domain");
    out.fixed_rows[j] = cx.grid.row_of(p.T[j]);
    idx[p.I[j]] = out.fixed_rows[j];
  }

  std::int64_t count = 1;
  for (int a = 0; a < 4; ++a) count *= out.S;
  out.sites.reserve(count);
  std::array<int, 4> loc{0, 0, 0, 0};
  while (true) {
    for (int a = 0; a < 4; ++a) idx[out.free_axes[a]] = loc[a];
    out.sites.push_back(cx.grid.index(idx));
    int a = 3;
    for (; a >= 0; --a) {
      if (++loc[a] < out.S) break;
      loc[a] = 0;
    }
    if (a < 0) break;
  }
  return out;
}

}  // namespace weakconn
