#include "weakconn/approx.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace weakconn {
namespace {

std::int64_t binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::int64_t r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

// Coordinate -> cell-boundary position in h units; exact for lattice points.
int cells_of(const Grid& g, double x) {
  return static_cast<int>(std::llround((x + 1.0) / g.h));
}

std::vector<std::int64_t> grid_strides(const Grid& g) {
  std::vector<std::int64_t> str(g.n);
  std::int64_t s = 1;
  for (int i = g.n - 1; i >= 0; --i) {
    str[i] = s;
    s *= g.S;
  }
  return str;
}

// Iterates fn(site) over the box [lo, hi) of site indices, last axis fastest.
template <class Fn>
void for_box(const Grid& g, const std::vector<int>& lo, const std::vector<int>& hi,
             Fn&& fn) {
  for (int i = 0; i < g.n; ++i)
    if (lo[i] >= hi[i]) return;
  const std::vector<std::int64_t> str = grid_strides(g);
  std::vector<int> idx(lo);
  std::int64_t site = g.index(idx);
  for (;;) {
    fn(site);
    int ax = g.n - 1;
    for (; ax >= 0; --ax) {
      ++idx[ax];
      site += str[ax];
      if (idx[ax] < hi[ax]) break;
      site -= str[ax] * (idx[ax] - lo[ax]);
      idx[ax] = lo[ax];
    }
    if (ax < 0) return;
  }
}

bool touches_lower_boundary(const CubeComplex& cx, const FaceId& f) {
  for (int i = 0; i < cx.n(); ++i)
    if (!f.is_free(i) && cells_of(cx.grid, cx.face_lo(f, i)) == 0) return true;
  return false;
}

// In-domain site ranges of a face on every axis; false when empty.
bool face_ranges(const CubeComplex& cx, const FaceId& f, std::vector<int>& lo,
                 std::vector<int>& hi) {
  lo.assign(cx.n(), 0);
  hi.assign(cx.n(), 0);
  for (int i = 0; i < cx.n(); ++i) {
    cx.face_site_range(f, i, lo[i], hi[i]);
    if (lo[i] >= hi[i]) return false;
  }
  return true;
}

// Component indices of w whose index tuples stay within the face's free axes.
std::vector<int> tangential_comps(const LatticeForm& w, const FaceId& f) {
  std::vector<int> keep;
  const auto& combs = combinations(w.grid.n, w.degree);
  for (int c = 0; c < static_cast<int>(combs.size()); ++c) {
    bool in = true;
    for (int ax : combs[c])
      if (!f.is_free(ax)) {
        in = false;
        break;
      }
    if (in) keep.push_back(c);
  }
  return keep;
}

std::uint64_t splitmix(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Midpoint quadrature of |w|^2 over the domain, any degree.
double l2sq(const LatticeForm& w) {
  double s = 0.0;
  for (const Alg& v : w.data) s += norm2(v);
  return s * std::pow(w.grid.h, w.grid.n);
}

int checked_m(const Grid& g, double r, const char* who) {
  const int m = static_cast<int>(std::llround(r / g.h));
  if (!(r > 0.0) || std::abs(m * g.h - r) > 1e-9 * std::max(1.0, r) || m < 2 ||
      m % 2 != 0 || m > g.S) {
    std::ostringstream os;
    os << who << ": r must be an even multiple of h no larger than the domain, got r="
       << r << " with h=" << g.h;
    throw std::invalid_argument(os.str());
  }
  return m;
}

}  // namespace

double chebyshev_c1(int n, double delta) {
  if (n < 5) throw std::invalid_argument("chebyshev_c1: dimension must be at least 5");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("chebyshev_c1: delta must lie in (0,1)");
  double s = 0.0;
  for (int k = 4; k < n; ++k) s += std::ldexp(static_cast<double>(binom(n, k)), n - k);
  return 2.0 / (1.0 - delta) * s;
}

double good_cube_constant(int n) {
  if (n < 4) throw std::invalid_argument("good_cube_constant: dimension must be at least 4");
  return std::ldexp(static_cast<double>(binom(n, 4)), n - 4);
}

double face_energy(const LatticeForm& w, const CubeComplex& cx, const FaceId& f) {
  const std::vector<int> keep = tangential_comps(w, f);
  if (keep.empty()) return 0.0;
  std::vector<int> lo, hi;
  if (!face_ranges(cx, f, lo, hi)) return 0.0;
  double s = 0.0;
  for_box(cx.grid, lo, hi, [&](std::int64_t site) {
    for (int c : keep) s += norm2(w.at(site, c));
  });
  return s * std::pow(cx.grid.h, f.dim());
}

double skeleton_family_energy(const LatticeForm& w, const CubeComplex& cx,
                              const std::vector<int>& I) {
  const int n = cx.n();
  std::vector<char> fixed(n, 0);
  for (int a : I) {
    if (a < 0 || a >= n || fixed[a])
      throw std::invalid_argument("skeleton_family_energy: I must list distinct axes");
    fixed[a] = 1;
  }
  std::vector<int> free;
  for (int a = 0; a < n; ++a)
    if (!fixed[a]) free.push_back(a);
  double s = 0.0;
  for (const FaceId& f : enumerate_faces(cx, static_cast<int>(free.size())))
    if (f.axes == free && !touches_lower_boundary(cx, f)) s += face_energy(w, cx, f);
  return s;
}

double skeleton_energy(const LatticeForm& w, const CubeComplex& cx, int k) {
  double s = 0.0;
  for (const FaceId& f : enumerate_faces(cx, k)) {
    if (touches_lower_boundary(cx, f)) continue;
    // One count per containing cube: a product over the fixed axes of the
    // number of range-valid cubes adjacent to the face's plane.
    double mult = 1.0;
    for (int i = 0; i < cx.n() && mult > 0.0; ++i) {
      if (f.is_free(i)) continue;
      const int p = cells_of(cx.grid, cx.face_lo(f, i));
      const int beta = (p - cx.tau[i]) / cx.m;
      int c = 0;
      if (beta - 1 >= cx.alpha_lo[i] && beta - 1 <= cx.alpha_hi[i]) ++c;
      if (beta >= cx.alpha_lo[i] && beta <= cx.alpha_hi[i]) ++c;
      mult *= c;
    }
    if (mult > 0.0) s += mult * face_energy(w, cx, f);
  }
  return s;
}

OffsetSelection select_offset(const LatticeForm& A, const LatticeForm& F, double r,
                              double delta, int candidates) {
  const Grid& g = A.grid;
  const int n = g.n;
  if (A.degree != 1 || F.degree != 2)
    throw std::invalid_argument("select_offset: needs a 1-form and a 2-form");
  if (F.grid.n != n || F.grid.S != g.S)
    throw std::invalid_argument("select_offset: forms live on different grids");
  if (n < 5) throw std::invalid_argument("select_offset: dimension must be at least 5");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("select_offset: delta must lie in (0,1)");
  const int m = checked_m(g, r, "select_offset");

  const double c1 = chebyshev_c1(n, delta);
  const double tot[2] = {l2sq(A), l2sq(F)};

  // Row-marginal tables: one per (form, fixed-axis set I). G[rank of the rows
  // at the axes of I] accumulates |w|^2 over the components disjoint from I,
  // so a family sum at any offset is a plane sum over the table.
  struct Family {
    std::vector<int> I;
    int k = 0;
  };
  std::vector<Family> fams;
  for (int k = n - 1; k >= 4; --k)
    for (const auto& I : combinations(n, n - k)) fams.push_back({I, k});

  const LatticeForm* forms[2] = {&A, &F};
  std::vector<std::vector<std::vector<double>>> G(2);
  for (int wf = 0; wf < 2; ++wf) {
    const LatticeForm& w = *forms[wf];
    const auto& combs = combinations(n, w.degree);
    G[wf].resize(fams.size());
    std::vector<std::vector<int>> fam_comps(fams.size());
    for (std::size_t fi = 0; fi < fams.size(); ++fi) {
      std::int64_t len = 1;
      for (std::size_t j = 0; j < fams[fi].I.size(); ++j) len *= g.S;
      G[wf][fi].assign(len, 0.0);
      for (int c = 0; c < static_cast<int>(combs.size()); ++c) {
        bool disjoint = true;
        for (int ax : combs[c])
          if (std::find(fams[fi].I.begin(), fams[fi].I.end(), ax) != fams[fi].I.end()) {
            disjoint = false;
            break;
          }
        if (disjoint) fam_comps[fi].push_back(c);
      }
    }
    std::vector<int> idx(n, 0);
    std::vector<double> cn(w.comps());
    std::int64_t site = 0;
    do {
      for (int c = 0; c < w.comps(); ++c) cn[c] = norm2(w.at(site, c));
      for (std::size_t fi = 0; fi < fams.size(); ++fi) {
        if (fam_comps[fi].empty()) continue;
        std::int64_t rank = 0;
        for (int a : fams[fi].I) rank = rank * g.S + idx[a];
        double v = 0.0;
        for (int c : fam_comps[fi]) v += cn[c];
        G[wf][fi][rank] += v;
      }
      ++site;
    } while (g.next(idx));
  }

  // Candidate offsets.
  std::set<std::vector<int>> cset;
  auto sample_ranks = [&](const std::vector<int>& vals, std::int64_t total,
                          std::int64_t want) {
    std::uint64_t seed = 0x5eedULL;
    std::int64_t guard = 0;
    while (static_cast<std::int64_t>(cset.size()) < want && ++guard < 200000) {
      std::int64_t rank = static_cast<std::int64_t>(splitmix(seed) % total);
      std::vector<int> t(n);
      for (int i = n - 1; i >= 0; --i) {
        t[i] = vals[rank % vals.size()];
        rank /= static_cast<std::int64_t>(vals.size());
      }
      cset.insert(std::move(t));
    }
  };
  auto full_product = [&](const std::vector<int>& vals) {
    std::vector<int> pos(n, 0);
    for (;;) {
      std::vector<int> t(n);
      for (int i = 0; i < n; ++i) t[i] = vals[pos[i]];
      cset.insert(std::move(t));
      int ax = n - 1;
      for (; ax >= 0; --ax) {
        if (++pos[ax] < static_cast<int>(vals.size())) break;
        pos[ax] = 0;
      }
      if (ax < 0) break;
    }
  };
  if (candidates <= 0) {
    std::vector<int> vals = {0, m / 3, (2 * m) / 3};
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    double total = std::pow(static_cast<double>(vals.size()), n);
    if (total <= 729.0)
      full_product(vals);
    else
      sample_ranks(vals, static_cast<std::int64_t>(total), 729);
  } else {
    std::vector<int> vals(m);
    for (int v = 0; v < m; ++v) vals[v] = v;
    double total = std::pow(static_cast<double>(m), n);
    if (total <= static_cast<double>(candidates))
      full_product(vals);
    else
      sample_ranks(vals, static_cast<std::int64_t>(total), candidates);
  }

  // Evaluate one candidate: plane sums over the tables with the per-plane
  // adjacent-cube count, lower domain-boundary planes excluded.
  auto evaluate = [&](const std::vector<int>& tau,
                      std::map<int, std::array<double, 2>>* table) {
    std::vector<std::vector<std::pair<int, double>>> planes(n);
    for (int a = 0; a < n; ++a) {
      const int alo = (tau[a] == 0) ? 0 : -1;
      const int ahi = (g.S - tau[a] - 1) / m;
      for (int beta = (tau[a] == 0) ? 1 : 0;; ++beta) {
        const int p = tau[a] + m * beta;
        if (p > g.S) break;
        if (p < 1) continue;
        int c = 0;
        if (beta - 1 >= alo && beta - 1 <= ahi) ++c;
        if (beta >= alo && beta <= ahi) ++c;
        if (c > 0) planes[a].emplace_back(p - 1, static_cast<double>(c));
      }
    }
    std::map<int, std::array<double, 2>> tab;
    for (int k = 4; k < n; ++k) tab[k] = {0.0, 0.0};
    for (std::size_t fi = 0; fi < fams.size(); ++fi) {
      const auto& I = fams[fi].I;
      const int d = static_cast<int>(I.size());
      for (int wf = 0; wf < 2; ++wf) {
        const auto& tb = G[wf][fi];
        double acc = 0.0;
        std::vector<std::size_t> pos(d, 0);
        bool empty = false;
        for (int j = 0; j < d; ++j)
          if (planes[I[j]].empty()) empty = true;
        if (empty) continue;
        for (;;) {
          double f = 1.0;
          std::int64_t rank = 0;
          for (int j = 0; j < d; ++j) {
            const auto& pr = planes[I[j]][pos[j]];
            f *= pr.second;
            rank = rank * g.S + pr.first;
          }
          acc += f * tb[rank];
          int ax = d - 1;
          for (; ax >= 0; --ax) {
            if (++pos[ax] < planes[I[ax]].size()) break;
            pos[ax] = 0;
          }
          if (ax < 0) break;
        }
        tab[fams[fi].k][wf] += acc * std::pow(g.h, fams[fi].k);
      }
    }
    double worst = 0.0;
    for (const auto& kv : tab) {
      const double rk = std::pow(r, n - kv.first);
      for (int wf = 0; wf < 2; ++wf)
        if (tot[wf] > 0.0)
          worst = std::max(worst, rk * kv.second[wf] / (c1 * tot[wf]));
    }
    if (table) *table = tab;
    return worst;
  };

  OffsetSelection out;
  out.c1 = c1;
  out.candidates_evaluated = static_cast<int>(cset.size());
  double best = std::numeric_limits<double>::infinity();
  const std::vector<int>* best_tau = nullptr;
  for (const auto& tau : cset) {
    const double worst = evaluate(tau, nullptr);
    if (worst <= 1.0 + 1e-12) ++out.candidates_passed;
    if (worst < best) {
      best = worst;
      best_tau = &tau;
    }
  }
  out.tau = *best_tau;
  out.worst_ratio = evaluate(out.tau, &out.energy);
  out.passed = out.worst_ratio <= 1.0 + 1e-12;
  out.t.resize(n);
  for (int i = 0; i < n; ++i) out.t[i] = out.tau[i] * g.h;
  if (!out.passed)
    std::cerr << "select_offset: no sampled offset met the bound; best ratio "
              << out.worst_ratio << "\n";
  return out;
}

namespace {

// Tangential sums of A and F over one face's in-domain samples.
struct FaceSums {
  std::int64_t count = 0;
  std::vector<int> fcomb, acomb;  // global component ranks on the face
  std::vector<Alg> sF, sA;
  double sF2 = 0.0, sA2 = 0.0;
};

FaceSums face_sums(const LatticeForm& A, const LatticeForm& F, const CubeComplex& cx,
                   const FaceId& f) {
  FaceSums s;
  s.fcomb = tangential_comps(F, f);
  s.acomb = tangential_comps(A, f);
  s.sF.assign(s.fcomb.size(), Alg{});
  s.sA.assign(s.acomb.size(), Alg{});
  std::vector<int> lo, hi;
  if (!face_ranges(cx, f, lo, hi)) return s;
  for_box(cx.grid, lo, hi, [&](std::int64_t site) {
    ++s.count;
    for (std::size_t c = 0; c < s.fcomb.size(); ++c) {
      const Alg& v = F.at(site, s.fcomb[c]);
      s.sF[c] += v;
      s.sF2 += norm2(v);
    }
    for (std::size_t c = 0; c < s.acomb.size(); ++c) {
      const Alg& v = A.at(site, s.acomb[c]);
      s.sA[c] += v;
      s.sA2 += norm2(v);
    }
  });
  return s;
}

}  // namespace

FaceClassification classify_faces(const LatticeForm& A, const LatticeForm& F,
                                  const CubeComplex& cx, double delta) {
  const Grid& g = cx.grid;
  const int n = g.n;
  if (A.degree != 1 || F.degree != 2)
    throw std::invalid_argument("classify_faces: needs a 1-form and a 2-form");
  if (A.grid.n != n || A.grid.S != g.S || F.grid.n != n || F.grid.S != g.S)
    throw std::invalid_argument("classify_faces: forms live off the complex grid");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("classify_faces: delta must lie in (0,1)");

  FaceClassification out;
  out.r = cx.r;
  out.delta = delta;
  const double r = cx.r;
  out.thresholds = {delta / (r * r), delta / r, delta, delta, delta * r * r};
  const double h4 = std::pow(g.h, 4);

  std::map<FaceId, FaceSums> cache;
  auto sums_of = [&](const FaceId& f) -> const FaceSums& {
    auto it = cache.find(f);
    if (it == cache.end()) it = cache.emplace(f, face_sums(A, F, cx, f)).first;
    return it->second;
  };

  const auto& combs4 = combinations(n, 4);
  std::vector<FaceId> bad;
  std::vector<int> alpha(cx.alpha_lo), lo(n), hi(n);
  std::vector<Alg> meanF(binom(n, 2)), meanA(n);
  for (;;) {
    const FaceId cu = cx.cube(alpha);
    for (int i = 0; i < n; ++i) {
      const int a0 = cx.tau[i] + cx.m * alpha[i];
      lo[i] = std::max(0, a0);
      hi[i] = std::min(g.S, a0 + cx.m);
    }
    std::fill(meanF.begin(), meanF.end(), Alg{});
    std::fill(meanA.begin(), meanA.end(), Alg{});
    std::int64_t cnt = 0;
    for_box(g, lo, hi, [&](std::int64_t site) {
      ++cnt;
      for (int c = 0; c < F.comps(); ++c) meanF[c] += F.at(site, c);
      for (int c = 0; c < A.comps(); ++c) meanA[c] += A.at(site, c);
    });
    bool goodc = true;
    if (cnt > 0) {
      for (auto& v : meanF) v *= 1.0 / cnt;
      for (auto& v : meanA) v *= 1.0 / cnt;
      for (const auto& c4 : combs4) {
        std::vector<int> fixed;
        {
          std::size_t p = 0;
          for (int i = 0; i < n; ++i) {
            if (p < c4.size() && c4[p] == i)
              ++p;
            else
              fixed.push_back(i);
          }
        }
        for (int mask = 0; mask < (1 << (n - 4)); ++mask) {
          FaceId f;
          f.axes = c4;
          f.edge_hu = 2;
          f.corner.assign(n, 0);
          for (int ax : c4) f.corner[ax] = 2 * alpha[ax];
          for (std::size_t j = 0; j < fixed.size(); ++j)
            f.corner[fixed[j]] = 2 * alpha[fixed[j]] + (((mask >> j) & 1) ? 2 : 0);
          if (!cx.face_meets_domain(f)) continue;
          const FaceSums& s = sums_of(f);
          if (s.count == 0) continue;
          std::array<double, 5> st{};
          double mF2 = 0.0, mA2 = 0.0, devF = s.sF2, devA = s.sA2;
          for (std::size_t c = 0; c < s.fcomb.size(); ++c) {
            mF2 += norm2(s.sF[c] * (1.0 / s.count));
            const Alg& mc = meanF[s.fcomb[c]];
            devF += s.count * norm2(mc) - 2.0 * inner(s.sF[c], mc);
          }
          for (std::size_t c = 0; c < s.acomb.size(); ++c) {
            mA2 += norm2(s.sA[c] * (1.0 / s.count));
            const Alg& mc = meanA[s.acomb[c]];
            devA += s.count * norm2(mc) - 2.0 * inner(s.sA[c], mc);
          }
          st[0] = std::sqrt(mF2);
          st[1] = std::sqrt(mA2);
          st[2] = h4 * s.sF2;
          st[3] = h4 * std::max(0.0, devF);
          st[4] = h4 * std::max(0.0, devA);
          auto& rec = out.face_stats[f];
          for (int i = 0; i < 5; ++i) rec[i] = std::max(rec[i], st[i]);
          for (int i = 0; i < 5; ++i)
            if (st[i] > out.thresholds[i]) goodc = false;
        }
      }
    }
    out.cube_good[cu] = goodc;
    ++out.n_cubes;
    if (!goodc) {
      bad.push_back(cu);
      ++out.n_bad;
    }
    if (!cx.next_cube(alpha)) break;
  }
  out.bad_faces = close_complex(bad);
  const double eA = l2sq(A), eF = l2sq(F);
  out.bound_rhs = eF / (delta * std::pow(r, n - 4)) +
                  eA / (delta * delta * std::pow(r, n - 2)) +
                  1.0 / (delta * std::pow(r, n - 4));
  out.bound_constant = static_cast<double>(out.n_bad) / out.bound_rhs;
  return out;
}

bool face_is_good(const FaceClassification& cls, const FaceId& f) {
  return cls.bad_faces.find(f) == cls.bad_faces.end();
}

namespace {

// Local sample lattice of one extension problem: per-axis row counts, site
// strides (last axis fastest) and sample positions in face units. Rows 0 and
// dims-1 along every axis are the boundary carrier layers.
struct LocalLattice {
  int q = 0;
  std::vector<int> dims;
  std::vector<std::int64_t> str;
  std::int64_t nsites = 1;
  double dx = 0.0;
  std::vector<std::vector<double>> pos;

  void finalize() {
    str.assign(q, 1);
    nsites = 1;
    for (int a = q - 1; a >= 0; --a) {
      str[a] = nsites;
      nsites *= dims[a];
    }
  }
  int row(std::int64_t s, int a) const {
    return static_cast<int>((s / str[a]) % dims[a]);
  }
};

// A value is a Dirichlet sample exactly when its site lies on a carrier layer
// of some axis other than the component's own; multi-layer sites pin all
// components, single-layer sites leave only the layer-normal one free.
std::vector<std::uint8_t> fixed_mask(const LocalLattice& L) {
  std::vector<std::uint8_t> fx(L.nsites * L.q, 0);
  for (std::int64_t s = 0; s < L.nsites; ++s) {
    int nl = 0, only = -1;
    for (int a = 0; a < L.q; ++a) {
      const int r = L.row(s, a);
      if (r == 0 || r == L.dims[a] - 1) {
        ++nl;
        only = a;
      }
    }
    if (nl == 0) continue;
    for (int j = 0; j < L.q; ++j)
      fx[s * L.q + j] = static_cast<std::uint8_t>(nl >= 2 || j != only);
  }
  return fx;
}

// y[.,yc] += sign * one-axis forward difference (backward at the top row) of
// x[.,xc]; the scheme matches the global exterior derivative.
void add_D(const LocalLattice& L, const std::vector<Alg>& x, int xc, int xnc,
           std::vector<Alg>& y, int yc, int ync, int a, double sign) {
  const double f = sign / L.dx;
  const std::int64_t st = L.str[a] * xnc;
  for (std::int64_t s = 0; s < L.nsites; ++s) {
    const std::int64_t e = s * xnc + xc;
    const Alg d = (L.row(s, a) < L.dims[a] - 1) ? (x[e + st] - x[e]) : (x[e] - x[e - st]);
    y[s * ync + yc] += d * f;
  }
}

// y[.,yc] += sign * exact transpose of the same scheme applied to x[.,xc].
void add_DT(const LocalLattice& L, const std::vector<Alg>& x, int xc, int xnc,
            std::vector<Alg>& y, int yc, int ync, int a, double sign) {
  const double f = sign / L.dx;
  const std::int64_t st = L.str[a] * ync;
  for (std::int64_t s = 0; s < L.nsites; ++s) {
    const Alg v = x[s * xnc + xc] * f;
    const std::int64_t e = s * ync + yc;
    if (L.row(s, a) < L.dims[a] - 1) {
      y[e + st] += v;
      y[e] -= v;
    } else {
      y[e] += v;
      y[e - st] -= v;
    }
  }
}

struct HodgeWork {
  std::vector<Alg> G, s0;
};

// out = (dT d + d dT) C on 1-form data, componentwise over the algebra.
void apply_hodge(const LocalLattice& L, const std::vector<std::vector<int>>& pairs,
                 const std::vector<Alg>& C, std::vector<Alg>& out, HodgeWork& w) {
  const int q = L.q;
  const int nc2 = static_cast<int>(pairs.size());
  w.G.assign(L.nsites * nc2, Alg{});
  for (int p = 0; p < nc2; ++p) {
    const int a = pairs[p][0], b = pairs[p][1];
    add_D(L, C, b, q, w.G, p, nc2, a, 1.0);
    add_D(L, C, a, q, w.G, p, nc2, b, -1.0);
  }
  out.assign(L.nsites * q, Alg{});
  for (int p = 0; p < nc2; ++p) {
    const int a = pairs[p][0], b = pairs[p][1];
    add_DT(L, w.G, p, nc2, out, b, q, a, 1.0);
    add_DT(L, w.G, p, nc2, out, a, q, b, -1.0);
  }
  w.s0.assign(L.nsites, Alg{});
  for (int j = 0; j < q; ++j) add_DT(L, C, j, q, w.s0, 0, 1, j, 1.0);
  for (int j = 0; j < q; ++j) add_D(L, w.s0, 0, 1, out, j, q, j, 1.0);
}

double dot(const std::vector<Alg>& a, const std::vector<Alg>& b) {
  double s = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) s += inner(a[e], b[e]);
  return s;
}

// Replaces the free components of loc with the minimizer of
// |d(C-B)|^2 + |dT(C-B)|^2, B the affine background with dB = Fbar; fixed
// components are kept bit-exact.
void solve_harmonic(const LocalLattice& L, const std::vector<std::uint8_t>& fixed,
                    const std::vector<Alg>& Fbar, const std::vector<Alg>& Abar,
                    std::vector<Alg>& loc) {
  const int q = L.q;
  const auto& pairs = combinations(q, 2);
  const std::int64_t N = L.nsites * q;

  std::vector<Alg> B(N);
  {
    std::vector<int> ell(q, 0);
    for (std::int64_t s = 0; s < L.nsites; ++s) {
      for (int j = 0; j < q; ++j) {
        Alg v = Abar[j];
        for (int i = 0; i < q; ++i) {
          if (i == j) continue;
          const double xi = 0.5 * L.pos[i][ell[i]];
          if (i < j)
            v += Fbar[comb_rank(q, {i, j})] * xi;
          else
            v -= Fbar[comb_rank(q, {j, i})] * xi;
        }
        B[s * q + j] = v;
      }
      for (int ax = q - 1; ax >= 0; --ax) {
        if (++ell[ax] < L.dims[ax]) break;
        ell[ax] = 0;
      }
    }
  }

  std::vector<Alg> D(N, Alg{});
  for (std::int64_t e = 0; e < N; ++e)
    if (fixed[e]) D[e] = loc[e] - B[e];

  HodgeWork work;
  std::vector<Alg> rhs, x(N, Alg{}), Ap;
  apply_hodge(L, pairs, D, rhs, work);
  for (std::int64_t e = 0; e < N; ++e) rhs[e] = fixed[e] ? Alg{} : -rhs[e];
  const double rn0 = dot(rhs, rhs);
  if (rn0 > 0.0) {
    std::vector<Alg> rr(rhs), p(rhs);
    double rn = rn0;
    const double tol2 = 1e-16 * rn0;
    const int maxit = 20000;
    int it = 0;
    for (; it < maxit && rn > tol2; ++it) {
      apply_hodge(L, pairs, p, Ap, work);
      for (std::int64_t e = 0; e < N; ++e)
        if (fixed[e]) Ap[e] = Alg{};
      const double pAp = dot(p, Ap);
      if (!(pAp > 0.0))
        throw std::runtime_error("harmonic_extend: operator lost positivity");
      const double al = rn / pAp;
      for (std::int64_t e = 0; e < N; ++e) {
        x[e] += p[e] * al;
        rr[e] -= Ap[e] * al;
      }
      const double rn1 = dot(rr, rr);
      const double be = rn1 / rn;
      for (std::int64_t e = 0; e < N; ++e) p[e] = rr[e] + p[e] * be;
      rn = rn1;
    }
    if (rn > tol2) {
      std::ostringstream os;
      os << "harmonic_extend: solve stalled at relative residual "
         << std::sqrt(rn / rn0) << " after " << it << " iterations";
      throw std::runtime_error(os.str());
    }
  }
  for (std::int64_t e = 0; e < N; ++e)
    if (!fixed[e]) loc[e] = B[e] + x[e];
}

// Replaces the free components of loc with the pullback of the carrier-layer
// trace under y = x/|x|_inf; fixed components are kept bit-exact.
void radial_fill(const LocalLattice& L, const std::vector<std::uint8_t>& fixed,
                 std::vector<Alg>& loc) {
  const int q = L.q;
  std::vector<Alg> out(loc);
  std::vector<int> ell(q, 0);
  std::vector<int> cell(q);
  std::vector<double> wt(q), p(q);
  std::vector<Alg> vals(q);
  for (std::int64_t s = 0; s < L.nsites; ++s) {
    bool anyfree = false;
    for (int j = 0; j < q; ++j)
      if (!fixed[s * q + j]) anyfree = true;
    if (anyfree) {
      double t = 0.0;
      int c = 0;
      for (int j = 0; j < q; ++j) {
        p[j] = L.pos[j][ell[j]];
        if (std::abs(p[j]) > t) {
          t = std::abs(p[j]);
          c = j;
        }
      }
      const int lc = (p[c] > 0.0) ? L.dims[c] - 1 : 0;
      for (int b = 0; b < q; ++b) {
        if (b == c) continue;
        const double y = p[b] / t;
        int ib = static_cast<int>(std::floor((y - L.pos[b][0]) / L.dx));
        ib = std::min(std::max(ib, 0), L.dims[b] - 2);
        double w = (y - L.pos[b][ib]) / L.dx;
        cell[b] = ib;
        wt[b] = std::min(std::max(w, 0.0), 1.0);
      }
      std::fill(vals.begin(), vals.end(), Alg{});
      const int tq = q - 1;
      for (int corner = 0; corner < (1 << tq); ++corner) {
        double w = 1.0;
        std::int64_t base = static_cast<std::int64_t>(lc) * L.str[c];
        int bit = 0;
        for (int b = 0; b < q; ++b) {
          if (b == c) continue;
          const int up = (corner >> bit) & 1;
          w *= up ? wt[b] : 1.0 - wt[b];
          base += static_cast<std::int64_t>(cell[b] + up) * L.str[b];
          ++bit;
        }
        if (w == 0.0) continue;
        for (int b = 0; b < q; ++b) {
          if (b == c) continue;
          vals[b] += loc[base * q + b] * w;
        }
      }
      for (int j = 0; j < q; ++j) {
        if (fixed[s * q + j]) continue;
        if (j != c) {
          out[s * q + j] = vals[j] * (1.0 / t);
        } else {
          Alg acc{};
          for (int b = 0; b < q; ++b)
            if (b != c) acc += vals[b] * p[b];
          out[s * q + c] = acc * (-(p[c] > 0.0 ? 1.0 : -1.0) / (t * t));
        }
      }
    }
    for (int ax = q - 1; ax >= 0; --ax) {
      if (++ell[ax] < L.dims[ax]) break;
      ell[ax] = 0;
    }
  }
  loc.swap(out);
}

}  // namespace

LatticeForm harmonic_extend(const LatticeForm& boundary_A, const std::vector<Alg>& Fbar,
                            const std::vector<Alg>& Abar) {
  const Grid& g = boundary_A.grid;
  if (boundary_A.degree != 1)
    throw std::invalid_argument("harmonic_extend: boundary data must be a 1-form");
  if (g.n < 2 || g.n > 8)
    throw std::invalid_argument("harmonic_extend: dimension must lie in [2,8]");
  if (g.S < 3) throw std::invalid_argument("harmonic_extend: needs at least 3 rows");
  if (static_cast<std::int64_t>(Fbar.size()) != binom(g.n, 2) ||
      static_cast<int>(Abar.size()) != g.n)
    throw std::invalid_argument("harmonic_extend: background size mismatch");
  LocalLattice L;
  L.q = g.n;
  L.dims.assign(g.n, g.S);
  L.dx = g.h;
  L.pos.resize(g.n);
  for (int a = 0; a < g.n; ++a) {
    L.pos[a].resize(g.S);
    for (int u = 0; u < g.S; ++u) L.pos[a][u] = g.coord(u);
  }
  L.finalize();
  std::vector<Alg> loc(boundary_A.data);
  solve_harmonic(L, fixed_mask(L), Fbar, Abar, loc);
  LatticeForm out(g, 1);
  out.data = std::move(loc);
  return out;
}

LatticeForm radial_extend(const LatticeForm& boundary_A) {
  const Grid& g = boundary_A.grid;
  if (boundary_A.degree != 1)
    throw std::invalid_argument("radial_extend: boundary data must be a 1-form");
  if (g.n < 2 || g.n > 8)
    throw std::invalid_argument("radial_extend: dimension must lie in [2,8]");
  if (g.S < 4 || g.S % 2 != 0)
    throw std::invalid_argument("radial_extend: needs an even row count of at least 4");
  LocalLattice L;
  L.q = g.n;
  L.dims.assign(g.n, g.S);
  L.dx = g.h;
  L.pos.resize(g.n);
  for (int a = 0; a < g.n; ++a) {
    L.pos[a].resize(g.S);
    for (int u = 0; u < g.S; ++u) L.pos[a][u] = g.coord(u);
  }
  L.finalize();
  std::vector<Alg> loc(boundary_A.data);
  radial_fill(L, fixed_mask(L), loc);
  LatticeForm out(g, 1);
  out.data = std::move(loc);
  return out;
}

namespace {

// One face's extension frame: its local lattice, the global axis of each
// local axis, the global site at the local origin and the global strides.
// The lower carrier row sits one row below the face (the sample row of its
// lower bounding plane); on the lower domain boundary the face is entered in
// clamped mode, dropping that row and letting row 0 stand for the plane.
struct FaceFrame {
  LocalLattice L;
  std::vector<int> fx;
  std::vector<std::int64_t> gstr;
  std::int64_t gbase = 0;
  std::vector<std::uint8_t> clamped;
};

FaceFrame build_frame(const CubeComplex& cx, const FaceId& f) {
  const Grid& g = cx.grid;
  const int n = g.n;
  const int m = cx.m;
  const int q = f.dim();
  FaceFrame fr;
  fr.fx = f.axes;
  fr.L.q = q;
  fr.L.dx = 2.0 / m;
  fr.L.dims.resize(q);
  fr.L.pos.resize(q);
  fr.clamped.assign(q, 0);
  std::vector<int> idx(n, 0);
  for (int i = 0; i < n; ++i) {
    if (f.is_free(i)) continue;
    const int p = cx.tau[i] + (m / 2) * f.corner[i];
    idx[i] = std::max(p - 1, 0);
  }
  for (int j = 0; j < q; ++j) {
    const int ax = fr.fx[j];
    const int lo_cells = cx.tau[ax] + (m / 2) * f.corner[ax];
    if (lo_cells == 0) {
      fr.clamped[j] = 1;
      fr.L.dims[j] = m;
      idx[ax] = 0;
      fr.L.pos[j].resize(m);
      for (int u = 0; u < m; ++u)
        fr.L.pos[j][u] = static_cast<double>(2 * u + 1 - m) / m;
    } else {
      fr.L.dims[j] = m + 1;
      idx[ax] = lo_cells - 1;
      fr.L.pos[j].resize(m + 1);
      for (int u = 0; u <= m; ++u)
        fr.L.pos[j][u] = static_cast<double>(2 * u - 1 - m) / m;
    }
  }
  fr.L.finalize();
  fr.gbase = g.index(idx);
  const std::vector<std::int64_t> gs = grid_strides(g);
  fr.gstr.resize(q);
  for (int j = 0; j < q; ++j) fr.gstr[j] = gs[fr.fx[j]];
  return fr;
}

template <class Fn>
void for_frame(const FaceFrame& fr, Fn&& fn) {
  const int q = fr.L.q;
  std::vector<int> ell(q, 0);
  std::int64_t gsite = fr.gbase;
  for (std::int64_t s = 0; s < fr.L.nsites; ++s) {
    fn(s, gsite, ell);
    for (int ax = q - 1; ax >= 0; --ax) {
      ++ell[ax];
      gsite += fr.gstr[ax];
      if (ell[ax] < fr.L.dims[ax]) break;
      gsite -= fr.gstr[ax] * ell[ax];
      ell[ax] = 0;
    }
  }
}

void extend_face(LatticeForm& At, const CubeComplex& cx, const FaceId& f, bool good,
                 const std::map<FaceId, std::vector<Alg>>& fbars,
                 const std::map<FaceId, std::vector<Alg>>& abars,
                 std::vector<std::uint8_t>& writes) {
  const int n = cx.n();
  const int q = f.dim();
  const double half = 0.5 * cx.r;
  FaceFrame fr = build_frame(cx, f);
  std::vector<Alg> loc(fr.L.nsites * q);
  for_frame(fr, [&](std::int64_t s, std::int64_t gsite, const std::vector<int>&) {
    for (int j = 0; j < q; ++j) loc[s * q + j] = At.at(gsite, fr.fx[j]) * half;
  });
  const std::vector<std::uint8_t> fx = fixed_mask(fr.L);
  if (good) {
    const auto& Fb = fbars.at(f);
    const auto& Ab = abars.at(f);
    const auto& pairs = combinations(q, 2);
    std::vector<Alg> Floc(pairs.size()), Aloc(q);
    for (std::size_t p = 0; p < pairs.size(); ++p)
      Floc[p] = Fb[comb_rank(n, {fr.fx[pairs[p][0]], fr.fx[pairs[p][1]]})] * (half * half);
    for (int j = 0; j < q; ++j) Aloc[j] = Ab[fr.fx[j]] * half;
    solve_harmonic(fr.L, fx, Floc, Aloc, loc);
  } else {
    radial_fill(fr.L, fx, loc);
  }
  // Write back the values this face owns: all components at interior sites,
  // the layer-normal component at single-layer sites on the upper carrier or
  // on a clamped lower carrier. Non-clamped lower carriers belong to the
  // neighboring face below.
  const double inv = 1.0 / half;
  for_frame(fr, [&](std::int64_t s, std::int64_t gsite, const std::vector<int>& ell) {
    int nl = 0, only = -1;
    bool owned_layer = false;
    for (int j = 0; j < q; ++j) {
      const int rw = ell[j];
      if (rw == 0 || rw == fr.L.dims[j] - 1) {
        ++nl;
        only = j;
        owned_layer = (rw == fr.L.dims[j] - 1) || fr.clamped[j];
      }
    }
    if (nl >= 2) return;
    const int j0 = (nl == 0) ? 0 : only;
    const int j1 = (nl == 0) ? q - 1 : only;
    if (nl == 1 && !owned_layer) return;
    for (int j = j0; j <= j1; ++j) {
      At.at(gsite, fr.fx[j]) = loc[s * q + j] * inv;
      if (++writes[gsite * n + fr.fx[j]] > 1)
        throw std::logic_error("approximate: extension ownership overlap");
    }
  });
}

// Constant backgrounds per face: 4-faces take the componentwise trace means
// (zero outside the face), higher faces average their 2q facets.
void build_constants(const LatticeForm& A, const LatticeForm& F, const CubeComplex& cx,
                     std::map<FaceId, std::vector<Alg>>& abars,
                     std::map<FaceId, std::vector<Alg>>& fbars) {
  const int n = cx.n();
  const int nc2 = static_cast<int>(binom(n, 2));
  for (const FaceId& f : enumerate_faces(cx, 4)) {
    if (cx.face_clipped(f)) continue;
    const FaceAverage fa = face_average(A, f, cx);
    std::vector<Alg> a(n, Alg{});
    for (std::size_t i = 0; i < fa.combs.size(); ++i) a[fa.combs[i][0]] = fa.values[i];
    const FaceAverage ff = face_average(F, f, cx);
    std::vector<Alg> fv(nc2, Alg{});
    for (std::size_t i = 0; i < ff.combs.size(); ++i)
      fv[comb_rank(n, ff.combs[i])] = ff.values[i];
    abars.emplace(f, std::move(a));
    fbars.emplace(f, std::move(fv));
  }
  for (int q = 5; q <= n; ++q) {
    for (const FaceId& f : enumerate_faces(cx, q)) {
      if (cx.face_clipped(f)) continue;
      std::vector<Alg> a(n, Alg{}), fv(nc2, Alg{});
      const std::vector<FaceId> facets = faces_of_cube(f);
      for (const FaceId& fct : facets) {
        const auto& ag = abars.at(fct);
        const auto& fg = fbars.at(fct);
        for (int c = 0; c < n; ++c) a[c] += ag[c];
        for (int c = 0; c < nc2; ++c) fv[c] += fg[c];
      }
      const double sc = 1.0 / static_cast<double>(facets.size());
      for (auto& v : a) v *= sc;
      for (auto& v : fv) v *= sc;
      abars.emplace(f, std::move(a));
      fbars.emplace(f, std::move(fv));
    }
  }
}

double l2_diff(const LatticeForm& a, const LatticeForm& b) {
  double s = 0.0;
  for (std::size_t e = 0; e < a.data.size(); ++e) s += norm2(a.data[e] - b.data[e]);
  return std::sqrt(s * std::pow(a.grid.h, a.grid.n));
}

double trace_deviation(const LatticeForm& A, const LatticeForm& At,
                       const CubeComplex& cx) {
  double worst = 0.0;
  std::vector<int> lo, hi;
  for (const FaceId& f : enumerate_faces(cx, 4)) {
    if (!face_ranges(cx, f, lo, hi)) continue;
    for_box(cx.grid, lo, hi, [&](std::int64_t site) {
      for (int ax : f.axes) worst = std::max(worst, norm(At.at(site, ax) - A.at(site, ax)));
    });
  }
  return worst;
}

void build_ledger(const LatticeForm& A, const LatticeForm& F, const LatticeForm& At,
                  const LatticeForm& Ft, const CubeComplex& cx,
                  const FaceClassification& cls,
                  const std::map<FaceId, std::vector<Alg>>& abars,
                  const std::map<FaceId, std::vector<Alg>>& fbars,
                  std::vector<CubeLedger>& out) {
  const Grid& g = cx.grid;
  const int n = g.n;
  const double cn = good_cube_constant(n);
  const double h4 = std::pow(g.h, 4);
  const double hn = std::pow(g.h, n);
  const auto& combs4 = combinations(n, 4);
  std::vector<int> alpha(cx.alpha_lo), lo(n), hi(n);
  for (;;) {
    const FaceId cu = cx.cube(alpha);
    if (!cx.face_clipped(cu)) {
      CubeLedger led;
      led.cube = cu;
      led.good = cls.cube_good.at(cu);
      double S_A = 0.0, S_F = 0.0, Q_F = 0.0, T_A = 0.0, T_F = 0.0;
      for (const auto& c4 : combs4) {
        std::vector<int> fixed;
        std::size_t p = 0;
        for (int i = 0; i < n; ++i) {
          if (p < c4.size() && c4[p] == i)
            ++p;
          else
            fixed.push_back(i);
        }
        for (int mask = 0; mask < (1 << (n - 4)); ++mask) {
          FaceId f;
          f.axes = c4;
          f.edge_hu = 2;
          f.corner.assign(n, 0);
          for (int ax : c4) f.corner[ax] = 2 * alpha[ax];
          for (std::size_t j = 0; j < fixed.size(); ++j)
            f.corner[fixed[j]] = 2 * alpha[fixed[j]] + (((mask >> j) & 1) ? 2 : 0);
          const FaceSums s = face_sums(A, F, cx, f);
          if (s.count == 0) continue;
          double mF2 = 0.0, mA2 = 0.0;
          for (const Alg& v : s.sF) mF2 += norm2(v);
          for (const Alg& v : s.sA) mA2 += norm2(v);
          S_F += std::sqrt(std::max(0.0, h4 * (s.sF2 - mF2 / s.count)));
          S_A += std::sqrt(std::max(0.0, h4 * (s.sA2 - mA2 / s.count)));
          Q_F += h4 * s.sF2;
          T_F += std::sqrt(h4 * s.sF2);
          T_A += std::sqrt(h4 * s.sA2);
        }
      }
      for (int i = 0; i < n; ++i) {
        const int a0 = cx.tau[i] + cx.m * alpha[i];
        lo[i] = a0;
        hi[i] = a0 + cx.m;
      }
      double aa = 0.0, ff = 0.0;
      if (led.good) {
        const auto& Ab = abars.at(cu);
        const auto& Fb = fbars.at(cu);
        for_box(g, lo, hi, [&](std::int64_t site) {
          for (int c = 0; c < At.comps(); ++c) aa += norm2(At.at(site, c) - Ab[c]);
          for (int c = 0; c < Ft.comps(); ++c) ff += norm2(Ft.at(site, c) - Fb[c]);
        });
        double fb2 = 0.0;
        for (const Alg& v : Fb) fb2 += norm2(v);
        led.a_rhs = S_A / cn;
        led.f_rhs = S_F / cn + std::sqrt(fb2) * S_A / cn + Q_F;
      } else {
        for_box(g, lo, hi, [&](std::int64_t site) {
          for (int c = 0; c < At.comps(); ++c) aa += norm2(At.at(site, c));
          for (int c = 0; c < Ft.comps(); ++c) ff += norm2(Ft.at(site, c));
        });
        led.a_rhs = cn * T_A;
        led.f_rhs = cn * T_F;
      }
      led.a_lhs = std::sqrt(hn * aa);
      led.f_lhs = std::sqrt(hn * ff);
      out.push_back(std::move(led));
    }
    if (!cx.next_cube(alpha)) break;
  }
}

// Box blend of the approximant away from the singular support: sites within
// Chebyshev distance 3 of the support keep their values, the rest take a
// once-per-axis 3-tap average (clipped at the domain boundary).
void mollify(LatticeForm& At, const CubeComplex& cx, const std::vector<FaceId>& sing) {
  const Grid& g = At.grid;
  const int n = g.n;
  const int m = cx.m;
  const std::int64_t ns = g.sites();
  std::vector<std::uint8_t> near(ns, 0);
  std::vector<int> lo(n), hi(n);
  for (const FaceId& d : sing) {
    bool empty = false;
    for (int i = 0; i < n; ++i) {
      const int start = cx.tau[i] + (m / 2) * d.corner[i];
      const int end = start + (d.is_free(i) ? (m / 2) * d.edge_hu : 0);
      lo[i] = std::max(0, start - 1);
      hi[i] = std::min(g.S, end + 1);
      if (lo[i] >= hi[i]) empty = true;
    }
    if (empty) continue;
    for_box(g, lo, hi, [&](std::int64_t site) { near[site] = 1; });
  }
  const std::vector<std::int64_t> str = grid_strides(g);
  std::vector<std::uint8_t> tmp(ns);
  for (int step = 0; step < 3; ++step) {
    for (int a = 0; a < n; ++a) {
      for (std::int64_t s = 0; s < ns; ++s) {
        std::uint8_t v = near[s];
        const int rw = static_cast<int>((s / str[a]) % g.S);
        if (rw > 0) v |= near[s - str[a]];
        if (rw < g.S - 1) v |= near[s + str[a]];
        tmp[s] = v;
      }
      near.swap(tmp);
    }
  }
  const int nc = At.comps();
  std::vector<Alg> sm(At.data), buf(At.data.size());
  for (int a = 0; a < n; ++a) {
    for (std::int64_t s = 0; s < ns; ++s) {
      const int rw = static_cast<int>((s / str[a]) % g.S);
      for (int c = 0; c < nc; ++c) {
        Alg acc = sm[s * nc + c];
        int cnt = 1;
        if (rw > 0) {
          acc += sm[(s - str[a]) * nc + c];
          ++cnt;
        }
        if (rw < g.S - 1) {
          acc += sm[(s + str[a]) * nc + c];
          ++cnt;
        }
        buf[s * nc + c] = acc * (1.0 / cnt);
      }
    }
    sm.swap(buf);
  }
  for (std::int64_t s = 0; s < ns; ++s) {
    if (near[s]) continue;
    for (int c = 0; c < nc; ++c) At.data[s * nc + c] = sm[s * nc + c];
  }
}

void run_entry(const LatticeForm& A, const LatticeForm& F, const ScheduleEntry& se,
               const ApproxOpts& opts, ExtensionResult& res) {
  const Grid& g = A.grid;
  const int n = g.n;
  const OffsetSelection sel = select_offset(A, F, se.r, se.delta, opts.offset_candidates);
  res.tau = sel.tau;
  const int m = static_cast<int>(std::llround(se.r / g.h));
  const CubeComplex cx(g, m, sel.tau);
  const FaceClassification cls = classify_faces(A, F, cx, se.delta);
  res.n_cubes = cls.n_cubes;
  res.n_bad = cls.n_bad;
  res.bad_volume = static_cast<double>(cls.n_bad) * std::pow(se.r, n);

  std::map<FaceId, std::vector<Alg>> abars, fbars;
  build_constants(A, F, cx, abars, fbars);

  LatticeForm At = A;
  std::vector<std::uint8_t> writes(g.sites() * n, 0);
  for (int q = 5; q <= n; ++q) {
    for (const FaceId& f : enumerate_faces(cx, q)) {
      if (cx.face_clipped(f)) {
        ++res.skipped;
        continue;
      }
      extend_face(At, cx, f, face_is_good(cls, f), fbars, abars, writes);
    }
  }

  LatticeForm Ft = curvature(At);
  res.err_A_raw = l2_diff(At, A);
  res.err_F_raw = l2_diff(Ft, F);
  res.trace_residual = trace_deviation(A, At, cx);
  build_ledger(A, F, At, Ft, cx, cls, abars, fbars, res.cube_errors);
  const std::set<FaceId> singset = dual_complex(cls.bad_faces, cx);
  res.singular.assign(singset.begin(), singset.end());
  if (opts.mollify && !res.singular.empty()) {
    mollify(At, cx, res.singular);
    Ft = curvature(At);
    res.err_A = l2_diff(At, A);
    res.err_F = l2_diff(Ft, F);
  } else {
    res.err_A = res.err_A_raw;
    res.err_F = res.err_F_raw;
  }
  res.A_tilde = std::move(At);
  res.F_tilde = std::move(Ft);
  res.ok = true;
}

}  // namespace

std::vector<ExtensionResult> approximate(const LatticeForm& A,
                                         const std::vector<ScheduleEntry>& schedule,
                                         const ApproxOpts& opts) {
  const Grid& g = A.grid;
  if (A.degree != 1)
    throw std::invalid_argument("approximate: the connection must be a 1-form");
  if (g.n < 5 || g.n > 8)
    throw std::invalid_argument("approximate: dimension must lie in [5,8]");
  if (schedule.empty()) throw std::invalid_argument("approximate: empty schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    checked_m(g, schedule[i].r, "approximate");
    if (!(schedule[i].delta > 0.0 && schedule[i].delta < 1.0))
      throw std::invalid_argument("approximate: delta must lie in (0,1)");
    if (i > 0) {
      if (!(schedule[i].r < schedule[i - 1].r))
        throw std::invalid_argument("approximate: r must decrease strictly");
      const double q0 = schedule[i - 1].r / schedule[i - 1].delta;
      const double q1 = schedule[i].r / schedule[i].delta;
      if (q1 > q0 * (1.0 + 1e-12))
        throw std::invalid_argument("approximate: r/delta must not increase");
    }
  }
  const LatticeForm F = curvature(A);
  std::vector<ExtensionResult> out;
  out.reserve(schedule.size());
  for (const ScheduleEntry& se : schedule) {
    ExtensionResult res;
    res.r = se.r;
    res.delta = se.delta;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      run_entry(A, F, se, opts, res);
    } catch (const std::exception& e) {
      res.ok = false;
      res.message = e.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace weakconn
