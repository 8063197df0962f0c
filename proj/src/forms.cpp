#include "weakconn/forms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace weakconn {

namespace {

long binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  long v = 1;
  for (int i = 0; i < k; ++i) v = v * (n - i) / (i + 1);
  return v;
}

void gen_combs(int n, int k, std::vector<int>& cur, int start,
               std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == k) {
    out.push_back(cur);
    return;
  }
  for (int i = start; i < n; ++i) {
    cur.push_back(i);
    gen_combs(n, k, cur, i + 1, out);
    cur.pop_back();
  }
}

// Per-component difference plan: output component K accumulates
// sign * d/dx_axis of input component J.
struct DiffTerm {
  int axis;
  int in_comb;
  double sign;
};

std::vector<std::vector<DiffTerm>> diff_plan(int n, int k) {
  const auto& out_combs = combinations(n, k + 1);
  std::vector<std::vector<DiffTerm>> plan(out_combs.size());
  for (std::size_t K = 0; K < out_combs.size(); ++K) {
    for (std::size_t a = 0; a < out_combs[K].size(); ++a) {
      std::vector<int> J = out_combs[K];
      J.erase(J.begin() + static_cast<std::ptrdiff_t>(a));
      plan[K].push_back({out_combs[K][a], comb_rank(n, J), (a % 2 == 0) ? 1.0 : -1.0});
    }
  }
  return plan;
}

}  // namespace

const std::vector<std::vector<int>>& combinations(int n, int k) {
  static std::map<std::pair<int, int>, std::vector<std::vector<int>>> cache;
  auto it = cache.find({n, k});
  if (it == cache.end()) {
    std::vector<std::vector<int>> combs;
    std::vector<int> cur;
    gen_combs(n, k, cur, 0, combs);
    it = cache.emplace(std::make_pair(n, k), std::move(combs)).first;
  }
  return it->second;
}

int comb_rank(int n, const std::vector<int>& comb) {
  const auto& all = combinations(n, static_cast<int>(comb.size()));
  const auto it = std::lower_bound(all.begin(), all.end(), comb);
  if (it == all.end() || *it != comb) throw std::invalid_argument("unknown index combination");
  return static_cast<int>(it - all.begin());
}

LatticeForm::LatticeForm(const Grid& g, int k) : grid(g), degree(k) {
  if (k < 0 || k > g.n) throw std::invalid_argument("form degree out of range");
  comps_ = static_cast<int>(binom(g.n, k));
  data.assign(grid.sites() * comps_, Alg{0.0, 0.0, 0.0});
  strides_.assign(g.n, 1);
  for (int i = g.n - 2; i >= 0; --i) strides_[i] = strides_[i + 1] * g.S;
}

int LatticeForm::comps() const { return comps_; }

void LatticeForm::check_finite() const {
  for (const auto& v : data)
    if (!std::isfinite(v.a1) || !std::isfinite(v.a2) || !std::isfinite(v.a3))
      throw std::invalid_argument("form has non-finite entries");
}

LatticeForm exterior_derivative(const LatticeForm& A) {
  const int n = A.grid.n;
  if (A.degree > 2) throw std::invalid_argument("derivative of degree > 2 is unsupported");
  if (A.grid.S < 2) throw std::invalid_argument("grid too small for differences");
  LatticeForm out(A.grid, A.degree + 1);
  const auto plan = diff_plan(n, A.degree);
  const double inv_h = 1.0 / A.grid.h;
  const int S = A.grid.S;

  std::vector<int> idx(n, 0);
  std::int64_t site = 0;
  do {
    for (std::size_t K = 0; K < plan.size(); ++K) {
      Alg v{0.0, 0.0, 0.0};
      for (const auto& t : plan[K]) {
        Alg diff;
        if (idx[t.axis] + 1 < S)
          diff = (A.at(site + A.stride(t.axis), t.in_comb) - A.at(site, t.in_comb)) * inv_h;
        else
          diff = (A.at(site, t.in_comb) - A.at(site - A.stride(t.axis), t.in_comb)) * inv_h;
        v = v + diff * t.sign;
      }
      out.at(site, static_cast<int>(K)) = v;
    }
    ++site;
  } while (A.grid.next(idx));
  return out;
}

LatticeForm derivative_transpose(const LatticeForm& F) {
  const int n = F.grid.n;
  if (F.degree < 1) throw std::invalid_argument("transpose needs degree >= 1");
  if (F.degree > 3) throw std::invalid_argument("transpose of degree > 3 is unsupported");
  if (F.grid.S < 2) throw std::invalid_argument("grid too small for differences");
  LatticeForm out(F.grid, F.degree - 1);
  const auto plan = diff_plan(n, F.degree - 1);
  const double inv_h = 1.0 / F.grid.h;
  const int S = F.grid.S;

  // Scatter the exact transpose of every stencil entry used by
  // exterior_derivative so that <dA, F> = <A, out> to roundoff.
  std::vector<int> idx(n, 0);
  std::int64_t site = 0;
  do {
    for (std::size_t K = 0; K < plan.size(); ++K) {
      const Alg v = F.at(site, static_cast<int>(K));
      for (const auto& t : plan[K]) {
        const Alg w = v * (t.sign * inv_h);
        if (idx[t.axis] + 1 < S) {
          out.at(site + out.stride(t.axis), t.in_comb) =
              out.at(site + out.stride(t.axis), t.in_comb) + w;
          out.at(site, t.in_comb) = out.at(site, t.in_comb) - w;
        } else {
          out.at(site, t.in_comb) = out.at(site, t.in_comb) + w;
          out.at(site - out.stride(t.axis), t.in_comb) =
              out.at(site - out.stride(t.axis), t.in_comb) - w;
        }
      }
    }
    ++site;
  } while (F.grid.next(idx));
  return out;
}

LatticeForm wedge_bracket(const LatticeForm& A, const LatticeForm& B) {
  if (A.degree != 1 || B.degree != 1) throw std::invalid_argument("wedge needs two 1-forms");
  if (A.grid.n != B.grid.n || A.grid.S != B.grid.S)
    throw std::invalid_argument("wedge needs matching grids");
  const int n = A.grid.n;
  LatticeForm out(A.grid, 2);
  const auto& pairs = combinations(n, 2);
  const std::int64_t sites = A.grid.sites();
  for (std::int64_t s = 0; s < sites; ++s) {
    for (std::size_t c = 0; c < pairs.size(); ++c) {
      const int i = pairs[c][0], j = pairs[c][1];
      out.at(s, static_cast<int>(c)) =
          (bracket(A.at(s, i), B.at(s, j)) + bracket(B.at(s, i), A.at(s, j))) * 0.5;
    }
  }
  return out;
}

LatticeForm curvature(const LatticeForm& A) {
  if (A.degree != 1) throw std::invalid_argument("curvature needs a 1-form");
  LatticeForm F = exterior_derivative(A);
  const LatticeForm W = wedge_bracket(A, A);
  for (std::size_t e = 0; e < F.data.size(); ++e) F.data[e] = F.data[e] + W.data[e];
  return F;
}

double ym_energy(const LatticeForm& F) {
  if (F.degree != 2) throw std::invalid_argument("energy needs a 2-form");
  double cell = 1.0;
  for (int i = 0; i < F.grid.n; ++i) cell *= F.grid.h;
  double total = 0.0;
  for (const auto& v : F.data) total += norm2(v);
  return total * cell;
}

LatticeForm restrict_slice(const LatticeForm& A, const SlicePlane& p) {
  const int n = A.grid.n;
  if (static_cast<int>(p.I.size()) != n - 4 || p.T.size() != p.I.size())
    throw std::invalid_argument("slice needs n-4 fixed axes with matching levels");
  std::vector<bool> fixed(n, false);
  for (int axis : p.I) {
    if (axis < 0 || axis >= n || fixed[axis])
      throw std::invalid_argument("invalid fixed-axis set");
    fixed[axis] = true;
  }
  std::vector<int> idx(n, 0);
  for (std::size_t j = 0; j < p.I.size(); ++j) {
    if (p.T[j] < -1.0 - 1e-12 || p.T[j] > 1.0 + 1e-12)
      throw std::invalid_argument("slice level outside the domain");
    idx[p.I[j]] = A.grid.row_of(p.T[j]);
  }
  std::array<int, 4> free_axes{};
  int fa = 0;
  for (int i = 0; i < n; ++i)
    if (!fixed[i]) free_axes[fa++] = i;

  Grid g4(4, A.grid.S);
  LatticeForm out(g4, A.degree);
  const auto& out_combs = combinations(4, A.degree);
  std::vector<int> in_rank(out_combs.size());
  for (std::size_t c = 0; c < out_combs.size(); ++c) {
    std::vector<int> full(out_combs[c].size());
    for (std::size_t a = 0; a < out_combs[c].size(); ++a) full[a] = free_axes[out_combs[c][a]];
    in_rank[c] = comb_rank(n, full);
  }

  std::vector<int> loc(4, 0);
  std::int64_t site4 = 0;
  do {
    for (int a = 0; a < 4; ++a) idx[free_axes[a]] = loc[a];
    const std::int64_t site = A.grid.index(idx);
    for (std::size_t c = 0; c < out_combs.size(); ++c)
      out.at(site4, static_cast<int>(c)) = A.at(site, in_rank[c]);
    ++site4;
  } while (g4.next(loc));
  return out;
}

FaceAverage face_average(const LatticeForm& w, const FaceId& face, const CubeComplex& cx) {
  const int n = w.grid.n;
  if (n != cx.n() || w.grid.S != cx.grid.S)
    throw std::invalid_argument("form and complex grids differ");
  if (static_cast<int>(face.corner.size()) != n)
    throw std::invalid_argument("face dimension mismatch");

  std::vector<int> lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    cx.face_site_range(face, i, lo[i], hi[i]);
    if (hi[i] <= lo[i]) throw std::invalid_argument("face has no sample sites after clipping");
  }

  FaceAverage out;
  out.face = face;
  const auto& combs = combinations(n, w.degree);
  std::vector<int> ranks;
  for (std::size_t c = 0; c < combs.size(); ++c) {
    bool inside = true;
    for (int axis : combs[c]) inside = inside && face.is_free(axis);
    if (inside) {
      out.combs.push_back(combs[c]);
      ranks.push_back(static_cast<int>(c));
    }
  }
  out.values.assign(ranks.size(), Alg{0.0, 0.0, 0.0});

  std::vector<int> idx(lo);
  std::int64_t count = 0;
  while (true) {
    const std::int64_t site = w.grid.index(idx);
    for (std::size_t c = 0; c < ranks.size(); ++c)
      out.values[c] = out.values[c] + w.at(site, ranks[c]);
    ++count;
    int i = n - 1;
    for (; i >= 0; --i) {
      if (++idx[i] < hi[i]) break;
      idx[i] = lo[i];
    }
    if (i < 0) break;
  }
  for (auto& v : out.values) v = v * (1.0 / static_cast<double>(count));
  return out;
}

double bianchi_residual(const LatticeForm& A) {
  if (A.degree != 1) throw std::invalid_argument("residual needs a 1-form");
  const int n = A.grid.n;
  const LatticeForm F = curvature(A);
  const LatticeForm dF = exterior_derivative(F);
  const auto& triples = combinations(n, 3);

  struct BracketTerm {
    int axis_comp;
    int f_comb;
    double sign;
  };
  std::vector<std::vector<BracketTerm>> plan(triples.size());
  for (std::size_t K = 0; K < triples.size(); ++K) {
    for (std::size_t a = 0; a < 3; ++a) {
      std::vector<int> J = triples[K];
      J.erase(J.begin() + static_cast<std::ptrdiff_t>(a));
      plan[K].push_back({triples[K][a], comb_rank(n, J), (a % 2 == 0) ? 1.0 : -1.0});
    }
  }

  double cell = 1.0;
  for (int i = 0; i < n; ++i) cell *= A.grid.h;
  double total = 0.0;
  const std::int64_t sites = A.grid.sites();
  for (std::int64_t s = 0; s < sites; ++s) {
    for (std::size_t K = 0; K < triples.size(); ++K) {
      Alg v = dF.at(s, static_cast<int>(K));
      for (const auto& t : plan[K])
        v = v + bracket(A.at(s, t.axis_comp), F.at(s, t.f_comb)) * t.sign;
      total += norm2(v);
    }
  }
  return std::sqrt(total * cell);
}

}  // namespace weakconn
