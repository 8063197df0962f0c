#include "weakconn/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace weakconn {

namespace {

double cell_volume(const Grid& g) {
  double c = 1.0;
  for (int i = 0; i < g.n; ++i) c *= g.h;
  return c;
}

std::vector<std::int64_t> site_strides(const Grid& g) {
  std::vector<std::int64_t> st(g.n, 1);
  for (int i = g.n - 2; i >= 0; --i) st[i] = st[i + 1] * g.S;
  return st;
}

int pair_count(int n) { return n * (n - 1) / 2; }

void check_sample(const CurvSample& F, const char* who) {
  if (F.n < 2) throw std::invalid_argument(std::string(who) + " needs dimension >= 2");
  if (static_cast<int>(F.f.size()) != pair_count(F.n))
    throw std::invalid_argument(std::string(who) + " has a wrong coefficient count");
}

struct KabschOut {
  Rotation3 R;
  double value2 = 0.0;  // attained minimum of sum |R f - f'|^2
  double source2 = 0.0; // sum |f|^2 over the picked coefficients
};

// Closed-form min over R in SO(3) of sum_k |R f_k - f'_k|^2 for the picked
// coefficient pairs: SVD of the cross-covariance, reflection folded back by
// flipping the smallest singular direction.
KabschOut kabsch(const std::vector<Alg>& f, const std::vector<Alg>& fp,
                 const std::vector<int>& pick) {
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  double nf = 0.0, nfp = 0.0;
  for (int k : pick) {
    const Eigen::Vector3d a(f[k].a1, f[k].a2, f[k].a3);
    const Eigen::Vector3d b(fp[k].a1, fp[k].a2, fp[k].a3);
    H += a * b.transpose();
    nf += a.squaredNorm();
    nfp += b.squaredNorm();
  }
  KabschOut out;
  out.source2 = nf;
  if (nf == 0.0) {
    out.R = {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
    out.value2 = nfp;
    return out;
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double sign = (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0)
                          ? -1.0
                          : 1.0;
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  D(2, 2) = sign;
  const Eigen::Matrix3d R = svd.matrixV() * D * svd.matrixU().transpose();
  // Evaluate the residual by applying R: the trace identity
  // |f|^2 + |f'|^2 - 2 tr(RH) cancels catastrophically near zero.
  double v2 = 0.0;
  for (int k : pick) {
    const Eigen::Vector3d a(f[k].a1, f[k].a2, f[k].a3);
    const Eigen::Vector3d b(fp[k].a1, fp[k].a2, fp[k].a3);
    v2 += (R * a - b).squaredNorm();
  }
  out.value2 = v2;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.R[r][c] = R(r, c);
  return out;
}

// Certificate with adjoint(inverse(g), f) = R f.
Group lift(const Rotation3& R) { return inverse(rotation_to_group(R)); }

std::vector<int> all_pairs(int n) {
  std::vector<int> pick(pair_count(n));
  for (std::size_t k = 0; k < pick.size(); ++k) pick[k] = static_cast<int>(k);
  return pick;
}

// Same stencil as gauge_transform, one component, with the gauge at site y
// overridden so finite-difference probes touch only the perturbed terms.
Alg transformed_comp(const LatticeForm& A, const std::vector<Group>& g,
                     std::int64_t x, int row, std::int64_t stride, int S,
                     double inv_h, int axis, std::int64_t y, const Group& gy) {
  const Group& gx = (x == y) ? gy : g[x];
  if (row + 1 < S) {
    const Group& gn = (x + stride == y) ? gy : g[x + stride];
    return log_alg(inverse(gx) * gn) * inv_h + adjoint(inverse(gx), A.at(x, axis));
  }
  const Group& gp = (x - stride == y) ? gy : g[x - stride];
  return log_alg(inverse(gp) * gx) * inv_h + adjoint(inverse(gx), A.at(x, axis));
}

std::vector<Group> random_smooth_gauge(const Grid& grid, double amp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> uamp(0.5, 1.0);
  std::uniform_int_distribution<int> uk(0, 1);
  struct Mode {
    std::array<int, 8> k;
    double phase, amp;
  };
  std::vector<std::vector<Mode>> modes(3);
  for (int c = 0; c < 3; ++c)
    for (int m = 0; m < 2; ++m) {
      Mode mo{};
      for (int i = 0; i < grid.n; ++i) mo.k[i] = uk(rng);
      mo.phase = uphase(rng);
      mo.amp = amp * uamp(rng);
      modes[c].push_back(mo);
    }
  std::vector<Group> g(grid.sites(), Group::identity());
  std::vector<int> idx(grid.n, 0);
  std::int64_t site = 0;
  do {
    Alg xi{};
    for (int c = 0; c < 3; ++c) {
      double val = 0.0;
      for (const auto& mo : modes[c]) {
        double arg = mo.phase;
        for (int i = 0; i < grid.n; ++i) arg += M_PI * mo.k[i] * grid.coord(idx[i]);
        val += mo.amp * std::sin(arg);
      }
      (c == 0 ? xi.a1 : c == 1 ? xi.a2 : xi.a3) = val;
    }
    g[site] = exp_alg(xi);
    ++site;
  } while (grid.next(idx));
  return g;
}

// Descent state for || A^g - T ||_{L2}^2 with incremental probe deltas.
struct DistEngine {
  const LatticeForm& A;
  const LatticeForm& T;
  Grid grid;
  int n, S;
  double inv_h, cell;
  std::vector<std::int64_t> st;
  std::vector<int> idxt;  // per-site multi-index, flattened

  DistEngine(const LatticeForm& A_, const LatticeForm& T_)
      : A(A_), T(T_), grid(A_.grid), n(A_.grid.n), S(A_.grid.S),
        inv_h(1.0 / A_.grid.h), cell(cell_volume(A_.grid)), st(site_strides(A_.grid)) {
    idxt.resize(grid.sites() * n);
    std::vector<int> idx(n, 0);
    std::int64_t site = 0;
    do {
      for (int i = 0; i < n; ++i) idxt[site * n + i] = idx[i];
      ++site;
    } while (grid.next(idx));
  }

  double build(const std::vector<Group>& g, LatticeForm& B) const {
    double sum2 = 0.0;
    const Group none{};
    const std::int64_t sites = grid.sites();
    for (std::int64_t x = 0; x < sites; ++x)
      for (int i = 0; i < n; ++i) {
        const Alg b =
            transformed_comp(A, g, x, idxt[x * n + i], st[i], S, inv_h, i, -1, none);
        B.at(x, i) = b;
        sum2 += norm2(b - T.at(x, i));
      }
    return cell * sum2;
  }

  void affected(std::int64_t y, std::vector<std::array<std::int64_t, 3>>& out) const {
    out.clear();
    for (int i = 0; i < n; ++i) {
      const int row = idxt[y * n + i];
      out.push_back({y, i, row});
      if (row > 0) out.push_back({y - st[i], i, row - 1});
      if (row == S - 2) out.push_back({y + st[i], i, S - 1});
    }
  }

  double trial_delta(const std::vector<Group>& g, const LatticeForm& B, std::int64_t y,
                     const Group& gy,
                     const std::vector<std::array<std::int64_t, 3>>& comps) const {
    double d = 0.0;
    try {
      for (const auto& c : comps) {
        const std::int64_t x = c[0];
        const int i = static_cast<int>(c[1]);
        const int row = static_cast<int>(c[2]);
        const Alg nb = transformed_comp(A, g, x, row, st[i], S, inv_h, i, y, gy);
        d += norm2(nb - T.at(x, i)) - norm2(B.at(x, i) - T.at(x, i));
      }
    } catch (const std::runtime_error&) {
      return 1e300;
    }
    return cell * d;
  }

  void gradient(const std::vector<Group>& g, const LatticeForm& B,
                std::vector<Alg>& grad) const {
    const double eps = 1e-5;
    const std::int64_t sites = grid.sites();
    grad.assign(sites, Alg{});
    std::vector<std::array<std::int64_t, 3>> comps;
    for (std::int64_t y = 0; y < sites; ++y) {
      affected(y, comps);
      Alg gy{};
      for (int a = 0; a < 3; ++a) {
        Alg e{};
        (a == 0 ? e.a1 : a == 1 ? e.a2 : e.a3) = eps;
        const double dp = trial_delta(g, B, y, exp_alg(e) * g[y], comps);
        const double dm = trial_delta(g, B, y, exp_alg(-e) * g[y], comps);
        (a == 0 ? gy.a1 : a == 1 ? gy.a2 : gy.a3) = (dp - dm) / (2.0 * eps);
      }
      grad[y] = gy;
    }
  }

  struct StartResult {
    std::vector<Group> g;
    double phi = 0.0;
    bool converged = false;
  };

  StartResult run(std::vector<Group> g, int max_iters, double tol,
                  std::vector<double>& trace) const {
    LatticeForm B(grid, 1);
    double phi = build(g, B);
    trace.push_back(phi);
    const std::int64_t sites = grid.sites();
    std::vector<Alg> grad;
    double eta = 0.25;
    int rises = 0;
    for (int it = 0; it < max_iters; ++it) {
      gradient(g, B, grad);
      double g2 = 0.0;
      for (const auto& gy : grad) g2 += norm2(gy);
      if (std::sqrt(cell * g2) < tol) return {std::move(g), phi, true};

      bool accepted = false;
      double trial_eta = std::min(4.0 * eta, 1e3);
      for (int bt = 0; bt < 40 && !accepted; ++bt) {
        std::vector<Group> gt(sites);
        for (std::int64_t y = 0; y < sites; ++y)
          gt[y] = normalized(exp_alg(grad[y] * -trial_eta) * g[y]);
        try {
          LatticeForm tB(grid, 1);
          const double tphi = build(gt, tB);
          if (tphi <= phi - 1e-4 * trial_eta * cell * g2) {
            if (tphi > phi) {
              if (++rises >= 10) {
                std::ostringstream os;
                os << "relaxation diverged; objective trace tail:";
                const std::size_t m = trace.size();
                for (std::size_t t = m > 10 ? m - 10 : 0; t < m; ++t)
                  os << " " << trace[t];
                throw std::runtime_error(os.str());
              }
            } else {
              rises = 0;
            }
            g.swap(gt);
            B = std::move(tB);
            phi = tphi;
            eta = trial_eta;
            accepted = true;
          }
        } catch (const std::runtime_error& e) {
          if (std::string(e.what()).rfind("relaxation diverged", 0) == 0) throw;
          // branch cut crossed at this step size; backtrack
        }
        trial_eta *= 0.5;
      }
      if (!accepted) break;  // line search stalled at this start
      trace.push_back(phi);
    }
    return {std::move(g), phi, false};
  }
};

std::vector<int> rows_to_indices(const Grid& g, const std::vector<int>& t) {
  for (int r : t)
    if (r < 0 || r >= g.S) throw std::invalid_argument("slice row out of range");
  return t;
}

std::vector<double> row_coords(const Grid& g, const std::vector<int>& t) {
  std::vector<double> c(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) c[k] = g.coord(t[k]);
  return c;
}

void check_subset(const Grid& g, const std::vector<int>& I) {
  if (static_cast<int>(I.size()) != g.n - 4)
    throw std::invalid_argument("transverse subset must have n - 4 axes");
  for (std::size_t k = 0; k < I.size(); ++k) {
    if (I[k] < 0 || I[k] >= g.n) throw std::invalid_argument("subset axis out of range");
    if (k > 0 && I[k] <= I[k - 1])
      throw std::invalid_argument("subset axes must be strictly ascending");
  }
}

}  // namespace

CurvSample::CurvSample(int dim) : n(dim), f(pair_count(std::max(dim, 0))) {
  if (dim < 2) throw std::invalid_argument("curvature sample needs dimension >= 2");
}

CurvSample::CurvSample(const LatticeForm& F, std::int64_t site) : n(F.grid.n) {
  if (F.degree != 2) throw std::invalid_argument("curvature sample needs a 2-form");
  if (site < 0 || site >= F.grid.sites())
    throw std::invalid_argument("sample site out of range");
  f.resize(F.comps());
  for (int c = 0; c < F.comps(); ++c) f[c] = F.at(site, c);
}

std::pair<double, Group> d_pointwise(const CurvSample& F, const CurvSample& Fp) {
  check_sample(F, "pointwise distance");
  check_sample(Fp, "pointwise distance");
  if (F.n != Fp.n) throw std::invalid_argument("pointwise distance needs equal dimensions");
  const KabschOut k = kabsch(F.f, Fp.f, all_pairs(F.n));
  if (k.source2 == 0.0) return {std::sqrt(k.value2), Group::identity()};
  return {std::sqrt(k.value2), lift(k.R)};
}

double delta_pointwise(const CurvSample& F, const CurvSample& Fp) {
  check_sample(F, "subset distance");
  check_sample(Fp, "subset distance");
  if (F.n != Fp.n) throw std::invalid_argument("subset distance needs equal dimensions");
  const int n = F.n;
  if (n < 4) throw std::invalid_argument("subset distance needs dimension >= 4");
  double sum = 0.0;
  std::vector<int> pick(6);
  for (const auto& J : combinations(n, 4)) {
    int c = 0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) pick[c++] = comb_rank(n, {J[a], J[b]});
    sum += kabsch(F.f, Fp.f, pick).value2;
  }
  return std::sqrt(2.0 / ((n - 2.0) * (n - 3.0)) * sum);
}

GramResult gram_equivalence(const CurvSample& F, const CurvSample& Fp, double tol) {
  check_sample(F, "gram test");
  check_sample(Fp, "gram test");
  if (F.n != Fp.n) throw std::invalid_argument("gram test needs equal dimensions");
  if (tol < 0.0) throw std::invalid_argument("gram tolerance must be nonnegative");
  const int m = pair_count(F.n);
  double gap = 0.0;
  for (int k = 0; k < m; ++k)
    for (int l = k; l < m; ++l)
      gap = std::max(gap, std::abs(inner(F.f[k], F.f[l]) - inner(Fp.f[k], Fp.f[l])));
  if (gap > tol) return {false, std::nullopt};

  const KabschOut k = kabsch(F.f, Fp.f, all_pairs(F.n));
  const Group wit = (k.source2 == 0.0) ? Group::identity() : lift(k.R);
  if (std::sqrt(k.value2) <= tol * (1.0 + std::sqrt(k.source2))) return {true, wit};
  return {false, std::nullopt};
}

namespace {

DistanceReport integrate_pointwise(const LatticeForm& F, const LatticeForm& Fp,
                                   bool subsets) {
  if (F.degree != 2 || Fp.degree != 2)
    throw std::invalid_argument("curvature distance needs 2-forms");
  if (F.grid.n != Fp.grid.n || F.grid.S != Fp.grid.S)
    throw std::invalid_argument("curvature distance needs matching grids");
  if (subsets && F.grid.n < 4)
    throw std::invalid_argument("subset distance needs dimension >= 4");
  F.check_finite();
  Fp.check_finite();

  const double cell = cell_volume(F.grid);
  DistanceReport rep;
  rep.certificate = GaugeField(F.grid);
  rep.converged = true;
  rep.method = subsets ? "pointwise-kabsch-4subsets" : "pointwise-kabsch";

  double sum = 0.0;
  for (std::int64_t s = 0; s < F.grid.sites(); ++s) {
    const CurvSample a(F, s);
    const CurvSample b(Fp, s);
    if (subsets) {
      const double d = delta_pointwise(a, b);
      sum += d * d;
    } else {
      auto [d, g] = d_pointwise(a, b);
      sum += d * d;
      rep.certificate.g[s] = g;
    }
  }
  rep.value = std::sqrt(cell * sum);
  return rep;
}

}  // namespace

DistanceReport d_curv(const LatticeForm& F, const LatticeForm& Fp) {
  return integrate_pointwise(F, Fp, false);
}

DistanceReport delta_curv(const LatticeForm& F, const LatticeForm& Fp) {
  return integrate_pointwise(F, Fp, true);
}

DistanceReport d_conn(const LatticeForm& A, const LatticeForm& Ap, const ConnOpts& opts) {
  if (A.degree != 1 || Ap.degree != 1)
    throw std::invalid_argument("connection distance needs 1-forms");
  if (A.grid.n != Ap.grid.n || A.grid.S != Ap.grid.S)
    throw std::invalid_argument("connection distance needs matching grids");
  if (A.grid.S < 2) throw std::invalid_argument("grid too small for differences");
  if (opts.max_iters < 0 || opts.tol < 0.0 || opts.starts < 1)
    throw std::invalid_argument("bad optimizer parameters");
  A.check_finite();
  Ap.check_finite();

  const DistEngine eng(A, Ap);
  const std::int64_t sites = A.grid.sites();

  std::vector<std::vector<Group>> starts;
  starts.emplace_back(sites, Group::identity());
  if (opts.starts >= 2) {
    // aligning both fields along one axis brings gauge-related inputs close
    const GaugeField ga = axial_gauge(A, 0);
    const GaugeField gb = axial_gauge(Ap, 0);
    std::vector<Group> aligned(sites);
    for (std::int64_t y = 0; y < sites; ++y) aligned[y] = ga.g[y] * inverse(gb.g[y]);
    starts.push_back(std::move(aligned));
  }
  for (int k = 2; k < opts.starts; ++k)
    starts.push_back(random_smooth_gauge(A.grid, 0.4 / (k - 1), opts.seed + k));
  if (opts.warm_start && opts.warm_start->grid.n == A.grid.n &&
      opts.warm_start->grid.S == A.grid.S &&
      static_cast<std::int64_t>(opts.warm_start->g.size()) == sites)
    starts.push_back(opts.warm_start->g);

  DistanceReport rep;
  rep.method = "gradient-descent";
  double best = -1.0;
  std::vector<double> trace;
  std::vector<Group> best_g;
  for (auto& g0 : starts) {
    auto res = eng.run(std::move(g0), opts.max_iters, opts.tol, trace);
    if (best < 0.0 || res.phi < best) {
      best = res.phi;
      best_g = std::move(res.g);
      rep.converged = res.converged;
    }
  }
  rep.value = std::sqrt(std::max(0.0, best));
  rep.certificate.grid = A.grid;
  rep.certificate.g = std::move(best_g);
  return rep;
}

DistanceReport delta_conn(const LatticeForm& A, const LatticeForm& Ap,
                          const ConnOpts& opts) {
  if (A.degree != 1 || Ap.degree != 1)
    throw std::invalid_argument("connection distance needs 1-forms");
  if (A.grid.n != Ap.grid.n || A.grid.S != Ap.grid.S)
    throw std::invalid_argument("connection distance needs matching grids");
  const int n = A.grid.n;
  if (n < 4) throw std::invalid_argument("sliced distance needs dimension >= 4");
  const int S = A.grid.S;

  DistanceReport rep;
  rep.method = "sliced-4d";
  rep.converged = true;
  rep.certificate = GaugeField(A.grid);

  // One whole-grid descent; its restriction seeds every slice descent, so
  // the reported maximum never exceeds the squared global distance.
  const DistanceReport global = d_conn(A, Ap, opts);
  const auto st = site_strides(A.grid);

  double weight = 1.0;
  for (int k = 0; k < n - 4; ++k) weight *= A.grid.h;

  for (const auto& I : combinations(n, n - 4)) {
    std::vector<int> free_axes;
    {
      std::vector<bool> fixed(n, false);
      for (int a : I) fixed[a] = true;
      for (int i = 0; i < n; ++i)
        if (!fixed[i]) free_axes.push_back(i);
    }
    double integral = 0.0;
    std::vector<int> t(I.size(), 0);
    bool more = true;
    while (more) {
      const SlicePlane p{I, row_coords(A.grid, t)};

      GaugeField warm(Grid(4, S));
      std::int64_t base = 0;
      for (std::size_t k = 0; k < I.size(); ++k)
        base += static_cast<std::int64_t>(t[k]) * st[I[k]];
      std::int64_t rank4 = 0;
      std::array<int, 4> c4{};
      while (true) {
        std::int64_t site = base;
        for (int k = 0; k < 4; ++k)
          site += static_cast<std::int64_t>(c4[k]) * st[free_axes[k]];
        warm.g[rank4++] = global.certificate.g[site];
        int k = 3;
        for (; k >= 0; --k) {
          if (++c4[k] < S) break;
          c4[k] = 0;
        }
        if (k < 0) break;
      }

      ConnOpts slice_opts = opts;
      slice_opts.warm_start = &warm;
      const DistanceReport r =
          d_conn(restrict_slice(A, p), restrict_slice(Ap, p), slice_opts);
      rep.converged = rep.converged && r.converged;
      integral += r.value * r.value * weight;
      more = false;
      for (int k = static_cast<int>(t.size()) - 1; k >= 0; --k) {
        if (++t[k] < S) {
          more = true;
          break;
        }
        t[k] = 0;
      }
    }
    rep.slice_table.emplace_back(I, integral);
    rep.value = std::max(rep.value, integral);
  }
  return rep;
}

std::pair<double, double> slice_upper_gradient_check(const LatticeForm& A,
                                                     const std::vector<int>& I,
                                                     const std::vector<int>& t1,
                                                     const std::vector<int>& t2,
                                                     const ConnOpts& opts) {
  if (A.degree != 1) throw std::invalid_argument("upper gradient check needs a 1-form");
  check_subset(A.grid, I);
  if (t1.size() != I.size() || t2.size() != I.size())
    throw std::invalid_argument("slice rows must match the subset size");
  rows_to_indices(A.grid, t1);
  rows_to_indices(A.grid, t2);
  if (t1 == t2) return {0.0, 0.0};

  int pos = -1;
  for (std::size_t k = 0; k < I.size(); ++k)
    if (t1[k] != t2[k]) {
      if (pos >= 0)
        throw std::invalid_argument("slice rows must differ along a single axis");
      pos = static_cast<int>(k);
    }
  const int axis = I[pos];
  const int lo = std::min(t1[pos], t2[pos]);
  const int hi = std::max(t1[pos], t2[pos]);

  const LatticeForm Ax = gauge_transform(A, axial_gauge(A, axis));
  const double l1 = d_conn(restrict_slice(Ax, {I, row_coords(A.grid, t1)}),
                           restrict_slice(Ax, {I, row_coords(A.grid, t2)}), opts)
                        .value;

  const LatticeForm F = curvature(Ax);
  const int n = A.grid.n;
  const int S = A.grid.S;
  const auto st = site_strides(A.grid);
  std::vector<int> free_axes;
  {
    std::vector<bool> fixed(n, false);
    for (int a : I) fixed[a] = true;
    for (int i = 0; i < n; ++i)
      if (!fixed[i]) free_axes.push_back(i);
  }
  double cell4 = 1.0;
  for (int k = 0; k < 4; ++k) cell4 *= A.grid.h;

  double rhs = 0.0;
  for (int r = lo; r < hi; ++r) {
    std::int64_t base = 0;
    for (std::size_t k = 0; k < I.size(); ++k)
      base += static_cast<std::int64_t>(k == static_cast<std::size_t>(pos) ? r : t1[k]) *
              st[I[k]];
    double sum = 0.0;
    std::array<int, 4> c4{};
    while (true) {
      std::int64_t site = base;
      for (int k = 0; k < 4; ++k) site += static_cast<std::int64_t>(c4[k]) * st[free_axes[k]];
      for (int c = 0; c < F.comps(); ++c) sum += norm2(F.at(site, c));
      int k = 3;
      for (; k >= 0; --k) {
        if (++c4[k] < S) break;
        c4[k] = 0;
      }
      if (k < 0) break;
    }
    rhs += A.grid.h * std::sqrt(cell4 * sum);
  }
  return {l1, rhs};
}

}  // namespace weakconn
