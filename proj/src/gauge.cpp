#include "weakconn/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
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

// One component of A^g with an optional override value for the gauge at one
// site, so finite-difference probes touch only the perturbed neighborhood.
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

}  // namespace

GaugeField::GaugeField(const Grid& gr) : grid(gr), g(gr.sites(), Group::identity()) {}

LatticeForm gauge_transform(const LatticeForm& A, const GaugeField& gf) {
  if (A.degree != 1) throw std::invalid_argument("gauge transform needs a 1-form");
  if (A.grid.S < 2) throw std::invalid_argument("grid too small for differences");
  if (A.grid.n != gf.grid.n || A.grid.S != gf.grid.S)
    throw std::invalid_argument("gauge transform needs matching grids");
  if (static_cast<std::int64_t>(gf.g.size()) != gf.grid.sites())
    throw std::invalid_argument("gauge field has wrong number of sites");
  const int n = A.grid.n;
  const int S = A.grid.S;
  const double inv_h = 1.0 / A.grid.h;
  const auto st = site_strides(A.grid);
  LatticeForm out(A.grid, 1);

  std::vector<int> idx(n, 0);
  std::int64_t site = 0;
  const Group none{};
  do {
    for (int i = 0; i < n; ++i)
      out.at(site, i) =
          transformed_comp(A, gf.g, site, idx[i], st[i], S, inv_h, i, -1, none);
    ++site;
  } while (A.grid.next(idx));
  return out;
}

GaugeField axial_gauge(const LatticeForm& A, int axis) {
  const std::int64_t lines = A.grid.sites() / A.grid.S;
  return axial_gauge(A, axis, std::vector<Group>(lines, Group::identity()));
}

GaugeField axial_gauge(const LatticeForm& A, int axis, const std::vector<Group>& g0) {
  if (A.degree != 1) throw std::invalid_argument("axial gauge needs a 1-form");
  const int n = A.grid.n;
  const int S = A.grid.S;
  if (axis < 0 || axis >= n) throw std::invalid_argument("axial axis out of range");
  if (static_cast<std::int64_t>(g0.size()) != A.grid.sites() / S)
    throw std::invalid_argument("base gauge has wrong number of sites");
  GaugeField gf(A.grid);
  const auto st = site_strides(A.grid);
  const double h = A.grid.h;

  // Lexicographic over the transverse axes, matching the g0 indexing.
  std::vector<int> idx(n, 0);
  std::int64_t rank = 0;
  bool more = true;
  while (more) {
    idx[axis] = 0;
    std::int64_t site = A.grid.index(idx);
    gf.g[site] = g0[rank];
    for (int t = 0; t + 1 < S; ++t) {
      gf.g[site + st[axis]] = exp_alg(A.at(site, axis) * -h) * gf.g[site];
      site += st[axis];
    }
    ++rank;
    more = false;
    for (int i = n - 1; i >= 0; --i) {
      if (i == axis) continue;
      if (++idx[i] < S) {
        more = true;
        break;
      }
      idx[i] = 0;
    }
  }
  return gf;
}

LatticeForm ProjectorSpec::apply(const LatticeForm& B) const {
  if (B.degree != 1) throw std::invalid_argument("projector needs a 1-form");
  if (B.grid.n != grid.n || B.grid.S != grid.S)
    throw std::invalid_argument("projector grid mismatch");
  const int k = count();
  if (k == 0) return B;
  const int n = grid.n;
  const std::int64_t sites = grid.sites();
  const double cell = cell_volume(grid);

  std::vector<Alg> v(k);
  for (int j = 0; j < k; ++j) {
    Alg acc{};
    const auto& rj = refs[j];
    for (std::int64_t s = 0; s < sites; ++s)
      for (int i = 0; i < n; ++i) acc += B.at(s, i) * rj[s * n + i];
    v[j] = acc * cell;
  }
  std::vector<Alg> c(k);
  for (int j = 0; j < k; ++j) {
    Alg acc{};
    for (int l = 0; l < k; ++l) acc += v[l] * gram_inv[j * k + l];
    c[j] = acc;
  }
  LatticeForm out = B;
  for (int j = 0; j < k; ++j) {
    const auto& rj = refs[j];
    for (std::int64_t s = 0; s < sites; ++s)
      for (int i = 0; i < n; ++i) out.at(s, i) -= c[j] * rj[s * n + i];
  }
  return out;
}

ProjectorSpec make_projector(const Grid& g, std::vector<std::vector<double>> refs) {
  const int k = static_cast<int>(refs.size());
  const std::int64_t want = g.sites() * g.n;
  for (const auto& r : refs)
    if (static_cast<std::int64_t>(r.size()) != want)
      throw std::invalid_argument("projector reference has wrong size");
  const double cell = cell_volume(g);

  std::vector<double> gram(k * k, 0.0);
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) {
      double s = 0.0;
      for (std::int64_t e = 0; e < want; ++e) s += refs[a][e] * refs[b][e];
      gram[a * k + b] = gram[b * k + a] = s * cell;
    }

  // Gauss-Jordan inverse; the family is tiny (one ref per kept direction).
  std::vector<double> inv(k * k, 0.0);
  for (int i = 0; i < k; ++i) inv[i * k + i] = 1.0;
  double scale = 0.0;
  for (int i = 0; i < k; ++i) scale = std::max(scale, std::abs(gram[i * k + i]));
  for (int col = 0; col < k; ++col) {
    int piv = col;
    for (int r = col + 1; r < k; ++r)
      if (std::abs(gram[r * k + col]) > std::abs(gram[piv * k + col])) piv = r;
    if (std::abs(gram[piv * k + col]) < 1e-12 * std::max(scale, 1e-300))
      throw std::invalid_argument("projector references are linearly dependent");
    for (int c = 0; c < k; ++c) {
      std::swap(gram[piv * k + c], gram[col * k + c]);
      std::swap(inv[piv * k + c], inv[col * k + c]);
    }
    const double d = gram[col * k + col];
    for (int c = 0; c < k; ++c) {
      gram[col * k + c] /= d;
      inv[col * k + c] /= d;
    }
    for (int r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = gram[r * k + col];
      if (f == 0.0) continue;
      for (int c = 0; c < k; ++c) {
        gram[r * k + c] -= f * gram[col * k + c];
        inv[r * k + c] -= f * inv[col * k + c];
      }
    }
  }
  return ProjectorSpec{g, std::move(refs), std::move(inv)};
}

ProjectorSpec coordinate_projector(const Grid& g, const std::vector<int>& axes) {
  std::vector<std::vector<double>> refs;
  for (int a : axes) {
    if (a < 0 || a >= g.n) throw std::invalid_argument("projector axis out of range");
    std::vector<double> r(g.sites() * g.n, 0.0);
    for (std::int64_t s = 0; s < g.sites(); ++s) r[s * g.n + a] = 1.0;
    refs.push_back(std::move(r));
  }
  return make_projector(g, std::move(refs));
}

namespace {

// Objective bookkeeping: Phi(g) = ||B||^2 - v^T G^{-1} v with B = A^g and
// v_j = <B, ref_j>, so probes only need local component updates.
struct RelaxState {
  LatticeForm B;
  double sum2 = 0.0;       // unweighted sum of |B|^2 over components
  std::vector<Alg> v;      // weighted moments, one per reference
};

struct Relaxer {
  const LatticeForm& A;
  const ProjectorSpec* pi;
  Grid grid;
  int n, S;
  double h, inv_h, cell;
  std::vector<std::int64_t> st;
  std::vector<int> idxt;            // per-site multi-index, flattened
  std::vector<std::uint8_t> pinned;  // sites frozen at the identity

  Relaxer(const LatticeForm& A_, const ProjectorSpec* pi_, bool pin_boundary)
      : A(A_), pi(pi_), grid(A_.grid), n(A_.grid.n), S(A_.grid.S),
        h(A_.grid.h), inv_h(1.0 / h), cell(cell_volume(A_.grid)),
        st(site_strides(A_.grid)) {
    const std::int64_t sites = grid.sites();
    idxt.resize(sites * n);
    pinned.assign(sites, 0);
    std::vector<int> idx(n, 0);
    std::int64_t site = 0;
    do {
      bool boundary = false;
      for (int i = 0; i < n; ++i) {
        idxt[site * n + i] = idx[i];
        if (idx[i] == 0 || idx[i] == S - 1) boundary = true;
      }
      if (pin_boundary && boundary) pinned[site] = 1;
      ++site;
    } while (grid.next(idx));
  }

  int nrefs() const { return pi ? pi->count() : 0; }

  double quad(const std::vector<Alg>& v) const {
    const int k = nrefs();
    double q = 0.0;
    for (int j = 0; j < k; ++j)
      for (int l = 0; l < k; ++l) q += pi->gram_inv[j * k + l] * inner(v[j], v[l]);
    return q;
  }

  double value(const RelaxState& s) const { return cell * s.sum2 - (pi ? quad(s.v) : 0.0); }

  RelaxState build(const std::vector<Group>& g) const {
    RelaxState s{LatticeForm(grid, 1), 0.0, std::vector<Alg>(nrefs())};
    const Group none{};
    const std::int64_t sites = grid.sites();
    for (std::int64_t x = 0; x < sites; ++x)
      for (int i = 0; i < n; ++i) {
        const Alg b =
            transformed_comp(A, g, x, idxt[x * n + i], st[i], S, inv_h, i, -1, none);
        s.B.at(x, i) = b;
        s.sum2 += norm2(b);
        for (int j = 0; j < nrefs(); ++j) s.v[j] += b * (cell * pi->refs[j][x * n + i]);
      }
    return s;
  }

  // Components of A^g that read the gauge at site y.
  void affected(std::int64_t y, std::vector<std::array<std::int64_t, 3>>& out) const {
    out.clear();
    for (int i = 0; i < n; ++i) {
      const int row = idxt[y * n + i];
      out.push_back({y, i, row});
      if (row > 0) out.push_back({y - st[i], i, row - 1});
      if (row == S - 2) out.push_back({y + st[i], i, S - 1});
    }
  }

  // Phi(g with g(y) := gy) - Phi(g). Large sentinel when the trial crosses a
  // branch cut of the log.
  double trial_delta(const std::vector<Group>& g, const RelaxState& s, std::int64_t y,
                     const Group& gy,
                     const std::vector<std::array<std::int64_t, 3>>& comps) const {
    const int k = nrefs();
    double d_sum2 = 0.0;
    thread_local std::vector<Alg> dv;
    dv.assign(k, Alg{});
    try {
      for (const auto& c : comps) {
        const std::int64_t x = c[0];
        const int i = static_cast<int>(c[1]);
        const int row = static_cast<int>(c[2]);
        const Alg nb = transformed_comp(A, g, x, row, st[i], S, inv_h, i, y, gy);
        const Alg ob = s.B.at(x, i);
        d_sum2 += norm2(nb) - norm2(ob);
        for (int j = 0; j < k; ++j) dv[j] += (nb - ob) * (cell * pi->refs[j][x * n + i]);
      }
    } catch (const std::runtime_error&) {
      return 1e300;
    }
    double dq = 0.0;
    if (k > 0) {
      for (int j = 0; j < k; ++j)
        for (int l = 0; l < k; ++l) {
          const double gi = pi->gram_inv[j * k + l];
          dq += gi * (2.0 * inner(dv[j], s.v[l]) + inner(dv[j], dv[l]));
        }
    }
    return cell * d_sum2 - dq;
  }

  // Central finite-difference Riemannian gradient in the left chart
  // g(y) -> exp(xi) g(y).
  void gradient(const std::vector<Group>& g, const RelaxState& s,
                std::vector<Alg>& grad) const {
    const double eps = 1e-5;
    const std::int64_t sites = grid.sites();
    grad.assign(sites, Alg{});
    std::vector<std::array<std::int64_t, 3>> comps;
    for (std::int64_t y = 0; y < sites; ++y) {
      if (pinned[y]) continue;
      affected(y, comps);
      Alg gy{};
      for (int a = 0; a < 3; ++a) {
        Alg e{};
        (a == 0 ? e.a1 : a == 1 ? e.a2 : e.a3) = eps;
        const double dp = trial_delta(g, s, y, exp_alg(e) * g[y], comps);
        const double dm = trial_delta(g, s, y, exp_alg(-e) * g[y], comps);
        const double d = (dp - dm) / (2.0 * eps);
        (a == 0 ? gy.a1 : a == 1 ? gy.a2 : gy.a3) = d;
      }
      grad[y] = gy;
    }
  }
};

std::vector<Group> random_smooth_gauge(const Grid& grid, double amp, std::uint64_t seed,
                                       const std::vector<std::uint8_t>& pinned) {
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
    if (!pinned[site]) {
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
    }
    ++site;
  } while (grid.next(idx));
  return g;
}

}  // namespace

CoulombResult coulomb_relax(const LatticeForm& A, const ProjectorSpec* pi, int max_iters,
                            double tol, int restarts, bool pin_boundary,
                            std::uint64_t seed) {
  if (A.degree != 1) throw std::invalid_argument("relaxation needs a 1-form");
  if (pi && (pi->grid.n != A.grid.n || pi->grid.S != A.grid.S))
    throw std::invalid_argument("projector grid mismatch");
  if (max_iters < 0 || tol < 0.0) throw std::invalid_argument("bad relaxation parameters");
  A.check_finite();

  Relaxer rx(A, pi, pin_boundary);
  const std::int64_t sites = A.grid.sites();

  std::vector<Group> g(sites, Group::identity());
  RelaxState state = rx.build(g);
  double phi = rx.value(state);

  std::vector<Group> best_g = g;
  double best_phi = phi;
  bool best_converged = false;

  CoulombReport report;
  report.objective_trace.push_back(phi);

  std::vector<Alg> grad;
  int iters = 0;
  int attempt = 0;
  int rises = 0;
  double eta = 0.25;

  while (iters < max_iters) {
    bool run_converged = false;
    bool stalled = false;
    while (iters < max_iters) {
      rx.gradient(g, state, grad);
      double g2 = 0.0;
      for (const auto& gy : grad) g2 += norm2(gy);
      const double gnorm = std::sqrt(rx.cell * g2);
      if (gnorm < tol) {
        run_converged = true;
        break;
      }

      bool accepted = false;
      double trial_eta = std::min(4.0 * eta, 1e3);
      for (int bt = 0; bt < 40 && !accepted; ++bt) {
        std::vector<Group> gt(sites);
        for (std::int64_t y = 0; y < sites; ++y)
          gt[y] = rx.pinned[y] ? g[y]
                               : normalized(exp_alg(grad[y] * -trial_eta) * g[y]);
        try {
          RelaxState ts = rx.build(gt);
          const double tphi = rx.value(ts);
          if (tphi <= phi - 1e-4 * trial_eta * rx.cell * g2) {
            if (tphi > phi) {
              if (++rises >= 10) {
                std::ostringstream os;
                os << "relaxation diverged; objective trace tail:";
                const std::size_t m = report.objective_trace.size();
                for (std::size_t t = m > 10 ? m - 10 : 0; t < m; ++t)
                  os << " " << report.objective_trace[t];
                throw std::runtime_error(os.str());
              }
            } else {
              rises = 0;
            }
            g.swap(gt);
            state = std::move(ts);
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
      if (!accepted) {
        stalled = true;
        break;
      }
      ++iters;
      report.objective_trace.push_back(phi);
      if (phi < best_phi) {
        best_phi = phi;
        best_g = g;
        best_converged = false;
      }
    }

    if (phi <= best_phi) {
      best_phi = phi;
      best_g = g;
      best_converged = run_converged;
    }
    if (run_converged || iters >= max_iters) break;
    if (stalled && attempt >= restarts) break;

    // Fresh smooth start; keep the best result across attempts.
    ++attempt;
    g = random_smooth_gauge(A.grid, 0.4 / attempt, seed + attempt, rx.pinned);
    state = rx.build(g);
    phi = rx.value(state);
    eta = 0.25;
    report.objective_trace.push_back(phi);
  }

  RelaxState bs = rx.build(best_g);
  CoulombResult res;
  res.gauge.grid = A.grid;
  res.gauge.g = std::move(best_g);
  res.transformed = bs.B;
  report.objective = rx.value(bs);
  const LatticeForm pB = pi ? pi->apply(bs.B) : bs.B;
  const LatticeForm div = derivative_transpose(pB);
  double r2 = 0.0;
  for (const auto& d : div.data) r2 += norm2(d);
  report.residual = std::sqrt(rx.cell * r2);
  report.iters = iters;
  report.restarts = attempt;
  report.converged = best_converged;
  res.report = std::move(report);
  return res;
}

PartialGauge glue_gauges(const std::vector<FaceGauge>& pieces, const CubeComplex& cx) {
  PartialGauge out;
  out.grid = cx.grid;
  out.g.assign(cx.grid.sites(), Group::identity());
  out.defined.assign(cx.grid.sites(), 0);
  const int n = cx.n();
  const auto st = site_strides(cx.grid);

  std::vector<int> order(pieces.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pieces[a].face < pieces[b].face; });

  std::vector<std::string> conflicts;
  std::int64_t conflict_count = 0;
  for (int pi_ : order) {
    const FaceGauge& fg = pieces[pi_];
    std::vector<int> lo(n), hi(n);
    std::int64_t count = 1;
    for (int i = 0; i < n; ++i) {
      cx.face_site_range(fg.face, i, lo[i], hi[i]);
      count *= std::max(0, hi[i] - lo[i]);
    }
    if (static_cast<std::int64_t>(fg.values.size()) != count)
      throw std::invalid_argument("face gauge has wrong number of values");
    if (count == 0) continue;

    std::vector<int> idx = lo;
    std::int64_t rank = 0;
    while (true) {
      std::int64_t site = 0;
      for (int i = 0; i < n; ++i) site += idx[i] * st[i];
      const Group& val = fg.values[rank];
      if (!out.defined[site]) {
        out.defined[site] = 1;
        out.g[site] = val;
      } else {
        const Group& own = out.g[site];
        const double d = std::sqrt((own.w - val.w) * (own.w - val.w) +
                                   (own.x - val.x) * (own.x - val.x) +
                                   (own.y - val.y) * (own.y - val.y) +
                                   (own.z - val.z) * (own.z - val.z));
        if (d > 1e-8) {
          ++conflict_count;
          if (conflicts.size() < 8) {
            std::ostringstream os;
            os << "(";
            for (int i = 0; i < n; ++i) os << (i ? "," : "") << idx[i];
            os << ")";
            conflicts.push_back(os.str());
          }
        }
      }
      ++rank;
      int i = n - 1;
      for (; i >= 0; --i) {
        if (++idx[i] < hi[i]) break;
        idx[i] = lo[i];
      }
      if (i < 0) break;
    }
  }
  if (conflict_count > 0) {
    std::ostringstream os;
    os << "incompatible boundary gauges at " << conflict_count << " site(s):";
    for (const auto& c : conflicts) os << " " << c;
    throw std::runtime_error(os.str());
  }
  return out;
}

}  // namespace weakconn
