#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"
#include "weakconn/holonomy.hpp"

using namespace weakconn;

namespace {

double quat_dist(const Group& a, const Group& b) {
  return std::sqrt((a.w - b.w) * (a.w - b.w) + (a.x - b.x) * (a.x - b.x) +
                   (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

double l2_norm(const LatticeForm& f) {
  double cell = 1.0;
  for (int i = 0; i < f.grid.n; ++i) cell *= f.grid.h;
  double s = 0.0;
  for (const auto& v : f.data) s += norm2(v);
  return std::sqrt(cell * s);
}

// Random staircase-free walk: repeatedly steps along random axes, biased to
// stay inside the grid.
LatticePath random_walk(const Grid& g, std::int64_t start, int steps,
                        std::mt19937_64& rng) {
  std::vector<std::int64_t> st(g.n, 1);
  for (int i = g.n - 2; i >= 0; --i) st[i] = st[i + 1] * g.S;
  std::uniform_int_distribution<int> ax(0, g.n - 1);
  std::uniform_int_distribution<int> dr(0, 1);
  LatticePath p;
  p.sites.push_back(start);
  std::vector<int> idx(g.n);
  g.unpack(start, idx);
  for (int t = 0; t < steps; ++t) {
    const int a = ax(rng);
    int d = dr(rng) ? 1 : -1;
    if (idx[a] + d < 0 || idx[a] + d >= g.S) d = -d;
    idx[a] += d;
    p.sites.push_back(p.sites.back() + d * st[a]);
  }
  return p;
}

}  // namespace

TEST_CASE("path products: trivial, single edge, reversal, concatenation") {
  const Grid g(3, 6);
  std::mt19937_64 rng(401);

  const LatticeForm Z(g, 1);
  const LatticePath walk = random_walk(g, g.index({2, 3, 1}), 40, rng);
  CHECK(quat_dist(path_ordered_exp(Z, walk), Group::identity()) < 1e-14);

  // single edge with a constant component: one factor, backward inverts
  const double c = 0.8;
  LatticeForm A(g, 1);
  for (std::int64_t s = 0; s < g.sites(); ++s) A.at(s, 0) = Alg{c, 0.0, 0.0};
  LatticePath fwd;
  fwd.sites = {g.index({2, 3, 1}), g.index({3, 3, 1})};
  const Group want = exp_alg(Alg{g.h * c, 0.0, 0.0});
  CHECK(quat_dist(path_ordered_exp(A, fwd), want) < 1e-14);
  LatticePath bwd;
  bwd.sites = {fwd.sites[1], fwd.sites[0]};
  CHECK(quat_dist(path_ordered_exp(A, bwd), inverse(want)) < 1e-14);

  const auto mf = testutil::random_modes(3, 3, rng, 0.6);
  const LatticeForm R = testutil::sample_form(mf, g, 1);
  const Group p = path_ordered_exp(R, walk);
  LatticePath rev;
  rev.sites.assign(walk.sites.rbegin(), walk.sites.rend());
  CHECK(quat_dist(path_ordered_exp(R, rev), inverse(p)) < 1e-13);

  // concatenation at the product level
  LatticePath left, right;
  left.sites.assign(walk.sites.begin(), walk.sites.begin() + 21);
  right.sites.assign(walk.sites.begin() + 20, walk.sites.end());
  const Group join = path_ordered_exp(R, left) * path_ordered_exp(R, right);
  CHECK(quat_dist(join, p) < 1e-13);

  LatticePath broken;
  broken.sites = {g.index({0, 0, 0}), g.index({1, 1, 0})};
  CHECK_THROWS_WITH_AS(path_ordered_exp(R, broken),
                       "path steps must join adjacent sites", std::invalid_argument);

  // long products stay on the unit sphere through periodic renormalization
  const LatticePath marathon = random_walk(g, g.index({3, 3, 3}), 5000, rng);
  CHECK(std::abs(quat_norm(path_ordered_exp(R, marathon)) - 1.0) < 1e-12);
}

TEST_CASE("abelian loops accumulate the enclosed discrete flux exactly") {
  const Grid g(2, 12);
  std::mt19937_64 rng(409);
  auto mf = testutil::random_modes(2, 2, rng, 0.4);
  LatticeForm A = testutil::sample_form(mf, g, 1);
  for (auto& v : A.data) {
    v.a2 = 0.0;
    v.a3 = 0.0;
  }
  const LatticeForm dA = exterior_derivative(A);

  for (auto [ci, cj, ki, kj] : {std::array<int, 4>{1, 2, 3, 2},
                                std::array<int, 4>{4, 5, 4, 4},
                                std::array<int, 4>{0, 3, 2, 5}}) {
    const std::int64_t corner = g.index({ci, cj});
    const LatticePath loop = rect_loop(g, corner, 0, 1, ki, kj);
    double flux = 0.0;
    for (int a = 0; a < ki; ++a)
      for (int b = 0; b < kj; ++b)
        flux += dA.at(g.index({ci + a, cj + b}), 0).a1 * g.h * g.h;
    const Group got = path_ordered_exp(A, loop);
    CHECK(quat_dist(got, exp_alg(Alg{flux, 0.0, 0.0})) < 1e-12);
  }

  // the unit-coefficient field x_0 dx_1 has discrete curvature exactly one
  LatticeForm U(g, 1);
  std::vector<int> idx(2, 0);
  std::int64_t site = 0;
  do {
    U.at(site, 1) = Alg{g.coord(idx[0]), 0.0, 0.0};
    ++site;
  } while (g.next(idx));
  const Alg lc = loop_curvature(U, g.index({3, 4}), 0, 1, 3.0 * g.h);
  CHECK(std::abs(lc.a1 - 1.0) < 1e-12);
  CHECK(std::abs(lc.a2) + std::abs(lc.a3) < 1e-14);
}

TEST_CASE("loop curvature approaches the curvature of the field") {
  std::mt19937_64 rng(419);
  const auto mf = testutil::random_modes(3, 3, rng, 0.4);
  const Grid g(3, 24);
  const LatticeForm A = testutil::sample_form(mf, g, 1);
  const LatticeForm F = curvature(A);
  const std::int64_t p = g.index({9, 10, 11});

  for (auto [i, j] : {std::pair<int, int>{0, 1}, std::pair<int, int>{1, 2}}) {
    const int comb = comb_rank(3, {i, j});
    const Alg ref = F.at(p, comb);
    const double e1 = norm(loop_curvature(A, p, i, j, 4.0 * g.h) - ref);
    const double e2 = norm(loop_curvature(A, p, i, j, 2.0 * g.h) - ref);
    CAPTURE(i);
    CAPTURE(j);
    CAPTURE(e1);
    CAPTURE(e2);
    // first-order decay at least; corner-anchored sampling can reach second
    CHECK(e1 > 1e-6);
    CHECK(e1 / e2 > 1.5);
    CHECK(e1 / e2 < 4.8);
  }

  CHECK(norm(loop_curvature(LatticeForm(g, 1), p, 0, 1, g.h)) == 0.0);
  CHECK_THROWS_AS(loop_curvature(A, p, 0, 1, 1.7 * g.h), std::invalid_argument);
  CHECK_THROWS_WITH_AS(loop_curvature(A, g.index({22, 0, 0}), 0, 1, 4.0 * g.h),
                       "loop leaves the domain", std::invalid_argument);
}

TEST_CASE("path products are gauge covariant to first order") {
  std::mt19937_64 rng(421);
  const auto mfa = testutil::random_modes(3, 3, rng, 0.4);
  const auto mfg = testutil::random_modes(3, 1, rng, 0.5);

  double err[2];
  int pass = 0;
  for (int S : {8, 16}) {
    const Grid g(3, S);
    const LatticeForm A = testutil::sample_form(mfa, g, 1);
    GaugeField gf(g);
    gf.g = testutil::sample_gauge(mfg, g);
    const LatticeForm T = gauge_transform(A, gf);

    // fixed continuum staircase: half a side along axis 0 then axis 1
    LatticePath path;
    std::vector<int> idx = {S / 4, S / 4, S / 2};
    path.sites.push_back(g.index(idx));
    for (int t = 0; t < S / 2; ++t) {
      ++idx[0];
      path.sites.push_back(g.index(idx));
    }
    for (int t = 0; t < S / 2; ++t) {
      ++idx[1];
      path.sites.push_back(g.index(idx));
    }

    const Group lhs = path_ordered_exp(T, path);
    const Group rhs = inverse(gf.g[path.sites.front()]) * path_ordered_exp(A, path) *
                      gf.g[path.sites.back()];
    err[pass++] = quat_dist(lhs, rhs);
  }
  CAPTURE(err[0]);
  CAPTURE(err[1]);
  CHECK(err[0] > 1e-6);
  CHECK(err[1] < 0.75 * err[0]);
}

TEST_CASE("reconstruct gauge recovers a known transform and reports defects") {
  std::mt19937_64 rng(431);
  const auto mfa = testutil::random_modes(3, 3, rng, 0.4);
  const auto mfg = testutil::random_modes(3, 1, rng, 0.4);

  SUBCASE("identical fields give the identity gauge with zero defect") {
    const Grid g(3, 6);
    const LatticeForm A = testutil::sample_form(mfa, g, 1);
    const ReconstructResult res = reconstruct_gauge(A, A, g.index({1, 2, 3}));
    CHECK(res.report.defect == 0.0);
    for (const auto& q : res.gauge.g) CHECK(quat_dist(q, Group::identity()) < 1e-12);
  }

  SUBCASE("gauge-related fields are reconstructed to first order") {
    double gerr[2], berr[2];
    int pass = 0;
    for (int S : {8, 16}) {
      const Grid g(3, S);
      const std::int64_t base = g.index({1, 1, 1});
      const LatticeForm A = testutil::sample_form(mfa, g, 1);

      GaugeField g0(g);
      g0.g = testutil::sample_gauge(mfg, g);
      const Group fix = inverse(g0.g[base]);
      for (auto& q : g0.g) q = q * fix;  // pin the basepoint to the identity
      const LatticeForm B = gauge_transform(A, g0);

      const ReconstructResult res = reconstruct_gauge(A, B, base);
      double worst = 0.0;
      for (std::int64_t s = 0; s < g.sites(); ++s)
        worst = std::max(worst, quat_dist(res.gauge.g[s], g0.g[s]));
      gerr[pass] = worst;

      LatticeForm diff = gauge_transform(A, res.gauge);
      for (std::size_t e = 0; e < diff.data.size(); ++e)
        diff.data[e] -= B.data[e];
      berr[pass] = l2_norm(diff);
      ++pass;
    }
    CAPTURE(gerr[0]);
    CAPTURE(gerr[1]);
    CAPTURE(berr[0]);
    CAPTURE(berr[1]);
    CHECK(gerr[0] > 1e-6);
    CHECK(gerr[1] < 0.75 * gerr[0]);
    CHECK(berr[1] < 0.75 * berr[0]);
  }

  SUBCASE("unrelated fields leave a visible defect") {
    const Grid g(3, 6);
    const LatticeForm A = testutil::sample_form(mfa, g, 1);
    const auto mfb = testutil::random_modes(3, 3, rng, 0.4);
    const LatticeForm B = testutil::sample_form(mfb, g, 1);
    const ReconstructResult res = reconstruct_gauge(A, B, 0);
    CHECK(res.report.defect > 1e-4);
  }
}
