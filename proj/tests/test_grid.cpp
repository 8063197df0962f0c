#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "weakconn/faces.hpp"
#include "weakconn/grid.hpp"

using namespace weakconn;

namespace {

long binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  long v = 1;
  for (int i = 0; i < k; ++i) v = v * (n - i) / (i + 1);
  return v;
}

}  // namespace

TEST_CASE("grid indexing round trip, coords and rows") {
  Grid g(3, 4);
  CHECK(g.sites() == 64);
  CHECK(g.h == doctest::Approx(0.5));

  std::vector<int> idx{0, 0, 0}, back;
  std::int64_t count = 0;
  do {
    const std::int64_t s = g.index(idx);
    CHECK(s == count);
    g.unpack(s, back);
    CHECK(back == idx);
    ++count;
  } while (g.next(idx));
  CHECK(count == 64);

  CHECK(g.coord(0) == doctest::Approx(-0.75));
  CHECK(g.coord(3) == doctest::Approx(0.75));
  CHECK(g.row_of(-0.75) == 0);
  CHECK(g.row_of(0.6) == 3);
  CHECK(g.row_of(-1.0) == 0);
  CHECK(g.row_of(1.0) == 3);

  CHECK_THROWS_AS(g.index({0, 0, 4}), std::out_of_range);
  CHECK_THROWS_AS(Grid(0, 4), std::invalid_argument);
}

TEST_CASE("single-cube face counts for every dimension") {
  // r = 2 with zero offset covers the domain with one cube.
  Grid g4(4, 8);
  CubeComplex c4(g4, 2.0, std::vector<double>(4, 0.0));
  CHECK(enumerate_faces(c4, 4).size() == 1);
  CHECK(enumerate_faces(c4, 3).size() == 8);

  Grid g5(5, 4);
  CubeComplex c5(g5, 2.0, std::vector<double>(5, 0.0));
  CHECK(enumerate_faces(c5, 4).size() == 10);
  for (int k = 0; k <= 5; ++k)
    CHECK(static_cast<long>(enumerate_faces(c5, k).size()) == binom(5, k) * (1L << (5 - k)));

  CHECK_THROWS_AS(enumerate_faces(c5, 6), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_faces(c5, -1), std::invalid_argument);
}

TEST_CASE("aligned multi-cube complex deduplicates shared faces") {
  // Two cubes per axis: free axes give 2 spans, fixed axes give 3 planes.
  Grid g(4, 8);
  CubeComplex cx(g, 1.0, std::vector<double>(4, 0.0));
  for (int k = 0; k <= 4; ++k) {
    long expect = binom(4, k);
    for (int i = 0; i < k; ++i) expect *= 2;
    for (int i = 0; i < 4 - k; ++i) expect *= 3;
    CHECK(static_cast<long>(enumerate_faces(cx, k).size()) == expect);
  }

  // No face is used by more than 2^{n-k} cubes.
  for (int k = 0; k <= 4; ++k) {
    std::map<FaceId, int> uses;
    std::vector<int> alpha = cx.alpha_lo;
    do {
      const FaceId cube = cx.cube(alpha);
      std::set<FaceId> kfaces{cube};
      for (int d = 4; d > k; --d) {
        std::set<FaceId> next;
        for (const auto& f : kfaces)
          for (const auto& s : faces_of_cube(f)) next.insert(s);
        kfaces.swap(next);
      }
      for (const auto& f : kfaces) ++uses[f];
    } while (cx.next_cube(alpha));
    for (const auto& [f, c] : uses) CHECK(c <= (1 << (4 - k)));
  }
}

TEST_CASE("offset complexes keep clipped cubes and flag them") {
  Grid g(4, 8);
  CubeComplex cx(g, 1.0, {0.25, 0.0, 0.0, 0.0});
  CHECK(cx.tau == std::vector<int>{1, 0, 0, 0});
  const auto cubes = enumerate_faces(cx, 4);
  CHECK(cubes.size() == 24);  // 3 columns along axis 0, 2 along the rest
  int clipped = 0;
  for (const auto& c : cubes) clipped += cx.face_clipped(c) ? 1 : 0;
  CHECK(clipped == 16);

  const auto off = cx.offset();
  CHECK(off[0] == doctest::Approx(0.25));
  CHECK(off[1] == doctest::Approx(0.0));

  CHECK_THROWS_AS(CubeComplex(g, 0.3, std::vector<double>(4, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(CubeComplex(g, 1.0, {0.1, 0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("faces_of_cube emits 2(k+1) faces of a (k+1)-cube") {
  FaceId c5;
  c5.axes = {0, 1, 2, 3, 4};
  c5.corner = {0, 0, 0, 0, 0, 0};  // inside an n=6 complex
  CHECK(faces_of_cube(c5).size() == 10);

  FaceId c6;
  c6.axes = {0, 1, 2, 3, 4, 5};
  c6.corner = {0, 0, 0, 0, 0, 0};
  CHECK(faces_of_cube(c6).size() == 12);

  FaceId edge;
  edge.axes = {2};
  edge.corner = {0, 0, 0, 0};
  const auto verts = faces_of_cube(edge);
  CHECK(verts.size() == 2);
  CHECK(verts[0].dim() == 0);
  CHECK(verts[0].corner == std::vector<int>{0, 0, 0, 0});
  CHECK(verts[1].corner == std::vector<int>{0, 0, 2, 0});
}

TEST_CASE("dual complex of simple bad sets") {
  Grid g5(5, 4);
  CubeComplex c5(g5, 2.0, std::vector<double>(5, 0.0));

  CHECK(dual_complex({}, c5).empty());

  // One bad 5-cube: the dual is its center point.
  const FaceId top5 = c5.cube({0, 0, 0, 0, 0});
  const auto dual5 = dual_complex(close_complex({top5}), c5);
  REQUIRE(dual5.size() == 1);
  CHECK(dual5.begin()->dim() == 0);
  CHECK(dual5.begin()->edge_hu == 1);
  CHECK(dual5.begin()->corner == std::vector<int>{1, 1, 1, 1, 1});

  // Missing subfaces are rejected.
  CHECK_THROWS_AS(dual_complex({top5}, c5), std::invalid_argument);

  // One bad 6-cube: center point plus a segment from every 5-face center,
  // matching the cone-over-face-centers structure.
  Grid g6(6, 4);
  CubeComplex c6(g6, 2.0, std::vector<double>(6, 0.0));
  const auto dual6 = dual_complex(close_complex({c6.cube({0, 0, 0, 0, 0, 0})}), c6);
  int pts = 0, segs = 0;
  const std::vector<int> center{1, 1, 1, 1, 1, 1};
  for (const auto& d : dual6) {
    if (d.dim() == 0) ++pts;
    if (d.dim() == 1) {
      ++segs;
      // every segment has the cube center as one endpoint
      bool touches = false;
      for (const auto& v : faces_of_cube(d))
        if (v.corner == center) touches = true;
      CHECK(touches);
    }
  }
  CHECK(pts == 13);   // 12 bad 5-face centers and the cube center
  CHECK(segs == 12);
  CHECK(dual6.size() == 25);

  // Two disjoint bad 5-cubes in a finer complex: two center points only.
  Grid g8(5, 8);
  CubeComplex cf(g8, 1.0, std::vector<double>(5, 0.0));
  const FaceId a = cf.cube({0, 0, 0, 0, 0});
  const FaceId b = cf.cube({1, 0, 0, 0, 0});
  const auto dual2 = dual_complex(close_complex({a, b}), cf);
  REQUIRE(dual2.size() == 2);
  for (const auto& d : dual2) CHECK(d.dim() == 0);
}

TEST_CASE("slice sites partition the grid and round trip 4D ranks") {
  Grid g(5, 4);
  CubeComplex cx(g, 1.0, std::vector<double>(5, 0.0));

  std::set<std::int64_t> seen;
  for (int row = 0; row < 4; ++row) {
    SlicePlane p{{4}, {g.coord(row)}};
    const auto sl = slice_sites(cx, p);
    CHECK(sl.sites.size() == 256);
    CHECK(sl.fixed_rows == std::vector<int>{row});
    CHECK(sl.free_axes == std::array<int, 4>{0, 1, 2, 3});
    std::vector<int> idx;
    for (std::int64_t rank = 0; rank < static_cast<std::int64_t>(sl.sites.size()); ++rank) {
      CHECK(seen.insert(sl.sites[rank]).second);
      g.unpack(sl.sites[rank], idx);
      CHECK(idx[4] == row);
      const auto loc = sl.unrank4(rank);
      for (int a = 0; a < 4; ++a) CHECK(idx[sl.free_axes[a]] == loc[a]);
      CHECK(sl.rank4(loc) == rank);
    }
  }
  CHECK(static_cast<std::int64_t>(seen.size()) == g.sites());

  // n = 4: the empty fixed set returns every site in site order.
  Grid g4(4, 3);
  CubeComplex c4(g4, 2.0, std::vector<double>(4, 0.0));
  const auto all = slice_sites(c4, SlicePlane{{}, {}});
  CHECK(static_cast<std::int64_t>(all.sites.size()) == g4.sites());
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(all.sites.size()); ++i)
    CHECK(all.sites[i] == i);

  CHECK_THROWS_AS(slice_sites(cx, SlicePlane{{4}, {1.5}}), std::invalid_argument);
  CHECK_THROWS_AS(slice_sites(cx, SlicePlane{{4, 3}, {0.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("face geometry: spans, site ranges and minus-side rows") {
  Grid g(4, 8);  // h = 0.25
  CubeComplex cx(g, 1.0, std::vector<double>(4, 0.0));

  const FaceId c = cx.cube({0, 0, 0, 0});  // [-1,0]^4
  CHECK(cx.face_lo(c, 0) == doctest::Approx(-1.0));
  CHECK(cx.face_hi(c, 0) == doctest::Approx(0.0));

  int lo = -1, hi = -1;
  cx.face_site_range(c, 0, lo, hi);
  CHECK(lo == 0);
  CHECK(hi == 4);

  // 3-face fixed on axis 0 at x0 = 0 samples the minus-side row (index 3).
  FaceId f = faces_of_cube(c)[1];  // upper face along axis 0
  CHECK(f.axes == std::vector<int>{1, 2, 3});
  cx.face_site_range(f, 0, lo, hi);
  CHECK(lo == 3);
  CHECK(hi == 4);

  // On the lower domain boundary the inside row is used instead.
  FaceId fl = faces_of_cube(c)[0];
  cx.face_site_range(fl, 0, lo, hi);
  CHECK(lo == 0);
  CHECK(hi == 1);

  // Clipped cube: in-domain site range only.
  CubeComplex off(g, 1.0, {0.25, 0.0, 0.0, 0.0});
  std::vector<int> alpha = off.alpha_lo;
  const FaceId cc = off.cube(alpha);  // spans [-1.75, -0.75] along axis 0
  off.face_site_range(cc, 0, lo, hi);
  CHECK(lo == 0);
  CHECK(hi == 1);
}
