#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "weakconn/grid.hpp"

namespace weakconn {

// Axis-aligned cube on the refined half-scale lattice of a CubeComplex.
// `axes` lists the free axes ascending; `corner` is the lower corner in units
// of r/2 relative to the complex anchor (one entry per axis, fixed axes give
// the plane position); `edge_hu` is the edge length in the same units: 2 for
// faces of the r-cubeulation, 1 for dual-complex cubes. Integer fields make
// equality exact.
struct FaceId {
  std::vector<int> axes;
  std::vector<int> corner;
  int edge_hu = 2;

  int dim() const { return static_cast<int>(axes.size()); }
  bool is_free(int axis) const;
  // Face center in corner units, doubled so it stays integral.
  std::vector<int> center2() const;

  bool operator==(const FaceId& o) const {
    return edge_hu == o.edge_hu && axes == o.axes && corner == o.corner;
  }
  bool operator!=(const FaceId& o) const { return !(*this == o); }
  bool operator<(const FaceId& o) const;
};

// Cubeulation of [-1,1]^n by cubes of edge r = m*h anchored at the domain
// corner: cube alpha spans x_i in [-1 + (tau_i + m alpha_i) h, ... + r].
// Offsets live on the site lattice so cube and face boundaries always fall on
// cell boundaries. Cubes are enumerated when their interior meets the open
// domain; cubes reaching outside are kept and flagged clipped.
struct CubeComplex {
  Grid grid;
  double r = 0.0;
  int m = 0;                // sites per cube edge, r = m h
  std::vector<int> tau;     // offset in h units, each in [0, m)
  std::vector<int> alpha_lo, alpha_hi;  // inclusive cube index range per axis

  CubeComplex() = default;
  CubeComplex(const Grid& g, int m_, std::vector<int> tau_);
  // Snaps r and t to the site lattice; throws if they do not land on it.
  CubeComplex(const Grid& g, double r_, const std::vector<double>& t_abs);

  int n() const { return grid.n; }
  // Offset of the cubeulation as an absolute point of [0,r)^n.
  std::vector<double> offset() const;

  FaceId cube(const std::vector<int>& alpha) const;
  // Lower/upper coordinate of a face along one axis (equal on fixed axes).
  double face_lo(const FaceId& f, int axis) const;
  double face_hi(const FaceId& f, int axis) const;
  bool face_meets_domain(const FaceId& f) const;
  bool face_clipped(const FaceId& f) const;

  // Site index range [lo, hi) covered by the face along one axis, clipped to
  // the domain. Fixed axes use the minus-side sample row (the inside row on
  // the lower domain boundary) so offset-averaged row sums tile the grid.
  void face_site_range(const FaceId& f, int axis, int& lo, int& hi) const;

  // Iterate cube indices; returns false when exhausted. Start with
  // alpha = alpha_lo.
  bool next_cube(std::vector<int>& alpha) const;
};

// All distinct k-faces of the cubeulation meeting [-1,1]^n, each once.
std::vector<FaceId> enumerate_faces(const CubeComplex& cx, int k);

// The 2(k+1) k-faces of a (k+1)-cube. Pure cube combinatorics, no domain
// filtering.
std::vector<FaceId> faces_of_cube(const FaceId& c);

// Downward closure: the input faces plus all their subfaces of every
// dimension.
std::set<FaceId> close_complex(const std::vector<FaceId>& faces);

// Dual complex of a downward-closed set of cubeulation faces: one half-scale
// cube spanned by the centers of F and C for every pair F <= C of members of
// dimension >= 5. A single bad 5-face contributes exactly its center point.
// Throws if `bad` is not closed under taking faces.
std::set<FaceId> dual_complex(const std::set<FaceId>& bad, const CubeComplex& cx);

// Coordinate 4-plane H(I,T): x_i = T_i for the fixed axes i in I, |I| = n-4.
struct SlicePlane {
  std::vector<int> I;
  std::vector<double> T;
};

// Sites of a slice in lexicographic order of the free-axis indices (ascending
// free axes, last fastest), so positions in `sites` are the 4D local ranks.
struct SliceSites {
  std::array<int, 4> free_axes{};
  std::vector<int> fixed_rows;  // snapped row per axis of I
  std::vector<std::int64_t> sites;
  int S = 0;

  std::int64_t rank4(const std::array<int, 4>& idx4) const;
  std::array<int, 4> unrank4(std::int64_t rank) const;
};

SliceSites slice_sites(const CubeComplex& cx, const SlicePlane& p);

}  // namespace weakconn
