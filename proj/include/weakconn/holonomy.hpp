#pragma once

#include <cstdint>
#include <vector>

#include "weakconn/forms.hpp"
#include "weakconn/gauge.hpp"
#include "weakconn/grid.hpp"
#include "weakconn/su2.hpp"

namespace weakconn {

// Ordered site walk; consecutive sites must be adjacent along one axis.
struct LatticePath {
  std::vector<std::int64_t> sites;
};

// Counterclockwise rectangle from `corner`: ki steps up axis i, kj up axis j,
// then back down. Throws when the rectangle leaves the grid.
LatticePath rect_loop(const Grid& g, std::int64_t corner, int i, int j, int ki, int kj);

// Ordered product of per-edge exponentials, earliest edge leftmost. Each edge
// uses the field value at its lower endpoint with a traversal sign, so
// reversal inverts the product exactly. Throws on non-adjacent steps.
Group path_ordered_exp(const LatticeForm& A, const LatticePath& path);

// log of the holonomy around the eps-square at p in the (i, j) plane, divided
// by eps^2; first-order estimate of the ij curvature component at p. eps must
// be a positive multiple of the grid spacing and the square must fit.
Alg loop_curvature(const LatticeForm& A, std::int64_t p, int i, int j, double eps);

struct ReconstructReport {
  // max over unit plaquettes of the holonomy gap |P(A) - P(B)|; zero means
  // the two fields are gauge-related on the lattice and the reconstruction is
  // path independent.
  double defect = 0.0;
};

struct ReconstructResult {
  GaugeField gauge;
  ReconstructReport report;
};

// g(x) = P(st_x, A)^{-1} P(st_x, B) over the lexicographic staircase path
// st_x from basepoint to x, so g(basepoint) = id and gauge_transform(A, g)
// approximates B up to O(h) plus the reported defect.
ReconstructResult reconstruct_gauge(const LatticeForm& A, const LatticeForm& B,
                                    std::int64_t basepoint);

}  // namespace weakconn
