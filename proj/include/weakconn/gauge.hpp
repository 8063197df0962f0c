#pragma once

#include <cstdint>
#include <vector>

#include "weakconn/faces.hpp"
#include "weakconn/forms.hpp"
#include "weakconn/grid.hpp"
#include "weakconn/su2.hpp"

namespace weakconn {

// One group element per grid site, site-major like LatticeForm.
struct GaugeField {
  Grid grid;
  std::vector<Group> g;

  GaugeField() = default;
  explicit GaugeField(const Grid& gr);
};

// A^g = g^{-1} dg + Ad(g^{-1}) A with the log derivative taken over the same
// stencil as exterior_derivative (forward, backward at the top row). Throws
// "gauge jump too large" when adjacent gauge values are near antipodal.
LatticeForm gauge_transform(const LatticeForm& A, const GaugeField& g);

// Integrates dg/dt = -A_axis g upward from the bottom row of the axis with
// one exponential step per cell. The axis component of A^g then vanishes
// identically at rows below the top one. g0 holds the bottom-row values in
// lexicographic order over the remaining axes; the one-argument overload
// starts from the identity.
GaugeField axial_gauge(const LatticeForm& A, int axis);
GaugeField axial_gauge(const LatticeForm& A, int axis, const std::vector<Group>& g0);

// L2-orthogonal projector onto the complement of the span of scalar
// reference 1-forms, with the Gram inverse baked in so apply() is a
// projection to roundoff even for a non-orthonormal family.
struct ProjectorSpec {
  Grid grid;
  std::vector<std::vector<double>> refs;  // [ref][site * n + axis]
  std::vector<double> gram_inv;           // row-major count x count

  int count() const { return static_cast<int>(refs.size()); }
  LatticeForm apply(const LatticeForm& B) const;
};

ProjectorSpec make_projector(const Grid& g, std::vector<std::vector<double>> refs);

// References are the constant coordinate forms dx_a for the listed axes, so
// the projector removes the mean of those components.
ProjectorSpec coordinate_projector(const Grid& g, const std::vector<int>& axes);

struct CoulombReport {
  double objective = 0.0;  // ||pi(A^g)||_{L2}^2 at the returned gauge
  double residual = 0.0;   // ||d*(pi(A^g))||_{L2}
  int iters = 0;
  int restarts = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

struct CoulombResult {
  GaugeField gauge;
  LatticeForm transformed;
  CoulombReport report;
};

// Riemannian gradient descent on ||pi(A^g)||_{L2}^2 over site-wise gauges:
// finite-difference gradient, Armijo backtracking, geodesic update
// g <- exp(-eta grad) g. Starts from the identity and falls back to smooth
// random restarts when the line search stalls; returns the best gauge seen.
// pi = nullptr means the identity projector. pin_boundary freezes boundary
// sites at the identity. Throws "relaxation diverged" if the objective rises
// on 10 consecutive accepted steps.
CoulombResult coulomb_relax(const LatticeForm& A, const ProjectorSpec* pi,
                            int max_iters, double tol, int restarts = 3,
                            bool pin_boundary = false, std::uint64_t seed = 12345);

// Gauge values over the site box of one face (see face_site_range),
// lexicographic over the box.
struct FaceGauge {
  FaceId face;
  std::vector<Group> values;
};

struct PartialGauge {
  Grid grid;
  std::vector<Group> g;
  std::vector<std::uint8_t> defined;
};

// Combines per-face gauges into one partial site field. The piece with the
// lowest FaceId owns each shared site; all pieces covering a site must agree
// within 1e-8 in quaternion distance, else "incompatible boundary gauges".
PartialGauge glue_gauges(const std::vector<FaceGauge>& pieces, const CubeComplex& cx);

}  // namespace weakconn
