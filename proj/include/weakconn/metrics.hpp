#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "weakconn/forms.hpp"
#include "weakconn/gauge.hpp"
#include "weakconn/grid.hpp"
#include "weakconn/su2.hpp"

namespace weakconn {

// Coefficient list {F_ij}_{i<j} of an algebra-valued 2-form at one point,
// stored in the same pair order as a degree-2 LatticeForm component row.
struct CurvSample {
  int n = 0;
  std::vector<Alg> f;  // n(n-1)/2 entries, pair (i,j) at comb_rank(n, {i,j})

  CurvSample() = default;
  explicit CurvSample(int dim);
  CurvSample(const LatticeForm& F, std::int64_t site);
};

// Orbit distance min over rotations R of sum_k |R f_k - f'_k|^2, solved in
// closed form: SVD of the cross-covariance with the reflection case folded
// back into SO(3) by flipping the smallest singular direction. Returns the
// distance and a group certificate g with adjoint(inverse(g), f_k) ~= f'_k;
// an all-zero F yields the identity certificate and the norm of F'.
std::pair<double, Group> d_pointwise(const CurvSample& F, const CurvSample& Fp);

// Relaxation over coordinate 4-subsets J: the closed-form minimum over the 6
// coefficients with both indices in J, combined with weight 2/((n-2)(n-3)).
// Each pair lands in (n-2)(n-3)/2 subsets, so this never exceeds d_pointwise.
double delta_pointwise(const CurvSample& F, const CurvSample& Fp);

// Pairwise dot products are a complete rotation invariant of a vector list,
// so equal Gram matrices certify conjugacy: when the Gram sup-difference is
// within tol, the closed-form minimizer is returned as witness provided its
// residual stays below tol * (1 + |F|).
struct GramResult {
  bool equivalent = false;
  std::optional<Group> witness;
};
GramResult gram_equivalence(const CurvSample& F, const CurvSample& Fp, double tol);

struct DistanceReport {
  double value = 0.0;
  GaugeField certificate;
  bool converged = false;
  std::string method;
  // delta_conn only: per transverse subset I, the integrated squared slice
  // distance whose maximum is the reported value.
  std::vector<std::pair<std::vector<int>, double>> slice_table;
};

// L2 orbit distance between 2-forms: the minimizing site-wise conjugation
// decouples, so value^2 = sum over sites of d_pointwise^2 * h^n and the
// certificate collects the per-site minimizers.
DistanceReport d_curv(const LatticeForm& F, const LatticeForm& Fp);

// Same integration with delta_pointwise; never exceeds d_curv.
DistanceReport delta_curv(const LatticeForm& F, const LatticeForm& Fp);

struct ConnOpts {
  int max_iters = 200;   // per start
  double tol = 1e-5;     // L2 gradient norm for convergence
  int starts = 4;        // identity, axial-aligned, then random smooth
  std::uint64_t seed = 12345;
  // Optional extra descent start, e.g. the restriction of an outer
  // certificate; ignored when its grid does not match.
  const GaugeField* warm_start = nullptr;
};

// min over gauges of ||gauge_transform(A, g) - Ap||_{L2} by Riemannian
// gradient descent (finite-difference gradient, Armijo backtracking,
// geodesic update) from multiple starts; the identity start caps the value
// at ||A - Ap||_{L2}. converged reflects the best start; throws
// "relaxation diverged" with a trace tail if the objective keeps rising.
DistanceReport d_conn(const LatticeForm& A, const LatticeForm& Ap,
                      const ConnOpts& opts = {});

// Sliced connection distance: for every coordinate subset I of size n-4 and
// every transverse row T, the 4d distance between the slice restrictions,
// squared and integrated over T with weight h^(n-4); value is the maximum
// over I and slice_table holds the per-I integrals. Each slice descent is
// warm-started with the restriction of one whole-grid d_conn certificate,
// which caps value at d_conn^2. n = 4 degenerates to the single whole-grid
// slice.
DistanceReport delta_conn(const LatticeForm& A, const LatticeForm& Ap,
                          const ConnOpts& opts = {});

// Upper-gradient inequality data for one transverse segment: rows t1, t2
// over the subset I must differ along one axis. The field is put in axial
// gauge along that axis first, so adjacent slice restrictions differ exactly
// by h times the mixed curvature row. Returns
//   lhs = 4d distance between the two slice restrictions,
//   rhs = Riemann sum over the segment of h * (L2 norm over the slice of the
//         full curvature),
// and lhs <= rhs holds: the identity start bounds lhs by the telescoped
// slice difference, whose per-step norm the mixed curvature block dominates.
std::pair<double, double> slice_upper_gradient_check(const LatticeForm& A,
                                                     const std::vector<int>& I,
                                                     const std::vector<int>& t1,
                                                     const std::vector<int>& t2,
                                                     const ConnOpts& opts = {});

}  // namespace weakconn
