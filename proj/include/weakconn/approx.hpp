#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "weakconn/faces.hpp"
#include "weakconn/forms.hpp"

namespace weakconn {

// Counting constant for offset selection. An offset averaged over its class
// lattice carries at most 2^{n-k} C(n,k) times the total energy on each
// k-skeleton, so c1 = 2/(1-delta) * sum_{k=4}^{n-1} 2^{n-k} C(n,k) leaves at
// least a delta-fraction of offsets passing for two forms simultaneously.
double chebyshev_c1(int n, double delta);

// Good-cube energy constant 2^{n-4} C(n,4).
double good_cube_constant(int n);

// Quadrature of |i*w|^2 over one face: components with every index among the
// face's free axes, summed over the face's sample sites, times h^dim.
double face_energy(const LatticeForm& w, const CubeComplex& cx, const FaceId& f);

// Sum of face_energy over the distinct faces whose free axes are the
// complement of I. Faces lying in a lower domain-boundary plane are excluded
// so the offset classes tile the row lattice: summing this quantity over all
// tau_I in [0,m)^{|I|} equals h^{k-n} int |w^I|^2 exactly, where w^I keeps
// the components with no index in I.
double skeleton_family_energy(const LatticeForm& w, const CubeComplex& cx,
                              const std::vector<int>& I);

// k-skeleton sum with cube multiplicity: each distinct k-face counted once
// per cube of the complex containing it, lower-boundary faces excluded.
double skeleton_energy(const LatticeForm& w, const CubeComplex& cx, int k);

struct OffsetSelection {
  std::vector<int> tau;     // chosen offset in cell units, one entry per axis
  std::vector<double> t;    // the same offset as lengths in [0, r)
  // k -> {skeleton_energy(A), skeleton_energy(F)} at the chosen offset.
  std::map<int, std::array<double, 2>> energy;
  double c1 = 0.0;
  double worst_ratio = 0.0;  // max over k and both forms of the energy ratio
  bool passed = false;       // worst_ratio <= 1
  int candidates_evaluated = 0;
  int candidates_passed = 0;
};

// Evaluates r^{n-k} skeleton_energy / (c1 |w|^2) for a lattice of candidate
// offsets and returns the offset minimizing the worst ratio over k in [4, n)
// and over both forms. candidates = 0 samples a three-per-axis offset
// lattice capped at 729 tuples; a positive count samples that many offsets
// deterministically. If no candidate passes, the best one is returned with
// passed = false and a note on stderr; full-lattice averaging guarantees a
// delta-fraction passes, so that outcome can only come from sampling or
// quadrature slack.
// pre: A degree 1 and F degree 2 on one grid with n >= 5; r = m h with m
// even (cube corners on cell boundaries, cube centers off the site lattice).
OffsetSelection select_offset(const LatticeForm& A, const LatticeForm& F,
                              double r, double delta, int candidates = 0);

// Five smallness statistics of a 4-face against a containing cube:
//   {|mean i*F|, |mean i*A|, int |i*F|^2, int |i*(F-Fc)|^2, int |i*(A-Ac)|^2}
// with thresholds {delta/r^2, delta/r, delta, delta, delta r^2}, where Fc,
// Ac are the containing cube's componentwise site means. The last two vary
// with the cube; face_stats stores the maxima over containing cubes.
struct FaceClassification {
  double r = 0.0;
  double delta = 0.0;
  std::array<double, 5> thresholds{};
  std::map<FaceId, std::array<double, 5>> face_stats;
  std::map<FaceId, bool> cube_good;  // all its 4-faces pass against it
  std::set<FaceId> bad_faces;        // downward closure of the bad cubes
  std::int64_t n_cubes = 0;
  std::int64_t n_bad = 0;
  // |F|^2/(delta r^{n-4}) + |A|^2/(delta^2 r^{n-2}) + 1/(delta r^{n-4}).
  double bound_rhs = 0.0;
  double bound_constant = 0.0;  // n_bad / bound_rhs
};

FaceClassification classify_faces(const LatticeForm& A, const LatticeForm& F,
                                  const CubeComplex& cx, double delta);

// A face of any dimension is good when no containing cube is bad.
bool face_is_good(const FaceClassification& cls, const FaceId& f);

// Interior extension with a linear background. Builds
//   B_j(x) = Abar_j + 1/2 sum_i Fbar_{ij} x_i
// on the input grid (dB = Fbar exactly; B is affine) and minimizes
// |d(C-B)|^2 + |dT(C-B)|^2 by conjugate gradients on the Hodge system,
// matrix-free, to relative residual 1e-8. Fixed values are the tangential
// components at boundary-layer sites (index 0 or S-1 along any axis), read
// from boundary_A and copied verbatim into the output; every other value is
// an unknown, including facet-normal components on the layer.
// boundary_A: degree 1 on a grid with 2 <= n <= 8 and S >= 3. Fbar has
// C(n,2) entries in index-pair order, Abar has n. Throws on a stalled
// solve with the residual in the message.
LatticeForm harmonic_extend(const LatticeForm& boundary_A,
                            const std::vector<Alg>& Fbar,
                            const std::vector<Alg>& Abar);

// Pullback of the boundary trace under the cube-radial projection
// y = x / |x|_inf. Boundary-layer values stand for the form on the facet
// planes x_c = +-1; tangential positions interpolate multilinearly among the
// layer samples, clamped beyond the outermost ones. With t = |x|_inf and c
// the projecting axis (smallest index on ties),
//   out_j = A_j(y)/t             for j != c,
//   out_c = -sign(x_c)/t^2 sum_{b != c} A_b(y) x_b.
// Tangential components at the layer are copied verbatim.
// pre: degree 1; S even and >= 4 (keeps the center off the site lattice).
LatticeForm radial_extend(const LatticeForm& boundary_A);

struct ScheduleEntry {
  double r = 0.0;
  double delta = 0.0;
};

// Per-cube error ledger. Good cubes: lhs are |Atilde - Ac| and |Ftilde - Fc|
// over the cube with the face-averaged constants Ac, Fc; rhs are
//   a_rhs = S_A / c_n,
//   f_rhs = S_F / c_n + |Fc| S_A / c_n + Q_F,
// where S_A, S_F sum the 4-faces' L2 deviations from their own means, Q_F
// sums the 4-faces' squared L2 norms and c_n = good_cube_constant(n).
// Bad cubes: lhs are |Atilde|, |Ftilde| over the cube; rhs are c_n times the
// summed 4-face L2 norms.
struct CubeLedger {
  FaceId cube;
  bool good = false;
  double a_lhs = 0.0, a_rhs = 0.0;
  double f_lhs = 0.0, f_rhs = 0.0;
};

struct ExtensionResult {
  double r = 0.0;
  double delta = 0.0;
  std::vector<int> tau;
  LatticeForm A_tilde;  // assembled approximant (mollified when enabled)
  LatticeForm F_tilde;  // its curvature
  std::vector<FaceId> singular;  // dual complex of the bad subcomplex
  std::vector<CubeLedger> cube_errors;
  double err_A = 0.0, err_F = 0.0;          // final L2 errors against inputs
  double err_A_raw = 0.0, err_F_raw = 0.0;  // before mollification
  double trace_residual = 0.0;  // max deviation on the kept 4-skeleton
  std::int64_t n_cubes = 0;
  std::int64_t n_bad = 0;
  std::int64_t skipped = 0;  // clipped faces left at the input values
  double bad_volume = 0.0;   // r^n n_bad
  double seconds = 0.0;      // wall time for this entry
  bool ok = true;
  std::string message;  // diagnostics when ok is false
};

struct ApproxOpts {
  bool mollify = true;
  int offset_candidates = 0;
};

// For each schedule entry: offset selection, face classification, then
// extension level by level from dimension 5 up to n. The 4-skeleton samples
// keep the input values; each good face gets the interior solve with its
// recursively face-averaged constants, each bad face the radial pullback.
// Faces clipped by the domain boundary are skipped (input kept). Finally the
// approximant is blended with a one-cell box average away from the singular
// set (kernel width 0 within four cells of it, so skeleton traces near the
// singular set are untouched; no smoothing at all when no cube is bad).
// A failing entry is reported with ok = false; later entries still run.
// pre: A degree 1, 5 <= n <= 8; r strictly decreasing with r/delta
// non-increasing; each r = m h with m even, 2 <= m <= S.
std::vector<ExtensionResult> approximate(const LatticeForm& A,
                                         const std::vector<ScheduleEntry>& schedule,
                                         const ApproxOpts& opts = {});

}  // namespace weakconn
