#pragma once

#include <cstdint>
#include <vector>

#include "weakconn/faces.hpp"
#include "weakconn/grid.hpp"
#include "weakconn/su2.hpp"

namespace weakconn {

// Ordered k-subsets of {0..n-1}, lexicographic; cached per (n,k).
const std::vector<std::vector<int>>& combinations(int n, int k);
// Rank of an ascending k-subset within combinations(n, k).
int comb_rank(int n, const std::vector<int>& comb);

// Algebra-valued k-form sampled at grid sites. Data is site-major with
// C(n,k) components per site, ordered by lexicographic index combination.
struct LatticeForm {
  Grid grid;
  int degree = 0;
  std::vector<Alg> data;

  LatticeForm() = default;
  LatticeForm(const Grid& g, int k);

  int comps() const;
  Alg& at(std::int64_t site, int comb) { return data[site * comps_ + comb]; }
  const Alg& at(std::int64_t site, int comb) const { return data[site * comps_ + comb]; }
  // Site stride of one step along an axis.
  std::int64_t stride(int axis) const { return strides_[axis]; }

  void check_finite() const;  // throws on non-finite entries

 private:
  int comps_ = 1;
  std::vector<std::int64_t> strides_;
};

// Forward finite differences, one-sided backward at the top boundary,
// antisymmetrized over the output index. Exact on affine data.
LatticeForm exterior_derivative(const LatticeForm& A);

// Transpose of exterior_derivative under the uniform h^n pairing:
// <dA, B> = <A, derivative_transpose(B)> exactly. On 1-forms this is the
// discrete codifferential d* (a backward-difference divergence with sign).
LatticeForm derivative_transpose(const LatticeForm& F);

// (A^B)_{ij} = ([A_i,B_j] + [B_i,A_j]) / 2 for i < j, so the diagonal case
// reproduces [A_i, A_j] and F = dA + A^A transforms by the adjoint.
LatticeForm wedge_bracket(const LatticeForm& A, const LatticeForm& B);

// F = dA + A^A.
LatticeForm curvature(const LatticeForm& A);

// Midpoint quadrature of |F|^2 = sum_{i<j} |F_ij|^2 over the domain.
double ym_energy(const LatticeForm& F);

// Pullback to the 4-plane H(I,T): keeps components with all indices free,
// reindexed to the 4D grid of the plane's sample rows.
LatticeForm restrict_slice(const LatticeForm& A, const SlicePlane& p);

// Constant-coefficient mean of a form over a face's sample rows.
struct FaceAverage {
  FaceId face;
  std::vector<std::vector<int>> combs;  // index tuples within the face axes
  std::vector<Alg> values;
};

FaceAverage face_average(const LatticeForm& w, const FaceId& face, const CubeComplex& cx);

// L2 norm of dF + [A wedge F] for F = curvature(A); zero in the continuum.
double bianchi_residual(const LatticeForm& A);

}  // namespace weakconn
