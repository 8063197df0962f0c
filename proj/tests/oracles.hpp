#pragma once

// Independent reference implementations used only by tests. The library
// represents su(2) as R^3 and SU(2) as unit quaternions; everything here goes
// through explicit 2x2 complex matrices instead, so agreement is evidence and
// not tautology.

#include <array>
#include <complex>

#include "weakconn/su2.hpp"

namespace oracle {

using C = std::complex<double>;
using Mat2 = std::array<C, 4>;  // row major: [a b; c d]

inline Mat2 mul(const Mat2& A, const Mat2& B) {
  return {A[0] * B[0] + A[1] * B[2], A[0] * B[1] + A[1] * B[3],
          A[2] * B[0] + A[3] * B[2], A[2] * B[1] + A[3] * B[3]};
}

inline Mat2 add(const Mat2& A, const Mat2& B) {
  return {A[0] + B[0], A[1] + B[1], A[2] + B[2], A[3] + B[3]};
}

inline Mat2 scale(const Mat2& A, C s) { return {A[0] * s, A[1] * s, A[2] * s, A[3] * s}; }

inline Mat2 dagger(const Mat2& A) {
  return {std::conj(A[0]), std::conj(A[2]), std::conj(A[1]), std::conj(A[3])};
}

inline C trace(const Mat2& A) { return A[0] + A[3]; }

inline double frob2(const Mat2& A) {
  double s = 0.0;
  for (const auto& e : A) s += std::norm(e);
  return s;
}

// w + ix + jy + kz -> [[w + ix, y + iz], [-y + iz, w - ix]]; with this basis
// the map is a ring homomorphism (i*j = k on both sides).
inline Mat2 to_matrix(const weakconn::Group& g) {
  return {C(g.w, g.x), C(g.y, g.z), C(-g.y, g.z), C(g.w, -g.x)};
}

// Pure-imaginary specialization: (a1,a2,a3) -> [[i a1, a2 + i a3], [-a2 + i a3, -i a1]].
inline Mat2 to_matrix(const weakconn::Alg& v) {
  return {C(0, v.a1), C(v.a2, v.a3), C(-v.a2, v.a3), C(0, -v.a1)};
}

inline weakconn::Alg to_alg(const Mat2& A) {
  return {A[0].imag(), A[1].real(), A[1].imag()};
}

// Matrix exponential by plain power series; fine for the norms tests use.
inline Mat2 exp_series(const Mat2& A) {
  Mat2 acc = {C(1), C(0), C(0), C(1)};
  Mat2 term = {C(1), C(0), C(0), C(1)};
  for (int k = 1; k <= 40; ++k) {
    term = scale(mul(term, A), C(1.0 / k));
    acc = add(acc, term);
  }
  return acc;
}

inline Mat2 conjugate(const Mat2& g, const Mat2& V) {
  return mul(mul(g, V), dagger(g));  // g unitary, so dagger is the inverse
}

}  // namespace oracle
