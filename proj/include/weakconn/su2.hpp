#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace weakconn {

// su(2) element as coefficients of (i, j, k) in the imaginary quaternions.
struct Alg {
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;

  Alg() = default;
  Alg(double x, double y, double z) : a1(x), a2(y), a3(z) {}

  Alg operator+(const Alg& o) const { return {a1 + o.a1, a2 + o.a2, a3 + o.a3}; }
  Alg operator-(const Alg& o) const { return {a1 - o.a1, a2 - o.a2, a3 - o.a3}; }
  Alg operator-() const { return {-a1, -a2, -a3}; }
  Alg operator*(double s) const { return {a1 * s, a2 * s, a3 * s}; }
  Alg& operator+=(const Alg& o) { a1 += o.a1; a2 += o.a2; a3 += o.a3; return *this; }
  Alg& operator-=(const Alg& o) { a1 -= o.a1; a2 -= o.a2; a3 -= o.a3; return *this; }
  Alg& operator*=(double s) { a1 *= s; a2 *= s; a3 *= s; return *this; }
};

inline Alg operator*(double s, const Alg& v) { return v * s; }

inline double inner(const Alg& u, const Alg& v) {
  return u.a1 * v.a1 + u.a2 * v.a2 + u.a3 * v.a3;
}
inline double norm2(const Alg& v) { return inner(v, v); }
inline double norm(const Alg& v) { return std::sqrt(norm2(v)); }

// Lie bracket under the imaginary-quaternion identification: [u,v] = 2 u x v.
inline Alg bracket(const Alg& u, const Alg& v) {
  return {2.0 * (u.a2 * v.a3 - u.a3 * v.a2),
          2.0 * (u.a3 * v.a1 - u.a1 * v.a3),
          2.0 * (u.a1 * v.a2 - u.a2 * v.a1)};
}

// SU(2) element as a unit quaternion w + i x + j y + k z.
struct Group {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  Group() = default;
  Group(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  static Group identity() { return {1.0, 0.0, 0.0, 0.0}; }
};

inline Group operator*(const Group& a, const Group& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline Group inverse(const Group& g) { return {g.w, -g.x, -g.y, -g.z}; }

inline double quat_norm(const Group& g) {
  return std::sqrt(g.w * g.w + g.x * g.x + g.y * g.y + g.z * g.z);
}

inline Group normalized(const Group& g) {
  const double n = quat_norm(g);
  return {g.w / n, g.x / n, g.y / n, g.z / n};
}

// Distance on SU(2)/{+-1}: the two lifts of a rotation are antipodal.
inline double projective_dist(const Group& a, const Group& b) {
  const double dm = std::sqrt((a.w - b.w) * (a.w - b.w) + (a.x - b.x) * (a.x - b.x) +
                              (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
  const double dp = std::sqrt((a.w + b.w) * (a.w + b.w) + (a.x + b.x) * (a.x + b.x) +
                              (a.y + b.y) * (a.y + b.y) + (a.z + b.z) * (a.z + b.z));
  return std::min(dm, dp);
}

using Rotation3 = std::array<std::array<double, 3>, 3>;

// Quaternion exponential cos|v| + sin|v| v/|v|; series branch below 1e-8.
Group exp_alg(const Alg& v);

// Principal-branch quaternion log into su(2); throws "gauge jump too large"
// for inputs within 1e-6 of the antipode -1.
Alg log_alg(const Group& g);

// Adjoint action Ad_g v = g v g^-1; equals covering_rotation(g) applied to v.
Alg adjoint(const Group& g, const Alg& v);

// The 2:1 covering Sp(1) -> SO(3); covering_rotation(g) == covering_rotation(-g).
Rotation3 covering_rotation(const Group& g);

// One of the two unit quaternions over R, sign fixed by w >= 0 with ties
// broken by the first nonzero of (x, y, z) >= 0. Throws "not a rotation"
// unless R is orthogonal with det +1 within 1e-6.
Group rotation_to_group(const Rotation3& R);

}  // namespace weakconn
