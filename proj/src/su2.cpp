#include "weakconn/su2.hpp"

namespace weakconn {

Group exp_alg(const Alg& v) {
  if (!std::isfinite(v.a1) || !std::isfinite(v.a2) || !std::isfinite(v.a3))
    throw std::invalid_argument("non-finite algebra element");
  const double t = norm(v);
  double c, s;  // s = sin(t)/t
  if (t < 1e-8) {
    c = 1.0 - 0.5 * t * t;
    s = 1.0 - t * t / 6.0;
  } else {
    c = std::cos(t);
    s = std::sin(t) / t;
  }
  return {c, s * v.a1, s * v.a2, s * v.a3};
}

Alg log_alg(const Group& g) {
  const double s = std::sqrt(g.x * g.x + g.y * g.y + g.z * g.z);
  const double theta = std::atan2(s, g.w);  // in [0, pi]
  if (theta > M_PI - 1e-6)
    throw std::runtime_error("gauge jump too large");
  double f;  // theta / sin(theta) evaluated against s = |vec|
  if (s < 1e-8) {
    // theta ~ s / w for w ~ 1; series keeps f finite.
    f = 1.0 / g.w;
  } else {
    f = theta / s;
  }
  return {f * g.x, f * g.y, f * g.z};
}

Alg adjoint(const Group& g, const Alg& v) {
  const Group p{0.0, v.a1, v.a2, v.a3};
  const Group r = g * p * inverse(g);
  return {r.x, r.y, r.z};
}

Rotation3 covering_rotation(const Group& g) {
  const double w = g.w, x = g.x, y = g.y, z = g.z;
  return {{{w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)},
           {2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x)},
           {2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z}}};
}

namespace {

double det3(const Rotation3& R) {
  return R[0][0] * (R[1][1] * R[2][2] - R[1][2] * R[2][1]) -
         R[0][1] * (R[1][0] * R[2][2] - R[1][2] * R[2][0]) +
         R[0][2] * (R[1][0] * R[2][1] - R[1][1] * R[2][0]);
}

double orthogonality_defect(const Rotation3& R) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += R[k][i] * R[k][j];
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

}  // namespace

Group rotation_to_group(const Rotation3& R) {
  if (orthogonality_defect(R) > 1e-6 || std::abs(det3(R) - 1.0) > 1e-6)
    throw std::invalid_argument("not a rotation");

  // Shepperd's method: pick the largest of (1 + tr, 1 + 2R_ii - tr).
  const double tr = R[0][0] + R[1][1] + R[2][2];
  double q[4];  // (w, x, y, z)
  if (tr >= R[0][0] && tr >= R[1][1] && tr >= R[2][2]) {
    const double r = std::sqrt(1.0 + tr);
    q[0] = 0.5 * r;
    q[1] = 0.5 * (R[2][1] - R[1][2]) / r;
    q[2] = 0.5 * (R[0][2] - R[2][0]) / r;
    q[3] = 0.5 * (R[1][0] - R[0][1]) / r;
  } else {
    int i = 0;
    if (R[1][1] > R[i][i]) i = 1;
    if (R[2][2] > R[i][i]) i = 2;
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    const double r = std::sqrt(1.0 + R[i][i] - R[j][j] - R[k][k]);
    q[i + 1] = 0.5 * r;
    q[0] = 0.5 * (R[k][j] - R[j][k]) / r;
    q[j + 1] = 0.5 * (R[j][i] + R[i][j]) / r;
    q[k + 1] = 0.5 * (R[k][i] + R[i][k]) / r;
  }

  Group g = normalized(Group{q[0], q[1], q[2], q[3]});
  // Deterministic lift: w >= 0, ties broken by first nonzero of (x, y, z).
  bool flip = g.w < 0.0;
  if (g.w == 0.0) {
    if (g.x != 0.0) flip = g.x < 0.0;
    else if (g.y != 0.0) flip = g.y < 0.0;
    else flip = g.z < 0.0;
  }
  if (flip) g = {-g.w, -g.x, -g.y, -g.z};
  return g;
}

}  // namespace weakconn
