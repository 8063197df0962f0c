#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "weakconn/forms.hpp"
#include "weakconn/gauge.hpp"

namespace weakconn {

// Lattice form plus its group tag. su2 payloads carry the three algebra
// coordinates per component; u1 payloads carry one, loaded onto the first
// algebra axis. Writing with group "u1" requires the other two axes to be
// exactly zero.
struct FieldData {
  LatticeForm form;
  std::string group = "su2";
};

// Field-file layout: the 8-byte magic "WEAKCONN", a little-endian u32 with
// the manifest length, the manifest JSON, then the payload of little-endian
// 64-bit floats ordered site-major, components in canonical ascending-
// combination order, algebra coordinates innermost. The manifest holds
// {version, n, degree, grid {r, t, sites_per_axis}, group, endianness,
// checksum}; grid.r is the domain half-extent (1 for these cell-centered
// grids), grid.t the sampling offset in cells (0.5, the cell center), and
// checksum the CRC-32 of the payload bytes.
void write_field(const std::string& path, const FieldData& f);

// Throws std::runtime_error naming the offending manifest field or byte
// region when the file fails validation (magic, manifest keys, payload
// length, checksum).
FieldData read_field(const std::string& path);

// Gauge fields travel as degree-0 field files holding log(g); the quaternion
// sign lost by the log is invisible to every consumer (Ad and g^{-1}dg are
// even in g).
void write_gauge(const std::string& path, const GaugeField& g);
GaugeField read_gauge(const std::string& path);

struct Generated {
  FieldData field;
  std::optional<GaugeField> gauge;  // emitted by the pure-gauge kind
};

// Deterministic test-corpus fields; the same (kind, grid, param, seed)
// always produces the same bytes. Kinds:
//   zero            all components vanish
//   constant        component c holds param times the (c mod 3)-th axis
//   abelian-affine  A = param x_1 e1 dx_2 (constant curvature, one axis)
//   pure-gauge      A = g^{-1} dg for a smooth random gauge g (emitted too)
//   smooth-random   band-limited modes, |wavevector| <= 1, amplitude param
//   line-singular   amplitude param concentrated around a random
//                   (n-5)-dimensional axis-parallel segment
// Throws std::invalid_argument on an unknown kind.
Generated generate_field(const std::string& kind, const Grid& g, double param,
                         std::uint64_t seed);

}  // namespace weakconn
