#pragma once

#include <cstdint>
#include <vector>

namespace weakconn {

// Uniform cell-centered site grid on [-1,1]^n: S sites per axis, spacing
// h = 2/S, site coordinates x_i = -1 + (idx_i + 0.5) h. Site order is
// lexicographic with the last axis fastest.
struct Grid {
  int n = 0;
  int S = 0;
  double h = 0.0;

  Grid() = default;
  Grid(int n_, int S_);

  std::int64_t sites() const;
  std::int64_t index(const std::vector<int>& idx) const;
  void unpack(std::int64_t site, std::vector<int>& idx) const;
  double coord(int idx_i) const { return -1.0 + (idx_i + 0.5) * h; }

  // Nearest sample row to coordinate x, clamped to [0, S-1].
  int row_of(double x) const;

  // Lexicographic increment over {0..S-1}^n; returns false on wrap to zero.
  bool next(std::vector<int>& idx) const;
};

}  // namespace weakconn
