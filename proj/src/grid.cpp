#include "weakconn/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace weakconn {

Grid::Grid(int n_, int S_) : n(n_), S(S_), h(2.0 / S_) {
  if (n < 1 || n > 8) throw std::invalid_argument("grid dimension out of range");
  if (S < 1) throw std::invalid_argument("grid needs at least one site per axis");
}

std::int64_t Grid::sites() const {
  std::int64_t total = 1;
  for (int i = 0; i < n; ++i) total *= S;
  return total;
}

std::int64_t Grid::index(const std::vector<int>& idx) const {
  std::int64_t s = 0;
  for (int i = 0; i < n; ++i) {
    if (idx[i] < 0 || idx[i] >= S) throw std::out_of_range("site index outside grid");
    s = s * S + idx[i];
  }
  return s;
}

void Grid::unpack(std::int64_t site, std::vector<int>& idx) const {
  idx.assign(n, 0);
  for (int i = n - 1; i >= 0; --i) {
    idx[i] = static_cast<int>(site % S);
    site /= S;
  }
}

int Grid::row_of(double x) const {
  const int row = static_cast<int>(std::floor((x + 1.0) / h));
  return row < 0 ? 0 : (row >= S ? S - 1 : row);
}

bool Grid::next(std::vector<int>& idx) const {
  for (int i = n - 1; i >= 0; --i) {
    if (++idx[i] < S) return true;
    idx[i] = 0;
  }
  return false;
}

}  // namespace weakconn
