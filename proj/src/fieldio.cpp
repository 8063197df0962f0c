#include "weakconn/fieldio.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "weakconn/su2.hpp"

namespace weakconn {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "field files are little-endian and so must the host be");

constexpr char kMagic[8] = {'W', 'E', 'A', 'K', 'C', 'O', 'N', 'N'};

int alg_dim(const std::string& group) {
  if (group == "su2") return 3;
  if (group == "u1") return 1;
  throw std::runtime_error("field file manifest: bad group \"" + group + "\"");
}

std::uint32_t payload_crc(const std::vector<double>& payload) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
            static_cast<uInt>(payload.size() * sizeof(double))));
}

void write_blob(const std::string& path, const json& manifest,
                const std::vector<double>& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const std::string m = manifest.dump();
  const std::uint32_t mlen = static_cast<std::uint32_t>(m.size());
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&mlen), 4);
  out.write(m.data(), mlen);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write: " + path);
}

json make_manifest(const Grid& g, int degree, const std::string& group,
                   std::uint32_t checksum) {
  return json{{"version", 1},
              {"n", g.n},
              {"degree", degree},
              {"grid", json{{"r", 1.0}, {"t", 0.5}, {"sites_per_axis", g.S}}},
              {"group", group},
              {"endianness", "little"},
              {"checksum", checksum}};
}

// Pulls a manifest field, throwing with the field named.
template <typename T>
T need(const json& m, const char* key) {
  if (!m.contains(key))
    throw std::runtime_error(std::string("field file manifest: missing ") + key);
  try {
    return m.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::runtime_error(std::string("field file manifest: bad ") + key);
  }
}

struct Blob {
  json manifest;
  std::vector<double> payload;
};

Blob read_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[8] = {};
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("field file: bad magic in " + path);
  std::uint32_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), 4);
  if (!in) throw std::runtime_error("field file: truncated manifest length");
  std::string m(mlen, '\0');
  in.read(m.data(), mlen);
  if (!in) throw std::runtime_error("field file: truncated manifest");
  Blob b;
  try {
    b.manifest = json::parse(m);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("field file manifest: parse error: ") +
                             e.what());
  }
  std::vector<char> rest((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  if (rest.size() % sizeof(double) != 0)
    throw std::runtime_error("field file: payload not a multiple of 8 bytes");
  b.payload.resize(rest.size() / sizeof(double));
  std::memcpy(b.payload.data(), rest.data(), rest.size());
  return b;
}

void check_common(const json& m, const std::vector<double>& payload) {
  const int version = need<int>(m, "version");
  if (version != 1) throw std::runtime_error("field file manifest: bad version");
  if (need<std::string>(m, "endianness") != "little")
    throw std::runtime_error("field file manifest: bad endianness");
  const auto checksum = need<std::uint32_t>(m, "checksum");
  if (checksum != payload_crc(payload))
    throw std::runtime_error("field file manifest: checksum mismatch");
}

Grid manifest_grid(const json& m) {
  const int n = need<int>(m, "n");
  if (n < 1 || n > 8) throw std::runtime_error("field file manifest: bad n");
  const json grid = need<json>(m, "grid");
  const int S = need<int>(grid, "sites_per_axis");
  if (S < 1) throw std::runtime_error("field file manifest: bad sites_per_axis");
  return Grid(n, S);
}

// splitmix64; uniform helpers for the deterministic generators
std::uint64_t mix(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
double unit(std::uint64_t& s) {  // [0, 1)
  return double(mix(s) >> 11) * 0x1.0p-53;
}
double sym(std::uint64_t& s) { return 2.0 * unit(s) - 1.0; }
Alg rand_dir(std::uint64_t& s) {
  for (;;) {
    Alg v{sym(s), sym(s), sym(s)};
    const double r2 = norm2(v);
    if (r2 > 1e-4 && r2 <= 1.0) return v * (1.0 / std::sqrt(r2));
  }
}

// Two band-limited modes per component: amp cos(pi k.x + phase) dir.
LatticeForm smooth_modes(const Grid& g, int degree, double amp, std::uint64_t seed) {
  LatticeForm out(g, degree);
  std::uint64_t s = seed * 0x9e3779b97f4a7c15ULL + 0x1234567;
  struct Mode {
    std::vector<int> k;
    double phase;
    Alg dir;
  };
  std::vector<std::vector<Mode>> modes(out.comps());
  for (auto& per : modes)
    for (int m = 0; m < 2; ++m) {
      Mode md;
      md.k.resize(g.n);
      for (int a = 0; a < g.n; ++a) md.k[a] = int(mix(s) % 3) - 1;
      md.phase = 2.0 * M_PI * unit(s);
      md.dir = rand_dir(s) * amp;
      per.push_back(md);
    }
  std::vector<int> idx(g.n, 0);
  std::int64_t site = 0;
  do {
    for (int c = 0; c < out.comps(); ++c) {
      Alg v{};
      for (const auto& md : modes[c]) {
        double ph = md.phase;
        for (int a = 0; a < g.n; ++a) ph += M_PI * md.k[a] * g.coord(idx[a]);
        v += std::cos(ph) * md.dir;
      }
      out.at(site, c) = v;
    }
    ++site;
  } while (g.next(idx));
  return out;
}

}  // namespace

void write_field(const std::string& path, const FieldData& f) {
  const Grid& g = f.form.grid;
  const int dim = alg_dim(f.group);
  std::vector<double> payload;
  payload.reserve(size_t(g.sites()) * f.form.comps() * dim);
  for (std::int64_t s = 0; s < g.sites(); ++s)
    for (int c = 0; c < f.form.comps(); ++c) {
      const Alg& v = f.form.at(s, c);
      payload.push_back(v.a1);
      if (dim == 3) {
        payload.push_back(v.a2);
        payload.push_back(v.a3);
      } else if (v.a2 != 0.0 || v.a3 != 0.0) {
        throw std::invalid_argument("write_field: u1 data must lie on the first axis");
      }
    }
  write_blob(path, make_manifest(g, f.form.degree, f.group, payload_crc(payload)),
             payload);
}

FieldData read_field(const std::string& path) {
  Blob b = read_blob(path);
  check_common(b.manifest, b.payload);
  const Grid g = manifest_grid(b.manifest);
  const int degree = need<int>(b.manifest, "degree");
  if (degree < 0 || degree > g.n)
    throw std::runtime_error("field file manifest: bad degree");
  FieldData f{LatticeForm(g, degree), need<std::string>(b.manifest, "group")};
  const int dim = alg_dim(f.group);
  const size_t expect = size_t(g.sites()) * f.form.comps() * dim;
  if (b.payload.size() != expect)
    throw std::runtime_error("field file: payload length mismatch");
  size_t p = 0;
  for (std::int64_t s = 0; s < g.sites(); ++s)
    for (int c = 0; c < f.form.comps(); ++c) {
      Alg v{};
      v.a1 = b.payload[p++];
      if (dim == 3) {
        v.a2 = b.payload[p++];
        v.a3 = b.payload[p++];
      }
      f.form.at(s, c) = v;
    }
  return f;
}

void write_gauge(const std::string& path, const GaugeField& gf) {
  const Grid& g = gf.grid;
  LatticeForm lg(g, 0);
  for (std::int64_t s = 0; s < g.sites(); ++s) lg.at(s, 0) = log_alg(gf.g[s]);
  write_field(path, FieldData{lg, "su2"});
}

GaugeField read_gauge(const std::string& path) {
  FieldData f = read_field(path);
  if (f.form.degree != 0 || f.group != "su2")
    throw std::runtime_error("field file: not a gauge file (need su2 degree 0)");
  GaugeField gf(f.form.grid);
  for (std::int64_t s = 0; s < f.form.grid.sites(); ++s)
    gf.g[s] = exp_alg(f.form.at(s, 0));
  return gf;
}

Generated generate_field(const std::string& kind, const Grid& g, double param,
                         std::uint64_t seed) {
  Generated out{FieldData{LatticeForm(g, 1), "su2"}, std::nullopt};
  LatticeForm& A = out.field.form;
  if (kind == "zero") {
    return out;
  }
  if (kind == "constant") {
    const Alg axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (std::int64_t s = 0; s < g.sites(); ++s)
      for (int c = 0; c < A.comps(); ++c) A.at(s, c) = param * axes[c % 3];
    return out;
  }
  if (kind == "abelian-affine") {
    if (g.n < 2) throw std::invalid_argument("abelian-affine needs n >= 2");
    std::vector<int> idx(g.n, 0);
    std::int64_t s = 0;
    do {
      A.at(s, 1) = Alg{param * g.coord(idx[0]), 0.0, 0.0};
      ++s;
    } while (g.next(idx));
    return out;
  }
  if (kind == "pure-gauge") {
    LatticeForm xi = smooth_modes(g, 0, param, seed);
    GaugeField gf(g);
    for (std::int64_t s = 0; s < g.sites(); ++s) gf.g[s] = exp_alg(xi.at(s, 0));
    A = gauge_transform(LatticeForm(g, 1), gf);
    out.gauge = std::move(gf);
    return out;
  }
  if (kind == "smooth-random") {
    A = smooth_modes(g, 1, param, seed);
    return out;
  }
  if (kind == "line-singular") {
    // amplitude concentrated around x_i = c_i for the first min(n,5) axes,
    // extended along the remaining n-5
    std::uint64_t s0 = seed * 0x9e3779b97f4a7c15ULL + 0xabcdef;
    const int pinned = std::min(g.n, 5);
    std::vector<double> center(pinned);
    for (double& c : center) c = 0.5 * sym(s0);
    const Alg dir = rand_dir(s0);
    const Alg cross = rand_dir(s0);
    std::vector<int> idx(g.n, 0);
    std::int64_t s = 0;
    do {
      double d2 = 0.0;
      for (int i = 0; i < pinned; ++i) {
        const double xi = g.coord(idx[i]) - center[i];
        d2 += xi * xi;
      }
      const double amp = param * std::exp(-d2 / 0.06);
      A.at(s, g.n - 1) = amp * dir + 0.2 * amp * cross;
      ++s;
    } while (g.next(idx));
    return out;
  }
  throw std::invalid_argument("generate_field: unknown kind \"" + kind + "\"");
}

}  // namespace weakconn
