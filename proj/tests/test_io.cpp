#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "weakconn/fieldio.hpp"
#include "weakconn/forms.hpp"
#include "weakconn/gauge.hpp"
#include "weakconn/grid.hpp"
#include "weakconn/su2.hpp"

using namespace weakconn;

namespace {

std::uint64_t mix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
double unit64(std::uint64_t& s) { return (mix64(s) >> 11) * 0x1.0p-53; }

LatticeForm random_form(const Grid& g, int degree, std::uint64_t seed) {
  LatticeForm w(g, degree);
  std::uint64_t s = seed;
  for (Alg& v : w.data)
    v = Alg{2.0 * unit64(s) - 1.0, 2.0 * unit64(s) - 1.0, 2.0 * unit64(s) - 1.0};
  return w;
}

std::string tmp_path(const std::string& stem) {
  return "io_test_" + stem + ".field";
}

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

// read_field must fail and the message must name what is wrong.
void expect_read_error(const std::string& path, const std::string& needle) {
  try {
    read_field(path);
    FAIL_CHECK("expected read_field to throw for ", path);
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK_MESSAGE(what.find(needle) != std::string::npos,
                  "message \"", what, "\" lacks \"", needle, "\"");
  }
}

}  // namespace

TEST_CASE("field files round-trip bit-exactly") {
  for (const int degree : {1, 2}) {
    const Grid g(5, 4);
    const LatticeForm w = random_form(g, degree, 17 + degree);
    const std::string path = tmp_path("rt" + std::to_string(degree));
    write_field(path, FieldData{w, "su2"});
    const FieldData back = read_field(path);
    CHECK(back.group == "su2");
    CHECK(back.form.degree == degree);
    CHECK(back.form.grid.n == g.n);
    CHECK(back.form.grid.S == g.S);
    REQUIRE(back.form.data.size() == w.data.size());
    CHECK(std::memcmp(back.form.data.data(), w.data.data(),
                      w.data.size() * sizeof(double)) == 0);
    std::remove(path.c_str());
  }
}

TEST_CASE("u1 files carry one coordinate and reject off-axis data") {
  const Grid g(5, 4);
  const Generated made = generate_field("abelian-affine", g, 1.0, 0);
  const std::string path = tmp_path("u1");
  write_field(path, FieldData{made.field.form, "u1"});
  const FieldData back = read_field(path);
  CHECK(back.group == "u1");
  REQUIRE(back.form.data.size() == made.field.form.data.size());
  CHECK(std::memcmp(back.form.data.data(), made.field.form.data.data(),
                    back.form.data.size() * sizeof(double)) == 0);
  // One coordinate per component on disk: 1/3 of the su2 payload.
  const auto su2_path = tmp_path("u1su2");
  write_field(su2_path, FieldData{made.field.form, "su2"});
  CHECK(file_bytes(path).size() < file_bytes(su2_path).size());

  LatticeForm off(g, 1);
  off.at(3, 2) = Alg{0.0, 0.5, 0.0};
  CHECK_THROWS_AS(write_field(path, FieldData{off, "u1"}), std::invalid_argument);
  std::remove(path.c_str());
  std::remove(su2_path.c_str());
}

TEST_CASE("generators are deterministic in (kind, param, seed)") {
  const Grid g(5, 4);
  const std::string p1 = tmp_path("det1"), p2 = tmp_path("det2");
  for (const char* kind : {"pure-gauge", "smooth-random", "line-singular"}) {
    write_field(p1, generate_field(kind, g, 0.3, 11).field);
    write_field(p2, generate_field(kind, g, 0.3, 11).field);
    CHECK_MESSAGE(file_bytes(p1) == file_bytes(p2), kind, " not reproducible");
    write_field(p2, generate_field(kind, g, 0.3, 12).field);
    CHECK_MESSAGE(file_bytes(p1) != file_bytes(p2), kind, " ignores the seed");
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("zero generator writes an all-zero payload") {
  const Grid g(5, 3);
  const Generated made = generate_field("zero", g, 1.0, 0);
  for (const Alg& v : made.field.form.data) CHECK(norm(v) == 0.0);
  CHECK_FALSE(made.gauge.has_value());
}

TEST_CASE("abelian-affine has constant curvature on one component") {
  const Grid g(5, 6);
  const Generated made = generate_field("abelian-affine", g, 2.0, 0);
  const LatticeForm F = curvature(made.field.form);
  const int c01 = comb_rank(g.n, {0, 1});
  for (std::int64_t s = 0; s < g.sites(); ++s) {
    for (int c = 0; c < F.comps(); ++c) {
      const Alg v = F.at(s, c);
      if (c == c01) {
        CHECK(v.a1 == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(std::abs(v.a2) <= 1e-12);
        CHECK(std::abs(v.a3) <= 1e-12);
      } else {
        CHECK(norm(v) <= 1e-12);
      }
    }
  }
}

TEST_CASE("pure-gauge emits the generating gauge and reproduces the field") {
  const Grid g(5, 5);
  const Generated made = generate_field("pure-gauge", g, 0.4, 21);
  REQUIRE(made.gauge.has_value());
  const std::string path = "io_test_pg.gauge";
  write_gauge(path, *made.gauge);
  const GaugeField back = read_gauge(path);
  REQUIRE(back.g.size() == made.gauge->g.size());
  // log/exp may flip the quaternion sign; the induced transform cannot.
  const LatticeForm zero(g, 1);
  const LatticeForm a1 = gauge_transform(zero, *made.gauge);
  const LatticeForm a2 = gauge_transform(zero, back);
  REQUIRE(a1.data.size() == a2.data.size());
  for (std::size_t i = 0; i < a1.data.size(); ++i) {
    CHECK(norm(a1.data[i] - a2.data[i]) <= 1e-12);
    CHECK(norm(a1.data[i] - made.field.form.data[i]) <= 1e-12);
  }
  std::remove(path.c_str());
}

TEST_CASE("line-singular concentrates curvature near its center") {
  const Grid g(5, 8);
  const Generated made = generate_field("line-singular", g, 5.0, 3);
  const LatticeForm F = curvature(made.field.form);
  std::vector<double> site_energy(g.sites(), 0.0);
  double total = 0.0;
  for (std::int64_t s = 0; s < g.sites(); ++s) {
    for (int c = 0; c < F.comps(); ++c) site_energy[s] += norm2(F.at(s, c));
    total += site_energy[s];
  }
  REQUIRE(total > 0.0);
  std::vector<double> sorted = site_energy;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double top = 0.0;
  const std::int64_t keep = g.sites() / 20;  // top 5% of sites
  for (std::int64_t i = 0; i < keep; ++i) top += sorted[i];
  CHECK(top / total > 0.5);
}

TEST_CASE("unknown generator kind is rejected") {
  const Grid g(5, 3);
  CHECK_THROWS_AS(generate_field("swirl", g, 1.0, 0), std::invalid_argument);
}

TEST_CASE("read errors name the offending field") {
  const Grid g(5, 3);
  const std::string path = tmp_path("err");

  SUBCASE("bad magic") {
    std::ofstream(path, std::ios::binary) << "NOTAFILExxxxxxxxxxxx";
    expect_read_error(path, "magic");
  }
  SUBCASE("flipped payload byte breaks the checksum") {
    write_field(path, FieldData{random_form(g, 1, 5), "su2"});
    std::vector<char> bytes = file_bytes(path);
    bytes.back() ^= 0x40;
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    expect_read_error(path, "checksum");
  }
  SUBCASE("truncated payload") {
    write_field(path, FieldData{random_form(g, 1, 5), "su2"});
    std::vector<char> bytes = file_bytes(path);
    bytes.resize(bytes.size() - 4);
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    expect_read_error(path, "payload");
  }
  SUBCASE("manifest field errors") {
    // Rewrites one manifest key of a valid file, fixing the checksum so only
    // the target key is at fault.
    const LatticeForm w = random_form(g, 1, 5);
    auto corrupt = [&](const std::string& key, const std::string& from,
                       const std::string& to, const std::string& needle) {
      write_field(path, FieldData{w, "su2"});
      std::vector<char> bytes = file_bytes(path);
      const std::uint32_t mlen = *reinterpret_cast<std::uint32_t*>(bytes.data() + 8);
      std::string manifest(bytes.data() + 12, bytes.data() + 12 + mlen);
      const std::size_t at = manifest.find(from);
      REQUIRE_MESSAGE(at != std::string::npos, key, ": pattern not found");
      REQUIRE(from.size() == to.size());
      manifest.replace(at, from.size(), to);
      std::memcpy(bytes.data() + 12, manifest.data(), manifest.size());
      std::ofstream(path, std::ios::binary | std::ios::trunc)
          .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      expect_read_error(path, needle);
    };
    corrupt("version", "\"version\":1", "\"version\":7", "version");
    corrupt("degree", "\"degree\":1", "\"degree\":9", "degree");
    corrupt("group", "\"group\":\"su2\"", "\"group\":\"su9\"", "group");
    corrupt("endianness", "\"endianness\":\"little\"", "\"endianness\":\"bigend\"",
            "endianness");
  }
  std::remove(path.c_str());
}

TEST_CASE("gauge files reject non-gauge content") {
  const Grid g(5, 3);
  const std::string path = tmp_path("notgauge");
  write_field(path, FieldData{random_form(g, 1, 9), "su2"});
  CHECK_THROWS_AS(read_gauge(path), std::runtime_error);
  std::remove(path.c_str());
}
