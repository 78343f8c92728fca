#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "slag/error.hpp"
#include "slag/field_io.hpp"
#include "support.hpp"

using namespace slag;
using namespace slagtest;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("slag-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PotentialField random_field(int n, std::uint64_t seed) {
  const GridSpec g = GridSpec::ball(2, 2.0 / (n - 1));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  PotentialField f = sample_potential(isotropic(1.0), g);
  for (double& v : f.values) v = u(rng) * std::exp(u(rng) / 100.0);
  return f;
}

bool bit_identical(const PotentialField& a, const PotentialField& b) {
  if (a.values.size() != b.values.size() || a.mask != b.mask || !(a.grid == b.grid)) return false;
  return std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("PF1 round trip is bit identical") {
  const fs::path dir = scratch_dir("pf1");
  const PotentialField f = random_field(65, 1);
  REQUIRE(f.grid.shape[0] == 65);
  write_pf1(dir / "f.pf1", f);
  CHECK(fs::exists(dir / "f.pf1.bin"));
  const PotentialField g = read_pf1(dir / "f.pf1");
  CHECK(bit_identical(f, g));
  CHECK(field_checksum(f) == field_checksum(g));
  CHECK(g.value_kind == f.value_kind);
}

TEST_CASE("PF1 to CSV to PF1 keeps every bit") {
  const fs::path dir = scratch_dir("csv");
  PotentialField f = random_field(33, 2);
  f.value_kind = "conjugate";
  write_field(dir / "a.pf1", f);
  write_field(dir / "a.csv", read_field(dir / "a.pf1"));
  write_field(dir / "b.pf1", read_field(dir / "a.csv"));
  const PotentialField g = read_field(dir / "b.pf1");
  CHECK(bit_identical(f, g));
  CHECK(g.value_kind == "conjugate");
}

TEST_CASE("mask export carries a 0/1 column") {
  PotentialField f = sample_potential(isotropic(1.0), GridSpec::ball(2, 0.5));
  f.value_kind = "mask";
  for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] = f.mask[k];
  std::ostringstream os;
  write_csv(os, f);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line.rfind("# PF1 ", 0) == 0);
  std::getline(is, line);
  CHECK(line == "i,j,x,y,value,mask");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    const char last = line.back();
    CHECK((last == '0' || last == '1'));
  }
  CHECK(rows == f.grid.size());
}

TEST_CASE("3-D CSV round trip") {
  const PotentialField f = sample_potential(quartic_plus_half(), GridSpec::ball(3, 0.25));
  std::ostringstream os;
  write_csv(os, f);
  std::istringstream is(os.str());
  CHECK(bit_identical(f, read_csv(is)));
}

TEST_CASE("malformed PF1 headers report byte offsets") {
  SUBCASE("syntax error") {
    const std::string text = R"({"format":"PF1","dim":2,,})";
    try {
      parse_pf1_header(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.byte_offset() == text.find(",,") + 1);
    }
  }
  SUBCASE("wrong format tag") {
    const PotentialField f = sample_potential(isotropic(1.0), GridSpec::ball(2, 0.5));
    std::string text = pf1_header(f, "x.bin");
    text.replace(text.find("PF1"), 3, "PF2");
    CHECK_THROWS_AS(parse_pf1_header(text), ParseError);
  }
  SUBCASE("short sidecar") {
    const fs::path dir = scratch_dir("short");
    const PotentialField f = sample_potential(isotropic(1.0), GridSpec::ball(2, 0.5));
    write_pf1(dir / "f.pf1", f);
    fs::resize_file(dir / "f.pf1.bin", 16);
    CHECK_THROWS_AS(read_pf1(dir / "f.pf1"), ParseError);
  }
}
