#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "shgl/field_io.hpp"
#include "support.hpp"

using namespace shgl;
using shgl::testing::cplx;
namespace fs = std::filesystem;

TEST_CASE("binary field round trip") {
  std::mt19937_64 rng(2);
  const auto lat = make_lattice(2, 0.2, std::vector<int>{11, 3}, LatticeKind::fine);
  const Field f = shgl::testing::random_hermitian(lat, rng);
  std::stringstream ss;
  write_field(ss, f);
  CHECK(ss.str().size() == 8 + 4 + 16 + 2 + 8 + 16 * static_cast<std::size_t>(lat.size()));
  const Field g = read_field(ss);
  CHECK(g.lattice() == lat);
  CHECK(g.hermitian());
  CHECK((g.coeffs() == f.coeffs()).all());

  std::stringstream bad("NOTAFIELD......");
  CHECK_THROWS_AS(read_field(bad), FieldIoError);
  std::stringstream cut(ss.str().substr(0, 40));
  CHECK_THROWS_AS(read_field(cut), FieldIoError);
}

TEST_CASE("csv rows round trip") {
  const auto lat = make_lattice(1, 0.5, 2, LatticeKind::amplitude);
  Field f(lat);
  f.at({1}) = cplx(0.1, 1.0 / 3.0);
  std::ostringstream os;
  write_field_csv(os, f);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "k1,re,im");
  int rows = 0;
  while (std::getline(is, line)) {
    int k;
    double re, im;
    char c1, c2;
    std::istringstream row(line);
    row >> k >> c1 >> re >> c2 >> im;
    CHECK(f.at({k}) == cplx(re, im));
    ++rows;
  }
  CHECK(rows == 5);
}

TEST_CASE("trajectory writer streams files and an index") {
  const auto dir = fs::temp_directory_path() / "shgl_test_writer";
  fs::remove_all(dir);
  const auto lat = make_lattice(1, 0.5, 4, LatticeKind::fine);
  {
    TrajectoryWriter w(dir, "u", 2);
    for (int s = 0; s < 10; ++s) {
      Field f(lat, true);
      f[lat.origin()] = s;
      w.push(s * 5, 0.25 * s, std::move(f));
    }
    w.close();
    CHECK(w.files().size() == 10);
    std::ifstream idx(w.index_path());
    std::string line;
    std::getline(idx, line);
    CHECK(line == "step,time,file");
    int n = 0;
    while (std::getline(idx, line)) ++n;
    CHECK(n == 10);
    CHECK(load_field(w.files()[7])[lat.origin()] == cplx(7));
  }
}
