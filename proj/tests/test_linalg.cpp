#include <doctest.h>

#include <cmath>

#include "sepsa/linalg.hpp"
#include "sepsa/rng.hpp"
#include "sepsa/verify.hpp"

using namespace sepsa;
using namespace sepsa::linalg;

TEST_SUITE("linalg") {

TEST_CASE("matvec") {
  CHECK(matvec(Mat::identity(3), Vec{1, 2, 3}) == Vec{1, 2, 3});
  CHECK(matvec(Mat{{1, 2}, {3, 4}}, Vec{1, 1}) == Vec{3, 7});
  CHECK(matvec(Mat(2, 2), Vec{5, 5}) == Vec{0, 0});
  CHECK_THROWS_AS(matvec(Mat(2, 3), Vec{1, 1}), DimensionError);
}

TEST_CASE("matvec_transposed agrees with transpose") {
  const Mat m{{1, 2, 3}, {4, 5, 6}};
  CHECK(matvec_transposed(m, Vec{1, -1}) == matvec(transpose(m), Vec{1, -1}));
}

TEST_CASE("outer") {
  CHECK(outer(Vec{1, 0}, Vec{1, 0}) == Mat{{1, 0}, {0, 0}});
  CHECK(outer(Vec{2, 3}, Vec{1, 1}) == Mat{{2, 2}, {3, 3}});
  CHECK(outer(Vec{0, 0}, Vec{1, 1}) == Mat(2, 2));
}

TEST_CASE("sherman_morrison_downdate examples") {
  const SpdMat i2 = SpdMat::identity(2);
  CHECK(max_abs_diff(sherman_morrison_downdate(i2, Vec{1, 0}).mat(), Mat{{0.5, 0}, {0, 1}}) <= 1e-15);
  const Mat expected{{2.0 / 3.0, -1.0 / 3.0}, {-1.0 / 3.0, 2.0 / 3.0}};
  CHECK(max_abs_diff(sherman_morrison_downdate(i2, Vec{1, 1}).mat(), expected) <= 1e-15);

  const SpdMat b(Mat{{4, 1, 0}, {1, 3, 0.5}, {0, 0.5, 2}});
  CHECK(sherman_morrison_downdate(b, Vec{0, 0, 0}) == b);
}

TEST_CASE("rank_one_downdate rejects non-finite features") {
  SpdMat b = SpdMat::identity(2);
  CHECK_THROWS_AS(b.rank_one_downdate(Vec{NAN, 1}), NumericalError);
  CHECK_THROWS_AS(b.rank_one_downdate(Vec{1, 2, 3}), DimensionError);
}

TEST_CASE("downdate matches direct inverse on random SPD") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t p = 1 + rng.index(20);
    const SpdMat b(verify::random_spd(seed, p, 1e6), 1e-9);
    Vec h(p);
    for (double& v : h) v = rng.normal();
    const SpdMat down = sherman_morrison_downdate(b, h);

    Mat info = verify::gauss_jordan_inverse(b.mat());
    const Mat hh = outer(h, h);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) info(i, j) += hh(i, j);
    const Mat direct = verify::gauss_jordan_inverse(info);
    CHECK(max_abs_diff(down.mat(), direct) <= 1e-8);
    CHECK(assert_spd(down.mat(), 1e-12));
    for (std::size_t i = 0; i < p; ++i) CHECK(down(i, i) <= b(i, i));
  }
}

TEST_CASE("solve_spd") {
  CHECK(solve_spd(SpdMat::identity(2), Vec{3, 4}) == Vec{3, 4});
  CHECK(max_abs_diff(solve_spd(SpdMat(Mat{{2, 0}, {0, 4}}), Vec{2, 4}), Vec{1, 1}) <= 1e-15);
  // Cramer: det 11, x = (1*3 - 1*2, 4*2 - 1*1) / 11
  CHECK(max_abs_diff(solve_spd(SpdMat(Mat{{4, 1}, {1, 3}}), Vec{1, 2}), Vec{1.0 / 11, 7.0 / 11}) <=
        1e-15);
}

TEST_CASE("solve_spd round trip") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    const std::size_t p = 1 + rng.index(15);
    const SpdMat a(verify::random_spd(seed, p, 1e3), 1e-9);
    Vec rhs(p);
    for (double& v : rhs) v = rng.normal();
    const Vec x = solve_spd(a, rhs);
    CHECK(max_abs_diff(matvec(a.mat(), x), rhs) <= 1e-9 * max_abs(rhs));
  }
}

TEST_CASE("assert_spd") {
  CHECK(assert_spd(Mat::identity(4), 1e-12));
  CHECK_FALSE(assert_spd(Mat{{1, 2}, {2, 1}}, 1e-12));
  CHECK(assert_spd(Mat{{1, 1e-13}, {0, 1}}, 1e-12));
  CHECK_FALSE(assert_spd(Mat{{1, 1e-3}, {0, 1}}, 1e-12));
}

TEST_CASE("SpdMat construction validates") {
  CHECK_THROWS_AS(SpdMat(Mat{{1, 2}, {2, 1}}), NumericalError);
  CHECK_THROWS_AS(SpdMat(Mat(2, 3, 1.0)), DimensionError);
}

TEST_CASE("blend_toward") {
  const SpdMat h = SpdMat::identity(2);
  CHECK(blend_toward(h, Vec{1, 0}, 0.0) == h);
  const SpdMat half = blend_toward(h, Vec{1, 1}, 0.5);
  CHECK(max_abs_diff(half.mat(), Mat{{1, 0.5}, {0.5, 1}}) <= 1e-15);
  CHECK_THROWS_AS(blend_toward(h, Vec{1, 0}, 1.0), NumericalError);
}

}  // TEST_SUITE
