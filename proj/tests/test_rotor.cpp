#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <prism/rotor.hpp>

#include <cmath>
#include <random>

using namespace prism;

namespace {

std::mt19937 rng(20260817);

vec3d random_unit() {
  std::normal_distribution<double> g;
  vec3d v(g(rng), g(rng), g(rng));
  while (v.norm() < 1e-3) v = vec3d(g(rng), g(rng), g(rng));
  return v.normalized();
}

double random_angle(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

TEST_CASE("rodrigues basics") {
  CHECK((rodrigues(vec3d::UnitX().eval(), 0.0) - mat3d::Identity()).norm() == doctest::Approx(0.0));

  const vec3d y = rodrigues(vec3d::UnitZ().eval(), M_PI / 2) * vec3d::UnitX();
  CHECK((y - vec3d::UnitY()).cwiseAbs().maxCoeff() < 1e-12);

  for (int i = 0; i < 50; ++i) {
    const vec3d n = random_unit();
    const double th = random_angle(-3.0, 3.0);
    const mat3d round_trip = rodrigues(n, th) * rodrigues(n, -th);
    CHECK((round_trip - mat3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rodrigues rejects bad input") {
  CHECK_THROWS_AS(rodrigues(vec3d(1.0, 1.0, 0.0), 0.5), contract_error);
  CHECK_THROWS_AS(rodrigues(vec3d::UnitX().eval(), std::nan("")), contract_error);
}

TEST_CASE("rotation-vector rodrigues matches axis-angle form and is safe at zero") {
  CHECK((rodrigues(vec3d::Zero().eval()) - mat3d::Identity()).norm() == doctest::Approx(0.0));
  for (int i = 0; i < 50; ++i) {
    const vec3d n = random_unit();
    const double th = random_angle(1e-9, 3.0);
    CHECK((rodrigues((th * n).eval()) - rodrigues(n, th)).cwiseAbs().maxCoeff() < 1e-12);
  }
  // tiny angles: still a valid rotation, second-order accurate
  const vec3d w = 1e-7 * random_unit();
  CHECK(is_rotation(rodrigues(w), 1e-14));
}

TEST_CASE("rotation preserves vector norms") {
  for (int i = 0; i < 50; ++i) {
    const mat3d r = rodrigues(random_unit(), random_angle(-3.0, 3.0));
    const vec3d v(random_angle(-2, 2), random_angle(-2, 2), random_angle(-2, 2));
    CHECK(std::abs((r * v).norm() - v.norm()) < 1e-12 * (1.0 + v.norm()));
  }
}

TEST_CASE("compose applies the right factor first") {
  const mat3d r = rodrigues(random_unit(), 1.1);
  CHECK((compose(mat3d::Identity().eval(), r) - r).norm() == doctest::Approx(0.0));

  const mat3d a = rodrigues(vec3d::UnitZ().eval(), 0.7);
  const mat3d b = rodrigues(vec3d::UnitZ().eval(), 0.4);
  CHECK((compose(a, b) - rodrigues(vec3d::UnitZ().eval(), 1.1)).cwiseAbs().maxCoeff() < 1e-12);

  // order matters for non-commuting factors: compose(a,b)·v == a·(b·v)
  const mat3d ax = rodrigues(vec3d::UnitX().eval(), 0.9);
  const vec3d v = random_unit();
  CHECK((compose(ax, a) * v - ax * (a * v)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("rotation_angle recovers the input angle") {
  for (int i = 0; i < 50; ++i) {
    const double th = random_angle(1e-6, M_PI - 1e-6);
    CHECK(rotation_angle(rodrigues(random_unit(), th)) == doctest::Approx(th).epsilon(1e-9));
  }
}

TEST_CASE("invariant_axis from the skew part and near pi") {
  // sign convention: positive rotation sense about the returned axis
  const vec3d ax = invariant_axis(rodrigues(vec3d::UnitX().eval(), 1.0));
  CHECK((ax - vec3d::UnitX()).cwiseAbs().maxCoeff() < 1e-12);

  for (int i = 0; i < 100; ++i) {
    const vec3d n = random_unit();
    const vec3d got = invariant_axis(rodrigues(n, 0.3));
    CHECK((got - n).cwiseAbs().maxCoeff() < 1e-9);
  }

  // angles approaching and hitting pi, where the skew part degenerates
  for (double delta : {1e-3, 1e-6, 1e-9, 0.0}) {
    for (int i = 0; i < 50; ++i) {
      const vec3d n = random_unit();
      const mat3d r = rodrigues(n, M_PI - delta);
      const vec3d got = invariant_axis(r);
      CHECK(std::abs(std::abs(got.dot(n)) - 1.0) < 1e-9);
      CHECK((r * got - got).cwiseAbs().maxCoeff() < 1e-9);
      if (delta > 0.0) CHECK(got.dot(n) > 0.0);  // sense still measurable below pi
    }
  }
}

TEST_CASE("invariant_axis rejects the identity") {
  CHECK_THROWS_AS(invariant_axis(mat3d::Identity().eval()), contract_error);
  CHECK_THROWS_AS(invariant_axis(rodrigues(random_unit(), 1e-12)), contract_error);
}

TEST_CASE("geodesic_distance on unit vectors") {
  CHECK(geodesic_distance(vec3d::UnitX().eval(), vec3d::UnitX().eval()) == doctest::Approx(0.0));
  CHECK(geodesic_distance(vec3d::UnitX().eval(), vec3d::UnitZ().eval()) == doctest::Approx(M_PI / 2));
  CHECK(geodesic_distance(vec3d::UnitX().eval(), (-vec3d::UnitX()).eval()) == doctest::Approx(M_PI));
  CHECK_THROWS_AS(geodesic_distance(vec3d(2, 0, 0), vec3d::UnitX().eval()), contract_error);

  for (int i = 0; i < 50; ++i) {
    const vec3d a = random_unit(), b = random_unit(), c = random_unit();
    const double ab = geodesic_distance(a, b);
    CHECK(ab == doctest::Approx(geodesic_distance(b, a)));
    CHECK(ab <= geodesic_distance(a, c) + geodesic_distance(c, b) + 1e-12);
  }
}

TEST_CASE("long composition chains stay orthogonal with re-orthogonalization") {
  rotation_accumulator<double> acc(10000);
  mat3d raw = mat3d::Identity();
  for (int i = 0; i < 1000; ++i) {
    const mat3d step = rodrigues(random_unit(), random_angle(-0.5, 0.5));
    acc.push(step);
    raw = step * raw;
  }
  CHECK(is_rotation(acc.matrix(), 1e-9));
  // oracle: the polar projection of the raw product is the same rotation
  CHECK((acc.matrix() - nearest_rotation(raw)).cwiseAbs().maxCoeff() < 1e-9);

  // a million factors: drift stays bounded by the periodic projection
  rotation_accumulator<double> lots(10000);
  const mat3d step = rodrigues(random_unit(), 0.013);
  for (int i = 0; i < 1000000; ++i) lots.push(step);
  CHECK(is_rotation(lots.matrix(), 1e-9));
  CHECK(lots.count() == 1000000);
}

TEST_CASE("nearest_rotation projects perturbed matrices back onto SO(3)") {
  for (int i = 0; i < 20; ++i) {
    const mat3d r = rodrigues(random_unit(), random_angle(-3, 3));
    mat3d noisy = r;
    for (int k = 0; k < 9; ++k) noisy(k / 3, k % 3) += 1e-6 * random_angle(-1, 1);
    const mat3d fixed = nearest_rotation(noisy);
    CHECK(is_rotation(fixed, 1e-12));
    CHECK((fixed - r).cwiseAbs().maxCoeff() < 1e-5);
  }
}
