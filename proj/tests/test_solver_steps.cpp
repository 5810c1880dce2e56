#include <doctest.h>

#include "kaczmarz/solver.hpp"

using namespace kaczmarz;

TEST_CASE("orthogonal step lands on the hyperplane, hand value frozen") {
    const RowMatrix a = RowMatrix::dense(2, 2, {7, -8, 8, -7});
    const Vector b{-1, 1};
    const Vector x0{0, 0};
    const Vector x1 = orthogonal_step(a, b, 0, x0);
    CHECK(x1[0] == doctest::Approx(-7.0 / 113.0).epsilon(1e-15));
    CHECK(x1[1] == doctest::Approx(8.0 / 113.0).epsilon(1e-15));
    CHECK(std::abs(a.row_dot(0, x1) - b[0]) <= 1e-14);
}

TEST_CASE("orthogonal step: iterate already on the hyperplane stays put") {
    const RowMatrix a = RowMatrix::dense(1, 2, {3, 4});
    const Vector b{25};
    const Vector x{3, 4};  // 3*3+4*4 = 25 exactly
    const Vector y = orthogonal_step(a, b, 0, x);
    CHECK(y[0] == x[0]);
    CHECK(y[1] == x[1]);
}

TEST_CASE("orthogonal step: identity row solves a coordinate") {
    const RowMatrix eye = RowMatrix::dense(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const Vector y = orthogonal_step(eye, {1, 2, 3}, 0, {0, 0, 0});
    CHECK(y == Vector{1, 0, 0});
}

TEST_CASE("orthogonal step refuses zero rows and bad indices") {
    const RowMatrix a = RowMatrix::dense(2, 2, {1, 1, 0, 0});
    CHECK_THROWS_AS(orthogonal_step(a, {1, 1}, 1, {0, 0}), NumericError);
    CHECK_THROWS_AS(orthogonal_step(a, {1, 1}, 5, {0, 0}), ConfigError);
}

TEST_CASE("oblique direction: orthogonal rows degenerate to the plain row") {
    const RowMatrix a = RowMatrix::dense(2, 3, {1, 0, 0, 0, 2, 0});
    const ObliqueGeometry g = oblique_direction(a, 0, 1);
    CHECK(g.D == 0.0);
    CHECK(g.h == 4.0);  // M(2)
    CHECK(g.sin2_theta == 1.0);
    CHECK(g.w.values == Vector{0, 2, 0});
}

TEST_CASE("oblique direction: parallel rows yield the zero direction") {
    const RowMatrix a = RowMatrix::dense(2, 2, {1, 2, 2, 4});
    const ObliqueGeometry g = oblique_direction(a, 0, 1);
    CHECK(g.h == 0.0);
    CHECK(g.w.values == Vector{0, 0});
}

TEST_CASE("oblique direction: frozen hand values for the coherent pair") {
    const RowMatrix a = RowMatrix::dense(2, 2, {7, -8, 8, -7});
    const ObliqueGeometry g = oblique_direction(a, 0, 1);
    CHECK(g.D == 112.0);
    CHECK(g.h == doctest::Approx(225.0 / 113.0).epsilon(1e-14));
    CHECK(g.w.values[0] == doctest::Approx(120.0 / 113.0).epsilon(1e-14));
    CHECK(g.w.values[1] == doctest::Approx(105.0 / 113.0).epsilon(1e-14));
    // direction orthogonal to the previous row
    CHECK(std::abs(g.w.values[0] * 7.0 + g.w.values[1] * (-8.0)) <= 1e-13);
    CHECK(g.sin2_theta == doctest::Approx((225.0 / 113.0) / 113.0).epsilon(1e-14));
}

TEST_CASE("oblique direction on sparse rows merges supports") {
    const RowMatrix a = RowMatrix::sparse(2, 4, {0, 2, 4}, {0, 2, 1, 2}, {1, 1, 2, 1});
    const ObliqueGeometry g = oblique_direction(a, 0, 1);
    CHECK_FALSE(g.w.dense);
    // D = <(1,0,1,0),(0,2,1,0)> = 1; w = a2 - (1/2) a1 = (-1/2, 2, 1/2, 0)
    CHECK(g.D == 1.0);
    REQUIRE(g.w.indices.size() == 3);
    CHECK(g.w.indices[0] == 0);
    CHECK(g.w.values[0] == -0.5);
    CHECK(g.w.values[1] == 2.0);
    CHECK(g.w.values[2] == 0.5);
    CHECK(g.h == doctest::Approx(5.0 - 0.5).epsilon(1e-15));
    CHECK(g.w.norm_sq_computed() == doctest::Approx(g.h).epsilon(1e-12));
    CHECK_THROWS_AS(oblique_direction(a, 1, 1), ConfigError);
}

TEST_CASE("oblique step solves the coherent fixture in one move") {
    const RowMatrix a = RowMatrix::dense(2, 2, {7, -8, 8, -7});
    const Vector b{-1, 1};
    const Vector x1 = orthogonal_step(a, b, 0, {0, 0});
    SolverConfig cfg;
    auto [x2, rec] = oblique_step(a, b, x1, 0, 1, cfg);
    CHECK(rec.kind == StepKind::oblique);
    REQUIRE(rec.geometry.has_value());
    CHECK(rec.geometry->r == doctest::Approx(225.0 / 113.0).epsilon(1e-13));
    CHECK(rec.geometry->alpha == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(x2[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(x2[1] == doctest::Approx(1.0).epsilon(1e-13));
    // new iterate is on both hyperplanes
    CHECK(std::abs(a.row_dot(0, x2) - b[0]) <= 1e-12);
    CHECK(std::abs(a.row_dot(1, x2) - b[1]) <= 1e-12);
}

TEST_CASE("oblique step equals the orthogonal step when rows are orthogonal") {
    const RowMatrix a = RowMatrix::dense(2, 3, {1, 0, 0, 0, 2, 0});
    const Vector b{1, 6};
    const Vector x1 = orthogonal_step(a, b, 0, {0, 0, 0});
    SolverConfig cfg;
    auto [x2, rec] = oblique_step(a, b, x1, 0, 1, cfg);
    const Vector x2_orth = orthogonal_step(a, b, 1, x1);
    CHECK(rec.kind == StepKind::oblique);
    for (std::size_t j = 0; j < 3; ++j) CHECK(x2[j] == x2_orth[j]);  // bitwise: D is exactly 0
}

TEST_CASE("coincident hyperplanes: fallback leaves the iterate essentially unchanged") {
    const RowMatrix a = RowMatrix::dense(2, 2, {1, 2, 2, 4});
    const Vector b{3, 6};  // same hyperplane twice
    const Vector x1 = orthogonal_step(a, b, 0, {0, 0});
    SolverConfig cfg;  // default: fallback
    auto [x2, rec] = oblique_step(a, b, x1, 0, 1, cfg);
    CHECK(rec.kind == StepKind::orthogonal);
    CHECK(x2[0] == doctest::Approx(x1[0]).epsilon(1e-14));
    CHECK(x2[1] == doctest::Approx(x1[1]).epsilon(1e-14));

    cfg.degenerate = DegeneratePolicy::skip;
    auto [x3, rec3] = oblique_step(a, b, x1, 0, 1, cfg);
    CHECK(rec3.kind == StepKind::skipped_degenerate);
    CHECK(x3[0] == x1[0]);
    CHECK(x3[1] == x1[1]);
}
