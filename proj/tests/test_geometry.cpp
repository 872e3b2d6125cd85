#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "peregrinn/geometry.hpp"
#include "testkit.hpp"

using namespace peregrinn;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vals) {
    Eigen::VectorXd v(static_cast<int>(vals.size()));
    int i = 0;
    for (double x : vals) v[i++] = x;
    return v;
}

Box unit_box(int d, double half = 1.0) {
    return Box(Eigen::VectorXd::Constant(d, -half), Eigen::VectorXd::Constant(d, half));
}

long binomial(int n, int k) {
    long r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

long region_bound(int planes, int dim) {
    long b = 0;
    for (int i = 0; i <= dim; ++i) b += binomial(planes, i);
    return b;
}

}  // namespace

TEST_CASE("contains: unit box polytope") {
    const Polytope p = to_polytope(unit_box(2));
    CHECK(contains(p, vec({0.0, 0.0}), 0.0));
    CHECK_FALSE(contains(p, vec({2.0, 0.0}), 0.0));
    CHECK(contains(p, vec({1.0 + 1e-9, 0.0}), 1e-7));
    CHECK_THROWS_AS(contains(p, vec({0.0}), 0.0), ShapeError);
}

TEST_CASE("contains: feasible point from the LP certificate") {
    std::mt19937_64 rng(3);
    int feasible_found = 0;
    while (feasible_found < 20) {
        Eigen::MatrixXd a(5, 2);
        Eigen::VectorXd b(5);
        for (int r = 0; r < 5; ++r) {
            a(r, 0) = testkit::gaussian(rng);
            a(r, 1) = testkit::gaussian(rng);
            b[r] = testkit::uniform(rng, -0.5, 2.0);
        }
        const Polytope p(a, b);
        LinearProgram lp;
        lp.add_variable(-20.0, 20.0);
        lp.add_variable(-20.0, 20.0);
        lp.objective = vec({0.0, 0.0});
        for (int r = 0; r < 5; ++r)
            lp.add_constraint(a.row(r).transpose(), Sense::LessEq, b[r]);
        const LpOutcome out = solve(lp);
        if (out.status != LpStatus::Optimal) continue;
        ++feasible_found;
        CHECK(contains(p, out.solution, 1e-7));
    }
}

TEST_CASE("sign patterns: contradictory half-spaces") {
    // x1 >= 1 and x1 <= -1 over [-10,10]^2.
    const std::vector<std::pair<Hyperplane, Side>> planes{
        {{vec({1.0, 0.0}), -1.0}, Side::Plus},
        {{vec({-1.0, 0.0}), -1.0}, Side::Plus},
    };
    CHECK_FALSE(sign_pattern_feasible(planes, to_polytope(unit_box(2, 10.0))));
}

TEST_CASE("sign patterns: single crossing plane is feasible on both sides") {
    const Hyperplane h{vec({1.0, 1.0}), 0.1};
    const Polytope box = to_polytope(unit_box(2, 5.0));
    CHECK(sign_pattern_feasible({{h, Side::Plus}}, box));
    CHECK(sign_pattern_feasible({{h, Side::Minus}}, box));
}

TEST_CASE("sign patterns: adding a constraint never flips false to true") {
    std::mt19937_64 rng(7);
    const Polytope box = to_polytope(unit_box(2, 4.0));
    for (int t = 0; t < 40; ++t) {
        std::vector<std::pair<Hyperplane, Side>> planes;
        for (int i = 0; i < 3; ++i) {
            Hyperplane h{vec({testkit::gaussian(rng), testkit::gaussian(rng)}),
                         testkit::uniform(rng, -1.0, 1.0)};
            planes.emplace_back(std::move(h), rng() & 1 ? Side::Plus : Side::Minus);
        }
        bool prev = sign_pattern_feasible({planes[0]}, box);
        for (size_t k = 2; k <= planes.size(); ++k) {
            const bool now = sign_pattern_feasible(
                std::vector<std::pair<Hyperplane, Side>>(planes.begin(), planes.begin() + k), box);
            if (!prev) CHECK_FALSE(now);
            prev = now;
        }
    }
}

TEST_CASE("sign patterns: feasible count obeys the arrangement bound") {
    std::mt19937_64 rng(11);
    const Polytope domain = to_polytope(unit_box(2, 50.0));
    for (int trial = 0; trial < 12; ++trial) {
        std::vector<Hyperplane> planes;
        for (int i = 0; i < 3; ++i)
            planes.push_back({vec({testkit::gaussian(rng), testkit::gaussian(rng)}),
                              testkit::uniform(rng, -1.0, 1.0)});
        int feasible = 0;
        for (int mask = 0; mask < 8; ++mask) {
            std::vector<std::pair<Hyperplane, Side>> signed_planes;
            for (int i = 0; i < 3; ++i)
                signed_planes.emplace_back(planes[i], (mask >> i) & 1 ? Side::Plus : Side::Minus);
            if (sign_pattern_feasible(signed_planes, domain)) ++feasible;
        }
        CHECK(feasible <= region_bound(3, 2));  // 1 + 3 + 3 = 7
    }
}

TEST_CASE("volume fraction: splitting plane over symmetric samples") {
    const auto samples = sample_box(unit_box(2), 10000, 123);
    const Hyperplane h{vec({1.0, 0.0}), 0.0};
    CHECK(volume_fraction(h, Side::Plus, samples) == doctest::Approx(0.5).epsilon(0.04));

    const Hyperplane outside{vec({1.0, 0.0}), -5.0};  // x1 >= 5 never holds in the box
    CHECK(volume_fraction(outside, Side::Plus, samples) == 0.0);
    CHECK_THROWS_AS(volume_fraction(h, Side::Plus, {}), SamplingError);
}

TEST_CASE("volume fraction: sides overlap on the boundary") {
    std::mt19937_64 rng(13);
    const auto samples = sample_box(unit_box(2), 500, 99);
    for (int t = 0; t < 20; ++t) {
        const Hyperplane h{vec({testkit::gaussian(rng), testkit::gaussian(rng)}),
                           testkit::uniform(rng, -0.5, 0.5)};
        const double total =
            volume_fraction(h, Side::Plus, samples) + volume_fraction(h, Side::Minus, samples);
        CHECK(total >= 1.0);
    }
}

TEST_CASE("volume fraction matches the grid oracle within 3 sigma") {
    std::mt19937_64 rng(17);
    for (int d = 1; d <= 3; ++d) {
        const Box box = unit_box(d, 1.5);
        const int n = 10000;
        const auto samples = sample_box(box, n, 1000 + d);
        for (int t = 0; t < 8; ++t) {
            Eigen::VectorXd normal(d);
            for (int j = 0; j < d; ++j) normal[j] = testkit::gaussian(rng);
            if (normal.norm() < 1e-9) normal[0] = 1.0;
            const Hyperplane h{normal, testkit::uniform(rng, -1.0, 1.0)};
            const double exact = testkit::halfspace_box_fraction_grid(h, Side::Plus, box);
            const double mc = volume_fraction(h, Side::Plus, samples);
            const double sigma = std::sqrt(std::max(exact * (1 - exact), 1e-4) / n);
            CHECK(std::abs(mc - exact) <= 3.5 * sigma + 0.01);
        }
    }
}

TEST_CASE("sampling: determinism and uniformity") {
    const Box b1 = Box(vec({0.0}), vec({1.0}));
    const auto s1 = sample_box(b1, 3, 7);
    const auto s2 = sample_box(b1, 3, 7);
    REQUIRE(s1.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(s1[i] == s2[i]);

    const auto many = sample_box(unit_box(2), 10000, 42);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& x : many) mean += x;
    mean /= many.size();
    CHECK(std::abs(mean[0]) < 0.05);
    CHECK(std::abs(mean[1]) < 0.05);
}

TEST_CASE("sampling: triangle acceptance fraction matches its area") {
    // Triangle {x >= 0, y >= 0, x + y <= 1} inside [0,1]^2: area 1/2.
    Eigen::MatrixXd a(3, 2);
    a << -1, 0, 0, -1, 1, 1;
    const Polytope tri(a, vec({0.0, 0.0, 1.0}));

    const auto box_samples = sample_box(Box(vec({0.0, 0.0}), vec({1.0, 1.0})), 20000, 5);
    long inside = 0;
    for (const auto& x : box_samples)
        if (contains(tri, x, 0.0)) ++inside;
    const double frac = static_cast<double>(inside) / box_samples.size();
    const double sigma = std::sqrt(0.25 / box_samples.size());
    CHECK(std::abs(frac - 0.5) <= 3.0 * sigma + 1e-3);

    const auto accepted = sample_polytope(tri, 500, 21);
    REQUIRE(accepted.size() == 500);
    for (const auto& x : accepted) CHECK(contains(tri, x, 1e-12));
}

TEST_CASE("sampling: rejection cap signals degenerate regions") {
    // The diagonal {x1 = x2} in [0,1]^2 has measure zero but a full
    // bounding box, so rejection sampling cannot succeed.
    Eigen::MatrixXd a(6, 2);
    a << 1, -1, -1, 1, 1, 0, -1, 0, 0, 1, 0, -1;
    const Polytope diagonal(a, vec({0.0, 0.0, 1.0, 0.0, 1.0, 0.0}));
    CHECK_THROWS_AS(sample_polytope(diagonal, 100, 3), SamplingError);
}

TEST_CASE("bounding box tightens to the polytope hull") {
    Eigen::MatrixXd a(3, 2);
    a << -1, 0, 0, -1, 1, 1;
    const Polytope tri(a, vec({0.0, 0.0, 2.0}));
    const Box bb = bounding_box(tri);
    CHECK(bb.lower[0] == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(bb.lower[1] == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(bb.upper[0] == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(bb.upper[1] == doctest::Approx(2.0).epsilon(1e-7));

    Eigen::MatrixXd half(1, 1);
    half << 1.0;
    CHECK_THROWS_AS(bounding_box(Polytope(half, vec({1.0}))), DomainError);
}
