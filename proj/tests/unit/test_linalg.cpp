#include <catch2/catch_amalgamated.hpp>

#include "eca/linalg.hpp"
#include "eca/rng.hpp"

using namespace eca;

namespace {

// Classic Gram-Schmidt on random vectors, for property-test bases.
std::vector<Vector> random_orthonormal_basis(Rng& rng, std::size_t dim,
                                             std::size_t count) {
    std::vector<Vector> basis;
    while (basis.size() < count) {
        Vector v(dim);
        for (double& c : v) c = rng.gaussian();
        complement_project_inplace(v, basis);
        if (norm(v) < 1e-6) continue;
        normalize_inplace(v);
        basis.push_back(std::move(v));
    }
    return basis;
}

}  // namespace

TEST_CASE("dot products") {
    CHECK(dot(Vector{1, 0}, Vector{0, 1}) == 0.0);
    CHECK(dot(Vector{1, 2, 3}, Vector{1, 2, 3}) == 14.0);
    CHECK(dot(Vector{3, 4}, Vector{0.6, 0.8}) == 5.0);
    CHECK_THROWS_AS(dot(Vector{1, 2}, Vector{1, 2, 3}), DimensionError);
}

TEST_CASE("dot is symmetric bit-for-bit") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Vector a(7), b(7);
        for (double& x : a) x = rng.gaussian();
        for (double& x : b) x = rng.gaussian();
        CHECK(dot(a, b) == dot(b, a));
    }
}

TEST_CASE("normalize") {
    const Vector v = normalized(Vector{3, 4});
    CHECK(v[0] == Catch::Approx(0.6).margin(1e-15));
    CHECK(v[1] == Catch::Approx(0.8).margin(1e-15));
    CHECK(normalized(Vector{1, 0, 0}) == Vector{1, 0, 0});
    CHECK_THROWS_AS(normalized(Vector{0, 0}), DegenerateVectorError);

    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Vector w(5);
        for (double& x : w) x = rng.gaussian();
        const double c = 0.01 + 10.0 * rng.uniform01();
        Vector scaled = w;
        for (double& x : scaled) x *= c;
        const Vector n1 = normalized(w);
        const Vector n2 = normalized(scaled);
        for (std::size_t i = 0; i < w.size(); ++i)
            CHECK(n1[i] == Catch::Approx(n2[i]).margin(1e-12));
        CHECK(std::abs(norm(n1) - 1.0) < 1e-12);
    }
}

TEST_CASE("complement projection") {
    CHECK(complement_project(Vector{1, 1}, {Vector{1, 0}}) == Vector{0, 1});

    const Vector g{0.3, -0.7, 2.5};
    CHECK(complement_project(g, {}) == g);

    const double s = 1.0 / std::sqrt(2.0);
    const Vector in_span = complement_project(Vector{2, 2, 0}, {Vector{s, s, 0}});
    for (double c : in_span) CHECK(std::abs(c) < 1e-14);

    CHECK_THROWS_AS(complement_project(Vector{1, 2}, {Vector{1, 0, 0}}), DimensionError);
}

TEST_CASE("complement projection is idempotent and orthogonalizes") {
    Rng rng(404);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t dim = 4 + trial % 5;
        const auto basis = random_orthonormal_basis(rng, dim, 2);
        Vector g(dim);
        for (double& c : g) c = rng.gaussian();
        const double scale = std::max(norm(g), 1e-30);

        const Vector once = complement_project(g, basis);
        for (const auto& v : basis) CHECK(std::abs(dot(v, once)) < 1e-10 * scale);

        const Vector twice = complement_project(once, basis);
        for (std::size_t i = 0; i < dim; ++i)
            CHECK(std::abs(once[i] - twice[i]) < 1e-10 * scale);
    }
}

TEST_CASE("matvec and matmul") {
    Matrix a(2, 3);
    a.data = {1, 2, 3, 4, 5, 6};
    Vector y(2);
    matvec(a, Vector{1, 1, 1}, y);
    CHECK(y == Vector{6, 15});

    Vector yt(3);
    matvec_transposed(a, Vector{1, 1}, yt);
    CHECK(yt == Vector{5, 7, 9});

    Matrix b(3, 2);
    b.data = {1, 0, 0, 1, 1, 1};
    const Matrix c = matmul(a, b);
    CHECK(c.data == std::vector<double>{4, 5, 10, 11});
    CHECK_THROWS_AS(matmul(a, a), DimensionError);
}
