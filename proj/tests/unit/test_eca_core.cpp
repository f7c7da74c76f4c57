#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "eca/eca.hpp"
#include "eca/rng.hpp"

using namespace eca;

namespace {

// Emulator computing y = W x exactly (identity activation, zero bias).
std::shared_ptr<const MlpEmulator> linear_emulator(Matrix w) {
    DenseLayer l;
    l.bias.assign(w.rows, 0.0);
    l.weights = std::move(w);
    l.activation = Activation::identity;
    return std::make_shared<const MlpEmulator>(std::vector<DenseLayer>{l});
}

std::shared_ptr<const MlpEmulator> identity_emulator(std::size_t d) {
    Matrix w(d, d, 0.0);
    for (std::size_t i = 0; i < d; ++i) w(i, i) = 1.0;
    return linear_emulator(std::move(w));
}

// Picks out the first coordinate: y = x_1.
std::shared_ptr<const MlpEmulator> first_coord_emulator(std::size_t d) {
    Matrix w(1, d, 0.0);
    w(0, 0) = 1.0;
    return linear_emulator(std::move(w));
}

EcaModel model_with_basis(std::shared_ptr<const MlpEmulator> emu,
                          std::vector<Vector> v) {
    const std::size_t k = v.size();
    return EcaModel(std::move(emu), std::move(v), Vector(k, 0.0), Vector(k, 0.0),
                    std::nullopt);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.gaussian();
    return m;
}

// Independent oracle for the covered-variance loss: explicit residual matrix,
// explicit transpose product, trace of the q x q grams.
double r2loss_bruteforce(const Matrix& y_pred, const Matrix& y_known) {
    Matrix resid(y_known.rows, y_known.cols);
    for (std::size_t i = 0; i < y_known.rows; ++i)
        for (std::size_t j = 0; j < y_known.cols; ++j)
            resid(i, j) = y_known(i, j) - y_pred(i, j);
    auto trace_gram = [](const Matrix& m) {
        double tr = 0.0;
        for (std::size_t a = 0; a < m.cols; ++a) {
            double diag = 0.0;
            for (std::size_t i = 0; i < m.rows; ++i) diag += m(i, a) * m(i, a);
            tr += diag;
        }
        return tr;
    };
    return trace_gram(resid) / trace_gram(y_known);
}

}  // namespace

TEST_CASE("r2loss hand cases") {
    Matrix known(2, 1);
    known.data = {1, -1};
    Matrix zero(2, 1, 0.0);
    CHECK(r2loss(known, known) == 0.0);
    CHECK(r2loss(zero, known) == 1.0);

    Matrix half(2, 1);
    half.data = {0.5, -0.5};
    CHECK(r2loss(half, known) == 0.25);

    CHECK_THROWS_AS(r2loss(zero, zero), DegenerateDataError);
    CHECK_THROWS_AS(r2loss(Matrix(2, 2, 0.0), known), DimensionError);
}

TEST_CASE("factored projected loss matches the definitional projection path") {
    // The fit kernel factors the first layer along x_proj = b + t v; its loss
    // must agree with forwarding the explicitly built x_proj matrix.
    Rng rng(909);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 3 + rng.bounded(5);
        const std::size_t n = 12;

        std::vector<DenseLayer> layers;
        std::size_t prev = d;
        for (std::size_t w : {5, 4, 2}) {
            DenseLayer l;
            l.weights = Matrix(w, prev);
            for (double& c : l.weights.data) c = 0.6 * rng.gaussian();
            l.bias.assign(w, 0.0);
            for (double& b : l.bias) b = 0.2 * rng.gaussian();
            l.activation = w == 2 ? Activation::identity : Activation::tanh;
            layers.push_back(std::move(l));
            prev = w;
        }
        const MlpEmulator emu(std::move(layers));

        Matrix x(n, d), y(n, 2);
        for (double& c : x.data) c = rng.gaussian();
        for (double& c : y.data) c = rng.gaussian();

        Vector kept(d), v(d);
        for (double& c : kept) c = rng.gaussian();
        normalize_inplace(kept);
        for (double& c : v) c = rng.gaussian();
        complement_project_inplace(v, {kept});
        normalize_inplace(v);

        Matrix base(n, d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            axpy(dot(kept, x.row(i)), kept, base.row(i));

        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        const double denom = detail::squared_sum(y, rows);

        detail::ProjectedPlan plan = detail::make_projected_plan(emu, x, y, base);
        const double fast = detail::projected_loss_grad(plan, v, rows, denom, {});

        Matrix xproj(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = dot(v, x.row(i));
            for (std::size_t k = 0; k < d; ++k) xproj(i, k) = base(i, k) + t * v[k];
        }
        const double reference = r2loss(emu.forward(xproj), y);
        CHECK(fast == Catch::Approx(reference).epsilon(1e-12));
    }
}

TEST_CASE("r2loss agrees with the brute-force trace oracle") {
    Rng rng(1001);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.bounded(30);
        const std::size_t q = 1 + rng.bounded(6);
        Matrix pred(n, q), known(n, q);
        for (double& v : pred.data) v = rng.gaussian();
        for (double& v : known.data) v = rng.gaussian();
        CHECK(std::abs(r2loss(pred, known) - r2loss_bruteforce(pred, known)) < 1e-12);
    }
}

TEST_CASE("transform hand cases") {
    const auto model = model_with_basis(identity_emulator(2), {Vector{1, 0}});
    Matrix x(1, 2);
    x.data = {3, 4};
    CHECK(model.transform(x, 1).data == std::vector<double>{3});

    const double s = 1.0 / std::sqrt(2.0);
    const auto diag = model_with_basis(identity_emulator(2), {Vector{s, s}});
    Matrix ones(1, 2, 1.0);
    CHECK(diag.transform(ones, 1)(0, 0) == Catch::Approx(std::sqrt(2.0)).margin(1e-15));

    Matrix zero(1, 2, 0.0);
    CHECK(diag.transform(zero, 1).data == std::vector<double>{0});

    CHECK_THROWS_AS(model.transform(x, 2), DimensionError);
    CHECK_THROWS_AS(model.transform(Matrix(1, 3, 0.0), 1), DimensionError);
}

TEST_CASE("expand hand cases") {
    const auto model = model_with_basis(identity_emulator(2), {Vector{1, 0}});
    Matrix t(1, 1, 3.0);
    CHECK(model.expand(t).data == std::vector<double>{3, 0});

    Matrix t0(1, 1, 0.0);
    CHECK(model.expand(t0).data == std::vector<double>{0, 0});

    const double s = 1.0 / std::sqrt(2.0);
    const auto two = model_with_basis(identity_emulator(2),
                                      {Vector{s, s}, Vector{s, -s}});
    Matrix scores(1, 2);
    scores.data = {std::sqrt(2.0), 0.0};
    const Matrix x = two.expand(scores);
    CHECK(x(0, 0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(x(0, 1) == Catch::Approx(1.0).margin(1e-15));

    Matrix wide(1, 3, 0.0);
    CHECK_THROWS_AS(two.expand(wide), DimensionError);
}

TEST_CASE("project basics and idempotence") {
    const auto model = model_with_basis(identity_emulator(2), {Vector{1, 0}});
    Matrix x(1, 2);
    x.data = {3, 4};
    CHECK(model.project(x, 1).data == std::vector<double>{3, 0});

    // complete basis returns the input
    const double s = 1.0 / std::sqrt(2.0);
    const auto full = model_with_basis(identity_emulator(2),
                                       {Vector{s, s}, Vector{s, -s}});
    const Matrix back = full.project(x, 2);
    CHECK(back(0, 0) == Catch::Approx(3.0).margin(1e-10));
    CHECK(back(0, 1) == Catch::Approx(4.0).margin(1e-10));

    // orthogonal input vanishes
    Matrix ortho(1, 2);
    ortho.data = {0, 7};
    for (double v : model.project(ortho, 1).data) CHECK(std::abs(v) < 1e-10);

    // idempotence and literal composition on random data
    const Matrix r = gaussian_matrix(40, 2, 5);
    const Matrix p1 = model.project(r, 1);
    const Matrix p2 = model.project(p1, 1);
    for (std::size_t i = 0; i < p1.data.size(); ++i)
        CHECK(std::abs(p1.data[i] - p2.data[i]) < 1e-10);
    CHECK(model.expand(model.transform(r, 1)).data == p1.data);
}

TEST_CASE("covered variance with an identity chain") {
    const auto emu = identity_emulator(2);
    const auto full = model_with_basis(emu, {Vector{1, 0}, Vector{0, 1}});
    const Matrix x = gaussian_matrix(100, 2, 8);
    CHECK(full.covered_variance(x, x, 2) == Catch::Approx(1.0).margin(1e-12));

    // rank 0: prediction is the network at the origin
    const double rho0 = full.covered_variance(x, x, 0);
    Matrix zeros(x.rows, 2, 0.0);
    CHECK(rho0 == generalized_r2(emu->forward(zeros), x));
}

TEST_CASE("x covered variance") {
    const double s = 1.0 / std::sqrt(2.0);
    const auto full = model_with_basis(identity_emulator(2),
                                       {Vector{s, s}, Vector{s, -s}});
    const Matrix x = gaussian_matrix(200, 2, 9);
    CHECK(full.x_covered_variance(x, 2) == Catch::Approx(1.0).margin(1e-10));
    CHECK(full.x_covered_variance(x, 0) == 0.0);

    // rank 1 on isotropic data covers about 1/d of input variance
    const std::size_t d = 4;
    std::vector<Vector> basis{Vector(d, 0.0)};
    basis[0][1] = 1.0;
    const auto rank1 = model_with_basis(identity_emulator(d), std::move(basis));
    const Matrix xd = gaussian_matrix(4000, d, 10);
    CHECK(rank1.x_covered_variance(xd, 1) ==
          Catch::Approx(1.0 / static_cast<double>(d)).margin(0.02));
}

TEST_CASE("fit recovers the axis of a linear response") {
    const std::size_t d = 2;
    const Matrix x = gaussian_matrix(400, d, 21);
    Matrix y(x.rows, 1);
    for (std::size_t i = 0; i < x.rows; ++i) y(i, 0) = x(i, 0);  // y = x_1

    EcaModel model(first_coord_emulator(d));
    FitOptions opts;
    opts.seed = 3;
    opts.epochs = 3000;
    opts.tol = 1e-9;
    model.fit(x, y, 1, opts);

    REQUIRE(model.rank() == 1);
    const Vector& v = model.components()[0];
    CHECK(std::abs(v[0] - 1.0) < 1e-2);  // canonical sign makes it +e1
    CHECK(std::abs(v[1]) < 1e-2);
    CHECK(model.y_var()[0] > 0.999);
}

TEST_CASE("fit validation errors") {
    const Matrix x = gaussian_matrix(50, 2, 33);
    Matrix y(50, 1);
    for (std::size_t i = 0; i < 50; ++i) y(i, 0) = x(i, 0);
    EcaModel model(first_coord_emulator(2));

    FitOptions opts;
    opts.seed = 1;
    CHECK_THROWS_AS(model.fit(x, y, 5, opts), ConfigError);
    CHECK_THROWS_AS(model.fit(x, Matrix(50, 1, 0.0), 1, opts), DegenerateDataError);
    CHECK_THROWS_AS(model.fit(Matrix(49, 2, 1.0), y, 1, opts), DimensionError);
    CHECK_THROWS_AS(model.fit(x, Matrix(50, 2, 1.0), 1, opts), DimensionError);

    Matrix bad = x;
    bad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(model.fit(bad, y, 1, opts), NumericsError);

    FitOptions zero_lr = opts;
    zero_lr.lr = 0.0;
    CHECK_THROWS_AS(model.fit(x, y, 1, zero_lr), ConfigError);
}

TEST_CASE("fit is bit-deterministic under a fixed seed") {
    const Matrix x = gaussian_matrix(300, 3, 55);
    Matrix y(x.rows, 1);
    for (std::size_t i = 0; i < x.rows; ++i) y(i, 0) = x(i, 0) + 0.5 * x(i, 1);

    Matrix w(1, 3, 0.0);
    w(0, 0) = 1.0;
    w(0, 1) = 0.5;
    const auto emu = linear_emulator(std::move(w));

    FitOptions opts;
    opts.seed = 77;
    opts.epochs = 50;

    EcaModel a(emu), b(emu);
    a.fit(x, y, 2, opts);
    b.fit(x, y, 2, opts);
    REQUIRE(a.rank() == 2);
    CHECK(a.components()[0] == b.components()[0]);
    CHECK(a.components()[1] == b.components()[1]);
    CHECK(a.y_var() == b.y_var());
    CHECK(a.x_var() == b.x_var());

    // set_seed is an equivalent way to pin the stream
    EcaModel c(emu);
    c.set_seed(77);
    c.fit(x, y, 2, FitOptions{.epochs = 50});
    CHECK(c.components()[0] == a.components()[0]);
}

TEST_CASE("fit orthonormality and monotone coverage") {
    const std::size_t d = 4;
    const Matrix x = gaussian_matrix(500, d, 71);
    Matrix y(x.rows, 2);
    for (std::size_t i = 0; i < x.rows; ++i) {
        y(i, 0) = x(i, 0) + 0.3 * x(i, 2);
        y(i, 1) = x(i, 1);
    }
    Matrix w(2, d, 0.0);
    w(0, 0) = 1.0;
    w(0, 2) = 0.3;
    w(1, 1) = 1.0;
    EcaModel model(linear_emulator(std::move(w)));

    FitOptions opts;
    opts.seed = 13;
    opts.epochs = 200;
    model.fit(x, y, 3, opts);

    REQUIRE(model.rank() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(norm(model.components()[i]) - 1.0) < 1e-8);
        for (std::size_t j = 0; j < i; ++j)
            CHECK(std::abs(dot(model.components()[i], model.components()[j])) < 1e-6);
    }
    CHECK(model.y_var()[0] <= model.y_var()[1] + 1e-12);
    CHECK(model.y_var()[1] <= model.y_var()[2] + 1e-12);

    // canonical sign: the largest-magnitude entry of each component is positive
    for (const Vector& v : model.components()) {
        std::size_t arg = 0;
        for (std::size_t k = 1; k < v.size(); ++k)
            if (std::abs(v[k]) > std::abs(v[arg])) arg = k;
        CHECK(v[arg] > 0.0);
    }
}

TEST_CASE("keep semantics preserve earlier components bit-exactly") {
    const std::size_t d = 4;
    const Matrix x = gaussian_matrix(400, d, 91);
    Matrix y(x.rows, 2);
    for (std::size_t i = 0; i < x.rows; ++i) {
        y(i, 0) = x(i, 0);
        y(i, 1) = 0.8 * x(i, 1);
    }
    Matrix w(2, d, 0.0);
    w(0, 0) = 1.0;
    w(1, 1) = 0.8;
    const auto emu = linear_emulator(std::move(w));

    FitOptions opts;
    opts.seed = 5;
    opts.epochs = 120;
    EcaModel model(emu);
    model.fit(x, y, 3, opts);
    const auto v_orig = model.components();
    const auto y_var_orig = model.y_var();

    FitOptions refit = opts;
    refit.seed = 999;
    model.fit(x, y, 3, refit, /*keep=*/-1);
    REQUIRE(model.rank() == 3);
    CHECK(model.components()[0] == v_orig[0]);
    CHECK(model.components()[1] == v_orig[1]);
    CHECK(model.y_var()[0] == y_var_orig[0]);
    CHECK(model.y_var()[1] == y_var_orig[1]);

    // keep = 1 drops everything past the first component before refitting
    EcaModel fresh(emu);
    fresh.fit(x, y, 3, opts);
    fresh.fit(x, y, 2, refit, /*keep=*/1);
    CHECK(fresh.rank() == 2);
    CHECK(fresh.components()[0] == v_orig[0]);

    CHECK_THROWS_AS(model.fit(x, y, 1, refit, /*keep=*/2), ConfigError);
}

TEST_CASE("sign flip leaves covered variance unchanged and negates scores") {
    const std::size_t d = 3;
    const Matrix x = gaussian_matrix(250, d, 101);
    Matrix y(x.rows, 1);
    for (std::size_t i = 0; i < x.rows; ++i) y(i, 0) = x(i, 0);
    const auto emu = first_coord_emulator(d);

    EcaModel model(emu);
    FitOptions opts;
    opts.seed = 31;
    opts.epochs = 150;
    model.fit(x, y, 2, opts);

    auto flipped_v = model.components();
    for (double& c : flipped_v[1]) c = -c;
    const EcaModel flipped(emu, flipped_v, model.y_var(), model.x_var(), std::nullopt);

    const double rho_a = model.covered_variance(x, y, 2);
    const double rho_b = flipped.covered_variance(x, y, 2);
    CHECK(std::abs(rho_a - rho_b) < 1e-12);

    const Matrix ta = model.transform(x, 2);
    const Matrix tb = flipped.transform(x, 2);
    for (std::size_t i = 0; i < x.rows; ++i) {
        CHECK(ta(i, 0) == tb(i, 0));
        CHECK(ta(i, 1) == -tb(i, 1));
    }
}

TEST_CASE("inverse solves the linear identity chain") {
    // emulator y = x_1, basis e1: predicting from scores is y = t
    const auto model = model_with_basis(first_coord_emulator(2), {Vector{1, 0}});
    Matrix y(1, 1, 0.5);
    const auto [t, err] = model.inverse(y, 1, {});
    CHECK(std::abs(t(0, 0) - 0.5) < 1e-3);
    CHECK(err[0] < 1e-6);

    const auto [xp, err2] = model.reconstruct(y, 1, {});
    CHECK(std::abs(xp(0, 0) - 0.5) < 1e-3);
    CHECK(std::abs(xp(0, 1)) == 0.0);
}

TEST_CASE("reconstruct is literally expand of inverse") {
    const double s = 1.0 / std::sqrt(2.0);
    Matrix w(2, 3, 0.0);
    w(0, 0) = 1.0;
    w(1, 1) = -0.5;
    const auto model = model_with_basis(linear_emulator(std::move(w)),
                                        {Vector{s, s, 0}, Vector{0, 0, 1}});
    const Matrix y = gaussian_matrix(7, 2, 17);
    InverseOptions opts;
    const auto [t, err_a] = model.inverse(y, 2, opts);
    const auto [xp, err_b] = model.reconstruct(y, 2, opts);
    CHECK(xp.data == model.expand(t).data);
    CHECK(err_a == err_b);
}

TEST_CASE("inverse validation") {
    const auto unfitted = EcaModel(first_coord_emulator(2));
    Matrix y(1, 1, 0.5);
    CHECK_THROWS_AS(unfitted.inverse(y, 1, {}), StateError);
    CHECK_THROWS_AS(unfitted.reconstruct(y, {}), StateError);

    const auto model = model_with_basis(first_coord_emulator(2), {Vector{1, 0}});
    CHECK_THROWS_AS(model.inverse(y, 2, {}), StateError);
    CHECK_THROWS_AS(model.inverse(Matrix(1, 3, 0.0), 1, {}), DimensionError);

    Matrix bad(1, 1, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(model.inverse(bad, 1, {}), NumericsError);
}

TEST_CASE("inverse recovers scores of emulator-consistent targets") {
    // y = (t, 2t) through v = e1; targets generated from known scores
    Matrix w(2, 2, 0.0);
    w(0, 0) = 1.0;
    w(1, 0) = 2.0;
    const auto model = model_with_basis(linear_emulator(std::move(w)), {Vector{1, 0}});

    Rng rng(202);
    Matrix y(20, 2);
    Vector expected(20);
    for (std::size_t i = 0; i < 20; ++i) {
        const double t0 = 2.0 * rng.uniform01() - 1.0;
        expected[i] = t0;
        y(i, 0) = t0;
        y(i, 1) = 2.0 * t0;
    }
    const auto [t, err] = model.inverse(y, 1, {});
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(t(i, 0) == Catch::Approx(expected[i]).margin(2e-3));
        CHECK(err[i] < 1e-5);
    }
}
