#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "eca/data_io.hpp"

using namespace eca;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("eca_test_" + std::to_string(std::rand()) +
                std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("standardizer statistics") {
    Matrix x(2, 1);
    x.data = {0, 2};
    const Standardizer s = fit_standardizer(x);
    CHECK(s.means == Vector{1});
    CHECK(s.stds == Vector{1});  // population std over {0, 2}

    Matrix c(5, 1, 3.25);
    CHECK_THROWS_AS(fit_standardizer(c), DegenerateDataError);
    Matrix one(1, 1, 0.0);
    CHECK_THROWS_AS(fit_standardizer(one), DegenerateDataError);
}

TEST_CASE("standardize and its inverse") {
    Standardizer s;
    s.means = {1};
    s.stds = {1};
    Matrix x(1, 1, 2.0);
    CHECK(standardize(s, x)(0, 0) == 1.0);

    Standardizer s2;
    s2.means = {0};
    s2.stds = {2};
    Matrix xt(1, 1, 1.0);
    CHECK(inverse_standardize(s2, xt)(0, 0) == 2.0);

    CHECK_THROWS_AS(standardize(s, Matrix(1, 3, 0.0)), DimensionError);
}

TEST_CASE("standardized output has zero mean and unit std") {
    Rng rng(17);
    Matrix x(400, 3);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
            x(i, j) = 3.0 * rng.gaussian() + static_cast<double>(j);
    const Standardizer s = fit_standardizer(x);
    const Matrix xt = standardize(s, x);

    const Standardizer check = fit_standardizer(xt);
    for (std::size_t j = 0; j < x.cols; ++j) {
        CHECK(std::abs(check.means[j]) < 1e-10);
        CHECK(std::abs(check.stds[j] - 1.0) < 1e-10);
    }

    const Matrix back = inverse_standardize(s, xt);
    for (std::size_t k = 0; k < x.data.size(); ++k)
        CHECK(back.data[k] == Catch::Approx(x.data[k]).margin(1e-10));
}

TEST_CASE("rudimentary generator, scalar mode") {
    const RudimentaryData d1 = gen_rudimentary(1, 100, 5, false);
    CHECK(d1.ground_truth == Vector{1.0});
    // y raw must equal x^3; undo the recorded y standardization to verify
    const Matrix raw = inverse_standardize(d1.y_standardizer, d1.ds.y);
    for (std::size_t i = 0; i < raw.rows; ++i) {
        const double x = d1.ds.x(i, 0);
        CHECK(raw(i, 0) == Catch::Approx(x * x * x).margin(1e-9));
    }

    const RudimentaryData d4 = gen_rudimentary(4, 50, 6, false);
    for (double c : d4.ground_truth) CHECK(c == 0.5);  // 1/sqrt(4)
    // hand case: x = (1,1,1,1) gives v.x = 2 and raw y = 8
    CHECK(std::pow(dot(d4.ground_truth, Vector{1, 1, 1, 1}), 3) == 8.0);
}

TEST_CASE("rudimentary generator, vector mode") {
    const RudimentaryData d = gen_rudimentary(3, 80, 9, true);
    REQUIRE(d.ds.y.cols == 4);
    const Matrix raw = inverse_standardize(d.y_standardizer, d.ds.y);
    for (std::size_t i = 0; i < raw.rows; ++i) {
        const double u = dot(d.ds.x.row(i), d.ground_truth);
        CHECK(raw(i, 0) == Catch::Approx(u * u * u).margin(1e-9));
        CHECK(raw(i, 1) == Catch::Approx(std::sin(0.2 * u)).margin(1e-9));
        CHECK(raw(i, 2) == Catch::Approx(std::cos(0.2 * u)).margin(1e-9));
        CHECK(raw(i, 3) == Catch::Approx(std::tanh(0.2 * u)).margin(1e-9));
    }
}

TEST_CASE("response depends on x only through the ground-truth direction") {
    const RudimentaryData d = gen_rudimentary(4, 20, 12, false);
    Rng rng(13);
    for (std::size_t i = 0; i < d.ds.x.rows; ++i) {
        Vector perturbed(d.ds.x.row(i).begin(), d.ds.x.row(i).end());
        Vector w(4);
        for (double& c : w) c = rng.gaussian();
        complement_project_inplace(w, {d.ground_truth});
        axpy(1.0, w, perturbed);  // move orthogonally to v
        const double u0 = dot(d.ds.x.row(i), d.ground_truth);
        const double u1 = dot(perturbed, d.ground_truth);
        CHECK(std::pow(u1, 3) == Catch::Approx(std::pow(u0, 3)).margin(1e-10));
    }
}

TEST_CASE("generator determinism") {
    const RudimentaryData a = gen_rudimentary(3, 64, 42, true);
    const RudimentaryData b = gen_rudimentary(3, 64, 42, true);
    CHECK(a.ds.x.data == b.ds.x.data);
    CHECK(a.ds.y.data == b.ds.y.data);
    const RudimentaryData c = gen_rudimentary(3, 64, 43, true);
    CHECK(a.ds.x.data != c.ds.x.data);

    CHECK_THROWS_AS(gen_rudimentary(0, 10, 1, false), ConfigError);
    CHECK_THROWS_AS(gen_rudimentary(2, 0, 1, false), ConfigError);
}

TEST_CASE("split partitions the rows") {
    const RudimentaryData d = gen_rudimentary(2, 20000, 1, false);
    const auto [train, test] = split(d.ds, 0.8, 3);
    CHECK(train.x.rows == 16000);
    CHECK(test.x.rows == 4000);
    CHECK(train.y.rows == 16000);
    CHECK(test.y.rows == 4000);

    // disjoint and exhaustive: total column sums are preserved
    for (std::size_t j = 0; j < d.ds.x.cols; ++j) {
        double full = 0.0, parts = 0.0;
        for (std::size_t i = 0; i < d.ds.x.rows; ++i) full += d.ds.x(i, j);
        for (std::size_t i = 0; i < train.x.rows; ++i) parts += train.x(i, j);
        for (std::size_t i = 0; i < test.x.rows; ++i) parts += test.x(i, j);
        CHECK(parts == Catch::Approx(full).margin(1e-8));
    }

    const auto [train2, test2] = split(d.ds, 0.8, 3);
    CHECK(train2.x.data == train.x.data);
    CHECK(test2.y.data == test.y.data);

    CHECK_THROWS_AS(split(d.ds, 1.0, 3), ConfigError);
    CHECK_THROWS_AS(split(d.ds, 0.0, 3), ConfigError);
}

TEST_CASE("matrix files") {
    TempDir tmp;
    const Matrix parsed = parse_matrix_text("1,2\n3,4\n", "inline");
    CHECK(parsed.rows == 2);
    CHECK(parsed.cols == 2);
    CHECK(parsed.data == std::vector<double>{1, 2, 3, 4});

    Rng rng(88);
    Matrix m(17, 5);
    for (double& v : m.data) v = rng.gaussian() * std::pow(10.0, rng.bounded(7)) - 3.0;
    const std::string path = tmp.file("m.csv");
    save_matrix(path, m);
    const Matrix back = load_matrix(path);
    CHECK(back.rows == m.rows);
    CHECK(back.cols == m.cols);
    CHECK(back.data == m.data);  // 17 significant digits round-trip exactly

    CHECK_THROWS_AS(parse_matrix_text("1,2\n3\n", "ragged"), FormatError);
    CHECK_THROWS_AS(parse_matrix_text("", "empty"), FormatError);
    CHECK_THROWS_AS(parse_matrix_text("1,abc\n", "alpha"), FormatError);
    CHECK_THROWS_AS(load_matrix(tmp.file("missing.csv")), IoError);
}

TEST_CASE("dataset manifest round-trip") {
    TempDir tmp;
    const RudimentaryData d = gen_rudimentary(2, 30, 4, false);
    save_matrix(tmp.file("x.csv"), d.ds.x);
    save_matrix(tmp.file("y.csv"), d.ds.y);

    DatasetManifest m;
    m.x_path = "x.csv";
    m.y_path = "y.csv";
    m.y_standardizer = d.y_standardizer;
    m.ground_truth = d.ground_truth;
    m.seed = 4;
    const std::string path = tmp.file("dataset.json");
    jsontext::write_file(path, dataset_manifest_to_json(m));

    const DatasetManifest back = dataset_manifest_from_json(jsontext::parse_file(path));
    CHECK(back.x_path == "x.csv");
    CHECK(!back.x_standardizer);
    REQUIRE(back.y_standardizer);
    CHECK(back.y_standardizer->means == d.y_standardizer.means);
    CHECK(back.y_standardizer->stds == d.y_standardizer.stds);
    REQUIRE(back.ground_truth);
    CHECK(*back.ground_truth == d.ground_truth);
    CHECK(back.seed == 4);

    const Dataset ds = load_dataset(path, back);
    CHECK(ds.x.data == d.ds.x.data);
    CHECK(ds.y.data == d.ds.y.data);
}
