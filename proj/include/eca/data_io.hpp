#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "eca/errors.hpp"
#include "eca/json_text.hpp"
#include "eca/linalg.hpp"
#include "eca/rng.hpp"

namespace eca {

/// Per-feature z-transform. Population (1/N) standard deviation.
struct Standardizer {
    Vector means;
    Vector stds;
};

struct Dataset {
    Matrix x;
    Matrix y;
};

inline Standardizer fit_standardizer(const Matrix& x) {
    if (x.rows < 2) throw DegenerateDataError("standardizer: need at least 2 rows");
    Standardizer s;
    s.means.assign(x.cols, 0.0);
    s.stds.assign(x.cols, 0.0);
    for (std::size_t j = 0; j < x.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, j);
        mean /= static_cast<double>(x.rows);
        double var = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double d = x(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(x.rows);
        const double sd = std::sqrt(var);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
            throw DegenerateDataError("standardizer: column " + std::to_string(j) +
                                      " is constant");
        s.means[j] = mean;
        s.stds[j] = sd;
    }
    return s;
}

inline Matrix standardize(const Standardizer& s, const Matrix& x) {
    if (x.cols != s.means.size())
        throw DimensionError("standardize: column count mismatch");
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
            out(i, j) = (x(i, j) - s.means[j]) / s.stds[j];
    return out;
}

inline Matrix inverse_standardize(const Standardizer& s, const Matrix& xt) {
    if (xt.cols != s.means.size())
        throw DimensionError("inverse_standardize: column count mismatch");
    Matrix out = xt;
    for (std::size_t i = 0; i < xt.rows; ++i)
        for (std::size_t j = 0; j < xt.cols; ++j)
            out(i, j) = xt(i, j) * s.stds[j] + s.means[j];
    return out;
}

/// Synthetic benchmark data: X sampled i.i.d. standard normal, responses a
/// function of the single direction v = (1/sqrt(d)) * sum_i e_i.
/// Scalar mode:  y = (v.x)^3
/// Vector mode:  y = [(v.x)^3, sin(0.2 v.x), cos(0.2 v.x), tanh(0.2 v.x)]
/// Y columns are z-standardized; the used standardizer is returned.
struct RudimentaryData {
    Dataset ds;
    Vector ground_truth;  // v
    Standardizer y_standardizer;
};

inline RudimentaryData gen_rudimentary(std::size_t d, std::size_t n,
                                       std::uint64_t seed, bool vector_valued) {
    if (d < 1 || n < 1) throw ConfigError("gen_rudimentary: d and n must be >= 1");
    Rng rng(seed);

    RudimentaryData out;
    out.ground_truth.assign(d, 1.0 / std::sqrt(static_cast<double>(d)));
    out.ds.x = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.ds.x(i, j) = rng.gaussian();

    const std::size_t q = vector_valued ? 4 : 1;
    Matrix raw(n, q);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = dot(out.ds.x.row(i), out.ground_truth);
        raw(i, 0) = u * u * u;
        if (vector_valued) {
            raw(i, 1) = std::sin(0.2 * u);
            raw(i, 2) = std::cos(0.2 * u);
            raw(i, 3) = std::tanh(0.2 * u);
        }
    }
    out.y_standardizer = fit_standardizer(raw);
    out.ds.y = standardize(out.y_standardizer, raw);
    return out;
}

/// Seeded shuffle, then partition. First side gets round(n * fraction) rows.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction,
                                         std::uint64_t seed) {
    if (ds.x.rows != ds.y.rows) throw DimensionError("split: X/Y row counts differ");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("split: fraction must be in (0, 1)");
    const std::size_t n = ds.x.rows;
    const std::size_t n_first = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * fraction));
    if (n_first == 0 || n_first == n)
        throw ConfigError("split: a side would be empty");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(idx));

    auto take = [&](std::size_t lo, std::size_t hi) {
        Dataset part;
        part.x = Matrix(hi - lo, ds.x.cols);
        part.y = Matrix(hi - lo, ds.y.cols);
        for (std::size_t i = lo; i < hi; ++i) {
            const std::size_t r = idx[i];
            std::copy_n(ds.x.row(r).begin(), ds.x.cols, part.x.row(i - lo).begin());
            std::copy_n(ds.y.row(r).begin(), ds.y.cols, part.y.row(i - lo).begin());
        }
        return part;
    };
    return {take(0, n_first), take(n_first, n)};
}

/// Delimited text, one row per line, comma-separated, 17 significant digits.
inline void save_matrix(const std::string& path, const Matrix& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) f << ',';
            f << jsontext::format_double(m(i, j));
        }
        f << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
}

inline Matrix parse_matrix_text(const std::string& text, const std::string& what) {
    Matrix m;
    std::size_t pos = 0;
    std::vector<double> row;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = eol + 1;
        if (line.empty()) continue;

        row.clear();
        std::size_t field = 0;
        while (field <= line.size()) {
            std::size_t comma = line.find(',', field);
            if (comma == std::string::npos) comma = line.size();
            const std::string cell = line.substr(field, comma - field);
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw FormatError(what + ": not a number: '" + cell + "'");
            row.push_back(v);
            if (comma == line.size()) break;
            field = comma + 1;
        }
        if (m.cols == 0)
            m.cols = row.size();
        else if (row.size() != m.cols)
            throw FormatError(what + ": ragged rows (" + std::to_string(row.size()) +
                              " vs " + std::to_string(m.cols) + " columns)");
        m.data.insert(m.data.end(), row.begin(), row.end());
        m.rows += 1;
    }
    if (m.rows == 0) throw FormatError(what + ": empty matrix file");
    return m;
}

inline Matrix load_matrix(const std::string& path) {
    return parse_matrix_text(jsontext::read_file(path), path);
}

/// Dataset manifest: binds the X/Y files, optional standardizers, and the
/// ground-truth direction for synthetic data. Paths are relative to the
/// manifest's directory.
struct DatasetManifest {
    std::string x_path;
    std::string y_path;
    std::optional<Standardizer> x_standardizer;
    std::optional<Standardizer> y_standardizer;
    std::optional<Vector> ground_truth;
    std::optional<std::uint64_t> seed;
};

inline std::string dataset_manifest_to_json(const DatasetManifest& m) {
    jsontext::Writer w;
    w.begin_object();
    w.key("x").value(m.x_path);
    w.key("y").value(m.y_path);
    auto put_std = [&](const char* key, const std::optional<Standardizer>& s) {
        w.key(key);
        if (!s) {
            w.null();
            return;
        }
        w.begin_object();
        w.key("means").value(s->means);
        w.key("stds").value(s->stds);
        w.end_object();
    };
    put_std("x_standardizer", m.x_standardizer);
    put_std("y_standardizer", m.y_standardizer);
    w.key("ground_truth_v");
    if (m.ground_truth)
        w.value(*m.ground_truth);
    else
        w.null();
    w.key("seed");
    if (m.seed)
        w.value(*m.seed);
    else
        w.null();
    w.end_object();
    return w.str();
}

inline DatasetManifest dataset_manifest_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("x") || !j.contains("y"))
        throw FormatError("dataset manifest: expected object with 'x' and 'y'");
    DatasetManifest m;
    m.x_path = j["x"].get<std::string>();
    m.y_path = j["y"].get<std::string>();
    auto get_std = [&](const char* key) -> std::optional<Standardizer> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        const auto& sj = j[key];
        if (!sj.is_object() || !sj.contains("means") || !sj.contains("stds"))
            throw FormatError("dataset manifest: malformed standardizer");
        Standardizer s;
        s.means = jsontext::as_vector(sj["means"], "standardizer means");
        s.stds = jsontext::as_vector(sj["stds"], "standardizer stds");
        if (s.means.size() != s.stds.size())
            throw FormatError("dataset manifest: standardizer dims differ");
        return s;
    };
    m.x_standardizer = get_std("x_standardizer");
    m.y_standardizer = get_std("y_standardizer");
    if (j.contains("ground_truth_v") && !j["ground_truth_v"].is_null())
        m.ground_truth = jsontext::as_vector(j["ground_truth_v"], "ground_truth_v");
    if (j.contains("seed") && !j["seed"].is_null())
        m.seed = j["seed"].get<std::uint64_t>();
    return m;
}

/// Loads X and Y through a manifest, resolving paths against its directory.
inline Dataset load_dataset(const std::string& manifest_path,
                            const DatasetManifest& m) {
    const auto dir = std::filesystem::path(manifest_path).parent_path();
    Dataset ds;
    ds.x = load_matrix((dir / m.x_path).string());
    ds.y = load_matrix((dir / m.y_path).string());
    if (ds.x.rows != ds.y.rows)
        throw DimensionError("dataset: X and Y row counts differ");
    return ds;
}

}  // namespace eca
