#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "eca/emulator.hpp"
#include "eca/errors.hpp"
#include "eca/linalg.hpp"
#include "eca/optimizer.hpp"
#include "eca/rng.hpp"

namespace eca {

struct MlpArchitecture {
    std::vector<std::size_t> hidden;  // units per hidden layer
    Activation hidden_activation = Activation::relu;
    Activation output_activation = Activation::identity;
};

struct MlpTrainOptions {
    double lr = 1e-3;
    std::pair<double, double> betas{0.9, 0.999};
    double weight_decay = 1e-3;  // decoupled, weights only
    std::size_t epochs = 500;
    std::size_t batch_size = 200;
    std::size_t patience = 50;   // epochs without validation improvement
    double val_fraction = 0.2;   // held out from the training rows
    std::optional<std::uint64_t> seed;
};

namespace detail {

// Layer views into one flat parameter buffer: [W0, b0, W1, b1, ...].
struct FlatLayout {
    struct Seg {
        std::size_t w_off, w_rows, w_cols, b_off;
    };
    std::vector<Seg> segs;
    std::size_t total = 0;

    explicit FlatLayout(const std::vector<std::size_t>& dims) {
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            Seg s;
            s.w_rows = dims[l + 1];
            s.w_cols = dims[l];
            s.w_off = total;
            total += s.w_rows * s.w_cols;
            s.b_off = total;
            total += s.w_rows;
            segs.push_back(s);
        }
    }
};

inline std::vector<DenseLayer> layers_from_flat(const FlatLayout& lay,
                                                const Vector& params,
                                                const std::vector<Activation>& acts) {
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < lay.segs.size(); ++l) {
        const auto& s = lay.segs[l];
        DenseLayer dl;
        dl.weights = Matrix(s.w_rows, s.w_cols);
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(s.w_off),
                    s.w_rows * s.w_cols, dl.weights.data.begin());
        dl.bias.assign(params.begin() + static_cast<std::ptrdiff_t>(s.b_off),
                       params.begin() + static_cast<std::ptrdiff_t>(s.b_off + s.w_rows));
        dl.activation = acts[l];
        layers.push_back(std::move(dl));
    }
    return layers;
}

}  // namespace detail

/// Mini-batch Adam with decoupled weight decay on MSE loss, with patient
/// early stopping on a held-out split of the given rows. Exists to make the
/// workflow self-contained; it is not performance-tuned.
inline MlpEmulator train_mlp(const Matrix& x, const Matrix& y,
                             const MlpArchitecture& arch,
                             const MlpTrainOptions& opts = {}) {
    if (x.rows != y.rows) throw DimensionError("train_mlp: X/Y row counts differ");
    if (x.rows < 2) throw ConfigError("train_mlp: need at least 2 rows");
    if (!x.all_finite() || !y.all_finite())
        throw NumericsError("train_mlp: non-finite training data");
    if (!(opts.val_fraction > 0.0 && opts.val_fraction < 1.0))
        throw ConfigError("train_mlp: val_fraction must be in (0, 1)");
    if (opts.batch_size < 1) throw ConfigError("train_mlp: batch_size must be >= 1");

    const std::size_t n = x.rows;
    const std::size_t in_dim = x.cols;
    const std::size_t out_dim = y.cols;

    std::vector<std::size_t> dims;
    dims.push_back(in_dim);
    for (std::size_t h : arch.hidden) {
        if (h == 0) throw ConfigError("train_mlp: zero-width hidden layer");
        dims.push_back(h);
    }
    dims.push_back(out_dim);

    std::vector<Activation> acts(arch.hidden.size(), arch.hidden_activation);
    acts.push_back(arch.output_activation);

    const std::uint64_t seed = opts.seed ? *opts.seed : entropy_seed();
    Rng rng(seed);

    // Validation split from the given rows.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span<std::size_t>(idx));
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * opts.val_fraction));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    const std::size_t n_train = n - n_val;
    std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());

    // He init for relu layers, Glorot for the rest; zero biases.
    detail::FlatLayout layout(dims);
    Vector params(layout.total, 0.0);
    for (std::size_t l = 0; l < layout.segs.size(); ++l) {
        const auto& s = layout.segs[l];
        const double fan_in = static_cast<double>(s.w_cols);
        const double fan_out = static_cast<double>(s.w_rows);
        const double scale = acts[l] == Activation::relu
                                 ? std::sqrt(2.0 / fan_in)
                                 : std::sqrt(2.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < s.w_rows * s.w_cols; ++i)
            params[s.w_off + i] = scale * rng.gaussian();
    }

    AdamState adam = adam_init(layout.total, opts.lr, opts.betas);
    Vector grad(layout.total, 0.0);

    // Per-layer scratch: activations and pre-activations for one row.
    std::vector<Vector> z(layout.segs.size()), a(layout.segs.size());
    for (std::size_t l = 0; l < layout.segs.size(); ++l) {
        z[l].assign(dims[l + 1], 0.0);
        a[l].assign(dims[l + 1], 0.0);
    }
    Vector delta, delta_prev;

    auto forward_row = [&](std::span<const double> row) {
        std::span<const double> in = row;
        for (std::size_t l = 0; l < layout.segs.size(); ++l) {
            const auto& s = layout.segs[l];
            for (std::size_t i = 0; i < s.w_rows; ++i) {
                const double* wrow = params.data() + s.w_off + i * s.w_cols;
                double acc = params[s.b_off + i];
                for (std::size_t k = 0; k < s.w_cols; ++k) acc += wrow[k] * in[k];
                z[l][i] = acc;
                a[l][i] = activate(acts[l], acc);
            }
            in = a[l];
        }
    };

    auto mean_mse = [&](const std::vector<std::size_t>& rows) {
        double total = 0.0;
        for (std::size_t r : rows) {
            forward_row(x.row(r));
            auto yr = y.row(r);
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double e = a.back()[o] - yr[o];
                total += e * e;
            }
        }
        return total / (static_cast<double>(rows.size()) * static_cast<double>(out_dim));
    };

    const std::size_t batch = std::min(opts.batch_size, n_train);
    double best_val = mean_mse(val_idx);
    Vector best_params = params;
    std::size_t stale = 0;

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(train_idx));
        for (std::size_t start = 0; start < n_train; start += batch) {
            const std::size_t stop = std::min(start + batch, n_train);
            const double scale =
                2.0 / (static_cast<double>(stop - start) * static_cast<double>(out_dim));
            std::fill(grad.begin(), grad.end(), 0.0);

            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t r = train_idx[bi];
                forward_row(x.row(r));
                auto yr = y.row(r);
                delta.assign(out_dim, 0.0);
                for (std::size_t o = 0; o < out_dim; ++o)
                    delta[o] = scale * (a.back()[o] - yr[o]);

                for (std::size_t li = layout.segs.size(); li-- > 0;) {
                    const auto& s = layout.segs[li];
                    std::span<const double> in =
                        li > 0 ? std::span<const double>(a[li - 1]) : x.row(r);
                    for (std::size_t i = 0; i < s.w_rows; ++i) {
                        delta[i] *= activate_deriv(acts[li], z[li][i]);
                        grad[s.b_off + i] += delta[i];
                        double* grow = grad.data() + s.w_off + i * s.w_cols;
                        for (std::size_t k = 0; k < s.w_cols; ++k)
                            grow[k] += delta[i] * in[k];
                    }
                    if (li > 0) {
                        delta_prev.assign(s.w_cols, 0.0);
                        for (std::size_t i = 0; i < s.w_rows; ++i) {
                            const double* wrow = params.data() + s.w_off + i * s.w_cols;
                            for (std::size_t k = 0; k < s.w_cols; ++k)
                                delta_prev[k] += wrow[k] * delta[i];
                        }
                        delta = delta_prev;
                    }
                }
            }

            if (opts.weight_decay > 0.0) {
                const double shrink = 1.0 - opts.lr * opts.weight_decay;
                for (const auto& s : layout.segs)
                    for (std::size_t i = 0; i < s.w_rows * s.w_cols; ++i)
                        params[s.w_off + i] *= shrink;
            }
            adam_step(adam, params, grad);
        }

        const double val = mean_mse(val_idx);
        if (!std::isfinite(val)) throw NumericsError("train_mlp: non-finite loss");
        if (val < best_val) {
            best_val = val;
            best_params = params;
            stale = 0;
        } else if (++stale >= opts.patience) {
            break;
        }
    }

    return MlpEmulator(detail::layers_from_flat(layout, best_params, acts));
}

}  // namespace eca
