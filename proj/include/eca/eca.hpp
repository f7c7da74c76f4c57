#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
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

struct FitOptions {
    double lr = 1e-3;
    std::pair<double, double> betas{0.9, 0.999};
    double tol = 1e-4;
    std::size_t epochs = 10000;
    std::size_t batch_size = 200;
    std::optional<std::uint64_t> seed;
    std::size_t restarts = 1;
};

struct InverseOptions {
    double lr = 0.05;
    std::pair<double, double> betas{0.9, 0.999};
    double tol = 1e-4;
    std::size_t epochs = 1000;
    std::optional<std::uint64_t> seed;
};

/// Missing variance 1 - rho: squared residual trace over squared data trace.
/// No centering; callers are expected to feed z-standardized responses.
inline double r2loss(const Matrix& y_pred, const Matrix& y_known) {
    if (y_pred.rows != y_known.rows || y_pred.cols != y_known.cols)
        throw DimensionError("r2loss: shapes differ");
    double den = 0.0;
    for (double v : y_known.data) den += v * v;
    if (den == 0.0) throw DegenerateDataError("r2loss: zero total variance");
    double num = 0.0;
    for (std::size_t i = 0; i < y_known.data.size(); ++i) {
        const double e = y_known.data[i] - y_pred.data[i];
        num += e * e;
    }
    const double loss = num / den;
    if (!std::isfinite(loss)) throw NumericsError("r2loss: non-finite value");
    return loss;
}

inline double generalized_r2(const Matrix& y_pred, const Matrix& y_known) {
    return 1.0 - r2loss(y_pred, y_known);
}

namespace detail {

/// Evaluation plan for the projected loss at one rank. Along the fit's
/// projection path x_proj = b_i + t v, the affine first layer factors as
///   W1 x_proj + bias = (W1 b_i + bias) + t (W1 v),
/// so the per-row cost stops scaling with the first-layer width times the
/// input dimension: W1 b_i is computed once per rank, W1 v once per step.
struct ProjectedPlan {
    const MlpEmulator* emu = nullptr;
    const Matrix* x = nullptr;
    const Matrix* y = nullptr;
    Matrix w1_affine;  // rows(x) x h1: W1 b_i + bias1

    // scratch for one evaluation pass
    Vector w1v;                      // h1
    Vector z1, a1;                   // first-layer pre/post activations
    std::vector<Vector> tail_z, tail_a;  // layers 1..L-1
    Vector back_g, back_h;           // backward buffers
    Vector delta1;                   // h1
    Vector t_delta_acc;              // h1
};

inline ProjectedPlan make_projected_plan(const MlpEmulator& emu, const Matrix& x,
                                         const Matrix& y, const Matrix& base_proj) {
    const DenseLayer& first = emu.layers().front();
    const std::size_t h1 = first.out_dim();

    ProjectedPlan p;
    p.emu = &emu;
    p.x = &x;
    p.y = &y;
    p.w1_affine = Matrix(x.rows, h1);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto bi = base_proj.row(i);
        for (std::size_t o = 0; o < h1; ++o)
            p.w1_affine(i, o) = dot(first.weights.row(o), bi) + first.bias[o];
    }

    p.w1v.assign(h1, 0.0);
    p.z1.assign(h1, 0.0);
    p.a1.assign(h1, 0.0);
    p.delta1.assign(h1, 0.0);
    p.t_delta_acc.assign(h1, 0.0);
    const std::size_t tail = emu.layers().size() - 1;
    p.tail_z.resize(tail);
    p.tail_a.resize(tail);
    std::size_t widest = h1;
    for (std::size_t l = 0; l < tail; ++l) {
        const std::size_t w = emu.layers()[l + 1].out_dim();
        p.tail_z[l].assign(w, 0.0);
        p.tail_a[l].assign(w, 0.0);
        widest = std::max(widest, w);
    }
    p.back_g.assign(widest, 0.0);
    p.back_h.assign(widest, 0.0);
    return p;
}

/// Loss (and, when grad_out is non-empty, its v-gradient) of
///   sum_{i in rows} |y_i - y_emu(b_i + (v.x_i) v)|^2 / denom.
/// The gradient flows through the emulator as an input VJP and through the
/// rank-one projection term, whose pullback of an upstream g is
/// (v.x) g + (g.v) x; with the factored first layer this reduces to
///   grad = W1^T (sum_i t_i d1_i) + sum_i (d1_i . W1 v) x_i
/// where d1_i is the backpropagated first-layer delta of row i.
inline double projected_loss_grad(ProjectedPlan& p, std::span<const double> v,
                                  std::span<const std::size_t> rows, double denom,
                                  std::span<double> grad_out) {
    const auto& layers = p.emu->layers();
    const DenseLayer& first = layers.front();
    const std::size_t h1 = first.out_dim();
    const std::size_t d = p.x->cols;
    const std::size_t q = p.y->cols;
    const std::size_t n_tail = layers.size() - 1;
    const bool want_grad = !grad_out.empty();
    if (want_grad && grad_out.size() != d)
        throw DimensionError("projected_loss_grad: grad size mismatch");

    for (std::size_t o = 0; o < h1; ++o) p.w1v[o] = dot(first.weights.row(o), v);
    if (want_grad) {
        std::fill(grad_out.begin(), grad_out.end(), 0.0);
        std::fill(p.t_delta_acc.begin(), p.t_delta_acc.end(), 0.0);
    }

    thread_local Vector gy;
    gy.assign(q, 0.0);

    double num = 0.0;
    for (const std::size_t i : rows) {
        const auto xi = p.x->row(i);
        const double t = dot(v, xi);

        const auto affine = p.w1_affine.row(i);
        for (std::size_t o = 0; o < h1; ++o) {
            p.z1[o] = affine[o] + t * p.w1v[o];
            p.a1[o] = activate(first.activation, p.z1[o]);
        }
        std::span<const double> act_in = p.a1;
        for (std::size_t l = 0; l < n_tail; ++l) {
            const DenseLayer& lay = layers[l + 1];
            Vector& z = p.tail_z[l];
            Vector& a = p.tail_a[l];
            matvec(lay.weights, act_in, z);
            for (std::size_t o = 0; o < z.size(); ++o) {
                z[o] += lay.bias[o];
                a[o] = activate(lay.activation, z[o]);
            }
            act_in = a;
        }

        const auto yi = p.y->row(i);
        for (std::size_t o = 0; o < q; ++o) {
            const double e = act_in[o] - yi[o];
            num += e * e;
            gy[o] = 2.0 * e / denom;
        }

        if (want_grad) {
            Vector& g = p.back_g;
            Vector& h = p.back_h;
            for (std::size_t o = 0; o < q; ++o) g[o] = gy[o];
            for (std::size_t li = n_tail; li-- > 0;) {
                const DenseLayer& lay = layers[li + 1];
                for (std::size_t o = 0; o < lay.out_dim(); ++o)
                    g[o] *= activate_deriv(lay.activation, p.tail_z[li][o]);
                matvec_transposed(lay.weights,
                                  std::span<const double>(g.data(), lay.out_dim()),
                                  std::span<double>(h.data(), lay.in_dim()));
                for (std::size_t o = 0; o < lay.in_dim(); ++o) g[o] = h[o];
            }
            for (std::size_t o = 0; o < h1; ++o)
                p.delta1[o] = g[o] * activate_deriv(first.activation, p.z1[o]);

            axpy(t, p.delta1, p.t_delta_acc);
            const double gv = dot(p.delta1, p.w1v);  // equals (grad_x . v)
            axpy(gv, xi, grad_out);
        }
    }

    if (want_grad)
        for (std::size_t o = 0; o < h1; ++o)
            axpy(p.t_delta_acc[o], first.weights.row(o), grad_out);

    const double loss = num / denom;
    if (!std::isfinite(loss)) throw NumericsError("fit: non-finite loss");
    return loss;
}

inline double squared_sum(const Matrix& m, std::span<const std::size_t> rows) {
    double s = 0.0;
    for (const std::size_t i : rows)
        for (const double v : m.row(i)) s += v * v;
    return s;
}

}  // namespace detail

/// Ordered orthonormal basis in standardized input space, fitted so that
/// emulated responses of the projected inputs cover maximal response
/// variance. Immutable apart from fit()/set_seed(); all other member
/// functions are read-only and safe to call concurrently.
class EcaModel {
  public:
    explicit EcaModel(std::shared_ptr<const MlpEmulator> emulator)
        : emulator_(std::move(emulator)) {
        if (!emulator_) throw ConfigError("EcaModel: null emulator");
    }

    /// Restores a model from persisted state; validates orthonormality.
    EcaModel(std::shared_ptr<const MlpEmulator> emulator, std::vector<Vector> v,
             Vector y_var, Vector x_var, std::optional<std::uint64_t> seed)
        : emulator_(std::move(emulator)),
          v_(std::move(v)),
          y_var_(std::move(y_var)),
          x_var_(std::move(x_var)),
          seed_(seed) {
        if (!emulator_) throw ConfigError("EcaModel: null emulator");
        if (y_var_.size() != v_.size() || x_var_.size() != v_.size())
            throw FormatError("EcaModel: variance records do not match rank");
        for (const auto& vec : v_)
            if (vec.size() != emulator_->input_dim())
                throw DimensionError("EcaModel: component dim mismatch");
        check_orthonormal();
    }

    const std::vector<Vector>& components() const { return v_; }
    const Vector& y_var() const { return y_var_; }
    const Vector& x_var() const { return x_var_; }
    std::size_t rank() const { return v_.size(); }
    std::size_t input_dim() const { return emulator_->input_dim(); }
    std::size_t output_dim() const { return emulator_->output_dim(); }
    const MlpEmulator& emulator() const { return *emulator_; }
    std::shared_ptr<const MlpEmulator> emulator_ptr() const { return emulator_; }
    std::optional<std::uint64_t> seed() const { return seed_; }

    /// Pins the RNG stream used by subsequent fit() calls that do not carry
    /// their own seed; the last fit records its master seed here either way.
    void set_seed(std::uint64_t seed) { seed_ = seed; }

    /// t_{i,j} = v_j . x_i for the first n_comp components.
    Matrix transform(const Matrix& x, std::size_t n_comp) const {
        if (n_comp > rank()) throw DimensionError("transform: n_comp exceeds rank");
        if (x.cols != input_dim()) throw DimensionError("transform: X dim mismatch");
        Matrix t(x.rows, n_comp);
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t j = 0; j < n_comp; ++j) t(i, j) = dot(v_[j], x.row(i));
        return t;
    }
    Matrix transform(const Matrix& x) const { return transform(x, rank()); }

    /// Row i of the result is sum_j t_{i,j} v_j.
    Matrix expand(const Matrix& t) const {
        if (t.cols > rank()) throw DimensionError("expand: more scores than components");
        Matrix x(t.rows, input_dim());
        for (std::size_t i = 0; i < t.rows; ++i) {
            auto xi = x.row(i);
            for (std::size_t j = 0; j < t.cols; ++j) axpy(t(i, j), v_[j], xi);
        }
        return x;
    }

    /// project == expand(transform(.)), composed literally.
    Matrix project(const Matrix& x, std::size_t n_comp) const {
        return expand(transform(x, n_comp));
    }
    Matrix project(const Matrix& x) const { return project(x, rank()); }

    /// Covered response variance rho after projecting onto n_comp components.
    double covered_variance(const Matrix& x, const Matrix& y, std::size_t n_comp) const {
        if (x.rows != y.rows) throw DimensionError("covered_variance: row counts differ");
        return generalized_r2(emulator_->forward(project(x, n_comp)), y);
    }
    double covered_variance(const Matrix& x, const Matrix& y) const {
        return covered_variance(x, y, rank());
    }

    /// Covered input variance: rho with X itself as the target and the
    /// projection as its prediction.
    double x_covered_variance(const Matrix& x, std::size_t n_comp) const {
        return generalized_r2(project(x, n_comp), x);
    }

    void fit(const Matrix& x, const Matrix& y, std::size_t n_comp,
             const FitOptions& opts = {}, int keep = 0);

    std::pair<Matrix, Vector> inverse(const Matrix& y, std::size_t n_comp,
                                      const InverseOptions& opts = {}) const;
    std::pair<Matrix, Vector> inverse(const Matrix& y,
                                      const InverseOptions& opts = {}) const {
        return inverse(y, rank(), opts);
    }

    /// reconstruct == expand(inverse(.)), composed literally.
    std::pair<Matrix, Vector> reconstruct(const Matrix& y, std::size_t n_comp,
                                          const InverseOptions& opts = {}) const {
        auto [t, err] = inverse(y, n_comp, opts);
        return {expand(t), std::move(err)};
    }
    std::pair<Matrix, Vector> reconstruct(const Matrix& y,
                                          const InverseOptions& opts = {}) const {
        return reconstruct(y, rank(), opts);
    }

  private:
    void check_orthonormal() const {
        for (std::size_t i = 0; i < v_.size(); ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                const double expected = i == j ? 1.0 : 0.0;
                if (std::abs(dot(v_[i], v_[j]) - expected) > 1e-6)
                    throw FormatError("EcaModel: basis is not orthonormal");
            }
    }

    struct ComponentResult {
        Vector v;
        double loss = std::numeric_limits<double>::infinity();
    };
    ComponentResult optimize_component(detail::ProjectedPlan& plan,
                                       const FitOptions& opts,
                                       std::uint64_t seed) const;

    std::shared_ptr<const MlpEmulator> emulator_;
    std::vector<Vector> v_;
    Vector y_var_;
    Vector x_var_;
    std::optional<std::uint64_t> seed_;
};

inline EcaModel::ComponentResult EcaModel::optimize_component(
    detail::ProjectedPlan& plan, const FitOptions& opts, std::uint64_t seed) const {
    const Matrix& x = *plan.x;
    const Matrix& y = *plan.y;
    const std::size_t n = x.rows;
    const std::size_t d = x.cols;
    Rng rng(seed);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const double y_trace = detail::squared_sum(y, order);

    // Random unit start inside the orthogonal complement of the kept basis.
    // Uniform [0,1) coordinates before normalization, as in the reference
    // optimizer's rnd(): the start keeps a bounded overlap with every
    // same-orthant direction at any dimensionality, which the epoch-loss
    // stopping rule needs to get moving on nearly flat landscapes.
    Vector v(d);
    for (;;) {
        for (double& c : v) c = rng.uniform01();
        complement_project_inplace(v, v_);
        if (norm(v) > 1e-8) break;
    }
    normalize_inplace(v);

    AdamState adam = adam_init(d, opts.lr, opts.betas);
    Vector grad(d);
    double prev_loss = detail::projected_loss_grad(plan, v, order, y_trace, {});

    const std::size_t batch = std::max<std::size_t>(1, std::min(opts.batch_size, n));
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(start + batch, n);
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            const double den = detail::squared_sum(y, rows);
            if (den == 0.0) continue;  // zero-variance batch carries no signal
            detail::projected_loss_grad(plan, v, rows, den, grad);

            // Keep both the step and the iterate inside the complement;
            // Adam momentum alone would drift out of it.
            complement_project_inplace(grad, v_);
            adam_step(adam, v, grad);
            complement_project_inplace(v, v_);
            normalize_inplace(v);
        }

        std::sort(order.begin(), order.end());  // fixed-order full-data evaluation
        const double loss = detail::projected_loss_grad(plan, v, order, y_trace, {});
        const bool converged = std::abs(prev_loss - loss) < opts.tol;
        prev_loss = loss;
        if (converged) break;
    }
    return {std::move(v), prev_loss};
}

inline void EcaModel::fit(const Matrix& x, const Matrix& y, std::size_t n_comp,
                          const FitOptions& opts, int keep) {
    if (x.cols != input_dim())
        throw DimensionError("fit: X has " + std::to_string(x.cols) +
                             " cols, emulator expects " + std::to_string(input_dim()));
    if (y.cols != output_dim())
        throw DimensionError("fit: Y has " + std::to_string(y.cols) +
                             " cols, emulator outputs " + std::to_string(output_dim()));
    if (x.rows != y.rows) throw DimensionError("fit: X/Y row counts differ");
    if (n_comp > input_dim())
        throw ConfigError("fit: n_comp " + std::to_string(n_comp) +
                          " exceeds input dim " + std::to_string(input_dim()));
    if (!(opts.lr > 0.0) || !(opts.tol > 0.0) || opts.batch_size < 1 ||
        opts.epochs < 1 || opts.restarts < 1)
        throw ConfigError("fit: options must be positive");
    if (!x.all_finite() || !y.all_finite())
        throw NumericsError("fit: non-finite input data");

    double y_trace = 0.0;
    for (double vy : y.data) y_trace += vy * vy;
    if (y_trace == 0.0) throw DegenerateDataError("fit: Y has zero total variance");

    // keep: n > 0 retains the first n components, n < 0 drops the last |n|,
    // 0 starts fresh.
    std::size_t retained = 0;
    if (keep > 0)
        retained = std::min<std::size_t>(static_cast<std::size_t>(keep), rank());
    else if (keep < 0) {
        const auto drop = static_cast<std::size_t>(-static_cast<long long>(keep));
        retained = drop >= rank() ? 0 : rank() - drop;
    }
    if (retained > n_comp)
        throw ConfigError("fit: keep retains more components than n_comp");
    v_.resize(retained);
    y_var_.resize(retained);
    x_var_.resize(retained);

    if (x.rows < 2 * input_dim())
        std::fprintf(stderr,
                     "eca: warning: fitting with %zu rows in %zu dimensions; "
                     "fewer than 2x input_dim rows tends to be unstable\n",
                     x.rows, input_dim());

    const std::uint64_t master =
        opts.seed ? *opts.seed : (seed_ ? *seed_ : entropy_seed());
    seed_ = master;
    SplitMix64 seed_seq(master);

    // Projection onto the retained basis; grows one rank at a time.
    Matrix base_proj(x.rows, x.cols, 0.0);
    for (const Vector& vj : v_)
        for (std::size_t i = 0; i < x.rows; ++i)
            axpy(dot(vj, x.row(i)), vj, base_proj.row(i));

    for (std::size_t r = retained; r < n_comp; ++r) {
        detail::ProjectedPlan plan = detail::make_projected_plan(*emulator_, x, y, base_proj);
        ComponentResult best;
        for (std::size_t attempt = 0; attempt < opts.restarts; ++attempt) {
            ComponentResult cand = optimize_component(plan, opts, seed_seq.next());
            if (cand.loss < best.loss) best = std::move(cand);
        }

        // Canonical sign: the entry of largest magnitude is positive.
        std::size_t arg = 0;
        for (std::size_t k = 1; k < best.v.size(); ++k)
            if (std::abs(best.v[k]) > std::abs(best.v[arg])) arg = k;
        if (best.v[arg] < 0.0)
            for (double& c : best.v) c = -c;

        for (std::size_t i = 0; i < x.rows; ++i)
            axpy(dot(best.v, x.row(i)), best.v, base_proj.row(i));
        v_.push_back(std::move(best.v));

        // Covered variances at this rank on the fit data.
        y_var_.push_back(generalized_r2(emulator_->forward(base_proj), y));
        x_var_.push_back(x_covered_variance(x, v_.size()));
    }
}

inline std::pair<Matrix, Vector> EcaModel::inverse(const Matrix& y, std::size_t n_comp,
                                                   const InverseOptions& opts) const {
    if (rank() == 0 || n_comp == 0)
        throw StateError("inverse: model has no fitted components");
    if (n_comp > rank())
        throw StateError("inverse: model fitted to rank " + std::to_string(rank()) +
                         ", requested " + std::to_string(n_comp));
    if (y.cols != output_dim()) throw DimensionError("inverse: Y dim mismatch");
    if (!(opts.lr > 0.0) || !(opts.tol > 0.0) || opts.epochs < 1)
        throw ConfigError("inverse: options must be positive");
    if (!y.all_finite()) throw NumericsError("inverse: non-finite input data");

    const std::size_t m = y.rows;
    const std::size_t k = n_comp;
    const std::size_t d = input_dim();
    const std::size_t q = output_dim();

    // All rows are independent; optimize them together as one parameter
    // matrix, starting from the standardized-data centroid t = 0.
    Matrix t(m, k, 0.0);
    Matrix grad(m, k, 0.0);
    AdamState adam = adam_init(m * k, opts.lr, opts.betas);
    const std::size_t block = MlpEmulator::kBlockRows;
    MlpBlockWorkspace ws = emulator_->make_block_workspace(block);
    Matrix xtile(block, d), pred(block, q), gy(block, q), gx(block, d);

    const double row_scale = 1.0 / static_cast<double>(m * q);
    auto loss_and_grad = [&]() {
        double loss = 0.0;
        for (std::size_t start = 0; start < m; start += block) {
            const std::size_t tile = std::min(block, m - start);
            for (std::size_t r = 0; r < tile; ++r) {
                auto xr = xtile.row(r);
                std::fill(xr.begin(), xr.end(), 0.0);
                for (std::size_t j = 0; j < k; ++j) axpy(t(start + r, j), v_[j], xr);
            }
            emulator_->forward_block(xtile.data.data(), tile, d, pred.data.data(), q,
                                     ws);
            for (std::size_t r = 0; r < tile; ++r) {
                const auto yi = y.row(start + r);
                for (std::size_t o = 0; o < q; ++o) {
                    const double e = pred(r, o) - yi[o];
                    loss += e * e * row_scale;
                    gy(r, o) = 2.0 * e * row_scale;
                }
            }
            emulator_->input_vjp_block(tile, gy.data.data(), q, gx.data.data(), d, ws);
            for (std::size_t r = 0; r < tile; ++r)
                for (std::size_t j = 0; j < k; ++j)
                    grad(start + r, j) = dot(gx.row(r), v_[j]);
        }
        if (!std::isfinite(loss)) throw NumericsError("inverse: non-finite loss");
        return loss;
    };

    // The inverse objective is an unnormalized MSE whose scale depends on the
    // data, so the stopping tolerance is applied to the relative loss change
    // (the fit loss is already normalized and uses the absolute change).
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        const double loss = loss_and_grad();
        if (epoch > 0 && std::abs(prev - loss) <=
                             opts.tol * std::max(prev, std::numeric_limits<double>::min()))
            break;
        prev = loss;
        adam_step(adam, std::span<double>(t.data), std::span<const double>(grad.data));
    }

    // Final per-row mean-squared errors at the returned scores.
    Vector err(m, 0.0);
    const Matrix final_pred = emulator_->forward(expand(t));
    for (std::size_t i = 0; i < m; ++i) {
        const auto yi = y.row(i);
        double e2 = 0.0;
        for (std::size_t o = 0; o < q; ++o) {
            const double e = final_pred(i, o) - yi[o];
            e2 += e * e;
        }
        err[i] = e2 / static_cast<double>(q);
    }
    return {std::move(t), std::move(err)};
}

}  // namespace eca
