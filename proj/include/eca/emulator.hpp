#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eca/errors.hpp"
#include "eca/linalg.hpp"

namespace eca {

enum class Activation { relu, tanh, logistic, identity };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::logistic: return "logistic";
        case Activation::identity: return "identity";
    }
    throw FormatError("unknown activation enum value");
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "logistic") return Activation::logistic;
    if (name == "identity") return Activation::identity;
    throw FormatError("unknown activation name: " + name);
}

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::logistic: return 1.0 / (1.0 + std::exp(-z));
        case Activation::identity: return z;
    }
    return z;
}

/// Derivative w.r.t. the pre-activation. relu'(0) is defined as 0 so that
/// results are bit-reproducible.
inline double activate_deriv(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::logistic: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

struct DenseLayer {
    Matrix weights;  // out_dim x in_dim
    Vector bias;     // out_dim
    Activation activation = Activation::identity;

    std::size_t in_dim() const { return weights.cols; }
    std::size_t out_dim() const { return weights.rows; }
};

/// Reusable per-layer buffers for row-wise forward/backward passes.
/// Not shared between threads; each thread keeps its own.
struct MlpWorkspace {
    std::vector<Vector> pre;  // pre-activations z per layer
    std::vector<Vector> act;  // activations per layer (act[0] unused; input passed by span)
    Vector grad_a;            // scratch for the backward pass
    Vector grad_b;
};

/// Buffers for the row-blocked passes: tiles of `capacity` rows per layer.
/// Blocking exists so a weight matrix is streamed once per block instead of
/// once per row; each individual output is still the same dot-product in the
/// same order, so block results are bit-identical to row-wise results.
struct MlpBlockWorkspace {
    std::size_t capacity = 0;
    std::vector<Matrix> pre;  // per layer: capacity x out_dim
    std::vector<Matrix> act;
    Matrix back_a;  // capacity x max_width backward tiles
    Matrix back_b;
};

/// Fully connected feed-forward network y_emu(x). Immutable after
/// construction; forward and input_vjp are read-only and safe to call
/// concurrently (with distinct workspaces).
class MlpEmulator {
  public:
    explicit MlpEmulator(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
        if (layers_.empty()) throw DimensionError("emulator: needs at least one layer");
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& lay = layers_[l];
            if (lay.weights.rows == 0 || lay.weights.cols == 0)
                throw DimensionError("emulator: empty weight matrix in layer " +
                                     std::to_string(l));
            if (lay.bias.size() != lay.out_dim())
                throw DimensionError("emulator: bias dim mismatch in layer " +
                                     std::to_string(l));
            if (l > 0 && lay.in_dim() != layers_[l - 1].out_dim())
                throw DimensionError("emulator: layer " + std::to_string(l) +
                                     " expects input dim " + std::to_string(lay.in_dim()) +
                                     " but previous layer outputs " +
                                     std::to_string(layers_[l - 1].out_dim()));
        }
    }

    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.back().out_dim(); }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    MlpWorkspace make_workspace() const {
        MlpWorkspace ws;
        ws.pre.resize(layers_.size());
        ws.act.resize(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            ws.pre[l].assign(layers_[l].out_dim(), 0.0);
            ws.act[l].assign(layers_[l].out_dim(), 0.0);
        }
        ws.grad_a.assign(max_width(), 0.0);
        ws.grad_b.assign(max_width(), 0.0);
        return ws;
    }

    /// Single row; fills ws.pre/ws.act so a backward pass can follow.
    /// Writes the network output into `y`.
    void forward_row(std::span<const double> x, std::span<double> y,
                     MlpWorkspace& ws) const {
        if (x.size() != input_dim())
            throw DimensionError("forward: input dim mismatch");
        if (y.size() != output_dim())
            throw DimensionError("forward: output dim mismatch");
        std::span<const double> in = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const DenseLayer& lay = layers_[l];
            Vector& z = ws.pre[l];
            Vector& a = ws.act[l];
            matvec(lay.weights, in, z);
            for (std::size_t i = 0; i < z.size(); ++i) {
                z[i] += lay.bias[i];
                a[i] = activate(lay.activation, z[i]);
            }
            in = a;
        }
        const Vector& out = ws.act.back();
        for (std::size_t i = 0; i < out.size(); ++i) y[i] = out[i];
    }

    Vector forward_row(std::span<const double> x) const {
        MlpWorkspace ws = make_workspace();
        Vector y(output_dim());
        forward_row(x, y, ws);
        return y;
    }

    MlpBlockWorkspace make_block_workspace(std::size_t capacity) const {
        MlpBlockWorkspace ws;
        ws.capacity = capacity;
        ws.pre.resize(layers_.size());
        ws.act.resize(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            ws.pre[l] = Matrix(capacity, layers_[l].out_dim());
            ws.act[l] = Matrix(capacity, layers_[l].out_dim());
        }
        ws.back_a = Matrix(capacity, max_width());
        ws.back_b = Matrix(capacity, max_width());
        return ws;
    }

    /// Forward for a tile of `rows` inputs laid out row-major with the given
    /// stride. Fills ws.pre/ws.act so input_vjp_block can follow. Bit-exact
    /// per row against forward_row.
    void forward_block(const double* x, std::size_t rows, std::size_t x_stride,
                       double* y, std::size_t y_stride, MlpBlockWorkspace& ws) const {
        if (rows > ws.capacity) throw DimensionError("forward_block: tile too large");
        const double* in = x;
        std::size_t in_stride = x_stride;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const DenseLayer& lay = layers_[l];
            const std::size_t width = lay.out_dim();
            const std::size_t in_dim = lay.in_dim();
            Matrix& z = ws.pre[l];
            Matrix& a = ws.act[l];
            for (std::size_t i = 0; i < width; ++i) {
                const auto wrow = lay.weights.row(i);
                const double bias = lay.bias[i];
                for (std::size_t r = 0; r < rows; ++r) {
                    const double zv =
                        dot(wrow, std::span<const double>(in + r * in_stride, in_dim)) +
                        bias;
                    z(r, i) = zv;
                    a(r, i) = activate(lay.activation, zv);
                }
            }
            in = a.data.data();
            in_stride = a.cols;
        }
        const Matrix& out = ws.act.back();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < out.cols; ++o) y[r * y_stride + o] = out(r, o);
    }

    /// J^T . upstream for every row of the tile recorded in `ws` by the last
    /// forward_block. Bit-exact per row against input_vjp_from_workspace.
    void input_vjp_block(std::size_t rows, const double* upstream,
                         std::size_t u_stride, double* grad_x, std::size_t g_stride,
                         MlpBlockWorkspace& ws) const {
        if (rows > ws.capacity) throw DimensionError("input_vjp_block: tile too large");
        Matrix& g = ws.back_a;
        Matrix& h = ws.back_b;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < output_dim(); ++o)
                g(r, o) = upstream[r * u_stride + o];
        for (std::size_t li = layers_.size(); li-- > 0;) {
            const DenseLayer& lay = layers_[li];
            const std::size_t width = lay.out_dim();
            const std::size_t in_dim = lay.in_dim();
            const Matrix& z = ws.pre[li];
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t i = 0; i < width; ++i)
                    g(r, i) *= activate_deriv(lay.activation, z(r, i));
            const bool last = li == 0;
            for (std::size_t r = 0; r < rows; ++r) {
                double* target = last ? grad_x + r * g_stride : &h(r, 0);
                std::fill(target, target + in_dim, 0.0);
            }
            for (std::size_t i = 0; i < width; ++i) {
                const auto wrow = lay.weights.row(i);
                for (std::size_t r = 0; r < rows; ++r) {
                    double* target = last ? grad_x + r * g_stride : &h(r, 0);
                    axpy(g(r, i), wrow, std::span<double>(target, in_dim));
                }
            }
            if (!last)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < in_dim; ++i) g(r, i) = h(r, i);
        }
    }

    static constexpr std::size_t kBlockRows = 8;

    /// Batched forward: row i of the result is the network applied to row i
    /// of X, bit-identical to forward_row on that row.
    Matrix forward(const Matrix& x) const {
        if (x.cols != input_dim())
            throw DimensionError("forward: X has " + std::to_string(x.cols) +
                                 " cols, emulator expects " + std::to_string(input_dim()));
        Matrix y(x.rows, output_dim());
        MlpBlockWorkspace ws = make_block_workspace(kBlockRows);
        for (std::size_t start = 0; start < x.rows; start += kBlockRows) {
            const std::size_t rows = std::min(kBlockRows, x.rows - start);
            forward_block(x.data.data() + start * x.cols, rows, x.cols,
                          y.data.data() + start * y.cols, y.cols, ws);
        }
        if (!y.all_finite()) throw NumericsError("forward: non-finite output");
        return y;
    }

    /// J^T . upstream at the point of the last forward_row recorded in `ws`.
    /// `x` must be the same input that produced ws.
    void input_vjp_from_workspace(std::span<const double> x,
                                  std::span<const double> upstream,
                                  std::span<double> grad_x, MlpWorkspace& ws) const {
        if (upstream.size() != output_dim())
            throw DimensionError("input_vjp: upstream dim mismatch");
        if (x.size() != input_dim() || grad_x.size() != input_dim())
            throw DimensionError("input_vjp: input dim mismatch");

        // g starts as upstream, then walks backwards through the layers:
        // g <- W_l^T (g o act'(z_l))
        Vector& g = ws.grad_a;
        Vector& h = ws.grad_b;
        for (std::size_t i = 0; i < upstream.size(); ++i) g[i] = upstream[i];
        for (std::size_t li = layers_.size(); li-- > 0;) {
            const DenseLayer& lay = layers_[li];
            const Vector& z = ws.pre[li];
            for (std::size_t i = 0; i < lay.out_dim(); ++i)
                g[i] *= activate_deriv(lay.activation, z[i]);
            std::span<double> target =
                li > 0 ? std::span<double>(h.data(), lay.in_dim()) : grad_x;
            matvec_transposed(lay.weights, std::span<const double>(g.data(), lay.out_dim()),
                              target);
            if (li > 0)
                for (std::size_t i = 0; i < lay.in_dim(); ++i) g[i] = h[i];
        }
    }

    Vector input_vjp(std::span<const double> x, std::span<const double> upstream) const {
        MlpWorkspace ws = make_workspace();
        Vector y(output_dim());
        forward_row(x, y, ws);
        Vector grad(input_dim());
        input_vjp_from_workspace(x, upstream, grad, ws);
        return grad;
    }

  private:
    std::size_t max_width() const {
        std::size_t w = input_dim();
        for (const auto& l : layers_) w = std::max(w, l.out_dim());
        return w;
    }

    std::vector<DenseLayer> layers_;
};

}  // namespace eca
