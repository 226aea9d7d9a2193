#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adasr/errors.hpp"

namespace adasr {

/// Extents of a dense row-major tensor. Image cubes use {rows, cols, bands}.
using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Numerically stable softplus. Shared by the graph op and the
/// reparameterized degradation weights so both produce identical values.
inline double softplus_scalar(double v) {
    if (v > 35.0) return v;
    if (v < -35.0) return std::exp(v);
    return std::log1p(std::exp(v));
}

/// Inverse of softplus_scalar for y > 0.
inline double softplus_inverse(double y) {
    if (y > 35.0) return y;
    return std::log(std::expm1(y));
}

/// Flat softmax with max subtraction, writing into out (same length as in).
inline void softmax_flat(std::span<const double> in, std::span<double> out) {
    double mx = in[0];
    for (double v : in) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = std::exp(in[i] - mx);
        sum += out[i];
    }
    for (std::size_t i = 0; i < in.size(); ++i) out[i] /= sum;
}

/// Dense 64-bit tensor. Values are stored contiguously in row-major order.
/// A tensor may carry a gradient buffer of identical extent; graphs write
/// leaf gradients back into it after backward().
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data_[static_cast<std::size_t>(i)]; }
    double& at(int i, int j);
    double at(int i, int j) const;
    double& at(int i, int j, int k);
    double at(int i, int j, int k) const;

    /// Cube accessors, shape {rows, cols, bands}.
    int rows() const;
    int cols() const;
    int bands() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    bool requires_grad = false;
    std::optional<std::vector<double>> grad;

    /// Zero-fills the gradient buffer if one exists.
    void zero_grad() {
        if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    }
    /// Adds `g` into the gradient buffer, creating it as zeros if absent.
    void accumulate_grad(std::span<const double> g);

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Support sets: for each output band, the input band indices it draws from.
using SupportSets = std::vector<std::vector<int>>;

/// Handle to a node in a Graph.
struct Value {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Define-by-run reverse-mode tape. Operations execute eagerly and record
/// a node; construction order is the topological order, and backward()
/// sweeps the tape exactly once in reverse. A graph is built per forward
/// pass and discarded after backward.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Registers a parameter leaf. After backward(), the leaf's gradient is
    /// accumulated into `t.grad` when `t.requires_grad` is set. The tensor
    /// must outlive the graph.
    Value param(Tensor& t);
    /// Registers a constant; no gradient flows here.
    Value input(const Tensor& t);
    Value input(Tensor&& t);

    /// Per-pixel dense map: x[..., c_in] x w[c_out, c_in] + b[c_out].
    Value linear(Value x, Value w, Value b);
    /// Masked normalized spectral mix, x[h,w,C] -> [h,w,C_m]:
    /// out band j = sum_{t in supports[j]} x[t]*w[j,t] / sum w[j,t].
    Value conv_spectral_1x1(Value x, Value w, const SupportSets& supports);
    /// Valid depthwise cross-correlation, kernel k x k applied with stride k.
    Value conv_spatial_depthwise(Value x, Value kernel, int stride);
    /// Rotation about the image center, bilinear sampling, zero padding.
    /// Differentiable in both the image and the angle (size-1 tensor).
    Value rotate_bilinear(Value x, Value angle);
    /// Per-band spatial mean, [h,w,C] -> [1,1,C].
    Value adaptive_avg_pool_to_1(Value x);

    Value leaky_relu(Value x, double negative_slope);
    Value tanh(Value x);
    Value softplus(Value x);
    /// Softmax over all entries; output sums to 1.
    Value softmax(Value x);
    /// Mean absolute difference, scalar output.
    Value l1_mean(Value a, Value b);
    /// Elementwise natural log; input must be strictly positive.
    Value log(Value x);
    Value clamp_min(Value x, double floor);
    Value scalar_mul(Value x, double factor);
    Value add(Value a, Value b);
    Value mul(Value a, Value b);
    /// Sum of all entries, scalar output.
    Value sum_all(Value x);

    const Tensor& value(Value v) const;
    double scalar(Value v) const;

    /// Reverse sweep from a scalar loss. May be called once per graph.
    void backward(Value loss);

    int node_count() const { return static_cast<int>(nodes_.size()); }

private:
    enum class Op {
        Leaf,
        Input,
        Linear,
        ConvSpectral,
        ConvSpatial,
        Rotate,
        AvgPool,
        LeakyRelu,
        Tanh,
        Softplus,
        Softmax,
        L1Mean,
        Log,
        ClampMin,
        ScalarMul,
        Add,
        Mul,
        SumAll,
    };

    struct Node {
        Op op;
        std::vector<int> inputs;
        Tensor val;
        std::vector<double> adj;  // allocated during backward
        double attr = 0.0;        // slope / factor / floor
        int stride = 0;
        std::shared_ptr<const SupportSets> supports;
        Tensor* bound = nullptr;  // leaf write-back target
        bool needs_grad = false;
    };

    Value push(Node node);
    Node& node(Value v);
    const Node& node(Value v) const;
    std::vector<double>& adj(int id);
    void check_finite(const Tensor& t, const char* op_name) const;

    void backward_node(int id);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

/// Adam moment buffers for one parameter tensor.
struct AdamState {
    std::int64_t step_count = 0;
    std::vector<double> m;
    std::vector<double> v;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam update with bias correction. Buffers are sized on first use.
void adam_step(Tensor& param, std::span<const double> grad, AdamState& state);

/// Bundles parameters with per-parameter Adam state.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor*> params, double lr);

    /// Applies one update using each parameter's accumulated gradient;
    /// a missing gradient buffer counts as zero.
    void step();
    void zero_grad();

    const AdamState& state(int i) const { return states_[static_cast<std::size_t>(i)]; }

private:
    std::vector<Tensor*> params_;
    std::vector<AdamState> states_;
};

}  // namespace adasr
