#include "adasr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace adasr {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
    for (int e : shape) {
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape(shape_);
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_)) {
        throw ShapeError("value count " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
    }
}

double& Tensor::at(int i, int j) {
    return data_[static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) + static_cast<std::size_t>(j)];
}

double Tensor::at(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) + static_cast<std::size_t>(j)];
}

double& Tensor::at(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) + static_cast<std::size_t>(j)) *
                     static_cast<std::size_t>(shape_[2]) +
                 static_cast<std::size_t>(k)];
}

double Tensor::at(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) + static_cast<std::size_t>(j)) *
                     static_cast<std::size_t>(shape_[2]) +
                 static_cast<std::size_t>(k)];
}

int Tensor::rows() const {
    if (rank() != 3) throw ShapeError("rows(): tensor is not a cube, shape " + shape_str(shape_));
    return shape_[0];
}

int Tensor::cols() const {
    if (rank() != 3) throw ShapeError("cols(): tensor is not a cube, shape " + shape_str(shape_));
    return shape_[1];
}

int Tensor::bands() const {
    if (rank() != 3) throw ShapeError("bands(): tensor is not a cube, shape " + shape_str(shape_));
    return shape_[2];
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::accumulate_grad(std::span<const double> g) {
    if (static_cast<std::int64_t>(g.size()) != size()) {
        throw ShapeError("gradient size " + std::to_string(g.size()) + " does not match tensor size " +
                         std::to_string(size()));
    }
    if (!grad) grad.emplace(data_.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) (*grad)[i] += g[i];
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

Value Graph::push(Node n) {
    check_finite(n.val, "node");
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
}

Graph::Node& Graph::node(Value v) {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) throw Error("invalid graph value handle");
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Graph::Node& Graph::node(Value v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) throw Error("invalid graph value handle");
    return nodes_[static_cast<std::size_t>(v.id)];
}

std::vector<double>& Graph::adj(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.adj.empty()) n.adj.assign(n.val.values().size(), 0.0);
    return n.adj;
}

void Graph::check_finite(const Tensor& t, const char* op_name) const {
    if (!t.all_finite()) {
        throw NumericError(std::string("non-finite value produced by ") + op_name);
    }
}

Value Graph::param(Tensor& t) {
    Node n;
    n.op = Op::Leaf;
    n.val = t;
    n.bound = &t;
    n.needs_grad = t.requires_grad;
    return push(std::move(n));
}

Value Graph::input(const Tensor& t) {
    Node n;
    n.op = Op::Input;
    n.val = t;
    return push(std::move(n));
}

Value Graph::input(Tensor&& t) {
    Node n;
    n.op = Op::Input;
    n.val = std::move(t);
    return push(std::move(n));
}

const Tensor& Graph::value(Value v) const { return node(v).val; }

double Graph::scalar(Value v) const {
    const Tensor& t = node(v).val;
    if (t.size() != 1) throw ShapeError("scalar(): value has " + std::to_string(t.size()) + " elements");
    return t.at(0);
}

Value Graph::linear(Value x, Value w, Value b) {
    const Tensor& xv = node(x).val;
    const Tensor& wv = node(w).val;
    const Tensor& bv = node(b).val;
    if (wv.rank() != 2) throw ShapeError("linear: weight must be rank 2, got " + shape_str(wv.shape()));
    const int c_out = wv.dim(0);
    const int c_in = wv.dim(1);
    if (xv.shape().back() != c_in) {
        throw ShapeError("linear: input channels " + std::to_string(xv.shape().back()) + " != weight c_in " +
                         std::to_string(c_in));
    }
    if (bv.rank() != 1 || bv.dim(0) != c_out) {
        throw ShapeError("linear: bias must have shape [" + std::to_string(c_out) + "]");
    }
    Shape out_shape = xv.shape();
    out_shape.back() = c_out;
    const std::int64_t pixels = xv.size() / c_in;

    Tensor out(out_shape);
    for (std::int64_t p = 0; p < pixels; ++p) {
        const double* xp = xv.data() + p * c_in;
        double* op = out.data() + p * c_out;
        for (int o = 0; o < c_out; ++o) {
            const double* wr = wv.data() + static_cast<std::int64_t>(o) * c_in;
            double acc = bv.at(o);
            for (int i = 0; i < c_in; ++i) acc += xp[i] * wr[i];
            op[o] = acc;
        }
    }
    Node n;
    n.op = Op::Linear;
    n.inputs = {x.id, w.id, b.id};
    n.val = std::move(out);
    n.needs_grad = node(x).needs_grad || node(w).needs_grad || node(b).needs_grad;
    return push(std::move(n));
}

namespace {

// Per-output-band weight sums of the masked mix; shared by forward and backward.
std::vector<double> spectral_weight_sums(const Tensor& w, const SupportSets& supports) {
    std::vector<double> sums(supports.size(), 0.0);
    for (std::size_t j = 0; j < supports.size(); ++j) {
        double s = 0.0;
        for (int t : supports[j]) s += w.at(static_cast<int>(j), t);
        if (!(s > 0.0)) {
            throw NumericError("conv_spectral_1x1: support weight sum for band " + std::to_string(j) +
                               " is not positive");
        }
        sums[j] = s;
    }
    return sums;
}

void validate_supports(const SupportSets& supports, int c_in) {
    if (supports.empty()) throw ConfigError("conv_spectral_1x1: no support sets");
    for (std::size_t j = 0; j < supports.size(); ++j) {
        if (supports[j].empty()) {
            throw ConfigError("conv_spectral_1x1: empty support set for band " + std::to_string(j));
        }
        for (int t : supports[j]) {
            if (t < 0 || t >= c_in) {
                throw ConfigError("conv_spectral_1x1: band index " + std::to_string(t) + " out of range [0," +
                                  std::to_string(c_in) + ")");
            }
        }
    }
}

}  // namespace

Value Graph::conv_spectral_1x1(Value x, Value w, const SupportSets& supports) {
    const Tensor& xv = node(x).val;
    const Tensor& wv = node(w).val;
    if (xv.rank() != 3) throw ShapeError("conv_spectral_1x1: input must be a cube, got " + shape_str(xv.shape()));
    const int c_in = xv.bands();
    const int c_out = static_cast<int>(supports.size());
    validate_supports(supports, c_in);
    if (wv.rank() != 2 || wv.dim(0) != c_out || wv.dim(1) != c_in) {
        throw ShapeError("conv_spectral_1x1: weights must have shape [" + std::to_string(c_out) + "," +
                         std::to_string(c_in) + "], got " + shape_str(wv.shape()));
    }
    const std::vector<double> sums = spectral_weight_sums(wv, supports);

    Tensor out({xv.rows(), xv.cols(), c_out});
    const std::int64_t pixels = static_cast<std::int64_t>(xv.rows()) * xv.cols();
    for (std::int64_t p = 0; p < pixels; ++p) {
        const double* xp = xv.data() + p * c_in;
        double* op = out.data() + p * c_out;
        for (int j = 0; j < c_out; ++j) {
            double acc = 0.0;
            for (int t : supports[static_cast<std::size_t>(j)]) acc += xp[t] * wv.at(j, t);
            op[j] = acc / sums[static_cast<std::size_t>(j)];
        }
    }
    Node n;
    n.op = Op::ConvSpectral;
    n.inputs = {x.id, w.id};
    n.val = std::move(out);
    n.supports = std::make_shared<const SupportSets>(supports);
    n.needs_grad = node(x).needs_grad || node(w).needs_grad;
    return push(std::move(n));
}

Value Graph::conv_spatial_depthwise(Value x, Value kernel, int stride) {
    const Tensor& xv = node(x).val;
    const Tensor& kv = node(kernel).val;
    if (xv.rank() != 3) throw ShapeError("conv_spatial_depthwise: input must be a cube");
    if (kv.rank() != 2 || kv.dim(0) != kv.dim(1)) {
        throw ShapeError("conv_spatial_depthwise: kernel must be square, got " + shape_str(kv.shape()));
    }
    const int k = kv.dim(0);
    if (stride != k) {
        throw ShapeError("conv_spatial_depthwise: stride " + std::to_string(stride) + " must equal kernel size " +
                         std::to_string(k));
    }
    const int rows = xv.rows(), cols = xv.cols(), bands = xv.bands();
    if (rows % k != 0 || cols % k != 0) {
        throw ShapeError("conv_spatial_depthwise: extents " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " not divisible by " + std::to_string(k));
    }
    const int out_rows = rows / k, out_cols = cols / k;

    Tensor out({out_rows, out_cols, bands});
    for (int oy = 0; oy < out_rows; ++oy) {
        for (int ox = 0; ox < out_cols; ++ox) {
            for (int c = 0; c < bands; ++c) {
                double acc = 0.0;
                for (int u = 0; u < k; ++u) {
                    for (int v = 0; v < k; ++v) {
                        acc += xv.at(oy * k + u, ox * k + v, c) * kv.at(u, v);
                    }
                }
                out.at(oy, ox, c) = acc;
            }
        }
    }
    Node n;
    n.op = Op::ConvSpatial;
    n.inputs = {x.id, kernel.id};
    n.val = std::move(out);
    n.stride = k;
    n.needs_grad = node(x).needs_grad || node(kernel).needs_grad;
    return push(std::move(n));
}

Value Graph::rotate_bilinear(Value x, Value angle) {
    const Tensor& xv = node(x).val;
    const Tensor& av = node(angle).val;
    if (xv.rank() != 3) throw ShapeError("rotate_bilinear: input must be a cube");
    if (av.size() != 1) throw ShapeError("rotate_bilinear: angle must be a scalar");
    const double theta = av.at(0);
    if (!std::isfinite(theta)) throw NumericError("rotate_bilinear: non-finite angle");

    const int rows = xv.rows(), cols = xv.cols(), bands = xv.bands();
    const double cy = (rows - 1) / 2.0;
    const double cx = (cols - 1) / 2.0;
    const double ct = std::cos(theta), st = std::sin(theta);

    Tensor out({rows, cols, bands});
    for (int y = 0; y < rows; ++y) {
        for (int x2 = 0; x2 < cols; ++x2) {
            const double vx = x2 - cx, vy = y - cy;
            const double sx = ct * vx + st * vy + cx;
            const double sy = -st * vx + ct * vy + cy;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            const bool in00 = (y0 >= 0 && y0 < rows && x0 >= 0 && x0 < cols);
            const bool in10 = (y0 >= 0 && y0 < rows && x0 + 1 >= 0 && x0 + 1 < cols);
            const bool in01 = (y0 + 1 >= 0 && y0 + 1 < rows && x0 >= 0 && x0 < cols);
            const bool in11 = (y0 + 1 >= 0 && y0 + 1 < rows && x0 + 1 >= 0 && x0 + 1 < cols);
            for (int c = 0; c < bands; ++c) {
                const double i00 = in00 ? xv.at(y0, x0, c) : 0.0;
                const double i10 = in10 ? xv.at(y0, x0 + 1, c) : 0.0;
                const double i01 = in01 ? xv.at(y0 + 1, x0, c) : 0.0;
                const double i11 = in11 ? xv.at(y0 + 1, x0 + 1, c) : 0.0;
                out.at(y, x2, c) = (1.0 - fy) * ((1.0 - fx) * i00 + fx * i10) + fy * ((1.0 - fx) * i01 + fx * i11);
            }
        }
    }
    Node n;
    n.op = Op::Rotate;
    n.inputs = {x.id, angle.id};
    n.val = std::move(out);
    n.needs_grad = node(x).needs_grad || node(angle).needs_grad;
    return push(std::move(n));
}

Value Graph::adaptive_avg_pool_to_1(Value x) {
    const Tensor& xv = node(x).val;
    if (xv.rank() != 3) throw ShapeError("adaptive_avg_pool_to_1: input must be a cube");
    const int rows = xv.rows(), cols = xv.cols(), bands = xv.bands();
    const double inv_n = 1.0 / (static_cast<double>(rows) * cols);

    // Mean as base + mean of deviations: exact for spatially constant input.
    Tensor out({1, 1, bands});
    for (int c = 0; c < bands; ++c) {
        const double base = xv.at(0, 0, c);
        double acc = 0.0;
        for (int y = 0; y < rows; ++y) {
            for (int x2 = 0; x2 < cols; ++x2) acc += xv.at(y, x2, c) - base;
        }
        out.at(0, 0, c) = base + acc * inv_n;
    }
    Node n;
    n.op = Op::AvgPool;
    n.inputs = {x.id};
    n.val = std::move(out);
    n.needs_grad = node(x).needs_grad;
    return push(std::move(n));
}

Value Graph::leaky_relu(Value x, double negative_slope) {
    const Tensor& xv = node(x).val;
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) {
        const double v = xv.at(static_cast<int>(i));
        out.at(static_cast<int>(i)) = v >= 0.0 ? v : negative_slope * v;
    }
    Node n;
    n.op = Op::LeakyRelu;
    n.inputs = {x.id};
    n.val = std::move(out);
    n.attr = negative_slope;
    n.needs_grad = node(x).needs_grad;
    return push(std::move(n));
}

Value Graph::tanh(Value x) {
    const Tensor& xv = node(x).val;
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) out.at(static_cast<int>(i)) = std::tanh(xv.at(static_cast<int>(i)));
    Node n;
    n.op = Op::Tanh;
    n.inputs = {x.id};
    n.val = std::move(out);
    n.needs_grad = node(x).needs_grad;
    return push(std::move(n));
}

Value Graph::softplus(Value x) {
    const Tensor& xv = node(x).val;
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i)
        out.at(static_cast<int>(i)) = softplus_scalar(xv.at(static_cast<int>(i)));
    Node n;
    n.op = Op::Softplus;
    n.inputs = {x.id};
    n.val = std::move(out);
    n.needs_grad = node(x).needs_grad;
    return push(std::move(n));
}

Value Graph::softmax(Value x) {
    const Tensor& xv = node(x).val;
    Tensor out(xv.shape());
    softmax_flat(xv.values(), out.values());
    Node n;
    n.op = Op::Softmax;
    n.inputs = {x.id};
    n.val = std::move(out);
    n.needs_grad = node(x).needs_grad;
    return push(std::move(n));
}

Value Graph::l1_mean(Value a, Value b) {
    const Tensor& av = node(a).val;
    const Tensor& bv = node(b).val;
    if (!av.same_shape(bv)) {
        throw ShapeError("l1_mean: shape mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
    }
    double acc = 0.0;
    for (std::int64_t i = 0; i < av.size(); ++i) acc += std::abs(av.at(static_cast<int>(i)) - bv.at(static_cast<int>(i)));
    Tensor out(Shape{1});
    out.at(0) = acc / static_cast<double>(av.size());
    Node n;
    n.op = Op::L1Mean;
    n.inputs = {a.id, b.id};
    n.val = std::move(out);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    return push(std::move(n));
}

Value Graph::log(Value x) {
    const Tensor& xv = node(x).val;
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) {
        const double v = xv.at(static_cast<int>(i));
        if (!(v > 0.0)) throw NumericError("log: input must be strictly positive, got " + std::to_string(v));
        out.at(static_cast<int>(i)) = std::log(v);
    }
    Node n;
    n.op = Op::Log;
    n.inputs = {x.id};
    n.val = std::move(out);
    n.needs_grad = node(x).needs_grad;
    return push(std::move(n));
}

Value Graph::clamp_min(Value x, double floor) {
    const Tensor& xv = node(x).val;
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) out.at(static_cast<int>(i)) = std::max(xv.at(static_cast<int>(i)), floor);
    Node n;
    n.op = Op::ClampMin;
    n.inputs = {x.id};
    n.val = std::move(out);
    n.attr = floor;
    n.needs_grad = node(x).needs_grad;
    return push(std::move(n));
}

Value Graph::scalar_mul(Value x, double factor) {
    const Tensor& xv = node(x).val;
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) out.at(static_cast<int>(i)) = factor * xv.at(static_cast<int>(i));
    Node n;
    n.op = Op::ScalarMul;
    n.inputs = {x.id};
    n.val = std::move(out);
    n.attr = factor;
    n.needs_grad = node(x).needs_grad;
    return push(std::move(n));
}

Value Graph::add(Value a, Value b) {
    const Tensor& av = node(a).val;
    const Tensor& bv = node(b).val;
    if (!av.same_shape(bv)) {
        throw ShapeError("add: shape mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
    }
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.size(); ++i)
        out.at(static_cast<int>(i)) = av.at(static_cast<int>(i)) + bv.at(static_cast<int>(i));
    Node n;
    n.op = Op::Add;
    n.inputs = {a.id, b.id};
    n.val = std::move(out);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    return push(std::move(n));
}

Value Graph::mul(Value a, Value b) {
    const Tensor& av = node(a).val;
    const Tensor& bv = node(b).val;
    if (!av.same_shape(bv)) {
        throw ShapeError("mul: shape mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
    }
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.size(); ++i)
        out.at(static_cast<int>(i)) = av.at(static_cast<int>(i)) * bv.at(static_cast<int>(i));
    Node n;
    n.op = Op::Mul;
    n.inputs = {a.id, b.id};
    n.val = std::move(out);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    return push(std::move(n));
}

Value Graph::sum_all(Value x) {
    const Tensor& xv = node(x).val;
    double acc = 0.0;
    for (std::int64_t i = 0; i < xv.size(); ++i) acc += xv.at(static_cast<int>(i));
    Tensor out(Shape{1});
    out.at(0) = acc;
    Node n;
    n.op = Op::SumAll;
    n.inputs = {x.id};
    n.val = std::move(out);
    n.needs_grad = node(x).needs_grad;
    return push(std::move(n));
}

void Graph::backward(Value loss) {
    if (backward_done_) throw Error("backward() already called on this graph");
    const Node& ln = node(loss);
    if (ln.val.size() != 1) throw ShapeError("backward: loss must be a scalar");
    if (!ln.needs_grad) throw Error("backward: loss is detached from every requires_grad leaf");

    adj(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.needs_grad || n.adj.empty()) continue;
        backward_node(id);
    }
    // Write leaf gradients back.
    for (Node& n : nodes_) {
        if (n.op == Op::Leaf && n.bound && n.bound->requires_grad && !n.adj.empty()) {
            n.bound->accumulate_grad(n.adj);
        }
    }
    backward_done_ = true;
}

void Graph::backward_node(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const std::vector<double>& g = n.adj;

    auto in_needs = [&](int slot) { return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(slot)])].needs_grad; };
    auto in_val = [&](int slot) -> const Tensor& {
        return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(slot)])].val;
    };
    auto in_adj = [&](int slot) -> std::vector<double>& { return adj(n.inputs[static_cast<std::size_t>(slot)]); };

    switch (n.op) {
        case Op::Leaf:
        case Op::Input:
            break;

        case Op::Linear: {
            const Tensor& xv = in_val(0);
            const Tensor& wv = in_val(1);
            const int c_out = wv.dim(0), c_in = wv.dim(1);
            const std::int64_t pixels = xv.size() / c_in;
            if (in_needs(0)) {
                std::vector<double>& gx = in_adj(0);
                for (std::int64_t p = 0; p < pixels; ++p) {
                    const double* gp = g.data() + p * c_out;
                    double* gxp = gx.data() + p * c_in;
                    for (int o = 0; o < c_out; ++o) {
                        const double go = gp[o];
                        const double* wr = wv.data() + static_cast<std::int64_t>(o) * c_in;
                        for (int i = 0; i < c_in; ++i) gxp[i] += go * wr[i];
                    }
                }
            }
            if (in_needs(1)) {
                std::vector<double>& gw = in_adj(1);
                for (std::int64_t p = 0; p < pixels; ++p) {
                    const double* gp = g.data() + p * c_out;
                    const double* xp = xv.data() + p * c_in;
                    for (int o = 0; o < c_out; ++o) {
                        const double go = gp[o];
                        double* gwr = gw.data() + static_cast<std::int64_t>(o) * c_in;
                        for (int i = 0; i < c_in; ++i) gwr[i] += go * xp[i];
                    }
                }
            }
            if (in_needs(2)) {
                std::vector<double>& gb = in_adj(2);
                for (std::int64_t p = 0; p < pixels; ++p) {
                    const double* gp = g.data() + p * c_out;
                    for (int o = 0; o < c_out; ++o) gb[static_cast<std::size_t>(o)] += gp[o];
                }
            }
            break;
        }

        case Op::ConvSpectral: {
            const Tensor& xv = in_val(0);
            const Tensor& wv = in_val(1);
            const SupportSets& supports = *n.supports;
            const int c_in = xv.bands();
            const int c_out = static_cast<int>(supports.size());
            const std::vector<double> sums = spectral_weight_sums(wv, supports);
            const std::int64_t pixels = static_cast<std::int64_t>(xv.rows()) * xv.cols();
            const bool nx = in_needs(0), nw = in_needs(1);
            std::vector<double>* gx = nx ? &in_adj(0) : nullptr;
            std::vector<double>* gw = nw ? &in_adj(1) : nullptr;
            for (std::int64_t p = 0; p < pixels; ++p) {
                const double* xp = xv.data() + p * c_in;
                const double* gp = g.data() + p * c_out;
                const double* op = n.val.data() + p * c_out;
                for (int j = 0; j < c_out; ++j) {
                    const double gj = gp[j];
                    if (gj == 0.0) continue;
                    const double inv_s = 1.0 / sums[static_cast<std::size_t>(j)];
                    for (int t : supports[static_cast<std::size_t>(j)]) {
                        if (nx) (*gx)[p * c_in + t] += gj * wv.at(j, t) * inv_s;
                        if (nw) (*gw)[static_cast<std::size_t>(j) * c_in + static_cast<std::size_t>(t)] +=
                            gj * (xp[t] - op[j]) * inv_s;
                    }
                }
            }
            break;
        }

        case Op::ConvSpatial: {
            const Tensor& xv = in_val(0);
            const Tensor& kv = in_val(1);
            const int k = n.stride;
            const int bands = xv.bands();
            const int out_rows = n.val.rows(), out_cols = n.val.cols();
            const bool nx = in_needs(0), nk = in_needs(1);
            std::vector<double>* gx = nx ? &in_adj(0) : nullptr;
            std::vector<double>* gk = nk ? &in_adj(1) : nullptr;
            for (int oy = 0; oy < out_rows; ++oy) {
                for (int ox = 0; ox < out_cols; ++ox) {
                    for (int c = 0; c < bands; ++c) {
                        const double go = g[(static_cast<std::size_t>(oy) * out_cols + ox) * bands + c];
                        if (go == 0.0) continue;
                        for (int u = 0; u < k; ++u) {
                            for (int v = 0; v < k; ++v) {
                                const std::size_t xi =
                                    (static_cast<std::size_t>(oy * k + u) * xv.cols() + (ox * k + v)) * bands + c;
                                if (nx) (*gx)[xi] += go * kv.at(u, v);
                                if (nk) (*gk)[static_cast<std::size_t>(u) * k + v] += go * xv.values()[xi];
                            }
                        }
                    }
                }
            }
            break;
        }

        case Op::Rotate: {
            const Tensor& xv = in_val(0);
            const double theta = in_val(1).at(0);
            const int rows = xv.rows(), cols = xv.cols(), bands = xv.bands();
            const double cy = (rows - 1) / 2.0;
            const double cx = (cols - 1) / 2.0;
            const double ct = std::cos(theta), st = std::sin(theta);
            const bool nx = in_needs(0), na = in_needs(1);
            std::vector<double>* gx = nx ? &in_adj(0) : nullptr;
            double gtheta = 0.0;
            for (int y = 0; y < rows; ++y) {
                for (int x2 = 0; x2 < cols; ++x2) {
                    const double vx = x2 - cx, vy = y - cy;
                    const double sx = ct * vx + st * vy + cx;
                    const double sy = -st * vx + ct * vy + cy;
                    const int x0 = static_cast<int>(std::floor(sx));
                    const int y0 = static_cast<int>(std::floor(sy));
                    const double fx = sx - x0, fy = sy - y0;
                    const bool in00 = (y0 >= 0 && y0 < rows && x0 >= 0 && x0 < cols);
                    const bool in10 = (y0 >= 0 && y0 < rows && x0 + 1 < cols && x0 + 1 >= 0);
                    const bool in01 = (y0 + 1 < rows && y0 + 1 >= 0 && x0 >= 0 && x0 < cols);
                    const bool in11 = (y0 + 1 < rows && y0 + 1 >= 0 && x0 + 1 < cols && x0 + 1 >= 0);
                    const double dsx_dt = -st * vx + ct * vy;
                    const double dsy_dt = -ct * vx - st * vy;
                    for (int c = 0; c < bands; ++c) {
                        const double go = g[(static_cast<std::size_t>(y) * cols + x2) * bands + c];
                        if (go == 0.0) continue;
                        const double i00 = in00 ? xv.at(y0, x0, c) : 0.0;
                        const double i10 = in10 ? xv.at(y0, x0 + 1, c) : 0.0;
                        const double i01 = in01 ? xv.at(y0 + 1, x0, c) : 0.0;
                        const double i11 = in11 ? xv.at(y0 + 1, x0 + 1, c) : 0.0;
                        if (nx) {
                            if (in00) (*gx)[(static_cast<std::size_t>(y0) * cols + x0) * bands + c] += go * (1 - fy) * (1 - fx);
                            if (in10) (*gx)[(static_cast<std::size_t>(y0) * cols + x0 + 1) * bands + c] += go * (1 - fy) * fx;
                            if (in01) (*gx)[(static_cast<std::size_t>(y0 + 1) * cols + x0) * bands + c] += go * fy * (1 - fx);
                            if (in11) (*gx)[(static_cast<std::size_t>(y0 + 1) * cols + x0 + 1) * bands + c] += go * fy * fx;
                        }
                        if (na) {
                            const double dv_dsx = (1 - fy) * (i10 - i00) + fy * (i11 - i01);
                            const double dv_dsy = (1 - fx) * (i01 - i00) + fx * (i11 - i10);
                            gtheta += go * (dv_dsx * dsx_dt + dv_dsy * dsy_dt);
                        }
                    }
                }
            }
            if (na) in_adj(1)[0] += gtheta;
            break;
        }

        case Op::AvgPool: {
            if (!in_needs(0)) break;
            const Tensor& xv = in_val(0);
            const int rows = xv.rows(), cols = xv.cols(), bands = xv.bands();
            const double inv_n = 1.0 / (static_cast<double>(rows) * cols);
            std::vector<double>& gx = in_adj(0);
            for (int c = 0; c < bands; ++c) {
                const double gc = g[static_cast<std::size_t>(c)] * inv_n;
                for (int y = 0; y < rows; ++y) {
                    for (int x2 = 0; x2 < cols; ++x2) gx[(static_cast<std::size_t>(y) * cols + x2) * bands + c] += gc;
                }
            }
            break;
        }

        case Op::LeakyRelu: {
            if (!in_needs(0)) break;
            const Tensor& xv = in_val(0);
            std::vector<double>& gx = in_adj(0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx[i] += g[i] * (xv.values()[i] >= 0.0 ? 1.0 : n.attr);
            }
            break;
        }

        case Op::Tanh: {
            if (!in_needs(0)) break;
            std::vector<double>& gx = in_adj(0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = n.val.values()[i];
                gx[i] += g[i] * (1.0 - y * y);
            }
            break;
        }

        case Op::Softplus: {
            if (!in_needs(0)) break;
            const Tensor& xv = in_val(0);
            std::vector<double>& gx = in_adj(0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = xv.values()[i];
                const double sig = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
                gx[i] += g[i] * sig;
            }
            break;
        }

        case Op::Softmax: {
            if (!in_needs(0)) break;
            std::vector<double>& gx = in_adj(0);
            const std::vector<double>& y = n.val.values();
            double dot = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += y[i] * (g[i] - dot);
            break;
        }

        case Op::L1Mean: {
            const Tensor& av = in_val(0);
            const Tensor& bv = in_val(1);
            const double scale = g[0] / static_cast<double>(av.size());
            const bool na = in_needs(0), nb = in_needs(1);
            std::vector<double>* ga = na ? &in_adj(0) : nullptr;
            std::vector<double>* gb = nb ? &in_adj(1) : nullptr;
            for (std::size_t i = 0; i < av.values().size(); ++i) {
                const double d = av.values()[i] - bv.values()[i];
                const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                if (na) (*ga)[i] += scale * s;
                if (nb) (*gb)[i] -= scale * s;
            }
            break;
        }

        case Op::Log: {
            if (!in_needs(0)) break;
            const Tensor& xv = in_val(0);
            std::vector<double>& gx = in_adj(0);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv.values()[i];
            break;
        }

        case Op::ClampMin: {
            if (!in_needs(0)) break;
            const Tensor& xv = in_val(0);
            std::vector<double>& gx = in_adj(0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (xv.values()[i] > n.attr) gx[i] += g[i];
            }
            break;
        }

        case Op::ScalarMul: {
            if (!in_needs(0)) break;
            std::vector<double>& gx = in_adj(0);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.attr;
            break;
        }

        case Op::Add: {
            if (in_needs(0)) {
                std::vector<double>& ga = in_adj(0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (in_needs(1)) {
                std::vector<double>& gb = in_adj(1);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
            break;
        }

        case Op::Mul: {
            const Tensor& av = in_val(0);
            const Tensor& bv = in_val(1);
            if (in_needs(0)) {
                std::vector<double>& ga = in_adj(0);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv.values()[i];
            }
            if (in_needs(1)) {
                std::vector<double>& gb = in_adj(1);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av.values()[i];
            }
            break;
        }

        case Op::SumAll: {
            if (!in_needs(0)) break;
            std::vector<double>& gx = in_adj(0);
            const double g0 = g[0];
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g0;
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_step(Tensor& param, std::span<const double> grad, AdamState& state) {
    const std::size_t n = param.values().size();
    if (grad.size() != n) {
        throw ShapeError("adam_step: gradient size " + std::to_string(grad.size()) + " does not match parameter size " +
                         std::to_string(n));
    }
    if (state.m.empty()) state.m.assign(n, 0.0);
    if (state.v.empty()) state.v.assign(n, 0.0);
    if (state.m.size() != n || state.v.size() != n) throw ShapeError("adam_step: moment buffer size mismatch");

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * gi;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * gi * gi;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        param.values()[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, double lr) : params_(std::move(params)) {
    states_.resize(params_.size());
    for (AdamState& s : states_) s.lr = lr;
}

void AdamOptimizer::step() {
    static const std::vector<double> kEmpty;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        if (p.grad) {
            adam_step(p, *p.grad, states_[i]);
        } else {
            std::vector<double> zeros(p.values().size(), 0.0);
            adam_step(p, zeros, states_[i]);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (Tensor* p : params_) p->zero_grad();
}

}  // namespace adasr
