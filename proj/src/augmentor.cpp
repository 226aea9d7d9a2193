#include "adasr/augmentor.hpp"

#include <cmath>

#include "adasr/errors.hpp"

namespace adasr {

namespace {

Tensor uniform_init(std::mt19937_64& rng, const Shape& shape, int fan_in) {
    Tensor t(shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> d(-bound, bound);
    for (int i = 0; i < t.size(); ++i) t.at(i) = d(rng);
    t.requires_grad = true;
    return t;
}

Tensor zeros_param(const Shape& shape) {
    Tensor t(shape);
    t.requires_grad = true;
    return t;
}

}  // namespace

AugmentorParams AugmentorParams::init(int c, double angle_range, std::mt19937_64& rng) {
    if (c <= 0) throw ConfigError("augmentor: band count must be positive");
    if (!(angle_range > 0.0)) throw ConfigError("augmentor: angle_range must be positive");
    AugmentorParams p;
    p.w1 = uniform_init(rng, {16, c}, c);
    p.b1 = zeros_param({16});
    p.w2 = uniform_init(rng, {16, 16}, 16);
    p.b2 = zeros_param({16});
    p.w3 = uniform_init(rng, {8, 16}, 16);
    p.b3 = zeros_param({8});
    p.w4 = zeros_param({1, 8});  // zero head: initial angle is exactly 0
    p.b4 = zeros_param({1});
    p.angle_range = angle_range;
    return p;
}

std::vector<Tensor*> AugmentorParams::tensors() {
    return {&w1, &b1, &w2, &b2, &w3, &b3, &w4, &b4};
}

std::vector<const Tensor*> AugmentorParams::tensors() const {
    return {&w1, &b1, &w2, &b2, &w3, &b3, &w4, &b4};
}

Value predict_angle_node(Graph& g, Value y, AugmentorParams& params) {
    Value f = g.leaky_relu(g.linear(y, g.param(params.w1), g.param(params.b1)), 0.2);
    f = g.leaky_relu(g.linear(f, g.param(params.w2), g.param(params.b2)), 0.2);
    Value pooled = g.adaptive_avg_pool_to_1(f);  // {1, 1, 16}
    Value h = g.leaky_relu(g.linear(pooled, g.param(params.w3), g.param(params.b3)), 0.2);
    Value t = g.tanh(g.linear(h, g.param(params.w4), g.param(params.b4)));  // {1, 1, 1}
    return g.scalar_mul(t, params.angle_range);
}

AugmentedNodes augment_nodes(Graph& g, Value y, Value z, Value m, AugmentorParams& params) {
    const Tensor& yv = g.value(y);
    const Tensor& zv = g.value(z);
    const Tensor& mv = g.value(m);
    if (yv.rank() != 3 || zv.rank() != 3 || mv.rank() != 3)
        throw ShapeError("augment: expected rank-3 cubes");
    if (mv.rows() != yv.rows() || mv.cols() != yv.cols())
        throw ShapeError("augment: M must share Y's spatial extent");
    if (mv.bands() != zv.bands())
        throw ShapeError("augment: M must share Z's band count");

    AugmentedNodes out;
    out.angle = predict_angle_node(g, y, params);
    out.y_g = g.rotate_bilinear(y, out.angle);
    out.z_g = g.rotate_bilinear(z, out.angle);
    out.m_g = g.rotate_bilinear(m, out.angle);
    return out;
}

double predict_angle(const Tensor& y, const AugmentorParams& params) {
    Graph g;
    AugmentorParams copy = params;  // params enter the graph as plain leaves
    for (Tensor* t : copy.tensors()) t->requires_grad = false;
    Value a = predict_angle_node(g, g.input(y), copy);
    return g.value(a).at(0);
}

AugmentedTriple augment(const Tensor& y, const Tensor& z, const Tensor& m,
                        const AugmentorParams& params) {
    Graph g;
    AugmentorParams copy = params;
    for (Tensor* t : copy.tensors()) t->requires_grad = false;
    AugmentedNodes nodes = augment_nodes(g, g.input(y), g.input(z), g.input(m), copy);
    AugmentedTriple out;
    out.angle = g.value(nodes.angle).at(0);
    out.y_g = g.value(nodes.y_g);
    out.z_g = g.value(nodes.z_g);
    out.m_g = g.value(nodes.m_g);
    return out;
}

}  // namespace adasr
