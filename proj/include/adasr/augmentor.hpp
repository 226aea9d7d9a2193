#pragma once

// Sample-aware augmentor G: per-pixel features from Y, one pooled rotation
// angle, and the coupled rotation of the (Y, Z, M) triple.

#include <random>
#include <vector>

#include "adasr/tensor.hpp"

namespace adasr {

/// Feature extractor (two 1x1 conv layers C->16->16, leaky-ReLU 0.2) and
/// angle head (MLP 16->8->1, tanh scaled to [-angle_range, angle_range]).
/// The final layer starts at zero so the initial angle is exactly 0.
struct AugmentorParams {
    Tensor w1, b1;  // {16, C}, {16}
    Tensor w2, b2;  // {16, 16}, {16}
    Tensor w3, b3;  // {8, 16}, {8}
    Tensor w4, b4;  // {1, 8}, {1}
    double angle_range = 0.0;

    static AugmentorParams init(int c, double angle_range, std::mt19937_64& rng);

    /// Leaf tensors in a fixed order, for optimizers and freeze checks.
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
};

/// All outputs of one augmentation pass built inside a graph.
struct AugmentedNodes {
    Value angle;  // {1}
    Value y_g, z_g, m_g;
};

/// Plain-value result of augmenting one triple.
struct AugmentedTriple {
    Tensor y_g, z_g, m_g;
    double angle = 0.0;
};

/// Builds the angle prediction subgraph on y; params become graph leaves.
Value predict_angle_node(Graph& g, Value y, AugmentorParams& params);

/// Rotates y, z, and m by the single predicted angle inside the graph, so
/// gradients flow from all three outputs back into params.
AugmentedNodes augment_nodes(Graph& g, Value y, Value z, Value m, AugmentorParams& params);

/// Convenience forward passes without gradient tracking.
double predict_angle(const Tensor& y, const AugmentorParams& params);
AugmentedTriple augment(const Tensor& y, const Tensor& z, const Tensor& m,
                        const AugmentorParams& params);

}  // namespace adasr
