#pragma once

// Sensor models: the fixed simulators that generate ground-truth degraded
// cubes, and the learnable SpeDnet / SpaDnet parameterizations that are
// fit against them.

#include <random>

#include "adasr/tensor.hpp"

namespace adasr {

/// Spectral response: which HSI bands feed each MSI band, and with what
/// nonnegative weight. Supports may overlap; each set must be nonempty
/// with a strictly positive weight sum.
struct SrfSpec {
    int band_count = 0;      // C
    int msi_band_count = 0;  // C_m
    SupportSets supports;    // one index set per MSI band
    Tensor weights;          // {C_m, C}; entries outside the supports are ignored

    void validate() const;

    /// Equal contiguous partition of C bands into C_m groups, unit weights.
    static SrfSpec contiguous_partition(int c, int c_m);

    /// Replaces in-support weights with uniform draws from [lo, hi].
    void set_random_weights(std::mt19937_64& rng, double lo, double hi);
};

/// Point spread function: an r x r kernel summing to 1, applied with
/// stride r per band.
struct PsfSpec {
    int scale = 0;  // r
    Tensor kernel;  // {r, r}

    void validate() const;

    /// Truncated Gaussian normalized to sum 1. sigma <= 0 selects r/2.
    static PsfSpec gaussian(int r, double sigma = 0.0);
};

/// Ground-truth spatial degradation Y = PX: per-band stride-r correlation.
Tensor simulate_spatial_degrade(const Tensor& x, const PsfSpec& psf);

/// Ground-truth spectral degradation Z = XS: per-pixel normalized weighted
/// average over each support set.
Tensor simulate_spectral_degrade(const Tensor& x, const SrfSpec& srf);

/// Learnable spectral downsampler. Raw weights are unconstrained; the
/// effective weights are softplus(raw) > 0.
struct SpeDnetParams {
    Tensor raw_weights;  // {C_m, C}

    static SpeDnetParams init(int c_m, int c);
    /// Raw weights chosen so softplus(raw) reproduces srf.weights inside
    /// the supports. Entries outside any support are left at zero.
    static SpeDnetParams from_effective(const SrfSpec& srf);

    Tensor effective_weights() const;
};

/// Learnable spatial downsampler. Raw kernel is unconstrained; the
/// effective kernel is softmax over all r*r entries.
struct SpaDnetParams {
    int scale = 0;
    Tensor raw_kernel;  // {r, r}

    static SpaDnetParams init(int r);
    /// Raw kernel log(k) so softmax reproduces psf.kernel (which sums to 1).
    static SpaDnetParams from_effective(const PsfSpec& psf);

    Tensor effective_kernel() const;
};

/// Differentiable SpeDnet forward: softplus(raw) feeding conv_spectral_1x1.
Value spednet_forward(Graph& g, Value y, SpeDnetParams& params, const SupportSets& supports);

/// Differentiable SpaDnet forward: softmax(raw) feeding the depthwise
/// stride-r correlation.
Value spadnet_forward(Graph& g, Value z, SpaDnetParams& params);

}  // namespace adasr
