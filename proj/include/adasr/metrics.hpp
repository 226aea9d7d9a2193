#pragma once

// Fusion quality metrics and per-pixel error maps.

#include <utility>

#include "adasr/tensor.hpp"

namespace adasr {

struct MetricReport {
    double sam = 0.0;    // degrees
    double ergas = 0.0;
    double psnr = 0.0;   // dB
    double rmse = 0.0;
    double cc = 0.0;
    int scale = 1;       // r used by ERGAS
};

/// Mean per-pixel spectral angle in degrees. Pixels where either spectral
/// norm is below 1e-12 are skipped; throws if every pixel is degenerate.
double sam(const Tensor& xhat, const Tensor& x);

/// Global root-mean-square error over all elements.
double rmse(const Tensor& xhat, const Tensor& x);

/// 20*log10(peak/rmse), clamped to 100 dB when rmse < 1e-10.
double psnr(const Tensor& xhat, const Tensor& x, double peak = 1.0);

/// 100/r * sqrt(mean over bands of (RMSE_c / mu_c)^2), mu_c from x.
double ergas(const Tensor& xhat, const Tensor& x, int r);

/// Mean over bands of the Pearson correlation between band images.
double cc(const Tensor& xhat, const Tensor& x);

/// Per-pixel mean absolute error over bands, and per-pixel spectral angle
/// in degrees (degenerate pixels map to 0).
std::pair<Tensor, Tensor> error_maps(const Tensor& xhat, const Tensor& x);

MetricReport evaluate(const Tensor& xhat, const Tensor& x, int r);

}  // namespace adasr
