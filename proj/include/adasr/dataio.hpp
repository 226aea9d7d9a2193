#pragma once

// Scene synthesis, the .hsic cube container, and P5 heatmap emission.

#include <cstdint>
#include <optional>
#include <string>

#include "adasr/degradation.hpp"
#include "adasr/tensor.hpp"

namespace adasr {

enum class Texture { gaussian_mixture, smooth_gradient, checker };

Texture texture_from_string(const std::string& s);
std::string texture_to_string(Texture t);

/// One synthetic fusion problem: ground truth X in [0,1] plus the degraded
/// observations and the true sensor models that produced them.
struct Scene {
    Tensor x;  // {H, W, C}
    Tensor y;  // {H/r, W/r, C}
    Tensor z;  // {H, W, C_m}
    Tensor m;  // {H/r, W/r, C_m}
    SrfSpec srf;
    PsfSpec psf;
};

/// Deterministic scene built from seeded spatial patterns times smooth
/// spectral signatures. The SRF weights are drawn from [0.6, 1.4] and the
/// PSF is the default truncated Gaussian, so recovery targets are known.
Scene synth_scene(int w, int h, int c, int c_m, int r, std::uint64_t seed, Texture texture);

/// .hsic container: "HSIC", version u16=1, then W, H, C as u32, all
/// little-endian, then W*H*C float32 values band-major, row, column.
/// Total length is exactly 18 + 4*W*H*C bytes.
Tensor read_cube(const std::string& path);
void write_cube(const std::string& path, const Tensor& cube);

/// 8-bit P5 graymap. Values map linearly onto [0,255] using fixed_max when
/// given (saturating above it) or the map maximum otherwise; the divisor is
/// recorded in a "# scale_max=..." header comment.
void write_heatmap(const std::string& path, const Tensor& map,
                   std::optional<double> fixed_max = std::nullopt);

}  // namespace adasr
