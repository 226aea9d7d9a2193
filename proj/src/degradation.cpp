#include "adasr/degradation.hpp"

#include <cmath>

#include "adasr/errors.hpp"

namespace adasr {

void SrfSpec::validate() const {
    if (band_count <= 0 || msi_band_count <= 0)
        throw ConfigError("srf: band counts must be positive");
    if (static_cast<int>(supports.size()) != msi_band_count)
        throw ConfigError("srf: expected " + std::to_string(msi_band_count) + " support sets, got " +
                          std::to_string(supports.size()));
    if (weights.shape() != Shape{msi_band_count, band_count})
        throw ConfigError("srf: weights must be {C_m, C}, got " + shape_str(weights.shape()));
    for (int j = 0; j < msi_band_count; ++j) {
        const auto& set = supports[static_cast<std::size_t>(j)];
        if (set.empty()) throw ConfigError("srf: support set " + std::to_string(j) + " is empty");
        double sum = 0.0;
        for (int t : set) {
            if (t < 0 || t >= band_count)
                throw ConfigError("srf: band index " + std::to_string(t) + " out of range in set " +
                                  std::to_string(j));
            const double w = weights.at(j, t);
            if (!(w >= 0.0))
                throw ConfigError("srf: negative weight in set " + std::to_string(j));
            sum += w;
        }
        if (!(sum > 0.0))
            throw ConfigError("srf: weight sum of set " + std::to_string(j) + " is not positive");
    }
}

SrfSpec SrfSpec::contiguous_partition(int c, int c_m) {
    if (c_m <= 0 || c < c_m)
        throw ConfigError("srf: need 0 < C_m <= C for a partition");
    SrfSpec s;
    s.band_count = c;
    s.msi_band_count = c_m;
    s.weights = Tensor({c_m, c});
    const int base = c / c_m;
    const int extra = c % c_m;  // first `extra` groups get one more band
    int t = 0;
    for (int j = 0; j < c_m; ++j) {
        const int len = base + (j < extra ? 1 : 0);
        std::vector<int> set;
        for (int k = 0; k < len; ++k) {
            s.weights.at(j, t) = 1.0;
            set.push_back(t++);
        }
        s.supports.push_back(std::move(set));
    }
    return s;
}

void SrfSpec::set_random_weights(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    for (int j = 0; j < msi_band_count; ++j)
        for (int t : supports[static_cast<std::size_t>(j)]) weights.at(j, t) = d(rng);
}

void PsfSpec::validate() const {
    if (scale <= 0) throw ConfigError("psf: scale must be positive");
    if (kernel.shape() != Shape{scale, scale})
        throw ConfigError("psf: kernel must be {r, r}, got " + shape_str(kernel.shape()));
    double sum = 0.0;
    for (int i = 0; i < static_cast<int>(kernel.size()); ++i) {
        if (!(kernel.at(i) >= 0.0)) throw ConfigError("psf: negative kernel entry");
        sum += kernel.at(i);
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw ConfigError("psf: kernel must sum to 1, got " + std::to_string(sum));
}

PsfSpec PsfSpec::gaussian(int r, double sigma) {
    if (r <= 0) throw ConfigError("psf: scale must be positive");
    if (sigma <= 0.0) sigma = r / 2.0;
    PsfSpec p;
    p.scale = r;
    p.kernel = Tensor({r, r});
    const double c = (r - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
            const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
            const double v = std::exp(-d2 / (2.0 * sigma * sigma));
            p.kernel.at(i, j) = v;
            sum += v;
        }
    }
    for (int i = 0; i < r * r; ++i) p.kernel.at(i) /= sum;
    return p;
}

Tensor simulate_spatial_degrade(const Tensor& x, const PsfSpec& psf) {
    psf.validate();
    if (x.rank() != 3) throw ShapeError("spatial degrade: expected a rank-3 cube");
    const int r = psf.scale;
    if (x.rows() % r != 0 || x.cols() % r != 0)
        throw ShapeError("spatial degrade: extents " + shape_str(x.shape()) +
                         " not divisible by scale " + std::to_string(r));
    const int oh = x.rows() / r, ow = x.cols() / r, c = x.bands();
    Tensor out({oh, ow, c});
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int b = 0; b < c; ++b) {
                double acc = 0.0;
                for (int ky = 0; ky < r; ++ky)
                    for (int kx = 0; kx < r; ++kx)
                        acc += psf.kernel.at(ky, kx) * x.at(oy * r + ky, ox * r + kx, b);
                out.at(oy, ox, b) = acc;
            }
    return out;
}

Tensor simulate_spectral_degrade(const Tensor& x, const SrfSpec& srf) {
    srf.validate();
    if (x.rank() != 3) throw ShapeError("spectral degrade: expected a rank-3 cube");
    if (x.bands() != srf.band_count)
        throw ShapeError("spectral degrade: cube has " + std::to_string(x.bands()) +
                         " bands, srf expects " + std::to_string(srf.band_count));
    const int h = x.rows(), w = x.cols(), cm = srf.msi_band_count;
    Tensor out({h, w, cm});
    for (int j = 0; j < cm; ++j) {
        const auto& set = srf.supports[static_cast<std::size_t>(j)];
        double wsum = 0.0;
        for (int t : set) wsum += srf.weights.at(j, t);
        for (int y = 0; y < h; ++y)
            for (int xq = 0; xq < w; ++xq) {
                double acc = 0.0;
                for (int t : set) acc += srf.weights.at(j, t) * x.at(y, xq, t);
                out.at(y, xq, j) = acc / wsum;
            }
    }
    return out;
}

SpeDnetParams SpeDnetParams::init(int c_m, int c) {
    if (c_m <= 0 || c <= 0) throw ConfigError("spednet: band counts must be positive");
    SpeDnetParams p;
    p.raw_weights = Tensor({c_m, c});  // softplus(0) = log 2 everywhere
    p.raw_weights.requires_grad = true;
    return p;
}

SpeDnetParams SpeDnetParams::from_effective(const SrfSpec& srf) {
    srf.validate();
    SpeDnetParams p;
    p.raw_weights = Tensor({srf.msi_band_count, srf.band_count});
    for (int j = 0; j < srf.msi_band_count; ++j)
        for (int t : srf.supports[static_cast<std::size_t>(j)]) {
            const double w = srf.weights.at(j, t);
            if (!(w > 0.0))
                throw ConfigError("spednet: softplus cannot reach nonpositive weight");
            p.raw_weights.at(j, t) = softplus_inverse(w);
        }
    p.raw_weights.requires_grad = true;
    return p;
}

Tensor SpeDnetParams::effective_weights() const {
    Tensor out(raw_weights.shape());
    for (int i = 0; i < static_cast<int>(raw_weights.size()); ++i)
        out.at(i) = softplus_scalar(raw_weights.at(i));
    return out;
}

SpaDnetParams SpaDnetParams::init(int r) {
    if (r <= 0) throw ConfigError("spadnet: scale must be positive");
    SpaDnetParams p;
    p.scale = r;
    p.raw_kernel = Tensor({r, r});  // softmax(0) = uniform 1/r^2
    p.raw_kernel.requires_grad = true;
    return p;
}

SpaDnetParams SpaDnetParams::from_effective(const PsfSpec& psf) {
    psf.validate();
    SpaDnetParams p;
    p.scale = psf.scale;
    p.raw_kernel = Tensor({psf.scale, psf.scale});
    for (int i = 0; i < psf.scale * psf.scale; ++i) {
        const double k = psf.kernel.at(i);
        if (!(k > 0.0))
            throw ConfigError("spadnet: softmax cannot reach a zero kernel entry");
        p.raw_kernel.at(i) = std::log(k);
    }
    p.raw_kernel.requires_grad = true;
    return p;
}

Tensor SpaDnetParams::effective_kernel() const {
    Tensor out(raw_kernel.shape());
    softmax_flat(raw_kernel.values(), out.values());
    return out;
}

Value spednet_forward(Graph& g, Value y, SpeDnetParams& params, const SupportSets& supports) {
    Value w = g.softplus(g.param(params.raw_weights));
    return g.conv_spectral_1x1(y, w, supports);
}

Value spadnet_forward(Graph& g, Value z, SpaDnetParams& params) {
    Value k = g.softmax(g.param(params.raw_kernel));
    return g.conv_spatial_depthwise(z, k, params.scale);
}

}  // namespace adasr
