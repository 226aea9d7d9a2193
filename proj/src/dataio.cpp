#include "adasr/dataio.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "adasr/errors.hpp"

namespace adasr {

Texture texture_from_string(const std::string& s) {
    if (s == "gaussian-mixture") return Texture::gaussian_mixture;
    if (s == "smooth-gradient") return Texture::smooth_gradient;
    if (s == "checker") return Texture::checker;
    throw ConfigError("unknown texture '" + s + "'");
}

std::string texture_to_string(Texture t) {
    switch (t) {
        case Texture::gaussian_mixture: return "gaussian-mixture";
        case Texture::smooth_gradient: return "smooth-gradient";
        case Texture::checker: return "checker";
    }
    throw ConfigError("unknown texture value");
}

namespace {

// One seeded spatial basis pattern over the full-resolution grid, in [0,1].
std::vector<double> spatial_pattern(std::mt19937_64& g, Texture tex, int w, int h) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> out(static_cast<std::size_t>(w) * h);
    switch (tex) {
        case Texture::gaussian_mixture: {
            const double cx = u01(g) * (w - 1);
            const double cy = u01(g) * (h - 1);
            const double sigma = (0.0625 + 0.1875 * u01(g)) * std::max(w, h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                    out[static_cast<std::size_t>(y) * w + x] = std::exp(-d2 / (2.0 * sigma * sigma));
                }
            break;
        }
        case Texture::smooth_gradient: {
            const double fx = 0.5 + 2.5 * u01(g);
            const double fy = 0.5 + 2.5 * u01(g);
            const double phase = 2.0 * std::numbers::pi * u01(g);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double arg =
                        2.0 * std::numbers::pi * (fx * x / w + fy * y / h) + phase;
                    out[static_cast<std::size_t>(y) * w + x] = 0.5 + 0.5 * std::sin(arg);
                }
            break;
        }
        case Texture::checker: {
            const int sizes[] = {4, 8, 16};
            const int block = sizes[static_cast<int>(u01(g) * 3.0) % 3];
            const int px = static_cast<int>(u01(g) * block);
            const int py = static_cast<int>(u01(g) * block);
            const double lo = 0.1 + 0.2 * u01(g);
            const double hi = 0.7 + 0.3 * u01(g);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const bool on = (((x + px) / block) + ((y + py) / block)) % 2 == 0;
                    out[static_cast<std::size_t>(y) * w + x] = on ? hi : lo;
                }
            break;
        }
    }
    return out;
}

// Strictly positive spectral signature: a low-frequency backbone plus a few
// narrow absorption dips. The dips are essential — backbone sinusoids alone
// leave the per-support spectra rank-deficient, and then the SRF weights are
// not recoverable from degraded observations.
std::vector<double> spectral_signature(std::mt19937_64& g, int c) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double f = 0.5 + 2.0 * u01(g);
    const double phase = 2.0 * std::numbers::pi * u01(g);
    std::vector<double> sig(static_cast<std::size_t>(c));
    for (int b = 0; b < c; ++b)
        sig[static_cast<std::size_t>(b)] =
            0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * f * b / c + phase);
    const int features = 2 + static_cast<int>(u01(g) * 2.0);
    for (int k = 0; k < features; ++k) {
        const double center = u01(g) * (c - 1);
        const double width = 0.8 + 1.2 * u01(g);  // in bands
        const double depth = 0.15 + 0.25 * u01(g);
        for (int b = 0; b < c; ++b) {
            const double d = (b - center) / width;
            sig[static_cast<std::size_t>(b)] *= 1.0 - depth * std::exp(-0.5 * d * d);
        }
    }
    return sig;
}

}  // namespace

Scene synth_scene(int w, int h, int c, int c_m, int r, std::uint64_t seed, Texture texture) {
    if (w <= 0 || h <= 0 || c <= 0 || c_m <= 0 || r <= 0)
        throw ConfigError("synth: extents must be positive");
    if (c_m >= c) throw ConfigError("synth: need C_m < C");
    if (w % r != 0 || h % r != 0)
        throw ConfigError("synth: W and H must be divisible by r");

    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const int components = c + 9;  // spectral rank > C_m with headroom
    Tensor raw({h, w, c});
    for (int k = 0; k < components; ++k) {
        const double amp = 0.5 + 0.5 * u01(g);
        auto spat = spatial_pattern(g, texture, w, h);
        auto sig = spectral_signature(g, c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double s = amp * spat[static_cast<std::size_t>(y) * w + x];
                for (int b = 0; b < c; ++b) raw.at(y, x, b) += s * sig[static_cast<std::size_t>(b)];
            }
    }

    // affine-map onto [0.05, 0.95]; keeps band means positive and away
    // from the clamp boundaries
    double lo = raw.at(0), hi = raw.at(0);
    for (int i = 0; i < raw.size(); ++i) {
        lo = std::min(lo, raw.at(i));
        hi = std::max(hi, raw.at(i));
    }
    const double span = hi > lo ? hi - lo : 1.0;
    Scene scene;
    scene.x = Tensor({h, w, c});
    for (int i = 0; i < raw.size(); ++i) {
        double v = 0.05 + 0.9 * (raw.at(i) - lo) / span;
        scene.x.at(i) = std::clamp(v, 0.0, 1.0);
    }

    scene.srf = SrfSpec::contiguous_partition(c, c_m);
    scene.srf.set_random_weights(g, 0.6, 1.4);
    scene.psf = PsfSpec::gaussian(r);
    scene.y = simulate_spatial_degrade(scene.x, scene.psf);
    scene.z = simulate_spectral_degrade(scene.x, scene.srf);
    scene.m = simulate_spectral_degrade(scene.y, scene.srf);
    return scene;
}

namespace {

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr std::size_t kHeaderBytes = 18;  // "HSIC" + u16 + 3 * u32

}  // namespace

void write_cube(const std::string& path, const Tensor& cube) {
    if (cube.rank() != 3) throw ShapeError("write_cube: expected a rank-3 cube");
    const int h = cube.rows(), w = cube.cols(), c = cube.bands();
    std::string buf;
    buf.reserve(kHeaderBytes + 4 * static_cast<std::size_t>(cube.size()));
    buf += "HSIC";
    put_u16(buf, 1);
    put_u32(buf, static_cast<std::uint32_t>(w));
    put_u32(buf, static_cast<std::uint32_t>(h));
    put_u32(buf, static_cast<std::uint32_t>(c));
    for (int b = 0; b < c; ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(cube.at(y, x, b)));
                put_u32(buf, bits);
            }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("write_cube: cannot open '" + path + "'");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("write_cube: short write to '" + path + "'");
}

Tensor read_cube(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_cube: cannot open '" + path + "'");
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (data.size() < kHeaderBytes) throw IoError("read_cube: truncated header in '" + path + "'");
    if (data.compare(0, 4, "HSIC") != 0) throw IoError("read_cube: bad magic in '" + path + "'");
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    const std::uint16_t version = get_u16(p + 4);
    if (version != 1)
        throw IoError("read_cube: unsupported version " + std::to_string(version));
    const std::uint32_t w = get_u32(p + 6), h = get_u32(p + 10), c = get_u32(p + 14);
    if (w == 0 || h == 0 || c == 0) throw IoError("read_cube: zero extent in '" + path + "'");
    const std::uint64_t count = static_cast<std::uint64_t>(w) * h * c;
    if (count > (1ull << 30)) throw IoError("read_cube: extent overflow in '" + path + "'");
    if (data.size() != kHeaderBytes + 4 * count)
        throw IoError("read_cube: length mismatch in '" + path + "' (expected " +
                      std::to_string(kHeaderBytes + 4 * count) + " bytes, got " +
                      std::to_string(data.size()) + ")");
    Tensor cube({static_cast<int>(h), static_cast<int>(w), static_cast<int>(c)});
    const unsigned char* q = p + kHeaderBytes;
    for (std::uint32_t b = 0; b < c; ++b)
        for (std::uint32_t y = 0; y < h; ++y)
            for (std::uint32_t x = 0; x < w; ++x) {
                const std::uint32_t bits = get_u32(q);
                q += 4;
                cube.at(static_cast<int>(y), static_cast<int>(x), static_cast<int>(b)) =
                    static_cast<double>(std::bit_cast<float>(bits));
            }
    return cube;
}

void write_heatmap(const std::string& path, const Tensor& map, std::optional<double> fixed_max) {
    if (map.rank() != 2) throw ShapeError("write_heatmap: expected a rank-2 map");
    double mx = 0.0;
    for (int i = 0; i < map.size(); ++i) {
        const double v = map.at(i);
        if (!std::isfinite(v) || v < 0.0)
            throw NumericError("write_heatmap: map values must be finite and nonnegative");
        mx = std::max(mx, v);
    }
    double scale = 1.0;
    if (fixed_max) {
        if (!(*fixed_max > 0.0)) throw ConfigError("write_heatmap: fixed max must be positive");
        scale = *fixed_max;
    } else if (mx > 0.0) {
        scale = mx;
    }
    const int h = map.shape()[0], w = map.shape()[1];
    char header[96];
    std::snprintf(header, sizeof(header), "P5\n# scale_max=%.17g\n%d %d\n255\n", scale, w, h);
    std::string buf(header);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double t = std::min(map.at(y, x) / scale, 1.0);
            buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
        }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("write_heatmap: cannot open '" + path + "'");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("write_heatmap: short write to '" + path + "'");
}

}  // namespace adasr
