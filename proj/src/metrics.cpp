#include "adasr/metrics.hpp"

#include <cmath>
#include <numbers>

#include "adasr/errors.hpp"

namespace adasr {

namespace {

void require_same_cubes(const Tensor& a, const Tensor& b, const char* who) {
    if (a.rank() != 3 || b.rank() != 3)
        throw ShapeError(std::string(who) + ": expected rank-3 cubes");
    if (a.shape() != b.shape())
        throw ShapeError(std::string(who) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

double pixel_angle_deg(const Tensor& a, const Tensor& b, int y, int x, bool& ok) {
    double na = 0.0, nb = 0.0;
    for (int c = 0; c < a.bands(); ++c) {
        const double va = a.at(y, x, c), vb = b.at(y, x, c);
        na += va * va;
        nb += vb * vb;
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < 1e-12 || nb < 1e-12) {
        ok = false;
        return 0.0;
    }
    ok = true;
    // angle via 2*atan2(|u-v|, |u+v|) on unit vectors: well conditioned at
    // both 0 and 180 degrees, and exactly 0 for proportional inputs
    double diff = 0.0, sum = 0.0;
    for (int c = 0; c < a.bands(); ++c) {
        const double ua = a.at(y, x, c) / na, ub = b.at(y, x, c) / nb;
        diff += (ua - ub) * (ua - ub);
        sum += (ua + ub) * (ua + ub);
    }
    const double rad = 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
    return rad * 180.0 / std::numbers::pi;
}

}  // namespace

double sam(const Tensor& xhat, const Tensor& x) {
    require_same_cubes(xhat, x, "sam");
    double total = 0.0;
    int counted = 0;
    for (int y = 0; y < x.rows(); ++y)
        for (int xx = 0; xx < x.cols(); ++xx) {
            bool ok = false;
            const double a = pixel_angle_deg(xhat, x, y, xx, ok);
            if (ok) {
                total += a;
                ++counted;
            }
        }
    if (counted == 0) throw NumericError("sam: all pixels degenerate");
    return total / counted;
}

double rmse(const Tensor& xhat, const Tensor& x) {
    require_same_cubes(xhat, x, "rmse");
    double acc = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        const double d = xhat.at(i) - x.at(i);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(x.size()));
}

double psnr(const Tensor& xhat, const Tensor& x, double peak) {
    const double e = rmse(xhat, x);
    if (e < 1e-10) return 100.0;
    return 20.0 * std::log10(peak / e);
}

double ergas(const Tensor& xhat, const Tensor& x, int r) {
    require_same_cubes(xhat, x, "ergas");
    if (r <= 0) throw ConfigError("ergas: scale must be positive");
    const int n = x.rows() * x.cols();
    double acc = 0.0;
    for (int c = 0; c < x.bands(); ++c) {
        double mu = 0.0, sq = 0.0;
        for (int y = 0; y < x.rows(); ++y)
            for (int xx = 0; xx < x.cols(); ++xx) {
                mu += x.at(y, xx, c);
                const double d = xhat.at(y, xx, c) - x.at(y, xx, c);
                sq += d * d;
            }
        mu /= n;
        if (std::abs(mu) <= 1e-12)
            throw NumericError("ergas: band " + std::to_string(c) + " has (near-)zero mean");
        const double band_rmse = std::sqrt(sq / n);
        acc += (band_rmse / mu) * (band_rmse / mu);
    }
    return 100.0 / r * std::sqrt(acc / x.bands());
}

double cc(const Tensor& xhat, const Tensor& x) {
    require_same_cubes(xhat, x, "cc");
    const int n = x.rows() * x.cols();
    double total = 0.0;
    for (int c = 0; c < x.bands(); ++c) {
        double ma = 0.0, mb = 0.0;
        for (int y = 0; y < x.rows(); ++y)
            for (int xx = 0; xx < x.cols(); ++xx) {
                ma += xhat.at(y, xx, c);
                mb += x.at(y, xx, c);
            }
        ma /= n;
        mb /= n;
        double cov = 0.0, va = 0.0, vb = 0.0;
        for (int y = 0; y < x.rows(); ++y)
            for (int xx = 0; xx < x.cols(); ++xx) {
                const double da = xhat.at(y, xx, c) - ma;
                const double db = x.at(y, xx, c) - mb;
                cov += da * db;
                va += da * da;
                vb += db * db;
            }
        if (va / n <= 1e-12 || vb / n <= 1e-12)
            throw NumericError("cc: band " + std::to_string(c) + " is (near-)constant");
        total += cov / std::sqrt(va * vb);
    }
    return total / x.bands();
}

std::pair<Tensor, Tensor> error_maps(const Tensor& xhat, const Tensor& x) {
    require_same_cubes(xhat, x, "error_maps");
    Tensor mae({x.rows(), x.cols()});
    Tensor ang({x.rows(), x.cols()});
    for (int y = 0; y < x.rows(); ++y)
        for (int xx = 0; xx < x.cols(); ++xx) {
            double acc = 0.0;
            for (int c = 0; c < x.bands(); ++c) acc += std::abs(xhat.at(y, xx, c) - x.at(y, xx, c));
            mae.at(y, xx) = acc / x.bands();
            bool ok = false;
            ang.at(y, xx) = pixel_angle_deg(xhat, x, y, xx, ok);
        }
    return {std::move(mae), std::move(ang)};
}

MetricReport evaluate(const Tensor& xhat, const Tensor& x, int r) {
    MetricReport rep;
    rep.sam = sam(xhat, x);
    rep.ergas = ergas(xhat, x, r);
    rep.rmse = rmse(xhat, x);
    rep.psnr = psnr(xhat, x);
    rep.cc = cc(xhat, x);
    rep.scale = r;
    return rep;
}

}  // namespace adasr
