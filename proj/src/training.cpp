#include "adasr/training.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "adasr/errors.hpp"
#include "adasr/metrics.hpp"

namespace adasr {

namespace {

constexpr double kLeakySlope = 0.2;
constexpr double kLogFloor = 1e-12;

Tensor uniform_init(std::mt19937_64& rng, const Shape& shape, int fan_in) {
    Tensor t(shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> d(-bound, bound);
    for (int i = 0; i < t.size(); ++i) t.at(i) = d(rng);
    t.requires_grad = true;
    return t;
}

}  // namespace

SpeUnetParams SpeUnetParams::init(int c_m, int c, std::mt19937_64& rng) {
    if (c_m <= 0 || c <= 0) throw ConfigError("speunet: band counts must be positive");
    SpeUnetParams p;
    p.w1 = uniform_init(rng, {64, c_m}, c_m);
    p.b1 = Tensor({64});
    p.w2 = uniform_init(rng, {64, 64}, 64);
    p.b2 = Tensor({64});
    p.w3 = uniform_init(rng, {c, 64}, 64);
    p.b3 = Tensor({c});
    p.b1.requires_grad = p.b2.requires_grad = p.b3.requires_grad = true;
    return p;
}

std::vector<Tensor*> SpeUnetParams::tensors() { return {&w1, &b1, &w2, &b2, &w3, &b3}; }
std::vector<const Tensor*> SpeUnetParams::tensors() const {
    return {&w1, &b1, &w2, &b2, &w3, &b3};
}

namespace {

struct UNodes {
    Value w1, b1, w2, b2, w3, b3;
};

UNodes bind_speunet(Graph& g, SpeUnetParams& u) {
    return {g.param(u.w1), g.param(u.b1), g.param(u.w2),
            g.param(u.b2), g.param(u.w3), g.param(u.b3)};
}

Value apply_speunet(Graph& g, const UNodes& n, Value z) {
    Value h = g.leaky_relu(g.linear(z, n.w1, n.b1), kLeakySlope);
    h = g.leaky_relu(g.linear(h, n.w2, n.b2), kLeakySlope);
    return g.linear(h, n.w3, n.b3);
}

}  // namespace

Value speunet_forward(Graph& g, Value z, SpeUnetParams& params) {
    return apply_speunet(g, bind_speunet(g, params), z);
}

Tensor speunet_apply(const Tensor& z, const SpeUnetParams& params) {
    Graph g;
    SpeUnetParams copy = params;
    for (Tensor* t : copy.tensors()) t->requires_grad = false;
    return g.value(speunet_forward(g, g.input(z), copy));
}

Tensor reconstruct(const Tensor& z, const SpeUnetParams& params) {
    if (z.rank() != 3) throw ShapeError("reconstruct: expected a rank-3 cube");
    if (z.bands() != params.in_bands())
        throw ShapeError("reconstruct: cube has " + std::to_string(z.bands()) +
                         " bands, SpeUnet expects " + std::to_string(params.in_bands()));
    return speunet_apply(z, params);
}

void TrainConfig::validate() const {
    if (total_steps < 1 || stage2_steps < 1) throw ConfigError("config: step counts must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("config: lr must be positive");
    if (!(alpha >= 0.0)) throw ConfigError("config: alpha must be nonnegative");
    if (k_g < 1 || k_d < 1) throw ConfigError("config: alternation ratio parts must be >= 1");
    if (log_interval < 1) throw ConfigError("config: log_interval must be >= 1");
    if (angle_range < 0.0) throw ConfigError("config: angle_range must be nonnegative");
}

double TrainConfig::effective_angle_range() const {
    return angle_range > 0.0 ? angle_range : std::numbers::pi / 4;
}

Arm arm_from_string(const std::string& s) {
    if (s == "full") return Arm::full;
    if (s == "no-g") return Arm::no_g;
    if (s == "no-lu2") return Arm::no_lu2;
    if (s == "no-g-no-lu2") return Arm::no_g_no_lu2;
    if (s == "random-rotation") return Arm::random_rotation;
    if (s == "no-augmentation") return Arm::no_augmentation;
    throw ConfigError("unknown arm '" + s + "'");
}

std::string arm_to_string(Arm a) {
    switch (a) {
        case Arm::full: return "full";
        case Arm::no_g: return "no-g";
        case Arm::no_lu2: return "no-lu2";
        case Arm::no_g_no_lu2: return "no-g-no-lu2";
        case Arm::random_rotation: return "random-rotation";
        case Arm::no_augmentation: return "no-augmentation";
    }
    throw ConfigError("unknown arm value");
}

bool arm_uses_g_phase(Arm a) { return a == Arm::full || a == Arm::no_lu2; }

bool arm_uses_lu2(Arm a) {
    return a == Arm::full || a == Arm::no_g || a == Arm::random_rotation ||
           a == Arm::no_augmentation;
}

namespace {

double l1_mean_value(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("l1: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double acc = 0.0;
    for (int i = 0; i < a.size(); ++i) acc += std::abs(a.at(i) - b.at(i));
    return acc / static_cast<double>(a.size());
}

}  // namespace

double loss_g(const Tensor& m_yg, const Tensor& m_zg, const Tensor& m_g, double rho) {
    const double a = std::max(l1_mean_value(m_yg, m_g), kLogFloor);
    const double b = std::max(l1_mean_value(m_zg, m_g), kLogFloor);
    return rho * std::log(a) + rho * std::log(b);
}

double loss_d(const Tensor& m_y, const Tensor& m_yg, const Tensor& m_z, const Tensor& m_zg,
              const Tensor& m, const Tensor& m_g) {
    return l1_mean_value(m_y, m) + l1_mean_value(m_yg, m_g) + l1_mean_value(m_z, m) +
           l1_mean_value(m_zg, m_g);
}

namespace {

// rho * log(clamp(l1_mean(a, b))) as graph nodes
Value log_l1_term(Graph& g, Value a, Value b, double rho) {
    return g.scalar_mul(g.log(g.clamp_min(g.l1_mean(a, b), kLogFloor)), rho);
}

// rotation of the (y, z, m) triple by a fixed angle, no gradients
AugmentedTriple rotate_triple(const Tensor& y, const Tensor& z, const Tensor& m, double angle) {
    Graph g;
    Tensor a({1}, {angle});
    Value av = g.input(a);
    AugmentedTriple t;
    t.angle = angle;
    t.y_g = g.value(g.rotate_bilinear(g.input(y), av));
    t.z_g = g.value(g.rotate_bilinear(g.input(z), av));
    t.m_g = g.value(g.rotate_bilinear(g.input(m), av));
    return t;
}

void check_finite_loss(double v, const char* stage, int step) {
    if (!std::isfinite(v))
        throw NumericError(std::string(stage) + " aborted at step " + std::to_string(step) +
                           ": non-finite loss");
}

}  // namespace

Stage1Losses stage1_step(const Scene& scene, Arm arm, const TrainConfig& cfg, int step_index,
                         AugmentorParams& pg, SpeDnetParams& dy, SpaDnetParams& dz,
                         AdamOptimizer& opt_g, AdamOptimizer& opt_d, std::mt19937_64& rng) {
    const auto& supports = scene.srf.supports;
    const bool g_turn =
        arm_uses_g_phase(arm) && (step_index % (cfg.k_g + cfg.k_d)) < cfg.k_g;

    Stage1Losses out;
    if (g_turn) {
        // G phase: downsamplers enter as fixed effective tensors, so their
        // raw buffers cannot change or receive gradients.
        Graph g;
        AugmentedNodes an = augment_nodes(g, g.input(scene.y), g.input(scene.z),
                                          g.input(scene.m), pg);
        Value w_eff = g.input(dy.effective_weights());
        Value k_eff = g.input(dz.effective_kernel());
        Value m_yg = g.conv_spectral_1x1(an.y_g, w_eff, supports);
        Value m_zg = g.conv_spatial_depthwise(an.z_g, k_eff, dz.scale);
        Value lg = g.add(log_l1_term(g, m_yg, an.m_g, cfg.rho),
                         log_l1_term(g, m_zg, an.m_g, cfg.rho));
        const double lg_v = g.scalar(lg);
        check_finite_loss(lg_v, "stage 1 (G)", step_index);
        g.backward(lg);
        opt_g.step();
        opt_g.zero_grad();
        out.phase = 'G';
        out.loss_g = lg_v;
        out.angle = g.value(an.angle).at(0);
        return out;
    }

    // D phase: G is evaluated outside the graph (frozen); downsampler raw
    // buffers are the only parameters.
    std::optional<AugmentedTriple> aug;
    switch (arm) {
        case Arm::full:
        case Arm::no_lu2:
            aug = augment(scene.y, scene.z, scene.m, pg);
            break;
        case Arm::random_rotation: {
            std::uniform_real_distribution<double> d(-cfg.effective_angle_range(),
                                                     cfg.effective_angle_range());
            aug = rotate_triple(scene.y, scene.z, scene.m, d(rng));
            break;
        }
        case Arm::no_g:
        case Arm::no_g_no_lu2:
            // angle 0: the augmented sample is bit-identical to the original
            break;
        case Arm::no_augmentation:
            break;
    }

    Graph g;
    Value w = g.softplus(g.param(dy.raw_weights));
    Value k = g.softmax(g.param(dz.raw_kernel));
    Value m_in = g.input(scene.m);
    Value m_y = g.conv_spectral_1x1(g.input(scene.y), w, supports);
    Value m_z = g.conv_spatial_depthwise(g.input(scene.z), k, dz.scale);
    Value ld = g.add(g.l1_mean(m_y, m_in), g.l1_mean(m_z, m_in));
    if (aug) {
        Value m_g_in = g.input(aug->m_g);
        Value m_yg = g.conv_spectral_1x1(g.input(aug->y_g), w, supports);
        Value m_zg = g.conv_spatial_depthwise(g.input(aug->z_g), k, dz.scale);
        ld = g.add(ld, g.add(g.l1_mean(m_yg, m_g_in), g.l1_mean(m_zg, m_g_in)));
        out.angle = aug->angle;
    } else if (arm == Arm::no_g || arm == Arm::no_g_no_lu2) {
        // augmented terms replicate the original ones exactly
        ld = g.scalar_mul(ld, 2.0);
    }
    const double ld_v = g.scalar(ld);
    check_finite_loss(ld_v, "stage 1 (D)", step_index);
    g.backward(ld);
    opt_d.step();
    opt_d.zero_grad();
    out.phase = 'D';
    out.loss_d = ld_v;
    return out;
}

Stage2Losses stage2_step(const Scene& scene, const TrainConfig& cfg, Arm arm, const Tensor& m_z,
                         const Tensor& dy_eff, SpeUnetParams& u, AdamOptimizer& opt_u) {
    const double alpha = arm_uses_lu2(arm) ? cfg.alpha : 0.0;

    Graph g;
    UNodes un = bind_speunet(g, u);
    Value y_hat = apply_speunet(g, un, g.input(m_z));
    Value lu1 = g.l1_mean(y_hat, g.input(scene.y));

    // L_U2 is always evaluated so logs can monitor it; it only joins the
    // objective when alpha > 0. Backward over the spare subgraph adds
    // exact zeros, so the optimizer trajectory is unaffected bitwise.
    Value x_up = apply_speunet(g, un, g.input(scene.z));
    Value z_hat = g.conv_spectral_1x1(x_up, g.input(dy_eff), scene.srf.supports);
    Value lu2 = g.l1_mean(z_hat, g.input(scene.z));

    Stage2Losses out;
    Value total = alpha > 0.0 ? g.add(lu1, g.scalar_mul(lu2, alpha)) : lu1;
    out.loss_u2 = g.scalar(lu2);
    out.loss_u1 = g.scalar(lu1);
    out.total = g.scalar(total);
    g.backward(total);
    opt_u.step();
    opt_u.zero_grad();
    return out;
}

PipelineResult run_pipeline(const Scene& scene, const TrainConfig& cfg, Arm arm,
                            StageReport* partial_out) {
    cfg.validate();
    scene.srf.validate();
    scene.psf.validate();

    std::mt19937_64 rng(cfg.seed);
    const int c = scene.y.bands();  // x may be absent for cube-sourced scenes
    const int c_m = scene.srf.msi_band_count;

    AugmentorParams pg = AugmentorParams::init(c, cfg.effective_angle_range(), rng);
    SpeDnetParams dy = SpeDnetParams::init(c_m, c);
    SpaDnetParams dz = SpaDnetParams::init(scene.psf.scale);
    SpeUnetParams u = SpeUnetParams::init(c_m, c, rng);

    AdamOptimizer opt_g(pg.tensors(), cfg.lr);
    AdamOptimizer opt_d({&dy.raw_weights, &dz.raw_kernel}, cfg.lr);
    AdamOptimizer opt_u(u.tensors(), cfg.lr);

    StageReport report;
    try {
        const auto t0 = std::chrono::steady_clock::now();
        for (int s = 0; s < cfg.total_steps; ++s) {
            Stage1Losses l = stage1_step(scene, arm, cfg, s, pg, dy, dz, opt_g, opt_d, rng);
            if (s % cfg.log_interval == 0 || s == cfg.total_steps - 1) {
                LogRecord rec;
                rec.stage = 1;
                rec.step = s;
                rec.phase = std::string(1, l.phase);
                rec.loss_g = l.loss_g;
                rec.loss_d = l.loss_d;
                rec.angle = l.angle;
                report.records.push_back(std::move(rec));
            }
        }
        const auto t1 = std::chrono::steady_clock::now();
        report.stage1_seconds = std::chrono::duration<double>(t1 - t0).count();

        // freeze the downsamplers; derive their effective operators once
        Tensor dy_eff = dy.effective_weights();
        PsfSpec frozen_psf;
        frozen_psf.scale = dz.scale;
        frozen_psf.kernel = dz.effective_kernel();
        Tensor m_z = simulate_spatial_degrade(scene.z, frozen_psf);

        for (int s = 0; s < cfg.stage2_steps; ++s) {
            Stage2Losses l = stage2_step(scene, cfg, arm, m_z, dy_eff, u, opt_u);
            check_finite_loss(l.total, "stage 2", s);
            if (s == 0) report.initial_loss_u1 = l.loss_u1;
            report.final_loss_u1 = l.loss_u1;
            if (s % cfg.log_interval == 0 || s == cfg.stage2_steps - 1) {
                LogRecord rec;
                rec.stage = 2;
                rec.step = s;
                rec.phase = "U";
                rec.loss_u1 = l.loss_u1;
                rec.loss_u2 = l.loss_u2;
                report.records.push_back(std::move(rec));
            }
        }
        const auto t2 = std::chrono::steady_clock::now();
        report.stage2_seconds = std::chrono::duration<double>(t2 - t1).count();
    } catch (const NumericError&) {
        if (partial_out) *partial_out = report;  // records gathered before the abort
        throw;
    }

    PipelineResult result;
    result.x_hat = reconstruct(scene.z, u);
    result.report = std::move(report);
    result.dy = std::move(dy);
    result.dz = std::move(dz);
    result.g = std::move(pg);
    result.u = std::move(u);
    return result;
}

}  // namespace adasr
