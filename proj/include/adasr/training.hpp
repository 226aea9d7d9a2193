#pragma once

// Two-stage schedule: stage 1 fits the downsamplers adversarially against
// the augmentor; stage 2 fits SpeUnet against the frozen downsamplers.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adasr/augmentor.hpp"
#include "adasr/dataio.hpp"
#include "adasr/degradation.hpp"
#include "adasr/tensor.hpp"

namespace adasr {

/// Spectral upsampler: 1x1 conv stack C_m -> 64 -> 64 -> C with
/// leaky-ReLU (slope 0.2) between layers.
struct SpeUnetParams {
    Tensor w1, b1;  // {64, C_m}, {64}
    Tensor w2, b2;  // {64, 64}, {64}
    Tensor w3, b3;  // {C, 64}, {C}

    static SpeUnetParams init(int c_m, int c, std::mt19937_64& rng);
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    int in_bands() const { return w1.dim(1); }
    int out_bands() const { return w3.dim(0); }
};

Value speunet_forward(Graph& g, Value z, SpeUnetParams& params);

/// Inference-only application (no gradient tracking).
Tensor speunet_apply(const Tensor& z, const SpeUnetParams& params);

/// Full-resolution reconstruction X_hat = SpeUnet(Z).
Tensor reconstruct(const Tensor& z, const SpeUnetParams& params);

struct TrainConfig {
    int total_steps = 40000;  // stage-1 steps
    int stage2_steps = 10000;
    double lr = 1e-4;
    double rho = -1.0;
    double alpha = 0.3;
    int k_g = 1, k_d = 1;  // alternation ratio G:D within stage 1
    double angle_range = 0.0;  // 0 selects pi/4
    std::uint64_t seed = 0;
    int log_interval = 100;

    void validate() const;
    double effective_angle_range() const;
};

/// Ablation arms.
enum class Arm {
    full,
    no_g,             // skip the G phase; angle stays 0
    no_lu2,           // stage 2 with alpha = 0
    no_g_no_lu2,
    random_rotation,  // seeded random angle each D step, G never trained
    no_augmentation,  // loss_D on original samples only, no G phase
};

Arm arm_from_string(const std::string& s);
std::string arm_to_string(Arm a);
bool arm_uses_g_phase(Arm a);
bool arm_uses_lu2(Arm a);

/// One log line. Absent losses did not apply to the phase logged.
struct LogRecord {
    int stage = 1;
    int step = 0;
    std::string phase;  // "G", "D", or "U"
    std::optional<double> loss_g, loss_d, loss_u1, loss_u2, angle;
};

struct StageReport {
    std::vector<LogRecord> records;
    double stage1_seconds = 0.0;  // not serialized into logs
    double stage2_seconds = 0.0;
    double initial_loss_u1 = 0.0;
    double final_loss_u1 = 0.0;
};

/// Scalar losses over per-element normalized L1 terms.
double loss_g(const Tensor& m_yg, const Tensor& m_zg, const Tensor& m_g, double rho);
double loss_d(const Tensor& m_y, const Tensor& m_yg, const Tensor& m_z, const Tensor& m_zg,
              const Tensor& m, const Tensor& m_g);

struct Stage1Losses {
    char phase = 'D';
    std::optional<double> loss_g, loss_d;
    double angle = 0.0;
};

/// Executes the phase that `step_index` falls on under the alternation
/// ratio. Arms without a G phase run D every step.
Stage1Losses stage1_step(const Scene& scene, Arm arm, const TrainConfig& cfg, int step_index,
                         AugmentorParams& g, SpeDnetParams& dy, SpaDnetParams& dz,
                         AdamOptimizer& opt_g, AdamOptimizer& opt_d, std::mt19937_64& rng);

struct Stage2Losses {
    double loss_u1 = 0.0;
    double loss_u2 = 0.0;  // always evaluated for monitoring; in the
                           // objective only when the arm keeps alpha > 0
    double total = 0.0;
};

/// One SpeUnet update against the frozen downsamplers. m_z must be the
/// output of the frozen SpaDnet on scene.z, computed once by the caller;
/// dy_eff is the frozen SpeDnet's effective weight matrix.
Stage2Losses stage2_step(const Scene& scene, const TrainConfig& cfg, Arm arm, const Tensor& m_z,
                         const Tensor& dy_eff, SpeUnetParams& u, AdamOptimizer& opt_u);

struct PipelineResult {
    StageReport report;
    Tensor x_hat;
    SpeDnetParams dy;
    SpaDnetParams dz;
    AugmentorParams g;
    SpeUnetParams u;
};

/// On a numeric abort the records accumulated so far are copied into
/// partial_out (when given) before the error propagates.
PipelineResult run_pipeline(const Scene& scene, const TrainConfig& cfg, Arm arm,
                            StageReport* partial_out = nullptr);

}  // namespace adasr
