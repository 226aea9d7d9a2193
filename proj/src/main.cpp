#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "adasr/cli.hpp"

namespace {

// overrides shared by the config-driven subcommands
struct Overrides {
    std::string out;
    std::string arm;
    std::optional<std::uint64_t> seed;
};

adasr::RunConfig load_with_overrides(const std::string& config_path, const Overrides& ov,
                                     bool seed_is_scene) {
    adasr::RunConfig cfg = adasr::load_run_config(config_path);
    if (!ov.out.empty()) cfg.out = ov.out;
    if (!ov.arm.empty()) cfg.arm = adasr::arm_from_string(ov.arm);
    if (ov.seed) {
        if (seed_is_scene && cfg.scene.synth)
            cfg.scene.synth->seed = *ov.seed;
        else
            cfg.train.seed = *ov.seed;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ADASR: adversarial auto-augmentation for HSI-MSI fusion"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;
    std::uint64_t seed_value = 0;

    CLI::App* synth = app.add_subcommand("synth", "synthesize a scene and write its cubes");
    synth->add_option("--config", config_path, "run config (JSON)")->required();
    synth->add_option("--out", ov.out, "output directory override");
    CLI::Option* synth_seed = synth->add_option("--seed", seed_value, "scene seed override");

    CLI::App* train = app.add_subcommand("train", "run the two-stage pipeline");
    train->add_option("--config", config_path, "run config (JSON)")->required();
    train->add_option("--out", ov.out, "output directory override");
    train->add_option("--arm", ov.arm, "ablation arm override");
    CLI::Option* train_seed = train->add_option("--seed", seed_value, "training seed override");

    CLI::App* ablate = app.add_subcommand("ablate", "run every ablation arm and tabulate");
    ablate->add_option("--config", config_path, "run config (JSON)")->required();
    ablate->add_option("--out", ov.out, "output directory override");
    CLI::Option* ablate_seed = ablate->add_option("--seed", seed_value, "training seed override");

    std::string xhat_path, x_path, eval_out = ".";
    int scale = 4;
    CLI::App* eval = app.add_subcommand("eval", "compare a reconstruction against truth");
    eval->add_option("--xhat", xhat_path, "reconstructed cube (.hsic)")->required();
    eval->add_option("--x", x_path, "ground-truth cube (.hsic)")->required();
    eval->add_option("--scale", scale, "resolution ratio r for ERGAS");
    eval->add_option("--out", eval_out, "directory for metrics.json and heatmaps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are config errors
    }

    try {
        if (*synth) {
            if (synth_seed->count()) ov.seed = seed_value;
            adasr::cmd_synth(load_with_overrides(config_path, ov, true));
            return 0;
        }
        if (*train) {
            if (train_seed->count()) ov.seed = seed_value;
            adasr::cmd_train(load_with_overrides(config_path, ov, false));
            return 0;
        }
        if (*ablate) {
            if (ablate_seed->count()) ov.seed = seed_value;
            return adasr::cmd_ablate(load_with_overrides(config_path, ov, false));
        }
        adasr::cmd_eval(xhat_path, x_path, scale, eval_out);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return adasr::exit_code_for(e);
    }
}
