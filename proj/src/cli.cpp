#include "adasr/cli.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "json.hpp"

namespace adasr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + path + "'");
}

json tensor_to_json(const Tensor& t) {
    json j;
    j["shape"] = t.shape();
    j["values"] = t.values();
    return j;
}

json metrics_to_json(const MetricReport& m) {
    json j;
    j["sam"] = m.sam;
    j["ergas"] = m.ergas;
    j["psnr"] = m.psnr;
    j["rmse"] = m.rmse;
    j["cc"] = m.cc;
    j["scale"] = m.scale;
    return j;
}

std::string record_line(const LogRecord& r) {
    json j;
    j["stage"] = r.stage;
    j["step"] = r.step;
    j["phase"] = r.phase;
    if (r.loss_g) j["loss_g"] = *r.loss_g;
    if (r.loss_d) j["loss_d"] = *r.loss_d;
    if (r.loss_u1) j["loss_u1"] = *r.loss_u1;
    if (r.loss_u2) j["loss_u2"] = *r.loss_u2;
    if (r.angle) j["angle"] = *r.angle;
    return j.dump();
}

void write_log(const std::string& path, const std::vector<LogRecord>& records) {
    std::string text;
    for (const LogRecord& r : records) {
        text += record_line(r);
        text += '\n';
    }
    write_text(path, text);
}

json params_to_json(const PipelineResult& r) {
    json j;
    json spednet;
    spednet["raw_weights"] = tensor_to_json(r.dy.raw_weights);
    spednet["effective_weights"] = tensor_to_json(r.dy.effective_weights());
    j["spednet"] = std::move(spednet);
    json spadnet;
    spadnet["scale"] = r.dz.scale;
    spadnet["raw_kernel"] = tensor_to_json(r.dz.raw_kernel);
    spadnet["kernel"] = tensor_to_json(r.dz.effective_kernel());
    j["spadnet"] = std::move(spadnet);
    json aug;
    aug["angle_range"] = r.g.angle_range;
    aug["w1"] = tensor_to_json(r.g.w1);
    aug["b1"] = tensor_to_json(r.g.b1);
    aug["w2"] = tensor_to_json(r.g.w2);
    aug["b2"] = tensor_to_json(r.g.b2);
    aug["w3"] = tensor_to_json(r.g.w3);
    aug["b3"] = tensor_to_json(r.g.b3);
    aug["w4"] = tensor_to_json(r.g.w4);
    aug["b4"] = tensor_to_json(r.g.b4);
    j["augmentor"] = std::move(aug);
    json unet;
    unet["w1"] = tensor_to_json(r.u.w1);
    unet["b1"] = tensor_to_json(r.u.b1);
    unet["w2"] = tensor_to_json(r.u.w2);
    unet["b2"] = tensor_to_json(r.u.b2);
    unet["w3"] = tensor_to_json(r.u.w3);
    unet["b3"] = tensor_to_json(r.u.b3);
    j["speunet"] = std::move(unet);
    return j;
}

}  // namespace

void cmd_synth(const RunConfig& cfg) {
    cfg.validate();
    if (!cfg.scene.synth) throw ConfigError("synth: config must use a synth scene source");
    const SynthSpec& spec = *cfg.scene.synth;
    Scene scene = load_scene(cfg);

    ensure_dir(cfg.out);
    const fs::path out(cfg.out);
    SceneManifest manifest;
    manifest.synth = spec;
    manifest.srf = scene.srf;
    manifest.psf = scene.psf;
    write_cube((out / manifest.x_file).string(), scene.x);
    write_cube((out / manifest.y_file).string(), scene.y);
    write_cube((out / manifest.z_file).string(), scene.z);
    write_cube((out / manifest.m_file).string(), scene.m);
    write_scene_manifest((out / "scene.json").string(), manifest);

    std::printf("synth: wrote %s/{%s,%s,%s,%s,scene.json} (%dx%dx%d, r=%d)\n", cfg.out.c_str(),
                manifest.x_file.c_str(), manifest.y_file.c_str(), manifest.z_file.c_str(),
                manifest.m_file.c_str(), spec.width, spec.height, spec.bands, spec.scale);
}

TrainArtifacts cmd_train(const RunConfig& cfg) {
    cfg.validate();
    Scene scene = load_scene(cfg);

    ensure_dir(cfg.out);
    const fs::path out(cfg.out);
    write_text((out / "config.json").string(), serialize_run_config(cfg));

    StageReport partial;
    PipelineResult result;
    try {
        result = run_pipeline(scene, cfg.train, cfg.arm, &partial);
    } catch (const NumericError&) {
        write_log((out / "train_log.jsonl").string(), partial.records);
        throw;
    }

    write_log((out / "train_log.jsonl").string(), result.report.records);
    write_text((out / "params.json").string(), params_to_json(result).dump(2) + "\n");
    write_cube((out / "xhat.hsic").string(), result.x_hat);

    json summary;
    summary["arm"] = arm_to_string(cfg.arm);
    summary["records"] = result.report.records.size();
    summary["initial_loss_u1"] = result.report.initial_loss_u1;
    summary["final_loss_u1"] = result.report.final_loss_u1;
    write_text((out / "summary.json").string(), summary.dump(2) + "\n");

    TrainArtifacts artifacts;
    artifacts.metrics = std::nullopt;
    if (scene.x.size() > 0) {
        MetricReport m = evaluate(result.x_hat, scene.x, scene.psf.scale);
        write_text((out / "metrics.json").string(), metrics_to_json(m).dump(2) + "\n");
        artifacts.metrics = m;
    }

    std::printf("train[%s]: %s in %s (stage1 %.1fs, stage2 %.1fs; L_U1 %s -> %s)\n",
                arm_to_string(cfg.arm).c_str(), cfg.scene.synth ? "synth scene" : "cube scene",
                cfg.out.c_str(), result.report.stage1_seconds, result.report.stage2_seconds,
                fmt(result.report.initial_loss_u1).c_str(),
                fmt(result.report.final_loss_u1).c_str());
    if (artifacts.metrics)
        std::printf("train[%s]: sam %s  ergas %s  psnr %s  rmse %s  cc %s\n",
                    arm_to_string(cfg.arm).c_str(), fmt(artifacts.metrics->sam).c_str(),
                    fmt(artifacts.metrics->ergas).c_str(), fmt(artifacts.metrics->psnr).c_str(),
                    fmt(artifacts.metrics->rmse).c_str(), fmt(artifacts.metrics->cc).c_str());

    artifacts.result = std::move(result);
    return artifacts;
}

MetricReport cmd_eval(const std::string& xhat_path, const std::string& x_path, int scale,
                      const std::string& out_dir) {
    if (scale < 1) throw ConfigError("eval: scale must be >= 1");
    Tensor xhat = read_cube(xhat_path);
    Tensor x = read_cube(x_path);
    MetricReport m = evaluate(xhat, x, scale);
    auto [mae_map, sam_map] = error_maps(xhat, x);

    ensure_dir(out_dir);
    const fs::path out(out_dir);
    write_text((out / "metrics.json").string(), metrics_to_json(m).dump(2) + "\n");
    write_heatmap((out / "mae.pgm").string(), mae_map, std::nullopt);
    write_heatmap((out / "sam.pgm").string(), sam_map, std::nullopt);

    std::printf("sam   %s\nergas %s\npsnr  %s\nrmse  %s\ncc    %s\n", fmt(m.sam).c_str(),
                fmt(m.ergas).c_str(), fmt(m.psnr).c_str(), fmt(m.rmse).c_str(),
                fmt(m.cc).c_str());
    return m;
}

int cmd_ablate(const RunConfig& cfg) {
    cfg.validate();
    if (!cfg.scene.synth && !cfg.scene.x_path)
        throw ConfigError("ablate: the scene needs a truth X to compare arms");

    const Arm arms[] = {Arm::full,            Arm::no_g,        Arm::no_lu2,
                        Arm::no_g_no_lu2,     Arm::random_rotation,
                        Arm::no_augmentation};
    struct Row {
        std::string arm;
        std::optional<MetricReport> metrics;
        std::string error;
    };
    std::vector<Row> rows;
    int exit_code = 0;

    for (Arm a : arms) {
        RunConfig sub = cfg;
        sub.arm = a;
        sub.out = (fs::path(cfg.out) / arm_to_string(a)).string();
        Row row;
        row.arm = arm_to_string(a);
        try {
            TrainArtifacts art = cmd_train(sub);
            row.metrics = art.metrics;
        } catch (const Error& e) {
            row.error = e.what();
            if (exit_code == 0) exit_code = exit_code_for(e);
            std::fprintf(stderr, "ablate[%s]: %s\n", row.arm.c_str(), e.what());
        }
        rows.push_back(std::move(row));
    }

    // best value per metric column across the arms that produced one
    const int kMetrics = 5;
    auto metric_of = [](const MetricReport& m, int i) {
        switch (i) {
            case 0: return m.sam;
            case 1: return m.ergas;
            case 2: return m.psnr;
            case 3: return m.rmse;
            default: return m.cc;
        }
    };
    const bool higher_better[kMetrics] = {false, false, true, false, true};
    std::optional<double> best[kMetrics];
    for (const Row& row : rows) {
        if (!row.metrics) continue;
        for (int i = 0; i < kMetrics; ++i) {
            const double v = metric_of(*row.metrics, i);
            if (!best[i] || (higher_better[i] ? v > *best[i] : v < *best[i])) best[i] = v;
        }
    }

    ensure_dir(cfg.out);
    std::string csv = "arm,sam,ergas,psnr,rmse,cc\n";
    std::printf("%-18s %-24s %-24s %-24s %-24s %-24s\n", "arm", "SAM", "ERGAS", "PSNR", "RMSE",
                "CC");
    for (const Row& row : rows) {
        if (row.metrics) {
            csv += row.arm;
            std::printf("%-18s", row.arm.c_str());
            for (int i = 0; i < kMetrics; ++i) {
                const double v = metric_of(*row.metrics, i);
                const bool is_best = best[i] && v == *best[i];
                csv += "," + fmt(v);
                std::printf(" %-24s", (fmt(v) + (is_best ? "*" : "")).c_str());
            }
            csv += '\n';
            std::printf("\n");
        } else {
            csv += row.arm + ",failed,failed,failed,failed,failed\n";
            std::printf("%-18s failed: %s\n", row.arm.c_str(), row.error.c_str());
        }
    }
    write_text((fs::path(cfg.out) / "ablation.csv").string(), csv);
    return exit_code;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return 2;
    if (dynamic_cast<const NumericError*>(&e)) return 3;
    if (dynamic_cast<const IoError*>(&e)) return 4;
    return 1;
}

}  // namespace adasr
