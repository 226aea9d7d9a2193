#pragma once

// Subcommand implementations, shared by the binary and the tests. Each
// command throws on failure; exit_code_for maps the taxonomy to the
// documented process exit codes.

#include <exception>
#include <optional>
#include <string>

#include "adasr/config.hpp"
#include "adasr/metrics.hpp"

namespace adasr {

/// Writes X/Y/Z/M cubes plus scene.json into cfg.out. Synth source only.
void cmd_synth(const RunConfig& cfg);

/// Everything cmd_train leaves in the run directory, returned for reuse.
struct TrainArtifacts {
    PipelineResult result;
    std::optional<MetricReport> metrics;  // absent when the scene has no truth X
};

TrainArtifacts cmd_train(const RunConfig& cfg);

MetricReport cmd_eval(const std::string& xhat_path, const std::string& x_path, int scale,
                      const std::string& out_dir);

/// Runs every arm under cfg.out/<arm>; one arm's failure does not stop the
/// others. Returns 0 when all six arms succeeded, otherwise the exit code
/// of the first failure.
int cmd_ablate(const RunConfig& cfg);

/// 2 config/shape, 3 numeric, 4 I/O, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace adasr
