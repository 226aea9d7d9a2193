#pragma once

// Structured run configuration (JSON on disk) and scene loading. A config
// names exactly one scene source: synthesis parameters, an X cube, or a
// (Y, Z, M) cube triple; cube sources carry the srf/psf specs the pipeline
// needs, synthesis derives its own.

#include <cstdint>
#include <optional>
#include <string>

#include "adasr/dataio.hpp"
#include "adasr/degradation.hpp"
#include "adasr/training.hpp"

namespace adasr {

struct SynthSpec {
    int width = 64;
    int height = 64;
    int bands = 31;
    int msi_bands = 3;
    int scale = 4;
    std::uint64_t seed = 0;
    Texture texture = Texture::gaussian_mixture;

    bool operator==(const SynthSpec&) const = default;
};

struct CubePaths {
    std::string y, z, m;

    bool operator==(const CubePaths&) const = default;
};

struct SceneSource {
    std::optional<SynthSpec> synth;
    std::optional<std::string> x_path;
    std::optional<CubePaths> cubes;
    std::optional<SrfSpec> srf;  // required for x/cube sources
    std::optional<PsfSpec> psf;

    void validate() const;
};

struct RunConfig {
    SceneSource scene;
    std::string out = "run";
    Arm arm = Arm::full;
    TrainConfig train;

    void validate() const;
};

bool tensor_equal(const Tensor& a, const Tensor& b);
bool srf_equal(const SrfSpec& a, const SrfSpec& b);
bool psf_equal(const PsfSpec& a, const PsfSpec& b);
bool run_config_equal(const RunConfig& a, const RunConfig& b);

/// Canonical JSON text; parse(serialize(cfg)) compares equal.
std::string serialize_run_config(const RunConfig& cfg);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Materializes the configured scene. Cube sources without a truth X leave
/// scene.x empty; callers that need it must check.
Scene load_scene(const RunConfig& cfg);

/// Manifest written next to synthesized cubes, enough to rebuild the
/// degradations: synthesis parameters, srf/psf, and the cube file names.
struct SceneManifest {
    SynthSpec synth;
    SrfSpec srf;
    PsfSpec psf;
    std::string x_file = "X.hsic";
    std::string y_file = "Y.hsic";
    std::string z_file = "Z.hsic";
    std::string m_file = "M.hsic";
};

void write_scene_manifest(const std::string& path, const SceneManifest& manifest);
SceneManifest load_scene_manifest(const std::string& path);

}  // namespace adasr
