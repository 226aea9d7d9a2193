#include "adasr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace adasr {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* ctx) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) ok = true;
        if (!ok) throw ConfigError(std::string(ctx) + ": unknown key '" + item.key() + "'");
    }
}

json tensor_rows(const Tensor& t) {
    json rows = json::array();
    for (int i = 0; i < t.dim(0); ++i) {
        json row = json::array();
        for (int j = 0; j < t.dim(1); ++j) row.push_back(t.at(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Tensor tensor_from_rows(const json& rows, const char* ctx) {
    if (!rows.is_array() || rows.empty() || !rows[0].is_array())
        throw ConfigError(std::string(ctx) + ": expected an array of rows");
    const int r = static_cast<int>(rows.size());
    const int c = static_cast<int>(rows[0].size());
    Tensor t({r, c});
    for (int i = 0; i < r; ++i) {
        if (static_cast<int>(rows[i].size()) != c)
            throw ConfigError(std::string(ctx) + ": ragged rows");
        for (int j = 0; j < c; ++j) t.at(i, j) = rows[i][j].get<double>();
    }
    return t;
}

json srf_to_json(const SrfSpec& srf) {
    json j;
    j["band_count"] = srf.band_count;
    j["msi_band_count"] = srf.msi_band_count;
    j["supports"] = srf.supports;
    j["weights"] = tensor_rows(srf.weights);
    return j;
}

SrfSpec srf_from_json(const json& j) {
    check_keys(j, {"band_count", "msi_band_count", "supports", "weights"}, "srf");
    SrfSpec srf;
    srf.band_count = j.at("band_count").get<int>();
    srf.msi_band_count = j.at("msi_band_count").get<int>();
    srf.supports = j.at("supports").get<SupportSets>();
    srf.weights = tensor_from_rows(j.at("weights"), "srf.weights");
    srf.validate();
    return srf;
}

json psf_to_json(const PsfSpec& psf) {
    json j;
    j["scale"] = psf.scale;
    j["kernel"] = tensor_rows(psf.kernel);
    return j;
}

PsfSpec psf_from_json(const json& j) {
    check_keys(j, {"scale", "kernel"}, "psf");
    PsfSpec psf;
    psf.scale = j.at("scale").get<int>();
    psf.kernel = tensor_from_rows(j.at("kernel"), "psf.kernel");
    psf.validate();
    return psf;
}

json synth_to_json(const SynthSpec& s) {
    json j;
    j["width"] = s.width;
    j["height"] = s.height;
    j["bands"] = s.bands;
    j["msi_bands"] = s.msi_bands;
    j["scale"] = s.scale;
    j["seed"] = s.seed;
    j["texture"] = texture_to_string(s.texture);
    return j;
}

SynthSpec synth_from_json(const json& j) {
    check_keys(j, {"width", "height", "bands", "msi_bands", "scale", "seed", "texture"},
               "scene.synth");
    SynthSpec s;
    if (j.contains("width")) s.width = j.at("width").get<int>();
    if (j.contains("height")) s.height = j.at("height").get<int>();
    if (j.contains("bands")) s.bands = j.at("bands").get<int>();
    if (j.contains("msi_bands")) s.msi_bands = j.at("msi_bands").get<int>();
    if (j.contains("scale")) s.scale = j.at("scale").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("texture")) s.texture = texture_from_string(j.at("texture").get<std::string>());
    return s;
}

json train_to_json(const TrainConfig& t) {
    json j;
    j["total_steps"] = t.total_steps;
    j["stage2_steps"] = t.stage2_steps;
    j["lr"] = t.lr;
    j["rho"] = t.rho;
    j["alpha"] = t.alpha;
    j["k_g"] = t.k_g;
    j["k_d"] = t.k_d;
    j["angle_range"] = t.angle_range;
    j["seed"] = t.seed;
    j["log_interval"] = t.log_interval;
    return j;
}

TrainConfig train_from_json(const json& j) {
    check_keys(j,
               {"total_steps", "stage2_steps", "lr", "rho", "alpha", "k_g", "k_d", "angle_range",
                "seed", "log_interval"},
               "train");
    TrainConfig t;
    if (j.contains("total_steps")) t.total_steps = j.at("total_steps").get<int>();
    if (j.contains("stage2_steps")) t.stage2_steps = j.at("stage2_steps").get<int>();
    if (j.contains("lr")) t.lr = j.at("lr").get<double>();
    if (j.contains("rho")) t.rho = j.at("rho").get<double>();
    if (j.contains("alpha")) t.alpha = j.at("alpha").get<double>();
    if (j.contains("k_g")) t.k_g = j.at("k_g").get<int>();
    if (j.contains("k_d")) t.k_d = j.at("k_d").get<int>();
    if (j.contains("angle_range")) t.angle_range = j.at("angle_range").get<double>();
    if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("log_interval")) t.log_interval = j.at("log_interval").get<int>();
    return t;
}

}  // namespace

void SceneSource::validate() const {
    const int sources = (synth ? 1 : 0) + (x_path ? 1 : 0) + (cubes ? 1 : 0);
    if (sources != 1) throw ConfigError("scene: exactly one of synth/x/cubes must be given");
    if (synth) {
        if (srf || psf)
            throw ConfigError("scene: synth derives its own srf/psf; do not supply them");
        SynthSpec s = *synth;
        if (s.width < 1 || s.height < 1 || s.bands < 1 || s.msi_bands < 1 || s.scale < 1)
            throw ConfigError("scene.synth: dimensions must be positive");
        return;
    }
    if (!srf || !psf) throw ConfigError("scene: cube sources need srf and psf specs");
    srf->validate();
    psf->validate();
}

void RunConfig::validate() const {
    scene.validate();
    train.validate();
    if (out.empty()) throw ConfigError("config: out directory must be nonempty");
}

bool tensor_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && a.values() == b.values();
}

bool srf_equal(const SrfSpec& a, const SrfSpec& b) {
    return a.band_count == b.band_count && a.msi_band_count == b.msi_band_count &&
           a.supports == b.supports && tensor_equal(a.weights, b.weights);
}

bool psf_equal(const PsfSpec& a, const PsfSpec& b) {
    return a.scale == b.scale && tensor_equal(a.kernel, b.kernel);
}

bool run_config_equal(const RunConfig& a, const RunConfig& b) {
    if (a.out != b.out || a.arm != b.arm) return false;
    const TrainConfig& ta = a.train;
    const TrainConfig& tb = b.train;
    if (ta.total_steps != tb.total_steps || ta.stage2_steps != tb.stage2_steps ||
        ta.lr != tb.lr || ta.rho != tb.rho || ta.alpha != tb.alpha || ta.k_g != tb.k_g ||
        ta.k_d != tb.k_d || ta.angle_range != tb.angle_range || ta.seed != tb.seed ||
        ta.log_interval != tb.log_interval)
        return false;
    const SceneSource& sa = a.scene;
    const SceneSource& sb = b.scene;
    if (sa.synth != sb.synth || sa.x_path != sb.x_path || sa.cubes != sb.cubes) return false;
    if (sa.srf.has_value() != sb.srf.has_value() || sa.psf.has_value() != sb.psf.has_value())
        return false;
    if (sa.srf && !srf_equal(*sa.srf, *sb.srf)) return false;
    if (sa.psf && !psf_equal(*sa.psf, *sb.psf)) return false;
    return true;
}

std::string serialize_run_config(const RunConfig& cfg) {
    json j;
    j["out"] = cfg.out;
    j["arm"] = arm_to_string(cfg.arm);
    json scene;
    if (cfg.scene.synth) scene["synth"] = synth_to_json(*cfg.scene.synth);
    if (cfg.scene.x_path) scene["x"] = *cfg.scene.x_path;
    if (cfg.scene.cubes) {
        json c;
        c["y"] = cfg.scene.cubes->y;
        c["z"] = cfg.scene.cubes->z;
        c["m"] = cfg.scene.cubes->m;
        scene["cubes"] = std::move(c);
    }
    if (cfg.scene.srf) scene["srf"] = srf_to_json(*cfg.scene.srf);
    if (cfg.scene.psf) scene["psf"] = psf_to_json(*cfg.scene.psf);
    j["scene"] = std::move(scene);
    j["train"] = train_to_json(cfg.train);
    return j.dump(2) + "\n";
}

RunConfig parse_run_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    try {
        check_keys(j, {"out", "arm", "scene", "train"}, "config");
        RunConfig cfg;
        if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
        if (j.contains("arm")) cfg.arm = arm_from_string(j.at("arm").get<std::string>());
        if (j.contains("scene")) {
            const json& s = j.at("scene");
            check_keys(s, {"synth", "x", "cubes", "srf", "psf"}, "scene");
            if (s.contains("synth")) cfg.scene.synth = synth_from_json(s.at("synth"));
            if (s.contains("x")) cfg.scene.x_path = s.at("x").get<std::string>();
            if (s.contains("cubes")) {
                const json& c = s.at("cubes");
                check_keys(c, {"y", "z", "m"}, "scene.cubes");
                CubePaths p;
                p.y = c.at("y").get<std::string>();
                p.z = c.at("z").get<std::string>();
                p.m = c.at("m").get<std::string>();
                cfg.scene.cubes = std::move(p);
            }
            if (s.contains("srf")) cfg.scene.srf = srf_from_json(s.at("srf"));
            if (s.contains("psf")) cfg.scene.psf = psf_from_json(s.at("psf"));
        }
        if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

Scene load_scene(const RunConfig& cfg) {
    cfg.scene.validate();
    if (cfg.scene.synth) {
        const SynthSpec& s = *cfg.scene.synth;
        return synth_scene(s.width, s.height, s.bands, s.msi_bands, s.scale, s.seed, s.texture);
    }
    Scene scene;
    scene.srf = *cfg.scene.srf;
    scene.psf = *cfg.scene.psf;
    if (cfg.scene.x_path) {
        scene.x = read_cube(*cfg.scene.x_path);
        if (scene.x.rank() != 3 || scene.x.bands() != scene.srf.band_count)
            throw ShapeError("scene: X band count does not match the srf");
        scene.y = simulate_spatial_degrade(scene.x, scene.psf);
        scene.z = simulate_spectral_degrade(scene.x, scene.srf);
        scene.m = simulate_spectral_degrade(scene.y, scene.srf);
        return scene;
    }
    scene.y = read_cube(cfg.scene.cubes->y);
    scene.z = read_cube(cfg.scene.cubes->z);
    scene.m = read_cube(cfg.scene.cubes->m);
    const int r = scene.psf.scale;
    if (scene.y.bands() != scene.srf.band_count)
        throw ShapeError("scene: Y band count does not match the srf");
    if (scene.z.bands() != scene.srf.msi_band_count ||
        scene.m.bands() != scene.srf.msi_band_count)
        throw ShapeError("scene: Z/M band counts do not match the srf");
    if (scene.z.rows() != scene.y.rows() * r || scene.z.cols() != scene.y.cols() * r)
        throw ShapeError("scene: Z extent must be r times Y extent");
    if (scene.m.rows() != scene.y.rows() || scene.m.cols() != scene.y.cols())
        throw ShapeError("scene: M extent must match Y");
    return scene;
}

void write_scene_manifest(const std::string& path, const SceneManifest& manifest) {
    json j;
    j["synth"] = synth_to_json(manifest.synth);
    j["srf"] = srf_to_json(manifest.srf);
    j["psf"] = psf_to_json(manifest.psf);
    json files;
    files["x"] = manifest.x_file;
    files["y"] = manifest.y_file;
    files["z"] = manifest.z_file;
    files["m"] = manifest.m_file;
    j["files"] = std::move(files);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing manifest '" + path + "'");
}

SceneManifest load_scene_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    try {
        check_keys(j, {"synth", "srf", "psf", "files"}, "manifest");
        SceneManifest m;
        m.synth = synth_from_json(j.at("synth"));
        m.srf = srf_from_json(j.at("srf"));
        m.psf = psf_from_json(j.at("psf"));
        const json& files = j.at("files");
        check_keys(files, {"x", "y", "z", "m"}, "manifest.files");
        m.x_file = files.at("x").get<std::string>();
        m.y_file = files.at("y").get<std::string>();
        m.z_file = files.at("z").get<std::string>();
        m.m_file = files.at("m").get<std::string>();
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
}

}  // namespace adasr
