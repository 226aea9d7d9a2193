#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>

#include "adasr/dataio.hpp"
#include "adasr/errors.hpp"
#include "support/oracles.hpp"

using adasr::read_cube;
using adasr::Scene;
using adasr::synth_scene;
using adasr::Tensor;
using adasr::Texture;
using adasr::write_cube;
using adasr::write_heatmap;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("texture names round-trip") {
    for (Texture t : {Texture::gaussian_mixture, Texture::smooth_gradient, Texture::checker})
        CHECK(adasr::texture_from_string(adasr::texture_to_string(t)) == t);
    CHECK_THROWS_AS(adasr::texture_from_string("plasma"), adasr::ConfigError);
}

TEST_CASE("synth_scene default geometry has the contracted shapes") {
    Scene s = synth_scene(64, 64, 31, 3, 4, 7, Texture::gaussian_mixture);
    CHECK(s.x.rows() == 64);
    CHECK(s.x.cols() == 64);
    CHECK(s.x.bands() == 31);
    CHECK(s.y.rows() == 16);
    CHECK(s.y.cols() == 16);
    CHECK(s.y.bands() == 31);
    CHECK(s.z.rows() == 64);
    CHECK(s.z.cols() == 64);
    CHECK(s.z.bands() == 3);
    CHECK(s.m.rows() == 16);
    CHECK(s.m.cols() == 16);
    CHECK(s.m.bands() == 3);
}

TEST_CASE("synth_scene is deterministic per seed") {
    for (Texture t : {Texture::gaussian_mixture, Texture::smooth_gradient, Texture::checker}) {
        Scene a = synth_scene(16, 16, 8, 2, 4, 99, t);
        Scene b = synth_scene(16, 16, 8, 2, 4, 99, t);
        REQUIRE(a.x.size() == b.x.size());
        for (int i = 0; i < a.x.size(); ++i) CHECK(a.x.at(i) == b.x.at(i));
        for (int i = 0; i < a.m.size(); ++i) CHECK(a.m.at(i) == b.m.at(i));
        Scene c = synth_scene(16, 16, 8, 2, 4, 100, t);
        bool any_diff = false;
        for (int i = 0; i < a.x.size() && !any_diff; ++i) any_diff = a.x.at(i) != c.x.at(i);
        CHECK(any_diff);
    }
}

TEST_CASE("synth_scene satisfies the cross-degradation identity") {
    for (Texture t : {Texture::gaussian_mixture, Texture::smooth_gradient, Texture::checker}) {
        Scene s = synth_scene(24, 24, 12, 3, 4, 5, t);
        Tensor m_from_z = simulate_spatial_degrade(s.z, s.psf);
        REQUIRE(m_from_z.size() == s.m.size());
        for (int i = 0; i < s.m.size(); ++i)
            CHECK(std::abs(s.m.at(i) - m_from_z.at(i)) <= 1e-10);
    }
}

TEST_CASE("synth_scene values and band statistics are well-conditioned") {
    Scene s = synth_scene(32, 32, 10, 3, 4, 11, Texture::checker);
    for (int i = 0; i < s.x.size(); ++i) {
        CHECK(s.x.at(i) >= 0.0);
        CHECK(s.x.at(i) <= 1.0);
    }
    const int n = s.x.rows() * s.x.cols();
    for (int b = 0; b < s.x.bands(); ++b) {
        double mean = 0.0;
        for (int y = 0; y < s.x.rows(); ++y)
            for (int x = 0; x < s.x.cols(); ++x) mean += s.x.at(y, x, b);
        mean /= n;
        CHECK(mean > 1e-3);
        double var = 0.0;
        for (int y = 0; y < s.x.rows(); ++y)
            for (int x = 0; x < s.x.cols(); ++x) {
                const double d = s.x.at(y, x, b) - mean;
                var += d * d;
            }
        CHECK(var / n > 1e-8);
    }
}

TEST_CASE("synth_scene rejects bad geometry") {
    CHECK_THROWS_AS(synth_scene(10, 10, 8, 2, 4, 1, Texture::checker), adasr::ConfigError);
    CHECK_THROWS_AS(synth_scene(16, 16, 8, 8, 4, 1, Texture::checker), adasr::ConfigError);
    CHECK_THROWS_AS(synth_scene(16, 16, 8, 9, 4, 1, Texture::checker), adasr::ConfigError);
    CHECK_THROWS_AS(synth_scene(0, 16, 8, 2, 4, 1, Texture::checker), adasr::ConfigError);
}

TEST_CASE("cube file round-trip is byte-exact") {
    auto g = oracle::rng(41);
    Tensor cube({5, 7, 3});
    for (int i = 0; i < cube.size(); ++i)
        cube.at(i) = static_cast<double>(static_cast<float>(oracle::uniform(g, 0.0, 1.0)));
    const std::string p1 = tmp_path("adasr_rt1.hsic");
    const std::string p2 = tmp_path("adasr_rt2.hsic");
    write_cube(p1, cube);
    Tensor back = read_cube(p1);
    REQUIRE(back.shape() == cube.shape());
    for (int i = 0; i < cube.size(); ++i) CHECK(back.at(i) == cube.at(i));
    write_cube(p2, back);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("cube file length formula") {
    const std::string p = tmp_path("adasr_tiny.hsic");
    write_cube(p, Tensor({1, 1, 1}));
    CHECK(std::filesystem::file_size(p) == 22);  // 18-byte header + one float
    Tensor t({3, 4, 5});
    write_cube(p, t);
    CHECK(std::filesystem::file_size(p) == 18 + 4 * 60);
    std::remove(p.c_str());
}

TEST_CASE("cube reader rejects malformed files") {
    const std::string p = tmp_path("adasr_bad.hsic");
    Tensor cube({2, 2, 2});
    write_cube(p, cube);
    std::string good = slurp(p);

    SUBCASE("bad magic") {
        std::string bad = good;
        bad[0] = 'X';
        std::ofstream(p, std::ios::binary) << bad;
        CHECK_THROWS_WITH_AS(read_cube(p), doctest::Contains("bad magic"), adasr::IoError);
    }
    SUBCASE("truncated payload") {
        std::string bad = good.substr(0, good.size() - 3);
        std::ofstream(p, std::ios::binary) << bad;
        CHECK_THROWS_AS(read_cube(p), adasr::IoError);
    }
    SUBCASE("trailing garbage") {
        std::string bad = good + "zz";
        std::ofstream(p, std::ios::binary) << bad;
        CHECK_THROWS_AS(read_cube(p), adasr::IoError);
    }
    SUBCASE("unsupported version") {
        std::string bad = good;
        bad[4] = 2;
        std::ofstream(p, std::ios::binary) << bad;
        CHECK_THROWS_AS(read_cube(p), adasr::IoError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_cube(tmp_path("adasr_nope.hsic")), adasr::IoError);
    }
    std::remove(p.c_str());
}

TEST_CASE("heatmap emission") {
    const std::string p = tmp_path("adasr_map.pgm");

    SUBCASE("all-zero map gives all-zero pixels") {
        Tensor m({3, 4});
        write_heatmap(p, m);
        std::string data = slurp(p);
        REQUIRE(data.substr(0, 2) == "P5");
        std::string payload = data.substr(data.size() - 12);
        for (char ch : payload) CHECK(ch == 0);
    }
    SUBCASE("auto scale hits both endpoints") {
        Tensor m({1, 3}, {0.0, 0.4, 0.8});
        write_heatmap(p, m);
        std::string data = slurp(p);
        CHECK(data.find("# scale_max=0.8") != std::string::npos);
        const auto* px = reinterpret_cast<const unsigned char*>(data.data()) + data.size() - 3;
        CHECK(px[0] == 0);
        CHECK(px[1] == 128);  // round(0.5 * 255)
        CHECK(px[2] == 255);
    }
    SUBCASE("fixed scale saturates outliers") {
        Tensor m({1, 3}, {0.0, 1.0, 50.0});
        write_heatmap(p, m, 2.0);
        std::string data = slurp(p);
        CHECK(data.find("# scale_max=2") != std::string::npos);
        const auto* px = reinterpret_cast<const unsigned char*>(data.data()) + data.size() - 3;
        CHECK(px[0] == 0);
        CHECK(px[1] == 128);
        CHECK(px[2] == 255);  // clamped, not wrapped

        // identical below-max content, different outliers -> same pixels there
        Tensor m2({1, 3}, {0.0, 1.0, 7.0});
        const std::string p2 = tmp_path("adasr_map2.pgm");
        write_heatmap(p2, m2, 2.0);
        std::string d2 = slurp(p2);
        CHECK(d2[d2.size() - 3] == data[data.size() - 3]);
        CHECK(d2[d2.size() - 2] == data[data.size() - 2]);
        std::remove(p2.c_str());
    }
    SUBCASE("header dimensions follow pgm width-height order") {
        Tensor m({2, 5});  // 5 wide, 2 tall
        write_heatmap(p, m);
        std::string data = slurp(p);
        CHECK(data.find("\n5 2\n") != std::string::npos);
    }
    SUBCASE("rejects negative and non-finite values") {
        Tensor neg({1, 2}, {0.1, -0.1});
        CHECK_THROWS_AS(write_heatmap(p, neg), adasr::NumericError);
        Tensor nan({1, 1}, {std::numeric_limits<double>::quiet_NaN()});
        CHECK_THROWS_AS(write_heatmap(p, nan), adasr::NumericError);
    }
    std::remove(p.c_str());
}
