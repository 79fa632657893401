#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <set>

#include "helpers.hpp"
#include "lsmdet/scoremap.hpp"
#include "lsmdet/synth.hpp"

using namespace lsmdet;

TEST_CASE("single fourier-bessel mode is rotationally symmetric") {
    BasisSet basis = fourier_bessel_basis(16, 1);
    const GridField& f = basis.functions[0];
    index_vec p(2), q(2);
    for (std::int64_t x = 0; x <= 7; ++x)
        for (std::int64_t y = 0; y <= 7; ++y) {
            p = {x, y};
            const double v = f.at(p);
            for (auto [sx, sy] : {std::pair{-1, 1}, {1, -1}, {-1, -1}}) {
                q = {sx * x, sy * y};
                REQUIRE(f.at(q) == Catch::Approx(v).margin(1e-12));
            }
        }
}

TEST_CASE("fourier-bessel bases are orthonormal by construction") {
    for (auto [B, M] : {std::pair<std::int64_t, int>{16, 5}, {12, 7}, {9, 4}}) {
        BasisSet basis = fourier_bessel_basis(B, M);
        REQUIRE(basis.count() == M);
        REQUIRE(orthonormality_defect(basis) <= 1e-10);
        REQUIRE(basis.support == B);
    }
}

TEST_CASE("all 50 functions at B=64 vanish outside the inscribed disk") {
    BasisSet basis = fourier_bessel_basis(64, 50);
    REQUIRE(orthonormality_defect(basis) <= 1e-10);
    index_vec c(2);
    for (const GridField& f : basis.functions)
        for (std::int64_t i = 0; i < f.size(); ++i) {
            f.coords_of(i, c);
            const double rho = std::hypot(static_cast<double>(c[0]), static_cast<double>(c[1]));
            if (rho > 32.0) REQUIRE(f.data[static_cast<std::size_t>(i)] == 0.0);
        }
}

TEST_CASE("requesting more modes than the grid supports fails") {
    // a 4x4 grid has 16 pixels; 30 modes cannot stay independent
    REQUIRE_THROWS_WITH(fourier_bessel_basis(4, 30),
                        Catch::Matchers::ContainsSubstring("exceeds available modes"));
}

TEST_CASE("placement satisfies the scene constraints") {
    SECTION("single object keeps the boundary margin") {
        std::mt19937_64 rng(1);
        std::vector<index_vec> centers = place_objects(64, 16, 2.0, 16.0 * 16.0 / (64.0 * 64.0) * 1.0 - 1e-9, rng);
        REQUIRE(centers.size() == 1);
        for (auto c : centers[0]) {
            REQUIRE(c >= -32 + 8);
            REQUIRE(c <= 31 - 8);
        }
    }
    SECTION("paper-scale configuration: 128 separated centers") {
        std::mt19937_64 rng(2);
        std::vector<index_vec> centers = place_objects(1024, 64, 10.0, 0.5, rng);
        REQUIRE(centers.size() == 128);
        const double min_sep = 64.0 + 15.0;
        for (std::size_t i = 0; i < centers.size(); ++i)
            for (std::size_t j = i + 1; j < centers.size(); ++j) {
                std::int64_t dist = 0;
                for (int a = 0; a < 2; ++a)
                    dist = std::max(dist, std::abs(centers[i][a] - centers[j][a]));
                REQUIRE(static_cast<double>(dist) > min_sep);
            }
    }
    SECTION("infeasible density errors") {
        std::mt19937_64 rng(3);
        REQUIRE_THROWS_WITH(place_objects(24, 8, 2.0, 0.9, rng),
                            Catch::Matchers::ContainsSubstring("infeasible"));
    }
}

TEST_CASE("coefficient draws are unit norm and symmetric") {
    std::mt19937_64 rng(4);
    SECTION("unit norm") {
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<double> a = sample_coefficients(7, rng);
            double n = 0.0;
            for (double v : a) n += v * v;
            REQUIRE(std::sqrt(n) == Catch::Approx(1.0).margin(1e-12));
        }
    }
    SECTION("M = 1 gives a sign") {
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> a = sample_coefficients(1, rng);
            REQUIRE(std::abs(a[0]) == Catch::Approx(1.0).margin(1e-12));
        }
    }
    SECTION("coordinates are centered") {
        const int n = 10000;
        std::vector<double> mean(5, 0.0);
        for (int rep = 0; rep < n; ++rep) {
            std::vector<double> a = sample_coefficients(5, rng);
            for (int j = 0; j < 5; ++j) mean[static_cast<std::size_t>(j)] += a[static_cast<std::size_t>(j)];
        }
        for (double m : mean) REQUIRE(std::abs(m / n) <= 0.05);
    }
}

TEST_CASE("rendering superposes shifted basis expansions") {
    std::mt19937_64 rng(5);
    BasisSet basis = testutil::random_basis(8, 3, 2, rng);
    SECTION("empty scene renders zero") {
        Scene scene;
        scene.domain_side = 32;
        scene.support_side = 8;
        GridField x = render_scene(scene, basis);
        REQUIRE(x.max_abs() == 0.0);
    }
    SECTION("one object with coefficients e_1 reproduces psi_1 shifted") {
        Scene scene;
        scene.domain_side = 32;
        scene.support_side = 8;
        scene.objects.push_back({{3, -4}, {1.0, 0.0, 0.0}});
        GridField x = render_scene(scene, basis);
        const GridField& psi = basis.functions[0];
        index_vec u, t(2);
        for (std::int64_t i = 0; i < psi.size(); ++i) {
            psi.coords_of(i, u);
            t[0] = u[0] + 3;
            t[1] = u[1] - 4;
            REQUIRE(x.at(t) == psi.at(u));
        }
    }
    SECTION("two separated objects superpose") {
        Scene scene;
        scene.domain_side = 48;
        scene.support_side = 8;
        scene.objects.push_back({{-12, -12}, {0.5, -0.5, 1.0}});
        scene.objects.push_back({{12, 12}, {-1.0, 0.25, 0.0}});
        GridField both = render_scene(scene, basis);
        for (std::size_t k = 0; k < 2; ++k) {
            Scene solo = scene;
            solo.objects = {scene.objects[k]};
            GridField x = render_scene(solo, basis);
            index_vec u, t(2);
            const GridField& psi = basis.functions[0];
            for (std::int64_t i = 0; i < psi.size(); ++i) {
                psi.coords_of(i, u);
                t[0] = u[0] + scene.objects[k].center[0];
                t[1] = u[1] + scene.objects[k].center[1];
                REQUIRE(both.at(t) == Catch::Approx(x.at(t)).margin(1e-14));
            }
        }
    }
    SECTION("support mismatch errors") {
        Scene scene;
        scene.domain_side = 32;
        scene.support_side = 10;
        REQUIRE_THROWS_WITH(render_scene(scene, basis),
                            Catch::Matchers::ContainsSubstring("support mismatch"));
    }
}

TEST_CASE("sigma/SNR inversion") {
    REQUIRE(sigma_for_snr(1.0, 1.0, 64, 2) == Catch::Approx(1.0 / 64.0));
    REQUIRE(sigma_for_snr(0.25, 1.0, 2, 1) == Catch::Approx(std::sqrt(2.0)));
    REQUIRE(sigma_for_snr(1e12, 1.0, 64, 2) <= 1e-7);  // sigma -> 0 as SNR -> inf
    REQUIRE_THROWS_AS(sigma_for_snr(0.0, 1.0, 8, 2), std::invalid_argument);
}

TEST_CASE("scene SNR round trip") {
    std::mt19937_64 rng(6);
    NoiseModel model;
    model.sigma = sigma_for_snr(0.37, 1.0, 8, 2);
    Scene scene = generate_scene(64, 8, 3, 2.0, 0.2, model, rng);
    REQUIRE(scene_snr(scene) == Catch::Approx(0.37).margin(1e-12));
}

TEST_CASE("generated scenes pass validation and bridge to the score identity") {
    BasisSet basis = fourier_bessel_basis(8, 3);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng = make_engine(42, seed);
        NoiseModel model;
        model.sigma = 0.5;
        Scene scene = generate_scene(48, 8, 3, 2.0, 0.25, model, rng);
        REQUIRE_NOTHROW(validate_scene(scene, 0.25 + 1e-9));
        GridField x = render_scene(scene, basis);
        GridField s = score_map(x, basis);
        for (const ObjectSpec& obj : scene.objects) {
            const double want = obj.norm() * obj.norm();
            REQUIRE(std::abs(s.at(obj.center) - want) <= 1e-8);
        }
    }
}

TEST_CASE("scene manifest round trip") {
    std::mt19937_64 rng(7);
    NoiseModel model;
    model.kind = NoiseKind::gaussian_kernel;
    model.sigma = 0.125;
    model.seed = 99;
    Scene scene = generate_scene(64, 8, 4, 3.0, 0.2, model, rng);
    const auto path = (std::filesystem::temp_directory_path() / "lsmdet_scene.txt").string();
    write_scene_manifest(scene, path);
    Scene back = read_scene_manifest(path);
    REQUIRE(back.domain_side == scene.domain_side);
    REQUIRE(back.support_side == scene.support_side);
    REQUIRE(back.delta == scene.delta);
    REQUIRE(back.noise.sigma == scene.noise.sigma);
    REQUIRE(back.count() == scene.count());
    for (std::int64_t i = 0; i < scene.count(); ++i) {
        REQUIRE(back.objects[static_cast<std::size_t>(i)].center ==
                scene.objects[static_cast<std::size_t>(i)].center);
        REQUIRE(back.objects[static_cast<std::size_t>(i)].coefficients ==
                scene.objects[static_cast<std::size_t>(i)].coefficients);
    }
    std::remove(path.c_str());
}
