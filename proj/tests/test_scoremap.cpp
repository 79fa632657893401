#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "lsmdet/noise.hpp"
#include "lsmdet/scoremap.hpp"
#include "lsmdet/synth.hpp"

using namespace lsmdet;
using testutil::random_basis;
using testutil::random_field;

namespace {

Scene single_object_scene(std::int64_t L, std::int64_t B, const std::vector<double>& coeffs,
                          const index_vec& center) {
    Scene scene;
    scene.domain_side = L;
    scene.support_side = B;
    scene.delta = 1.0;
    scene.ndim = static_cast<int>(center.size());
    scene.objects.push_back({center, coeffs});
    return scene;
}

}  // namespace

TEST_CASE("zero field gives zero score map") {
    std::mt19937_64 rng(1);
    BasisSet basis = random_basis(6, 3, 2, rng);
    GridField y = GridField::zeros_centered({20, 20});
    GridField s = score_map(y, basis);
    REQUIRE(s.max_abs() == 0.0);
    REQUIRE(s.shape == index_vec{15, 15});
    REQUIRE(s.origin == index_vec{-7, -7});
}

TEST_CASE("score at an isolated object's center equals its squared norm") {
    std::mt19937_64 rng(2);
    BasisSet basis = random_basis(8, 4, 2, rng);
    std::vector<double> coeffs = {0.5, -1.25, 0.75, 2.0};
    double norm2 = 0.0;
    for (double c : coeffs) norm2 += c * c;
    const index_vec center{3, -2};
    Scene scene = single_object_scene(32, 8, coeffs, center);
    GridField x = render_scene(scene, basis);
    GridField s = score_map(x, basis);
    REQUIRE(std::abs(s.at(center) - norm2) <= 1e-8);
    // and the center is the global maximum
    double best = 0.0;
    for (double v : s.data) best = std::max(best, v);
    REQUIRE(best == Catch::Approx(s.at(center)).margin(1e-10));
}

TEST_CASE("score map matches the direct-convolution oracle") {
    std::mt19937_64 rng(3);
    BasisSet basis = random_basis(16, 3, 2, rng);
    GridField y = random_field({96, 96}, rng);
    GridField s = score_map(y, basis);
    // brute force at every valid point
    index_vec t, u(2), pos(2);
    double worst = 0.0;
    for (std::int64_t i = 0; i < s.size(); ++i) {
        s.coords_of(i, t);
        double total = 0.0;
        for (const GridField& psi : basis.functions) {
            double corr = 0.0;
            for (std::int64_t k = 0; k < psi.size(); ++k) {
                psi.coords_of(k, u);
                pos[0] = u[0] + t[0];
                pos[1] = u[1] + t[1];
                corr += y.at(pos) * psi.at(u);
            }
            total += corr * corr;
        }
        worst = std::max(worst, std::abs(total - s.data[static_cast<std::size_t>(i)]));
    }
    REQUIRE(worst <= 1e-10);
}

TEST_CASE("score map is nonnegative and errors on undersized fields") {
    std::mt19937_64 rng(4);
    BasisSet basis = random_basis(8, 2, 2, rng);
    GridField y = random_field({24, 24}, rng);
    GridField s = score_map(y, basis);
    for (double v : s.data) REQUIRE(v >= 0.0);
    GridField tiny = random_field({6, 24}, rng);
    REQUIRE_THROWS_WITH(score_map(tiny, basis),
                        Catch::Matchers::ContainsSubstring("smaller than"));
}

TEST_CASE("shift equivariance") {
    std::mt19937_64 rng(5);
    BasisSet basis = random_basis(6, 3, 2, rng);
    std::vector<double> coeffs = sample_coefficients(3, rng);
    GridField x1 = render_scene(single_object_scene(40, 6, coeffs, {0, 0}), basis);
    GridField x2 = render_scene(single_object_scene(40, 6, coeffs, {5, -7}), basis);
    GridField s1 = score_map(x1, basis);
    GridField s2 = score_map(x2, basis);
    // compare on a window where both shifted copies are in the valid region
    index_vec t(2), t_shift(2);
    for (t[0] = -8; t[0] <= 8; ++t[0])
        for (t[1] = -8; t[1] <= 8; ++t[1]) {
            t_shift[0] = t[0] + 5;
            t_shift[1] = t[1] - 7;
            REQUIRE(s2.at(t_shift) == Catch::Approx(s1.at(t)).margin(1e-10));
        }
}

TEST_CASE("decomposition special cases and identity") {
    std::mt19937_64 rng(6);
    BasisSet basis = random_basis(6, 3, 2, rng);

    SECTION("z = 0") {
        GridField x = random_field({20, 20}, rng);
        GridField z = GridField::zeros_centered({20, 20});
        ScoreDecomposition d = score_decompose(x, z, basis);
        REQUIRE(testutil::max_abs_diff(d.s_y, d.s_x) <= 1e-12);
        REQUIRE(d.s_z.max_abs() <= 1e-20);
        REQUIRE(d.h.max_abs() <= 1e-20);
    }
    SECTION("x = 0") {
        GridField x = GridField::zeros_centered({20, 20});
        GridField z = random_field({20, 20}, rng);
        ScoreDecomposition d = score_decompose(x, z, basis);
        REQUIRE(testutil::max_abs_diff(d.s_y, d.s_z) <= 1e-12);
        REQUIRE(d.h.max_abs() <= 1e-20);
    }
    SECTION("random x, z") {
        for (int rep = 0; rep < 20; ++rep) {
            GridField x = random_field({18, 22}, rng);
            GridField z = random_field({18, 22}, rng);
            ScoreDecomposition d = score_decompose(x, z, basis);
            REQUIRE(decomposition_residual(d) <= 1e-10);
        }
    }
    SECTION("shape mismatch") {
        GridField x = random_field({20, 20}, rng);
        GridField z = random_field({18, 20}, rng);
        REQUIRE_THROWS_AS(score_decompose(x, z, basis), std::invalid_argument);
    }
}

TEST_CASE("mixed term bound") {
    std::mt19937_64 rng(7);
    const std::int64_t B = 8;
    BasisSet basis = random_basis(B, 3, 2, rng);

    SECTION("x = 0 makes H vanish") {
        GridField x = GridField::zeros_centered({32, 32});
        GridField z = random_field({32, 32}, rng);
        Scene scene;
        scene.domain_side = 32;
        scene.support_side = B;
        scene.delta = 1.0;
        ScoreDecomposition d = score_decompose(x, z, basis);
        REQUIRE(d.h.max_abs() <= 1e-20);
        REQUIRE(mixed_term_bound_check(d, scene, basis));
    }

    SECTION("random scenes satisfy the bound, including the tighter constant") {
        NoiseModel model;
        model.kind = NoiseKind::white;
        model.sigma = 0.5;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            std::mt19937_64 scene_rng = make_engine(99, seed);
            model.seed = derive_seed(99, 1000 + seed);
            Scene scene = generate_scene(64, B, 3, 2.0, 0.2, model, scene_rng);
            GridField x = render_scene(scene, basis);
            GridField z = sample_noise_field(model, x.shape, 0);
            ScoreDecomposition d = score_decompose(x, z, basis);
            REQUIRE(mixed_term_bound_check(d, scene, basis));

            // paper-proof constant 2M(3^d-1), without the extra sqrt(M)
            const double c_tight = 2.0 * 3 * (std::pow(3.0, 2) - 1.0);
            const double slack = 1e-10 * (1.0 + d.s_y.max_abs());
            index_vec t;
            for (std::int64_t i = 0; i < d.h.size(); ++i) {
                d.h.coords_of(i, t);
                double max_norm = 0.0;
                for (const ObjectSpec& obj : scene.objects) {
                    std::int64_t dist = 0;
                    for (int a = 0; a < 2; ++a)
                        dist = std::max(dist, std::abs(obj.center[a] - t[a]));
                    if (dist < B) max_norm = std::max(max_norm, obj.norm());
                }
                const double lhs = std::abs(d.h.data[static_cast<std::size_t>(i)]);
                const double rhs =
                    c_tight * max_norm *
                    std::sqrt(std::max(0.0, d.s_z.data[static_cast<std::size_t>(i)]));
                REQUIRE(lhs <= rhs + slack);
            }
        }
    }
}

TEST_CASE("projected noise energy at a point stays below sigma^2 B^d") {
    std::mt19937_64 rng(8);
    const std::int64_t B = 6;
    const int M = 3;
    BasisSet basis = random_basis(B, M, 2, rng);
    NoiseModel model;
    model.kind = NoiseKind::gaussian_kernel;
    model.sigma = 0.7;
    model.seed = 321;
    const index_vec patch{B + 4, B + 4};
    const std::int64_t n_draws = 10000;
    SpectralCorrelator corr(basis.functions, patch);
    double sum = 0.0, sum2 = 0.0;
    const index_vec center{0, 0};
    for (std::int64_t i = 0; i < n_draws; ++i) {
        GridField z = sample_noise_field(model, patch, static_cast<std::uint64_t>(i));
        double s = 0.0;
        for (const GridField& c : corr.correlate(z)) {
            const double v = c.at(center);
            s += v * v;
        }
        sum += s;
        sum2 += s * s;
    }
    const double mean = sum / static_cast<double>(n_draws);
    const double var = sum2 / static_cast<double>(n_draws) - mean * mean;
    const double se = std::sqrt(var / static_cast<double>(n_draws));
    const double cap = model.sigma * model.sigma * std::pow(static_cast<double>(B), 2);
    REQUIRE(mean <= cap * (1.0 + 3.0 * se / cap));
}
