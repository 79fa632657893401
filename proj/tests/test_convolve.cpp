#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "lsmdet/convolve.hpp"

using namespace lsmdet;
using testutil::max_abs_diff;
using testutil::naive_convolve;
using testutil::random_field;

TEST_CASE("delta impulse reproduces the kernel re-centered") {
    GridField f = GridField::zeros({5, 5}, GridField::centered_origin({5, 5}));
    f.at(index_vec{0, 0}) = 1.0;
    std::mt19937_64 rng(11);
    GridField g = random_field({3, 3}, rng);
    GridField out = convolve_linear(f, g);
    REQUIRE(out.shape == index_vec{7, 7});
    for (std::int64_t i = 0; i < g.size(); ++i) {
        index_vec c;
        g.coords_of(i, c);
        REQUIRE(out.at(c) == Catch::Approx(g.at(c)).margin(1e-14));
    }
    // everything outside the embedded kernel is zero
    double total = 0.0, ktotal = 0.0;
    for (double v : out.data) total += std::abs(v);
    for (double v : g.data) ktotal += std::abs(v);
    REQUIRE(total == Catch::Approx(ktotal).margin(1e-12));
}

TEST_CASE("ones(3) * ones(2) = [1,2,2,1]") {
    GridField f = GridField::zeros({3}, {0});
    GridField g = GridField::zeros({2}, {0});
    for (double& v : f.data) v = 1.0;
    for (double& v : g.data) v = 1.0;
    GridField out = convolve_linear(f, g);
    REQUIRE(out.data == std::vector<double>{1.0, 2.0, 2.0, 1.0});
    REQUIRE(out.origin == index_vec{0});
}

TEST_CASE("random 16x16 vs naive quadratic oracle") {
    std::mt19937_64 rng(42);
    GridField f = random_field({16, 16}, rng);
    GridField g = random_field({4, 4}, rng);
    GridField lib = convolve_linear(f, g);
    GridField ref = naive_convolve(f, g);
    REQUIRE(lib.origin == ref.origin);
    REQUIRE(max_abs_diff(lib, ref) <= 1e-10);
}

TEST_CASE("spectral path agrees with the oracle on larger inputs") {
    std::mt19937_64 rng(43);
    // big enough to cross the direct/spectral threshold
    GridField f = random_field({96, 96}, rng);
    GridField g = random_field({31, 17}, rng);
    GridField lib = convolve_linear(f, g);
    GridField ref = naive_convolve(f, g);
    REQUIRE(max_abs_diff(lib, ref) <= 1e-10);
}

TEST_CASE("convolution is linear") {
    std::mt19937_64 rng(44);
    for (int rep = 0; rep < 10; ++rep) {
        GridField f = random_field({12, 9}, rng);
        GridField g = random_field({12, 9}, rng);
        GridField h = random_field({5, 4}, rng);
        const double a = 0.7, b = -1.3;
        GridField combo = f;
        for (std::size_t i = 0; i < combo.data.size(); ++i)
            combo.data[i] = a * f.data[i] + b * g.data[i];
        GridField lhs = convolve_linear(combo, h);
        GridField fh = convolve_linear(f, h);
        GridField gh = convolve_linear(g, h);
        double worst = 0.0;
        for (std::size_t i = 0; i < lhs.data.size(); ++i)
            worst = std::max(worst, std::abs(lhs.data[i] - (a * fh.data[i] + b * gh.data[i])));
        REQUIRE(worst <= 1e-10);
    }
}

TEST_CASE("convolution error cases") {
    std::mt19937_64 rng(45);
    GridField f2 = random_field({8, 8}, rng);
    GridField f1 = random_field({8}, rng);
    REQUIRE_THROWS_WITH(convolve_linear(f2, f1), Catch::Matchers::ContainsSubstring("dimension"));
    GridField big = random_field({10, 10}, rng);
    REQUIRE_THROWS_AS(convolve_linear(f2, big), std::invalid_argument);
    GridField nan = f2;
    nan.data[0] = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(convolve_linear(nan, f2), std::invalid_argument);
}

TEST_CASE("1-d convolution and origin tracking") {
    std::mt19937_64 rng(46);
    GridField f = random_field({25}, rng);
    GridField g = random_field({6}, rng);
    g.origin = {3};  // non-centered kernel origin
    GridField lib = convolve_linear(f, g);
    GridField ref = naive_convolve(f, g);
    REQUIRE(lib.origin == ref.origin);
    REQUIRE(max_abs_diff(lib, ref) <= 1e-12);
}

TEST_CASE("spectral correlator matches correlation by definition") {
    std::mt19937_64 rng(47);
    lsmdet::BasisSet basis = testutil::random_basis(6, 3, 2, rng);
    GridField y = random_field({20, 18}, rng);
    SpectralCorrelator corr(basis.functions, y.shape);
    std::vector<GridField> zs = corr.correlate(y);
    REQUIRE(zs.size() == 3);
    REQUIRE(zs[0].shape == index_vec{15, 13});
    // (y * reversed(psi))(t) = sum_s y(s) psi(s - t)
    index_vec t{2, -1}, s(2), u(2);
    for (int j = 0; j < 3; ++j) {
        double expect = 0.0;
        const GridField& psi = basis.functions[static_cast<std::size_t>(j)];
        for (std::int64_t i = 0; i < psi.size(); ++i) {
            psi.coords_of(i, u);
            s[0] = u[0] + t[0];
            s[1] = u[1] + t[1];
            expect += y.at(s) * psi.at(u);
        }
        REQUIRE(zs[static_cast<std::size_t>(j)].at(t) == Catch::Approx(expect).margin(1e-12));
    }
}
