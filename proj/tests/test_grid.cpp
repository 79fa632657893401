#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "helpers.hpp"
#include "lsmdet/grid.hpp"

using namespace lsmdet;

namespace {
std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("grid indexing round-trips coordinates") {
    GridField f = GridField::zeros({3, 5}, {-1, -2});
    REQUIRE(f.size() == 15);
    index_vec c;
    for (std::int64_t i = 0; i < f.size(); ++i) {
        f.coords_of(i, c);
        REQUIRE(f.linear_index(c) == i);
        REQUIRE(f.contains(c));
    }
    REQUIRE_FALSE(f.contains(index_vec{2, 0}));
    REQUIRE(f.lo(0) == -1);
    REQUIRE(f.hi(1) == 2);
}

TEST_CASE("centered origin convention") {
    REQUIRE(GridField::centered_origin({512, 512}) == index_vec{-256, -256});
    REQUIRE(GridField::centered_origin({5}) == index_vec{-2});
    REQUIRE(GridField::centered_origin({1}) == index_vec{0});
}

TEST_CASE("grid box membership and ranges") {
    GridBox closed{{0, 0}, 5.0, true};
    REQUIRE(closed.contains(index_vec{2, -2}));
    REQUIRE_FALSE(closed.contains(index_vec{3, 0}));
    REQUIRE(closed.axis_range(0) == std::pair<std::int64_t, std::int64_t>{-2, 2});

    GridBox open{{0, 0}, 4.0, false};
    REQUIRE(open.contains(index_vec{1, 1}));
    REQUIRE_FALSE(open.contains(index_vec{2, 0}));
    REQUIRE(open.axis_range(0) == std::pair<std::int64_t, std::int64_t>{-1, 1});

    GridBox half{{0}, 34.5, true};  // side r/2 with odd delta
    REQUIRE(half.axis_range(0) == std::pair<std::int64_t, std::int64_t>{-17, 17});
    REQUIRE(half.points_per_axis(0) == 35);
}

TEST_CASE("grid file round trip preserves the payload") {
    std::mt19937_64 rng(7);
    GridField f = testutil::random_field({5, 7}, rng);
    const std::string path = temp_path("lsmdet_grid_roundtrip.grid");
    write_grid(f, path);
    GridField g = read_grid(path);
    REQUIRE(g.shape == f.shape);
    REQUIRE(g.data == f.data);  // bit-exact
    REQUIRE(g.origin == GridField::centered_origin(f.shape));
    std::remove(path.c_str());
}

TEST_CASE("grid file error cases") {
    const std::string path = temp_path("lsmdet_grid_bad.grid");

    SECTION("empty file -> bad magic") {
        std::ofstream(path, std::ios::binary).close();
        REQUIRE_THROWS_WITH(read_grid(path), Catch::Matchers::ContainsSubstring("bad magic"));
    }
    SECTION("wrong magic") {
        std::ofstream out(path, std::ios::binary);
        out.write("NOPE", 4);
        out.close();
        REQUIRE_THROWS_WITH(read_grid(path), Catch::Matchers::ContainsSubstring("bad magic"));
    }
    SECTION("shape 3x3 with 8 values -> payload size mismatch") {
        std::ofstream out(path, std::ios::binary);
        out.write("SDGF", 4);
        std::uint16_t version = 1, nd = 2;
        out.write(reinterpret_cast<char*>(&version), 2);
        out.write(reinterpret_cast<char*>(&nd), 2);
        std::uint64_t s = 3;
        out.write(reinterpret_cast<char*>(&s), 8);
        out.write(reinterpret_cast<char*>(&s), 8);
        for (int i = 0; i < 8; ++i) {
            double v = i;
            out.write(reinterpret_cast<char*>(&v), 8);
        }
        out.close();
        REQUIRE_THROWS_WITH(read_grid(path),
                            Catch::Matchers::ContainsSubstring("payload size mismatch"));
    }
    SECTION("trailing bytes -> payload size mismatch") {
        GridField f = GridField::zeros({2, 2}, {0, 0});
        write_grid(f, path);
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out.write("x", 1);
        out.close();
        REQUIRE_THROWS_WITH(read_grid(path),
                            Catch::Matchers::ContainsSubstring("payload size mismatch"));
    }
    SECTION("header cut mid-shape -> truncated payload") {
        std::ofstream out(path, std::ios::binary);
        out.write("SDGF", 4);
        std::uint16_t version = 1, nd = 2;
        out.write(reinterpret_cast<char*>(&version), 2);
        out.write(reinterpret_cast<char*>(&nd), 2);
        std::uint64_t s = 3;
        out.write(reinterpret_cast<char*>(&s), 8);
        out.close();
        REQUIRE_THROWS_WITH(read_grid(path),
                            Catch::Matchers::ContainsSubstring("truncated payload"));
    }
    std::remove(path.c_str());
}

TEST_CASE("non-finite payloads are rejected") {
    GridField f = GridField::zeros({2, 2}, {0, 0});
    f.data[1] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_FALSE(f.all_finite());
    REQUIRE_THROWS_AS(write_grid(f, temp_path("lsmdet_nan.grid")), std::invalid_argument);
}
