#pragma once

// Monte Carlo calibration of the null max-statistics over a box of side r/2:
//   tilde_z : max over box of M * max_j (z * psi~_j)^2
//   s_z     : max over box of sum_j (z * psi~_j)^2
// and the empirical tail value p(u) = #{samples > u} / n_sim.

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "lsmdet/basis.hpp"
#include "lsmdet/convolve.hpp"
#include "lsmdet/noise.hpp"
#include "lsmdet/rng.hpp"

namespace lsmdet {

enum class StatKind { tilde_z, s_z };

inline const char* stat_kind_name(StatKind k) {
    return k == StatKind::tilde_z ? "tilde-z" : "s-z";
}

inline StatKind stat_kind_from_name(const std::string& s) {
    if (s == "tilde-z" || s == "tilde_z") return StatKind::tilde_z;
    if (s == "s-z" || s == "s_z") return StatKind::s_z;
    throw std::invalid_argument("unknown statistic kind: " + s);
}

/// Sorted Monte Carlo samples of one max-statistic.
struct CalibrationTable {
    StatKind kind = StatKind::tilde_z;
    double r = 0.0;          // erasure box side; the max runs over side r/2
    double box_side = 0.0;   // r / 2
    std::int64_t n_sim = 0;
    std::uint64_t seed = 0;
    NoiseModel noise;
    std::uint64_t basis_id = 0;
    std::vector<double> samples;  // ascending
};

namespace detail {

inline double box_max_statistic(const std::vector<GridField>& correlations, StatKind kind,
                                const GridBox& box) {
    const GridField& first = correlations.front();
    const int d = first.ndim();
    for (int a = 0; a < d; ++a) {
        auto [lo, hi] = box.axis_range(a);
        if (lo < first.lo(a) || hi > first.hi(a))
            throw std::invalid_argument("box exceeds valid region");
    }
    index_vec shape(static_cast<std::size_t>(d)), origin(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
        auto [lo, hi] = box.axis_range(a);
        origin[a] = lo;
        shape[a] = hi - lo + 1;
    }
    double best = 0.0;
    const double m = static_cast<double>(correlations.size());
    for_each_coord(shape, origin, [&](const index_vec& t) {
        if (kind == StatKind::s_z) {
            double s = 0.0;
            for (const GridField& z : correlations) {
                const double v = z.at(t);
                s += v * v;
            }
            best = std::max(best, s);
        } else {
            for (const GridField& z : correlations) {
                const double v = z.at(t);
                best = std::max(best, m * v * v);
            }
        }
    });
    return best;
}

}  // namespace detail

/// Max of the chosen statistic over the grid points of `box`.
inline double max_statistic(const GridField& z, const BasisSet& basis, StatKind kind,
                            const GridBox& box) {
    SpectralCorrelator corr(basis.functions, z.shape);
    return detail::box_max_statistic(corr.correlate(z), kind, box);
}

/// Noise patch extents such that the valid correlation region exactly covers
/// the closed box of side r/2 centered at zero.
inline index_vec calibration_patch_shape(double r, std::int64_t support, int d) {
    GridBox box{index_vec(static_cast<std::size_t>(d), 0), r / 2.0, true};
    index_vec shape(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) shape[a] = box.points_per_axis(a) + support - 1;
    return shape;
}

/// n_sim i.i.d. max-statistics, sorted ascending. Per-sample RNG streams are
/// derived from (model.seed, stream index), so the table is identical for any
/// thread count.
inline CalibrationTable build_table(const NoiseModel& model, const BasisSet& basis, double r,
                                    std::int64_t n_sim, StatKind kind, int threads = 1) {
    if (n_sim < 1) throw std::invalid_argument("n_sim must be at least 1");
    if (r < 1.0) throw std::invalid_argument("r must be at least 1");
    const int d = basis.ndim();
    const index_vec patch = calibration_patch_shape(r, basis.support, d);
    const GridBox box{index_vec(static_cast<std::size_t>(d), 0), r / 2.0, true};
    const SpectralCorrelator corr(basis.functions, patch);

    CalibrationTable table;
    table.kind = kind;
    table.r = r;
    table.box_side = r / 2.0;
    table.n_sim = n_sim;
    table.seed = model.seed;
    table.noise = model;
    table.basis_id = basis_hash(basis);
    table.samples.assign(static_cast<std::size_t>(n_sim), 0.0);
    parallel_for(n_sim, threads, [&](std::int64_t i) {
        GridField z = sample_noise_field(model, patch, static_cast<std::uint64_t>(i));
        table.samples[static_cast<std::size_t>(i)] =
            detail::box_max_statistic(corr.correlate(z), kind, box);
    });
    std::sort(table.samples.begin(), table.samples.end());
    return table;
}

/// Empirical tail value #{samples > u} / n_sim (strict inequality).
inline double p_value(const CalibrationTable& table, double u) {
    if (table.samples.empty()) throw std::invalid_argument("empty calibration table");
    const auto it = std::upper_bound(table.samples.begin(), table.samples.end(), u);
    return static_cast<double>(table.samples.end() - it) /
           static_cast<double>(table.samples.size());
}

// =============================================================================
// Table files: samples as a 1-D grid plus a text sidecar
// =============================================================================

inline std::string table_sidecar_path(const std::string& grid_path) {
    return grid_path + ".meta";
}

inline void write_table(const CalibrationTable& table, const std::string& grid_path) {
    GridField f;
    f.shape = {static_cast<std::int64_t>(table.samples.size())};
    f.origin = {0};
    f.data = table.samples;
    write_grid(f, grid_path);
    std::ofstream meta(table_sidecar_path(grid_path), std::ios::trunc);
    if (!meta) throw io_error("cannot write sidecar for " + grid_path);
    meta << "statistic = " << stat_kind_name(table.kind) << "\n";
    meta << "r = " << table.r << "\n";
    meta << "box_side = " << table.box_side << "\n";
    meta << "n_sim = " << table.n_sim << "\n";
    meta << "seed = " << table.seed << "\n";
    meta << "noise = " << (table.noise.kind == NoiseKind::white ? "white" : "gaussian-kernel")
         << "\n";
    meta << "sigma = " << std::setprecision(17) << table.noise.sigma << "\n";
    meta << "length_scale = " << std::setprecision(17) << table.noise.length_scale << "\n";
    meta << "basis_id = " << std::hex << table.basis_id << std::dec << "\n";
}

inline CalibrationTable read_table(const std::string& grid_path) {
    GridField f = read_grid(grid_path);
    if (f.ndim() != 1) throw io_error("calibration table must be 1-D: " + grid_path);
    CalibrationTable table;
    table.samples = f.data;
    if (!std::is_sorted(table.samples.begin(), table.samples.end()))
        throw io_error("calibration samples not sorted: " + grid_path);
    table.n_sim = static_cast<std::int64_t>(table.samples.size());

    std::ifstream meta(table_sidecar_path(grid_path));
    if (!meta) throw io_error("missing sidecar: " + table_sidecar_path(grid_path));
    std::string line;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
        };
        trim(key);
        trim(value);
        if (key == "statistic") table.kind = stat_kind_from_name(value);
        else if (key == "r") table.r = std::stod(value);
        else if (key == "box_side") table.box_side = std::stod(value);
        else if (key == "seed") table.seed = std::stoull(value);
        else if (key == "noise")
            table.noise.kind = value == "white" ? NoiseKind::white : NoiseKind::gaussian_kernel;
        else if (key == "sigma") table.noise.sigma = std::stod(value);
        else if (key == "length_scale") table.noise.length_scale = std::stod(value);
        else if (key == "basis_id") table.basis_id = std::stoull(value, nullptr, 16);
        else if (key == "n_sim") {
            if (std::stoll(value) != table.n_sim)
                throw io_error("sidecar n_sim disagrees with table payload: " + grid_path);
        }
    }
    table.noise.seed = table.seed;
    return table;
}

}  // namespace lsmdet
