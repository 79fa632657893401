#pragma once

// Shared test utilities. The oracles here are deliberately independent of the
// library's implementation paths: naive quadratic-time convolution, linear
// scans, and hand enumeration.

#include <random>

#include "lsmdet/basis.hpp"
#include "lsmdet/grid.hpp"

namespace testutil {

using lsmdet::GridField;
using lsmdet::index_vec;

inline GridField random_field(index_vec shape, std::mt19937_64& rng,
                              double lo = -1.0, double hi = 1.0) {
    GridField f = GridField::zeros_centered(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : f.data) v = dist(rng);
    return f;
}

/// Quadratic-time direct convolution, written with explicit coordinate
/// arithmetic (no shared code with convolve_linear).
inline GridField naive_convolve(const GridField& f, const GridField& g) {
    const int d = f.ndim();
    index_vec shape(static_cast<std::size_t>(d)), org(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
        shape[a] = f.shape[a] + g.shape[a] - 1;
        org[a] = f.origin[a] + g.origin[a];
    }
    GridField out = GridField::zeros(shape, org);
    index_vec cf, cg, ct(static_cast<std::size_t>(d));
    for (std::int64_t i = 0; i < f.size(); ++i) {
        f.coords_of(i, cf);
        for (std::int64_t j = 0; j < g.size(); ++j) {
            g.coords_of(j, cg);
            for (int a = 0; a < d; ++a) ct[a] = cf[a] + cg[a];
            out.at(ct) += f.at(cf) * g.at(cg);
        }
    }
    return out;
}

inline double max_abs_diff(const GridField& a, const GridField& b) {
    if (a.shape != b.shape) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

/// Random orthonormal basis on a B^d support: gram_schmidt over random noise
/// templates (full rank with probability one).
inline lsmdet::BasisSet random_basis(std::int64_t B, int M, int d, std::mt19937_64& rng) {
    std::vector<GridField> templates;
    index_vec shape(static_cast<std::size_t>(d), B);
    for (int j = 0; j < M; ++j) templates.push_back(random_field(shape, rng));
    lsmdet::BasisSet basis = lsmdet::gram_schmidt(templates);
    if (basis.count() != M) throw std::runtime_error("random basis lost rank");
    return basis;
}

}  // namespace testutil
