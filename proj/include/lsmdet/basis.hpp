#pragma once

// Orthonormal compactly supported basis sets and their construction from
// arbitrary template stacks via modified Gram-Schmidt.

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lsmdet/grid.hpp"

namespace lsmdet {

// =============================================================================
// BasisSet
// =============================================================================

/// M functions on a common B^d support grid, orthonormal in the discrete l2
/// inner product. Functions share shape and the centered origin.
struct BasisSet {
    std::int64_t support = 0;  // side length B in pixels
    std::vector<GridField> functions;

    int count() const { return static_cast<int>(functions.size()); }
    int ndim() const { return functions.empty() ? 0 : functions.front().ndim(); }
};

inline double dot(const GridField& a, const GridField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

inline double norm(const GridField& a) { return std::sqrt(dot(a, a)); }

/// Max deviation of the Gram matrix from the identity.
inline double orthonormality_defect(const BasisSet& basis) {
    double worst = 0.0;
    for (int k = 0; k < basis.count(); ++k)
        for (int j = k; j < basis.count(); ++j) {
            const double g = dot(basis.functions[k], basis.functions[j]);
            worst = std::max(worst, std::abs(g - (k == j ? 1.0 : 0.0)));
        }
    return worst;
}

inline bool is_orthonormal(const BasisSet& basis, double tol = 1e-10) {
    return orthonormality_defect(basis) <= tol;
}

/// FNV-1a over the raw payload; identifies a basis in sidecar files.
inline std::uint64_t basis_hash(const BasisSet& basis) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint64_t b = static_cast<std::uint64_t>(basis.support);
    mix(&b, 8);
    for (const GridField& f : basis.functions) mix(f.data.data(), f.data.size() * 8);
    return h;
}

// =============================================================================
// gram_schmidt
// =============================================================================

/// Orthonormalize `templates` (all of one shape) with the re-orthogonalizing
/// modified Gram-Schmidt. Templates whose residual after projection falls
/// below tol * max template norm are dropped.
inline BasisSet gram_schmidt(const std::vector<GridField>& templates, double tol = 1e-8) {
    if (templates.empty()) throw std::invalid_argument("no templates");
    const index_vec shape = templates.front().shape;
    double max_norm = 0.0;
    for (const GridField& t : templates) {
        if (t.shape != shape) throw std::invalid_argument("inconsistent template shapes");
        if (!t.all_finite()) throw std::invalid_argument("non-finite template");
        max_norm = std::max(max_norm, norm(t));
    }
    const double drop = tol * max_norm;
    if (max_norm == 0.0) throw std::invalid_argument("all templates numerically zero");

    BasisSet basis;
    basis.support = shape.front();
    const index_vec origin = GridField::centered_origin(shape);
    for (const GridField& t : templates) {
        GridField v = t;
        v.origin = origin;
        for (int pass = 0; pass < 2; ++pass)
            for (const GridField& e : basis.functions) {
                const double c = dot(v, e);
                for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] -= c * e.data[i];
            }
        const double r = norm(v);
        if (r <= drop) continue;
        for (double& x : v.data) x /= r;
        basis.functions.push_back(std::move(v));
    }
    if (basis.functions.empty()) throw std::invalid_argument("all templates numerically zero");
    return basis;
}

// =============================================================================
// Basis files: SDGF with a leading function axis [M, B, ..., B]
// =============================================================================

inline void write_basis(const BasisSet& basis, const std::string& path) {
    if (basis.functions.empty()) throw std::invalid_argument("empty basis");
    const GridField& f0 = basis.functions.front();
    GridField packed;
    packed.shape.push_back(basis.count());
    packed.shape.insert(packed.shape.end(), f0.shape.begin(), f0.shape.end());
    packed.origin.assign(packed.shape.size(), 0);
    packed.data.reserve(static_cast<std::size_t>(packed.size()));
    for (const GridField& f : basis.functions)
        packed.data.insert(packed.data.end(), f.data.begin(), f.data.end());
    write_grid(packed, path);
}

inline BasisSet read_basis(const std::string& path) {
    GridField packed = read_grid(path);
    if (packed.ndim() < 2) throw io_error("basis file must have a function axis: " + path);
    const std::int64_t m = packed.shape.front();
    index_vec shape(packed.shape.begin() + 1, packed.shape.end());
    for (auto s : shape)
        if (s != shape.front()) throw io_error("basis support must be cubic: " + path);
    BasisSet basis;
    basis.support = shape.front();
    const std::int64_t per = std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                                             std::multiplies<>());
    for (std::int64_t k = 0; k < m; ++k) {
        GridField f = GridField::zeros_centered(shape);
        std::copy(packed.data.begin() + k * per, packed.data.begin() + (k + 1) * per,
                  f.data.begin());
        basis.functions.push_back(std::move(f));
    }
    if (!is_orthonormal(basis, 1e-8)) throw io_error("basis file is not orthonormal: " + path);
    return basis;
}

}  // namespace lsmdet
