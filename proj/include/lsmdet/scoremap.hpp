#pragma once

// Score map S^y(t) = sum_j (y * reversed(psi_j))^2(t) on the valid region,
// its clean/noise/mixed decomposition S^y = S^x + S^z + H, and the mixed-term
// growth check used as an executable invariant on synthetic scenes.

#include "lsmdet/basis.hpp"
#include "lsmdet/convolve.hpp"
#include "lsmdet/synth_types.hpp"

namespace lsmdet {

/// Sum of squared basis correlations of `y`, restricted to offsets where the
/// support lies fully inside `y`. Nonnegative by construction.
inline GridField score_map(const GridField& y, const BasisSet& basis) {
    if (basis.functions.empty()) throw std::invalid_argument("empty basis");
    for (int a = 0; a < y.ndim(); ++a)
        if (y.shape[a] < basis.support)
            throw std::invalid_argument("field smaller than basis support");
    SpectralCorrelator corr(basis.functions, y.shape);
    GridField s;
    corr.correlate(y, [&](std::size_t j, GridField&& z) {
        if (j == 0) {
            s = std::move(z);
            for (double& v : s.data) v *= v;
        } else {
            for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] += z.data[i] * z.data[i];
        }
    });
    return s;
}

/// Reusable score-map pipeline bound to one input shape (shared, thread safe).
class ScoreMapper {
public:
    ScoreMapper(const BasisSet& basis, index_vec input_shape)
        : corr_(basis.functions, std::move(input_shape)) {}

    GridField operator()(const GridField& y) const {
        GridField s;
        corr_.correlate(y, [&](std::size_t j, GridField&& z) {
            if (j == 0) {
                s = std::move(z);
                for (double& v : s.data) v *= v;
            } else {
                for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] += z.data[i] * z.data[i];
            }
        });
        return s;
    }

    const SpectralCorrelator& correlator() const { return corr_; }

private:
    SpectralCorrelator corr_;
};

// =============================================================================
// Decomposition
// =============================================================================

struct ScoreDecomposition {
    GridField s_y, s_x, s_z, h;
};

/// All four fields of S^y = S^x + S^z + H for y = x + z. The mixed term is
/// computed from its own definition H = 2 sum_j (x*psi~_j)(z*psi~_j), not as a
/// residual, so the identity stays a checkable invariant.
inline ScoreDecomposition score_decompose(const GridField& x, const GridField& z,
                                          const BasisSet& basis) {
    if (x.shape != z.shape || x.origin != z.origin)
        throw std::invalid_argument("shape mismatch between x and z");
    SpectralCorrelator corr(basis.functions, x.shape);
    GridField y = x;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += z.data[i];

    ScoreDecomposition d;
    std::vector<GridField> cx = corr.correlate(x);
    std::vector<GridField> cz = corr.correlate(z);
    d.s_x = GridField::zeros(corr.valid_shape(), corr.valid_origin(x));
    d.s_z = d.s_x;
    d.h = d.s_x;
    for (std::size_t j = 0; j < cx.size(); ++j)
        for (std::size_t i = 0; i < d.s_x.data.size(); ++i) {
            d.s_x.data[i] += cx[j].data[i] * cx[j].data[i];
            d.s_z.data[i] += cz[j].data[i] * cz[j].data[i];
            d.h.data[i] += 2.0 * cx[j].data[i] * cz[j].data[i];
        }
    GridField sy;
    corr.correlate(y, [&](std::size_t j, GridField&& c) {
        if (j == 0) {
            sy = std::move(c);
            for (double& v : sy.data) v *= v;
        } else {
            for (std::size_t i = 0; i < sy.data.size(); ++i) sy.data[i] += c.data[i] * c.data[i];
        }
    });
    d.s_y = std::move(sy);
    return d;
}

inline double decomposition_residual(const ScoreDecomposition& d) {
    double worst = 0.0;
    for (std::size_t i = 0; i < d.s_y.data.size(); ++i)
        worst = std::max(worst, std::abs(d.s_y.data[i] -
                                         (d.s_x.data[i] + d.s_z.data[i] + d.h.data[i])));
    return worst;
}

// =============================================================================
// Mixed-term growth check
// =============================================================================

/// |H(t)| <= 2 M (3^d - 1) sqrt(M) max_{i in I(t)} ||a_i|| sqrt(S^z(t)) at
/// every valid t, where I(t) are the centers within open infinity-distance B
/// of t. A small absolute slack absorbs FFT residue where H is exactly zero.
inline bool mixed_term_bound_check(const ScoreDecomposition& d, const Scene& scene,
                                   const BasisSet& basis) {
    const int dim = d.h.ndim();
    const double m = static_cast<double>(basis.count());
    const double constant = 2.0 * m * (std::pow(3.0, dim) - 1.0) * std::sqrt(m);
    const double slack = 1e-10 * (1.0 + d.s_y.max_abs());

    std::vector<double> norms(scene.objects.size());
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        double s = 0.0;
        for (double c : scene.objects[i].coefficients) s += c * c;
        norms[i] = std::sqrt(s);
    }

    bool ok = true;
    index_vec t;
    for (std::int64_t idx = 0; idx < d.h.size() && ok; ++idx) {
        d.h.coords_of(idx, t);
        double max_norm = 0.0;
        for (std::size_t i = 0; i < scene.objects.size(); ++i) {
            std::int64_t dist = 0;
            for (int a = 0; a < dim; ++a)
                dist = std::max(dist, std::abs(scene.objects[i].center[a] - t[a]));
            if (dist < scene.support_side) max_norm = std::max(max_norm, norms[i]);
        }
        const double bound =
            constant * max_norm * std::sqrt(std::max(0.0, d.s_z.data[static_cast<std::size_t>(idx)]));
        ok = std::abs(d.h.data[static_cast<std::size_t>(idx)]) <= bound + slack;
    }
    return ok;
}

}  // namespace lsmdet
