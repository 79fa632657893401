#pragma once

// Ground-truth scene description shared by the synthesis, scoring and
// evaluation modules.

#include <cmath>

#include "lsmdet/grid.hpp"
#include "lsmdet/noise.hpp"

namespace lsmdet {

/// One object: center tau and basis coefficient vector a.
struct ObjectSpec {
    index_vec center;
    std::vector<double> coefficients;

    double norm() const {
        double s = 0.0;
        for (double c : coefficients) s += c * c;
        return std::sqrt(s);
    }
};

/// Object list plus the geometry and noise model it was generated under.
struct Scene {
    std::int64_t domain_side = 0;   // L
    std::int64_t support_side = 0;  // B
    double delta = 0.0;
    NoiseModel noise;
    std::vector<ObjectSpec> objects;
    int ndim = 2;

    std::int64_t count() const { return static_cast<std::int64_t>(objects.size()); }
};

/// Assumption checks: pairwise separation > B + 3 delta / 2, boundary margin
/// >= B/2, positive coefficient norms, density below `max_density`.
inline void validate_scene(const Scene& scene, double max_density = 1.0) {
    const std::int64_t L = scene.domain_side, B = scene.support_side;
    if (L <= 0 || B <= 0 || B > L) throw std::invalid_argument("bad scene geometry");
    const std::int64_t lo = -(L / 2) + (B + 1) / 2;
    const std::int64_t hi = L - 1 - L / 2 - (B + 1) / 2;
    const double min_sep = static_cast<double>(B) + 1.5 * scene.delta;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const ObjectSpec& obj = scene.objects[i];
        if (static_cast<int>(obj.center.size()) != scene.ndim)
            throw std::invalid_argument("object center rank mismatch");
        if (obj.norm() <= 0.0) throw std::invalid_argument("object with zero coefficients");
        for (int a = 0; a < scene.ndim; ++a)
            if (obj.center[a] < lo || obj.center[a] > hi)
                throw std::invalid_argument("object too close to the boundary");
        for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
            std::int64_t dist = 0;
            for (int a = 0; a < scene.ndim; ++a)
                dist = std::max(dist, std::abs(obj.center[a] - scene.objects[j].center[a]));
            if (static_cast<double>(dist) <= min_sep)
                throw std::invalid_argument("objects closer than B + 3*delta/2");
        }
    }
    const double density = static_cast<double>(scene.count()) *
                           std::pow(static_cast<double>(B), scene.ndim) /
                           std::pow(static_cast<double>(L), scene.ndim);
    if (density > max_density) throw std::invalid_argument("scene density above target");
}

}  // namespace lsmdet
