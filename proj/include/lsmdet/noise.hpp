#pragma once

// Stationary centered Gaussian noise fields. Two models: white noise, and the
// squared-exponential kernel C(x,y) = sigma^2 exp(-2||x-y||^2 / l^2). The
// kernel model is sampled by filtering white noise with symmetric FIR taps
// whose discrete autocorrelation reproduces the kernel on the integer grid
// exactly (to truncation): taps come from the spectral square root of the
// sampled covariance sequence, computed once per length scale.

#include <map>
#include <mutex>

#include "lsmdet/grid.hpp"
#include "lsmdet/rng.hpp"

namespace lsmdet {

enum class NoiseKind { white, gaussian_kernel };

struct NoiseModel {
    NoiseKind kind = NoiseKind::gaussian_kernel;
    double sigma = 1.0;
    double length_scale = 1.0;
    std::uint64_t seed = 0;
};

/// Kernel value sigma^2 exp(-2 ||lag||^2 / l^2); white noise is the zero-lag
/// delta. Used by tests and by the covariance assertions.
inline double noise_covariance(const NoiseModel& m, std::span<const std::int64_t> lag) {
    double sq = 0.0;
    bool zero = true;
    for (auto v : lag) {
        sq += static_cast<double>(v) * static_cast<double>(v);
        zero &= (v == 0);
    }
    if (m.kind == NoiseKind::white) return zero ? m.sigma * m.sigma : 0.0;
    return m.sigma * m.sigma * std::exp(-2.0 * sq / (m.length_scale * m.length_scale));
}

namespace detail {

/// Symmetric taps h with sum_t h(t) h(t+k) = exp(-2 k^2 / l^2) for integer k.
/// Returned as one half: taps[i] = h(i) = h(-i).
inline std::vector<double> kernel_filter_taps(double length_scale) {
    static std::mutex mutex;
    static std::map<double, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(length_scale);
    if (it != cache.end()) return it->second;

    const double l2 = length_scale * length_scale;
    // covariance sequence, truncated far below double precision
    std::vector<double> a{1.0};
    for (std::int64_t k = 1;; ++k) {
        const double v = std::exp(-2.0 * static_cast<double>(k) * static_cast<double>(k) / l2);
        if (v < 1e-18) break;
        a.push_back(v);
    }
    // dense sampling of the spectrum A(w) = a0 + 2 sum a_k cos(kw); positive
    // because the continuous kernel has a positive, periodizable spectrum
    const int N = 8192;
    std::vector<double> rootspec(N);
    for (int m = 0; m < N; ++m) {
        const double w = 2.0 * M_PI * m / N;
        double s = a[0];
        for (std::size_t k = 1; k < a.size(); ++k)
            s += 2.0 * a[k] * std::cos(w * static_cast<double>(k));
        if (s <= 0.0) throw std::runtime_error("kernel spectrum not positive");
        rootspec[m] = std::sqrt(s);
    }
    // zero-phase taps: inverse transform of sqrt(A)
    std::vector<double> taps;
    for (int k = 0;; ++k) {
        double h = 0.0;
        for (int m = 0; m < N; ++m)
            h += rootspec[m] * std::cos(2.0 * M_PI * m * k / N);
        h /= N;
        if (k > 0 && std::abs(h) < 1e-13 * std::abs(taps[0])) break;
        taps.push_back(h);
        if (k > N / 4) throw std::runtime_error("kernel filter failed to decay");
    }
    cache[length_scale] = taps;
    return taps;
}

/// In-place separable filtering along `axis` with symmetric taps; the output
/// keeps only offsets where the filter lies fully inside, shrinking the
/// extent by 2*(taps-1).
inline GridField filter_axis(const GridField& f, const std::vector<double>& taps, int axis) {
    const std::int64_t radius = static_cast<std::int64_t>(taps.size()) - 1;
    index_vec shape = f.shape, org = f.origin;
    shape[axis] -= 2 * radius;
    org[axis] += radius;
    if (shape[axis] <= 0) throw std::invalid_argument("field too small for filter");
    GridField out = GridField::zeros(shape, org);

    // strides of the input along the filtered axis
    std::int64_t stride = 1;
    for (int a = f.ndim() - 1; a > axis; --a) stride *= f.shape[a];

    index_vec c;
    for (std::int64_t idx = 0; idx < out.size(); ++idx) {
        out.coords_of(idx, c);
        const std::int64_t base = f.linear_index(c);
        double s = taps[0] * f.data[static_cast<std::size_t>(base)];
        for (std::int64_t k = 1; k <= radius; ++k)
            s += taps[static_cast<std::size_t>(k)] *
                 (f.data[static_cast<std::size_t>(base + k * stride)] +
                  f.data[static_cast<std::size_t>(base - k * stride)]);
        out.data[static_cast<std::size_t>(idx)] = s;
    }
    return out;
}

}  // namespace detail

/// One realization of the model on `shape` (centered origin). The same
/// (seed, stream_index, shape) is bit-reproducible regardless of thread
/// count; distinct stream indices give independent fields.
inline GridField sample_noise_field(const NoiseModel& model, index_vec shape,
                                    std::uint64_t stream_index) {
    for (auto s : shape)
        if (s <= 0) throw std::invalid_argument("shape must be positive");
    if (model.sigma <= 0.0 || model.length_scale <= 0.0)
        throw std::invalid_argument("sigma and length_scale must be positive");
    std::mt19937_64 rng = make_engine(model.seed, stream_index);
    std::normal_distribution<double> normal(0.0, 1.0);

    if (model.kind == NoiseKind::white) {
        GridField f = GridField::zeros_centered(std::move(shape));
        for (double& v : f.data) v = model.sigma * normal(rng);
        return f;
    }
    if (model.kind != NoiseKind::gaussian_kernel)
        throw std::invalid_argument("unsupported noise kind");

    const std::vector<double> taps = detail::kernel_filter_taps(model.length_scale);
    const std::int64_t radius = static_cast<std::int64_t>(taps.size()) - 1;
    const int d = static_cast<int>(shape.size());
    index_vec padded = shape;
    for (auto& s : padded) s += 2 * radius;
    GridField f = GridField::zeros_centered(padded);
    for (double& v : f.data) v = normal(rng);
    for (int a = 0; a < d; ++a) f = detail::filter_axis(f, taps, a);
    GridField out = GridField::zeros_centered(std::move(shape));
    // filtering preserved the centered coordinates; re-anchor and scale
    out.data = std::move(f.data);
    for (double& v : out.data) v *= model.sigma;
    return out;
}

}  // namespace lsmdet
