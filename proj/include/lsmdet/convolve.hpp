#pragma once

// Exact linear convolution on grids. Small kernels go through the direct sum;
// everything else through FFTW r2c/c2r transforms with zero padding. Both
// paths track the output origin so that evaluation at grid coordinates
// matches the discrete convolution (f*g)(t) = sum_s f(s) g(t-s).

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <span>

#include "lsmdet/grid.hpp"

namespace lsmdet {

namespace detail {

// FFTW planning is not thread safe; execution with the new-array interface is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Smallest 2^a 3^b 5^c >= n (sizes FFTW handles at full speed).
inline std::int64_t next_fast_size(std::int64_t n) {
    if (n <= 2) return std::max<std::int64_t>(n, 1);
    for (std::int64_t m = n;; ++m) {
        std::int64_t k = m;
        while (k % 2 == 0) k /= 2;
        while (k % 3 == 0) k /= 3;
        while (k % 5 == 0) k /= 5;
        if (k == 1) return m;
    }
}

struct FftwBuffer {
    double* real = nullptr;
    fftw_complex* cplx = nullptr;
    FftwBuffer(std::size_t nreal, std::size_t ncplx) {
        real = fftw_alloc_real(nreal);
        cplx = fftw_alloc_complex(ncplx);
        if (!real || !cplx) throw std::bad_alloc();
    }
    ~FftwBuffer() {
        fftw_free(real);
        fftw_free(cplx);
    }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

/// Copy `src` into the corner of a zero-initialized row-major buffer of
/// extents `padded`.
inline void embed(const GridField& src, std::span<const std::int64_t> padded, double* dst) {
    const int d = src.ndim();
    std::int64_t total = 1;
    for (int a = 0; a < d; ++a) total *= padded[a];
    std::fill(dst, dst + total, 0.0);
    index_vec c(static_cast<std::size_t>(d), 0);
    std::int64_t src_idx = 0;
    const std::int64_t row = src.shape[d - 1];
    while (true) {
        std::int64_t dst_idx = 0;
        for (int a = 0; a < d; ++a) dst_idx = dst_idx * padded[a] + c[a];
        std::copy(src.data.begin() + src_idx, src.data.begin() + src_idx + row, dst + dst_idx);
        src_idx += row;
        int a = d - 2;
        while (a >= 0) {
            if (++c[a] < src.shape[a]) break;
            c[a] = 0;
            --a;
        }
        if (a < 0) return;
    }
}

/// Extract the row-major block of extents `shape` starting at `start` from a
/// padded buffer of extents `padded`.
inline void extract(const double* src, std::span<const std::int64_t> padded,
                    std::span<const std::int64_t> start, GridField& dst) {
    const int d = dst.ndim();
    index_vec c(static_cast<std::size_t>(d), 0);
    std::int64_t dst_idx = 0;
    const std::int64_t row = dst.shape[d - 1];
    while (true) {
        std::int64_t src_idx = 0;
        for (int a = 0; a < d; ++a) src_idx = src_idx * padded[a] + (start[a] + c[a]);
        std::copy(src + src_idx, src + src_idx + row, dst.data.begin() + dst_idx);
        dst_idx += row;
        int a = d - 2;
        while (a >= 0) {
            if (++c[a] < dst.shape[a]) break;
            c[a] = 0;
            --a;
        }
        if (a < 0) return;
    }
}

}  // namespace detail

// =============================================================================
// SpectralCorrelator
// =============================================================================

/// Precomputed spectra of the index-reversed functions of a basis, bound to a
/// fixed input shape. correlate() returns (y * reversed(psi_j)) restricted to
/// the valid region (kernel fully inside y) for every j. Instances are
/// immutable after construction and safe to share across threads.
class SpectralCorrelator {
public:
    SpectralCorrelator(const std::vector<GridField>& kernels, index_vec input_shape)
        : input_shape_(std::move(input_shape)) {
        if (kernels.empty()) throw std::invalid_argument("empty kernel set");
        const int d = kernels.front().ndim();
        if (static_cast<int>(input_shape_.size()) != d)
            throw std::invalid_argument("dimension mismatch");
        kernel_shape_ = kernels.front().shape;
        kernel_origin_ = kernels.front().origin;
        padded_.resize(d);
        valid_shape_.resize(d);
        for (int a = 0; a < d; ++a) {
            if (input_shape_[a] < kernel_shape_[a])
                throw std::invalid_argument("input smaller than kernel support");
            padded_[a] = detail::next_fast_size(input_shape_[a] + kernel_shape_[a] - 1);
            valid_shape_[a] = input_shape_[a] - kernel_shape_[a] + 1;
        }
        n_real_ = 1;
        for (int a = 0; a < d; ++a) n_real_ *= padded_[a];
        n_cplx_ = n_real_ / padded_[d - 1] * (padded_[d - 1] / 2 + 1);
        scale_ = 1.0 / static_cast<double>(n_real_);

        std::vector<int> n(padded_.begin(), padded_.end());
        detail::FftwBuffer buf(static_cast<std::size_t>(n_real_),
                               static_cast<std::size_t>(n_cplx_));
        {
            std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
            fwd_ = fftw_plan_dft_r2c(d, n.data(), buf.real, buf.cplx, FFTW_ESTIMATE);
            inv_ = fftw_plan_dft_c2r(d, n.data(), buf.cplx, buf.real, FFTW_ESTIMATE);
            if (!fwd_ || !inv_) throw std::runtime_error("fftw planning failed");
        }

        spectra_.reserve(kernels.size());
        for (const GridField& k : kernels) {
            if (k.shape != kernel_shape_)
                throw std::invalid_argument("kernels must share one shape");
            GridField rev = reversed_copy(k);
            detail::embed(rev, padded_, buf.real);
            fftw_execute_dft_r2c(fwd_, buf.real, buf.cplx);
            spectra_.emplace_back(reinterpret_cast<std::complex<double>*>(buf.cplx),
                                  reinterpret_cast<std::complex<double>*>(buf.cplx) + n_cplx_);
        }
    }

    ~SpectralCorrelator() {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
    }

    SpectralCorrelator(const SpectralCorrelator&) = delete;
    SpectralCorrelator& operator=(const SpectralCorrelator&) = delete;

    std::size_t count() const { return spectra_.size(); }
    const index_vec& valid_shape() const { return valid_shape_; }

    index_vec valid_origin(const GridField& y) const {
        index_vec org(y.origin);
        const int d = y.ndim();
        for (int a = 0; a < d; ++a) org[a] -= kernel_origin_[a];
        return org;
    }

    /// All kernel correlations of `y` on the valid region.
    std::vector<GridField> correlate(const GridField& y) const {
        std::vector<GridField> out;
        out.reserve(count());
        correlate(y, [&](std::size_t, GridField&& f) { out.push_back(std::move(f)); });
        return out;
    }

    /// Streaming variant: sink(j, field) is called in index order.
    template <typename Sink>
    void correlate(const GridField& y, Sink&& sink) const {
        if (y.shape != input_shape_) throw std::invalid_argument("input shape mismatch");
        const int d = y.ndim();
        detail::FftwBuffer buf(static_cast<std::size_t>(n_real_),
                               static_cast<std::size_t>(n_cplx_));
        std::vector<std::complex<double>> yhat(static_cast<std::size_t>(n_cplx_));
        detail::embed(y, padded_, buf.real);
        fftw_execute_dft_r2c(fwd_, buf.real, buf.cplx);
        std::memcpy(static_cast<void*>(yhat.data()), buf.cplx,
                    static_cast<std::size_t>(n_cplx_) * sizeof(fftw_complex));

        index_vec start(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a) start[a] = kernel_shape_[a] - 1;
        const index_vec org = valid_origin(y);
        for (std::size_t j = 0; j < spectra_.size(); ++j) {
            auto* dst = reinterpret_cast<std::complex<double>*>(buf.cplx);
            for (std::int64_t i = 0; i < n_cplx_; ++i)
                dst[i] = yhat[static_cast<std::size_t>(i)] * spectra_[j][static_cast<std::size_t>(i)] * scale_;
            fftw_execute_dft_c2r(inv_, buf.cplx, buf.real);
            GridField f = GridField::zeros(valid_shape_, org);
            detail::extract(buf.real, padded_, start, f);
            sink(j, std::move(f));
        }
    }

    /// Index reversal: reversed(g)(t) = g(-t), origin tracked.
    static GridField reversed_copy(const GridField& g) {
        GridField r;
        r.shape = g.shape;
        r.origin.resize(g.shape.size());
        for (int a = 0; a < g.ndim(); ++a) r.origin[a] = -(g.origin[a] + g.shape[a] - 1);
        r.data.assign(g.data.size(), 0.0);
        std::reverse_copy(g.data.begin(), g.data.end(), r.data.begin());
        return r;
    }

private:
    index_vec input_shape_, kernel_shape_, kernel_origin_, padded_, valid_shape_;
    std::int64_t n_real_ = 0, n_cplx_ = 0;
    double scale_ = 1.0;
    fftw_plan fwd_ = nullptr, inv_ = nullptr;
    std::vector<std::vector<std::complex<double>>> spectra_;
};

// =============================================================================
// convolve_linear
// =============================================================================

namespace detail {

inline GridField convolve_direct(const GridField& f, const GridField& g) {
    const int d = f.ndim();
    index_vec out_shape(static_cast<std::size_t>(d)), out_org(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
        out_shape[a] = f.shape[a] + g.shape[a] - 1;
        out_org[a] = f.origin[a] + g.origin[a];
    }
    GridField out = GridField::zeros(std::move(out_shape), std::move(out_org));
    index_vec cf(static_cast<std::size_t>(d), 0), cg(static_cast<std::size_t>(d), 0);
    const std::int64_t nf = f.size(), ng = g.size();
    for (std::int64_t i = 0; i < nf; ++i) {
        const double fv = f.data[static_cast<std::size_t>(i)];
        if (fv != 0.0) {
            std::fill(cg.begin(), cg.end(), 0);
            for (std::int64_t j = 0; j < ng; ++j) {
                std::int64_t idx = 0;
                for (int a = 0; a < d; ++a) idx = idx * out.shape[a] + cf[a] + cg[a];
                out.data[static_cast<std::size_t>(idx)] += fv * g.data[static_cast<std::size_t>(j)];
                int a = d - 1;
                while (a >= 0 && ++cg[a] == g.shape[a]) cg[a--] = 0;
            }
        }
        int a = d - 1;
        while (a >= 0 && ++cf[a] == f.shape[a]) cf[a--] = 0;
    }
    return out;
}

}  // namespace detail

/// Full discrete linear convolution (output extent f+g-1 per axis).
inline GridField convolve_linear(const GridField& f, const GridField& g) {
    if (f.ndim() != g.ndim()) throw std::invalid_argument("dimension mismatch");
    if (f.data.empty() || g.data.empty()) throw std::invalid_argument("empty input");
    for (int a = 0; a < f.ndim(); ++a)
        if (g.shape[a] > f.shape[a])
            throw std::invalid_argument("kernel larger than field along axis " + std::to_string(a));
    if (!f.all_finite() || !g.all_finite())
        throw std::invalid_argument("non-finite input");

    // The direct path wins for small work; it is also the exact reference.
    if (f.size() * g.size() <= 1 << 18) return detail::convolve_direct(f, g);

    // Spectral path: zero-pad both inputs past f+g-1, multiply spectra.
    const int d = f.ndim();
    index_vec padded(static_cast<std::size_t>(d)), out_shape(static_cast<std::size_t>(d)),
        out_org(static_cast<std::size_t>(d));
    std::int64_t n_real = 1;
    for (int a = 0; a < d; ++a) {
        out_shape[a] = f.shape[a] + g.shape[a] - 1;
        out_org[a] = f.origin[a] + g.origin[a];
        padded[a] = detail::next_fast_size(out_shape[a]);
        n_real *= padded[a];
    }
    const std::int64_t n_cplx = n_real / padded[static_cast<std::size_t>(d) - 1] *
                                (padded[static_cast<std::size_t>(d) - 1] / 2 + 1);
    std::vector<int> n(padded.begin(), padded.end());
    detail::FftwBuffer a_buf(static_cast<std::size_t>(n_real), static_cast<std::size_t>(n_cplx));
    detail::FftwBuffer b_buf(static_cast<std::size_t>(n_real), static_cast<std::size_t>(n_cplx));
    fftw_plan fwd, inv;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fwd = fftw_plan_dft_r2c(d, n.data(), a_buf.real, a_buf.cplx, FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r(d, n.data(), a_buf.cplx, a_buf.real, FFTW_ESTIMATE);
        if (!fwd || !inv) throw std::runtime_error("fftw planning failed");
    }
    detail::embed(f, padded, a_buf.real);
    detail::embed(g, padded, b_buf.real);
    fftw_execute_dft_r2c(fwd, a_buf.real, a_buf.cplx);
    fftw_execute_dft_r2c(fwd, b_buf.real, b_buf.cplx);
    auto* A = reinterpret_cast<std::complex<double>*>(a_buf.cplx);
    auto* B = reinterpret_cast<std::complex<double>*>(b_buf.cplx);
    const double scale = 1.0 / static_cast<double>(n_real);
    for (std::int64_t i = 0; i < n_cplx; ++i) A[i] *= B[i] * scale;
    fftw_execute_dft_c2r(inv, a_buf.cplx, a_buf.real);
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }
    GridField out = GridField::zeros(out_shape, out_org);
    index_vec start(static_cast<std::size_t>(d), 0);
    detail::extract(a_buf.real, padded, start, out);
    return out;
}

}  // namespace lsmdet
