#pragma once

// d-dimensional real fields on a regular unit-spaced integer grid, plus the
// SDGF binary file format shared by every other module.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsmdet {

using index_vec = std::vector<std::int64_t>;

/// Thrown on malformed or unreadable data files.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// =============================================================================
// GridField
// =============================================================================

/// Real-valued field on a regular grid. `origin[a]` is the grid coordinate of
/// data index 0 along axis `a`, so the field covers coordinates
/// [origin[a], origin[a] + shape[a] - 1]. Data is row-major.
struct GridField {
    index_vec shape;
    index_vec origin;
    std::vector<double> data;

    int ndim() const { return static_cast<int>(shape.size()); }

    std::int64_t size() const {
        std::int64_t n = 1;
        for (auto s : shape) n *= s;
        return n;
    }

    std::int64_t lo(int axis) const { return origin[axis]; }
    std::int64_t hi(int axis) const { return origin[axis] + shape[axis] - 1; }

    static index_vec centered_origin(const index_vec& shape) {
        index_vec org(shape.size());
        for (std::size_t a = 0; a < shape.size(); ++a) org[a] = -(shape[a] / 2);
        return org;
    }

    static GridField zeros(index_vec shape, index_vec origin) {
        GridField f;
        std::int64_t n = 1;
        for (auto s : shape) {
            if (s <= 0) throw std::invalid_argument("grid shape must be positive");
            n *= s;
        }
        if (origin.size() != shape.size())
            throw std::invalid_argument("origin/shape rank mismatch");
        f.shape = std::move(shape);
        f.origin = std::move(origin);
        f.data.assign(static_cast<std::size_t>(n), 0.0);
        return f;
    }

    static GridField zeros_centered(index_vec shape) {
        index_vec org = centered_origin(shape);
        return zeros(std::move(shape), std::move(org));
    }

    /// Row-major index of grid coordinates `c` (one per axis).
    std::int64_t linear_index(std::span<const std::int64_t> c) const {
        std::int64_t idx = 0;
        for (int a = 0; a < ndim(); ++a) idx = idx * shape[a] + (c[a] - origin[a]);
        return idx;
    }

    void coords_of(std::int64_t idx, index_vec& c) const {
        c.resize(shape.size());
        for (int a = ndim() - 1; a >= 0; --a) {
            c[a] = origin[a] + idx % shape[a];
            idx /= shape[a];
        }
    }

    bool contains(std::span<const std::int64_t> c) const {
        for (int a = 0; a < ndim(); ++a)
            if (c[a] < lo(a) || c[a] > hi(a)) return false;
        return true;
    }

    double at(std::span<const std::int64_t> c) const { return data[linear_index(c)]; }
    double& at(std::span<const std::int64_t> c) { return data[linear_index(c)]; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data) m = std::max(m, std::abs(v));
        return m;
    }
};

/// Visit every coordinate tuple of `shape` offset by `origin`, row-major.
inline void for_each_coord(const index_vec& shape, const index_vec& origin,
                           const std::function<void(const index_vec&)>& fn) {
    const int d = static_cast<int>(shape.size());
    index_vec c(origin);
    while (true) {
        fn(c);
        int a = d - 1;
        while (a >= 0) {
            if (++c[a] <= origin[a] + shape[a] - 1) break;
            c[a] = origin[a];
            --a;
        }
        if (a < 0) return;
    }
}

// =============================================================================
// GridBox
// =============================================================================

/// Hyper cube of side `side` centered at integer coordinates `center`;
/// membership is ||t - center||_inf <= side/2 (closed) or < side/2 (open).
struct GridBox {
    index_vec center;
    double side = 0.0;
    bool closed = true;

    bool contains(std::span<const std::int64_t> t) const {
        for (std::size_t a = 0; a < center.size(); ++a) {
            const double dist = std::abs(static_cast<double>(t[a] - center[a]));
            if (closed ? dist > side / 2.0 : dist >= side / 2.0) return false;
        }
        return true;
    }

    /// Inclusive integer coordinate range covered along one axis.
    std::pair<std::int64_t, std::int64_t> axis_range(int axis) const {
        const double h = side / 2.0;
        const double c = static_cast<double>(center[axis]);
        std::int64_t lo, hi;
        if (closed) {
            lo = static_cast<std::int64_t>(std::ceil(c - h));
            hi = static_cast<std::int64_t>(std::floor(c + h));
        } else {
            lo = static_cast<std::int64_t>(std::floor(c - h)) + 1;
            hi = static_cast<std::int64_t>(std::ceil(c + h)) - 1;
        }
        return {lo, hi};
    }

    std::int64_t points_per_axis(int axis) const {
        auto [lo, hi] = axis_range(axis);
        return hi >= lo ? hi - lo + 1 : 0;
    }
};

// =============================================================================
// SDGF binary format
// =============================================================================
//
// Layout (little endian):
//   magic   4 bytes  "SDGF"
//   version u16      (currently 1)
//   ndim    u16
//   shape   ndim x u64
//   payload prod(shape) x f64, row-major
//
// The format carries no origin; fields load with the centered-at-zero
// convention (origin[a] = -shape[a]/2).

namespace detail {

inline void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline bool get_bytes(std::ifstream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount()) == n;
}

}  // namespace detail

inline void write_grid(const GridField& f, const std::string& path) {
    if (!f.all_finite()) throw std::invalid_argument("grid contains non-finite values");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    detail::put_bytes(out, "SDGF", 4);
    const std::uint16_t version = 1;
    const std::uint16_t nd = static_cast<std::uint16_t>(f.ndim());
    detail::put_bytes(out, &version, 2);
    detail::put_bytes(out, &nd, 2);
    for (auto s : f.shape) {
        const std::uint64_t u = static_cast<std::uint64_t>(s);
        detail::put_bytes(out, &u, 8);
    }
    detail::put_bytes(out, f.data.data(), f.data.size() * 8);
    if (!out) throw io_error("write failed: " + path);
}

inline GridField read_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    char magic[4];
    if (!detail::get_bytes(in, magic, 4) || std::memcmp(magic, "SDGF", 4) != 0)
        throw io_error("bad magic: " + path);
    std::uint16_t version = 0, nd = 0;
    if (!detail::get_bytes(in, &version, 2) || !detail::get_bytes(in, &nd, 2))
        throw io_error("truncated payload: " + path);
    if (version != 1) throw io_error("unsupported version: " + path);
    if (nd == 0 || nd > 16) throw io_error("bad ndim: " + path);
    index_vec shape(nd);
    std::int64_t n = 1;
    for (int a = 0; a < nd; ++a) {
        std::uint64_t u = 0;
        if (!detail::get_bytes(in, &u, 8)) throw io_error("truncated payload: " + path);
        if (u == 0 || u > (1ull << 40)) throw io_error("bad shape: " + path);
        shape[a] = static_cast<std::int64_t>(u);
        n *= shape[a];
    }
    GridField f = GridField::zeros_centered(std::move(shape));
    if (!detail::get_bytes(in, f.data.data(), static_cast<std::size_t>(n) * 8))
        throw io_error("payload size mismatch: " + path);
    char extra;
    if (in.read(&extra, 1); in.gcount() != 0)
        throw io_error("payload size mismatch: " + path);
    if (!f.all_finite()) throw io_error("non-finite payload: " + path);
    return f;
}

}  // namespace lsmdet
