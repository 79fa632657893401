#pragma once

// Localization radius certification. The D-matrix collects basis
// cross-correlations at a pair of offsets,
//   D_{k,s}(oi, ol) = sum_j <psi_k, shift(psi_j, oi)> <psi_s, shift(psi_j, ol)>,
// and the criterion
//   g(delta) = sup_{t in C(0,delta)} lambda_min(D(t,t)) -
//              sup_{admissible center configs} sum over ordered pairs of
//              the spectral bound of D(-tau_l, -tau_j)
// certifies delta whenever g(delta) > 0. The search walks delta up a stride
// grid and re-verifies each coarse positive at stride 1 around the
// maximizing configuration.

#include <Eigen/Dense>

#include <iomanip>
#include <map>
#include <unordered_map>
#include <optional>

#include "lsmdet/basis.hpp"
#include "lsmdet/convolve.hpp"

namespace lsmdet {

struct DMatrix {
    Eigen::MatrixXd entries;
    index_vec offset_i, offset_l;

    bool is_symmetric(double tol = 1e-12) const {
        const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
        return (entries - entries.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
    }
};

namespace detail {

/// All pairwise cross-correlation maps c(k,j,v) = <psi_k, shift(psi_j, v)>,
/// v in [-(B-1), B-1]^d. corr[k][j] covers exactly that range; zero outside.
class CorrelationCache {
public:
    explicit CorrelationCache(const BasisSet& basis)
        : m_(basis.count()), d_(basis.ndim()) {
        corr_.resize(static_cast<std::size_t>(m_));
        for (int k = 0; k < m_; ++k) {
            corr_[static_cast<std::size_t>(k)].reserve(static_cast<std::size_t>(m_));
            for (int j = 0; j < m_; ++j)
                corr_[static_cast<std::size_t>(k)].push_back(convolve_linear(
                    basis.functions[static_cast<std::size_t>(k)],
                    SpectralCorrelator::reversed_copy(
                        basis.functions[static_cast<std::size_t>(j)])));
        }
    }

    int count() const { return m_; }
    int ndim() const { return d_; }

    double value(int k, int j, std::span<const std::int64_t> v) const {
        const GridField& f = corr_[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        for (int a = 0; a < d_; ++a)
            if (v[a] < f.lo(a) || v[a] > f.hi(a)) return 0.0;
        return f.at(v);
    }

    Eigen::MatrixXd d_matrix(std::span<const std::int64_t> oi,
                             std::span<const std::int64_t> ol) const {
        Eigen::MatrixXd ci(m_, m_), cl(m_, m_);
        for (int k = 0; k < m_; ++k)
            for (int j = 0; j < m_; ++j) {
                ci(k, j) = value(k, j, oi);
                cl(k, j) = value(k, j, ol);
            }
        return ci * cl.transpose();
    }

private:
    int m_, d_;
    std::vector<std::vector<GridField>> corr_;
};

}  // namespace detail

/// D at a pair of integer offsets (t - tau_i, t - tau_l). Symmetric positive
/// semidefinite when the offsets coincide; zero when either offset has
/// infinity-norm >= B.
inline DMatrix d_matrix(const BasisSet& basis, const index_vec& offset_i,
                        const index_vec& offset_l) {
    if (static_cast<int>(offset_i.size()) != basis.ndim() ||
        static_cast<int>(offset_l.size()) != basis.ndim())
        throw std::invalid_argument("offset rank mismatch");
    detail::CorrelationCache cache(basis);
    DMatrix d;
    d.offset_i = offset_i;
    d.offset_l = offset_l;
    d.entries = cache.d_matrix(offset_i, offset_l);
    return d;
}

/// (lambda_min, max |lambda|) of a symmetric D via a dense symmetric
/// eigensolver.
inline std::pair<double, double> lambda_bounds(const DMatrix& d) {
    if (!d.is_symmetric(1e-9)) throw std::invalid_argument("D matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.compute(d.entries, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigensolver failed to converge (ill-conditioned basis)");
    const auto& ev = es.eigenvalues();
    const double lo = ev(0), hi = ev(ev.size() - 1);
    return {lo, std::max(std::abs(lo), std::abs(hi))};
}

namespace detail {

inline double lambda_min_sym(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.compute(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed to converge");
    return es.eigenvalues()(0);
}

/// Valid bilinear-form bound: max |eigenvalue| when symmetric (the diagonal
/// pairs), largest singular value otherwise. For the cross pairs the largest
/// singular value is computed as sqrt(lambda_max(D^T D)).
inline double spectral_bound(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale) {
        es.compute(m, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("eigensolver failed to converge");
        const auto& ev = es.eigenvalues();
        return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    }
    es.compute(m.transpose() * m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigensolver failed to converge");
    return std::sqrt(std::max(0.0, es.eigenvalues()(es.eigenvalues().size() - 1)));
}

struct GEvaluation {
    double g = 0.0;
    double first_term = 0.0;
    double second_term = 0.0;
    std::vector<index_vec> max_config;  // centers attaining the second sup
};

/// Shared state for repeated g evaluations over one basis.
class GEvaluator {
public:
    explicit GEvaluator(const BasisSet& basis)
        : cache_(basis), support_(basis.support), d_(basis.ndim()) {}

    std::int64_t support() const { return support_; }

    /// First term: sup over the open box C(0,delta) (stride lattice, origin
    /// always included) of lambda_min(D(t,t)).
    double first_term(double delta, std::int64_t stride) const {
        const std::int64_t reach =
            static_cast<std::int64_t>(std::ceil(delta / 2.0)) - 1;
        double best = -std::numeric_limits<double>::infinity();
        index_vec t(static_cast<std::size_t>(d_), 0);
        enumerate_lattice(t, 0, reach, stride, [&](const index_vec& pt) {
            if (!inside_open_box(pt, delta)) return;
            best = std::max(best, lambda_min_sym(cache_.d_matrix(pt, pt)));
        });
        // t = 0 is on every lattice
        index_vec zero(static_cast<std::size_t>(d_), 0);
        best = std::max(best, lambda_min_sym(cache_.d_matrix(zero, zero)));
        return best;
    }

    /// Second term: sup over admissible center configurations of the ordered
    /// pair sum. Admissible: ||tau||_inf in [delta/2, B-1], pairwise
    /// separation >= B + 3 delta / 2, at most 3^d - 1 centers.
    GEvaluation second_term(double delta, std::int64_t stride,
                            const std::vector<index_vec>* restrict_to = nullptr) {
        std::vector<index_vec> candidates;
        if (restrict_to) {
            for (const index_vec& c : *restrict_to)
                if (admissible(c, delta)) candidates.push_back(c);
        } else {
            index_vec t(static_cast<std::size_t>(d_), 0);
            enumerate_lattice(t, 0, support_ - 1, stride, [&](const index_vec& pt) {
                if (admissible(pt, delta)) candidates.push_back(pt);
            });
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

        const std::size_t n = candidates.size();
        const auto cap = static_cast<std::size_t>(std::llround(std::pow(3.0, d_))) - 1;
        const double min_sep = static_cast<double>(support_) + 1.5 * delta;

        // dense compatibility and pair-weight matrices
        std::vector<char> adj(n * n, 0);
        std::vector<double> w(n * n, 0.0);
        double max_pair_weight = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i * n + i] = cached_weight(candidates[i], candidates[i]);
            max_pair_weight = std::max(max_pair_weight, w[i * n + i]);
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                std::int64_t dist = 0;
                for (int a = 0; a < d_; ++a)
                    dist = std::max(dist, std::abs(candidates[i][a] - candidates[j][a]));
                if (static_cast<double>(dist) < min_sep) continue;
                adj[i * n + j] = adj[j * n + i] = 1;
                const double v = cached_weight(candidates[i], candidates[j]);
                w[i * n + j] = v;
                w[j * n + i] = v;
            }

        GEvaluation eval;
        std::vector<std::uint32_t> config;
        auto record = [&](double sum) {
            eval.second_term = sum;
            eval.max_config.clear();
            for (auto idx : config) eval.max_config.push_back(candidates[idx]);
        };
        std::function<void(std::size_t, double)> dfs = [&](std::size_t start, double sum) {
            if (sum > eval.second_term) record(sum);
            if (config.size() == cap) return;
            const double c = static_cast<double>(config.size());
            const double most = static_cast<double>(cap);
            if (sum + (most * most - c * c) * max_pair_weight <= eval.second_term) return;
            for (std::size_t i = start; i < n; ++i) {
                bool compatible = true;
                double add = w[i * n + i];
                for (auto idx : config) {
                    if (!adj[static_cast<std::size_t>(idx) * n + i]) {
                        compatible = false;
                        break;
                    }
                    add += 2.0 * w[static_cast<std::size_t>(idx) * n + i];
                }
                if (!compatible) continue;
                config.push_back(static_cast<std::uint32_t>(i));
                dfs(i + 1, sum + add);
                config.pop_back();
            }
        };
        dfs(0, 0.0);
        return eval;
    }

    /// Pair weight spectral_bound(D(0, tau_a, tau_b)), memoized across delta
    /// evaluations (keyed by packed coordinates for d <= 2).
    double cached_weight(const index_vec& a, const index_vec& b) {
        std::uint64_t key = 0;
        const bool packable = d_ <= 2;
        if (packable) {
            for (const index_vec* v : {&a, &b})
                for (auto c : *v) key = (key << 16) | static_cast<std::uint64_t>(c + support_);
            auto it = weights_.find(key);
            if (it != weights_.end()) return it->second;
        }
        index_vec na(a), nb(b);
        for (auto& v : na) v = -v;
        for (auto& v : nb) v = -v;
        const double w = spectral_bound(cache_.d_matrix(na, nb));
        if (packable) weights_.emplace(key, w);
        return w;
    }

    GEvaluation evaluate(double delta, std::int64_t stride,
                         const std::vector<index_vec>* restrict_to = nullptr) {
        GEvaluation eval = second_term(delta, stride, restrict_to);
        eval.first_term = first_term(delta, restrict_to ? 1 : stride);
        eval.g = eval.first_term - eval.second_term;
        return eval;
    }

    bool admissible(const index_vec& tau, double delta) const {
        std::int64_t norm = 0;
        for (auto v : tau) norm = std::max(norm, std::abs(v));
        if (norm >= support_) return false;                            // must touch I(0)
        return static_cast<double>(norm) >= delta / 2.0;               // outside C(0,delta)
    }

private:
    bool inside_open_box(const index_vec& t, double delta) const {
        for (auto v : t)
            if (std::abs(static_cast<double>(v)) >= delta / 2.0) return false;
        return true;
    }

    template <typename Fn>
    void enumerate_lattice(index_vec& t, int axis, std::int64_t reach, std::int64_t stride,
                           Fn&& fn) const {
        if (axis == d_) {
            fn(t);
            return;
        }
        for (std::int64_t v = -(reach / stride) * stride; v <= reach; v += stride) {
            t[static_cast<std::size_t>(axis)] = v;
            enumerate_lattice(t, axis + 1, reach, stride, fn);
        }
    }

    detail::CorrelationCache cache_;
    std::int64_t support_;
    int d_;
    std::unordered_map<std::uint64_t, double> weights_;
};

}  // namespace detail

/// g(delta) on the stride lattice. t = 0 always enters the first sup, so a
/// stride above delta is allowed.
inline double g_of_delta(const BasisSet& basis, double delta, std::int64_t stride) {
    if (!(delta >= 1.0 && delta <= 2.0 * static_cast<double>(basis.support)))
        throw std::invalid_argument("delta must lie in [1, 2B]");
    if (stride < 1) throw std::invalid_argument("stride must be at least 1");
    detail::GEvaluator eval(basis);
    return eval.evaluate(delta, stride).g;
}

struct DeltaCertificate {
    double delta = 0.0;
    double g_value = 0.0;
    std::int64_t stride = 1;
    std::uint64_t basis_id = 0;
};

/// Coarse g at (delta, stride) followed by the stride-1 re-evaluation on a
/// 1-pixel dilation of the maximizing configuration; returns the re-checked
/// value (equal to the coarse one when the maximizing configuration is
/// empty).
inline double certify_g(const BasisSet& basis, double delta, std::int64_t stride) {
    if (stride < 1) throw std::invalid_argument("stride must be at least 1");
    detail::GEvaluator eval(basis);
    detail::GEvaluation coarse = eval.evaluate(delta, stride);
    if (coarse.max_config.empty()) return coarse.g;
    std::vector<index_vec> neighborhood;
    index_vec shape(static_cast<std::size_t>(basis.ndim()), 3);
    for (const index_vec& c : coarse.max_config) {
        index_vec org(c);
        for (auto& v : org) v -= 1;
        for_each_coord(shape, org, [&](const index_vec& p) { neighborhood.push_back(p); });
    }
    return eval.evaluate(delta, 1, &neighborhood).g;
}

/// Smallest delta on the grid {1, 1+stride, ...} U {2B} whose coarse g is
/// positive and stays positive when re-evaluated at stride 1 on a 1-pixel
/// dilation of the maximizing configuration. Terminates by delta = 2B, where
/// the admissible set is empty.
inline DeltaCertificate estimate_delta(const BasisSet& basis, std::int64_t stride = 0) {
    if (stride == 0) stride = std::max<std::int64_t>(1, basis.support / 8);
    if (stride < 1) throw std::invalid_argument("stride must be at least 1");
    detail::GEvaluator eval(basis);
    const double max_delta = 2.0 * static_cast<double>(basis.support);

    DeltaCertificate cert;
    cert.stride = stride;
    cert.basis_id = basis_hash(basis);
    double delta = 1.0;
    while (true) {
        detail::GEvaluation coarse = eval.evaluate(delta, stride);
        if (coarse.g > 0.0) {
            // dilate the maximizing configuration by one pixel per axis and
            // re-run the configuration search at full resolution
            std::vector<index_vec> neighborhood;
            index_vec shape(static_cast<std::size_t>(basis.ndim()), 3);
            for (const index_vec& c : coarse.max_config) {
                index_vec org(c);
                for (auto& v : org) v -= 1;
                for_each_coord(shape, org,
                               [&](const index_vec& p) { neighborhood.push_back(p); });
            }
            detail::GEvaluation fine =
                coarse.max_config.empty() ? coarse : eval.evaluate(delta, 1, &neighborhood);
            if (fine.g > 0.0) {
                cert.delta = delta;
                cert.g_value = fine.g;
                return cert;
            }
        }
        if (delta >= max_delta) break;
        delta = std::min(max_delta, delta + static_cast<double>(stride));
    }
    // unreachable: at delta = 2B no center is admissible and g = lambda_min(I) = 1
    throw std::runtime_error("delta search failed to terminate");
}

inline void write_certificate(const DeltaCertificate& cert, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << std::setprecision(17);
    out << "delta = " << cert.delta << "\n";
    out << "g_value = " << cert.g_value << "\n";
    out << "stride = " << cert.stride << "\n";
    out << "basis_id = " << std::hex << cert.basis_id << std::dec << "\n";
}

inline DeltaCertificate read_certificate(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    DeltaCertificate cert;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::istringstream key_ss(line.substr(0, eq));
        std::string key;
        key_ss >> key;
        const std::string value = line.substr(eq + 1);
        if (key == "delta") cert.delta = std::stod(value);
        else if (key == "g_value") cert.g_value = std::stod(value);
        else if (key == "stride") cert.stride = std::stoll(value);
        else if (key == "basis_id") cert.basis_id = std::stoull(value, nullptr, 16);
    }
    if (cert.delta <= 0.0) throw io_error("malformed certificate: " + path);
    return cert;
}

}  // namespace lsmdet
