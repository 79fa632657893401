#pragma once

// Candidate peaks by greedy maxima with box erasure, and acceptance of
// candidates by the Bonferroni or Benjamini-Hochberg procedure against a
// Monte Carlo calibration table.

#include <queue>

#include "lsmdet/calibrate.hpp"
#include "lsmdet/grid.hpp"

namespace lsmdet {

// =============================================================================
// Candidate selection
// =============================================================================

/// Greedy peak picks in score order. Every pair of points is at
/// infinity-distance >= r/2 and the erased boxes cover the domain.
struct CandidateSet {
    std::vector<index_vec> points;
    std::vector<double> scores;  // nonincreasing
    double r = 0.0;
};

/// Iteratively take the argmax of the remaining field, erase the open box
/// C(t, r) around it, repeat until the field is exhausted. Ties break toward
/// the smallest row-major index.
inline CandidateSet select_candidates(const GridField& s_y, double r) {
    if (s_y.data.empty()) throw std::invalid_argument("empty field");
    if (r < 1.0) throw std::invalid_argument("r must be at least 1");
    const int d = s_y.ndim();

    struct Entry {
        double value;
        std::int64_t index;
    };
    struct Order {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.value != b.value) return a.value < b.value;  // max-heap on value
            return a.index > b.index;                          // then smallest index on top
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, Order> heap;
    {
        std::vector<Entry> entries(static_cast<std::size_t>(s_y.size()));
        for (std::int64_t i = 0; i < s_y.size(); ++i)
            entries[static_cast<std::size_t>(i)] = {s_y.data[static_cast<std::size_t>(i)], i};
        heap = std::priority_queue<Entry, std::vector<Entry>, Order>(Order{}, std::move(entries));
    }

    std::vector<char> alive(static_cast<std::size_t>(s_y.size()), 1);
    CandidateSet out;
    out.r = r;
    index_vec t, lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
    while (!heap.empty()) {
        const Entry top = heap.top();
        heap.pop();
        if (!alive[static_cast<std::size_t>(top.index)]) continue;
        s_y.coords_of(top.index, t);
        out.points.push_back(t);
        out.scores.push_back(top.value);
        // erase the open box: coordinates with |s - t| < r/2 on every axis
        for (int a = 0; a < d; ++a) {
            const double h = r / 2.0;
            lo[a] = std::max<std::int64_t>(
                s_y.lo(a), static_cast<std::int64_t>(std::floor(t[a] - h)) + 1);
            hi[a] = std::min<std::int64_t>(
                s_y.hi(a), static_cast<std::int64_t>(std::ceil(t[a] + h)) - 1);
        }
        index_vec shape(static_cast<std::size_t>(d));
        bool nonempty = true;
        for (int a = 0; a < d; ++a) {
            shape[a] = hi[a] - lo[a] + 1;
            nonempty &= shape[a] > 0;
        }
        if (nonempty)
            for_each_coord(shape, lo, [&](const index_vec& c) {
                alive[static_cast<std::size_t>(s_y.linear_index(c))] = 0;
            });
    }
    return out;
}

/// Number of hypothesis-testing bins M_L = ceil((2L/r)^d).
inline std::int64_t m_l_bins(double domain_side, double r, int d) {
    if (domain_side <= 0.0 || r <= 0.0) throw std::invalid_argument("bad M_L inputs");
    const double v = std::pow(2.0 * domain_side / r, d);
    return static_cast<std::int64_t>(std::ceil(v - 1e-12));
}

// =============================================================================
// Multiple testing
// =============================================================================

enum class Procedure { bonferroni, bh };

inline const char* procedure_name(Procedure p) {
    return p == Procedure::bonferroni ? "bonferroni" : "bh";
}

struct DetectionResult {
    CandidateSet candidates;
    std::vector<double> p_values;
    Procedure procedure = Procedure::bonferroni;
    double alpha = 0.0;
    std::int64_t m_l_bins = 0;
    double threshold_u = std::numeric_limits<double>::infinity();
    std::vector<std::int64_t> accepted;  // indices into candidates
};

/// Accept candidates with p <= alpha / M_L. The score threshold is the
/// smallest table sample whose right-tail fraction is <= the target level
/// (the conservative direction on an empirical step function).
inline DetectionResult bonferroni_select(const CandidateSet& candidates,
                                         const CalibrationTable& table, double alpha,
                                         std::int64_t m_l) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    if (table.samples.empty()) throw std::invalid_argument("empty calibration table");
    const double target = alpha / static_cast<double>(m_l);
    const auto n = static_cast<std::int64_t>(table.samples.size());
    const auto allowed = static_cast<std::int64_t>(std::floor(target * static_cast<double>(n)));
    if (allowed < 1)
        throw std::invalid_argument("calibration table too small for requested level");

    DetectionResult res;
    res.candidates = candidates;
    res.procedure = Procedure::bonferroni;
    res.alpha = alpha;
    res.m_l_bins = m_l;
    res.threshold_u = table.samples[static_cast<std::size_t>(n - allowed - 1)];
    res.p_values.reserve(candidates.scores.size());
    for (std::size_t i = 0; i < candidates.scores.size(); ++i) {
        const double p = p_value(table, candidates.scores[i]);
        res.p_values.push_back(p);
        if (p <= target) res.accepted.push_back(static_cast<std::int64_t>(i));
    }
    return res;
}

/// Benjamini-Hochberg: sort p ascending, find the largest k with
/// p_(k) <= k alpha / M_L, accept exactly those k candidates. p-value ties
/// break by score descending.
inline DetectionResult bh_select(const CandidateSet& candidates, const CalibrationTable& table,
                                 double alpha, std::int64_t m_l) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    if (table.samples.empty()) throw std::invalid_argument("empty calibration table");

    DetectionResult res;
    res.candidates = candidates;
    res.procedure = Procedure::bh;
    res.alpha = alpha;
    res.m_l_bins = m_l;
    const std::size_t m = candidates.scores.size();
    res.p_values.resize(m);
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) {
        res.p_values[i] = p_value(table, candidates.scores[i]);
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (res.p_values[a] != res.p_values[b]) return res.p_values[a] < res.p_values[b];
        if (candidates.scores[a] != candidates.scores[b])
            return candidates.scores[a] > candidates.scores[b];
        return a < b;
    });
    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (res.p_values[order[i]] <=
            static_cast<double>(i + 1) * alpha / static_cast<double>(m_l))
            k = i + 1;
    if (k == 0) return res;
    double cutoff = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        res.accepted.push_back(static_cast<std::int64_t>(order[i]));
        cutoff = std::min(cutoff, candidates.scores[order[i]]);
    }
    std::sort(res.accepted.begin(), res.accepted.end());
    res.threshold_u = cutoff;
    return res;
}

// =============================================================================
// CSV serialization
// =============================================================================

inline void write_detection_csv(const DetectionResult& res, std::ostream& out) {
    const int d = res.candidates.points.empty()
                      ? 0
                      : static_cast<int>(res.candidates.points.front().size());
    out << "index";
    for (int a = 0; a < d; ++a) out << ",coord_" << a;
    out << ",score,p_value,accepted\n";
    std::vector<char> mark(res.candidates.points.size(), 0);
    for (auto i : res.accepted) mark[static_cast<std::size_t>(i)] = 1;
    out << std::setprecision(17);
    for (std::size_t i = 0; i < res.candidates.points.size(); ++i) {
        out << i;
        for (int a = 0; a < d; ++a) out << ',' << res.candidates.points[i][a];
        out << ',' << res.candidates.scores[i] << ',' << res.p_values[i] << ','
            << static_cast<int>(mark[i]) << '\n';
    }
}

inline void write_detection_csv(const DetectionResult& res, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    write_detection_csv(res, out);
}

}  // namespace lsmdet
