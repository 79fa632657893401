#pragma once

// Matching detections to ground truth and estimating FWER, FDR and power
// over repeated trials, plus the end-to-end simulation protocol: calibrate
// once per noise level, then draw fresh scene + noise per trial, detect with
// both procedures, and aggregate.

#include <boost/math/distributions/binomial.hpp>

#include "lsmdet/detect.hpp"
#include "lsmdet/localize.hpp"
#include "lsmdet/scoremap.hpp"
#include "lsmdet/synth.hpp"

namespace lsmdet {

// =============================================================================
// Trial classification
// =============================================================================

/// V = accepted points with no center within open infinity-distance delta,
/// W = accepted points with one; hit_mask deduplicates per object.
struct TrialOutcome {
    std::int64_t V = 0;
    std::int64_t W = 0;
    std::vector<char> hit_mask;

    double fdp() const {
        const double denom = std::max<std::int64_t>(V + W, 1);
        return static_cast<double>(V) / denom;
    }
    double hit_fraction() const {
        if (hit_mask.empty()) return 0.0;
        double s = 0.0;
        for (char h : hit_mask) s += h;
        return s / static_cast<double>(hit_mask.size());
    }
};

inline TrialOutcome classify(const DetectionResult& result, const Scene& scene) {
    TrialOutcome out;
    out.hit_mask.assign(scene.objects.size(), 0);
    const int d = scene.ndim;
    for (const index_vec& pt : result.candidates.points)
        if (static_cast<int>(pt.size()) != d)
            throw std::invalid_argument("geometry mismatch between result and scene");
    for (auto idx : result.accepted) {
        const index_vec& pt = result.candidates.points[static_cast<std::size_t>(idx)];
        bool hit = false;
        for (std::size_t i = 0; i < scene.objects.size(); ++i) {
            std::int64_t dist = 0;
            for (int a = 0; a < d; ++a)
                dist = std::max(dist, std::abs(pt[a] - scene.objects[i].center[a]));
            if (static_cast<double>(dist) < scene.delta) {
                hit = true;
                out.hit_mask[i] = 1;
                break;  // separated centers: delta-boxes are disjoint
            }
        }
        if (hit) ++out.W;
        else ++out.V;
    }
    return out;
}

// =============================================================================
// Aggregation
// =============================================================================

struct EvalReport {
    std::int64_t n_trials = 0;
    double fwer = 0.0, fdr = 0.0, power = 0.0;
    double fwer_se = 0.0, fdr_se = 0.0, power_se = 0.0;
};

inline EvalReport aggregate(const std::vector<TrialOutcome>& outcomes) {
    if (outcomes.empty()) throw std::invalid_argument("no trial outcomes");
    EvalReport rep;
    rep.n_trials = static_cast<std::int64_t>(outcomes.size());
    const double n = static_cast<double>(outcomes.size());
    double fdr2 = 0.0, pow2 = 0.0;
    for (const TrialOutcome& o : outcomes) {
        rep.fwer += o.V >= 1 ? 1.0 : 0.0;
        const double f = o.fdp();
        const double p = o.hit_fraction();
        rep.fdr += f;
        rep.power += p;
        fdr2 += f * f;
        pow2 += p * p;
    }
    rep.fwer /= n;
    rep.fdr /= n;
    rep.power /= n;
    rep.fwer_se = std::sqrt(std::max(0.0, rep.fwer * (1.0 - rep.fwer) / n));
    rep.fdr_se = std::sqrt(std::max(0.0, (fdr2 / n - rep.fdr * rep.fdr) / n));
    rep.power_se = std::sqrt(std::max(0.0, (pow2 / n - rep.power * rep.power) / n));
    return rep;
}

/// One-sided exact (Clopper-Pearson) upper 95% confidence bound on a
/// binomial proportion.
inline double binomial_upper95(std::int64_t successes, std::int64_t n) {
    return boost::math::binomial_distribution<double>::find_upper_bound_on_p(
        static_cast<double>(n), static_cast<double>(successes), 0.05);
}

// =============================================================================
// Experiment protocol
// =============================================================================

struct ExperimentConfig {
    std::int64_t L = 512;
    std::int64_t B = 32;
    int M = 12;
    double density = 0.5;
    double delta = 0.0;       // 0: certify via estimate_delta
    std::int64_t stride = 0;  // 0: default stride
    double alpha = 0.05;
    std::vector<double> snrs{1.0};
    std::int64_t n_sim = 10000;
    std::int64_t n_trials = 100;
    StatKind statistic = StatKind::tilde_z;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: all available
    NoiseKind noise_kind = NoiseKind::gaussian_kernel;
    double length_scale = 1.0;
    // match the projected per-object energy of a reference geometry
    // (0 disables the rescale)
    std::int64_t snr_ref_B = 0;
    int snr_ref_M = 0;

    double effective_snr(double snr) const {
        if (snr_ref_B <= 0 || snr_ref_M <= 0) return snr;
        const int d = 2;
        return snr * (static_cast<double>(M) * std::pow(static_cast<double>(snr_ref_B), d)) /
               (static_cast<double>(snr_ref_M) * std::pow(static_cast<double>(B), d));
    }
};

struct TrialRecord {
    double snr = 0.0;
    std::int64_t trial = 0;
    Procedure procedure = Procedure::bonferroni;
    std::int64_t V = 0, W = 0, N = 0;
    double fdp = 0.0, power = 0.0;
};

struct ExperimentRow {
    double snr = 0.0;
    Procedure procedure = Procedure::bonferroni;
    EvalReport report;
};

struct ExperimentResult {
    double delta = 0.0;
    double r = 0.0;
    std::vector<ExperimentRow> rows;
    std::vector<TrialRecord> trials;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.snrs.empty()) throw std::invalid_argument("no SNR values");
    if (cfg.n_trials < 1) throw std::invalid_argument("n_trials must be at least 1");
    const int d = 2;
    const BasisSet basis = fourier_bessel_basis(cfg.B, cfg.M);

    ExperimentResult result;
    result.delta = cfg.delta > 0.0 ? cfg.delta : estimate_delta(basis, cfg.stride).delta;
    result.r = 2.0 * static_cast<double>(cfg.B) + result.delta;
    const std::int64_t m_l = m_l_bins(static_cast<double>(cfg.L), result.r, d);

    const index_vec field_shape(static_cast<std::size_t>(d), cfg.L);
    const ScoreMapper mapper(basis, field_shape);

    const std::size_t n_snr = cfg.snrs.size();
    std::vector<CalibrationTable> tables(n_snr);
    std::vector<NoiseModel> models(n_snr);
    for (std::size_t s = 0; s < n_snr; ++s) {
        NoiseModel model;
        model.kind = cfg.noise_kind;
        model.length_scale = cfg.length_scale;
        model.sigma = sigma_for_snr(cfg.effective_snr(cfg.snrs[s]), 1.0, cfg.B, d);
        model.seed = derive_seed(cfg.seed, 0xCA11B000ull + s);
        models[s] = model;
        tables[s] = build_table(model, basis, result.r, cfg.n_sim, cfg.statistic, cfg.threads);
    }

    struct TrialPair {
        TrialOutcome bon, bh;
        std::int64_t n_objects = 0;
    };
    std::vector<TrialPair> outcomes(n_snr * static_cast<std::size_t>(cfg.n_trials));
    parallel_for(static_cast<std::int64_t>(outcomes.size()), cfg.threads, [&](std::int64_t i) {
        const std::size_t s = static_cast<std::size_t>(i) / cfg.n_trials;
        NoiseModel model = models[s];
        model.seed = derive_seed(cfg.seed, 0x50EEDull + static_cast<std::uint64_t>(i));
        std::mt19937_64 scene_rng = make_engine(model.seed, 0);
        Scene scene = generate_scene(cfg.L, cfg.B, cfg.M, result.delta, cfg.density, model,
                                     scene_rng, d);
        const GridField y = observe_scene(scene, basis, 1);
        const GridField s_y = mapper(y);
        const CandidateSet candidates = select_candidates(s_y, result.r);
        const DetectionResult bon = bonferroni_select(candidates, tables[s], cfg.alpha, m_l);
        const DetectionResult bh = bh_select(candidates, tables[s], cfg.alpha, m_l);
        outcomes[static_cast<std::size_t>(i)] = {classify(bon, scene), classify(bh, scene),
                                                 scene.count()};
    });

    for (std::size_t s = 0; s < n_snr; ++s) {
        std::vector<TrialOutcome> bon, bh;
        for (std::int64_t t = 0; t < cfg.n_trials; ++t) {
            const TrialPair& pair = outcomes[s * static_cast<std::size_t>(cfg.n_trials) +
                                             static_cast<std::size_t>(t)];
            bon.push_back(pair.bon);
            bh.push_back(pair.bh);
            for (Procedure proc : {Procedure::bonferroni, Procedure::bh}) {
                const TrialOutcome& o = proc == Procedure::bonferroni ? pair.bon : pair.bh;
                result.trials.push_back({cfg.snrs[s], t, proc, o.V, o.W, pair.n_objects,
                                         o.fdp(), o.hit_fraction()});
            }
        }
        result.rows.push_back({cfg.snrs[s], Procedure::bonferroni, aggregate(bon)});
        result.rows.push_back({cfg.snrs[s], Procedure::bh, aggregate(bh)});
    }
    return result;
}

// =============================================================================
// CSV output
// =============================================================================

inline void write_report_csv(const ExperimentResult& result, std::ostream& out) {
    out << "snr,procedure,fwer,fdr,power,fwer_se,fdr_se,power_se\n";
    out << std::setprecision(17);
    for (const ExperimentRow& row : result.rows)
        out << row.snr << ',' << procedure_name(row.procedure) << ',' << row.report.fwer << ','
            << row.report.fdr << ',' << row.report.power << ',' << row.report.fwer_se << ','
            << row.report.fdr_se << ',' << row.report.power_se << '\n';
}

inline void write_report_csv(const ExperimentResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    write_report_csv(result, out);
}

inline void write_trials_csv(const ExperimentResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << "snr,trial,procedure,V,W,N,fdp,power\n";
    out << std::setprecision(17);
    for (const TrialRecord& t : result.trials)
        out << t.snr << ',' << t.trial << ',' << procedure_name(t.procedure) << ',' << t.V << ','
            << t.W << ',' << t.N << ',' << t.fdp << ',' << t.power << '\n';
}

}  // namespace lsmdet
