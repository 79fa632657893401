// Command-line front end: synth / calibrate / detect / evaluate /
// estimate-delta. All outputs are the binary grid format, text sidecars, or
// CSV. Exit codes: 0 success, 1 usage or config error, 2 runtime/data error.

#include <CLI11.hpp>

#include <iostream>

#include "lsmdet/eval.hpp"

using namespace lsmdet;

namespace {

struct CommonOpts {
    std::uint64_t seed = 0;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--seed", opts.seed, "master RNG seed")->capture_default_str();
    cmd->add_option("--threads", opts.threads, "worker threads (0 = all cores)")
        ->capture_default_str();
}

NoiseKind noise_kind_from_name(const std::string& s) {
    if (s == "white") return NoiseKind::white;
    if (s == "gaussian-kernel" || s == "gaussian_kernel") return NoiseKind::gaussian_kernel;
    throw CLI::ValidationError("--noise", "unknown noise kind: " + s);
}

BasisSet load_or_build_basis(const std::string& basis_path, std::int64_t B, int M) {
    if (!basis_path.empty()) return read_basis(basis_path);
    if (B <= 0 || M <= 0)
        throw std::invalid_argument("either --basis or both --B and --M are required");
    return fourier_bessel_basis(B, M);
}

int run_synth(const CommonOpts& common, std::int64_t L, std::int64_t B, int M, double density,
              const std::string& delta_spec, std::int64_t stride, double snr,
              const std::string& noise_name, double length_scale, const std::string& out) {
    BasisSet basis = fourier_bessel_basis(B, M);
    double delta;
    if (delta_spec == "auto") {
        DeltaCertificate cert = estimate_delta(basis, stride);
        delta = cert.delta;
        write_certificate(cert, out + ".delta.txt");
    } else {
        delta = std::stod(delta_spec);
    }
    NoiseModel model;
    model.kind = noise_kind_from_name(noise_name);
    model.sigma = sigma_for_snr(snr, 1.0, B, 2);
    model.length_scale = length_scale;
    model.seed = common.seed;
    std::mt19937_64 rng = make_engine(common.seed, 0);
    Scene scene = generate_scene(L, B, M, delta, density, model, rng);
    GridField x = render_scene(scene, basis);
    GridField z = sample_noise_field(model, x.shape, 1);
    GridField y = x;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += z.data[i];

    write_scene_manifest(scene, out + ".scene.txt");
    write_basis(basis, out + ".basis.grid");
    write_grid(x, out + ".x.grid");
    write_grid(y, out + ".y.grid");
    std::cout << "scene: N=" << scene.count() << " delta=" << delta
              << " sigma=" << model.sigma << "\n";
    std::cout << "wrote " << out << ".{scene.txt,basis.grid,x.grid,y.grid}\n";
    return 0;
}

int run_calibrate(const CommonOpts& common, const std::string& basis_path, std::int64_t B,
                  int M, double r, double delta, std::int64_t n_sim,
                  const std::string& kind_name, double sigma, const std::string& noise_name,
                  double length_scale, const std::string& out) {
    BasisSet basis = load_or_build_basis(basis_path, B, M);
    if (r <= 0.0) {
        if (delta <= 0.0)
            throw std::invalid_argument("either --r or --delta is required");
        r = 2.0 * static_cast<double>(basis.support) + delta;
    }
    NoiseModel model;
    model.kind = noise_kind_from_name(noise_name);
    model.sigma = sigma;
    model.length_scale = length_scale;
    model.seed = common.seed;
    CalibrationTable table =
        build_table(model, basis, r, n_sim, stat_kind_from_name(kind_name), common.threads);
    write_table(table, out);
    std::cout << "table: n_sim=" << table.n_sim << " r=" << table.r
              << " box_side=" << table.box_side << " max=" << table.samples.back() << "\n";
    std::cout << "wrote " << out << " and " << table_sidecar_path(out) << "\n";
    return 0;
}

int run_detect(const std::string& y_path, const std::string& basis_path,
               const std::string& table_path, double alpha, const std::string& proc_name,
               const std::string& out) {
    GridField y = read_grid(y_path);
    BasisSet basis = read_basis(basis_path);
    CalibrationTable table = read_table(table_path);
    if (table.basis_id != 0 && table.basis_id != basis_hash(basis))
        throw std::runtime_error("calibration table was built for a different basis");
    if (table.r < 1.0) throw std::runtime_error("calibration sidecar is missing r");
    if (std::abs(table.box_side - table.r / 2.0) > 1e-9)
        throw std::runtime_error("calibration sidecar box_side does not equal r/2");

    GridField s_y = score_map(y, basis);
    CandidateSet candidates = select_candidates(s_y, table.r);
    const std::int64_t m_l = m_l_bins(static_cast<double>(y.shape.front()), table.r, y.ndim());

    bool wrote = false;
    for (Procedure proc : {Procedure::bonferroni, Procedure::bh}) {
        if (proc_name != "both" && proc_name != procedure_name(proc)) continue;
        DetectionResult res = proc == Procedure::bonferroni
                                  ? bonferroni_select(candidates, table, alpha, m_l)
                                  : bh_select(candidates, table, alpha, m_l);
        const std::string path = out + "." + procedure_name(proc) + ".csv";
        write_detection_csv(res, path);
        std::cout << procedure_name(proc) << ": candidates=" << candidates.points.size()
                  << " accepted=" << res.accepted.size() << " threshold=" << res.threshold_u
                  << " -> " << path << "\n";
        wrote = true;
    }
    if (!wrote) throw std::invalid_argument("unknown procedure: " + proc_name);
    return 0;
}

int run_evaluate(const CommonOpts& common, ExperimentConfig cfg, const std::string& out,
                 bool per_trial) {
    cfg.seed = common.seed;
    cfg.threads = common.threads;
    ExperimentResult res = run_experiment(cfg);
    write_report_csv(res, out + ".report.csv");
    if (per_trial) write_trials_csv(res, out + ".trials.csv");
    std::cout << "delta=" << res.delta << " r=" << res.r << "\n";
    for (const ExperimentRow& row : res.rows)
        std::cout << "snr " << row.snr << " " << procedure_name(row.procedure)
                  << ": fwer=" << row.report.fwer << " fdr=" << row.report.fdr
                  << " power=" << row.report.power << "\n";
    std::cout << "wrote " << out << ".report.csv\n";
    return 0;
}

int run_estimate_delta(const std::string& basis_path, std::int64_t B, int M,
                       std::int64_t stride, const std::string& out) {
    BasisSet basis = load_or_build_basis(basis_path, B, M);
    DeltaCertificate cert = estimate_delta(basis, stride);
    if (!out.empty()) write_certificate(cert, out);
    std::cout << "delta=" << cert.delta << " g=" << cert.g_value << " stride=" << cert.stride
              << "\n";
    if (!out.empty()) std::cout << "wrote " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"object detection under the linear subspace model"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "read options from an INI file (sections per subcommand)");
    app.get_config_ptr()->configurable(false);

    CommonOpts common;

    // synth
    auto* synth = app.add_subcommand("synth", "generate a ground-truth scene and observation");
    std::int64_t s_L = 512, s_B = 32;
    int s_M = 12;
    double s_density = 0.3, s_snr = 1.0, s_ls = 1.0;
    std::int64_t s_stride = 0;
    std::string s_delta = "auto", s_noise = "gaussian-kernel", s_out = "scene";
    add_common(synth, common);
    synth->add_option("--L", s_L, "domain side")->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--B", s_B, "object support side")->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--M", s_M, "basis size")->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--density", s_density, "N B^d / L^d")->check(CLI::Range(1e-9, 0.999999))->capture_default_str();
    synth->add_option("--delta", s_delta, "localization radius in pixels, or 'auto'")->capture_default_str();
    synth->add_option("--stride", s_stride, "delta search stride (0 = B/8)")->capture_default_str();
    synth->add_option("--snr", s_snr, "target SNR")->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--noise", s_noise, "white | gaussian-kernel")->capture_default_str();
    synth->add_option("--length-scale", s_ls, "kernel length scale")->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--out", s_out, "output path prefix")->capture_default_str();

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "build a Monte Carlo calibration table");
    std::string c_basis, c_kind = "tilde-z", c_noise = "gaussian-kernel", c_out = "table.grid";
    std::int64_t c_B = 0, c_nsim = 10000;
    int c_M = 0;
    double c_r = 0.0, c_delta = 0.0, c_sigma = 1.0, c_ls = 1.0;
    add_common(cal, common);
    cal->add_option("--basis", c_basis, "basis grid file (else --B/--M build Fourier-Bessel)");
    cal->add_option("--B", c_B, "support side for a generated basis");
    cal->add_option("--M", c_M, "basis size for a generated basis");
    cal->add_option("--r", c_r, "erasure box side (max runs over side r/2)");
    cal->add_option("--delta", c_delta, "alternative to --r: r = 2B + delta");
    cal->add_option("--n-sim", c_nsim, "Monte Carlo samples")->check(CLI::PositiveNumber)->capture_default_str();
    cal->add_option("--kind", c_kind, "tilde-z | s-z")->capture_default_str();
    cal->add_option("--sigma", c_sigma, "noise standard deviation")->check(CLI::PositiveNumber)->capture_default_str();
    cal->add_option("--noise", c_noise, "white | gaussian-kernel")->capture_default_str();
    cal->add_option("--length-scale", c_ls, "kernel length scale")->check(CLI::PositiveNumber)->capture_default_str();
    cal->add_option("--out", c_out, "output table path")->capture_default_str();

    // detect
    auto* det = app.add_subcommand("detect", "detect objects in one observation");
    std::string d_y, d_basis, d_table, d_proc = "both", d_out = "detections";
    double d_alpha = 0.05;
    add_common(det, common);
    det->add_option("--y", d_y, "observation grid file")->required();
    det->add_option("--basis", d_basis, "basis grid file")->required();
    det->add_option("--table", d_table, "calibration table (with sidecar)")->required();
    det->add_option("--alpha", d_alpha, "error-rate level")->check(CLI::Range(1e-12, 0.999999))->capture_default_str();
    det->add_option("--procedure", d_proc, "bonferroni | bh | both")->capture_default_str();
    det->add_option("--out", d_out, "output CSV path prefix")->capture_default_str();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "run the repeated-trial experiment protocol");
    ExperimentConfig e_cfg;
    std::string e_stat = "tilde-z", e_noise = "gaussian-kernel", e_out = "experiment";
    std::string e_delta = "auto";
    bool e_per_trial = false;
    add_common(ev, common);
    ev->add_option("--L", e_cfg.L, "domain side")->check(CLI::PositiveNumber)->capture_default_str();
    ev->add_option("--B", e_cfg.B, "object support side")->check(CLI::PositiveNumber)->capture_default_str();
    ev->add_option("--M", e_cfg.M, "basis size")->check(CLI::PositiveNumber)->capture_default_str();
    ev->add_option("--density", e_cfg.density, "N B^d / L^d")->check(CLI::Range(1e-9, 0.999999))->capture_default_str();
    ev->add_option("--delta", e_delta, "localization radius, or 'auto'")->capture_default_str();
    ev->add_option("--stride", e_cfg.stride, "delta search stride (0 = B/8)")->capture_default_str();
    ev->add_option("--alpha", e_cfg.alpha, "error-rate level")->check(CLI::Range(1e-12, 0.999999))->capture_default_str();
    ev->add_option("--snr", e_cfg.snrs, "SNR grid")->expected(-1);
    ev->add_option("--n-sim", e_cfg.n_sim, "calibration samples per table")->check(CLI::PositiveNumber)->capture_default_str();
    ev->add_option("--n-trials", e_cfg.n_trials, "independent trials per SNR")->check(CLI::PositiveNumber)->capture_default_str();
    ev->add_option("--statistic", e_stat, "tilde-z | s-z")->capture_default_str();
    ev->add_option("--noise", e_noise, "white | gaussian-kernel")->capture_default_str();
    ev->add_option("--length-scale", e_cfg.length_scale, "kernel length scale")->check(CLI::PositiveNumber)->capture_default_str();
    ev->add_option("--snr-ref-B", e_cfg.snr_ref_B, "reference support for SNR rescale (0 = off)")->capture_default_str();
    ev->add_option("--snr-ref-M", e_cfg.snr_ref_M, "reference basis size for SNR rescale")->capture_default_str();
    ev->add_flag("--per-trial", e_per_trial, "also write per-trial outcomes CSV");
    ev->add_option("--out", e_out, "output path prefix")->capture_default_str();

    // estimate-delta
    auto* ed = app.add_subcommand("estimate-delta", "certify a localization radius");
    std::string ed_basis, ed_out;
    std::int64_t ed_B = 0, ed_stride = 0;
    int ed_M = 0;
    add_common(ed, common);
    ed->add_option("--basis", ed_basis, "basis grid file (else --B/--M build Fourier-Bessel)");
    ed->add_option("--B", ed_B, "support side for a generated basis");
    ed->add_option("--M", ed_M, "basis size for a generated basis");
    ed->add_option("--stride", ed_stride, "search stride (0 = B/8)")->capture_default_str();
    ed->add_option("--out", ed_out, "certificate output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed())
            return run_synth(common, s_L, s_B, s_M, s_density, s_delta, s_stride, s_snr,
                             s_noise, s_ls, s_out);
        if (cal->parsed())
            return run_calibrate(common, c_basis, c_B, c_M, c_r, c_delta, c_nsim, c_kind,
                                 c_sigma, c_noise, c_ls, c_out);
        if (det->parsed()) return run_detect(d_y, d_basis, d_table, d_alpha, d_proc, d_out);
        if (ev->parsed()) {
            e_cfg.statistic = stat_kind_from_name(e_stat);
            e_cfg.noise_kind = noise_kind_from_name(e_noise);
            e_cfg.delta = e_delta == "auto" ? 0.0 : std::stod(e_delta);
            return run_evaluate(common, e_cfg, e_out, e_per_trial);
        }
        if (ed->parsed()) return run_estimate_delta(ed_basis, ed_B, ed_M, ed_stride, ed_out);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
