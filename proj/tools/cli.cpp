// Command-line front end: Monte Carlo sweeps, single-shot detection,
// gradient checking, small-instance oracle comparison and CPE analysis.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "phnturbo/harness.hpp"

using namespace phnturbo;
using nlohmann::json;

namespace {

std::string out_dir_prefix(const std::string& path) {
    // env var PHNTURBO_OUT supplies the default output directory for
    // relative paths
    if (path.empty() || path.front() == '/') return path;
    const char* dir = std::getenv("PHNTURBO_OUT");
    if (!dir || !*dir) return path;
    return (std::filesystem::path(dir) / path).string();
}

json cvec_to_json(const CVec& v) {
    json re = json::array(), im = json::array();
    for (int i = 0; i < v.size(); ++i) {
        re.push_back(v[i].real());
        im.push_back(v[i].imag());
    }
    return json{{"re", re}, {"im", im}};
}

CVec cvec_from_json(const json& j) {
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    CVec v(re.size());
    for (size_t i = 0; i < re.size(); ++i)
        v[i] = cplx(re[i].get<double>(), im[i].get<double>());
    return v;
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Mat mat_from_json(const json& j) {
    const size_t r = j.size(), c = j.at(0).size();
    Mat m(r, c);
    for (size_t i = 0; i < r; ++i)
        for (size_t k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
    return m;
}

struct InstanceFile {
    DetectorInstance inst;
    PhnParams phn{};
};

InstanceFile load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open instance file: " + path);
    json j;
    in >> j;
    InstanceFile f;
    f.inst.r = cvec_from_json(j.at("r"));
    f.inst.ch.h = cvec_from_json(j.at("h"));
    f.inst.noise_var = j.at("sigma2").get<double>();
    f.inst.prior_llr = mat_from_json(j.at("prior_llr"));
    f.phn.sigma_theta = deg2rad(j.at("phn").at("sigma_theta_deg").get<double>());
    f.phn.omega_3db = j.at("phn").at("omega_3db_hz").get<double>();
    f.phn.t_sample = j.at("phn").at("t_sample_s").get<double>();
    f.inst.cfg.prior_phn_cov =
        phn_covariance(f.phn, static_cast<int>(f.inst.r.size())).matrix;
    if (j.contains("num_iter")) f.inst.cfg.num_iter = j.at("num_iter").get<int>();
    if (j.contains("f2_threshold") && !j.at("f2_threshold").is_null())
        f.inst.cfg.f2_threshold = j.at("f2_threshold").get<double>();
    return f;
}

InstanceFile make_instance(uint64_t seed, int n, int qam_order, double snr_db,
                           double sigma_theta_deg) {
    int bits = 0;
    while ((1 << bits) < qam_order) ++bits;
    InstanceFile f;
    f.phn = PhnParams{deg2rad(sigma_theta_deg), 1e5, 5e-8};

    Rng rng(seed);
    ChannelProfile profile{1, 3.0, n};
    profile.num_taps = std::min(4, n);
    f.inst.ch = sample_channel(profile, rng);

    Mat hard(n, bits);
    for (int j = 0; j < bits; ++j)
        for (int i = 0; i < n; ++i) hard(i, j) = (rng.next_u64() & 1) ? -1.0 : 1.0;
    const CVec d = map_bits(BitMeanMatrix(hard));
    const double es = 2.0 * (qam_order - 1) / 3.0;
    f.inst.noise_var = es / (2.0 * std::pow(10.0, snr_db / 10.0));
    const PhnSequence theta = sample_phn(f.phn, n, rng);
    const RxVector rx =
        apply_impairments(d, f.inst.ch, theta.theta, f.inst.noise_var, rng);
    f.inst.r = rx.r;
    f.inst.prior_llr = Mat::Zero(n, bits);
    f.inst.cfg.prior_phn_cov = phn_covariance(f.phn, n).matrix;
    return f;
}

void dump_instance(const InstanceFile& f, const std::string& path) {
    json j;
    j["n"] = f.inst.r.size();
    j["qam_order"] = 1 << f.inst.prior_llr.cols();
    j["sigma2"] = f.inst.noise_var;
    j["r"] = cvec_to_json(f.inst.r);
    j["h"] = cvec_to_json(f.inst.ch.h);
    j["prior_llr"] = mat_to_json(f.inst.prior_llr);
    j["phn"] = {{"sigma_theta_deg", rad2deg(f.phn.sigma_theta)},
                {"omega_3db_hz", f.phn.omega_3db},
                {"t_sample_s", f.phn.t_sample}};
    j["num_iter"] = f.inst.cfg.num_iter;
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

void write_trace_csv(const DetectorTrace& trace, const std::string& path) {
    std::ofstream out(path);
    out << "sweep,step,f_total,f_prior_bits,f_prior_phn,f_entropy_bits,"
           "f_entropy_phn,f_likelihood,m_norm,s_min_eig,clamped\n";
    for (const auto& row : trace.rows)
        out << row.sweep << ',' << row.step << ',' << row.f_total << ',' << row.f1
            << ',' << row.f2 << ',' << row.f3 << ',' << row.f4 << ',' << row.f5 << ','
            << row.m_norm << ',' << row.s_min_eig << ',' << (row.clamped ? 1 : 0)
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bit-level VI turbo receiver for OFDM under oscillator phase noise"};
    app.require_subcommand(1);

    // ---- simulate
    auto* sim = app.add_subcommand("simulate", "run a Monte Carlo SNR sweep");
    std::string cfg_path;
    int override_frames = 0;
    std::string plot_path;
    sim->add_option("--config", cfg_path, "config file (key=value or JSON)")
        ->required();
    sim->add_option("--frames", override_frames, "override max_frames");
    sim->add_option("--plot", plot_path, "also write an SVG chart to this path");

    // ---- detect
    auto* det = app.add_subcommand("detect", "run one detector call on an instance");
    std::string inst_path, dump_path, trace_path;
    uint64_t det_seed = 1;
    int det_n = 64, det_qam = 64;
    double det_snr = 25.0, det_sigma = 3.0;
    bool det_random = false;
    det->add_option("--instance", inst_path, "instance JSON file");
    det->add_flag("--random", det_random, "generate a random instance instead");
    det->add_option("--seed", det_seed, "seed for --random");
    det->add_option("--n", det_n, "subcarriers for --random");
    det->add_option("--qam", det_qam, "constellation order for --random");
    det->add_option("--snr-db", det_snr, "SNR for --random");
    det->add_option("--sigma-theta-deg", det_sigma, "RMS phase noise for --random");
    det->add_option("--dump", dump_path, "write the instance JSON here");
    det->add_option("--trace", trace_path, "write per-sweep diagnostics CSV here");

    // ---- gradcheck
    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
    uint64_t g_seed = 1;
    int g_n = 8, g_qam = 16, g_count = 1;
    double g_tol = 1e-6;
    grad->add_option("--seed", g_seed, "first seed");
    grad->add_option("--n", g_n, "subcarriers");
    grad->add_option("--qam", g_qam, "constellation order");
    grad->add_option("--count", g_count, "number of seeded instances");
    grad->add_option("--tol", g_tol, "max relative error allowed");

    // ---- oracle
    auto* orc = app.add_subcommand("oracle",
                                   "compare the detector against exact enumeration");
    uint64_t o_seed = 1;
    int o_n = 4, o_qam = 4, o_trials = 100;
    double o_snr = 20.0, o_sigma = 3.0, o_min_agree = 0.99;
    orc->add_option("--seed", o_seed, "first seed");
    orc->add_option("--n", o_n, "subcarriers");
    orc->add_option("--qam", o_qam, "constellation order");
    orc->add_option("--trials", o_trials, "number of trials");
    orc->add_option("--snr-db", o_snr, "SNR");
    orc->add_option("--sigma-theta-deg", o_sigma, "RMS phase noise");
    orc->add_option("--min-agreement", o_min_agree, "required bit agreement");

    // ---- cpe-analyze
    auto* cpe = app.add_subcommand("cpe-analyze", "CPE statistics and rotation SER");
    double c_angle = 9.0, c_sigma = 3.0, c_omega = 1e5, c_ts = 5e-8;
    int c_n = 64, c_qam = 64;
    bool c_two_sided = false;
    cpe->add_option("--angle-deg", c_angle, "rotation / tail angle in degrees");
    cpe->add_option("--sigma-theta-deg", c_sigma, "RMS phase noise, degrees");
    cpe->add_option("--omega-3db-hz", c_omega, "oscillator 3 dB bandwidth");
    cpe->add_option("--t-sample-s", c_ts, "sample interval");
    cpe->add_option("--n", c_n, "OFDM symbol length");
    cpe->add_option("--qam", c_qam, "constellation order");
    cpe->add_flag("--two-sided", c_two_sided, "report the two-sided tail as primary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) {
            SimConfig cfg = load_sim_config(cfg_path);
            if (override_frames > 0) cfg.max_frames = override_frames;
            const auto records = run_sweep(cfg, &std::cerr);
            const std::string out = out_dir_prefix(cfg.output_path);
            write_sweep_csv(records, out);
            std::cout << sweep_csv(records, false);
            if (!plot_path.empty())
                emit_plot_data(records, out_dir_prefix(plot_path + ".csv"),
                               out_dir_prefix(plot_path));
            std::cerr << "wrote " << out << "\n";
            return 0;
        }

        if (det->parsed()) {
            InstanceFile f;
            if (det_random)
                f = make_instance(det_seed, det_n, det_qam, det_snr, det_sigma);
            else if (!inst_path.empty())
                f = load_instance(inst_path);
            else
                throw std::runtime_error("detect: need --instance or --random");
            if (!dump_path.empty()) dump_instance(f, out_dir_prefix(dump_path));

            DetectorTrace trace;
            if (!trace_path.empty()) f.inst.cfg.trace = &trace;
            RxVector rx{f.inst.r, f.inst.noise_var};
            const DetectorResult res = detect(rx, f.inst.ch, f.inst.prior_llr, f.inst.cfg);
            if (!trace_path.empty()) write_trace_csv(trace, out_dir_prefix(trace_path));

            json out;
            out["fell_back"] = res.fell_back;
            out["f2"] = res.f2;
            out["f2_threshold"] = res.f2_threshold;
            out["clamp_events"] = res.clamp_events;
            out["extrinsic"] = mat_to_json(res.llr.extrinsic);
            json m = json::array();
            for (int i = 0; i < res.phn.m_theta.size(); ++i)
                m.push_back(res.phn.m_theta[i]);
            out["phn_mean"] = m;
            std::cout << out.dump(2) << "\n";
            return 0;
        }

        if (grad->parsed()) {
            bool ok = true;
            for (int i = 0; i < g_count; ++i) {
                PosteriorState point;
                const DetectorInstance inst =
                    random_gradcheck_instance(g_seed + i, g_n, g_qam, &point);
                const GradientReport rep = gradient_check(inst, point);
                const bool pass = rep.pass(g_tol);
                ok = ok && pass;
                std::cout << "seed " << g_seed + i << ": m_theta " << rep.err_m_theta
                          << " s_inv " << rep.err_s_inv << " bits "
                          << rep.err_bit_columns.maxCoeff() << " -> "
                          << (pass ? "PASS" : "FAIL") << "\n";
            }
            return ok ? 0 : 1;
        }

        if (orc->parsed()) {
            long agree = 0, total = 0;
            for (int t = 0; t < o_trials; ++t) {
                InstanceFile f = make_instance(o_seed + t, o_n, o_qam, o_snr, o_sigma);
                const OracleResult oracle = exact_posterior_oracle(f.inst);
                RxVector rx{f.inst.r, f.inst.noise_var};
                const DetectorResult res =
                    detect(rx, f.inst.ch, f.inst.prior_llr, f.inst.cfg);
                const Mat det_llr = res.llr.prior + res.llr.extrinsic;
                for (int i = 0; i < det_llr.rows(); ++i)
                    for (int j = 0; j < det_llr.cols(); ++j) {
                        ++total;
                        if ((det_llr(i, j) >= 0) == (oracle.marginal_llr(i, j) >= 0))
                            ++agree;
                    }
            }
            const double frac = static_cast<double>(agree) / total;
            std::cout << "bit agreement with exact MAP: " << frac << " (" << agree
                      << "/" << total << ")\n";
            std::cout << (frac >= o_min_agree ? "PASS" : "FAIL") << "\n";
            return frac >= o_min_agree ? 0 : 1;
        }

        if (cpe->parsed()) {
            PhnParams params{deg2rad(c_sigma), c_omega, c_ts};
            const CpeReport rep =
                cpe_report(params, c_n, c_qam, deg2rad(c_angle));
            std::cout << cpe_report_text(rep);
            if (c_two_sided)
                std::cout << "primary_tail = " << rep.tail_two_sided << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
