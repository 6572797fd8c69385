// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure.  Each criterion pins its tolerances and seeds in code; rerunning
// with the same build reproduces every number exactly.
//
// Select a subset by listing criterion numbers on the command line,
// e.g.  ./acceptance 1 4 8

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "phnturbo/harness.hpp"
#include "phnturbo/vi_detector.hpp"

using namespace phnturbo;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// model-consistent random instance (channel, phase noise, noise at snr_db)
DetectorInstance make_instance(uint64_t seed, int n, int bits, double snr_db,
                               double sigma_theta_deg) {
    Rng rng(seed);
    DetectorInstance inst;
    inst.ch.h.resize(n);
    for (int i = 0; i < n; ++i) inst.ch.h[i] = rng.cnormal(0.5);
    Mat hard(n, bits);
    for (int j = 0; j < bits; ++j)
        for (int i = 0; i < n; ++i) hard(i, j) = rng.next_u64() & 1 ? 1.0 : -1.0;
    const CVec d = map_bits(BitMeanMatrix(hard));
    const int order = 1 << bits;
    const double es = 2.0 * (order - 1) / 3.0;
    inst.noise_var = es / (2.0 * std::pow(10.0, snr_db / 10.0));
    PhnParams params{deg2rad(std::max(sigma_theta_deg, 1e-12)), 1e5, 5e-8};
    Vec theta = Vec::Zero(n);
    if (sigma_theta_deg > 0) theta = sample_phn(params, n, rng).theta;
    const RxVector rx = apply_impairments(d, inst.ch, theta, inst.noise_var, rng);
    inst.r = rx.r;
    inst.prior_llr = Mat::Zero(n, bits);
    inst.cfg.prior_phn_cov = phn_covariance(params, n).matrix;
    return inst;
}

SimConfig paper_config() {
    SimConfig cfg;
    cfg.n_subcarriers = 64;
    cfg.qam_order = 64;
    cfg.num_taps = 10;
    cfg.tap_decay = 3.0;
    cfg.sigma_theta_deg = 3.0;
    cfg.omega_3db_hz = 1e5;
    cfg.t_sample_s = 5e-8;
    cfg.symbols_per_frame = 6;
    cfg.outer_iters = 3;
    cfg.decoder_iters = 6;
    cfg.detector_iters = 5;
    cfg.standalone_decoder_iters = 18;
    return cfg;
}

const SweepRecord& find_record(const std::vector<SweepRecord>& recs, Scheme s,
                               int outer_iter, double snr) {
    for (const auto& r : recs)
        if (r.scheme == s && r.outer_iter == outer_iter && r.snr_db == snr) return r;
    throw std::runtime_error("record not found");
}

// ---------------------------------------------------------------------------

Outcome criterion1_gradients() {
    Outcome out;
    double worst = 0.0, swapped_best = 1e300;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        PosteriorState point;
        const DetectorInstance inst = random_gradcheck_instance(seed, 8, 16, &point);
        const GradientReport rep = gradient_check(inst, point);
        worst = std::max(worst, rep.max_error());
        const GradientReport bad =
            gradient_check(inst, point, 1e-6, BitGradPairing::offdiag_with_moments);
        swapped_best = std::min(swapped_best, bad.err_bit_columns.maxCoeff());
    }
    out.pass = worst <= 1e-6 && swapped_best > 1e-3;
    std::ostringstream ss;
    ss << "max rel err " << worst << " (tol 1e-6); swapped-pairing control err "
       << swapped_best << " (must exceed 1e-3)";
    out.detail = ss.str();
    return out;
}

Outcome criterion2_descent() {
    Outcome out;
    double worst_increase = 0.0;
    long steps = 0;
    for (int trial = 0; trial < 100; ++trial) {
        DetectorInstance inst = make_instance(40000 + trial, 16, 4, 15.0, 3.0);
        DetectorTrace trace;
        inst.cfg.trace = &trace;
        RxVector rx{inst.r, inst.noise_var};
        detect(rx, inst.ch, inst.prior_llr, inst.cfg);
        for (size_t i = 1; i < trace.rows.size(); ++i) {
            if (trace.rows[i].clamped) continue;
            const double prev = trace.rows[i - 1].f_total;
            const double inc =
                (trace.rows[i].f_total - prev) / std::max(1.0, std::abs(prev));
            worst_increase = std::max(worst_increase, inc);
            ++steps;
        }
    }
    out.pass = worst_increase <= 1e-9 && steps > 1500;
    std::ostringstream ss;
    ss << "worst relative increase " << worst_increase << " over " << steps
       << " update steps (tol 1e-9)";
    out.detail = ss.str();
    return out;
}

Outcome criterion3_oracle() {
    Outcome out;
    long agree = 0, total = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const DetectorInstance inst = make_instance(50000 + trial, 4, 2, 20.0, 3.0);
        const OracleResult orc = exact_posterior_oracle(inst);
        RxVector rx{inst.r, inst.noise_var};
        const DetectorResult res = detect(rx, inst.ch, inst.prior_llr, inst.cfg);
        const Mat posterior = res.llr.prior + res.llr.extrinsic;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 2; ++j) {
                ++total;
                if ((posterior(i, j) >= 0) == (orc.marginal_llr(i, j) >= 0)) ++agree;
            }
    }
    const double agreement = static_cast<double>(agree) / total;

    double num = 0, dx = 0, dy = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const DetectorInstance inst = make_instance(60000 + trial, 4, 2, 10.0, 3.0);
        const OracleResult orc = exact_posterior_oracle(inst);
        RxVector rx{inst.r, inst.noise_var};
        const DetectorResult res = detect(rx, inst.ch, inst.prior_llr, inst.cfg);
        const Mat posterior = res.llr.prior + res.llr.extrinsic;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 2; ++j) {
                const double x = std::tanh(0.5 * posterior(i, j));
                const double y = orc.marginal_mean(i, j);
                num += x * y;
                dx += x * x;
                dy += y * y;
            }
    }
    const double pearson = num / std::sqrt(dx * dy);

    out.pass = agreement >= 0.99 && pearson >= 0.95;
    std::ostringstream ss;
    ss << "MAP bit agreement " << agreement << " (need >= 0.99); Pearson r "
       << pearson << " (need >= 0.95)";
    out.detail = ss.str();
    return out;
}

Outcome criterion4_cpe_claims() {
    Outcome out;
    const double ser = rotation_ser(64, deg2rad(9.0));
    const PhnParams paper{deg2rad(3.0), 1e5, 5e-8};
    const double tail = cpe_tail_probability(paper, 64, deg2rad(9.0), false);
    out.pass = ser >= 0.41 && ser <= 0.45 && tail >= 2e-5 && tail <= 8e-5;
    std::ostringstream ss;
    ss << "rotation_ser(64, 9 deg) = " << ser << " (window [0.41, 0.45]); "
       << "tail probability = " << tail << " (window [2e-5, 8e-5])";
    out.detail = ss.str();
    return out;
}

Outcome criterion5_cpe_variance() {
    Outcome out;
    const PhnParams paper{deg2rad(3.0), 1e5, 5e-8};
    const int n = 64;
    const double closed = cpe_variance(paper, n);
    Rng rng(777);
    double acc = 0;
    const int draws = 100000;
    for (int d = 0; d < draws; ++d) {
        const Vec th = sample_phn(paper, n, rng).theta;
        acc += th.mean() * th.mean();
    }
    acc /= draws;
    const double rel = std::abs(acc - closed) / closed;
    out.pass = rel <= 0.02;
    std::ostringstream ss;
    ss << "closed form " << closed << ", Monte Carlo " << acc << ", relative error "
       << rel << " (tol 0.02)";
    out.detail = ss.str();
    return out;
}

Outcome criterion6_degenerate() {
    Outcome out;
    Rng prior_rng(888);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        DetectorInstance inst = make_instance(70000 + trial, 8, 2, 8.0, 0.0);
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 8; ++i)
                inst.prior_llr(i, j) = prior_rng.normal();
        inst.cfg.prior_phn_cov = 1e-12 * Mat::Identity(8, 8);
        RxVector rx{inst.r, inst.noise_var};
        const DetectorResult res = detect(rx, inst.ch, inst.prior_llr, inst.cfg);
        if (res.fell_back) {
            out.pass = false;
            out.detail = "unexpected fallback";
            return out;
        }
        const LlrFrame ref =
            demap_soft(dft(inst.r), inst.ch.h, inst.noise_var, inst.prior_llr);
        worst = std::max(worst,
                         (res.llr.extrinsic - ref.extrinsic).cwiseAbs().maxCoeff());
    }
    out.pass = worst <= 1e-6;
    std::ostringstream ss;
    ss << "max |extrinsic - demapper| = " << worst << " over 100 instances (tol 1e-6)";
    out.detail = ss.str();
    return out;
}

Outcome criterion7_fig2(std::ostream& log) {
    // Qualitative Fig. 2 reproduction.  The interesting events (high-CPE
    // frames) occur at a few-per-thousand rate with this code, so the
    // ordering leg runs 12000 deterministic frames at the PHN-limited
    // 30 dB point instead of the 200 the criterion sketches; the floor and
    // waterfall legs use cheap demapper-only sweeps.  See the README for
    // the measured landscape.
    Outcome out;
    std::ostringstream ss;

    SimConfig ordering = paper_config();
    ordering.snr_db = {30.0};
    ordering.schemes = {Scheme::turbo, Scheme::one_pass, Scheme::no_phn,
                        Scheme::phn_ignored};
    ordering.max_frames = 12000;
    ordering.min_frame_errors = 1000000;
    ordering.master_seed = 20260811;
    log << "    [7] ordering leg: 12000 frames at 30 dB...\n" << std::flush;
    const auto recs = run_sweep(ordering);

    const long no_phn = find_record(recs, Scheme::no_phn, 1, 30.0).bit_errors;
    const long it1 = find_record(recs, Scheme::turbo, 1, 30.0).bit_errors;
    const long it3 = find_record(recs, Scheme::turbo, 3, 30.0).bit_errors;
    const long one_pass = find_record(recs, Scheme::one_pass, 1, 30.0).bit_errors;
    const long ignored = find_record(recs, Scheme::phn_ignored, 1, 30.0).bit_errors;

    const bool ordering_ok =
        no_phn <= it3 && it3 < it1 && it3 < one_pass && one_pass < ignored;
    ss << "bit errors at 30 dB: no_phn " << no_phn << ", turbo it3 " << it3
       << ", turbo it1 " << it1 << ", one_pass " << one_pass << ", phn_ignored "
       << ignored << (ordering_ok ? " [ordering ok]" : " [ORDERING VIOLATED]");

    // floor leg: the phn_ignored error rate must not drop with 5 dB more
    // SNR (with this receiver it actually rises: higher SNR makes the
    // CPE-corrupted LLRs confidently wrong), while no_phn keeps falling
    SimConfig floor_cfg = paper_config();
    floor_cfg.snr_db = {30.0, 35.0};
    floor_cfg.schemes = {Scheme::phn_ignored};
    floor_cfg.max_frames = 20000;
    floor_cfg.min_frame_errors = 1000000;
    floor_cfg.master_seed = 31;
    log << "    [7] floor leg: 20000 frames at 30/35 dB...\n" << std::flush;
    const auto floor_recs = run_sweep(floor_cfg);
    const double ber30 = find_record(floor_recs, Scheme::phn_ignored, 1, 30.0).ber;
    const double ber35 = find_record(floor_recs, Scheme::phn_ignored, 1, 35.0).ber;
    const bool floor_holds = ber30 > 0 && ber35 > 0 && ber35 >= ber30 / 3.0;
    ss << "; phn_ignored floor BER 30/35 dB: " << ber30 << " / " << ber35
       << (floor_holds ? " [no improvement with SNR]" : " [FLOOR ABSENT]");

    // waterfall leg: no_phn falls by >= 10x from 20 to 22 dB
    SimConfig fall_cfg = paper_config();
    fall_cfg.snr_db = {20.0, 22.0};
    fall_cfg.schemes = {Scheme::no_phn};
    fall_cfg.max_frames = 400;
    fall_cfg.min_frame_errors = 1000000;
    fall_cfg.master_seed = 32;
    const auto fall_recs = run_sweep(fall_cfg);
    const auto& low = find_record(fall_recs, Scheme::no_phn, 1, 20.0);
    const auto& high = find_record(fall_recs, Scheme::no_phn, 1, 22.0);
    const double floor_ber = 1.0 / static_cast<double>(high.bits);
    const double drop = low.ber / std::max(high.ber, floor_ber);
    const bool falls = drop >= 10.0;
    ss << "; no_phn drop 20->22 dB: " << drop << "x"
       << (falls ? " [>= 10x]" : " [TOO SHALLOW]");

    out.pass = ordering_ok && floor_holds && falls;
    out.detail = ss.str();
    return out;
}

Outcome criterion8_fec() {
    Outcome out;
    const ParityCheck pc = make_qc_code(96, 0x5eedc0de);

    // clean decode in one iteration
    Rng rng(99);
    Vec msg(pc.k);
    for (int i = 0; i < pc.k; ++i) msg[i] = rng.next_u64() & 1 ? 1.0 : -1.0;
    const Vec cw = encode(msg, pc);
    const DecodeResult clean = decode_bp(cw * 12.0, pc, 10);
    const bool clean_ok = clean.converged && clean.iters_used == 1 &&
                          (clean.hard_bits - cw).cwiseAbs().maxCoeff() == 0.0;

    // toy code vs exhaustive bitwise MAP (correctable single weak flip)
    const ParityCheck toy = load_alist(
        "4 2\n2 3\n1 2 1 2\n3 3\n1\n1 2\n2\n1 2\n1 2 4\n2 3 4\n");
    std::vector<Vec> cws;
    for (int m = 0; m < 4; ++m) {
        Vec mm(2);
        mm << (m & 1 ? -1.0 : 1.0), (m & 2 ? -1.0 : 1.0);
        cws.push_back(encode(mm, toy));
    }
    bool toy_ok = true;
    for (const Vec& c : cws)
        for (int flip = 0; flip < 4; ++flip) {
            Vec llr = 3.0 * c;
            llr[flip] = -2.0 * c[flip];
            const DecodeResult res = decode_bp(llr, toy, 50);
            if (!res.converged || (res.hard_bits - c).cwiseAbs().maxCoeff() != 0.0)
                toy_ok = false;
            for (int i = 0; i < 4; ++i) {
                double zp = 0, zn = 0;
                for (const Vec& c2 : cws)
                    (c2[i] > 0 ? zp : zn) += std::exp(0.5 * c2.dot(llr));
                if ((res.posterior_llr[i] > 0) != (std::log(zp / zn) > 0))
                    toy_ok = false;
            }
        }

    // 1000 random encodes satisfy every check
    bool encode_ok = true;
    for (int t = 0; t < 1000; ++t) {
        Vec m(pc.k);
        for (int i = 0; i < pc.k; ++i) m[i] = rng.next_u64() & 1 ? 1.0 : -1.0;
        if (!checks_satisfied(encode(m, pc), pc)) encode_ok = false;
    }

    out.pass = clean_ok && toy_ok && encode_ok;
    std::ostringstream ss;
    ss << "clean 1-iter decode " << (clean_ok ? "ok" : "FAIL") << "; toy MAP match "
       << (toy_ok ? "ok" : "FAIL") << "; 1000 encodes H*c=0 "
       << (encode_ok ? "ok" : "FAIL");
    out.detail = ss.str();
    return out;
}

Outcome criterion9_determinism() {
    Outcome out;
    SimConfig cfg = paper_config();
    cfg.n_subcarriers = 16;
    cfg.qam_order = 4;
    cfg.num_taps = 4;
    cfg.snr_db = {10.0, 14.0};
    cfg.schemes = {Scheme::turbo, Scheme::one_pass, Scheme::no_phn,
                   Scheme::phn_ignored};
    cfg.max_frames = 20;
    cfg.min_frame_errors = 100000;
    cfg.master_seed = 4242;
    cfg.threads = 3;

    const std::string a = sweep_csv(run_sweep(cfg), false);
    cfg.threads = 1;
    const std::string b = sweep_csv(run_sweep(cfg), false);
    const std::string c = sweep_csv(run_sweep(cfg), false);
    out.pass = (a == b) && (b == c);
    out.detail = out.pass ? "CSV bodies identical across reruns and thread counts"
                          : "CSV bodies diverged";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    auto selected = [&](int n) { return wanted.empty() || wanted.count(n) > 0; };

    struct Entry {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Entry> entries = {
        {1, "gradient fidelity (finite differences, swapped-pairing control)",
         criterion1_gradients},
        {2, "free-energy descent across update steps", criterion2_descent},
        {3, "exact-oracle agreement (MAP bits, marginal correlation)",
         criterion3_oracle},
        {4, "rotation SER and CPE tail headline numbers", criterion4_cpe_claims},
        {5, "CPE sample-mean variance vs Monte Carlo", criterion5_cpe_variance},
        {6, "degenerate-PHN equivalence with the exact demapper",
         criterion6_degenerate},
        {7, "Fig. 2 qualitative ordering, floor and waterfall",
         [] { return criterion7_fig2(std::cerr); }},
        {8, "FEC sanity (clean decode, toy MAP, encoder checks)", criterion8_fec},
        {9, "determinism of sweep CSV bodies", criterion9_determinism},
    };

    bool all_pass = true;
    for (const auto& e : entries) {
        if (!selected(e.id)) continue;
        const double t0 = now_s();
        Outcome out;
        try {
            out = e.run();
        } catch (const std::exception& ex) {
            out.pass = false;
            out.detail = std::string("exception: ") + ex.what();
        }
        const double dt = now_s() - t0;
        std::printf("[%d] %-62s %s  (%.1fs)\n      %s\n", e.id, e.name,
                    out.pass ? "PASS" : "FAIL", dt, out.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && out.pass;
    }
    std::printf(all_pass ? "acceptance: ALL PASS\n" : "acceptance: FAILURES\n");
    return all_pass ? 0 : 1;
}
