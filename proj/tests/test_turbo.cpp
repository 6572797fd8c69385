#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "phnturbo/harness.hpp"
#include "phnturbo/turbo.hpp"

using namespace phnturbo;

namespace {

// small-frame config: 16 subcarriers, 4-QAM, 6 symbols -> 192 coded bits,
// matched by a z=8 QC code (rate 3/4, k=144)
SimConfig small_cfg() {
    SimConfig cfg;
    cfg.n_subcarriers = 16;
    cfg.qam_order = 4;
    cfg.num_taps = 4;
    cfg.symbols_per_frame = 6;
    cfg.snr_db = {12.0};
    cfg.schemes = {Scheme::turbo};
    return cfg;
}

FrameConfig frame_cfg(const SimConfig& cfg) {
    return {cfg.n_subcarriers, cfg.qam_order,  cfg.symbols_per_frame,
            cfg.outer_iters,   cfg.decoder_iters, cfg.detector_iters,
            cfg.standalone_decoder_iters};
}

DetectorConfig det_cfg(const SimConfig& cfg) {
    DetectorConfig det;
    det.prior_phn_cov =
        phn_covariance(cfg.phn_params(), cfg.n_subcarriers).matrix;
    return det;
}

}  // namespace

TEST_CASE("frame bit mapping round-trips") {
    const SimConfig cfg = small_cfg();
    const FrameConfig fc = frame_cfg(cfg);
    Rng rng(3);
    Vec coded(fc.coded_bits_per_frame());
    for (int i = 0; i < coded.size(); ++i) coded[i] = rng.next_u64() & 1 ? 1.0 : -1.0;
    const auto mats = frame_bits_from_codeword(coded, fc);
    REQUIRE(static_cast<int>(mats.size()) == fc.symbols_per_frame);
    const int l = fc.bits_per_symbol();
    int idx = 0;
    for (const auto& m : mats)
        for (int n = 0; n < fc.n_subcarriers; ++n)
            for (int bit = 0; bit < l; ++bit) CHECK(m.values(n, bit) == coded[idx++]);
}

TEST_CASE("frame config invariant is enforced") {
    const ParityCheck pc = make_qc_code(8, 1);
    FrameConfig fc = frame_cfg(small_cfg());
    fc.symbols_per_frame = 5;
    CHECK_THROWS_AS(fc.validate(pc), std::invalid_argument);
}

TEST_CASE("turbo: clean high-SNR frame decodes error-free in one iteration") {
    SimConfig cfg = small_cfg();
    cfg.sigma_theta_deg = 1e-9;
    cfg.snr_db = {30.0};
    const ParityCheck pc = make_qc_code(8, 1);
    const Permutation perm = random_permutation(pc.n, 11);
    const FrameRealization fr = make_frame(cfg, pc, perm, cfg.noise_var_for_snr_db(30.0), 77);

    const TurboResult res =
        run_turbo(fr.without_phn, frame_cfg(cfg), pc, perm, det_cfg(cfg), fr.msg);
    CHECK(res.per_outer_iteration[0].bit_errors == 0);
    CHECK(!res.per_outer_iteration[0].frame_error);
    CHECK(res.per_outer_iteration[0].decoder_converged == 1);
    CHECK((res.decoded_msg - fr.msg).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("turbo: deterministic for a fixed seed") {
    const SimConfig cfg = small_cfg();
    const ParityCheck pc = make_qc_code(8, 1);
    const Permutation perm = random_permutation(pc.n, 11);
    const double nv = cfg.noise_var_for_snr_db(12.0);
    const FrameRealization f1 = make_frame(cfg, pc, perm, nv, 42);
    const FrameRealization f2 = make_frame(cfg, pc, perm, nv, 42);
    for (int s = 0; s < cfg.symbols_per_frame; ++s)
        CHECK((f1.with_phn.rx[s].r - f2.with_phn.rx[s].r).cwiseAbs().maxCoeff() == 0.0);

    const TurboResult a =
        run_turbo(f1.with_phn, frame_cfg(cfg), pc, perm, det_cfg(cfg), f1.msg);
    const TurboResult b =
        run_turbo(f2.with_phn, frame_cfg(cfg), pc, perm, det_cfg(cfg), f2.msg);
    CHECK((a.decoded_msg - b.decoded_msg).cwiseAbs().maxCoeff() == 0.0);
    for (size_t i = 0; i < a.per_outer_iteration.size(); ++i)
        CHECK(a.per_outer_iteration[i].bit_errors == b.per_outer_iteration[i].bit_errors);
}

TEST_CASE("turbo: first iteration is reproduced exactly by a 1-iteration run") {
    // extrinsic hygiene: the iteration-1 path cannot depend on anything the
    // decoder later feeds back
    const SimConfig cfg = small_cfg();
    const ParityCheck pc = make_qc_code(8, 1);
    const Permutation perm = random_permutation(pc.n, 11);
    const double nv = cfg.noise_var_for_snr_db(10.0);
    for (uint64_t seed : {1, 2, 3}) {
        const FrameRealization fr = make_frame(cfg, pc, perm, nv, seed);
        FrameConfig three = frame_cfg(cfg);
        FrameConfig one = three;
        one.outer_iters = 1;
        const TurboResult r3 =
            run_turbo(fr.with_phn, three, pc, perm, det_cfg(cfg), fr.msg);
        const TurboResult r1 =
            run_turbo(fr.with_phn, one, pc, perm, det_cfg(cfg), fr.msg);
        CHECK(r3.per_outer_iteration[0].bit_errors == r1.per_outer_iteration[0].bit_errors);
        CHECK(r3.per_outer_iteration[0].frame_error == r1.per_outer_iteration[0].frame_error);
    }
}

TEST_CASE("one-pass equals turbo iteration 1 when the decoder budgets match") {
    SimConfig cfg = small_cfg();
    cfg.sigma_theta_deg = 1e-9;
    cfg.decoder_iters = cfg.standalone_decoder_iters;  // align the budgets
    const ParityCheck pc = make_qc_code(8, 1);
    const Permutation perm = random_permutation(pc.n, 11);
    const double nv = cfg.noise_var_for_snr_db(9.0);
    for (uint64_t seed : {5, 6, 7}) {
        const FrameRealization fr = make_frame(cfg, pc, perm, nv, seed);
        FrameConfig fc = frame_cfg(cfg);
        fc.outer_iters = 1;
        const TurboResult t =
            run_turbo(fr.without_phn, fc, pc, perm, det_cfg(cfg), fr.msg);
        const TurboResult o =
            run_one_pass(fr.without_phn, frame_cfg(cfg), pc, perm, det_cfg(cfg), fr.msg);
        CHECK((t.decoded_msg - o.decoded_msg).cwiseAbs().maxCoeff() == 0.0);
        CHECK(t.per_outer_iteration[0].bit_errors == o.per_outer_iteration[0].bit_errors);
    }
}

TEST_CASE("fallback-only frames: one-pass equals the PHN-ignoring baseline") {
    const SimConfig cfg = small_cfg();
    const ParityCheck pc = make_qc_code(8, 1);
    const Permutation perm = random_permutation(pc.n, 11);
    const double nv = cfg.noise_var_for_snr_db(11.0);
    DetectorConfig det = det_cfg(cfg);
    det.f2_threshold = -1e9;  // guard always trips

    for (uint64_t seed : {21, 22, 23}) {
        const FrameRealization fr = make_frame(cfg, pc, perm, nv, seed);
        const TurboResult o =
            run_one_pass(fr.with_phn, frame_cfg(cfg), pc, perm, det, fr.msg);
        CHECK(o.per_outer_iteration[0].detector_fallbacks == cfg.symbols_per_frame);
        const TurboResult b = run_baseline(BaselineKind::phn_ignored, fr.with_phn,
                                           frame_cfg(cfg), pc, perm, fr.msg);
        CHECK((o.decoded_msg - b.decoded_msg).cwiseAbs().maxCoeff() == 0.0);
        CHECK(o.per_outer_iteration[0].bit_errors == b.per_outer_iteration[0].bit_errors);
    }
}

TEST_CASE("fallback frames still decode inside the full turbo loop") {
    const SimConfig cfg = small_cfg();
    const ParityCheck pc = make_qc_code(8, 1);
    const Permutation perm = random_permutation(pc.n, 11);
    DetectorConfig det = det_cfg(cfg);
    det.f2_threshold = -1e9;
    const FrameRealization fr = make_frame(cfg, pc, perm, cfg.noise_var_for_snr_db(14.0), 31);
    const TurboResult res =
        run_turbo(fr.with_phn, frame_cfg(cfg), pc, perm, det, fr.msg);
    REQUIRE(res.per_outer_iteration.size() == 3);
    for (const auto& it : res.per_outer_iteration)
        CHECK(it.detector_fallbacks == cfg.symbols_per_frame);
    // decoding proceeded to a result at every iteration
    CHECK(res.decoded_msg.size() == pc.k);
}

TEST_CASE("baselines coincide when sigma_theta = 0") {
    // sigma = 0 makes the AR(1) draw all-zero, so both variants coincide
    SimConfig cfg = small_cfg();
    cfg.sigma_theta_deg = 0.0;
    const ParityCheck pc = make_qc_code(8, 1);
    const Permutation perm = random_permutation(pc.n, 11);
    const FrameRealization fr =
        make_frame(cfg, pc, perm, cfg.noise_var_for_snr_db(10.0), 55);
    for (int s = 0; s < cfg.symbols_per_frame; ++s)
        CHECK((fr.with_phn.rx[s].r - fr.without_phn.rx[s].r).cwiseAbs().maxCoeff() == 0.0);

    const TurboResult a = run_baseline(BaselineKind::no_phn, fr.without_phn,
                                       frame_cfg(cfg), pc, perm, fr.msg);
    const TurboResult b = run_baseline(BaselineKind::phn_ignored, fr.with_phn,
                                       frame_cfg(cfg), pc, perm, fr.msg);
    CHECK(a.per_outer_iteration[0].bit_errors == b.per_outer_iteration[0].bit_errors);
    CHECK((a.decoded_msg - b.decoded_msg).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("turbo: feedback recovers frames with an injected high-CPE symbol") {
    // paper configuration with symbol 0's phase sequence shifted so its
    // sample mean is exactly 10 degrees; iteration 3 must not be worse than
    // iteration 1 on at least 90% of frames
    SimConfig cfg;
    cfg.n_subcarriers = 64;
    cfg.qam_order = 64;
    cfg.num_taps = 10;
    const ParityCheck pc = make_qc_code(96, 0x5eedc0de);
    const Permutation perm = random_permutation(pc.n, 11);
    const FrameConfig fc = frame_cfg(cfg);
    const DetectorConfig det = det_cfg(cfg);
    const double noise_var = cfg.noise_var_for_snr_db(24.0);
    const PhnParams phn = cfg.phn_params();
    const ChannelProfile profile = cfg.channel_profile();

    const int frames = 200;
    int ok = 0;
    int it1_failures = 0;
    for (int f = 0; f < frames; ++f) {
        const uint64_t seed = split_seed(4242, f);
        Rng msg_rng(split_seed(seed, 1));
        Vec msg(pc.k);
        for (int i = 0; i < pc.k; ++i) msg[i] = msg_rng.next_u64() & 1 ? -1.0 : 1.0;
        const Vec interleaved = interleave(encode(msg, pc), perm);
        const auto sym_bits = frame_bits_from_codeword(interleaved, fc);

        FrameInputs in;
        for (int s = 0; s < fc.symbols_per_frame; ++s) {
            Rng ch_rng(split_seed(split_seed(seed, 2), s));
            Rng ph_rng(split_seed(split_seed(seed, 3), s));
            Rng nz_rng(split_seed(split_seed(seed, 4), s));
            const ChannelRealization ch = sample_channel(profile, ch_rng);
            Vec theta = sample_phn(phn, cfg.n_subcarriers, ph_rng).theta;
            if (s == 0) theta.array() += deg2rad(10.0) - theta.mean();
            in.rx.push_back(apply_impairments(map_bits(sym_bits[s]), ch, theta,
                                              noise_var, nz_rng));
            in.channels.push_back(ch);
        }
        const TurboResult res = run_turbo(in, fc, pc, perm, det, msg);
        if (res.per_outer_iteration[0].bit_errors > 0) ++it1_failures;
        if (res.per_outer_iteration[2].bit_errors <=
            res.per_outer_iteration[0].bit_errors)
            ++ok;
    }
    CHECK(it1_failures > 0);  // the injection does hurt iteration 1
    CHECK(ok >= frames * 9 / 10);
}
