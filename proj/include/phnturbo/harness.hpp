#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "phnturbo/turbo.hpp"

namespace phnturbo {

enum class Scheme { turbo, one_pass, no_phn, phn_ignored };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

/// Full experiment description.  Loadable from a flat key=value file or the
/// equivalent JSON object (see README for the schema).
struct SimConfig {
    // link
    int n_subcarriers = 64;
    int qam_order = 64;
    int num_taps = 10;
    double tap_decay = 3.0;
    double sigma_theta_deg = 3.0;
    double omega_3db_hz = 1e5;
    double t_sample_s = 5e-8;
    // experiment
    std::vector<double> snr_db = {24.0};
    std::vector<Scheme> schemes = {Scheme::turbo};
    int min_frame_errors = 30;
    int max_frames = 200;
    uint64_t master_seed = 1;
    int symbols_per_frame = 6;
    int outer_iters = 3;
    int decoder_iters = 6;
    int detector_iters = 5;
    int standalone_decoder_iters = 18;
    double f2_threshold = std::numeric_limits<double>::quiet_NaN();  // NaN = auto
    std::string alist_path;  // empty = built-in QC code
    std::string output_path = "sweep.csv";
    int threads = 0;  // 0 = hardware concurrency

    PhnParams phn_params() const;
    ChannelProfile channel_profile() const;
    /// Es/N0 per subcarrier -> per-dimension noise variance sigma^2,
    /// with E|h|^2 = 1 and E|d|^2 = 2(M-1)/3 on the integer grid.
    double noise_var_for_snr_db(double snr_db) const;

    void validate() const;
};

SimConfig load_sim_config(const std::string& path);
SimConfig parse_sim_config(const std::string& text);

/// One CSV row.  ber = bit_errors / bits exactly.
struct SweepRecord {
    double snr_db = 0.0;
    Scheme scheme = Scheme::turbo;
    int outer_iter = 1;
    long frames = 0;
    long bits = 0;
    long bit_errors = 0;
    double ber = 0.0;
    long frame_errors = 0;
    double fer = 0.0;
    double fallback_rate = 0.0;
    uint64_t seed = 0;
    std::string config_hash;
    bool hit_max_frames = false;
};

/// FNV-1a over the canonical key=value form of the config, hex string.
std::string config_hash(const SimConfig& cfg);

/// Run the Monte Carlo sweep.  Deterministic for a fixed config: frames are
/// pre-assigned substream seeds split from master_seed by frame index, and
/// results are reduced in frame order, so the thread count cannot change
/// the output.
std::vector<SweepRecord> run_sweep(const SimConfig& cfg,
                                   std::ostream* progress = nullptr);

std::string sweep_csv(const std::vector<SweepRecord>& records,
                      bool with_timestamp_comment = true);
void write_sweep_csv(const std::vector<SweepRecord>& records,
                     const std::string& path);

/// Fraction of the M constellation points that a noise-free rotation by
/// `angle` carries out of their minimum-distance decision region.
double rotation_ser(int qam_order, double angle);

/// The common-phase-error argument in one table: sample-mean variance, the
/// tail probability of exceeding `angle`, and the rotation SER at `angle`.
struct CpeReport {
    double angle = 0.0;           // radians
    double cpe_var = 0.0;         // radians^2
    double cpe_std_deg = 0.0;
    double tail_probability = 0.0;
    double tail_two_sided = 0.0;
    double rot_ser = 0.0;
};

CpeReport cpe_report(const PhnParams& params, int n, int qam_order, double angle);
std::string cpe_report_text(const CpeReport& rep);

/// Plot-ready series: one (snr, ber) line per (scheme, outer_iter), BER
/// clipped at `floor` for the log axis (clipped points flagged in the data
/// file), plus a simple SVG line chart.
void emit_plot_data(const std::vector<SweepRecord>& records,
                    const std::string& data_path, const std::string& svg_path,
                    double floor = 1e-7);

/// Per-frame transmit state shared by all schemes at one frame index.
struct FrameRealization {
    Vec msg;
    Vec codeword;
    Vec interleaved;
    FrameInputs with_phn;
    FrameInputs without_phn;
};

/// Deterministic frame generation: substreams are split from `frame_seed`
/// by purpose (message, channel, phase, noise), so the no-PHN variant
/// differs from the with-PHN one only by the rotation.
FrameRealization make_frame(const SimConfig& cfg, const ParityCheck& pc,
                            const Permutation& perm, double noise_var,
                            uint64_t frame_seed);

}  // namespace phnturbo
