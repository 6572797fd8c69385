#include "phnturbo/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace phnturbo {

namespace {

// purpose tags for per-frame substreams
enum : uint64_t { kSeedMessage = 1, kSeedChannel = 2, kSeedPhase = 3, kSeedNoise = 4 };

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
    return out;
}

void apply_key(SimConfig& cfg, const std::string& key, const std::string& value) {
    auto as_d = [&] { return std::stod(value); };
    auto as_i = [&] { return std::stoi(value); };
    if (key == "n_subcarriers") cfg.n_subcarriers = as_i();
    else if (key == "qam_order") cfg.qam_order = as_i();
    else if (key == "num_taps") cfg.num_taps = as_i();
    else if (key == "tap_decay") cfg.tap_decay = as_d();
    else if (key == "sigma_theta_deg") cfg.sigma_theta_deg = as_d();
    else if (key == "omega_3db_hz") cfg.omega_3db_hz = as_d();
    else if (key == "t_sample_s") cfg.t_sample_s = as_d();
    else if (key == "snr_db") {
        cfg.snr_db.clear();
        for (const auto& v : split_list(value)) cfg.snr_db.push_back(std::stod(v));
    } else if (key == "schemes") {
        cfg.schemes.clear();
        for (const auto& v : split_list(value)) cfg.schemes.push_back(scheme_from_name(v));
    } else if (key == "min_frame_errors") cfg.min_frame_errors = as_i();
    else if (key == "max_frames") cfg.max_frames = as_i();
    else if (key == "master_seed") cfg.master_seed = std::stoull(value);
    else if (key == "symbols_per_frame") cfg.symbols_per_frame = as_i();
    else if (key == "outer_iters") cfg.outer_iters = as_i();
    else if (key == "decoder_iters") cfg.decoder_iters = as_i();
    else if (key == "detector_iters") cfg.detector_iters = as_i();
    else if (key == "standalone_decoder_iters") cfg.standalone_decoder_iters = as_i();
    else if (key == "f2_threshold")
        cfg.f2_threshold = (value == "auto")
                               ? std::numeric_limits<double>::quiet_NaN()
                               : as_d();
    else if (key == "alist") cfg.alist_path = value;
    else if (key == "output") cfg.output_path = value;
    else if (key == "threads") cfg.threads = as_i();
    else throw std::runtime_error("unknown config key: " + key);
}

SimConfig parse_json_config(const std::string& text) {
    SimConfig cfg;
    const nlohmann::json j = nlohmann::json::parse(text);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = it.value();
        std::string s;
        if (v.is_string()) s = v.get<std::string>();
        else if (v.is_array()) {
            std::string acc;
            for (const auto& e : v) {
                if (!acc.empty()) acc += ", ";
                acc += e.is_string() ? e.get<std::string>()
                                     : nlohmann::to_string(e);
            }
            s = acc;
        } else s = nlohmann::to_string(v);
        apply_key(cfg, it.key(), s);
    }
    return cfg;
}

struct FrameOutcome {
    // per scheme/outer-iter bit errors, frame error flags, fallbacks
    std::map<std::pair<int, int>, IterationStats> stats;  // (scheme idx, outer)
};

}  // namespace

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::turbo: return "turbo";
        case Scheme::one_pass: return "one_pass";
        case Scheme::no_phn: return "no_phn";
        case Scheme::phn_ignored: return "phn_ignored";
    }
    return "?";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "turbo") return Scheme::turbo;
    if (name == "one_pass") return Scheme::one_pass;
    if (name == "no_phn") return Scheme::no_phn;
    if (name == "phn_ignored") return Scheme::phn_ignored;
    throw std::runtime_error("unknown scheme: " + name);
}

PhnParams SimConfig::phn_params() const {
    return {deg2rad(sigma_theta_deg), omega_3db_hz, t_sample_s};
}

ChannelProfile SimConfig::channel_profile() const {
    return {num_taps, tap_decay, n_subcarriers};
}

double SimConfig::noise_var_for_snr_db(double snr) const {
    const double es = 2.0 * (qam_order - 1) / 3.0;
    return es / (2.0 * std::pow(10.0, snr / 10.0));
}

void SimConfig::validate() const {
    if (snr_db.empty()) throw std::runtime_error("config: snr_db must be non-empty");
    if (schemes.empty()) throw std::runtime_error("config: schemes must be non-empty");
    if (min_frame_errors < 1 || max_frames < 1)
        throw std::runtime_error("config: stop rule must be positive");
    phn_params().validate();
    channel_profile().validate();
}

SimConfig parse_sim_config(const std::string& text) {
    const size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return parse_json_config(text);

    SimConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        try {
            apply_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw std::runtime_error("config line " + std::to_string(lineno) + ": " +
                                     e.what());
        }
    }
    return cfg;
}

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_sim_config(ss.str());
}

std::string config_hash(const SimConfig& cfg) {
    std::ostringstream canon;
    canon << cfg.n_subcarriers << '|' << cfg.qam_order << '|' << cfg.num_taps << '|'
          << fmt_double(cfg.tap_decay) << '|' << fmt_double(cfg.sigma_theta_deg) << '|'
          << fmt_double(cfg.omega_3db_hz) << '|' << fmt_double(cfg.t_sample_s) << '|';
    for (double s : cfg.snr_db) canon << fmt_double(s) << ',';
    canon << '|';
    for (Scheme s : cfg.schemes) canon << scheme_name(s) << ',';
    canon << '|' << cfg.min_frame_errors << '|' << cfg.max_frames << '|'
          << cfg.master_seed << '|' << cfg.symbols_per_frame << '|' << cfg.outer_iters
          << '|' << cfg.decoder_iters << '|' << cfg.detector_iters << '|'
          << cfg.standalone_decoder_iters << '|' << fmt_double(cfg.f2_threshold) << '|'
          << cfg.alist_path;
    const std::string s = canon.str();
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

FrameRealization make_frame(const SimConfig& cfg, const ParityCheck& pc,
                            const Permutation& perm, double noise_var,
                            uint64_t frame_seed) {
    FrameConfig fc{cfg.n_subcarriers, cfg.qam_order, cfg.symbols_per_frame,
                   cfg.outer_iters, cfg.decoder_iters, cfg.detector_iters,
                   cfg.standalone_decoder_iters};
    fc.validate(pc);

    FrameRealization fr;
    Rng msg_rng(split_seed(frame_seed, kSeedMessage));
    fr.msg.resize(pc.k);
    for (int i = 0; i < pc.k; ++i) fr.msg[i] = (msg_rng.next_u64() & 1) ? -1.0 : 1.0;
    fr.codeword = encode(fr.msg, pc);
    fr.interleaved = interleave(fr.codeword, perm);

    const std::vector<BitMeanMatrix> sym_bits = frame_bits_from_codeword(fr.interleaved, fc);
    const PhnParams phn = cfg.phn_params();
    const ChannelProfile profile = cfg.channel_profile();

    for (int s = 0; s < cfg.symbols_per_frame; ++s) {
        Rng ch_rng(split_seed(split_seed(frame_seed, kSeedChannel), s));
        Rng ph_rng(split_seed(split_seed(frame_seed, kSeedPhase), s));
        Rng nz_rng(split_seed(split_seed(frame_seed, kSeedNoise), s));
        Rng nz_rng2 = nz_rng;  // identical noise for the no-PHN variant

        const ChannelRealization ch = sample_channel(profile, ch_rng);
        const PhnSequence theta = sample_phn(phn, cfg.n_subcarriers, ph_rng);
        const CVec d = map_bits(sym_bits[s]);

        fr.with_phn.rx.push_back(apply_impairments(d, ch, theta.theta, noise_var, nz_rng));
        fr.with_phn.channels.push_back(ch);
        fr.without_phn.rx.push_back(
            apply_impairments(d, ch, Vec::Zero(cfg.n_subcarriers), noise_var, nz_rng2));
        fr.without_phn.channels.push_back(ch);
    }
    return fr;
}

namespace {

ParityCheck load_code(const SimConfig& cfg) {
    if (!cfg.alist_path.empty()) return load_alist_file(cfg.alist_path);
    // built-in code: n = symbols*N*L at rate 3/4 via the 6x24 base
    const int n = cfg.symbols_per_frame * cfg.n_subcarriers *
                  FrameConfig{cfg.n_subcarriers, cfg.qam_order}.bits_per_symbol();
    if (n % 24 != 0)
        throw std::runtime_error("config: built-in code needs a frame size divisible by 24");
    return make_qc_code(n / 24, 0x5eedc0de);
}

FrameOutcome run_frame(const SimConfig& cfg, const ParityCheck& pc,
                       const Permutation& perm, double noise_var,
                       uint64_t frame_seed) {
    FrameConfig fc{cfg.n_subcarriers, cfg.qam_order, cfg.symbols_per_frame,
                   cfg.outer_iters, cfg.decoder_iters, cfg.detector_iters,
                   cfg.standalone_decoder_iters};
    const FrameRealization fr = make_frame(cfg, pc, perm, noise_var, frame_seed);

    DetectorConfig det;
    det.f2_threshold = cfg.f2_threshold;
    det.prior_phn_cov = phn_covariance(cfg.phn_params(), cfg.n_subcarriers).matrix;

    FrameOutcome out;
    for (size_t si = 0; si < cfg.schemes.size(); ++si) {
        const Scheme scheme = cfg.schemes[si];
        TurboResult res;
        switch (scheme) {
            case Scheme::turbo:
                res = run_turbo(fr.with_phn, fc, pc, perm, det, fr.msg);
                break;
            case Scheme::one_pass:
                res = run_one_pass(fr.with_phn, fc, pc, perm, det, fr.msg);
                break;
            case Scheme::no_phn:
                res = run_baseline(BaselineKind::no_phn, fr.without_phn, fc, pc, perm,
                                   fr.msg);
                break;
            case Scheme::phn_ignored:
                res = run_baseline(BaselineKind::phn_ignored, fr.with_phn, fc, pc, perm,
                                   fr.msg);
                break;
        }
        for (size_t it = 0; it < res.per_outer_iteration.size(); ++it)
            out.stats[{static_cast<int>(si), static_cast<int>(it) + 1}] =
                res.per_outer_iteration[it];
    }
    return out;
}

}  // namespace

std::vector<SweepRecord> run_sweep(const SimConfig& cfg, std::ostream* progress) {
    cfg.validate();
    const ParityCheck pc = load_code(cfg);
    const Permutation perm = random_permutation(pc.n, split_seed(cfg.master_seed, 0));
    const std::string hash = config_hash(cfg);

    int n_threads = cfg.threads > 0 ? cfg.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;

    std::vector<SweepRecord> records;
    uint64_t point_index = 0;
    for (double snr : cfg.snr_db) {
        const double noise_var = cfg.noise_var_for_snr_db(snr);
        const uint64_t point_seed = split_seed(cfg.master_seed, 1000 + point_index++);

        // chunked deterministic schedule: frame f uses split(point_seed, f);
        // results are consumed in frame order so the stop rule and the
        // worker count cannot interact.
        std::vector<FrameOutcome> outcomes;
        long frames_done = 0;
        bool stop = false;
        long final_scheme_errors = 0;  // frame errors of the stop-rule scheme

        while (!stop && frames_done < cfg.max_frames) {
            const long chunk =
                std::min<long>(n_threads * 4L, cfg.max_frames - frames_done);
            std::vector<FrameOutcome> chunk_out(chunk);
            {
                std::vector<std::thread> pool;
                std::mutex next_mutex;
                long next = 0;
                for (int t = 0; t < n_threads; ++t)
                    pool.emplace_back([&] {
                        while (true) {
                            long mine;
                            {
                                std::lock_guard<std::mutex> g(next_mutex);
                                if (next >= chunk) return;
                                mine = next++;
                            }
                            chunk_out[mine] =
                                run_frame(cfg, pc, perm, noise_var,
                                          split_seed(point_seed, frames_done + mine));
                        }
                    });
                for (auto& th : pool) th.join();
            }
            for (long i = 0; i < chunk && !stop; ++i) {
                outcomes.push_back(std::move(chunk_out[i]));
                ++frames_done;
                // stop rule is evaluated on the first scheme's final iteration
                const auto& st = outcomes.back().stats;
                int last_iter = 1;
                for (const auto& kv : st)
                    if (kv.first.first == 0) last_iter = std::max(last_iter, kv.first.second);
                if (st.at({0, last_iter}).frame_error) ++final_scheme_errors;
                if (final_scheme_errors >= cfg.min_frame_errors) stop = true;
            }
            if (progress)
                (*progress) << "snr " << snr << ": " << frames_done << " frames, "
                            << final_scheme_errors << " frame errors\n";
        }

        // aggregate per (scheme, outer_iter)
        for (size_t si = 0; si < cfg.schemes.size(); ++si) {
            int iters = 1;
            for (const auto& kv : outcomes.front().stats)
                if (kv.first.first == static_cast<int>(si))
                    iters = std::max(iters, kv.first.second);
            for (int it = 1; it <= iters; ++it) {
                SweepRecord rec;
                rec.snr_db = snr;
                rec.scheme = cfg.schemes[si];
                rec.outer_iter = it;
                rec.frames = static_cast<long>(outcomes.size());
                rec.bits = rec.frames * pc.k;
                long fallbacks = 0;
                long detect_calls = 0;
                for (const auto& oc : outcomes) {
                    const IterationStats& st = oc.stats.at({static_cast<int>(si), it});
                    rec.bit_errors += st.bit_errors;
                    rec.frame_errors += st.frame_error ? 1 : 0;
                    fallbacks += st.detector_fallbacks;
                    detect_calls += cfg.symbols_per_frame;
                }
                rec.ber = static_cast<double>(rec.bit_errors) / rec.bits;
                rec.fer = static_cast<double>(rec.frame_errors) / rec.frames;
                rec.fallback_rate =
                    detect_calls > 0 ? static_cast<double>(fallbacks) / detect_calls : 0.0;
                rec.seed = cfg.master_seed;
                rec.config_hash = hash;
                rec.hit_max_frames = !stop;
                records.push_back(rec);
            }
        }
    }
    return records;
}

std::string sweep_csv(const std::vector<SweepRecord>& records,
                      bool with_timestamp_comment) {
    std::ostringstream out;
    if (with_timestamp_comment) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        out << "# generated " << now << "\n";
    }
    out << "schema_version,snr_db,scheme,outer_iter,frames,bits,bit_errors,ber,"
           "frame_errors,fer,fallback_rate,seed,config_hash,hit_max_frames\n";
    for (const auto& r : records) {
        out << 1 << ',' << fmt_double(r.snr_db) << ',' << scheme_name(r.scheme) << ','
            << r.outer_iter << ',' << r.frames << ',' << r.bits << ',' << r.bit_errors
            << ',' << fmt_double(r.ber) << ',' << r.frame_errors << ','
            << fmt_double(r.fer) << ',' << fmt_double(r.fallback_rate) << ',' << r.seed
            << ',' << r.config_hash << ',' << (r.hit_max_frames ? 1 : 0) << "\n";
    }
    return out.str();
}

void write_sweep_csv(const std::vector<SweepRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write CSV file: " + path);
    out << sweep_csv(records);
}

double rotation_ser(int qam_order, double angle) {
    int bits = 0;
    while ((1 << bits) < qam_order) ++bits;
    if ((1 << bits) != qam_order || bits % 2 != 0)
        throw std::invalid_argument("rotation_ser: order must be square QAM");
    const int side = 1 << (bits / 2);
    const double c = std::cos(angle), s = std::sin(angle);

    auto nearest_level = [&](double x) {
        // nearest odd integer, clamped to +-(side-1): outer regions extend
        // to infinity
        const double lv = 2.0 * std::floor(x / 2.0) + 1.0;
        return std::clamp(lv, -(double)(side - 1), (double)(side - 1));
    };

    int errors = 0;
    for (int a = -(side - 1); a <= side - 1; a += 2)
        for (int b = -(side - 1); b <= side - 1; b += 2) {
            const double xr = a * c - b * s;
            const double xi = a * s + b * c;
            if (nearest_level(xr) != a || nearest_level(xi) != b) ++errors;
        }
    return static_cast<double>(errors) / qam_order;
}

CpeReport cpe_report(const PhnParams& params, int n, int qam_order, double angle) {
    CpeReport rep;
    rep.angle = angle;
    rep.cpe_var = cpe_variance(params, n);
    rep.cpe_std_deg = rad2deg(std::sqrt(rep.cpe_var));
    rep.tail_probability = cpe_tail_probability(params, n, angle, false);
    rep.tail_two_sided = cpe_tail_probability(params, n, angle, true);
    rep.rot_ser = rotation_ser(qam_order, angle);
    return rep;
}

std::string cpe_report_text(const CpeReport& rep) {
    std::ostringstream out;
    out << "angle_deg = " << fmt_double(rad2deg(rep.angle)) << "\n"
        << "cpe_variance_rad2 = " << fmt_double(rep.cpe_var) << "\n"
        << "cpe_std_deg = " << fmt_double(rep.cpe_std_deg) << "\n"
        << "tail_probability_one_sided = " << fmt_double(rep.tail_probability) << "\n"
        << "tail_probability_two_sided = " << fmt_double(rep.tail_two_sided) << "\n"
        << "rotation_ser = " << fmt_double(rep.rot_ser) << "\n";
    return out.str();
}

void emit_plot_data(const std::vector<SweepRecord>& records,
                    const std::string& data_path, const std::string& svg_path,
                    double floor) {
    if (records.empty()) throw std::runtime_error("emit_plot_data: no records");

    struct Point {
        double snr, ber;
        bool clipped;
    };
    std::map<std::string, std::vector<Point>> series;
    for (const auto& r : records) {
        std::string key = scheme_name(r.scheme);
        if (r.scheme == Scheme::turbo) key += "_iter" + std::to_string(r.outer_iter);
        const bool clip = r.ber < floor;
        series[key].push_back({r.snr_db, clip ? floor : r.ber, clip});
    }
    for (auto& kv : series)
        std::sort(kv.second.begin(), kv.second.end(),
                  [](const Point& a, const Point& b) { return a.snr < b.snr; });

    {
        std::ofstream out(data_path);
        if (!out) throw std::runtime_error("cannot write plot data: " + data_path);
        out << "series,snr_db,ber,clipped\n";
        for (const auto& kv : series)
            for (const Point& p : kv.second)
                out << kv.first << ',' << fmt_double(p.snr) << ',' << fmt_double(p.ber)
                    << ',' << (p.clipped ? 1 : 0) << "\n";
    }

    // simple log-y SVG chart
    double snr_min = 1e300, snr_max = -1e300, ber_min = 1.0;
    for (const auto& kv : series)
        for (const Point& p : kv.second) {
            snr_min = std::min(snr_min, p.snr);
            snr_max = std::max(snr_max, p.snr);
            ber_min = std::min(ber_min, p.ber);
        }
    if (snr_max == snr_min) snr_max = snr_min + 1.0;
    const double log_lo = std::floor(std::log10(std::max(ber_min, floor)));
    const double log_hi = 0.0;
    const int w = 640, h = 480, ml = 70, mr = 20, mt = 20, mb = 50;
    auto xmap = [&](double snr) {
        return ml + (snr - snr_min) / (snr_max - snr_min) * (w - ml - mr);
    };
    auto ymap = [&](double ber) {
        const double ly = std::log10(ber);
        return mt + (log_hi - ly) / (log_hi - log_lo) * (h - mt - mb);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};

    std::ofstream svg(svg_path);
    if (!svg) throw std::runtime_error("cannot write SVG: " + svg_path);
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    for (double ly = log_lo; ly <= log_hi + 1e-9; ly += 1.0) {
        const double y = ymap(std::pow(10.0, ly));
        svg << "<line x1='" << ml << "' y1='" << y << "' x2='" << w - mr << "' y2='" << y
            << "' stroke='#ddd'/>\n<text x='8' y='" << y + 4
            << "' font-size='11'>1e" << static_cast<int>(ly) << "</text>\n";
    }
    const double step = (snr_max - snr_min) <= 10 ? 1.0 : 5.0;
    for (double x = std::ceil(snr_min); x <= snr_max + 1e-9; x += step) {
        svg << "<line x1='" << xmap(x) << "' y1='" << mt << "' x2='" << xmap(x)
            << "' y2='" << h - mb << "' stroke='#eee'/>\n<text x='" << xmap(x) - 8
            << "' y='" << h - mb + 16 << "' font-size='11'>" << x << "</text>\n";
    }
    svg << "<text x='" << w / 2 - 30 << "' y='" << h - 12
        << "' font-size='12'>Es/N0 (dB)</text>\n";
    svg << "<text x='14' y='" << mt - 4 << "' font-size='12'>BER</text>\n";
    int ci = 0;
    int ly = mt + 10;
    for (const auto& kv : series) {
        const char* col = colors[ci % 6];
        svg << "<polyline fill='none' stroke='" << col << "' stroke-width='1.5' points='";
        for (const Point& p : kv.second) svg << xmap(p.snr) << ',' << ymap(p.ber) << ' ';
        svg << "'/>\n";
        for (const Point& p : kv.second)
            svg << "<circle cx='" << xmap(p.snr) << "' cy='" << ymap(p.ber)
                << "' r='3' fill='" << col << "'/>\n";
        svg << "<text x='" << w - mr - 150 << "' y='" << ly << "' font-size='11' fill='"
            << col << "'>" << kv.first << "</text>\n";
        ly += 14;
        ++ci;
    }
    svg << "</svg>\n";
}

}  // namespace phnturbo
