#include "phnturbo/vi_detector.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <stdexcept>

namespace phnturbo {

namespace {

// Cholesky of a covariance, with an eps*I ridge retry for singular inputs
// (e.g. a zero phase prior).  Bumps *events on the retry path.
Eigen::LLT<Mat> factor_cov(Mat cov, int* events) {
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() == Eigen::Success) return llt;
    const int n = static_cast<int>(cov.rows());
    double eps = 1e-10 * cov.trace() / n;
    if (!(eps > 0.0)) eps = 1e-12;
    cov.diagonal().array() += eps;
    if (events) ++(*events);
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
        throw std::domain_error("phase prior covariance is not positive definite");
    return llt;
}

double logdet_from_llt(const Eigen::LLT<Mat>& llt) {
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Vec prior_mean_or_zero(const DetectorConfig& cfg, int n) {
    if (cfg.prior_phn_mean.size() == 0) return Vec::Zero(n);
    if (cfg.prior_phn_mean.size() != n)
        throw std::invalid_argument("detector: prior_phn_mean length mismatch");
    return cfg.prior_phn_mean;
}

// (1/N) sum_m w_m exp(+2 pi j m t / N) for t = 0..N-1, via one unitary DFT.
CVec circulant_kernel(const Vec& w) {
    const int n = static_cast<int>(w.size());
    return dft(w.cast<cplx>()).conjugate() / std::sqrt(static_cast<double>(n));
}

double bit_entropy_sum(const Mat& means) {
    double acc = 0.0;
    for (int j = 0; j < means.cols(); ++j)
        for (int i = 0; i < means.rows(); ++i) {
            const double p = 0.5 * (1.0 + means(i, j));
            const double q = 1.0 - p;
            if (p > 0.0) acc += p * std::log(p);
            if (q > 0.0) acc += q * std::log(q);
        }
    return acc;
}

}  // namespace

void PosteriorState::set_t_column(int k, Axis axis, const Vec& t) {
    const int l2 = bit_means.bits_per_axis();
    if (k < 1 || k > l2) throw std::invalid_argument("set_t_column: k out of range");
    const int col = (axis == Axis::real ? k - 1 : l2 + k - 1);
    t_bits.col(col) = t;
    for (int i = 0; i < t.size(); ++i)
        bit_means.values(i, col) = clamp_mean(std::tanh(t[i]));
}

void DetectorWorkspace::refresh_symbol_stats(const PosteriorState& state) {
    const CVec d = map_bits(state.bit_means);
    f_r = d.real();
    f_i = d.imag();
    const SymbolMoments mom = symbol_moments(state.bit_means);
    nu_r = mom.nu_r;
    nu_i = mom.nu_i;
    sym_var = nu_r + nu_i - d.cwiseAbs2();
    x_m = w * d;
}

void DetectorWorkspace::refresh_phase_ops(const PosteriorState& state) {
    const Vec& m = state.phn.m_theta;
    const Vec s_diag = state.phn.s_theta.diagonal();
    const Vec one_plus_m2 = Vec::Ones(n) + m.cwiseProduct(m);

    const CVec q_psi = circulant_kernel(s_diag);
    const CVec q_zz = circulant_kernel(one_plus_m2);

    const CVec h = [&] {
        CVec out(n);
        // recover h from W's first row: W(0,k) = h_k / sqrt(N)
        const double root_n = std::sqrt(static_cast<double>(n));
        for (int k = 0; k < n; ++k) out[k] = w(0, k) * root_n;
        return out;
    }();

    psi.resize(n, n);
    m0.resize(n, n);
    for (int l = 0; l < n; ++l) {
        const cplx hl = std::conj(h[l]);
        for (int k = 0; k < n; ++k) {
            const int t = ((k - l) % n + n) % n;
            const cplx hh = hl * h[k];
            psi(l, k) = hh * q_psi[t];
            m0(l, k) = hh * (q_psi[t] + q_zz[t]);
        }
    }
    z = (CVec::Ones(n) + cplx(0.0, 1.0) * m.cast<cplx>()).asDiagonal() * w;

    m2_diag = m0.diagonal().real();
    m1 = m0;
    m1.diagonal().setZero();
    m2 = CMat::Zero(n, n);
    m2.diagonal() = m0.diagonal();
}

DetectorWorkspace assemble_workspace(const PosteriorState& state,
                                     const ChannelRealization& ch) {
    DetectorWorkspace ws;
    ws.n = static_cast<int>(ch.h.size());
    ws.bits = state.bit_means.bits_per_symbol();
    if (state.bit_means.rows() != ws.n)
        throw std::invalid_argument("assemble_workspace: dimension mismatch");
    ws.w = dft_matrix(ws.n).adjoint() * ch.h.asDiagonal();
    ws.abs_h2 = ch.h.cwiseAbs2();
    ws.refresh_symbol_stats(state);
    ws.refresh_phase_ops(state);
    return ws;
}

FreeEnergy free_energy(const PosteriorState& state, const DetectorWorkspace& ws,
                       const CVec& r, double noise_var, const Mat& prior_llr,
                       const DetectorConfig& cfg) {
    const int n = ws.n;
    const double s2 = noise_var;

    FreeEnergy f{};

    // (i) cross entropy of the bit means against the priors
    double t1 = 0.0;
    for (int j = 0; j < prior_llr.cols(); ++j)
        for (int i = 0; i < n; ++i) {
            const double mu = clamp_mean(llr_to_mean(prior_llr(i, j)), cfg.clamp_eps);
            const double b = state.bit_means.values(i, j);
            t1 -= 0.5 * (1.0 + b) * std::log(0.5 * (1.0 + mu)) +
                  0.5 * (1.0 - b) * std::log(0.5 * (1.0 - mu));
        }
    f.prior_bits = t1;

    f.prior_phn = f2_term(state, cfg);
    f.entropy_bits = bit_entropy_sum(state.bit_means.values);

    Eigen::LLT<Mat> llt_s(state.phn.s_theta);
    if (llt_s.info() != Eigen::Success)
        throw std::domain_error("free_energy: S_theta is not positive definite");
    f.entropy_phn = -0.5 * logdet_from_llt(llt_s) -
                    0.5 * n * std::log(2.0 * kPi * std::exp(1.0));

    // (v): |r|^2 - 2 Re(r^H Z f) + Re(f^H M0 f) + m2' v, all over 2 sigma^2.
    const Vec& m = state.phn.m_theta;
    cplx rzf(0.0, 0.0);
    for (int i = 0; i < n; ++i)
        rzf += std::conj(r[i]) * cplx(1.0, m[i]) * ws.x_m[i];
    CVec fb(n);
    fb.real() = ws.f_r;
    fb.imag() = ws.f_i;
    const double quad = (fb.adjoint() * (ws.m0 * fb))(0).real();
    const double bracket = r.squaredNorm() - 2.0 * rzf.real() + quad +
                           ws.m2_diag.dot(ws.sym_var);
    f.likelihood = bracket / (2.0 * s2) + n * std::log(2.0 * kPi * s2);
    return f;
}

double f2_term(const PosteriorState& state, const DetectorConfig& cfg) {
    const int n = static_cast<int>(state.phn.m_theta.size());
    Eigen::LLT<Mat> llt = factor_cov(cfg.prior_phn_cov, nullptr);
    const Vec mu = (cfg.prior_phn_mean.size() == n) ? cfg.prior_phn_mean
                                                    : Vec(Vec::Zero(n));
    const Vec dm = state.phn.m_theta - mu;
    const double quad = dm.dot(llt.solve(dm));
    const double tr = llt.solve(state.phn.s_theta).trace();
    return 0.5 * (tr + quad) +
           0.5 * (n * std::log(2.0 * kPi) + logdet_from_llt(llt));
}

double default_f2_threshold(const Mat& prior_phn_cov) {
    const int n = static_cast<int>(prior_phn_cov.rows());
    Eigen::LLT<Mat> llt = factor_cov(prior_phn_cov, nullptr);
    const double q = boost::math::quantile(boost::math::chi_squared(n), 0.999);
    return 0.5 * (n * std::log(2.0 * kPi) + logdet_from_llt(llt)) + 0.5 * q +
           0.5 * n;
}

Mat update_s_theta(const PosteriorState&, const DetectorWorkspace& ws,
                   double noise_var, const DetectorConfig& cfg,
                   int* regularization_events) {
    const int n = ws.n;
    Eigen::LLT<Mat> llt_phi = factor_cov(cfg.prior_phn_cov, regularization_events);
    Mat a = llt_phi.solve(Mat::Identity(n, n));
    const double cbar = ws.sym_var.cwiseProduct(ws.abs_h2).mean();
    a.diagonal() += (ws.x_m.cwiseAbs2().array() + cbar).matrix() / noise_var;

    Eigen::LLT<Mat> llt_a(a);
    if (llt_a.info() != Eigen::Success) {
        double eps = 1e-10 * a.trace() / n;
        if (!(eps > 0.0)) eps = 1e-12;
        a.diagonal().array() += eps;
        if (regularization_events) ++(*regularization_events);
        llt_a.compute(a);
        if (llt_a.info() != Eigen::Success)
            throw std::domain_error("update_s_theta: singular precision matrix");
    }
    Mat s = llt_a.solve(Mat::Identity(n, n));
    return 0.5 * (s + s.transpose());
}

Vec update_m_theta(const PosteriorState& state, const DetectorWorkspace& ws,
                   const CVec& r, double noise_var, const DetectorConfig& cfg) {
    const int n = ws.n;
    Vec im_rx(n);
    for (int i = 0; i < n; ++i)
        im_rx[i] = std::imag(std::conj(r[i]) * ws.x_m[i]);
    Vec rhs = -im_rx / noise_var;
    if (cfg.prior_phn_mean.size() == n &&
        cfg.prior_phn_mean.cwiseAbs().maxCoeff() > 0.0) {
        Eigen::LLT<Mat> llt_phi = factor_cov(cfg.prior_phn_cov, nullptr);
        rhs += llt_phi.solve(cfg.prior_phn_mean);
    }
    return state.phn.s_theta * rhs;
}

int update_bit_means(PosteriorState& state, DetectorWorkspace& ws, const CVec& r,
                     double noise_var, const Mat& prior_t, int k, Axis axis,
                     const DetectorConfig& cfg) {
    const int n = ws.n;
    const int l2 = state.bit_means.bits_per_axis();
    const int col = (axis == Axis::real ? k - 1 : l2 + k - 1);

    const CVec zr = ws.z.adjoint() * r;
    const MapDerivatives der = map_derivatives(state.bit_means, k, axis);

    Vec t_new(n);
    if (axis == Axis::real) {
        const Vec a = der.d_mean.real();
        const CVec m0_fr = ws.m0 * ws.f_r.cast<cplx>();
        const CVec m0_fi = ws.m0 * ws.f_i.cast<cplx>();
        const Vec m1_fr = m0_fr.real() - ws.m2_diag.cwiseProduct(ws.f_r);
        t_new = prior_t.col(col) +
                (a.cwiseProduct(zr.real() - m1_fr + m0_fi.imag()) -
                 0.5 * der.d_moment.cwiseProduct(ws.m2_diag)) /
                    noise_var;
    } else {
        const Vec a = der.d_mean.imag();  // beta_k = j * a
        const CVec m0_fr = ws.m0 * ws.f_r.cast<cplx>();
        const CVec m0_fi = ws.m0 * ws.f_i.cast<cplx>();
        const Vec m1_fi = m0_fi.real() - ws.m2_diag.cwiseProduct(ws.f_i);
        t_new = prior_t.col(col) +
                (a.cwiseProduct(zr.imag() - m1_fi - m0_fr.imag()) -
                 0.5 * der.d_moment.cwiseProduct(ws.m2_diag)) /
                    noise_var;
    }

    if (ws.t_unclamped.rows() == n && ws.t_unclamped.cols() == state.t_bits.cols())
        ws.t_unclamped.col(col) = t_new;
    int clamps = 0;
    for (int i = 0; i < n; ++i) {
        if (std::abs(t_new[i]) > cfg.t_max) {
            t_new[i] = std::copysign(cfg.t_max, t_new[i]);
            ++clamps;
        }
    }
    state.set_t_column(k, axis, t_new);
    ws.refresh_symbol_stats(state);
    return clamps;
}

namespace {

void record_trace(DetectorTrace* trace, int sweep, const char* step,
                  const PosteriorState& state, const DetectorWorkspace& ws,
                  const CVec& r, double noise_var, const Mat& prior_llr,
                  const DetectorConfig& cfg, bool clamped) {
    if (!trace) return;
    const FreeEnergy f = free_energy(state, ws, r, noise_var, prior_llr, cfg);
    Eigen::SelfAdjointEigenSolver<Mat> es(state.phn.s_theta,
                                          Eigen::EigenvaluesOnly);
    trace->rows.push_back({sweep, step, f.total(), f.prior_bits, f.prior_phn,
                           f.entropy_bits, f.entropy_phn, f.likelihood,
                           state.phn.m_theta.norm(),
                           es.eigenvalues().minCoeff(), clamped});
}

}  // namespace

DetectorResult detect(const RxVector& rx, const ChannelRealization& ch,
                      const Mat& prior_llr, const DetectorConfig& cfg) {
    const int n = static_cast<int>(rx.r.size());
    const int bits = static_cast<int>(prior_llr.cols());
    if (ch.h.size() != n || prior_llr.rows() != n)
        throw std::invalid_argument("detect: dimension mismatch");
    if (cfg.prior_phn_cov.rows() != n || cfg.prior_phn_cov.cols() != n)
        throw std::invalid_argument("detect: prior_phn_cov must be N x N");
    if (!prior_llr.allFinite())
        throw std::invalid_argument("detect: priors must be finite");
    if (cfg.num_iter < 1) throw std::invalid_argument("detect: num_iter must be >= 1");

    DetectorResult res;

    // Prior prep; a regularized copy is used consistently below.
    DetectorConfig run_cfg = cfg;
    {
        Eigen::LLT<Mat> probe(run_cfg.prior_phn_cov);
        if (probe.info() != Eigen::Success) {
            double eps = 1e-10 * run_cfg.prior_phn_cov.trace() / n;
            if (!(eps > 0.0)) eps = 1e-12;
            run_cfg.prior_phn_cov.diagonal().array() += eps;
            ++res.regularization_events;
        }
    }
    const double threshold = std::isnan(cfg.f2_threshold)
                                 ? default_f2_threshold(run_cfg.prior_phn_cov)
                                 : cfg.f2_threshold;
    res.f2_threshold = threshold;

    // Initialization: bit means from the priors, zero phase posterior.
    Mat prior_t = (0.5 * prior_llr)
                      .cwiseMax(-run_cfg.t_max)
                      .cwiseMin(run_cfg.t_max);
    PosteriorState state;
    state.t_bits = prior_t;
    Mat means = prior_t.array().tanh().matrix();
    for (int j = 0; j < means.cols(); ++j)
        for (int i = 0; i < means.rows(); ++i)
            means(i, j) = clamp_mean(means(i, j), run_cfg.clamp_eps);
    state.bit_means = BitMeanMatrix(means);
    if (cfg.warm_start) {
        state.phn = *cfg.warm_start;
    } else {
        state.phn.m_theta = Vec::Zero(n);
        state.phn.s_theta = Mat::Zero(n, n);
    }

    DetectorWorkspace ws;
    ws.n = n;
    ws.bits = bits;
    ws.w = dft_matrix(n).adjoint() * ch.h.asDiagonal();
    ws.abs_h2 = ch.h.cwiseAbs2();
    ws.t_unclamped = prior_t;
    ws.refresh_symbol_stats(state);

    const int l2 = bits / 2;
    for (int sweep = 1; sweep <= run_cfg.num_iter; ++sweep) {
        ws.refresh_symbol_stats(state);
        // Algorithm order recomputes (S, m) from the current bit means, so a
        // warm-started phase posterior is consumed by letting the first
        // sweep's bit updates run against it unchanged.
        const bool hold_phase = cfg.warm_start && sweep == 1;
        if (!hold_phase) {
            state.phn.s_theta = update_s_theta(state, ws, rx.noise_var, run_cfg,
                                               &res.regularization_events);
            if (cfg.trace) {
                ws.refresh_phase_ops(state);
                record_trace(cfg.trace, sweep, "s_theta", state, ws, rx.r,
                             rx.noise_var, prior_llr, run_cfg, false);
            }
            state.phn.m_theta =
                update_m_theta(state, ws, rx.r, rx.noise_var, run_cfg);
        }
        ws.refresh_phase_ops(state);
        if (cfg.trace)
            record_trace(cfg.trace, sweep, "m_theta", state, ws, rx.r,
                         rx.noise_var, prior_llr, run_cfg, false);

        for (int k = l2; k >= 1; --k) {
            int c = update_bit_means(state, ws, rx.r, rx.noise_var, prior_t, k,
                                     Axis::real, run_cfg);
            res.clamp_events += c;
            if (cfg.trace)
                record_trace(cfg.trace, sweep, ("bits_r" + std::to_string(k)).c_str(),
                             state, ws, rx.r, rx.noise_var, prior_llr, run_cfg,
                             c > 0);
            c = update_bit_means(state, ws, rx.r, rx.noise_var, prior_t, k,
                                 Axis::imag, run_cfg);
            res.clamp_events += c;
            if (cfg.trace)
                record_trace(cfg.trace, sweep, ("bits_i" + std::to_string(k)).c_str(),
                             state, ws, rx.r, rx.noise_var, prior_llr, run_cfg,
                             c > 0);
        }
    }

    res.f2 = f2_term(state, run_cfg);
    res.phn = state.phn;
    if (res.f2 > threshold) {
        res.fell_back = true;
        res.llr = demap_soft(dft(rx.r), ch.h, rx.noise_var, prior_llr);
    } else {
        res.llr.prior = prior_llr;
        res.llr.extrinsic = 2.0 * (ws.t_unclamped - prior_t);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

double GradientReport::max_error() const {
    double m = std::max(err_m_theta, err_s_inv);
    if (err_bit_columns.size() > 0) m = std::max(m, err_bit_columns.maxCoeff());
    return m;
}

namespace {

double eval_free_energy(const DetectorInstance& inst, const PosteriorState& s) {
    DetectorWorkspace ws = assemble_workspace(s, inst.ch);
    return free_energy(s, ws, inst.r, inst.noise_var, inst.prior_llr, inst.cfg)
        .total();
}

double block_error(const Vec& fd, const Vec& g) {
    const double scale = g.cwiseAbs().maxCoeff() + 1e-30;
    return (fd - g).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

GradientReport gradient_check(const DetectorInstance& inst,
                              const PosteriorState& point, double fd_step,
                              BitGradPairing pairing) {
    const int n = static_cast<int>(inst.r.size());
    const int bits = static_cast<int>(inst.prior_llr.cols());
    const int l2 = bits / 2;
    const double s2 = inst.noise_var;
    const double h = fd_step;

    DetectorWorkspace ws = assemble_workspace(point, inst.ch);
    Eigen::LLT<Mat> llt_phi = factor_cov(inst.cfg.prior_phn_cov, nullptr);
    const Vec mu_th = prior_mean_or_zero(inst.cfg, n);

    GradientReport rep;
    rep.err_bit_columns = Vec::Zero(bits);

    // --- m_theta block
    {
        Vec im_rx(n);
        for (int i = 0; i < n; ++i)
            im_rx[i] = std::imag(std::conj(inst.r[i]) * ws.x_m[i]);
        const double cbar = ws.sym_var.cwiseProduct(ws.abs_h2).mean();
        Vec g = llt_phi.solve(point.phn.m_theta - mu_th);
        g += (im_rx + (ws.x_m.cwiseAbs2().array() + cbar).matrix().cwiseProduct(
                          point.phn.m_theta)) /
             s2;

        Vec fd(n);
        for (int i = 0; i < n; ++i) {
            PosteriorState sp = point, sm = point;
            sp.phn.m_theta[i] += h;
            sm.phn.m_theta[i] -= h;
            fd[i] = (eval_free_energy(inst, sp) - eval_free_energy(inst, sm)) /
                    (2.0 * h);
        }
        rep.err_m_theta = block_error(fd, g);
    }

    // --- S_theta^{-1} block (symmetric parameterization)
    {
        const Mat& s = point.phn.s_theta;
        const double cbar = ws.sym_var.cwiseProduct(ws.abs_h2).mean();
        Mat a = llt_phi.solve(Mat::Identity(n, n));
        a.diagonal() += (ws.x_m.cwiseAbs2().array() + cbar).matrix() / s2;
        const Mat g = 0.5 * (s - s * a * s);

        const Mat j = s.llt().solve(Mat::Identity(n, n));
        double worst = 0.0, scale = g.cwiseAbs().maxCoeff() + 1e-30;
        for (int i = 0; i < n; ++i)
            for (int jj = i; jj < n; ++jj) {
                Mat jp = j, jm = j;
                jp(i, jj) += h;
                jm(i, jj) -= h;
                if (i != jj) {
                    jp(jj, i) += h;
                    jm(jj, i) -= h;
                }
                PosteriorState sp = point, sm = point;
                sp.phn.s_theta = jp.llt().solve(Mat::Identity(n, n));
                sm.phn.s_theta = jm.llt().solve(Mat::Identity(n, n));
                const double fd =
                    (eval_free_energy(inst, sp) - eval_free_energy(inst, sm)) /
                    (2.0 * h);
                const double pred = g(i, jj) * (i == jj ? 1.0 : 2.0);
                worst = std::max(worst, std::abs(fd - pred) / scale);
            }
        rep.err_s_inv = worst;
    }

    // --- bit columns, via t = atanh(mean)
    const CVec zr = ws.z.adjoint() * inst.r;
    const CVec m0_fr = ws.m0 * ws.f_r.cast<cplx>();
    const CVec m0_fi = ws.m0 * ws.f_i.cast<cplx>();
    const Vec m1t1 = (ws.m1.transpose() * CVec::Ones(n)).real();
    for (int k = 1; k <= l2; ++k) {
        for (Axis axis : {Axis::real, Axis::imag}) {
            const int col = (axis == Axis::real ? k - 1 : l2 + k - 1);
            const MapDerivatives der = map_derivatives(point.bit_means, k, axis);
            Vec g_b(n);
            if (axis == Axis::real) {
                const Vec a = der.d_mean.real();
                const Vec m1_fr = m0_fr.real() - ws.m2_diag.cwiseProduct(ws.f_r);
                if (pairing == BitGradPairing::diag_with_moments) {
                    g_b = (a.cwiseProduct(-zr.real() + m1_fr - m0_fi.imag()) +
                           0.5 * der.d_moment.cwiseProduct(ws.m2_diag)) /
                          s2;
                } else {
                    // appendix-literal pairing: diagonal with means, M1 row
                    // sums with the moment derivative (regression control)
                    g_b = (a.cwiseProduct(-zr.real() +
                                          ws.m2_diag.cwiseProduct(ws.f_r) -
                                          m0_fi.imag()) +
                           der.d_moment.cwiseProduct(m1t1)) /
                          s2;
                }
            } else {
                const Vec a = der.d_mean.imag();
                const Vec m1_fi = m0_fi.real() - ws.m2_diag.cwiseProduct(ws.f_i);
                if (pairing == BitGradPairing::diag_with_moments) {
                    g_b = (a.cwiseProduct(-zr.imag() + m1_fi + m0_fr.imag()) +
                           0.5 * der.d_moment.cwiseProduct(ws.m2_diag)) /
                          s2;
                } else {
                    g_b = (a.cwiseProduct(-zr.imag() +
                                          ws.m2_diag.cwiseProduct(ws.f_i) +
                                          m0_fr.imag()) +
                           der.d_moment.cwiseProduct(m1t1)) /
                          s2;
                }
            }
            Vec g_t(n), fd(n);
            for (int i = 0; i < n; ++i) {
                const double b = point.bit_means.values(i, col);
                const double t_mu =
                    0.5 * std::clamp(inst.prior_llr(i, col), -2.0 * inst.cfg.t_max,
                                     2.0 * inst.cfg.t_max);
                const double db = -t_mu + std::atanh(b) + g_b[i];
                g_t[i] = (1.0 - b * b) * db;

                PosteriorState sp = point, sm = point;
                Vec tp = point.t_bits.col(col), tm = tp;
                tp[i] += h;
                tm[i] -= h;
                sp.set_t_column(k, axis, tp);
                sm.set_t_column(k, axis, tm);
                fd[i] = (eval_free_energy(inst, sp) - eval_free_energy(inst, sm)) /
                        (2.0 * h);
            }
            rep.err_bit_columns[col] = block_error(fd, g_t);
        }
    }
    return rep;
}

DetectorInstance random_gradcheck_instance(uint64_t seed, int n, int qam_order,
                                           PosteriorState* point) {
    int bits = 0;
    while ((1 << bits) < qam_order) ++bits;
    if ((1 << bits) != qam_order || bits % 2 != 0)
        throw std::invalid_argument("random_gradcheck_instance: bad QAM order");

    Rng rng(seed);
    DetectorInstance inst;
    inst.ch.h.resize(n);
    for (int i = 0; i < n; ++i) inst.ch.h[i] = rng.cnormal(0.5);
    inst.noise_var = 0.05 * (qam_order == 4 ? 2.0 : 2.0 * (qam_order - 1) / 3.0);
    inst.prior_llr.resize(n, bits);
    for (int j = 0; j < bits; ++j)
        for (int i = 0; i < n; ++i)
            inst.prior_llr(i, j) = 1.5 * rng.normal();

    PhnParams params{deg2rad(3.0), 1e5, 5e-8};
    inst.cfg.prior_phn_cov = phn_covariance(params, n).matrix;
    inst.cfg.prior_phn_mean = Vec::Zero(n);

    PosteriorState st;
    st.t_bits.resize(n, bits);
    for (int j = 0; j < bits; ++j)
        for (int i = 0; i < n; ++i)
            st.t_bits(i, j) = 1.45 * (2.0 * rng.uniform() - 1.0);
    st.bit_means = BitMeanMatrix(st.t_bits.array().tanh().matrix());
    st.phn.m_theta.resize(n);
    for (int i = 0; i < n; ++i) st.phn.m_theta[i] = 0.03 * rng.normal();
    Mat a(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) a(i, j) = 0.02 * rng.normal();
    st.phn.s_theta = a * a.transpose() + 0.005 * Mat::Identity(n, n);

    // a received vector consistent with the model, plus noise
    BitMeanMatrix hard(st.bit_means.values.array().sign().matrix());
    const CVec d = map_bits(hard);
    CVec time = dft_matrix(n).adjoint() * (inst.ch.h.cwiseProduct(d));
    inst.r.resize(n);
    for (int i = 0; i < n; ++i)
        inst.r[i] = time[i] + rng.cnormal(inst.noise_var);

    if (point) *point = st;
    return inst;
}

OracleResult exact_posterior_oracle(const DetectorInstance& inst) {
    const int n = static_cast<int>(inst.r.size());
    const int bits = static_cast<int>(inst.prior_llr.cols());
    if (n * bits > 12)
        throw std::invalid_argument(
            "exact_posterior_oracle: instance too large for enumeration");

    const double s2 = inst.noise_var;
    const CMat w = dft_matrix(n).adjoint() * inst.ch.h.asDiagonal();
    Eigen::LLT<Mat> llt_phi = factor_cov(inst.cfg.prior_phn_cov, nullptr);
    const Mat phi_inv = llt_phi.solve(Mat::Identity(n, n));
    const double logdet_phi = logdet_from_llt(llt_phi);
    const Vec mu_th = prior_mean_or_zero(inst.cfg, n);
    const CVec rot = (CVec::Ones(n) + cplx(0.0, 1.0) * mu_th.cast<cplx>());

    const long total = 1L << (n * bits);
    Mat b(n, bits);

    // streaming log-sum-exp per bit sign, plus argmax for the joint MAP
    Mat logz_pos = Mat::Constant(n, bits, -std::numeric_limits<double>::infinity());
    Mat logz_neg = logz_pos;
    double best = -std::numeric_limits<double>::infinity();
    Mat best_bits;

    auto lse_update = [](double& acc, double x) {
        if (x == -std::numeric_limits<double>::infinity()) return;
        if (acc == -std::numeric_limits<double>::infinity()) {
            acc = x;
            return;
        }
        const double mx = std::max(acc, x);
        acc = mx + std::log(std::exp(acc - mx) + std::exp(x - mx));
    };

    for (long cfg_idx = 0; cfg_idx < total; ++cfg_idx) {
        double prior_lw = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < bits; ++j) {
                const double bit = ((cfg_idx >> (i * bits + j)) & 1) ? -1.0 : 1.0;
                b(i, j) = bit;
                prior_lw += 0.5 * bit * inst.prior_llr(i, j);
            }
        const CVec s = w * map_bits(BitMeanMatrix(b));
        const CVec wres = inst.r - rot.cwiseProduct(s);
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = std::imag(std::conj(wres[i]) * s[i]);
        Mat a = phi_inv;
        a.diagonal() += s.cwiseAbs2() / s2;
        Eigen::LLT<Mat> llt_a(a);
        const double logdet_a = logdet_from_llt(llt_a);
        const double lp = -n * std::log(2.0 * kPi * s2) -
                          0.5 * (logdet_phi + logdet_a) -
                          wres.squaredNorm() / (2.0 * s2) +
                          v.dot(llt_a.solve(v)) / (2.0 * s2 * s2) + prior_lw;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < bits; ++j)
                lse_update(b(i, j) > 0 ? logz_pos(i, j) : logz_neg(i, j), lp);
        if (lp > best) {
            best = lp;
            best_bits = b;
        }
    }

    OracleResult out;
    out.marginal_llr = logz_pos - logz_neg;
    out.marginal_mean = (0.5 * out.marginal_llr).array().tanh().matrix();
    out.map_bits = best_bits;
    return out;
}

}  // namespace phnturbo
