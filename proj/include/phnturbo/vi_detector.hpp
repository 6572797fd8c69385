#pragma once

#include <optional>
#include <string>
#include <vector>

#include "phnturbo/common.hpp"
#include "phnturbo/llr.hpp"
#include "phnturbo/ofdm.hpp"
#include "phnturbo/qam.hpp"

namespace phnturbo {

/// Gaussian posterior over the length-N phase sequence.
struct PhnPosterior {
    Vec m_theta;  // radians
    Mat s_theta;  // radians^2, symmetric PD after every update
};

/// The variational parameters jointly descended on.  t_bits and bit_means
/// are the same object in two coordinates: bit_means = tanh(t_bits).
struct PosteriorState {
    PhnPosterior phn;
    BitMeanMatrix bit_means;
    Mat t_bits;

    /// Overwrite one axis column (k is 1-based) from new t values,
    /// keeping bit_means consistent.
    void set_t_column(int k, Axis axis, const Vec& t);
};

/// Per-sweep diagnostic record (optional; see DetectorConfig::trace).
struct DetectorTrace {
    struct Row {
        int sweep;
        std::string step;
        double f_total;
        double f1, f2, f3, f4, f5;
        double m_norm;
        double s_min_eig;
        bool clamped;  // a saturation clamp fired during this step
    };
    std::vector<Row> rows;
};

struct DetectorConfig {
    int num_iter = 5;
    /// Guard threshold on the free-energy term F2; NaN selects the
    /// statistical default derived from the phase prior (see
    /// default_f2_threshold).
    double f2_threshold = std::numeric_limits<double>::quiet_NaN();
    double clamp_eps = 1e-12;
    double t_max = 30.0;  // tanh^-1 saturation cap on bit LLR halves
    Vec prior_phn_mean;   // mu_theta; empty = zeros
    Mat prior_phn_cov;    // phi_theta; required (use phn_covariance(...).matrix)
    /// Optional warm start for (m_theta, S_theta); default re-initializes.
    const PhnPosterior* warm_start = nullptr;
    DetectorTrace* trace = nullptr;
};

/// Precomputed operators for one detector run.
///   z   = diag(1 + j m_theta) F^H H
///   psi = H^H F diag(S_theta) F^H H  (diag keeps only the diagonal of S)
///   m0  = psi + z^H z;  m1 = off-diagonal part;  m2 = diagonal part
///   x_m = diag(F^H H f(Bhat)) held as its diagonal vector
/// plus the cached bit-derived vectors the updates consume.
struct DetectorWorkspace {
    int n = 0;
    int bits = 0;       // L
    CMat w;             // F^H H (fixed per run)
    Vec abs_h2;         // |h|^2

    CMat z, psi, m0, m1, m2;
    Vec m2_diag;        // real diagonal of m0

    CVec x_m;           // diag entries of X_m
    Vec f_r, f_i;       // real / imaginary parts of f(Bhat)
    Vec nu_r, nu_i;     // posterior symbol second moments per axis
    Vec sym_var;        // nu_r + nu_i - |f(Bhat)|^2  (>= 0)

    /// Pre-clamp fixed-point values of the last bit update per column.
    /// The iteration state saturates at t_max for stability, but the
    /// returned extrinsic 2*(t - t_mu) is formed from these so that
    /// saturated priors cannot cancel the channel evidence.
    Mat t_unclamped;

    /// Refresh x_m, f_r, f_i, nu_*, sym_var from the current bit means.
    void refresh_symbol_stats(const PosteriorState& state);
    /// Refresh z, psi, m0/m1/m2 from the current (m_theta, S_theta).
    void refresh_phase_ops(const PosteriorState& state);
};

DetectorWorkspace assemble_workspace(const PosteriorState& state,
                                     const ChannelRealization& ch);

/// Five-term free energy split; prior_phn is the F2 guard term.
struct FreeEnergy {
    double prior_bits;    // (i)   -E_Q[log p(B)]
    double prior_phn;     // (ii)  -E_Q[log p(theta)]  = F2
    double entropy_bits;  // (iii)  E_Q[log Q(B)]
    double entropy_phn;   // (iv)   E_Q[log Q(theta)]
    double likelihood;    // (v)   -E_Q[log p(r|B,theta)]
    double total() const {
        return prior_bits + prior_phn + entropy_bits + entropy_phn + likelihood;
    }
};

/// Full-constant free energy of the current state.  Requires S_theta PD
/// (throws std::domain_error otherwise).  prior_llr holds the bit priors.
FreeEnergy free_energy(const PosteriorState& state, const DetectorWorkspace& ws,
                       const CVec& r, double noise_var, const Mat& prior_llr,
                       const DetectorConfig& cfg);

/// F2 alone: 0.5*[tr(phi^-1 S) + (m-mu)' phi^-1 (m-mu)] + 0.5*log((2 pi)^N |phi|).
double f2_term(const PosteriorState& state, const DetectorConfig& cfg);

/// Default guard threshold:
///   0.5*log((2 pi)^N |phi|) + 0.5*chi2_quantile(N, 0.999) + 0.5*N.
double default_f2_threshold(const Mat& prior_phn_cov);

/// Closed-form coordinate updates (Algorithm steps; each minimizes the free
/// energy over its own block given the current workspace).
Mat update_s_theta(const PosteriorState& state, const DetectorWorkspace& ws,
                   double noise_var, const DetectorConfig& cfg,
                   int* regularization_events = nullptr);
Vec update_m_theta(const PosteriorState& state, const DetectorWorkspace& ws,
                   const CVec& r, double noise_var, const DetectorConfig& cfg);

/// Fixed-point update of one bit column: evaluates the stationarity RHS at
/// the current state, overwrites column k of the given axis and refreshes
/// the dependent workspace vectors.  Returns the number of saturation
/// clamps that fired.
int update_bit_means(PosteriorState& state, DetectorWorkspace& ws, const CVec& r,
                     double noise_var, const Mat& prior_t, int k, Axis axis,
                     const DetectorConfig& cfg);

struct DetectorResult {
    LlrFrame llr;          // extrinsic = 2*(t_posterior - t_prior)
    PhnPosterior phn;
    bool fell_back = false;
    double f2 = 0.0;
    double f2_threshold = 0.0;
    int clamp_events = 0;
    int regularization_events = 0;
};

/// Bit-level variational detection of one OFDM symbol.  Runs cfg.num_iter
/// coordinate-descent sweeps (S_theta, m_theta, then bit columns k = L/2..1,
/// real then imaginary, refreshing derivatives after each column), then
/// applies the F2 guard: if F2 exceeds the threshold the VI output is
/// discarded and the PHN-ignoring soft demapper supplies the extrinsics.
DetectorResult detect(const RxVector& rx, const ChannelRealization& ch,
                      const Mat& prior_llr, const DetectorConfig& cfg);

// ---------------------------------------------------------------------------
// Validation oracles
// ---------------------------------------------------------------------------

/// One self-contained detection problem, used by the checkers and the CLI.
struct DetectorInstance {
    CVec r;
    ChannelRealization ch;
    double noise_var = 0.0;
    Mat prior_llr;
    DetectorConfig cfg;
};

/// Gradient pairing convention for the bit blocks.  The detector always
/// uses diag_with_moments (diagonal of M0 multiplies the second moments,
/// off-diagonal part multiplies the mean quadratic forms); the swapped
/// variant exists only as a regression control and must fail the check.
enum class BitGradPairing { diag_with_moments, offdiag_with_moments };

struct GradientReport {
    double err_m_theta = 0.0;
    double err_s_inv = 0.0;
    Vec err_bit_columns;  // length L, real columns then imaginary
    double max_error() const;
    bool pass(double tol) const { return max_error() <= tol; }
};

/// Compares the analytic gradient of the free energy w.r.t. m_theta,
/// S_theta^-1 and every t column against central finite differences at the
/// given interior point.  Errors are max-norm per block, relative to the
/// block's largest analytic entry.
GradientReport gradient_check(const DetectorInstance& inst,
                              const PosteriorState& point,
                              double fd_step = 1e-6,
                              BitGradPairing pairing = BitGradPairing::diag_with_moments);

/// A random interior point + instance for gradient checking.
DetectorInstance random_gradcheck_instance(uint64_t seed, int n, int qam_order,
                                           PosteriorState* point);

struct OracleResult {
    Mat marginal_mean;  // N x L exact posterior bit means
    Mat marginal_llr;   // N x L
    Mat map_bits;       // N x L, +-1, joint MAP configuration
};

/// Exact bit posterior under the linearized model
///   r = diag(1 + j theta) F^H H f(B) + n,  theta ~ N(mu, phi),
/// by enumerating all 2^(N*L) bit matrices and marginalizing theta in
/// closed form (real Gaussian integral).  Requires N*L <= 12.
OracleResult exact_posterior_oracle(const DetectorInstance& inst);

}  // namespace phnturbo
