#pragma once

#include "phnturbo/common.hpp"
#include "phnturbo/rng.hpp"

namespace phnturbo {

/// Oscillator phase-noise statistics.  The process is a stationary AR(1)
/// sequence with autocorrelation sigma_theta^2 * p^|k|, the discrete-time
/// equivalent of a single-pole filtered (PLL-tracked) oscillator.
struct PhnParams {
    double sigma_theta;  // RMS phase noise, radians
    double omega_3db;    // one-sided 3 dB oscillator bandwidth, Hz
    double t_sample;     // sample interval, seconds

    /// Lag-1 correlation p = exp(-2*pi*omega_3db*t_sample), in (0, 1).
    double correlation() const;

    /// Throws std::invalid_argument unless sigma_theta >= 0,
    /// omega_3db > 0 and t_sample > 0.
    void validate() const;
};

/// N x N Toeplitz covariance, entry (i,j) = sigma_theta^2 * p^|i-j|.
struct PhnCovariance {
    Mat matrix;
    int n = 0;
};

/// One phase-noise sample path, radians.
struct PhnSequence {
    Vec theta;
};

PhnCovariance phn_covariance(const PhnParams& params, int n);

/// Stationary AR(1) draw: theta_1 ~ N(0, sigma^2),
/// theta_k = p*theta_{k-1} + w_k with w_k ~ N(0, sigma^2*(1-p^2)).
PhnSequence sample_phn(const PhnParams& params, int n, Rng& rng);

/// Variance of the sample mean of a length-n sequence: 1' Phi 1 / n^2.
double cpe_variance(const PhnParams& params, int n);

/// Gaussian tail probability P(mean > angle); `two_sided` gives
/// P(|mean| > angle).  angle in radians.
double cpe_tail_probability(const PhnParams& params, int n, double angle,
                            bool two_sided = false);

}  // namespace phnturbo
