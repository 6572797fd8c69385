#include "phnturbo/phn.hpp"

#include <cmath>
#include <stdexcept>

namespace phnturbo {

double PhnParams::correlation() const {
    return std::exp(-2.0 * kPi * omega_3db * t_sample);
}

void PhnParams::validate() const {
    if (!(sigma_theta >= 0.0))
        throw std::invalid_argument("phn: sigma_theta must be >= 0");
    if (!(omega_3db > 0.0))
        throw std::invalid_argument("phn: omega_3db must be > 0");
    if (!(t_sample > 0.0))
        throw std::invalid_argument("phn: t_sample must be > 0");
}

PhnCovariance phn_covariance(const PhnParams& params, int n) {
    params.validate();
    if (n < 1) throw std::invalid_argument("phn_covariance: n must be >= 1");
    const double p = params.correlation();
    const double s2 = params.sigma_theta * params.sigma_theta;

    Vec pow_p(n);
    pow_p[0] = 1.0;
    for (int d = 1; d < n; ++d) pow_p[d] = pow_p[d - 1] * p;

    PhnCovariance cov;
    cov.n = n;
    cov.matrix.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cov.matrix(i, j) = s2 * pow_p[std::abs(i - j)];
    return cov;
}

PhnSequence sample_phn(const PhnParams& params, int n, Rng& rng) {
    params.validate();
    if (n < 1) throw std::invalid_argument("sample_phn: n must be >= 1");
    const double p = params.correlation();
    const double sigma = params.sigma_theta;
    const double innov = sigma * std::sqrt(1.0 - p * p);

    PhnSequence seq;
    seq.theta.resize(n);
    seq.theta[0] = sigma * rng.normal();
    for (int k = 1; k < n; ++k)
        seq.theta[k] = p * seq.theta[k - 1] + innov * rng.normal();
    return seq;
}

double cpe_variance(const PhnParams& params, int n) {
    params.validate();
    if (n < 1) throw std::invalid_argument("cpe_variance: n must be >= 1");
    const double p = params.correlation();
    const double s2 = params.sigma_theta * params.sigma_theta;
    // 1' Phi 1 = sigma^2 * (n + 2 * sum_{d=1}^{n-1} (n-d) p^d), by Toeplitz
    // structure; O(n) instead of the O(n^2) double sum.
    double acc = static_cast<double>(n);
    double pd = 1.0;
    for (int d = 1; d < n; ++d) {
        pd *= p;
        acc += 2.0 * (n - d) * pd;
    }
    return s2 * acc / (static_cast<double>(n) * n);
}

double cpe_tail_probability(const PhnParams& params, int n, double angle,
                            bool two_sided) {
    if (angle < 0.0)
        throw std::invalid_argument("cpe_tail_probability: angle must be >= 0");
    const double var = cpe_variance(params, n);
    if (var == 0.0) return angle > 0.0 ? 0.0 : 0.5;
    const double tail = 0.5 * std::erfc(angle / std::sqrt(2.0 * var));
    return two_sided ? 2.0 * tail : tail;
}

}  // namespace phnturbo
