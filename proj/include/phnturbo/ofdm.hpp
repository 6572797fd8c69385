#pragma once

#include "phnturbo/common.hpp"
#include "phnturbo/phn.hpp"
#include "phnturbo/rng.hpp"

namespace phnturbo {

/// Exponential power delay profile, q_k proportional to exp(-k/decay),
/// normalized to unit total power.
struct ChannelProfile {
    int num_taps = 10;
    double decay = 3.0;      // per-tap exponential decay constant, samples
    int n_subcarriers = 64;

    void validate() const;
};

/// One block-fading realization: time-domain taps and the length-N
/// frequency response h_n = sum_k taps_k exp(-2*pi*j*n*k/N).
struct ChannelRealization {
    CVec taps;
    CVec h;
};

/// Time-domain received vector (post CP removal) and the per-dimension
/// noise variance sigma^2 that produced it.
struct RxVector {
    CVec r;
    double noise_var = 0.0;
};

ChannelRealization sample_channel(const ChannelProfile& profile, Rng& rng);

/// r = diag(exp(j*theta)) * F^H * diag(h) * d + n, n ~ CN(0, 2*sigma^2 I).
/// The exact rotation is applied here; the small-angle linearization is a
/// detector-side model only.
RxVector apply_impairments(const CVec& d, const ChannelRealization& ch,
                           const Vec& theta, double noise_var, Rng& rng);

/// ICI spectrum c = (1/sqrt(N)) F exp(j*theta); c_0 is the CPE term.
CVec ici_spectrum(const Vec& theta);

/// Unitary DFT / inverse DFT (radix-2 FFT for power-of-two lengths,
/// direct summation otherwise).
CVec dft(const CVec& x);
CVec idft(const CVec& x);

/// The unitary DFT matrix F, F(l,m) = exp(-2*pi*j*l*m/N)/sqrt(N).
CMat dft_matrix(int n);

}  // namespace phnturbo
