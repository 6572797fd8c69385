#include "phnturbo/ofdm.hpp"

#include <cmath>
#include <stdexcept>

namespace phnturbo {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT, no scaling, e^{-2 pi j} kernel.
void fft_pow2(CVec& x) {
    const int n = static_cast<int>(x.size());
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / len;
        const cplx wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                cplx u = x[i + k];
                cplx v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

CVec dft_direct(const CVec& x) {
    const int n = static_cast<int>(x.size());
    CVec out(n);
    for (int t = 0; t < n; ++t) {
        cplx acc(0.0, 0.0);
        for (int m = 0; m < n; ++m) {
            const double ang = -2.0 * kPi * t * m / n;
            acc += x[m] * cplx(std::cos(ang), std::sin(ang));
        }
        out[t] = acc;
    }
    return out;
}

}  // namespace

void ChannelProfile::validate() const {
    if (num_taps < 1 || n_subcarriers < 1 || num_taps > n_subcarriers)
        throw std::invalid_argument("ChannelProfile: need 1 <= num_taps <= n_subcarriers");
    if (!(decay > 0.0)) throw std::invalid_argument("ChannelProfile: decay must be > 0");
}

CVec dft(const CVec& x) {
    const int n = static_cast<int>(x.size());
    if (n == 0) return x;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    if (is_pow2(n)) {
        CVec y = x;
        fft_pow2(y);
        return scale * y;
    }
    return scale * dft_direct(x);
}

CVec idft(const CVec& x) {
    // unitary inverse: conj(F conj(x))
    return dft(x.conjugate()).conjugate();
}

CMat dft_matrix(int n) {
    CMat f(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) {
            const double ang = -2.0 * kPi * l * m / n;
            f(l, m) = scale * cplx(std::cos(ang), std::sin(ang));
        }
    return f;
}

ChannelRealization sample_channel(const ChannelProfile& profile, Rng& rng) {
    profile.validate();
    const int nt = profile.num_taps;
    const int n = profile.n_subcarriers;

    Vec q(nt);
    for (int k = 0; k < nt; ++k) q[k] = std::exp(-k / profile.decay);
    q /= q.sum();

    ChannelRealization ch;
    ch.taps.resize(nt);
    for (int k = 0; k < nt; ++k) ch.taps[k] = rng.cnormal(q[k] / 2.0);

    CVec padded = CVec::Zero(n);
    padded.head(nt) = ch.taps;
    ch.h = std::sqrt(static_cast<double>(n)) * dft(padded);
    return ch;
}

RxVector apply_impairments(const CVec& d, const ChannelRealization& ch,
                           const Vec& theta, double noise_var, Rng& rng) {
    const int n = static_cast<int>(d.size());
    if (ch.h.size() != n || theta.size() != n)
        throw std::invalid_argument("apply_impairments: length mismatch");
    if (noise_var < 0.0)
        throw std::invalid_argument("apply_impairments: noise_var must be >= 0");

    CVec time = idft(ch.h.cwiseProduct(d));
    RxVector rx;
    rx.noise_var = noise_var;
    rx.r.resize(n);
    for (int i = 0; i < n; ++i) {
        const cplx rot(std::cos(theta[i]), std::sin(theta[i]));
        rx.r[i] = rot * time[i];
        if (noise_var > 0.0) rx.r[i] += rng.cnormal(noise_var);
    }
    return rx;
}

CVec ici_spectrum(const Vec& theta) {
    const int n = static_cast<int>(theta.size());
    CVec p(n);
    for (int i = 0; i < n; ++i) p[i] = cplx(std::cos(theta[i]), std::sin(theta[i]));
    return dft(p) / std::sqrt(static_cast<double>(n));
}

}  // namespace phnturbo
