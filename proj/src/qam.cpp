#include "phnturbo/qam.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace phnturbo {

namespace {

// level(row) = sum_{l=1..L2} 2^(l-1) * prod_{p=l..L2} b(row, p)
// computed for a whole axis block at once via suffix products.
Vec axis_levels(const Eigen::Ref<const Mat>& half) {
    const int n = static_cast<int>(half.rows());
    const int l2 = static_cast<int>(half.cols());
    Vec out = Vec::Zero(n);
    Vec suffix = Vec::Ones(n);
    for (int l = l2; l >= 1; --l) {
        suffix = suffix.cwiseProduct(half.col(l - 1));
        out += std::ldexp(1.0, l - 1) * suffix;
    }
    return out;
}

// nu(row) = sum_{0<i<=j<L2} 2^(i+j) * prod_{p=i..j} b(row, p) + sum 4^(i-1)
Vec axis_moment(const Eigen::Ref<const Mat>& half) {
    const int n = static_cast<int>(half.rows());
    const int l2 = static_cast<int>(half.cols());
    double c = 0.0;
    for (int i = 1; i <= l2; ++i) c += std::ldexp(1.0, 2 * (i - 1));
    Vec out = Vec::Constant(n, c);
    for (int i = 1; i < l2; ++i) {
        Vec prod = Vec::Ones(n);
        for (int j = i; j < l2; ++j) {
            prod = prod.cwiseProduct(half.col(j - 1));
            out += std::ldexp(1.0, i + j) * prod;
        }
    }
    return out;
}

// alpha_k(row) = I(k==L2)*2^(k-1) + sum_{l=1..k} 2^(l-1) * prod_{p=l..L2, p!=k} b_p
// with the convention that an empty elementwise product contributes zero
// (the indicator supplies the k = L/2 constant).
Vec axis_mean_derivative(const Eigen::Ref<const Mat>& half, int k) {
    const int n = static_cast<int>(half.rows());
    const int l2 = static_cast<int>(half.cols());
    Vec out = Vec::Zero(n);
    if (k == l2) out.array() += std::ldexp(1.0, k - 1);
    // tail = prod_{p=k+1..L2}; head accumulates prod_{p=l..k-1} going down.
    Vec tail = Vec::Ones(n);
    for (int p = k + 1; p <= l2; ++p) tail = tail.cwiseProduct(half.col(p - 1));
    Vec head = Vec::Ones(n);
    for (int l = k; l >= 1; --l) {
        if (l < k) head = head.cwiseProduct(half.col(l - 1));
        if (l == k && k == l2) continue;  // empty product
        out += std::ldexp(1.0, l - 1) * head.cwiseProduct(tail);
    }
    return out;
}

// delta_k(row) = I(k<L2)*2^(2k) + sum_{0<i<=k<=j<L2, i!=j} 2^(i+j) prod_{p=i..j,p!=k} b_p
Vec axis_moment_derivative(const Eigen::Ref<const Mat>& half, int k) {
    const int n = static_cast<int>(half.rows());
    const int l2 = static_cast<int>(half.cols());
    Vec out = Vec::Zero(n);
    if (k < l2) out.array() += std::ldexp(1.0, 2 * k);
    for (int i = 1; i <= k; ++i) {
        for (int j = std::max(i, k); j < l2; ++j) {
            if (i == j) continue;
            Vec prod = Vec::Ones(n);
            for (int p = i; p <= j; ++p)
                if (p != k) prod = prod.cwiseProduct(half.col(p - 1));
            out += std::ldexp(1.0, i + j) * prod;
        }
    }
    return out;
}

double logsumexp(const std::vector<double>& v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

}  // namespace

BitMeanMatrix::BitMeanMatrix(Mat v) : values(std::move(v)) {
    const int l = static_cast<int>(values.cols());
    if (l < 2 || l % 2 != 0)
        throw std::invalid_argument("BitMeanMatrix: bits per symbol must be even and >= 2");
    if ((values.array().abs() > 1.0).any())
        throw std::invalid_argument("BitMeanMatrix: entries must lie in [-1, 1]");
}

CVec map_bits(const BitMeanMatrix& b) {
    Vec re = axis_levels(b.real_half());
    Vec im = axis_levels(b.imag_half());
    CVec d(b.rows());
    d.real() = re;
    d.imag() = im;
    return d;
}

SymbolMoments symbol_moments(const BitMeanMatrix& b) {
    return {axis_moment(b.real_half()), axis_moment(b.imag_half())};
}

MapDerivatives map_derivatives(const BitMeanMatrix& b, int k, Axis axis) {
    if (k < 1 || k > b.bits_per_axis())
        throw std::invalid_argument("map_derivatives: k out of range");
    MapDerivatives d;
    if (axis == Axis::real) {
        Vec a = axis_mean_derivative(b.real_half(), k);
        d.d_mean = a.cast<cplx>();
        d.d_moment = axis_moment_derivative(b.real_half(), k);
    } else {
        Vec a = axis_mean_derivative(b.imag_half(), k);
        d.d_mean = (cplx(0.0, 1.0) * a.cast<cplx>().array()).matrix();
        d.d_moment = axis_moment_derivative(b.imag_half(), k);
    }
    return d;
}

ConstellationTable constellation_table(int bits_per_symbol) {
    const int l = bits_per_symbol;
    if (l < 2 || l % 2 != 0)
        throw std::invalid_argument("constellation_table: unsupported constellation");
    const int m = 1 << l;
    Mat patterns(m, l);
    for (int i = 0; i < m; ++i)
        for (int bit = 0; bit < l; ++bit)
            patterns(i, bit) = ((i >> bit) & 1) ? -1.0 : 1.0;
    ConstellationTable tab;
    tab.points = map_bits(BitMeanMatrix(patterns));
    tab.patterns = std::move(patterns);
    return tab;
}

LlrFrame demap_soft(const CVec& y, const CVec& gain, double noise_var,
                    const Mat& prior_llr) {
    if (!(noise_var > 0.0))
        throw std::invalid_argument("demap_soft: noise_var must be > 0");
    const int n = static_cast<int>(y.size());
    const int l = static_cast<int>(prior_llr.cols());
    if (gain.size() != n || prior_llr.rows() != n)
        throw std::invalid_argument("demap_soft: dimension mismatch");

    const ConstellationTable tab = constellation_table(l);
    const int m = 1 << l;

    LlrFrame out;
    out.prior = prior_llr;
    out.extrinsic = Mat::Zero(n, l);

    std::vector<double> w_pos, w_neg;
    for (int row = 0; row < n; ++row) {
        if (gain[row] == cplx(0.0, 0.0)) continue;  // erasure
        Vec logw(m);
        for (int i = 0; i < m; ++i) {
            const cplx resid = y[row] - gain[row] * tab.points[i];
            double lw = -std::norm(resid) / (2.0 * noise_var);
            // prior weight sum_l b_l * llr_l / 2 (pattern-independent parts cancel)
            for (int bit = 0; bit < l; ++bit)
                lw += 0.5 * tab.patterns(i, bit) * prior_llr(row, bit);
            logw[i] = lw;
        }
        for (int bit = 0; bit < l; ++bit) {
            w_pos.clear();
            w_neg.clear();
            for (int i = 0; i < m; ++i)
                (tab.patterns(i, bit) > 0 ? w_pos : w_neg).push_back(logw[i]);
            const double posterior = logsumexp(w_pos) - logsumexp(w_neg);
            out.extrinsic(row, bit) = posterior - prior_llr(row, bit);
        }
    }
    return out;
}

}  // namespace phnturbo
