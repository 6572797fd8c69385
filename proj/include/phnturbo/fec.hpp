#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phnturbo/common.hpp"
#include "phnturbo/rng.hpp"

namespace phnturbo {

/// Sparse binary parity-check matrix plus the precomputed encoding
/// structure (pivot positions and reduced rows from GF(2) elimination).
/// Codewords are +-1 vectors; a check is satisfied when the product of its
/// participating bits is +1.
struct ParityCheck {
    int n = 0;  // code length
    int k = 0;  // message length (n - rows, full row rank required)
    std::vector<std::vector<int>> check_bits;  // per check: bit indices
    std::vector<std::vector<int>> bit_checks;  // per bit: check indices

    // encoding structure
    std::vector<int> parity_pos;   // pivot columns, one per check row
    std::vector<int> message_pos;  // the remaining columns, ascending
    // reduced_rows[i]: message-bit index list XORed into parity_pos[i]
    std::vector<std::vector<int>> reduced_rows;

    int rows() const { return static_cast<int>(check_bits.size()); }
    double rate() const { return static_cast<double>(k) / n; }
};

/// Parse the standard alist text format (1-based indices).  Throws
/// std::runtime_error with a line number on malformed input and
/// std::runtime_error if the matrix is not full row rank.
ParityCheck load_alist(const std::string& text);
ParityCheck load_alist_file(const std::string& path);
std::string emit_alist(const ParityCheck& pc);

/// Deterministic WiMAX-style quasi-cyclic code: 6 x 24 base matrix,
/// expansion factor z (z = 96 gives n = 2304, rate 3/4), dual-diagonal
/// parity part, seeded circulant shifts with 4-cycle avoidance.
ParityCheck make_qc_code(int z, uint64_t seed);

/// Systematic encode: msg (+-1, length k) -> codeword (+-1, length n)
/// with H*c = 0 over GF(2).
Vec encode(const Vec& msg, const ParityCheck& pc);

struct DecodeResult {
    Vec posterior_llr;
    Vec hard_bits;  // +-1
    bool converged = false;
    int iters_used = 0;
};

/// Log-domain sum-product decoding; early exit once all checks pass.
DecodeResult decode_bp(const Vec& llr, const ParityCheck& pc, int max_iter);

bool checks_satisfied(const Vec& hard_bits, const ParityCheck& pc);

/// Seeded uniform random permutation (Fisher-Yates over the splitmix64
/// stream, so identical across platforms).
struct Permutation {
    std::vector<int> perm;
    uint64_t seed = 0;
};

Permutation random_permutation(int n, uint64_t seed);

/// y[i] = x[perm[i]]
Vec interleave(const Vec& x, const Permutation& p);
/// inverse: x[perm[i]] = y[i]
Vec deinterleave(const Vec& y, const Permutation& p);

}  // namespace phnturbo
