#include "phnturbo/fec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace phnturbo {

namespace {

// dense GF(2) rows as 64-bit blocks
struct BitRows {
    int cols = 0;
    int words = 0;
    std::vector<uint64_t> data;  // rows * words

    BitRows(int r, int c) : cols(c), words((c + 63) / 64), data((size_t)r * words, 0) {}
    uint64_t* row(int r) { return data.data() + (size_t)r * words; }
    const uint64_t* row(int r) const { return data.data() + (size_t)r * words; }
    bool get(int r, int c) const { return (row(r)[c >> 6] >> (c & 63)) & 1u; }
    void set(int r, int c) { row(r)[c >> 6] |= 1ull << (c & 63); }
    void xor_rows(int dst, int src) {
        uint64_t* d = row(dst);
        const uint64_t* s = row(src);
        for (int w = 0; w < words; ++w) d[w] ^= s[w];
    }
};

void finalize_adjacency(ParityCheck& pc) {
    pc.bit_checks.assign(pc.n, {});
    for (int c = 0; c < pc.rows(); ++c)
        for (int v : pc.check_bits[c]) pc.bit_checks[v].push_back(c);
}

// Gauss-Jordan over GF(2); fills parity_pos/message_pos/reduced_rows.
// Throws if the matrix is rank deficient.
void build_encoder(ParityCheck& pc) {
    const int m = pc.rows();
    BitRows h(m, pc.n);
    for (int r = 0; r < m; ++r)
        for (int c : pc.check_bits[r]) h.set(r, c);

    std::vector<int> pivot_col(m, -1);
    std::vector<char> used(pc.n, 0);
    int rank = 0;
    for (int col = 0; col < pc.n && rank < m; ++col) {
        int sel = -1;
        for (int r = rank; r < m; ++r)
            if (h.get(r, col)) {
                sel = r;
                break;
            }
        if (sel < 0) continue;
        if (sel != rank)
            for (int w = 0; w < h.words; ++w)
                std::swap(h.row(sel)[w], h.row(rank)[w]);
        for (int r = 0; r < m; ++r)
            if (r != rank && h.get(r, col)) h.xor_rows(r, rank);
        pivot_col[rank] = col;
        used[col] = 1;
        ++rank;
    }
    if (rank < m)
        throw std::runtime_error("fec: parity-check matrix is rank deficient (rank " +
                                 std::to_string(rank) + " of " + std::to_string(m) + ")");

    pc.parity_pos.assign(pivot_col.begin(), pivot_col.end());
    pc.message_pos.clear();
    for (int c = 0; c < pc.n; ++c)
        if (!used[c]) pc.message_pos.push_back(c);
    pc.k = static_cast<int>(pc.message_pos.size());

    // map column -> message index
    std::vector<int> msg_index(pc.n, -1);
    for (int i = 0; i < pc.k; ++i) msg_index[pc.message_pos[i]] = i;

    pc.reduced_rows.assign(m, {});
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < pc.n; ++c)
            if (c != pivot_col[r] && h.get(r, c)) {
                // after full reduction the only nonzeros besides the pivot
                // sit on message columns
                pc.reduced_rows[r].push_back(msg_index[c]);
            }
}

[[noreturn]] void parse_fail(int line, const std::string& what) {
    throw std::runtime_error("alist parse error at line " + std::to_string(line) +
                             ": " + what);
}

}  // namespace

ParityCheck load_alist(const std::string& text) {
    // token stream with line tracking; accepts both the zero-padded
    // (MacKay) and the exact-degree per-node list variants
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<long> pending;
    size_t pos = 0;
    auto next_token = [&]() -> long {
        while (pos >= pending.size()) {
            if (!std::getline(in, line)) parse_fail(lineno, "unexpected end of input");
            ++lineno;
            pending.clear();
            pos = 0;
            std::istringstream ls(line);
            std::string tok;
            while (ls >> tok) {
                try {
                    size_t used = 0;
                    pending.push_back(std::stol(tok, &used));
                    if (used != tok.size()) throw std::invalid_argument(tok);
                } catch (const std::exception&) {
                    parse_fail(lineno, "non-numeric token '" + tok + "'");
                }
            }
        }
        return pending[pos++];
    };
    // reads `count` nonzero 1-based indices, skipping zero padding
    auto next_indices = [&](size_t count, long bound) {
        std::vector<int> out;
        while (out.size() < count) {
            const long v = next_token();
            if (v == 0) continue;
            if (v < 1 || v > bound) parse_fail(lineno, "index out of range");
            out.push_back(static_cast<int>(v - 1));
        }
        return out;
    };

    const long ncols = next_token();
    const long nrows = next_token();
    if (ncols < 1 || nrows < 1) parse_fail(lineno, "bad dimensions");
    next_token();  // max column degree
    next_token();  // max row degree

    std::vector<long> col_deg(ncols), row_deg(nrows);
    for (long c = 0; c < ncols; ++c) col_deg[c] = next_token();
    for (long r = 0; r < nrows; ++r) row_deg[r] = next_token();

    long col_total = 0, row_total = 0;
    for (long d : col_deg) col_total += d;
    for (long d : row_deg) row_total += d;
    if (col_total != row_total)
        parse_fail(lineno, "column and row degree totals disagree");

    ParityCheck pc;
    pc.n = static_cast<int>(ncols);
    pc.check_bits.assign(static_cast<size_t>(nrows), {});

    for (long c = 0; c < ncols; ++c)
        for (int r : next_indices(static_cast<size_t>(col_deg[c]), nrows))
            pc.check_bits[static_cast<size_t>(r)].push_back(static_cast<int>(c));

    // per-row lists: consume and cross-check against the column lists
    for (long r = 0; r < nrows; ++r) {
        std::vector<int> cols = next_indices(static_cast<size_t>(row_deg[r]), ncols);
        std::sort(cols.begin(), cols.end());
        std::vector<int>& have = pc.check_bits[static_cast<size_t>(r)];
        std::sort(have.begin(), have.end());
        if (cols != have) parse_fail(lineno, "row/column lists disagree");
    }

    finalize_adjacency(pc);
    build_encoder(pc);
    return pc;
}

ParityCheck load_alist_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open alist file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_alist(ss.str());
}

std::string emit_alist(const ParityCheck& pc) {
    const int m = pc.rows();
    std::vector<std::vector<int>> col_rows(pc.n);
    for (int r = 0; r < m; ++r)
        for (int c : pc.check_bits[r]) col_rows[c].push_back(r);

    size_t max_col = 0, max_row = 0;
    for (const auto& v : col_rows) max_col = std::max(max_col, v.size());
    for (const auto& v : pc.check_bits) max_row = std::max(max_row, v.size());

    // canonical layout: per-node lists zero-padded to the max degree
    std::ostringstream out;
    out << pc.n << ' ' << m << '\n';
    out << max_col << ' ' << max_row << '\n';
    for (int c = 0; c < pc.n; ++c) out << col_rows[c].size() << (c + 1 < pc.n ? " " : "\n");
    for (int r = 0; r < m; ++r) out << pc.check_bits[r].size() << (r + 1 < m ? " " : "\n");
    auto emit_list = [&](const std::vector<int>& ids, size_t width) {
        for (size_t i = 0; i < width; ++i)
            out << (i < ids.size() ? ids[i] + 1 : 0) << (i + 1 < width ? " " : "");
        out << '\n';
    };
    for (int c = 0; c < pc.n; ++c) emit_list(col_rows[c], max_col);
    for (int r = 0; r < m; ++r) emit_list(pc.check_bits[r], max_row);
    return out.str();
}

ParityCheck make_qc_code(int z, uint64_t seed) {
    if (z < 1) throw std::invalid_argument("make_qc_code: z must be >= 1");
    constexpr int kBaseRows = 6;
    constexpr int kBaseCols = 24;
    constexpr int kInfoCols = kBaseCols - kBaseRows;

    // base matrix of circulant shifts, -1 = zero block
    int base[kBaseRows][kBaseCols];
    for (auto& row : base)
        for (int& v : row) v = -1;

    Rng rng(seed);

    // information part: column degree 3 or 4, rows spread deterministically
    for (int c = 0; c < kInfoCols; ++c) {
        const int degree = (c % 2 == 0) ? 3 : 4;
        std::vector<int> rows;
        int start = static_cast<int>(rng.uniform_int(kBaseRows));
        int step = (c % 3) + 1;  // relatively to 6 this cycles enough rows
        while (static_cast<int>(rows.size()) < degree) {
            if (std::find(rows.begin(), rows.end(), start) == rows.end())
                rows.push_back(start);
            start = (start + step) % kBaseRows;
            step = step % kBaseRows + 1;
        }
        for (int r : rows) base[r][c] = static_cast<int>(rng.uniform_int(z));
    }

    // dual-diagonal parity part: [h | T], T bidiagonal with zero shifts
    const int h_shift = static_cast<int>(rng.uniform_int(z));
    base[0][kInfoCols] = h_shift;
    base[kBaseRows / 2][kInfoCols] = 0;
    base[kBaseRows - 1][kInfoCols] = h_shift;
    for (int j = 0; j + 1 < kBaseRows; ++j) {
        base[j][kInfoCols + 1 + j] = 0;
        base[j + 1][kInfoCols + 1 + j] = 0;
    }

    // greedy 4-cycle removal among circulant blocks: a 4-cycle exists
    // between rows r1<r2 and cols c1<c2 iff
    //   s(r1,c1) - s(r2,c1) + s(r2,c2) - s(r1,c2) == 0 (mod z)
    bool changed = true;
    int guard = 0;
    while (changed && guard++ < 200) {
        changed = false;
        for (int r1 = 0; r1 < kBaseRows; ++r1)
            for (int r2 = r1 + 1; r2 < kBaseRows; ++r2)
                for (int c1 = 0; c1 < kBaseCols; ++c1) {
                    if (base[r1][c1] < 0 || base[r2][c1] < 0) continue;
                    for (int c2 = c1 + 1; c2 < kBaseCols; ++c2) {
                        if (base[r1][c2] < 0 || base[r2][c2] < 0) continue;
                        const int d = ((base[r1][c1] - base[r2][c1] + base[r2][c2] -
                                        base[r1][c2]) %
                                           z +
                                       z) %
                                      z;
                        if (d == 0 && c1 < kInfoCols) {
                            base[r1][c1] = static_cast<int>(rng.uniform_int(z));
                            changed = true;
                        }
                    }
                }
    }

    ParityCheck pc;
    pc.n = kBaseCols * z;
    pc.check_bits.assign(static_cast<size_t>(kBaseRows) * z, {});
    for (int br = 0; br < kBaseRows; ++br)
        for (int bc = 0; bc < kBaseCols; ++bc) {
            const int s = base[br][bc];
            if (s < 0) continue;
            for (int i = 0; i < z; ++i)
                pc.check_bits[static_cast<size_t>(br) * z + i].push_back(
                    bc * z + (i + s) % z);
        }
    for (auto& row : pc.check_bits) std::sort(row.begin(), row.end());

    finalize_adjacency(pc);
    build_encoder(pc);
    return pc;
}

Vec encode(const Vec& msg, const ParityCheck& pc) {
    if (msg.size() != pc.k)
        throw std::invalid_argument("encode: message length must be k");
    std::vector<char> mbits(pc.k);
    for (int i = 0; i < pc.k; ++i) {
        if (msg[i] != 1.0 && msg[i] != -1.0)
            throw std::invalid_argument("encode: message entries must be +-1");
        mbits[i] = msg[i] < 0 ? 1 : 0;  // GF(2): +1 <-> 0, -1 <-> 1
    }
    Vec cw(pc.n);
    for (int i = 0; i < pc.k; ++i) cw[pc.message_pos[i]] = msg[i];
    for (int r = 0; r < pc.rows(); ++r) {
        char parity = 0;
        for (int mi : pc.reduced_rows[r]) parity ^= mbits[mi];
        cw[pc.parity_pos[r]] = parity ? -1.0 : 1.0;
    }
    return cw;
}

bool checks_satisfied(const Vec& hard_bits, const ParityCheck& pc) {
    for (const auto& row : pc.check_bits) {
        double prod = 1.0;
        for (int v : row) prod *= hard_bits[v];
        if (prod < 0) return false;
    }
    return true;
}

DecodeResult decode_bp(const Vec& llr, const ParityCheck& pc, int max_iter) {
    if (llr.size() != pc.n) throw std::invalid_argument("decode_bp: LLR length mismatch");
    if (!llr.allFinite()) throw std::invalid_argument("decode_bp: LLRs must be finite");

    const int m = pc.rows();
    // flat edge storage
    std::vector<int> edge_start(m + 1, 0);
    for (int r = 0; r < m; ++r)
        edge_start[r + 1] = edge_start[r] + static_cast<int>(pc.check_bits[r].size());
    const int n_edges = edge_start[m];
    std::vector<double> c2v(n_edges, 0.0);

    DecodeResult res;
    res.posterior_llr = llr;
    res.hard_bits.resize(pc.n);

    Vec posterior = llr;
    std::vector<double> tanh_half(n_edges);

    for (int it = 1; it <= max_iter; ++it) {
        // check update from variable-to-check messages (posterior minus own edge)
        for (int r = 0; r < m; ++r) {
            const auto& row = pc.check_bits[r];
            const int base = edge_start[r];
            const int deg = static_cast<int>(row.size());
            for (int e = 0; e < deg; ++e) {
                double v2c = posterior[row[e]] - c2v[base + e];
                v2c = std::clamp(v2c, -40.0, 40.0);
                tanh_half[base + e] = std::tanh(0.5 * v2c);
            }
            // exclusion products via forward/backward passes
            for (int e = 0; e < deg; ++e) {
                double prod = 1.0;
                for (int e2 = 0; e2 < deg; ++e2)
                    if (e2 != e) prod *= tanh_half[base + e2];
                prod = std::clamp(prod, -1.0 + 1e-15, 1.0 - 1e-15);
                c2v[base + e] = 2.0 * std::atanh(prod);
            }
        }
        // variable update
        posterior = llr;
        for (int r = 0; r < m; ++r) {
            const auto& row = pc.check_bits[r];
            const int base = edge_start[r];
            for (size_t e = 0; e < row.size(); ++e) posterior[row[e]] += c2v[base + e];
        }
        bool decided = true;
        for (int v = 0; v < pc.n; ++v) {
            res.hard_bits[v] = posterior[v] < 0 ? -1.0 : 1.0;
            if (posterior[v] == 0.0) decided = false;
        }
        res.iters_used = it;
        // zero posteriors (the all-zero-input fixed point) are undecided,
        // not converged, even though all-+1 satisfies every check
        if (decided && checks_satisfied(res.hard_bits, pc)) {
            res.converged = true;
            break;
        }
    }
    res.posterior_llr = posterior;
    return res;
}

Permutation random_permutation(int n, uint64_t seed) {
    Permutation p;
    p.seed = seed;
    p.perm.resize(n);
    for (int i = 0; i < n; ++i) p.perm[i] = i;
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(i) + 1));
        std::swap(p.perm[i], p.perm[j]);
    }
    return p;
}

Vec interleave(const Vec& x, const Permutation& p) {
    if (x.size() != static_cast<long>(p.perm.size()))
        throw std::invalid_argument("interleave: length mismatch");
    Vec y(x.size());
    for (size_t i = 0; i < p.perm.size(); ++i) y[i] = x[p.perm[i]];
    return y;
}

Vec deinterleave(const Vec& y, const Permutation& p) {
    if (y.size() != static_cast<long>(p.perm.size()))
        throw std::invalid_argument("deinterleave: length mismatch");
    Vec x(y.size());
    for (size_t i = 0; i < p.perm.size(); ++i) x[p.perm[i]] = y[i];
    return x;
}

}  // namespace phnturbo
