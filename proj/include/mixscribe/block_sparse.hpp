#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mixscribe/errors.hpp"
#include "mixscribe/matrix.hpp"
#include "mixscribe/parallel.hpp"

namespace mixscribe {

// Block id used for the trainable noise rows H-bar.
constexpr int kNoiseBlockId = -1;

struct SparseEntry {
    std::uint32_t row;
    double value;
};

// One activation submatrix H^(i) (or the noise rows), stored compressed per
// column: only nonzero (row, value) pairs, rows strictly increasing. The
// stored-entry set IS the support; there is no separate mask.
class ActivationBlock {
public:
    ActivationBlock() = default;
    ActivationBlock(int track_id, std::size_t row_offset, std::size_t n_rows, std::size_t n_cols)
        : track_id_(track_id), row_offset_(row_offset), n_rows_(n_rows), n_cols_(n_cols),
          cols_(n_cols)
    {
    }

    int track_id() const { return track_id_; }
    bool is_noise() const { return track_id_ == kNoiseBlockId; }
    std::size_t row_offset() const { return row_offset_; }
    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return n_cols_; }

    std::vector<SparseEntry>& column(std::size_t c) { return cols_[c]; }
    const std::vector<SparseEntry>& column(std::size_t c) const { return cols_[c]; }

    std::size_t stored_count() const
    {
        std::size_t n = 0;
        for (const auto& col : cols_) n += col.size();
        return n;
    }

    void set_row_offset(std::size_t off) { row_offset_ = off; }

private:
    int track_id_ = kNoiseBlockId;
    std::size_t row_offset_ = 0;
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<std::vector<SparseEntry>> cols_;
};

// Compresses a dense non-negative matrix; exactly the positive entries are
// stored.
inline ActivationBlock from_dense(const Matrix& dense, std::size_t row_offset, int track_id)
{
    ActivationBlock block(track_id, row_offset, dense.rows(), dense.cols());
    for (std::size_t c = 0; c < dense.cols(); ++c) {
        auto& col = block.column(c);
        for (std::size_t r = 0; r < dense.rows(); ++r) {
            const double v = dense(r, c);
            if (v < 0.0)
                throw InvalidInput("from_dense: negative entry at (" + std::to_string(r) + ","
                                   + std::to_string(c) + ")");
            if (v > 0.0) col.push_back({static_cast<std::uint32_t>(r), v});
        }
    }
    return block;
}

inline Matrix to_dense(const ActivationBlock& block)
{
    Matrix out(block.n_rows(), block.n_cols());
    for (std::size_t c = 0; c < block.n_cols(); ++c)
        for (const auto& e : block.column(c)) out(e.row, c) = e.value;
    return out;
}

inline double density(const ActivationBlock& block)
{
    const std::size_t cells = block.n_rows() * block.n_cols();
    return cells == 0 ? 0.0 : static_cast<double>(block.stored_count()) / static_cast<double>(cells);
}

// Stacked activation matrix H: one block per track in declaration order, the
// noise block (if any) last. Block row ranges partition [0, total_rows).
class BlockSparseActivations {
public:
    BlockSparseActivations() = default;

    explicit BlockSparseActivations(std::vector<ActivationBlock> blocks)
        : blocks_(std::move(blocks))
    {
        std::size_t offset = 0;
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            if (blocks_[b].row_offset() != offset)
                throw InvalidInput("activation blocks must be contiguous");
            if (blocks_[b].n_cols() != blocks_[0].n_cols())
                throw InvalidInput("activation blocks must share the column count");
            if (blocks_[b].is_noise() && b + 1 != blocks_.size())
                throw InvalidInput("noise block must be last");
            offset += blocks_[b].n_rows();
        }
        total_rows_ = offset;
        n_cols_ = blocks_.empty() ? 0 : blocks_[0].n_cols();
    }

    std::size_t total_rows() const { return total_rows_; }
    std::size_t n_cols() const { return n_cols_; }

    std::size_t block_count() const { return blocks_.size(); }
    ActivationBlock& block(std::size_t b) { return blocks_[b]; }
    const ActivationBlock& block(std::size_t b) const { return blocks_[b]; }

    bool has_noise_block() const { return !blocks_.empty() && blocks_.back().is_noise(); }
    ActivationBlock& noise_block() { return blocks_.back(); }
    const ActivationBlock& noise_block() const { return blocks_.back(); }

    std::size_t track_block_count() const
    {
        return blocks_.size() - (has_noise_block() ? 1 : 0);
    }

    std::size_t stored_count() const
    {
        std::size_t n = 0;
        for (const auto& b : blocks_) n += b.stored_count();
        return n;
    }

private:
    std::vector<ActivationBlock> blocks_;
    std::size_t total_rows_ = 0;
    std::size_t n_cols_ = 0;
};

inline double density(const BlockSparseActivations& h)
{
    const std::size_t cells = h.total_rows() * h.n_cols();
    return cells == 0 ? 0.0 : static_cast<double>(h.stored_count()) / static_cast<double>(cells);
}

inline Matrix to_dense(const BlockSparseActivations& h)
{
    Matrix out(h.total_rows(), h.n_cols());
    for (std::size_t b = 0; b < h.block_count(); ++b) {
        const auto& block = h.block(b);
        for (std::size_t c = 0; c < block.n_cols(); ++c)
            for (const auto& e : block.column(c)) out(block.row_offset() + e.row, c) = e.value;
    }
    return out;
}

// XH as a dense M x K matrix. X columns are indexed by the global rows of H.
inline Matrix reconstruct(const Matrix& x, const BlockSparseActivations& h)
{
    if (x.cols() != h.total_rows())
        throw InvalidInput("reconstruct: X has " + std::to_string(x.cols())
                           + " columns but H has " + std::to_string(h.total_rows()) + " rows");
    Matrix out(x.rows(), h.n_cols());
    const std::size_t m = x.rows();
    parallel_for(h.n_cols(), [&](std::size_t c) {
        double* dst = out.col(c);
        for (std::size_t b = 0; b < h.block_count(); ++b) {
            const auto& block = h.block(b);
            for (const auto& e : block.column(c)) {
                const double* src = x.col(block.row_offset() + e.row);
                const double v = e.value;
                for (std::size_t i = 0; i < m; ++i) dst[i] += v * src[i];
            }
        }
    });
    return out;
}

// Entries of X^T A restricted to the support of `support`: result has the
// same block structure, entry (t, c) = dot(X col t, A col c).
inline BlockSparseActivations masked_gram(const Matrix& x, const Matrix& a,
                                          const BlockSparseActivations& support)
{
    if (x.cols() != support.total_rows())
        throw InvalidInput("masked_gram: X columns do not match support rows");
    if (x.rows() != a.rows())
        throw InvalidInput("masked_gram: X and A row counts differ");
    if (a.cols() != support.n_cols())
        throw InvalidInput("masked_gram: operand columns do not match support columns");

    BlockSparseActivations out = support;
    const std::size_t m = x.rows();
    parallel_for(out.n_cols(), [&](std::size_t c) {
        const double* acol = a.col(c);
        for (std::size_t b = 0; b < out.block_count(); ++b) {
            auto& block = out.block(b);
            for (auto& e : block.column(c)) {
                const double* xcol = x.col(block.row_offset() + e.row);
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += xcol[i] * acol[i];
                e.value = dot;
            }
        }
    });
    return out;
}

inline void prune(ActivationBlock& block, double min_value)
{
    if (min_value < 0.0) throw InvalidParams("prune: min_value must be >= 0");
    for (std::size_t c = 0; c < block.n_cols(); ++c) {
        auto& col = block.column(c);
        std::size_t keep = 0;
        for (const auto& e : col)
            if (e.value >= min_value && e.value > 0.0) col[keep++] = e;
        col.resize(keep);
    }
}

// Drops stored entries below min_value from every track block. The noise
// block is exempt: its support stays full.
inline void prune(BlockSparseActivations& h, double min_value)
{
    for (std::size_t b = 0; b < h.block_count(); ++b)
        if (!h.block(b).is_noise()) prune(h.block(b), min_value);
}

// --- debug dumps -----------------------------------------------------------

// Binary dump, little-endian: "BSA1", u32 n_rows, u32 n_cols, u64 nnz,
// u32 per-column counts, then (u32 row, f32 value) pairs column by column.
inline void write_bsa(const std::string& path, const ActivationBlock& block)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);

    auto put_u32 = [&](std::uint32_t v) {
        char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
        out.write(b, 4);
    };
    out.write("BSA1", 4);
    put_u32(static_cast<std::uint32_t>(block.n_rows()));
    put_u32(static_cast<std::uint32_t>(block.n_cols()));
    const std::uint64_t nnz = block.stored_count();
    put_u32(static_cast<std::uint32_t>(nnz & 0xffffffffu));
    put_u32(static_cast<std::uint32_t>(nnz >> 32));
    for (std::size_t c = 0; c < block.n_cols(); ++c)
        put_u32(static_cast<std::uint32_t>(block.column(c).size()));
    for (std::size_t c = 0; c < block.n_cols(); ++c) {
        for (const auto& e : block.column(c)) {
            put_u32(e.row);
            const float f = static_cast<float>(e.value);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(bits);
        }
    }
    if (!out) throw IoError("short write: " + path);
}

inline ActivationBlock read_bsa(const std::string& path, int track_id = 0)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    auto get_u32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8)
               | (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "BSA1", 4) != 0) throw IoError(path + ": not a BSA1 file");
    const std::uint32_t n_rows = get_u32();
    const std::uint32_t n_cols = get_u32();
    const std::uint64_t nnz = static_cast<std::uint64_t>(get_u32())
                              | (static_cast<std::uint64_t>(get_u32()) << 32);
    ActivationBlock block(track_id, 0, n_rows, n_cols);
    std::vector<std::uint32_t> counts(n_cols);
    for (auto& n : counts) n = get_u32();
    std::uint64_t total = 0;
    for (std::uint32_t c = 0; c < n_cols; ++c) {
        auto& col = block.column(c);
        col.resize(counts[c]);
        for (auto& e : col) {
            e.row = get_u32();
            const std::uint32_t bits = get_u32();
            float f;
            std::memcpy(&f, &bits, 4);
            e.value = static_cast<double>(f);
        }
        total += counts[c];
    }
    if (!in || total != nnz) throw IoError(path + ": inconsistent BSA1 payload");
    return block;
}

// Dense CSV export, row per line. Meant for small matrices.
inline void write_dense_csv(const std::string& path, const Matrix& m)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot create " + path);
    out.precision(12);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << m(r, c);
        }
        out << '\n';
    }
}

} // namespace mixscribe
