#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace mcr {

using Eigen::Index;

/// Structured-signal family a program or a width bound refers to.
enum class Structure { Sparse, Block, LowRank };

inline std::string to_string(Structure s) {
    switch (s) {
        case Structure::Sparse: return "sparse";
        case Structure::Block: return "block";
        case Structure::LowRank: return "lowrank";
    }
    return "unknown";
}

/// Ambient shape of a signal: a length-n vector or an n1 x n2 matrix.
/// Matrix signals are carried around in vectorized (column-major) form.
struct SignalShape {
    Index rows = 0;
    Index cols = 1;
    bool matrix = false;

    static SignalShape vector(Index n) { return {n, 1, false}; }
    static SignalShape of_matrix(Index n1, Index n2) { return {n1, n2, true}; }

    Index dim() const { return rows * cols; }

    friend bool operator==(const SignalShape&, const SignalShape&) = default;
};

/// Disjoint contiguous blocks V_1..V_l of equal size k covering {0..n-1}.
struct BlockPartition {
    Index block_count = 0;  // l
    Index block_size = 0;   // k

    BlockPartition() = default;
    BlockPartition(Index l, Index k) : block_count(l), block_size(k) {
        if (l < 1 || k < 1)
            throw std::invalid_argument("BlockPartition: block count and size must be positive");
    }

    static BlockPartition of_dimension(Index n, Index k) {
        if (k < 1 || n < 1 || n % k != 0)
            throw std::invalid_argument("BlockPartition: block size must divide the dimension");
        return BlockPartition(n / k, k);
    }

    Index dim() const { return block_count * block_size; }
    Index offset(Index b) const { return b * block_size; }

    friend bool operator==(const BlockPartition&, const BlockPartition&) = default;
};

/// The shift lambda*phi (or lambda*Phi) that a correlation-boosted program
/// subtracts from the structure norm's subdifferential. Only the product is
/// ever needed, so the payload stores it directly; matrix payloads are kept
/// vectorized column-major.
struct PriorShift {
    Structure structure = Structure::Sparse;
    SignalShape shape;
    Eigen::VectorXd payload;

    PriorShift() = default;
    PriorShift(Structure s, SignalShape sh, Eigen::VectorXd p)
        : structure(s), shape(sh), payload(std::move(p)) {
        if (payload.size() != shape.dim())
            throw std::invalid_argument("PriorShift: payload size does not match shape");
        if (!payload.allFinite()) throw std::invalid_argument("PriorShift: payload must be finite");
    }

    static PriorShift sparse(Eigen::VectorXd p) {
        const auto n = p.size();
        return PriorShift(Structure::Sparse, SignalShape::vector(n), std::move(p));
    }
    static PriorShift block(Eigen::VectorXd p) {
        const auto n = p.size();
        return PriorShift(Structure::Block, SignalShape::vector(n), std::move(p));
    }
    static PriorShift lowrank(const Eigen::MatrixXd& p) {
        return PriorShift(Structure::LowRank, SignalShape::of_matrix(p.rows(), p.cols()),
                          Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(p.data(), p.size())));
    }
    static PriorShift zero(Structure s, SignalShape sh) {
        return PriorShift(s, sh, Eigen::VectorXd::Zero(sh.dim()));
    }

    bool is_zero() const { return payload.isZero(0.0); }

    Eigen::Map<const Eigen::MatrixXd> payload_matrix() const {
        return {payload.data(), shape.rows, shape.cols};
    }
};

/// Recipe for a random structured signal.
struct SignalSpec {
    Structure structure = Structure::Sparse;
    SignalShape shape;
    Index level = 0;  // s nonzeros, s nonzero blocks, or rank r
    BlockPartition partition;
    std::uint64_t seed = 0;

    static SignalSpec sparse(Index n, Index s, std::uint64_t seed) {
        if (n < 1 || s < 0 || s > n)
            throw std::invalid_argument("SignalSpec::sparse: need 0 <= s <= n");
        return {Structure::Sparse, SignalShape::vector(n), s, {}, seed};
    }
    static SignalSpec block_sparse(const BlockPartition& part, Index s, std::uint64_t seed) {
        if (s < 0 || s > part.block_count)
            throw std::invalid_argument("SignalSpec::block_sparse: need 0 <= s <= block count");
        return {Structure::Block, SignalShape::vector(part.dim()), s, part, seed};
    }
    static SignalSpec low_rank(Index n1, Index n2, Index r, std::uint64_t seed) {
        if (n1 < 1 || n2 < 1 || r < 0 || r > std::min(n1, n2))
            throw std::invalid_argument("SignalSpec::low_rank: need 0 <= r <= min(n1, n2)");
        return {Structure::LowRank, SignalShape::of_matrix(n1, n2), r, {}, seed};
    }
};

inline Eigen::Map<const Eigen::MatrixXd> as_matrix(const Eigen::VectorXd& v,
                                                   const SignalShape& shape) {
    if (v.size() != shape.dim())
        throw std::invalid_argument("as_matrix: vector size does not match shape");
    return {v.data(), shape.rows, shape.cols};
}

inline Eigen::VectorXd vectorize(const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

}  // namespace mcr
