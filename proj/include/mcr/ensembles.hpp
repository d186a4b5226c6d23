#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mcr/rng.hpp"
#include "mcr/types.hpp"

namespace mcr {

inline Eigen::MatrixXd sample_bernoulli_matrix(StreamRng& rng, Index m, Index n) {
    if (m < 1 || n < 1)
        throw std::invalid_argument("sample_bernoulli_matrix: dimensions must be positive");
    Eigen::MatrixXd a(m, n);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) a(i, j) = rng.sign();
    return a;
}

/// m x n matrix with i.i.d. +-1 entries (symmetric Bernoulli rows are
/// isotropic and sub-Gaussian). Entries are raw +-1, not +-1/sqrt(m).
inline Eigen::MatrixXd sample_bernoulli_matrix(Index m, Index n, std::uint64_t seed) {
    StreamRng rng(seed);
    return sample_bernoulli_matrix(rng, m, n);
}

inline Eigen::MatrixXd sample_gaussian_matrix(StreamRng& rng, Index m, Index n) {
    if (m < 1 || n < 1)
        throw std::invalid_argument("sample_gaussian_matrix: dimensions must be positive");
    Eigen::MatrixXd a(m, n);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) a(i, j) = rng.normal();
    return a;
}

inline Eigen::MatrixXd sample_gaussian_matrix(Index m, Index n, std::uint64_t seed) {
    StreamRng rng(seed);
    return sample_gaussian_matrix(rng, m, n);
}

/// Linear measurement map y = A(x). Both the plain dense ensemble and the
/// matrix-sensing family {A^j} are stored as one stacked m x dim matrix whose
/// j-th row is vec(A^j)^T, so forward/adjoint are ordinary matrix products.
/// Immutable after construction and shareable across threads.
class MeasurementOperator {
  public:
    MeasurementOperator() = default;

    static MeasurementOperator dense(Eigen::MatrixXd a) {
        const auto n = a.cols();
        return MeasurementOperator(std::move(a), SignalShape::vector(n));
    }

    /// Operator X -> (<A^1, X>, ..., <A^m, X>) for a family of equally shaped
    /// sensing matrices; the inner product is the Frobenius pairing.
    static MeasurementOperator matrix_sensing(const std::vector<Eigen::MatrixXd>& mats) {
        if (mats.empty())
            throw std::invalid_argument("matrix_sensing: at least one sensing matrix required");
        const Index n1 = mats.front().rows();
        const Index n2 = mats.front().cols();
        Eigen::MatrixXd stacked(static_cast<Index>(mats.size()), n1 * n2);
        for (std::size_t j = 0; j < mats.size(); ++j) {
            if (mats[j].rows() != n1 || mats[j].cols() != n2)
                throw std::invalid_argument("matrix_sensing: sensing matrices must share a shape");
            stacked.row(static_cast<Index>(j)) =
                Eigen::Map<const Eigen::VectorXd>(mats[j].data(), mats[j].size()).transpose();
        }
        return MeasurementOperator(std::move(stacked), SignalShape::of_matrix(n1, n2));
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
        check_dim(x.size(), stacked_.cols(), "forward");
        return stacked_ * x;
    }
    Eigen::VectorXd forward(const Eigen::MatrixXd& x) const { return forward(vectorize(x)); }

    Eigen::VectorXd adjoint(const Eigen::VectorXd& z) const {
        check_dim(z.size(), stacked_.rows(), "adjoint");
        return stacked_.transpose() * z;
    }

    void forward_into(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
        out.noalias() = stacked_ * x;
    }
    void adjoint_into(const Eigen::VectorXd& z, Eigen::VectorXd& out) const {
        out.noalias() = stacked_.transpose() * z;
    }

    Index rows() const { return stacked_.rows(); }
    SignalShape signal_shape() const { return shape_; }
    const Eigen::MatrixXd& stacked() const { return stacked_; }

  private:
    MeasurementOperator(Eigen::MatrixXd stacked, SignalShape shape)
        : stacked_(std::move(stacked)), shape_(shape) {
        if (stacked_.rows() < 1 || stacked_.cols() < 1)
            throw std::invalid_argument("MeasurementOperator: empty operator");
    }

    static void check_dim(Index got, Index want, const char* what) {
        if (got != want)
            throw std::invalid_argument(std::string("MeasurementOperator::") + what +
                                        ": dimension mismatch");
    }

    Eigen::MatrixXd stacked_;
    SignalShape shape_;
};

struct OperatorNormEstimate {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Largest singular value of the operator, estimated by power iteration on
/// adjoint(forward(.)). Starts from a fixed seeded vector; when the relative
/// tolerance is not met within max_iters the best iterate is returned with
/// converged = false.
inline OperatorNormEstimate operator_norm(const MeasurementOperator& op, int max_iters = 200,
                                          double tol = 1e-6) {
    StreamRng rng(derive_stream(0x6f70206e6f726dULL, {op.rows(), op.signal_shape().dim()}));
    Eigen::VectorXd v = rng.normal_vector(op.signal_shape().dim());
    v.normalize();
    Eigen::VectorXd fv(op.rows()), av(v.size());
    double sigma = 0.0;
    for (int it = 1; it <= max_iters; ++it) {
        op.forward_into(v, fv);
        op.adjoint_into(fv, av);
        const double norm = av.norm();
        if (norm == 0.0) return {0.0, true, it};  // operator annihilated the iterate
        v = av / norm;
        const double next = std::sqrt(norm);
        if (std::abs(next - sigma) <= tol * next) return {next, true, it};
        sigma = next;
    }
    return {sigma, false, max_iters};
}

inline Eigen::VectorXd sample_sparse_signal(StreamRng& rng, Index n, Index s) {
    if (s < 0 || s > n) throw std::invalid_argument("sample_sparse_signal: need 0 <= s <= n");
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (Index i : rng.subset(n, s)) x[i] = rng.normal();
    return x;
}

inline Eigen::VectorXd sample_block_sparse_signal(StreamRng& rng, const BlockPartition& part,
                                                  Index s) {
    if (s < 0 || s > part.block_count)
        throw std::invalid_argument("sample_block_sparse_signal: need 0 <= s <= block count");
    Eigen::VectorXd x = Eigen::VectorXd::Zero(part.dim());
    for (Index b : rng.subset(part.block_count, s))
        for (Index i = 0; i < part.block_size; ++i) x[part.offset(b) + i] = rng.normal();
    return x;
}

/// Rank-r matrix built as the top-r truncated SVD of an i.i.d. standard
/// Gaussian draw.
inline Eigen::MatrixXd sample_lowrank_signal(StreamRng& rng, Index n1, Index n2, Index r) {
    if (r < 0 || r > std::min(n1, n2))
        throw std::invalid_argument("sample_lowrank_signal: need 0 <= r <= min(n1, n2)");
    const Eigen::MatrixXd g = sample_gaussian_matrix(rng, n1, n2);
    if (r == std::min(n1, n2)) return g;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
           svd.matrixV().leftCols(r).transpose();
}

/// Sample a structured signal per its spec; output is vectorized for matrix
/// shapes. Pure function of the spec (including its seed).
inline Eigen::VectorXd sample_signal(const SignalSpec& spec) {
    StreamRng rng(spec.seed);
    switch (spec.structure) {
        case Structure::Sparse: return sample_sparse_signal(rng, spec.shape.dim(), spec.level);
        case Structure::Block: return sample_block_sparse_signal(rng, spec.partition, spec.level);
        case Structure::LowRank:
            return vectorize(sample_lowrank_signal(rng, spec.shape.rows, spec.shape.cols,
                                                   spec.level));
    }
    throw std::logic_error("sample_signal: unknown structure");
}

}  // namespace mcr
