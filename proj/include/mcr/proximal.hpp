#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mcr/types.hpp"

namespace mcr {

inline void soft_threshold_into(const Eigen::VectorXd& v, double tau, Eigen::VectorXd& out) {
    if (tau <= 0.0) throw std::invalid_argument("soft_threshold: tau must be positive");
    out.resize(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double m = std::abs(v[i]) - tau;
        out[i] = m > 0.0 ? (v[i] > 0.0 ? m : -m) : 0.0;
    }
}

/// prox of tau*||.||_1: componentwise sign(v_i) * max(|v_i| - tau, 0).
inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double tau) {
    Eigen::VectorXd out;
    soft_threshold_into(v, tau, out);
    return out;
}

/// prox of tau*(||x||_1 - <x, shift>). The linear term only translates the
/// prox argument, so this is soft_threshold(v + tau*shift, tau) exactly.
inline Eigen::VectorXd prox_mc_l1(const Eigen::VectorXd& v, double tau, const PriorShift& shift) {
    if (shift.structure != Structure::Sparse || shift.shape.matrix)
        throw std::invalid_argument("prox_mc_l1: shift must be a sparse vector shift");
    if (v.size() != shift.payload.size())
        throw std::invalid_argument("prox_mc_l1: shape mismatch");
    return soft_threshold(v + tau * shift.payload, tau);
}

/// Blockwise prox of tau*(||x||_{2,1} - <x, shift>): per block b, with
/// w = v_b + tau*shift_b, the output block is w * max(1 - tau/||w||_2, 0).
inline Eigen::VectorXd prox_mc_block(const Eigen::VectorXd& v, double tau, const PriorShift& shift,
                                     const BlockPartition& part) {
    if (tau <= 0.0) throw std::invalid_argument("prox_mc_block: tau must be positive");
    if (v.size() != part.dim() || shift.payload.size() != part.dim())
        throw std::invalid_argument("prox_mc_block: partition/shape mismatch");
    Eigen::VectorXd out(v.size());
    const Index k = part.block_size;
    for (Index b = 0; b < part.block_count; ++b) {
        const Index o = part.offset(b);
        auto w = (v.segment(o, k) + tau * shift.payload.segment(o, k)).eval();
        const double norm = w.norm();
        const double scale = norm > tau ? 1.0 - tau / norm : 0.0;
        out.segment(o, k) = scale * w;
    }
    return out;
}

/// Singular value thresholding of (V + tau*shift): prox of the nuclear-norm
/// objective tau*(||X||_* - <X, shift>). Uses a full dense SVD.
inline Eigen::MatrixXd prox_mc_nuclear(const Eigen::MatrixXd& v, double tau,
                                       const PriorShift& shift) {
    if (tau <= 0.0) throw std::invalid_argument("prox_mc_nuclear: tau must be positive");
    if (shift.shape.rows != v.rows() || shift.shape.cols != v.cols())
        throw std::invalid_argument("prox_mc_nuclear: shape mismatch");
    Eigen::MatrixXd shifted = v + tau * shift.payload_matrix();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(shifted, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw std::runtime_error("prox_mc_nuclear: SVD failed to converge");
    Eigen::VectorXd sv = (svd.singularValues().array() - tau).max(0.0);
    return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

namespace detail {

// Exact prox of tau*(|x| + lambda*|x - phi|) for phi >= 0; the general case
// reduces to this by the symmetry prox(v, phi) = -prox(-v, -phi).
inline double prox_l1l1_scalar_nonneg(double v, double tau, double lambda, double phi) {
    const double lo = tau * (1.0 + lambda);
    const double hi = tau * (1.0 - lambda);
    if (v < -lo) return v + lo;                      // negative side
    if (v <= hi) return 0.0;                         // pinned at zero
    if (v - hi < phi) return v - hi;                 // between the kinks
    if (v <= phi + lo) return phi;                   // pinned at phi
    return v - lo;                                   // beyond phi
}

}  // namespace detail

/// Exact coordinatewise prox of tau*(||x||_1 + lambda*||x - phi||_1): a
/// two-kink soft threshold with flat regions of width 2*tau at zero and
/// 2*tau*lambda at phi_i.
inline Eigen::VectorXd prox_l1l1(const Eigen::VectorXd& v, double tau, double lambda,
                                 const Eigen::VectorXd& phi) {
    if (tau <= 0.0) throw std::invalid_argument("prox_l1l1: tau must be positive");
    if (lambda < 0.0) throw std::invalid_argument("prox_l1l1: lambda must be nonnegative");
    if (v.size() != phi.size()) throw std::invalid_argument("prox_l1l1: shape mismatch");
    Eigen::VectorXd out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        if (phi[i] >= 0.0)
            out[i] = detail::prox_l1l1_scalar_nonneg(v[i], tau, lambda, phi[i]);
        else
            out[i] = -detail::prox_l1l1_scalar_nonneg(-v[i], tau, lambda, -phi[i]);
    }
    return out;
}

/// prox of tau*(||x||_1 + (lambda/2)*||x - phi||_2^2):
/// soft_threshold((v + tau*lambda*phi) / (1 + tau*lambda), tau / (1 + tau*lambda)).
inline Eigen::VectorXd prox_l1l2(const Eigen::VectorXd& v, double tau, double lambda,
                                 const Eigen::VectorXd& phi) {
    if (tau <= 0.0) throw std::invalid_argument("prox_l1l2: tau must be positive");
    if (lambda < 0.0) throw std::invalid_argument("prox_l1l2: lambda must be nonnegative");
    if (v.size() != phi.size()) throw std::invalid_argument("prox_l1l2: shape mismatch");
    const double denom = 1.0 + tau * lambda;
    return soft_threshold((v + (tau * lambda) * phi) / denom, tau / denom);
}

/// Euclidean projection onto the ball {z : ||z - center||_2 <= delta}.
inline Eigen::VectorXd project_l2_ball(const Eigen::VectorXd& z, const Eigen::VectorXd& center,
                                       double delta) {
    if (delta < 0.0) throw std::invalid_argument("project_l2_ball: delta must be nonnegative");
    if (z.size() != center.size()) throw std::invalid_argument("project_l2_ball: shape mismatch");
    if (delta == 0.0) return center;
    const double dist = (z - center).norm();
    if (dist <= delta) return z;
    return center + (delta / dist) * (z - center);
}

}  // namespace mcr
