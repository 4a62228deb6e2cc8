#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace padmm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// One vector per block; block i has its own dimension n_i.
using BlockVector = std::vector<VectorXd>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Spectral norm (largest singular value). Dense, symmetric or not.
inline double spectral_norm(const MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  // sqrt of the largest eigenvalue of MᵀM; cheaper than a full SVD and
  // accurate enough for the bound computations this feeds.
  const MatrixXd G = (M.rows() >= M.cols()) ? MatrixXd(M.transpose() * M)
                                            : MatrixXd(M * M.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  return lmax > 0.0 ? std::sqrt(lmax) : 0.0;
}

// Smallest strictly positive eigenvalue of a symmetric PSD matrix.
// Eigenvalues below 1e-10 * lambda_max count as zero.  Throws if the
// spectrum has no strictly positive part.
inline double smallest_positive_eigenvalue(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
  const VectorXd ev = es.eigenvalues();
  const double lmax = ev.maxCoeff();
  if (!(lmax > 0.0))
    throw std::domain_error("matrix has no strictly positive eigenvalue");
  const double cut = 1e-10 * lmax;
  double lpp = kInf;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev[i] > cut && ev[i] < lpp) lpp = ev[i];
  if (!std::isfinite(lpp))
    throw std::domain_error("matrix has no strictly positive eigenvalue");
  return lpp;
}

// Symmetric matrix used for proximal weightings (the Q_i and P terms).
// Most problems use 0 or a scaled identity; a dense symmetric matrix is
// supported for the general case.  The scaled-identity form keeps the
// frequent quadratic-form and matvec paths allocation-light and makes
// spectral quantities exact.
class ProximalMatrix {
 public:
  ProximalMatrix() : dim_(0), scale_(0.0) {}

  static ProximalMatrix Zero(Index dim) { return ProximalMatrix(dim, 0.0); }

  static ProximalMatrix ScaledIdentity(Index dim, double scale) {
    if (scale < 0.0)
      throw std::invalid_argument("proximal matrix must be PSD: scale < 0");
    return ProximalMatrix(dim, scale);
  }

  // M must be symmetric; PSD-ness is checked up to a relative tolerance of
  // 1e-10 (eigenvalues slightly below zero from rounding are accepted).
  static ProximalMatrix Dense(MatrixXd M) {
    if (M.rows() != M.cols())
      throw std::invalid_argument("proximal matrix must be square");
    if ((M - M.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("proximal matrix must be symmetric");
    ProximalMatrix P;
    P.dim_ = M.rows();
    P.dense_ = std::move(M);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(P.dense_,
                                               Eigen::EigenvaluesOnly);
    P.min_eig_ = es.eigenvalues().minCoeff();
    P.max_eig_ = es.eigenvalues().maxCoeff();
    const double nrm = std::max(std::abs(P.min_eig_), std::abs(P.max_eig_));
    if (P.min_eig_ < -1e-10 * std::max(1.0, nrm))
      throw std::invalid_argument("proximal matrix must be PSD");
    return P;
  }

  Index dim() const { return dim_; }
  bool is_scaled_identity() const { return dense_.size() == 0; }
  bool is_zero() const { return is_scaled_identity() && scale_ == 0.0; }
  double scale() const { return scale_; }

  VectorXd apply(const VectorXd& v) const {
    check_dim(v.size());
    if (is_scaled_identity()) return scale_ * v;
    return dense_ * v;
  }

  // vᵀ M v
  double quad(const VectorXd& v) const {
    check_dim(v.size());
    if (is_scaled_identity()) return scale_ * v.squaredNorm();
    return v.dot(dense_ * v);
  }

  double spectral_norm() const {
    if (is_scaled_identity()) return scale_;
    return std::max(std::abs(min_eig_), std::abs(max_eig_));
  }

  double min_eigenvalue() const {
    return is_scaled_identity() ? scale_ : min_eig_;
  }

  MatrixXd dense() const {
    if (is_scaled_identity())
      return scale_ * MatrixXd::Identity(dim_, dim_);
    return dense_;
  }

 private:
  ProximalMatrix(Index dim, double scale) : dim_(dim), scale_(scale) {}

  void check_dim(Index n) const {
    if (n != dim_)
      throw std::invalid_argument("proximal matrix dimension mismatch: got " +
                                  std::to_string(n) + ", expected " +
                                  std::to_string(dim_));
  }

  Index dim_;
  double scale_ = 0.0;
  MatrixXd dense_;
  double min_eig_ = 0.0;
  double max_eig_ = 0.0;
};

}  // namespace padmm
