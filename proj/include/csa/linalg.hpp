#pragma once

#include "csa/association.hpp"
#include "csa/ingest.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace csa {

struct SvdFactors {
  Eigen::VectorXd singular_values;  // non-increasing
  Eigen::MatrixXd left;             // n x r
  Eigen::MatrixXd right;            // p x r
};

struct EigenFactors {
  Eigen::VectorXd eigenvalues;  // non-increasing
  Eigen::MatrixXd eigenvectors;
};

/// Generalized singular values of a pair (A, B) sharing p columns:
/// A = U_a C X^T and B = U_b S X^T with C^2 + S^2 = I.
struct GsvdFactors {
  Eigen::VectorXd generalized_values;  // c_i / s_i, +inf where s_i = 0; non-increasing
  Eigen::VectorXd c;
  Eigen::VectorXd s;
  Eigen::MatrixXd left_a;
  Eigen::MatrixXd left_b;
  Eigen::MatrixXd shared_right_factor;  // X, p x p
};

/// Thin SVD. Throws on non-finite input.
SvdFactors svd(const Eigen::MatrixXd& x);

/// Singular values only, non-increasing.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& x);

EigenFactors eig_sym(const Eigen::MatrixXd& r, double symmetry_tol = 1e-10);

/// Tall full-rank case only: p <= rows(a), p <= rows(b), [a; b] of rank p.
GsvdFactors gsvd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Biased sample autocorrelation r_1..r_max_lag.
std::vector<double> acf(std::span<const double> series, std::size_t max_lag);

/// Per-column joint least-squares fit of a linear time trend plus one mean
/// per season (day of year for daily data, Feb 29 pooled with day 59; month
/// for monthly data; none for yearly data), returning the residuals.
StsMatrix classical_detrend(const StsMatrix& x);

/// Pearson correlations over pairwise-complete rows.
AssociationMatrix pearson_matrix(const StsMatrix& x);

}  // namespace csa
