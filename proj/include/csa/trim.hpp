#pragma once

#include "csa/ingest.hpp"
#include "csa/linalg.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace csa {

/// Per-rank null quantiles of singular values from column-shuffled copies.
struct SvNullModel {
  int n_perm = 500;
  double quantile = 0.95;
  Eigen::VectorXd thresholds;  // non-increasing in rank
  std::uint64_t seed = 0;
};

struct TrimResult {
  StsMatrix trimmed;  // labelled S
  int depth_d = 0;
  int significant_s = 0;
  Eigen::VectorXd removed_values;  // lambda_1..lambda_d
  Eigen::MatrixXd removed_left;    // n x d
  Eigen::MatrixXd removed_right;   // p x d
  /// Entry j: max over columns of |ACF(1)| after removing j components.
  std::vector<double> acf_profile;
  /// Entry j: max over columns and lags 1..acf_lags of |ACF| at depth j.
  std::vector<double> acf_window_profile;
  double sv_share_removed = 0.0;
  /// True when the ACF criterion was never met and depth stopped at s.
  bool cap_hit = false;
  Eigen::VectorXd singular_values;  // full spectrum of the input
};

struct TrimCriterion {
  double acf_threshold = 0.1;
  int acf_lags = 30;
};

/// Each replicate shuffles every column independently with a stream seeded
/// by (seed, replicate); replicates run on `jobs` workers.
SvNullModel sv_null_thresholds(const StsMatrix& d, int n_perm, double quantile,
                               std::uint64_t seed, unsigned jobs = 1);

/// Largest s with sv[k] > thresholds[k] for every k < s.
int count_significant(const Eigen::VectorXd& sv, const SvNullModel& null);

/// S = D - sum_{k <= depth} lambda_k u_k v_k^T. Without a significant count
/// the full rank min(n, p) is recorded.
TrimResult trim_to_depth(const StsMatrix& d, int depth,
                         std::optional<int> significant_s = std::nullopt,
                         int acf_lags = 30);

/// Removes top components one at a time until the ACF criterion holds or
/// the significant count is exhausted.
TrimResult algorithm1(const StsMatrix& d, const TrimCriterion& criterion,
                      const SvNullModel& null);

/// Max |ACF| over columns and lags 1..max_lag. Constant columns count as 0.
double max_abs_acf(const Eigen::MatrixXd& x, int max_lag);

struct GsvdRetentionReport {
  Eigen::VectorXd observed;  // generalized singular values, non-increasing
  Eigen::VectorXd null_lower;  // 0.025 quantile per rank
  Eigen::VectorXd null_upper;  // 0.975 quantile per rank
  std::vector<bool> inside;
  double fraction_inside = 0.0;
  int n_perm = 0;
  std::uint64_t seed = 0;
};

/// Compares GSVs of (d, s) with GSVs of (column-shuffled d, s).
GsvdRetentionReport gsvd_retention_check(const StsMatrix& d, const StsMatrix& s, int n_perm,
                                         std::uint64_t seed, unsigned jobs = 1);

}  // namespace csa
