#include "csa/trim.hpp"

#include "csa/error.hpp"
#include "csa/parallel.hpp"
#include "csa/random.hpp"
#include "csa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace csa {

namespace {

void require_complete(const StsMatrix& x, const char* what) {
  if (x.has_missing()) {
    fail(ErrorKind::completeness, std::string(what) + ": input has masked entries");
  }
}

struct AcfSummary {
  double lag1 = 0.0;
  double window = 0.0;
};

AcfSummary acf_summary(const Eigen::MatrixXd& x, int max_lag) {
  AcfSummary out;
  const auto lags = static_cast<std::size_t>(std::max(1, max_lag));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto column = x.col(j);
    if (column.maxCoeff() - column.minCoeff() <= 1e-12 * std::max(1.0, column.cwiseAbs().maxCoeff())) {
      continue;
    }
    const auto r = acf(std::span<const double>(column.data(), static_cast<std::size_t>(x.rows())),
                       std::min(lags, static_cast<std::size_t>(x.rows()) - 2));
    if (r.empty()) continue;
    out.lag1 = std::max(out.lag1, std::abs(r[0]));
    for (const double v : r) out.window = std::max(out.window, std::abs(v));
  }
  return out;
}

Eigen::MatrixXd shuffled_columns(const Eigen::MatrixXd& x, Rng& rng) {
  Eigen::MatrixXd out = x;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    shuffle(std::span<double>(out.col(j).data(), static_cast<std::size_t>(out.rows())), rng);
  }
  return out;
}

double share(const Eigen::VectorXd& sv, int depth) {
  const double total = sv.sum();
  if (!(total > 0.0)) return 0.0;
  return sv.head(depth).sum() / total;
}

TrimResult assemble(const StsMatrix& d, const SvdFactors& f, int depth) {
  TrimResult out;
  out.trimmed = d;
  out.trimmed.label = MatrixLabel::trimmed;
  out.depth_d = depth;
  out.removed_values = f.singular_values.head(depth);
  out.removed_left = f.left.leftCols(depth);
  out.removed_right = f.right.leftCols(depth);
  out.trimmed.values -= out.removed_left * out.removed_values.asDiagonal() * out.removed_right.transpose();
  out.sv_share_removed = share(f.singular_values, depth);
  out.singular_values = f.singular_values;
  return out;
}

}  // namespace

double max_abs_acf(const Eigen::MatrixXd& x, int max_lag) { return acf_summary(x, max_lag).window; }

SvNullModel sv_null_thresholds(const StsMatrix& d, int n_perm, double quantile,
                               std::uint64_t seed, unsigned jobs) {
  require_complete(d, "sv_null_thresholds");
  if (n_perm < 2) fail(ErrorKind::argument, "n_perm must be at least 2");
  if (!(quantile > 0.0 && quantile < 1.0)) fail(ErrorKind::argument, "quantile must lie in (0, 1)");

  const auto rank = std::min(d.values.rows(), d.values.cols());
  std::vector<Eigen::VectorXd> replicates(static_cast<std::size_t>(n_perm));
  parallel_for(replicates.size(), jobs, [&](std::size_t r) {
    Rng rng(stream_seed(seed, r));
    replicates[r] = singular_values(shuffled_columns(d.values, rng));
  });

  SvNullModel model;
  model.n_perm = n_perm;
  model.quantile = quantile;
  model.seed = seed;
  model.thresholds.resize(rank);
  std::vector<double> sample(static_cast<std::size_t>(n_perm));
  for (Eigen::Index k = 0; k < rank; ++k) {
    for (std::size_t r = 0; r < replicates.size(); ++r) sample[r] = replicates[r](k);
    model.thresholds(k) = csa::quantile(sample, quantile);
  }
  return model;
}

int count_significant(const Eigen::VectorXd& sv, const SvNullModel& null) {
  if (sv.size() != null.thresholds.size()) {
    fail(ErrorKind::structural, "count_significant: " + std::to_string(sv.size()) +
                                    " singular values vs " +
                                    std::to_string(null.thresholds.size()) + " thresholds");
  }
  int s = 0;
  while (s < sv.size() && sv(s) > null.thresholds(s)) ++s;
  return s;
}

TrimResult trim_to_depth(const StsMatrix& d, int depth, std::optional<int> significant_s,
                         int acf_lags) {
  require_complete(d, "trim_to_depth");
  const auto rank = static_cast<int>(std::min(d.values.rows(), d.values.cols()));
  if (depth < 0 || depth > rank) {
    fail(ErrorKind::argument, "depth " + std::to_string(depth) + " outside [0, " +
                                  std::to_string(rank) + "]");
  }
  const SvdFactors f = svd(d.values);
  TrimResult out = assemble(d, f, depth);
  out.significant_s = std::max(depth, significant_s.value_or(rank));

  Eigen::MatrixXd current = d.values;
  for (int j = 0; j <= depth; ++j) {
    if (j > 0) current -= f.singular_values(j - 1) * f.left.col(j - 1) * f.right.col(j - 1).transpose();
    const AcfSummary summary = acf_summary(current, acf_lags);
    out.acf_profile.push_back(summary.lag1);
    out.acf_window_profile.push_back(summary.window);
  }
  return out;
}

TrimResult algorithm1(const StsMatrix& d, const TrimCriterion& criterion,
                      const SvNullModel& null) {
  require_complete(d, "algorithm1");
  if (!(criterion.acf_threshold > 0.0)) fail(ErrorKind::argument, "acf_threshold must be positive");
  if (criterion.acf_lags < 1) fail(ErrorKind::argument, "acf_lags must be at least 1");

  const SvdFactors f = svd(d.values);
  const int s = count_significant(f.singular_values, null);

  std::vector<double> lag1_profile;
  std::vector<double> window_profile;
  Eigen::MatrixXd current = d.values;
  const AcfSummary initial = acf_summary(current, criterion.acf_lags);
  lag1_profile.push_back(initial.lag1);
  window_profile.push_back(initial.window);

  int depth = 0;
  bool met = false;
  for (int j = 1; j <= s; ++j) {
    current -= f.singular_values(j - 1) * f.left.col(j - 1) * f.right.col(j - 1).transpose();
    const AcfSummary summary = acf_summary(current, criterion.acf_lags);
    lag1_profile.push_back(summary.lag1);
    window_profile.push_back(summary.window);
    depth = j;
    if (summary.window <= criterion.acf_threshold) {
      met = true;
      break;
    }
  }

  TrimResult out = assemble(d, f, depth);
  out.significant_s = s;
  out.acf_profile = std::move(lag1_profile);
  out.acf_window_profile = std::move(window_profile);
  out.cap_hit = !met && s > 0;
  return out;
}

GsvdRetentionReport gsvd_retention_check(const StsMatrix& d, const StsMatrix& s, int n_perm,
                                         std::uint64_t seed, unsigned jobs) {
  require_complete(d, "gsvd_retention_check");
  require_complete(s, "gsvd_retention_check");
  if (n_perm < 2) fail(ErrorKind::argument, "n_perm must be at least 2");

  GsvdRetentionReport report;
  report.n_perm = n_perm;
  report.seed = seed;
  report.observed = gsvd(d.values, s.values).generalized_values;
  const Eigen::Index p = report.observed.size();

  std::vector<Eigen::VectorXd> replicates(static_cast<std::size_t>(n_perm));
  parallel_for(replicates.size(), jobs, [&](std::size_t r) {
    Rng rng(stream_seed(seed, r));
    replicates[r] = gsvd(shuffled_columns(d.values, rng), s.values).generalized_values;
  });

  report.null_lower.resize(p);
  report.null_upper.resize(p);
  report.inside.assign(static_cast<std::size_t>(p), false);
  std::vector<double> sample(static_cast<std::size_t>(n_perm));
  int inside = 0;
  for (Eigen::Index k = 0; k < p; ++k) {
    for (std::size_t r = 0; r < replicates.size(); ++r) sample[r] = replicates[r](k);
    std::sort(sample.begin(), sample.end());
    report.null_lower(k) = quantile_sorted(sample, 0.025);
    report.null_upper(k) = quantile_sorted(sample, 0.975);
    const double v = report.observed(k);
    const bool in = v >= report.null_lower(k) && v <= report.null_upper(k);
    report.inside[static_cast<std::size_t>(k)] = in;
    inside += in ? 1 : 0;
  }
  report.fraction_inside = p > 0 ? static_cast<double>(inside) / static_cast<double>(p) : 0.0;
  return report;
}

}  // namespace csa
