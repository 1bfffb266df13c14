#include "csa/rmt.hpp"

#include "csa/csv.hpp"
#include "csa/error.hpp"
#include "csa/parallel.hpp"
#include "csa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace csa {

MpBounds mp_bounds(std::size_t p, std::size_t n) {
  if (p == 0 || n == 0) fail(ErrorKind::argument, "mp_bounds: p and n must be positive");
  if (p > n) {
    fail(ErrorKind::argument, "mp_bounds: p = " + std::to_string(p) + " exceeds n = " +
                                  std::to_string(n));
  }
  MpBounds b;
  b.gamma = static_cast<double>(p) / static_cast<double>(n);
  const double root = std::sqrt(b.gamma);
  b.lower = (1.0 - root) * (1.0 - root);
  b.upper = (1.0 + root) * (1.0 + root);
  return b;
}

int significant_eigs(const Eigen::VectorXd& eigenvalues, const MpBounds& bounds) {
  return static_cast<int>((eigenvalues.array() > bounds.upper).count());
}

AssociationMatrix mp_denoise(const AssociationMatrix& r, int k, bool rescale_diagonal) {
  const auto p = static_cast<int>(r.size());
  if (k < 0 || k > p) {
    fail(ErrorKind::argument, "mp_denoise: k = " + std::to_string(k) + " outside [0, " +
                                  std::to_string(p) + "]");
  }
  const EigenFactors e = eig_sym(r.m);
  AssociationMatrix out = r;
  const auto top = e.eigenvectors.leftCols(k);
  out.m = top * e.eigenvalues.head(k).asDiagonal() * top.transpose();
  out.m = 0.5 * (out.m + out.m.transpose()).eval();
  if (rescale_diagonal) {
    const Eigen::VectorXd d = out.m.diagonal().cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) {
        const double scale = d(i) * d(j);
        out.m(i, j) = scale > 0.0 ? out.m(i, j) / scale : 0.0;
      }
    }
  }
  out.denoised_rank = k;
  return out;
}

Esd esd(const Eigen::VectorXd& eigenvalues) {
  Esd out;
  out.eigenvalues.assign(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  if (out.eigenvalues.empty()) return out;
  for (std::size_t i = 0; i < kEsdProbes.size(); ++i) {
    out.quantiles[i] = quantile_sorted(out.eigenvalues, kEsdProbes[i]);
  }
  out.mean = mean(out.eigenvalues);
  return out;
}

std::vector<EsdRow> esd_series(const std::vector<AssociationMatrix>& windows,
                               const std::vector<std::size_t>& n_per_window, unsigned jobs) {
  if (n_per_window.size() != windows.size()) {
    fail(ErrorKind::structural, "esd_series: one sample size per window required");
  }
  for (const auto& w : windows) {
    if (w.size() != windows.front().size()) {
      fail(ErrorKind::structural, "esd_series: windows differ in dimension");
    }
  }
  std::vector<EsdRow> rows(windows.size());
  parallel_for(windows.size(), jobs, [&](std::size_t i) {
    const EigenFactors e = eig_sym(windows[i].m);
    rows[i].window = windows[i].window;
    rows[i].esd = esd(e);
    const std::size_t p = windows[i].size();
    // Short windows (n < p) keep the same edge formulas with gamma > 1.
    const std::size_t n = std::max<std::size_t>(n_per_window[i], 1);
    rows[i].bounds.gamma = static_cast<double>(p) / static_cast<double>(n);
    const double root = std::sqrt(rows[i].bounds.gamma);
    rows[i].bounds.lower = (1.0 - root) * (1.0 - root);
    rows[i].bounds.upper = (1.0 + root) * (1.0 + root);
    rows[i].n_significant = significant_eigs(e, rows[i].bounds);
  });
  return rows;
}

std::vector<EsdRow> esd_series(const std::vector<AssociationMatrix>& windows,
                               std::size_t n_per_window, unsigned jobs) {
  return esd_series(windows, std::vector<std::size_t>(windows.size(), n_per_window), jobs);
}

void write_esd_csv(std::ostream& out, const std::vector<EsdRow>& rows) {
  out << "window,q05,q25,q50,q75,q95,mean,n_significant\n";
  for (const auto& row : rows) {
    std::vector<std::string> fields{row.window};
    for (const double q : row.esd.quantiles) fields.push_back(csv::format(q));
    fields.push_back(csv::format(row.esd.mean));
    fields.push_back(std::to_string(row.n_significant));
    out << csv::join(fields) << '\n';
  }
}

}  // namespace csa
