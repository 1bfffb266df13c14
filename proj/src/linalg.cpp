#include "csa/linalg.hpp"

#include "csa/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace csa {

namespace {

void require_finite(const Eigen::MatrixXd& x, const char* what) {
  if (!x.allFinite()) fail(ErrorKind::non_finite, std::string(what) + ": non-finite entry");
}

// Numeric time coordinate used by the trend fit.
double time_coordinate(const TimeKey& key, Resolution resolution) {
  switch (resolution) {
    case Resolution::daily: return static_cast<double>(day_number(key));
    case Resolution::monthly: return 12.0 * key.year + (key.month - 1);
    case Resolution::yearly: return key.year;
  }
  return 0.0;
}

int season_of(const TimeKey& key, Resolution resolution) {
  switch (resolution) {
    case Resolution::daily: return season_day(key);
    case Resolution::monthly: return key.month;
    case Resolution::yearly: return 0;
  }
  return 0;
}

// Completes `partial` (orthonormal columns, some possibly zero where
// `valid` is false) to an orthonormal set.
void complete_orthonormal(Eigen::MatrixXd& partial, const std::vector<bool>& valid) {
  std::vector<Eigen::Index> good;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (valid[i]) good.push_back(static_cast<Eigen::Index>(i));
  }
  if (good.size() == valid.size()) return;
  const Eigen::Index n = partial.rows();
  Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(good.size()));
  for (std::size_t k = 0; k < good.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = partial.col(good[k]);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  Eigen::Index next = static_cast<Eigen::Index>(good.size());
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (!valid[i]) partial.col(static_cast<Eigen::Index>(i)) = q.col(next++);
  }
}

}  // namespace

const char* to_string(AssociationMethod method) {
  return method == AssociationMethod::pearson ? "pearson" : "bergsma";
}

AssociationMethod parse_association_method(const std::string& text) {
  if (text == "pearson") return AssociationMethod::pearson;
  if (text == "bergsma") return AssociationMethod::bergsma;
  fail(ErrorKind::config, "unknown association method '" + text + "'");
}

SvdFactors svd(const Eigen::MatrixXd& x) {
  require_finite(x, "svd");
  Eigen::BDCSVD<Eigen::MatrixXd> solver(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return SvdFactors{solver.singularValues(), solver.matrixU(), solver.matrixV()};
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& x) {
  require_finite(x, "svd");
  Eigen::BDCSVD<Eigen::MatrixXd> solver(x);
  return solver.singularValues();
}

EigenFactors eig_sym(const Eigen::MatrixXd& r, double symmetry_tol) {
  if (r.rows() != r.cols()) fail(ErrorKind::structural, "eig_sym: matrix is not square");
  require_finite(r, "eig_sym");
  const double asymmetry = (r - r.transpose()).cwiseAbs().maxCoeff();
  if (r.size() > 0 && asymmetry > symmetry_tol * std::max(1.0, r.cwiseAbs().maxCoeff())) {
    fail(ErrorKind::symmetry, "eig_sym: asymmetry " + std::to_string(asymmetry));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(r);
  if (solver.info() != Eigen::Success) fail(ErrorKind::non_finite, "eig_sym: no convergence");
  // Eigen returns ascending order.
  EigenFactors out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

GsvdFactors gsvd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index p = a.cols();
  if (b.cols() != p) {
    fail(ErrorKind::structural, "gsvd: column counts differ (" + std::to_string(p) + " vs " +
                                    std::to_string(b.cols()) + ")");
  }
  if (a.rows() < p || b.rows() < p) {
    fail(ErrorKind::structural, "gsvd: only the tall case rows >= columns is supported");
  }
  require_finite(a, "gsvd");
  require_finite(b, "gsvd");
  const Eigen::Index na = a.rows();
  const Eigen::Index nb = b.rows();

  Eigen::MatrixXd stacked(na + nb, p);
  stacked << a, b;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(na + nb, p);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();

  const Eigen::VectorXd r_sv = singular_values(r);
  const double tol = static_cast<double>(std::max(na + nb, p)) *
                     std::numeric_limits<double>::epsilon() * r_sv(0);
  if (r_sv.size() == 0 || r_sv(p - 1) <= tol) {
    fail(ErrorKind::rank_deficient, "gsvd: stacked pair is rank deficient");
  }

  // Q_a = U_a C W^T; then Q_b W has orthogonal columns with norms s_i.
  Eigen::BDCSVD<Eigen::MatrixXd> cs(q.topRows(na), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd w = cs.matrixV();
  Eigen::MatrixXd qb_w = q.bottomRows(nb) * w;

  GsvdFactors out;
  out.c.resize(p);
  out.s.resize(p);
  out.generalized_values.resize(p);
  out.left_a = cs.matrixU();
  out.left_b = Eigen::MatrixXd::Zero(nb, p);
  std::vector<bool> valid_b(static_cast<std::size_t>(p), true);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double c_raw = cs.singularValues()(i);
    const double s_raw = qb_w.col(i).norm();
    const double norm = std::hypot(c_raw, s_raw);
    out.c(i) = c_raw / norm;
    out.s(i) = s_raw / norm;
    if (s_raw > 1e-14) {
      out.left_b.col(i) = qb_w.col(i) / s_raw;
    } else {
      valid_b[static_cast<std::size_t>(i)] = false;
      out.s(i) = 0.0;
      out.c(i) = 1.0;
    }
    if (c_raw <= 1e-14) {
      out.c(i) = 0.0;
      out.s(i) = 1.0;
    }
    out.generalized_values(i) =
        out.s(i) == 0.0 ? std::numeric_limits<double>::infinity() : out.c(i) / out.s(i);
  }
  complete_orthonormal(out.left_b, valid_b);
  std::vector<bool> valid_a(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) valid_a[static_cast<std::size_t>(i)] = out.c(i) > 0.0;
  complete_orthonormal(out.left_a, valid_a);
  // A = Q_a R = U_a C W^T R, so X = R^T W.
  out.shared_right_factor = r.transpose() * w;
  return out;
}

std::vector<double> acf(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n < max_lag + 2) {
    fail(ErrorKind::insufficient_data, "acf: series of length " + std::to_string(n) +
                                           " too short for lag " + std::to_string(max_lag));
  }
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  double denom = 0.0;
  for (const double v : series) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) fail(ErrorKind::zero_variance, "acf: constant series");
  std::vector<double> r(max_lag);
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) num += (series[t] - mean) * (series[t + k] - mean);
    r[k - 1] = num / denom;
  }
  return r;
}

StsMatrix classical_detrend(const StsMatrix& x) {
  StsMatrix out = x;
  out.label = MatrixLabel::detrended;
  const Eigen::Index n = x.values.rows();

  std::vector<double> time(static_cast<std::size_t>(n));
  std::vector<int> season(static_cast<std::size_t>(n));
  std::map<int, int> season_slot;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& key = x.time_index[static_cast<std::size_t>(i)];
    time[static_cast<std::size_t>(i)] = time_coordinate(key, x.resolution);
    season_slot.emplace(season_of(key, x.resolution), 0);
  }
  int slots = 0;
  for (auto& [key, slot] : season_slot) slot = slots++;
  for (Eigen::Index i = 0; i < n; ++i) {
    season[static_cast<std::size_t>(i)] =
        season_slot.at(season_of(x.time_index[static_cast<std::size_t>(i)], x.resolution));
  }
  const double t0 = n > 0 ? time.front() : 0.0;

  for (Eigen::Index j = 0; j < x.values.cols(); ++j) {
    std::vector<double> count(static_cast<std::size_t>(slots), 0.0);
    std::vector<double> x_mean(static_cast<std::size_t>(slots), 0.0);
    std::vector<double> t_mean(static_cast<std::size_t>(slots), 0.0);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x.mask(i, j)) continue;
      const auto s = static_cast<std::size_t>(season[static_cast<std::size_t>(i)]);
      const double v = x.values(i, j);
      count[s] += 1.0;
      x_mean[s] += v;
      t_mean[s] += time[static_cast<std::size_t>(i)] - t0;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) {
      fail(ErrorKind::zero_variance,
           "classical_detrend: column '" + x.columns[static_cast<std::size_t>(j)].grid_id +
               "' is constant");
    }
    for (int s = 0; s < slots; ++s) {
      if (count[static_cast<std::size_t>(s)] > 0.0) {
        x_mean[static_cast<std::size_t>(s)] /= count[static_cast<std::size_t>(s)];
        t_mean[static_cast<std::size_t>(s)] /= count[static_cast<std::size_t>(s)];
      }
    }
    // Slope from within-season deviations, which is the joint least-squares
    // fit of trend plus season means.
    double sxy = 0.0, sxx = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x.mask(i, j)) continue;
      const auto s = static_cast<std::size_t>(season[static_cast<std::size_t>(i)]);
      const double dt = time[static_cast<std::size_t>(i)] - t0 - t_mean[s];
      sxy += dt * (x.values(i, j) - x_mean[s]);
      sxx += dt * dt;
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x.mask(i, j)) {
        out.values(i, j) = 0.0;
        continue;
      }
      const auto s = static_cast<std::size_t>(season[static_cast<std::size_t>(i)]);
      const double dt = time[static_cast<std::size_t>(i)] - t0 - t_mean[s];
      out.values(i, j) = (x.values(i, j) - x_mean[s]) - slope * dt;
    }
  }
  return out;
}

AssociationMatrix pearson_matrix(const StsMatrix& x) {
  const Eigen::Index n = x.values.rows();
  const Eigen::Index p = x.values.cols();
  AssociationMatrix out;
  out.method = AssociationMethod::pearson;
  for (const auto& g : x.columns) out.grid_ids.push_back(g.grid_id);
  out.m = Eigen::MatrixXd::Identity(p, p);

  auto column_name = [&](Eigen::Index j) { return x.columns[static_cast<std::size_t>(j)].grid_id; };

  if (!x.has_missing()) {
    if (n < 3) fail(ErrorKind::insufficient_data, "pearson_matrix: fewer than 3 rows");
    Eigen::MatrixXd z = x.values.rowwise() - x.values.colwise().mean();
    for (Eigen::Index j = 0; j < p; ++j) {
      const double norm = z.col(j).norm();
      if (!(norm > 0.0) || x.values.col(j).maxCoeff() == x.values.col(j).minCoeff()) {
        fail(ErrorKind::zero_variance, "pearson_matrix: column '" + column_name(j) + "' is constant");
      }
      z.col(j) /= norm;
    }
    Eigen::MatrixXd r(p, p);
    r.setZero();
    r.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose());
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index i = j + 1; i < p; ++i) {
        const double v = std::clamp(r(i, j), -1.0, 1.0);
        out.m(i, j) = v;
        out.m(j, i) = v;
      }
    }
    return out;
  }

  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j + 1; k < p; ++k) {
      double sx = 0.0, sy = 0.0, count = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (x.mask(i, j) || x.mask(i, k)) continue;
        sx += x.values(i, j);
        sy += x.values(i, k);
        count += 1.0;
      }
      if (count < 3.0) {
        fail(ErrorKind::insufficient_data, "pearson_matrix: columns '" + column_name(j) +
                                               "' and '" + column_name(k) +
                                               "' share fewer than 3 observed rows");
      }
      const double mx = sx / count, my = sy / count;
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (x.mask(i, j) || x.mask(i, k)) continue;
        const double dx = x.values(i, j) - mx;
        const double dy = x.values(i, k) - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
      }
      if (!(sxx > 0.0) || !(syy > 0.0)) {
        fail(ErrorKind::zero_variance, "pearson_matrix: columns '" + column_name(j) + "' and '" +
                                           column_name(k) + "' constant over shared rows");
      }
      const double v = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
      out.m(j, k) = v;
      out.m(k, j) = v;
    }
  }
  return out;
}

}  // namespace csa
