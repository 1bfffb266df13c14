#pragma once

#include "csa/association.hpp"
#include "csa/linalg.hpp"

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace csa {

/// Marcenko-Pastur bulk edges for a unit-variance correlation matrix.
struct MpBounds {
  double gamma = 0.0;  // p / n
  double lower = 0.0;
  double upper = 0.0;
};

MpBounds mp_bounds(std::size_t p, std::size_t n);

/// Eigenvalues strictly above the upper bulk edge.
int significant_eigs(const Eigen::VectorXd& eigenvalues, const MpBounds& bounds);
inline int significant_eigs(const EigenFactors& e, const MpBounds& bounds) {
  return significant_eigs(e.eigenvalues, bounds);
}

/// Sum of the top-k spectral terms lambda_j e_j e_j^T. With
/// `rescale_diagonal` the result is additionally scaled to unit diagonal.
AssociationMatrix mp_denoise(const AssociationMatrix& r, int k, bool rescale_diagonal = false);

inline constexpr std::array<double, 5> kEsdProbes = {0.05, 0.25, 0.5, 0.75, 0.95};

struct Esd {
  std::vector<double> eigenvalues;  // ascending
  std::array<double, 5> quantiles{};  // at kEsdProbes
  double mean = 0.0;

  double median() const { return quantiles[2]; }
  double top() const { return eigenvalues.empty() ? 0.0 : eigenvalues.back(); }
};

Esd esd(const Eigen::VectorXd& eigenvalues);
inline Esd esd(const EigenFactors& e) { return esd(e.eigenvalues); }

struct EsdRow {
  std::string window;
  Esd esd;
  int n_significant = 0;
  MpBounds bounds;
};

/// One row per window; window i uses MP bounds with n_per_window[i].
std::vector<EsdRow> esd_series(const std::vector<AssociationMatrix>& windows,
                               const std::vector<std::size_t>& n_per_window,
                               unsigned jobs = 1);
std::vector<EsdRow> esd_series(const std::vector<AssociationMatrix>& windows,
                               std::size_t n_per_window, unsigned jobs = 1);

/// `window,q05,q25,q50,q75,q95,mean,n_significant`
void write_esd_csv(std::ostream& out, const std::vector<EsdRow>& rows);

}  // namespace csa
