#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace csa {

enum class AssociationMethod { pearson, bergsma };

const char* to_string(AssociationMethod method);
AssociationMethod parse_association_method(const std::string& text);

/// Symmetric p x p matrix of pairwise association between locations.
struct AssociationMatrix {
  Eigen::MatrixXd m;
  AssociationMethod method = AssociationMethod::pearson;
  std::string window = "all";
  std::string region = "all";
  std::vector<std::string> grid_ids;
  /// Set when the matrix is a rank-k spectral truncation of an estimate.
  std::optional<int> denoised_rank;

  std::size_t size() const { return static_cast<std::size_t>(m.rows()); }
};

}  // namespace csa
