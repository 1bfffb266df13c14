// Desk-scale acceptance run: one PASS/FAIL line per criterion.
//   csa_acceptance            all criteria
//   csa_acceptance 4 12       selected criteria
// Criterion 14 needs CSA_IMD_GRIDS and CSA_IMD_SERIES (long-form tmax/tmin
// CSV) and is reported as SKIP otherwise.

#include "csa/dependence.hpp"
#include "csa/linalg.hpp"
#include "csa/pipeline.hpp"
#include "csa/random.hpp"
#include "csa/rmt.hpp"
#include "csa/spatial_order.hpp"
#include "csa/stats.hpp"
#include "csa/trim.hpp"

#include "oracles.hpp"
#include "support.hpp"
#include "synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace csa;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof(buffer), pattern, args...);
  return buffer;
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> column(const Eigen::MatrixXd& x, Eigen::Index j) {
  return std::vector<double>(x.col(j).data(), x.col(j).data() + x.rows());
}

Outcome mp_containment() {
  const auto start = std::chrono::steady_clock::now();
  const MpBounds b = mp_bounds(400, 4000);
  double worst = 1.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = pearson_matrix(testing::daily_matrix(testing::gaussian(4000, 400, seed)));
    const Eigen::VectorXd ev = eig_sym(r.m).eigenvalues;
    const auto inside = (ev.array() >= b.lower && ev.array() <= b.upper).count();
    worst = std::min(worst, static_cast<double>(inside) / 400.0);
  }
  const double t = seconds_since(start);
  return verdict(worst >= 0.98 && t < 60.0, fmt("min fraction inside %.4f over 10 seeds, %.1f s", worst, t));
}

Outcome mp_closed_form() {
  const MpBounds b = mp_bounds(400, 4000);
  return verdict(std::abs(b.lower - 0.4675) <= 1e-4 && std::abs(b.upper - 1.7325) <= 1e-4,
                 fmt("lambda- = %.6f, lambda+ = %.6f", b.lower, b.upper));
}

Outcome trim_reconstruction() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = std::uniform_int_distribution<int>(10, 80)(rng);
    const auto p = std::uniform_int_distribution<int>(2, 30)(rng);
    const int depth = std::uniform_int_distribution<int>(0, std::min(n, p))(rng);
    const auto x = testing::daily_matrix(testing::gaussian(n, p, rng()));
    const TrimResult t = trim_to_depth(x, depth);
    const Eigen::MatrixXd rebuilt =
        t.trimmed.values + t.removed_left * t.removed_values.asDiagonal() * t.removed_right.transpose();
    worst = std::max(worst, (x.values - rebuilt).norm() / x.values.norm());
  }
  return verdict(worst <= 1e-10, fmt("max relative residual %.2e over 50 matrices", worst));
}

Outcome planted_recovery() {
  const auto start = std::chrono::steady_clock::now();
  const auto planted = testing::planted_signal(2000, 50, 3, 5.0, 1.5, 77);
  const SvNullModel null = sv_null_thresholds(planted.data, 100, 0.95, stage_seed(77, "trim"));
  const TrimResult t = algorithm1(planted.data, TrimCriterion{}, null);
  const double acf1 = max_abs_acf(t.trimmed.values, 1);
  const Eigen::MatrixXd r = pearson_matrix(t.trimmed).m;
  const auto p = r.rows();
  const double off_error = ((r - planted.noise_correlation).cwiseAbs().sum()) / static_cast<double>(p * (p - 1));
  const double secs = seconds_since(start);
  const bool ok = t.depth_d >= 3 && t.depth_d <= 5 && acf1 <= 0.1 && off_error <= 0.1 && secs < 300.0;
  return verdict(ok, fmt("depth %d (s = %d), max |ACF(1)| %.4f, mean |R^S - C| %.4f, %.1f s", t.depth_d,
                         t.significant_s, acf1, off_error, secs));
}

Outcome null_determinism() {
  const auto x = testing::planted_signal(300, 20, 2, 3.0, 1.0, 5).data;
  const auto a = sv_null_thresholds(x, 50, 0.95, 11, 1);
  const auto b = sv_null_thresholds(x, 50, 0.95, 11, 3);
  const auto c = sv_null_thresholds(x, 50, 0.95, 12, 1);
  const bool same = a.thresholds.size() == b.thresholds.size() &&
                    std::equal(a.thresholds.begin(), a.thresholds.end(), b.thresholds.begin());
  const bool differ = a.thresholds != c.thresholds;
  return verdict(same && differ, fmt("same seed identical: %s, other seed differs: %s", same ? "yes" : "no",
                                     differ ? "yes" : "no"));
}

Outcome spiral_example() {
  const auto grids = testing::lattice_grids(9, 3);
  const SpatialOrder order = spiral_order(grids, false);
  std::vector<std::pair<int, int>> seen;
  std::string text;
  for (const auto i : order.permutation) {
    const int row = static_cast<int>(grids[i].lat - 10.0) + 1, col = static_cast<int>(grids[i].lon - 70.0) + 1;
    seen.emplace_back(row, col);
    text += fmt("(%d,%d)", row, col);
  }
  const std::vector<std::pair<int, int>> head{{1, 1}, {1, 2}, {2, 1}, {3, 1}, {2, 2}, {1, 3}};
  return verdict(std::equal(head.begin(), head.end(), seen.begin()), "visits " + text);
}

Outcome bergsma_oracle() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = static_cast<std::size_t>(std::uniform_int_distribution<int>(4, 50)(rng));
    std::vector<double> x(t), y(t);
    for (std::size_t i = 0; i < t; ++i) {
      x[i] = normal(rng);
      y[i] = trial % 2 ? x[i] * x[i] + 0.3 * normal(rng) : normal(rng);
      if (trial % 5 == 0) x[i] = std::round(x[i]);  // ties
    }
    worst = std::max(worst, std::abs(bergsma_rho(x, y) - oracle::bergsma_rho(x, y)));
  }
  return verdict(worst <= 1e-12, fmt("max |fast - brute force| %.2e over 100 pairs", worst));
}

Outcome bergsma_independence() {
  double total = 0.0;
  bool self_exact = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::MatrixXd z = testing::gaussian(2000, 2, 100 + seed);
    const auto x = column(z, 0), y = column(z, 1);
    total += bergsma_rho(x, y);
    self_exact = self_exact && bergsma_rho(x, x) == 1.0;
  }
  const double m = total / 20.0;
  return verdict(std::abs(m) < 0.02 && self_exact,
                 fmt("mean rho %.5f over 20 seeds, rho(x,x) == 1: %s", m, self_exact ? "yes" : "no"));
}

Outcome sb_hand_case() {
  AssociationMatrix a;
  a.m = Eigen::Matrix3d{{1.0, 0.5, 0.0}, {0.5, 1.0, 0.5}, {0.0, 0.5, 1.0}};
  const double v = spatial_bergsma(a, weights_lag1(testing::lattice_grids(3, 3)));
  return verdict(std::abs(v - 0.5) <= 1e-12, fmt("S_B = %.15f", v));
}

Outcome morans_calibration() {
  const std::vector<double> alternating{1.0, -1.0, 1.0, -1.0};
  const double hand = morans_i(alternating, weights_lag1(testing::lattice_grids(4, 4)));

  const auto grids = testing::lattice_grids(100, 10);
  const WeightMatrix w = weights_lag1(grids);
  std::mt19937_64 rng(31);
  std::vector<double> values(100);
  std::normal_distribution<double> normal;
  for (auto& v : values) v = normal(rng);
  const int reps = 4000;
  std::vector<double> draws;
  for (int r = 0; r < reps; ++r) {
    std::shuffle(values.begin(), values.end(), rng);
    draws.push_back(morans_i(values, w));
  }
  const double m = mean(draws), se = stddev(draws) / std::sqrt(static_cast<double>(reps));
  const double expected = -1.0 / 99.0;
  const bool ok = std::abs(hand + 1.0) <= 1e-12 && std::abs(m - expected) <= 4.0 * se;
  return verdict(ok, fmt("I(alternating) = %.15f; permutation mean %.5f vs %.5f (se %.5f)", hand, m, expected, se));
}

Outcome gsvd_contracts() {
  const Eigen::MatrixXd a = testing::gaussian(30, 6, 9);
  const double same = (gsvd(a, a).generalized_values.array() - 1.0).abs().maxCoeff();
  const double ident = (gsvd(a, Eigen::MatrixXd::Identity(6, 6)).generalized_values - svd(a).singular_values)
                           .cwiseAbs()
                           .maxCoeff();
  return verdict(same <= 1e-10 && ident <= 1e-10, fmt("GSV(a,a) - 1: %.2e; GSV(a,I) - SV(a): %.2e", same, ident));
}

Outcome change_point() {
  const StsMatrix x = testing::two_regime(16, 20, 10, 0.5, 3.0, 2026);
  SbPlan plan;
  plan.windows = WindowPlan::yearly;
  const auto series = sb_series(x, plan);
  std::vector<double> before, after;
  for (std::size_t i = 0; i < series.entries.size(); ++i) (i < 10 ? before : after).push_back(series.entries[i].value);
  const double gap = std::abs(mean(after) - mean(before));
  const double within = std::max(stddev(before), stddev(after));
  return verdict(before.size() == 10 && after.size() == 10 && gap > 5.0 * within,
                 fmt("mean difference %.4f, within-regime sd %.4f (ratio %.1f)", gap, within, gap / within));
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    files[fs::relative(entry.path(), dir).generic_string()] = s.str();
  }
  return files;
}

Outcome pipeline_determinism() {
  const fs::path root = fs::temp_directory_path() / "csa_acceptance_13";
  fs::remove_all(root);
  testing::write_dataset(root / "data", testing::planted_signal(730, 16, 2, 4.0, 1.5, 13).data);
  RunConfig c;
  c.grids_path = (root / "data" / "grids.csv").string();
  c.series_path = (root / "data" / "series.csv").string();
  c.n_perm = 30;
  c.gsvd_perm = 10;
  c.seed = 13;
  c.windows = WindowPlan::yearly;
  c.schemes = {WeightScheme::lag1_adjacency, WeightScheme::exp_decay};
  c.svg = true;
  c.out_dir = (root / "out").string();
  run(c);
  const auto first = snapshot(root / "out");
  c.jobs = 2;
  run(c);
  const auto second = snapshot(root / "out");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    if (it == second.end() || it->second != bytes) ++differing;
  }
  const bool ok = first.size() == second.size() && differing == 0 && first.count("manifest.json") == 1;
  return verdict(ok, fmt("%zu files compared, %zu differ", first.size(), differing));
}

Outcome imd_integration() {
  const char* grids = std::getenv("CSA_IMD_GRIDS");
  const char* series = std::getenv("CSA_IMD_SERIES");
  if (!grids || !series) return {Verdict::skip, "set CSA_IMD_GRIDS and CSA_IMD_SERIES to run"};
  RunConfig c;
  c.grids_path = grids;
  c.series_path = series;
  c.seed = 1;
  c.methods = {AssociationMethod::pearson};
  c.schemes.clear();
  c.argmax = false;
  c.out_dir = (fs::temp_directory_path() / "csa_acceptance_imd").string();
  if (const char* jobs = std::getenv("CSA_JOBS")) c.jobs = static_cast<unsigned>(std::max(1, std::atoi(jobs)));
  const RunReport r = run(c);
  const int d = r.significant_eigs.at("R_D"), t = r.significant_eigs.at("R_T"), s = r.significant_eigs.at("R_S");
  const bool ok = d == 10 && t == 18 && s == 33 && r.depth == 12 && std::abs(r.sv_share_removed - 0.72) <= 0.01;
  return verdict(ok, fmt("eigs R^D %d, R^T %d, R^S %d; depth %d; SV share %.4f", d, t, s, r.depth,
                         r.sv_share_removed));
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "MP bulk containment", mp_containment},
      {2, "mp_bounds closed form", mp_closed_form},
      {3, "trimming reconstruction", trim_reconstruction},
      {4, "planted-signal recovery", planted_recovery},
      {5, "permutation-null determinism", null_determinism},
      {6, "spiral ordering", spiral_example},
      {7, "Bergsma oracle equivalence", bergsma_oracle},
      {8, "Bergsma independence calibration", bergsma_independence},
      {9, "spatial Bergsma hand case", sb_hand_case},
      {10, "Moran's I calibration", morans_calibration},
      {11, "GSVD contracts", gsvd_contracts},
      {12, "change-point visibility", change_point},
      {13, "pipeline determinism", pipeline_determinism},
      {14, "IMD integration", imd_integration},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
    std::cout << "criterion " << (c.id < 10 ? " " : "") << c.id << ' ' << tag << "  " << c.name << ": " << o.detail
              << std::endl;
    if (o.verdict == Verdict::fail) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
