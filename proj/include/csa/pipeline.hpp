#pragma once

#include "csa/dependence.hpp"
#include "csa/rmt.hpp"
#include "csa/spatial_order.hpp"
#include "csa/trim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace csa {

enum class WindowPlan { whole, yearly, monthly };
enum class RegionPlan { all, per_zone };
enum class TrimScope { global, per_window };

const char* to_string(WindowPlan plan);
const char* to_string(RegionPlan plan);
const char* to_string(TrimScope scope);
WindowPlan parse_window_plan(const std::string& text);
RegionPlan parse_region_plan(const std::string& text);
TrimScope parse_trim_scope(const std::string& text);

struct RunConfig {
  std::string grids_path;
  std::string series_path;
  std::string enso_path;  // empty: no ENSO join
  std::string dmi_path;   // empty: no IOD join
  DtrConfig dtr;

  OrderMethod order = OrderMethod::spiral;
  int hilbert_bits = 16;
  bool stratify_by_zone = true;

  int n_perm = 500;
  double quantile = 0.95;
  TrimCriterion criterion;
  std::optional<std::uint64_t> seed;
  std::optional<int> fixed_depth;
  int gsvd_perm = 0;  // 0 skips the retention check
  TrimScope trim_scope = TrimScope::global;

  std::vector<WeightScheme> schemes{WeightScheme::lag1_adjacency};
  AdjacencyRule adjacency = AdjacencyRule::rook;
  double theta = 1.0;

  WindowPlan windows = WindowPlan::whole;
  RegionPlan regions = RegionPlan::all;
  std::vector<AssociationMethod> methods{AssociationMethod::pearson, AssociationMethod::bergsma};
  bool baselines = true;  // T, R^D, R^T and their denoised forms
  bool argmax = true;
  std::optional<int> denoise_rank;  // default: MP-significant count
  bool rescale_diagonal = false;
  int iod_max_lag = 6;
  bool svg = false;

  std::string out_dir = "csa_out";
  unsigned jobs = 1;

  bool needs_permutations() const;
};

/// `key = value` lines; `#` starts a comment. Relative paths resolve against `base`.
RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base = {});
RunConfig parse_config(const std::string& path);
void set_config_value(RunConfig& config, const std::string& key, const std::string& value,
                      const std::filesystem::path& base = {});

/// Checks that input files exist and that a seed accompanies permutations.
void validate_config(const RunConfig& config);

/// Canonical key/value listing, as recorded in the manifest.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);

struct Window {
  std::string label;  // "all", "1951" or "1951-06"
  TimeRange range;
};

std::vector<Window> make_windows(const StsMatrix& x, WindowPlan plan);

struct Region {
  std::string label;  // "all" or "zone<k>"
  std::set<int> zones;
};

/// `per_zone` yields "all" followed by each zone present.
std::vector<Region> make_regions(const std::vector<GridMeta>& grids, RegionPlan plan);

struct WindowTrim {
  int n_perm = 500;
  double quantile = 0.95;
  TrimCriterion criterion;
  std::uint64_t seed = 0;  // per-window seeds derive from this and the label
  std::optional<int> fixed_depth;
};

struct SbPlan {
  WindowPlan windows = WindowPlan::whole;
  RegionPlan regions = RegionPlan::all;
  std::vector<AssociationMethod> methods{AssociationMethod::bergsma};
  std::vector<WeightScheme> schemes{WeightScheme::lag1_adjacency};
  AdjacencyRule adjacency = AdjacencyRule::rook;
  double theta = 1.0;
  LatticeSpec lattice;  // zero steps: inferred from all columns of the input
  unsigned jobs = 1;
  /// When set the input is D and every window is trimmed on its own.
  std::optional<WindowTrim> per_window_trim;
};

/// One entry per (window, region, scheme, method). Windows with fewer than
/// four time points are skipped and listed.
SbSeries sb_series(const StsMatrix& x, const SbPlan& plan);

struct PartnerRow {
  std::string grid;
  std::string partner;
  double dlat = 0.0;
  double dlon = 0.0;
};

struct PartnerTable {
  std::vector<PartnerRow> rows;
  std::map<long, std::size_t> dlat_counts;  // keyed by lattice steps
  std::map<long, std::size_t> dlon_counts;
  LatticeSpec lattice;
};

/// For each grid, the other grid of highest association (ties: smallest grid_id).
PartnerTable argmax_partner_offsets(const AssociationMatrix& assoc,
                                    const std::vector<GridMeta>& grids);

/// `grid_id,partner,dlat,dlon`
void write_partner_csv(std::ostream& out, const PartnerTable& table);
/// `axis,steps,offset,count`
void write_partner_histogram_csv(std::ostream& out, const PartnerTable& table);

enum class EnsoPhase { elnino, lanina, neutral };
const char* to_string(EnsoPhase phase);
EnsoPhase parse_enso_phase(const std::string& text);

/// `year,phase`
std::map<int, EnsoPhase> read_enso_phases(const std::string& path);

struct PhaseSummary {
  std::string region;
  WeightScheme scheme = WeightScheme::lag1_adjacency;
  AssociationMethod method = AssociationMethod::bergsma;
  EnsoPhase phase = EnsoPhase::neutral;
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Groups yearly S_B by (region, scheme, method, phase).
std::vector<PhaseSummary> teleconnect_enso(const SbSeries& yearly,
                                           const std::map<int, EnsoPhase>& phases);

/// `year,month,dmi`, keyed by month.
std::map<TimeKey, double> read_dmi(const std::string& path);

struct LagCorrelation {
  std::string region;
  WeightScheme scheme = WeightScheme::lag1_adjacency;
  AssociationMethod method = AssociationMethod::bergsma;
  int lag = 0;
  std::size_t overlap = 0;
  double correlation = 0.0;
};

/// Pearson correlation of S_B(month) with DMI(month - lag) for lag 0..max_lag.
std::vector<LagCorrelation> teleconnect_iod(const SbSeries& monthly,
                                            const std::map<TimeKey, double>& dmi, int max_lag);

/// `region,scheme,method,phase,count,mean,sd,min,max`
void write_enso_csv(std::ostream& out, const std::vector<PhaseSummary>& rows);
/// `region,scheme,method,lag,overlap,correlation`
void write_iod_csv(std::ostream& out, const std::vector<LagCorrelation>& rows);

/// Writes the `rank,observed,null_lower,null_upper,inside` table.
void write_gsvd_csv(std::ostream& out, const GsvdRetentionReport& report);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct OutputRecord {
  std::string file;  // relative to the output directory
  std::string stage;
  std::string kind;  // series, matrix, table, report, figure
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunReport {
  std::filesystem::path out_dir;
  std::vector<OutputRecord> outputs;
  int depth = 0;
  int significant_s = 0;
  bool cap_hit = false;
  double sv_share_removed = 0.0;
  std::map<std::string, int> significant_eigs;  // by matrix name
};

/// ingest -> order -> trim -> association -> denoise/ESD -> S_B -> joins,
/// then manifest.json. A failing stage is recorded in the manifest before
/// the error propagates.
RunReport run(const RunConfig& config);

struct ReportSummary {
  std::size_t verified = 0;
  std::vector<std::string> figures;  // written relative to the manifest directory
};

/// Verifies manifest digests and regenerates figures from the CSV outputs.
ReportSummary regenerate_report(const std::string& manifest_path);

}  // namespace csa
