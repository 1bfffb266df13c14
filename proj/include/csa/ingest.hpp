#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace csa {

/// One spatial location: a grid cell or an irregular station.
struct GridMeta {
  std::string grid_id;
  double lat = 0.0;
  double lon = 0.0;
  int zone = 1;
  bool complete = false;
};

enum class Resolution { daily, monthly, yearly };

/// Calendar key of one row. Unused fields are zero (day for monthly rows,
/// month and day for yearly rows).
struct TimeKey {
  int year = 0;
  int month = 0;
  int day = 0;

  auto operator<=>(const TimeKey&) const = default;
};

TimeKey make_day(int year, int month, int day);
TimeKey make_month(int year, int month);
TimeKey make_year(int year);

/// Parses "YYYY-MM-DD", "YYYY-MM" or "YYYY".
TimeKey parse_time_key(const std::string& text);
std::string format_time_key(const TimeKey& key);

/// Days since 1970-01-01 for a daily key.
std::int64_t day_number(const TimeKey& key);

/// Day of year in a 365-day calendar: Jan 1 is 1, Feb 29 shares 59 with Feb 28.
int season_day(const TimeKey& key);

enum class MatrixLabel { raw, reordered, detrended, trimmed };

/// Single-letter label used in file names and reports: X, D, T or S.
char label_letter(MatrixLabel label);

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Spatial time series: rows are time points, columns are locations.
struct StsMatrix {
  Eigen::MatrixXd values;
  BoolMatrix mask;  // true where the observation is missing
  std::vector<TimeKey> time_index;
  Resolution resolution = Resolution::daily;
  std::vector<GridMeta> columns;
  MatrixLabel label = MatrixLabel::raw;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
  bool has_missing() const { return mask.any(); }

  /// Builds a fully observed matrix. Throws on any invariant violation.
  static StsMatrix complete(Eigen::MatrixXd values, std::vector<TimeKey> time_index,
                            Resolution resolution, std::vector<GridMeta> columns,
                            MatrixLabel label = MatrixLabel::raw);

  /// Checks the shape, ordering and finiteness invariants.
  void validate() const;
};

enum class Aggregation { none, monthly, yearly };

struct DtrConfig {
  std::string missing_token = "NA";
  bool complete_only = true;
  Aggregation aggregate = Aggregation::none;
  double min_coverage = 0.0;
};

std::vector<GridMeta> read_grids(const std::string& path);

struct SeriesPair {
  StsMatrix tmax;
  StsMatrix tmin;
};

/// Long-form series file with either `date,grid_id,tmax,tmin` or
/// `date,grid_id,value` columns. Rows absent from the file are masked.
struct SeriesFile {
  std::optional<SeriesPair> extremes;
  std::optional<StsMatrix> values;
};

SeriesFile read_series(const std::string& path, const std::vector<GridMeta>& grids,
                       const DtrConfig& config);

StsMatrix compute_dtr(const StsMatrix& tmax, const StsMatrix& tmin);

/// Number of observed negative entries (physically odd DTR values).
std::size_t count_negative(const StsMatrix& x);

StsMatrix filter_complete(const StsMatrix& x);

/// Mean over observed daily entries per period. A period is masked when it
/// has no observations or when its observed fraction is below min_coverage.
StsMatrix aggregate(const StsMatrix& x, Aggregation level, double min_coverage = 0.0);

struct TimeRange {
  TimeKey first;
  TimeKey last;  // inclusive
};

/// Rows inside `range` (compared at the matrix resolution) and columns whose
/// zone is in `zones`. An empty zone set selects every column.
StsMatrix slice(const StsMatrix& x, const TimeRange& range, const std::set<int>& zones);

/// Wide layout: `date,<grid_id>...`, one row per time point, masked entries
/// written as `missing_token`.
void write_sts_csv(std::ostream& out, const StsMatrix& x, const std::string& missing_token = "NA");

/// Reads the wide layout. Metadata for each column comes from `grids` when
/// given (unknown ids are an error), otherwise coordinates are zero.
StsMatrix read_sts_csv(const std::string& path, const std::vector<GridMeta>& grids = {},
                       const std::string& missing_token = "NA",
                       MatrixLabel label = MatrixLabel::raw);

/// Full-resolution input: read, difference and filter according to config.
StsMatrix load_dtr(const std::string& grids_path, const std::string& series_path,
                   const DtrConfig& config);

}  // namespace csa
