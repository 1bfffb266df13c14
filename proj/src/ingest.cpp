#include "csa/ingest.hpp"

#include "csa/csv.hpp"
#include "csa/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace csa {

namespace {

bool valid_date(int year, int month, int day) {
  const std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  return ymd.ok();
}

Resolution resolution_of(const TimeKey& key) {
  if (key.day != 0) return Resolution::daily;
  if (key.month != 0) return Resolution::monthly;
  return Resolution::yearly;
}

TimeKey truncate(const TimeKey& key, Resolution resolution) {
  switch (resolution) {
    case Resolution::daily: return key;
    case Resolution::monthly: return make_month(key.year, key.month);
    case Resolution::yearly: return make_year(key.year);
  }
  return key;
}

std::string coordinate(std::size_t row, std::size_t col) {
  return "(" + std::to_string(row) + ", " + std::to_string(col) + ")";
}

}  // namespace

TimeKey make_day(int year, int month, int day) {
  if (!valid_date(year, month, day)) {
    fail(ErrorKind::parse, "invalid calendar date " + std::to_string(year) + "-" +
                               std::to_string(month) + "-" + std::to_string(day));
  }
  return TimeKey{year, month, day};
}

TimeKey make_month(int year, int month) {
  if (month < 1 || month > 12) fail(ErrorKind::parse, "invalid month " + std::to_string(month));
  return TimeKey{year, month, 0};
}

TimeKey make_year(int year) { return TimeKey{year, 0, 0}; }

TimeKey parse_time_key(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '-') {
      parts.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  const std::string context = "date '" + text + "'";
  if (parts.empty() || parts.size() > 3 || parts[0].size() != 4) {
    fail(ErrorKind::parse, context + ": expected YYYY[-MM[-DD]]");
  }
  const int year = static_cast<int>(csv::parse_int(parts[0], context));
  if (parts.size() == 1) return make_year(year);
  const int month = static_cast<int>(csv::parse_int(parts[1], context));
  if (parts.size() == 2) return make_month(year, month);
  return make_day(year, month, static_cast<int>(csv::parse_int(parts[2], context)));
}

std::string format_time_key(const TimeKey& key) {
  char buffer[32];
  if (key.day != 0) {
    std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02d", key.year, key.month, key.day);
  } else if (key.month != 0) {
    std::snprintf(buffer, sizeof(buffer), "%04d-%02d", key.year, key.month);
  } else {
    std::snprintf(buffer, sizeof(buffer), "%04d", key.year);
  }
  return buffer;
}

std::int64_t day_number(const TimeKey& key) {
  const std::chrono::sys_days days{
      std::chrono::year_month_day{std::chrono::year{key.year},
                                  std::chrono::month{static_cast<unsigned>(key.month)},
                                  std::chrono::day{static_cast<unsigned>(key.day)}}};
  return days.time_since_epoch().count();
}

int season_day(const TimeKey& key) {
  static constexpr int kCumulative[12] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
  if (key.month == 2 && key.day == 29) return 59;
  return kCumulative[key.month - 1] + key.day;
}

char label_letter(MatrixLabel label) {
  switch (label) {
    case MatrixLabel::raw: return 'X';
    case MatrixLabel::reordered: return 'D';
    case MatrixLabel::detrended: return 'T';
    case MatrixLabel::trimmed: return 'S';
  }
  return '?';
}

StsMatrix StsMatrix::complete(Eigen::MatrixXd values, std::vector<TimeKey> time_index,
                              Resolution resolution, std::vector<GridMeta> columns,
                              MatrixLabel label) {
  StsMatrix x;
  x.mask = BoolMatrix::Constant(values.rows(), values.cols(), false);
  x.values = std::move(values);
  x.time_index = std::move(time_index);
  x.resolution = resolution;
  x.columns = std::move(columns);
  x.label = label;
  for (auto& column : x.columns) column.complete = true;
  x.validate();
  return x;
}

void StsMatrix::validate() const {
  if (mask.rows() != values.rows() || mask.cols() != values.cols()) {
    fail(ErrorKind::structural, "mask shape differs from value shape");
  }
  if (time_index.size() != rows()) {
    fail(ErrorKind::structural, "time index has " + std::to_string(time_index.size()) +
                                    " entries for " + std::to_string(rows()) + " rows");
  }
  if (columns.size() != cols()) {
    fail(ErrorKind::structural, "column metadata has " + std::to_string(columns.size()) +
                                    " entries for " + std::to_string(cols()) + " columns");
  }
  for (std::size_t i = 1; i < time_index.size(); ++i) {
    if (!(time_index[i - 1] < time_index[i])) {
      fail(ErrorKind::structural,
           "time index not strictly increasing at row " + std::to_string(i));
    }
  }
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (!mask(i, j) && !std::isfinite(values(i, j))) {
        fail(ErrorKind::non_finite, "non-finite observed value at " +
                                        coordinate(static_cast<std::size_t>(i),
                                                   static_cast<std::size_t>(j)));
      }
    }
  }
}

std::vector<GridMeta> read_grids(const std::string& path) {
  const csv::Table table = csv::read(path);
  const auto id_col = table.find("grid_id");
  const auto lat_col = table.find("lat");
  const auto lon_col = table.find("lon");
  const auto zone_col = table.find("zone");
  if (!id_col || !lat_col || !lon_col || !zone_col) {
    fail(ErrorKind::parse, path + ": header must contain grid_id,lat,lon,zone");
  }
  std::vector<GridMeta> grids;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string context = path + ":" + std::to_string(table.line_numbers[r]);
    GridMeta g;
    g.grid_id = row[*id_col];
    g.lat = csv::parse_double(row[*lat_col], context);
    g.lon = csv::parse_double(row[*lon_col], context);
    g.zone = static_cast<int>(csv::parse_int(row[*zone_col], context));
    if (g.grid_id.empty()) fail(ErrorKind::parse, context + ": empty grid_id");
    if (g.zone < 1) fail(ErrorKind::parse, context + ": zone must be >= 1");
    if (!seen.insert(g.grid_id).second) {
      fail(ErrorKind::duplicate, context + ": duplicate grid_id '" + g.grid_id + "'");
    }
    grids.push_back(std::move(g));
  }
  if (grids.empty()) fail(ErrorKind::empty_selection, path + ": no grids");
  return grids;
}

SeriesFile read_series(const std::string& path, const std::vector<GridMeta>& grids,
                       const DtrConfig& config) {
  if (config.missing_token.empty()) fail(ErrorKind::config, "missing token must be non-empty");
  const csv::Table table = csv::read(path);
  const auto date_col = table.find("date");
  const auto id_col = table.find("grid_id");
  const auto tmax_col = table.find("tmax");
  const auto tmin_col = table.find("tmin");
  const auto value_col = table.find("value");
  const bool extremes = tmax_col && tmin_col;
  if (!date_col || !id_col || (!extremes && !value_col)) {
    fail(ErrorKind::parse, path + ": header must be date,grid_id,tmax,tmin or date,grid_id,value");
  }

  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t j = 0; j < grids.size(); ++j) column_of.emplace(grids[j].grid_id, j);

  std::map<TimeKey, std::size_t> row_of;
  std::vector<TimeKey> parsed(table.rows.size());
  std::optional<Resolution> resolution;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    parsed[r] = parse_time_key(table.rows[r][*date_col]);
    const Resolution res = resolution_of(parsed[r]);
    if (resolution && *resolution != res) {
      fail(ErrorKind::parse, path + ":" + std::to_string(table.line_numbers[r]) +
                                 ": mixed date resolutions");
    }
    resolution = res;
    row_of.emplace(parsed[r], 0);
  }
  if (row_of.empty()) fail(ErrorKind::empty_selection, path + ": no observations");
  std::vector<TimeKey> time_index;
  for (auto& [key, index] : row_of) {
    index = time_index.size();
    time_index.push_back(key);
  }

  const auto n = static_cast<Eigen::Index>(time_index.size());
  const auto p = static_cast<Eigen::Index>(grids.size());
  const std::size_t channels = extremes ? 2 : 1;
  std::vector<Eigen::MatrixXd> values(channels, Eigen::MatrixXd::Zero(n, p));
  std::vector<BoolMatrix> masks(channels, BoolMatrix::Constant(n, p, true));
  BoolMatrix seen = BoolMatrix::Constant(n, p, false);

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string context = path + ":" + std::to_string(table.line_numbers[r]);
    const auto it = column_of.find(row[*id_col]);
    if (it == column_of.end()) {
      fail(ErrorKind::vocabulary, context + ": unknown grid_id '" + row[*id_col] + "'");
    }
    const auto i = static_cast<Eigen::Index>(row_of.at(parsed[r]));
    const auto j = static_cast<Eigen::Index>(it->second);
    if (seen(i, j)) {
      fail(ErrorKind::duplicate, context + ": duplicate observation for " + row[*id_col] +
                                     " on " + row[*date_col]);
    }
    seen(i, j) = true;
    const std::size_t source[2] = {extremes ? *tmax_col : *value_col, extremes ? *tmin_col : 0};
    for (std::size_t c = 0; c < channels; ++c) {
      const std::string& field = row[source[c]];
      if (field == config.missing_token) continue;
      values[c](i, j) = csv::parse_double(field, context);
      masks[c](i, j) = false;
    }
  }

  auto build = [&](std::size_t c) {
    StsMatrix x;
    x.values = std::move(values[c]);
    x.mask = std::move(masks[c]);
    x.time_index = time_index;
    x.resolution = *resolution;
    x.columns = grids;
    for (Eigen::Index j = 0; j < p; ++j) {
      x.columns[static_cast<std::size_t>(j)].complete = !x.mask.col(j).any();
    }
    x.validate();
    return x;
  };
  SeriesFile file;
  if (extremes) {
    file.extremes = SeriesPair{build(0), build(1)};
  } else {
    file.values = build(0);
  }
  return file;
}

StsMatrix compute_dtr(const StsMatrix& tmax, const StsMatrix& tmin) {
  if (tmax.rows() != tmin.rows() || tmax.cols() != tmin.cols()) {
    fail(ErrorKind::structural, "tmax is " + std::to_string(tmax.rows()) + "x" +
                                    std::to_string(tmax.cols()) + ", tmin is " +
                                    std::to_string(tmin.rows()) + "x" +
                                    std::to_string(tmin.cols()));
  }
  for (std::size_t i = 0; i < tmax.rows(); ++i) {
    if (tmax.time_index[i] != tmin.time_index[i]) {
      fail(ErrorKind::structural, "time index differs at row " + std::to_string(i) + ": " +
                                      format_time_key(tmax.time_index[i]) + " vs " +
                                      format_time_key(tmin.time_index[i]));
    }
  }
  for (std::size_t j = 0; j < tmax.cols(); ++j) {
    if (tmax.columns[j].grid_id != tmin.columns[j].grid_id) {
      fail(ErrorKind::structural, "column " + std::to_string(j) + " differs: " +
                                      tmax.columns[j].grid_id + " vs " +
                                      tmin.columns[j].grid_id);
    }
  }
  StsMatrix out;
  out.mask = tmax.mask || tmin.mask;
  out.values = out.mask.select(0.0, (tmax.values - tmin.values).array()).matrix();
  out.time_index = tmax.time_index;
  out.resolution = tmax.resolution;
  out.columns = tmax.columns;
  for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
    out.columns[static_cast<std::size_t>(j)].complete = !out.mask.col(j).any();
  }
  out.label = MatrixLabel::raw;
  return out;
}

std::size_t count_negative(const StsMatrix& x) {
  return static_cast<std::size_t>(((x.values.array() < 0.0) && !x.mask).count());
}

StsMatrix filter_complete(const StsMatrix& x) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < x.values.cols(); ++j) {
    if (!x.mask.col(j).any()) keep.push_back(j);
  }
  if (keep.empty()) fail(ErrorKind::empty_selection, "no fully observed columns");
  StsMatrix out;
  out.values = x.values(Eigen::all, keep);
  out.mask = x.mask(Eigen::all, keep);
  out.time_index = x.time_index;
  out.resolution = x.resolution;
  out.label = x.label;
  for (const auto j : keep) {
    out.columns.push_back(x.columns[static_cast<std::size_t>(j)]);
    out.columns.back().complete = true;
  }
  return out;
}

StsMatrix aggregate(const StsMatrix& x, Aggregation level, double min_coverage) {
  if (level == Aggregation::none) return x;
  if (x.resolution != Resolution::daily) {
    fail(ErrorKind::structural, "aggregation requires a daily time index");
  }
  if (min_coverage < 0.0 || min_coverage > 1.0) {
    fail(ErrorKind::argument, "min_coverage must lie in [0, 1]");
  }
  const Resolution target =
      level == Aggregation::monthly ? Resolution::monthly : Resolution::yearly;

  std::vector<TimeKey> periods;
  std::vector<std::size_t> period_of(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const TimeKey key = truncate(x.time_index[i], target);
    if (periods.empty() || periods.back() != key) periods.push_back(key);
    period_of[i] = periods.size() - 1;
  }

  const auto m = static_cast<Eigen::Index>(periods.size());
  const auto p = x.values.cols();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(m, p);
  Eigen::MatrixXd observed = Eigen::MatrixXd::Zero(m, p);
  Eigen::VectorXd totals = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < x.values.rows(); ++i) {
    const auto k = static_cast<Eigen::Index>(period_of[static_cast<std::size_t>(i)]);
    totals(k) += 1.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (x.mask(i, j)) continue;
      sums(k, j) += x.values(i, j);
      observed(k, j) += 1.0;
    }
  }

  StsMatrix out;
  out.values = Eigen::MatrixXd::Zero(m, p);
  out.mask = BoolMatrix::Constant(m, p, true);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double count = observed(k, j);
      if (count == 0.0 || count / totals(k) < min_coverage) continue;
      out.values(k, j) = sums(k, j) / count;
      out.mask(k, j) = false;
    }
  }
  out.time_index = std::move(periods);
  out.resolution = target;
  out.columns = x.columns;
  out.label = x.label;
  return out;
}

StsMatrix slice(const StsMatrix& x, const TimeRange& range, const std::set<int>& zones) {
  // Range bounds may be coarser than the rows (a year bound on daily rows);
  // rows are compared at the bound's own resolution.
  const Resolution first_res = resolution_of(range.first);
  const Resolution last_res = resolution_of(range.last);
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const TimeKey& key = x.time_index[i];
    if (!(truncate(key, first_res) < range.first) && !(range.last < truncate(key, last_res))) {
      rows.push_back(static_cast<Eigen::Index>(i));
    }
  }
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    if (zones.empty() || zones.contains(x.columns[j].zone)) {
      cols.push_back(static_cast<Eigen::Index>(j));
    }
  }
  if (rows.empty() || cols.empty()) {
    fail(ErrorKind::empty_selection, "slice " + format_time_key(range.first) + ".." +
                                         format_time_key(range.last) + " selects " +
                                         std::to_string(rows.size()) + " rows and " +
                                         std::to_string(cols.size()) + " columns");
  }
  StsMatrix out;
  out.values = x.values(rows, cols);
  out.mask = x.mask(rows, cols);
  for (const auto i : rows) out.time_index.push_back(x.time_index[static_cast<std::size_t>(i)]);
  for (const auto j : cols) out.columns.push_back(x.columns[static_cast<std::size_t>(j)]);
  out.resolution = x.resolution;
  out.label = x.label;
  return out;
}

void write_sts_csv(std::ostream& out, const StsMatrix& x, const std::string& missing_token) {
  std::vector<std::string> fields{"date"};
  for (const auto& g : x.columns) fields.push_back(g.grid_id);
  out << csv::join(fields) << '\n';
  for (Eigen::Index i = 0; i < x.values.rows(); ++i) {
    out << format_time_key(x.time_index[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < x.values.cols(); ++j) {
      out << ',' << (x.mask(i, j) ? missing_token : csv::format(x.values(i, j)));
    }
    out << '\n';
  }
}

StsMatrix read_sts_csv(const std::string& path, const std::vector<GridMeta>& grids,
                       const std::string& missing_token, MatrixLabel label) {
  const csv::Table table = csv::read(path);
  if (table.header.size() < 2 || table.header[0] != "date") {
    fail(ErrorKind::parse, path + ": header must be date followed by grid ids");
  }
  std::unordered_map<std::string, const GridMeta*> meta;
  for (const auto& g : grids) meta.emplace(g.grid_id, &g);

  StsMatrix x;
  x.label = label;
  std::unordered_set<std::string> seen;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const std::string& id = table.header[c];
    if (!seen.insert(id).second) fail(ErrorKind::duplicate, path + ": duplicate column '" + id + "'");
    if (grids.empty()) {
      x.columns.push_back(GridMeta{id, 0.0, 0.0, 1, false});
      continue;
    }
    const auto it = meta.find(id);
    if (it == meta.end()) fail(ErrorKind::vocabulary, path + ": unknown grid_id '" + id + "'");
    x.columns.push_back(*it->second);
  }
  if (table.rows.empty()) fail(ErrorKind::empty_selection, path + ": no rows");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto p = static_cast<Eigen::Index>(x.columns.size());
  x.values = Eigen::MatrixXd::Zero(n, p);
  x.mask = BoolMatrix::Constant(n, p, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const std::string context = path + ":" + std::to_string(table.line_numbers[static_cast<std::size_t>(i)]);
    x.time_index.push_back(parse_time_key(row[0]));
    if (i == 0) {
      x.resolution = resolution_of(x.time_index.front());
    } else if (resolution_of(x.time_index.back()) != x.resolution) {
      fail(ErrorKind::parse, context + ": mixed date resolutions");
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      const std::string& field = row[static_cast<std::size_t>(j) + 1];
      if (field == missing_token) {
        x.mask(i, j) = true;
      } else {
        x.values(i, j) = csv::parse_double(field, context);
      }
    }
  }
  for (Eigen::Index j = 0; j < p; ++j) x.columns[static_cast<std::size_t>(j)].complete = !x.mask.col(j).any();
  x.validate();
  return x;
}

StsMatrix load_dtr(const std::string& grids_path, const std::string& series_path,
                   const DtrConfig& config) {
  const auto grids = read_grids(grids_path);
  SeriesFile file = read_series(series_path, grids, config);
  StsMatrix x = file.extremes ? compute_dtr(file.extremes->tmax, file.extremes->tmin)
                              : std::move(*file.values);
  x.label = MatrixLabel::raw;
  if (config.complete_only) x = filter_complete(x);
  return aggregate(x, config.aggregate, config.min_coverage);
}

}  // namespace csa
