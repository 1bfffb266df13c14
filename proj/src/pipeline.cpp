#include "csa/pipeline.hpp"

#include "csa/csv.hpp"
#include "csa/error.hpp"
#include "csa/linalg.hpp"
#include "csa/random.hpp"
#include "csa/stats.hpp"
#include "csa/svg.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <tuple>

namespace csa {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string trim_ws(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim_ws(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorKind::config, key + ": expected a boolean, got '" + v + "'");
}

long long config_int(const std::string& key, const std::string& v) {
  try {
    return csv::parse_int(v, key);
  } catch (const Error&) {
    fail(ErrorKind::config, key + ": expected an integer, got '" + v + "'");
  }
}

double config_real(const std::string& key, const std::string& v) {
  try {
    return csv::parse_double(v, key);
  } catch (const Error&) {
    fail(ErrorKind::config, key + ": expected a number, got '" + v + "'");
  }
}

std::string resolve(const std::string& value, const fs::path& base) {
  if (value.empty()) return value;
  const fs::path p(value);
  return p.is_absolute() || base.empty() ? value : (base / p).lexically_normal().string();
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& value, Parse parse) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) {
    try {
      const T v = parse(item);
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    } catch (const Error& e) {
      fail(ErrorKind::config, key + ": " + e.what());
    }
  }
  return out;
}

template <typename T, typename Parse>
T parse_enum(const std::string& key, const std::string& value, Parse parse) {
  try {
    return parse(value);
  } catch (const Error& e) {
    fail(ErrorKind::config, key + ": " + e.what());
  }
}

const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::none: return "none";
    case Aggregation::monthly: return "monthly";
    case Aggregation::yearly: return "yearly";
  }
  return "none";
}

template <typename T>
std::string join_names(const std::vector<T>& items) {
  std::string out;
  for (const auto& item : items) out += (out.empty() ? "" : ",") + std::string(to_string(item));
  return out;
}

std::string region_label(int zone) { return "zone" + std::to_string(zone); }

// Writes files into the output directory and records their digests.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void emit(const std::string& name, const std::string& stage, const std::string& kind,
            const std::function<void(std::ostream&)>& writer) {
    const fs::path path = dir_ / name;
    fs::create_directories(path.parent_path());
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorKind::config, "cannot write " + path.string());
      writer(out);
      if (!out) fail(ErrorKind::config, "write failed for " + path.string());
    }
    records_.push_back(OutputRecord{name, stage, kind, sha256_file(path), fs::file_size(path)});
  }

  const std::vector<OutputRecord>& records() const { return records_; }

 private:
  fs::path dir_;
  std::vector<OutputRecord> records_;
};

json doubles(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
  }
  return out;
}

json doubles(const std::vector<double>& v) {
  return doubles(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

std::vector<std::string> ids_of(const std::vector<GridMeta>& grids) {
  std::vector<std::string> ids;
  for (const auto& g : grids) ids.push_back(g.grid_id);
  return ids;
}

void write_factor_csv(std::ostream& out, const std::string& key_name,
                      const std::vector<std::string>& keys, const Eigen::MatrixXd& factor) {
  std::vector<std::string> header{key_name};
  for (Eigen::Index k = 0; k < factor.cols(); ++k) header.push_back("c" + std::to_string(k + 1));
  out << csv::join(header) << '\n';
  for (Eigen::Index i = 0; i < factor.rows(); ++i) {
    out << csv::join({keys[static_cast<std::size_t>(i)]});
    for (Eigen::Index k = 0; k < factor.cols(); ++k) out << ',' << csv::format(factor(i, k));
    out << '\n';
  }
}

TrimResult run_trim(const StsMatrix& d, const WindowTrim& plan, unsigned jobs,
                    std::optional<SvNullModel>* null_out = nullptr) {
  if (plan.fixed_depth) return trim_to_depth(d, *plan.fixed_depth, std::nullopt, plan.criterion.acf_lags);
  SvNullModel null = sv_null_thresholds(d, plan.n_perm, plan.quantile, plan.seed, jobs);
  TrimResult t = algorithm1(d, plan.criterion, null);
  if (null_out) *null_out = std::move(null);
  return t;
}

AssociationMatrix associate(const StsMatrix& x, AssociationMethod method, unsigned jobs) {
  return method == AssociationMethod::pearson ? pearson_matrix(x) : bergsma_matrix(x, jobs);
}

WeightMatrix weights_for(const std::vector<GridMeta>& grids, WeightScheme scheme,
                         const SbPlan& plan, const LatticeSpec& lattice) {
  return scheme == WeightScheme::lag1_adjacency ? weights_lag1(grids, plan.adjacency, lattice)
                                                : weights_expdecay(grids, plan.theta);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) {
    fail(ErrorKind::zero_variance, "teleconnect_iod: constant series over the overlap");
  }
  return sab / std::sqrt(saa * sbb);
}

using SeriesKey = std::tuple<std::string, WeightScheme, AssociationMethod>;

std::map<SeriesKey, std::vector<const SbEntry*>> group_series(const SbSeries& series) {
  std::map<SeriesKey, std::vector<const SbEntry*>> groups;
  for (const auto& e : series.entries) groups[{e.region, e.scheme, e.method}].push_back(&e);
  return groups;
}

}  // namespace

const char* to_string(WindowPlan plan) {
  switch (plan) {
    case WindowPlan::whole: return "whole";
    case WindowPlan::yearly: return "yearly";
    case WindowPlan::monthly: return "monthly";
  }
  return "whole";
}

const char* to_string(RegionPlan plan) { return plan == RegionPlan::all ? "all" : "per-zone"; }
const char* to_string(TrimScope scope) { return scope == TrimScope::global ? "global" : "per-window"; }

WindowPlan parse_window_plan(const std::string& text) {
  if (text == "whole") return WindowPlan::whole;
  if (text == "yearly") return WindowPlan::yearly;
  if (text == "monthly") return WindowPlan::monthly;
  fail(ErrorKind::config, "unknown window plan '" + text + "'");
}

RegionPlan parse_region_plan(const std::string& text) {
  if (text == "all") return RegionPlan::all;
  if (text == "per-zone") return RegionPlan::per_zone;
  fail(ErrorKind::config, "unknown region plan '" + text + "'");
}

TrimScope parse_trim_scope(const std::string& text) {
  if (text == "global") return TrimScope::global;
  if (text == "per-window") return TrimScope::per_window;
  fail(ErrorKind::config, "unknown trim scope '" + text + "'");
}

bool RunConfig::needs_permutations() const {
  return !fixed_depth || gsvd_perm > 0;
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& value,
                      const fs::path& base) {
  if (key == "grids") c.grids_path = resolve(value, base);
  else if (key == "series") c.series_path = resolve(value, base);
  else if (key == "enso") c.enso_path = resolve(value, base);
  else if (key == "dmi") c.dmi_path = resolve(value, base);
  else if (key == "missing_token") c.dtr.missing_token = value;
  else if (key == "complete_only") c.dtr.complete_only = parse_bool(key, value);
  else if (key == "aggregate") {
    if (value == "none") c.dtr.aggregate = Aggregation::none;
    else if (value == "monthly") c.dtr.aggregate = Aggregation::monthly;
    else if (value == "yearly") c.dtr.aggregate = Aggregation::yearly;
    else fail(ErrorKind::config, "aggregate: unknown level '" + value + "'");
  } else if (key == "min_coverage") c.dtr.min_coverage = config_real(key, value);
  else if (key == "order") c.order = parse_enum<OrderMethod>(key, value, parse_order_method);
  else if (key == "hilbert_bits") c.hilbert_bits = static_cast<int>(config_int(key, value));
  else if (key == "stratify_by_zone") c.stratify_by_zone = parse_bool(key, value);
  else if (key == "n_perm") c.n_perm = static_cast<int>(config_int(key, value));
  else if (key == "quantile") c.quantile = config_real(key, value);
  else if (key == "acf_threshold") c.criterion.acf_threshold = config_real(key, value);
  else if (key == "acf_lags") c.criterion.acf_lags = static_cast<int>(config_int(key, value));
  else if (key == "seed") {
    const long long s = config_int(key, value);
    if (s < 0) fail(ErrorKind::config, "seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "depth") {
    if (value.empty() || value == "auto") c.fixed_depth.reset();
    else c.fixed_depth = static_cast<int>(config_int(key, value));
  } else if (key == "gsvd_perm") c.gsvd_perm = static_cast<int>(config_int(key, value));
  else if (key == "trim_scope") c.trim_scope = parse_trim_scope(value);
  else if (key == "weights") c.schemes = parse_list<WeightScheme>(key, value, parse_weight_scheme);
  else if (key == "adjacency") c.adjacency = parse_enum<AdjacencyRule>(key, value, parse_adjacency_rule);
  else if (key == "theta") c.theta = config_real(key, value);
  else if (key == "windows") c.windows = parse_window_plan(value);
  else if (key == "regions") c.regions = parse_region_plan(value);
  else if (key == "methods") {
    c.methods = parse_list<AssociationMethod>(key, value, parse_association_method);
    std::sort(c.methods.begin(), c.methods.end());
  } else if (key == "baselines") c.baselines = parse_bool(key, value);
  else if (key == "argmax") c.argmax = parse_bool(key, value);
  else if (key == "denoise_rank") {
    if (value.empty() || value == "auto") c.denoise_rank.reset();
    else c.denoise_rank = static_cast<int>(config_int(key, value));
  } else if (key == "rescale_diagonal") c.rescale_diagonal = parse_bool(key, value);
  else if (key == "iod_max_lag") c.iod_max_lag = static_cast<int>(config_int(key, value));
  else if (key == "svg") c.svg = parse_bool(key, value);
  else if (key == "out") c.out_dir = resolve(value, base);
  else if (key == "jobs") {
    const long long j = config_int(key, value);
    if (j < 0) fail(ErrorKind::config, "jobs must be non-negative");
    c.jobs = static_cast<unsigned>(j);
  } else fail(ErrorKind::config, "unknown config key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, const fs::path& base) {
  RunConfig config;
  std::stringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim_ws(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::config, "config line " + std::to_string(number) + ": expected key = value");
    }
    set_config_value(config, trim_ws(line.substr(0, eq)), trim_ws(line.substr(eq + 1)), base);
  }
  return config;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open config '" + path + "'");
  std::stringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), fs::path(path).parent_path());
}

void validate_config(const RunConfig& c) {
  auto require_file = [](const std::string& key, const std::string& path, bool required) {
    if (path.empty()) {
      if (required) fail(ErrorKind::config, key + " path is required");
      return;
    }
    if (!fs::is_regular_file(path)) fail(ErrorKind::config, key + " file '" + path + "' does not exist");
  };
  require_file("grids", c.grids_path, true);
  require_file("series", c.series_path, true);
  require_file("enso", c.enso_path, false);
  require_file("dmi", c.dmi_path, false);
  if (c.needs_permutations() && !c.seed) {
    fail(ErrorKind::config, "a seed is required when permutations are requested");
  }
  if (c.n_perm < 2) fail(ErrorKind::config, "n_perm must be at least 2");
  if (!(c.quantile > 0.0 && c.quantile < 1.0)) fail(ErrorKind::config, "quantile must lie in (0, 1)");
  if (!(c.criterion.acf_threshold > 0.0)) fail(ErrorKind::config, "acf_threshold must be positive");
  if (c.criterion.acf_lags < 1) fail(ErrorKind::config, "acf_lags must be at least 1");
  if (c.fixed_depth && *c.fixed_depth < 0) fail(ErrorKind::config, "depth must be non-negative");
  if (c.gsvd_perm == 1 || c.gsvd_perm < 0) fail(ErrorKind::config, "gsvd_perm must be 0 or at least 2");
  if (!(c.theta > 0.0)) fail(ErrorKind::config, "theta must be positive");
  if (c.methods.empty()) fail(ErrorKind::config, "at least one association method is required");
  if (c.iod_max_lag < 0) fail(ErrorKind::config, "iod_max_lag must be non-negative");
  if (c.hilbert_bits < 1 || c.hilbert_bits > 31) fail(ErrorKind::config, "hilbert_bits must lie in [1, 31]");
  if (c.denoise_rank && *c.denoise_rank < 0) fail(ErrorKind::config, "denoise_rank must be non-negative");
  if (!(c.dtr.min_coverage >= 0.0 && c.dtr.min_coverage <= 1.0)) {
    fail(ErrorKind::config, "min_coverage must lie in [0, 1]");
  }
  if (!c.enso_path.empty() && c.schemes.empty()) fail(ErrorKind::config, "enso join needs weights");
  if (!c.dmi_path.empty() && c.schemes.empty()) fail(ErrorKind::config, "dmi join needs weights");
  if (c.out_dir.empty()) fail(ErrorKind::config, "out directory is required");
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  auto opt_int = [](const auto& v) { return v ? std::to_string(*v) : std::string("auto"); };
  return {
      {"grids", c.grids_path},
      {"series", c.series_path},
      {"enso", c.enso_path},
      {"dmi", c.dmi_path},
      {"missing_token", c.dtr.missing_token},
      {"complete_only", c.dtr.complete_only ? "true" : "false"},
      {"aggregate", to_string(c.dtr.aggregate)},
      {"min_coverage", csv::format(c.dtr.min_coverage)},
      {"order", to_string(c.order)},
      {"hilbert_bits", std::to_string(c.hilbert_bits)},
      {"stratify_by_zone", c.stratify_by_zone ? "true" : "false"},
      {"n_perm", std::to_string(c.n_perm)},
      {"quantile", csv::format(c.quantile)},
      {"acf_threshold", csv::format(c.criterion.acf_threshold)},
      {"acf_lags", std::to_string(c.criterion.acf_lags)},
      {"seed", c.seed ? std::to_string(*c.seed) : std::string("none")},
      {"depth", opt_int(c.fixed_depth)},
      {"gsvd_perm", std::to_string(c.gsvd_perm)},
      {"trim_scope", to_string(c.trim_scope)},
      {"weights", join_names(c.schemes)},
      {"adjacency", to_string(c.adjacency)},
      {"theta", csv::format(c.theta)},
      {"windows", to_string(c.windows)},
      {"regions", to_string(c.regions)},
      {"methods", join_names(c.methods)},
      {"baselines", c.baselines ? "true" : "false"},
      {"argmax", c.argmax ? "true" : "false"},
      {"denoise_rank", opt_int(c.denoise_rank)},
      {"rescale_diagonal", c.rescale_diagonal ? "true" : "false"},
      {"iod_max_lag", std::to_string(c.iod_max_lag)},
      {"svg", c.svg ? "true" : "false"},
  };
}

std::vector<Window> make_windows(const StsMatrix& x, WindowPlan plan) {
  if (x.time_index.empty()) fail(ErrorKind::empty_selection, "no time points to window");
  std::vector<Window> out;
  switch (plan) {
    case WindowPlan::whole:
      out.push_back(Window{"all", TimeRange{x.time_index.front(), x.time_index.back()}});
      break;
    case WindowPlan::yearly:
      for (const auto& key : x.time_index) {
        const TimeKey y = make_year(key.year);
        if (out.empty() || out.back().range.first != y) out.push_back(Window{format_time_key(y), {y, y}});
      }
      break;
    case WindowPlan::monthly:
      if (x.resolution == Resolution::yearly) {
        fail(ErrorKind::config, "monthly windows need daily or monthly data");
      }
      for (const auto& key : x.time_index) {
        const TimeKey m = make_month(key.year, key.month);
        if (out.empty() || out.back().range.first != m) out.push_back(Window{format_time_key(m), {m, m}});
      }
      break;
  }
  return out;
}

std::vector<Region> make_regions(const std::vector<GridMeta>& grids, RegionPlan plan) {
  std::vector<Region> out{Region{"all", {}}};
  if (plan == RegionPlan::per_zone) {
    std::set<int> zones;
    for (const auto& g : grids) zones.insert(g.zone);
    for (const int z : zones) out.push_back(Region{region_label(z), {z}});
  }
  return out;
}

SbSeries sb_series(const StsMatrix& x, const SbPlan& plan) {
  const LatticeSpec lattice = infer_lattice(x.columns, plan.lattice);
  const auto windows = make_windows(x, plan.windows);
  const auto regions = make_regions(x.columns, plan.regions);

  SbSeries series;
  for (const auto& window : windows) {
    StsMatrix part = slice(x, window.range, {});
    if (part.rows() < 4) {
      series.skipped.push_back(window.label);
      continue;
    }
    if (plan.per_window_trim) {
      WindowTrim trim = *plan.per_window_trim;
      trim.seed = stage_seed(trim.seed, "trim/" + window.label);
      part = run_trim(part, trim, plan.jobs).trimmed;
    }
    for (const auto& region : regions) {
      const StsMatrix local = region.zones.empty() ? part : slice(part, window.range, region.zones);
      for (const auto scheme : plan.schemes) {
        const WeightMatrix w = weights_for(local.columns, scheme, plan, lattice);
        for (const auto method : plan.methods) {
          const AssociationMatrix a = associate(local, method, plan.jobs);
          series.entries.push_back(SbEntry{window.label, region.label, scheme, method, spatial_bergsma(a, w)});
        }
      }
    }
  }
  return series;
}

PartnerTable argmax_partner_offsets(const AssociationMatrix& assoc,
                                    const std::vector<GridMeta>& grids) {
  const auto p = grids.size();
  if (p < 2) fail(ErrorKind::argument, "argmax partners need at least two grids");
  if (assoc.size() != p) {
    fail(ErrorKind::structural, "association matrix has " + std::to_string(assoc.size()) +
                                    " rows for " + std::to_string(p) + " grids");
  }
  PartnerTable table;
  table.lattice = infer_lattice(grids);
  for (std::size_t i = 0; i < p; ++i) {
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < p; ++j) {
      if (j == i) continue;
      const double v = assoc.m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double b = assoc.m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best));
      if (v > b || (v == b && grids[j].grid_id < grids[best].grid_id)) best = j;
    }
    PartnerRow row{grids[i].grid_id, grids[best].grid_id, grids[best].lat - grids[i].lat,
                   grids[best].lon - grids[i].lon};
    ++table.dlat_counts[std::lround(row.dlat / table.lattice.lat_step)];
    ++table.dlon_counts[std::lround(row.dlon / table.lattice.lon_step)];
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_partner_csv(std::ostream& out, const PartnerTable& table) {
  out << "grid_id,partner,dlat,dlon\n";
  for (const auto& r : table.rows) {
    out << csv::join({r.grid, r.partner, csv::format(r.dlat), csv::format(r.dlon)}) << '\n';
  }
}

void write_partner_histogram_csv(std::ostream& out, const PartnerTable& table) {
  out << "axis,steps,offset,count\n";
  for (const auto& [steps, count] : table.dlat_counts) {
    out << "lat," << steps << ',' << csv::format(static_cast<double>(steps) * table.lattice.lat_step) << ','
        << count << '\n';
  }
  for (const auto& [steps, count] : table.dlon_counts) {
    out << "lon," << steps << ',' << csv::format(static_cast<double>(steps) * table.lattice.lon_step) << ','
        << count << '\n';
  }
}

const char* to_string(EnsoPhase phase) {
  switch (phase) {
    case EnsoPhase::elnino: return "elnino";
    case EnsoPhase::lanina: return "lanina";
    case EnsoPhase::neutral: return "neutral";
  }
  return "neutral";
}

EnsoPhase parse_enso_phase(const std::string& text) {
  if (text == "elnino") return EnsoPhase::elnino;
  if (text == "lanina") return EnsoPhase::lanina;
  if (text == "neutral") return EnsoPhase::neutral;
  fail(ErrorKind::vocabulary, "unknown ENSO phase '" + text + "'");
}

std::map<int, EnsoPhase> read_enso_phases(const std::string& path) {
  const csv::Table table = csv::read(path);
  const auto year = table.find("year");
  const auto phase = table.find("phase");
  if (!year || !phase) fail(ErrorKind::parse, path + ": header must contain year,phase");
  std::map<int, EnsoPhase> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string context = path + ":" + std::to_string(table.line_numbers[r]);
    const int y = static_cast<int>(csv::parse_int(table.rows[r][*year], context));
    EnsoPhase ph;
    try {
      ph = parse_enso_phase(table.rows[r][*phase]);
    } catch (const Error& e) {
      fail(ErrorKind::vocabulary, context + ": " + e.what());
    }
    if (!out.emplace(y, ph).second) fail(ErrorKind::duplicate, context + ": duplicate year " + std::to_string(y));
  }
  return out;
}

std::vector<PhaseSummary> teleconnect_enso(const SbSeries& yearly,
                                           const std::map<int, EnsoPhase>& phases) {
  std::vector<PhaseSummary> out;
  for (const auto& [key, entries] : group_series(yearly)) {
    std::map<EnsoPhase, std::vector<double>> by_phase;
    for (const SbEntry* e : entries) {
      const TimeKey k = parse_time_key(e->window);
      if (k.month != 0) fail(ErrorKind::argument, "teleconnect_enso needs yearly windows, got '" + e->window + "'");
      const auto it = phases.find(k.year);
      if (it == phases.end()) {
        fail(ErrorKind::completeness, "no ENSO phase for year " + std::to_string(k.year));
      }
      by_phase[it->second].push_back(e->value);
    }
    for (const auto& [phase, values] : by_phase) {
      PhaseSummary s;
      std::tie(s.region, s.scheme, s.method) = key;
      s.phase = phase;
      s.count = values.size();
      s.mean = mean(values);
      s.sd = stddev(values);
      s.min = *std::min_element(values.begin(), values.end());
      s.max = *std::max_element(values.begin(), values.end());
      out.push_back(s);
    }
  }
  return out;
}

std::map<TimeKey, double> read_dmi(const std::string& path) {
  const csv::Table table = csv::read(path);
  const auto year = table.find("year");
  const auto month = table.find("month");
  const auto dmi = table.find("dmi");
  if (!year || !month || !dmi) fail(ErrorKind::parse, path + ": header must contain year,month,dmi");
  std::map<TimeKey, double> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string context = path + ":" + std::to_string(table.line_numbers[r]);
    const auto y = static_cast<int>(csv::parse_int(row[*year], context));
    const auto m = csv::parse_int(row[*month], context);
    if (m < 1 || m > 12) fail(ErrorKind::parse, context + ": month out of range");
    const TimeKey key = make_month(y, static_cast<int>(m));
    if (!out.emplace(key, csv::parse_double(row[*dmi], context)).second) {
      fail(ErrorKind::duplicate, context + ": duplicate month " + format_time_key(key));
    }
  }
  return out;
}

std::vector<LagCorrelation> teleconnect_iod(const SbSeries& monthly,
                                            const std::map<TimeKey, double>& dmi, int max_lag) {
  if (max_lag < 0) fail(ErrorKind::argument, "max_lag must be non-negative");
  std::vector<LagCorrelation> out;
  for (const auto& [key, entries] : group_series(monthly)) {
    for (int lag = 0; lag <= max_lag; ++lag) {
      std::vector<double> sb, index;
      for (const SbEntry* e : entries) {
        const TimeKey k = parse_time_key(e->window);
        if (k.month == 0 || k.day != 0) {
          fail(ErrorKind::argument, "teleconnect_iod needs monthly windows, got '" + e->window + "'");
        }
        const int months = k.year * 12 + (k.month - 1) - lag;
        const auto it = dmi.find(make_month(months / 12, months % 12 + 1));
        if (it == dmi.end()) continue;
        sb.push_back(e->value);
        index.push_back(it->second);
      }
      if (sb.size() < 3) {
        fail(ErrorKind::insufficient_data, "teleconnect_iod: only " + std::to_string(sb.size()) +
                                               " overlapping months at lag " + std::to_string(lag) +
                                               " for region " + std::get<0>(key));
      }
      LagCorrelation row;
      std::tie(row.region, row.scheme, row.method) = key;
      row.lag = lag;
      row.overlap = sb.size();
      row.correlation = pearson(sb, index);
      out.push_back(row);
    }
  }
  return out;
}

void write_enso_csv(std::ostream& out, const std::vector<PhaseSummary>& rows) {
  out << "region,scheme,method,phase,count,mean,sd,min,max\n";
  for (const auto& r : rows) {
    out << csv::join({r.region, to_string(r.scheme), to_string(r.method), to_string(r.phase),
                      std::to_string(r.count), csv::format(r.mean), csv::format(r.sd),
                      csv::format(r.min), csv::format(r.max)})
        << '\n';
  }
}

void write_iod_csv(std::ostream& out, const std::vector<LagCorrelation>& rows) {
  out << "region,scheme,method,lag,overlap,correlation\n";
  for (const auto& r : rows) {
    out << csv::join({r.region, to_string(r.scheme), to_string(r.method), std::to_string(r.lag),
                      std::to_string(r.overlap), csv::format(r.correlation)})
        << '\n';
  }
}

void write_gsvd_csv(std::ostream& out, const GsvdRetentionReport& report) {
  out << "rank,observed,null_lower,null_upper,inside\n";
  for (Eigen::Index k = 0; k < report.observed.size(); ++k) {
    out << k + 1 << ',' << csv::format(report.observed(k)) << ',' << csv::format(report.null_lower(k))
        << ',' << csv::format(report.null_upper(k)) << ','
        << (report.inside[static_cast<std::size_t>(k)] ? "true" : "false") << '\n';
  }
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::config, "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buffer[1 << 16];
  while (in) {
    in.read(buffer, sizeof(buffer));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

namespace {

void remove_previous_outputs(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) return;
  std::ifstream in(manifest);
  json old;
  try {
    in >> old;
  } catch (const json::exception&) {
    return;
  }
  if (!old.contains("outputs")) return;
  for (const auto& entry : old["outputs"]) {
    if (!entry.contains("file") || !entry["file"].is_string()) continue;
    const fs::path rel(entry["file"].get<std::string>());
    if (rel.is_absolute() || rel.lexically_normal().string().starts_with("..")) continue;
    std::error_code ec;
    fs::remove(dir / rel, ec);
  }
  fs::remove(manifest);
}

void write_manifest(const fs::path& dir, const RunConfig& config, const std::vector<OutputRecord>& outputs,
                    const json& summary, const std::vector<std::string>& stages,
                    const std::string& failed_stage, const Error* error) {
  json m;
  m["status"] = failed_stage.empty() ? "ok" : "failed";
  if (!failed_stage.empty()) {
    m["failed_stage"] = failed_stage;
    m["error"] = {{"kind", to_string(error->kind())}, {"message", error->what()}};
  }
  json cfg = json::object();
  for (const auto& [k, v] : config_entries(config)) cfg[k] = v;
  m["config"] = cfg;
  m["stages"] = stages;
  m["summary"] = summary;
  std::vector<OutputRecord> sorted = outputs;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.file < b.file; });
  json files = json::array();
  for (const auto& r : sorted) {
    files.push_back({{"file", r.file}, {"stage", r.stage}, {"kind", r.kind}, {"bytes", r.bytes}, {"sha256", r.sha256}});
  }
  m["outputs"] = files;
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << m.dump(2) << '\n';
}

std::string matrix_file(const std::string& name) { return name + ".csv"; }

}  // namespace

RunReport run(const RunConfig& config) {
  validate_config(config);
  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  remove_previous_outputs(dir);

  const std::uint64_t seed = config.seed.value_or(0);
  const unsigned jobs = config.jobs;
  Outputs outputs(dir);
  RunReport report;
  report.out_dir = dir;
  json summary = json::object();
  std::vector<std::string> stages;
  std::string stage;

  auto begin = [&](const std::string& name) {
    stage = name;
    stages.push_back(name);
  };

  try {
    begin("ingest");
    const StsMatrix x = load_dtr(config.grids_path, config.series_path, config.dtr);
    summary["n"] = x.rows();
    summary["p"] = x.cols();
    summary["resolution"] = x.resolution == Resolution::daily     ? "daily"
                            : x.resolution == Resolution::monthly ? "monthly"
                                                                  : "yearly";
    summary["negative_values"] = count_negative(x);

    begin("order");
    SpatialOrder order = config.order == OrderMethod::spiral    ? spiral_order(x.columns, config.stratify_by_zone)
                         : config.order == OrderMethod::hilbert ? hilbert_order(x.columns, config.hilbert_bits,
                                                                                config.stratify_by_zone)
                                                                : identity_order(x.cols());
    const StsMatrix d = apply_order(x, order);
    const auto grid_ids = ids_of(d.columns);
    outputs.emit("order.csv", stage, "table", [&](std::ostream& o) { write_order_csv(o, order, x.columns); });
    outputs.emit(matrix_file("D"), stage, "series", [&](std::ostream& o) { write_sts_csv(o, d, config.dtr.missing_token); });

    std::optional<StsMatrix> t;
    if (config.baselines) {
      begin("detrend");
      t = classical_detrend(d);
      outputs.emit(matrix_file("T"), stage, "series", [&](std::ostream& o) { write_sts_csv(o, *t, config.dtr.missing_token); });
    }

    begin("trim");
    WindowTrim trim_plan{config.n_perm, config.quantile, config.criterion, stage_seed(seed, "trim"),
                         config.fixed_depth};
    std::optional<SvNullModel> null;
    const TrimResult trimmed = run_trim(d, trim_plan, jobs, &null);
    const StsMatrix& s = trimmed.trimmed;
    report.depth = trimmed.depth_d;
    report.significant_s = trimmed.significant_s;
    report.cap_hit = trimmed.cap_hit;
    report.sv_share_removed = trimmed.sv_share_removed;
    outputs.emit(matrix_file("S"), stage, "series", [&](std::ostream& o) { write_sts_csv(o, s, config.dtr.missing_token); });
    std::vector<std::string> dates;
    for (const auto& k : d.time_index) dates.push_back(format_time_key(k));
    outputs.emit("removed_left.csv", stage, "table",
                 [&](std::ostream& o) { write_factor_csv(o, "date", dates, trimmed.removed_left); });
    outputs.emit("removed_right.csv", stage, "table",
                 [&](std::ostream& o) { write_factor_csv(o, "grid_id", grid_ids, trimmed.removed_right); });
    json tj;
    tj["depth"] = trimmed.depth_d;
    tj["significant"] = trimmed.significant_s;
    tj["cap_hit"] = trimmed.cap_hit;
    tj["fixed_depth"] = config.fixed_depth.has_value();
    tj["sv_share_removed"] = trimmed.sv_share_removed;
    tj["acf_threshold"] = config.criterion.acf_threshold;
    tj["acf_lags"] = config.criterion.acf_lags;
    tj["removed_values"] = doubles(trimmed.removed_values);
    tj["acf_profile"] = doubles(trimmed.acf_profile);
    tj["acf_window_profile"] = doubles(trimmed.acf_window_profile);
    tj["singular_values"] = doubles(trimmed.singular_values);
    if (null) {
      tj["n_perm"] = null->n_perm;
      tj["quantile"] = null->quantile;
      tj["null_seed"] = null->seed;
      tj["thresholds"] = doubles(null->thresholds);
    }
    outputs.emit("trim_report.json", stage, "report", [&](std::ostream& o) { o << tj.dump(2) << '\n'; });
    summary["depth"] = trimmed.depth_d;
    summary["significant_singular_values"] = trimmed.significant_s;
    summary["cap_hit"] = trimmed.cap_hit;
    summary["sv_share_removed"] = trimmed.sv_share_removed;

    if (config.gsvd_perm > 0) {
      begin("gsvd");
      const auto g = gsvd_retention_check(d, s, config.gsvd_perm, stage_seed(seed, "gsvd"), jobs);
      outputs.emit("gsvd_retention.csv", stage, "table", [&](std::ostream& o) { write_gsvd_csv(o, g); });
      summary["gsvd_fraction_inside"] = g.fraction_inside;
    }

    begin("association");
    struct Named {
      std::string name;
      AssociationMatrix m;
    };
    std::vector<Named> correlations;
    if (config.baselines) {
      correlations.push_back({"R_D", pearson_matrix(d)});
      correlations.push_back({"R_T", pearson_matrix(*t)});
    }
    correlations.push_back({"R_S", pearson_matrix(s)});
    for (const auto& c : correlations) {
      outputs.emit(matrix_file(c.name), stage, "matrix", [&](std::ostream& o) { csv::write_square(o, c.m.m, grid_ids); });
    }
    std::optional<AssociationMatrix> b_s;
    if (std::find(config.methods.begin(), config.methods.end(), AssociationMethod::bergsma) != config.methods.end()) {
      b_s = bergsma_matrix(s, jobs);
      outputs.emit(matrix_file("B_S"), stage, "matrix", [&](std::ostream& o) { csv::write_square(o, b_s->m, grid_ids); });
    }

    begin("denoise");
    const MpBounds bounds = mp_bounds(d.cols(), d.rows());
    summary["mp_bounds"] = {{"gamma", bounds.gamma}, {"lower", bounds.lower}, {"upper", bounds.upper}};
    json sig = json::object();
    std::vector<Named> denoised;
    for (const auto& c : correlations) {
      const int k = significant_eigs(eig_sym(c.m.m), bounds);
      report.significant_eigs[c.name] = k;
      sig[c.name] = k;
      const AssociationMatrix hat = mp_denoise(c.m, config.denoise_rank.value_or(k), config.rescale_diagonal);
      const std::string name = "Rhat_" + c.name.substr(2);
      outputs.emit(matrix_file(name), stage, "matrix", [&](std::ostream& o) { csv::write_square(o, hat.m, grid_ids); });
      denoised.push_back({name, hat});
    }
    summary["significant_eigenvalues"] = sig;

    begin("esd");
    const auto windows = make_windows(d, config.windows);
    auto esd_of = [&](const StsMatrix& source) {
      std::vector<AssociationMatrix> mats;
      std::vector<std::size_t> sizes;
      for (const auto& w : windows) {
        const StsMatrix part = slice(source, w.range, {});
        if (part.rows() < 4) continue;
        mats.push_back(pearson_matrix(part));
        mats.back().window = w.label;
        sizes.push_back(part.rows());
      }
      return esd_series(mats, sizes, jobs);
    };
    const auto esd_s = esd_of(s);
    outputs.emit("esd.csv", stage, "table", [&](std::ostream& o) { write_esd_csv(o, esd_s); });
    std::vector<std::pair<std::string, std::vector<EsdRow>>> esd_tables{{"S", esd_s}};
    if (config.baselines) {
      for (const auto& [name, source] : {std::pair<std::string, const StsMatrix*>{"D", &d}, {"T", &*t}}) {
        const auto rows = esd_of(*source);
        outputs.emit("esd_" + name + ".csv", stage, "table", [&](std::ostream& o) { write_esd_csv(o, rows); });
        esd_tables.emplace_back(name, rows);
      }
    }

    if (config.argmax) {
      begin("argmax");
      std::vector<std::pair<std::string, const AssociationMatrix*>> sources{{"R_S", &correlations.back().m}};
      if (b_s) sources.emplace_back("B_S", &*b_s);
      for (const auto& [name, m] : sources) {
        const PartnerTable table = argmax_partner_offsets(*m, d.columns);
        outputs.emit("argmax_" + name + ".csv", stage, "table", [&](std::ostream& o) { write_partner_csv(o, table); });
        outputs.emit("argmax_hist_" + name + ".csv", stage, "table",
                     [&](std::ostream& o) { write_partner_histogram_csv(o, table); });
      }
    }

    SbPlan sb_plan;
    sb_plan.windows = config.windows;
    sb_plan.regions = config.regions;
    sb_plan.methods = config.methods;
    sb_plan.schemes = config.schemes;
    sb_plan.adjacency = config.adjacency;
    sb_plan.theta = config.theta;
    sb_plan.jobs = jobs;
    if (config.trim_scope == TrimScope::per_window) sb_plan.per_window_trim = trim_plan;
    const StsMatrix& sb_input = config.trim_scope == TrimScope::per_window ? d : s;
    std::optional<SbSeries> sb;
    if (!config.schemes.empty()) {
      begin("sb");
      sb = sb_series(sb_input, sb_plan);
      outputs.emit("sb.csv", stage, "table", [&](std::ostream& o) { write_sb_csv(o, *sb); });
      if (!sb->skipped.empty()) summary["sb_windows_skipped"] = sb->skipped;
    }

    auto series_at = [&](WindowPlan plan, const std::string& file) {
      if (config.windows == plan) return *sb;
      SbPlan aux = sb_plan;
      aux.windows = plan;
      SbSeries extra = sb_series(sb_input, aux);
      outputs.emit(file, stage, "table", [&](std::ostream& o) { write_sb_csv(o, extra); });
      return extra;
    };
    if (!config.enso_path.empty()) {
      begin("teleconnect_enso");
      const auto phases = read_enso_phases(config.enso_path);
      const auto rows = teleconnect_enso(series_at(WindowPlan::yearly, "sb_yearly.csv"), phases);
      outputs.emit("teleconnect_enso.csv", stage, "table", [&](std::ostream& o) { write_enso_csv(o, rows); });
    }
    if (!config.dmi_path.empty()) {
      begin("teleconnect_iod");
      const auto dmi = read_dmi(config.dmi_path);
      const auto rows = teleconnect_iod(series_at(WindowPlan::monthly, "sb_monthly.csv"), dmi, config.iod_max_lag);
      outputs.emit("teleconnect_iod.csv", stage, "table", [&](std::ostream& o) { write_iod_csv(o, rows); });
    }

    if (config.svg) {
      begin("figures");
      for (const auto& c : correlations) {
        outputs.emit("figures/" + c.name + ".svg", stage, "figure", [&](std::ostream& o) { svg::heatmap(o, c.m.m, c.name); });
      }
      for (const auto& c : denoised) {
        outputs.emit("figures/" + c.name + ".svg", stage, "figure", [&](std::ostream& o) { svg::heatmap(o, c.m.m, c.name); });
      }
      if (b_s) {
        outputs.emit("figures/B_S.svg", stage, "figure", [&](std::ostream& o) { svg::heatmap(o, b_s->m, "B_S"); });
      }
      std::vector<std::string> labels;
      for (const auto& row : esd_s) labels.push_back(row.window);
      std::vector<svg::Line> lines;
      for (const auto& [name, rows] : esd_tables) {
        svg::Line median{"median " + name, {}};
        for (const auto& row : rows) median.y.push_back(row.esd.median());
        lines.push_back(std::move(median));
      }
      outputs.emit("figures/esd.svg", stage, "figure", [&](std::ostream& o) { svg::line_chart(o, labels, lines, "ESD median"); });
      if (sb) {
        std::vector<std::string> sb_labels;
        std::vector<svg::Line> sb_lines;
        for (const auto& [key, entries] : group_series(*sb)) {
          svg::Line line{std::get<0>(key) + " " + to_string(std::get<1>(key)) + " " + to_string(std::get<2>(key)), {}};
          for (const SbEntry* e : entries) line.y.push_back(e->value);
          if (sb_labels.empty()) {
            for (const SbEntry* e : entries) sb_labels.push_back(e->window);
          }
          sb_lines.push_back(std::move(line));
        }
        outputs.emit("figures/sb.svg", stage, "figure", [&](std::ostream& o) { svg::line_chart(o, sb_labels, sb_lines, "S_B"); });
      }
    }
  } catch (const Error& e) {
    write_manifest(dir, config, outputs.records(), summary, stages, stage, &e);
    throw;
  } catch (const std::exception& e) {
    const Error wrapped(ErrorKind::non_finite, e.what());
    write_manifest(dir, config, outputs.records(), summary, stages, stage, &wrapped);
    throw wrapped;
  }

  write_manifest(dir, config, outputs.records(), summary, stages, "", nullptr);
  report.outputs = outputs.records();
  return report;
}

ReportSummary regenerate_report(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorKind::config, "cannot open manifest '" + manifest_path + "'");
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, manifest_path + ": " + e.what());
  }
  if (!m.contains("outputs") || !m["outputs"].is_array()) fail(ErrorKind::parse, manifest_path + ": no outputs");
  const fs::path dir = fs::path(manifest_path).parent_path();

  ReportSummary summary;
  std::vector<std::string> matrices;
  bool have_esd = false, have_sb = false;
  for (const auto& entry : m["outputs"]) {
    const std::string file = entry.at("file").get<std::string>();
    const fs::path path = dir / file;
    if (!fs::exists(path)) fail(ErrorKind::completeness, "manifest lists missing file '" + file + "'");
    if (sha256_file(path) != entry.at("sha256").get<std::string>()) {
      fail(ErrorKind::structural, "digest mismatch for '" + file + "'");
    }
    ++summary.verified;
    const std::string kind = entry.at("kind").get<std::string>();
    if (kind == "matrix") matrices.push_back(file);
    if (file == "esd.csv") have_esd = true;
    if (file == "sb.csv") have_sb = true;
  }

  const fs::path figures = dir / "figures";
  fs::create_directories(figures);
  for (const auto& file : matrices) {
    const auto square = csv::read_square((dir / file).string());
    const std::string name = fs::path(file).stem().string();
    std::ofstream out(figures / (name + ".svg"), std::ios::binary);
    svg::heatmap(out, square.m, name);
    summary.figures.push_back("figures/" + name + ".svg");
  }
  if (have_esd) {
    const csv::Table table = csv::read((dir / "esd.csv").string());
    const auto w = table.find("window");
    const auto q50 = table.find("q50");
    if (!w || !q50) fail(ErrorKind::parse, "esd.csv: unexpected header");
    std::vector<std::string> labels;
    svg::Line median{"median S", {}};
    for (const auto& row : table.rows) {
      labels.push_back(row[*w]);
      median.y.push_back(csv::parse_double(row[*q50], "esd.csv"));
    }
    std::ofstream out(figures / "esd.svg", std::ios::binary);
    svg::line_chart(out, labels, {median}, "ESD median");
    summary.figures.push_back("figures/esd.svg");
  }
  if (have_sb) {
    const SbSeries sb = read_sb_csv((dir / "sb.csv").string());
    std::vector<std::string> labels;
    std::vector<svg::Line> lines;
    for (const auto& [key, entries] : group_series(sb)) {
      svg::Line line{std::get<0>(key) + " " + to_string(std::get<1>(key)) + " " + to_string(std::get<2>(key)), {}};
      for (const SbEntry* e : entries) line.y.push_back(e->value);
      if (labels.empty()) {
        for (const SbEntry* e : entries) labels.push_back(e->window);
      }
      lines.push_back(std::move(line));
    }
    std::ofstream out(figures / "sb.svg", std::ios::binary);
    svg::line_chart(out, labels, lines, "S_B");
    summary.figures.push_back("figures/sb.svg");
  }
  return summary;
}

}  // namespace csa
