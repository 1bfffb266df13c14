#include "csa/csv.hpp"
#include "csa/dependence.hpp"
#include "csa/error.hpp"
#include "csa/ingest.hpp"
#include "csa/linalg.hpp"
#include "csa/pipeline.hpp"
#include "csa/random.hpp"
#include "csa/rmt.hpp"
#include "csa/spatial_order.hpp"
#include "csa/trim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

namespace fs = std::filesystem;
using namespace csa;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::string out;
  std::vector<std::string> overrides;  // key=value
};

RunConfig load_config(const Globals& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : parse_config(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::config, "--set expects key=value, got '" + kv + "'");
    set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1), fs::current_path());
  }
  if (g.seed) c.seed = *g.seed;
  if (g.jobs) c.jobs = *g.jobs;
  if (!g.out.empty()) c.out_dir = g.out;
  if (c.jobs == 0) fail(ErrorKind::config, "jobs must be positive");
  return c;
}

std::vector<GridMeta> grids_of(const RunConfig& c, bool required) {
  if (c.grids_path.empty()) {
    if (required) fail(ErrorKind::config, "no grids file: set `grids` in the config or use --grids");
    return {};
  }
  return read_grids(c.grids_path);
}

StsMatrix load_input(const RunConfig& c, const std::string& input, bool need_grids) {
  if (input.empty()) return load_dtr(c.grids_path, c.series_path, c.dtr);
  return read_sts_csv(input, grids_of(c, need_grids), c.dtr.missing_token);
}

fs::path out_file(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

void write_to(const fs::path& path, const std::function<void(std::ostream&)>& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::config, "cannot write " + path.string());
  writer(out);
  if (!out) fail(ErrorKind::config, "write failed for " + path.string());
  std::cout << "wrote " << path.string() << '\n';
}

std::vector<std::string> ids(const StsMatrix& x) {
  std::vector<std::string> out;
  for (const auto& g : x.columns) out.push_back(g.grid_id);
  return out;
}

SbPlan sb_plan_of(const RunConfig& c) {
  SbPlan plan;
  plan.windows = c.windows;
  plan.regions = c.regions;
  plan.methods = c.methods;
  plan.schemes = c.schemes;
  plan.adjacency = c.adjacency;
  plan.theta = c.theta;
  plan.jobs = c.jobs;
  if (c.trim_scope == TrimScope::per_window) {
    if (!c.fixed_depth && !c.seed) fail(ErrorKind::config, "per-window trimming needs --seed unless depth is fixed");
    plan.per_window_trim =
        WindowTrim{c.n_perm, c.quantile, c.criterion, stage_seed(c.seed.value_or(0), "trim"), c.fixed_depth};
  }
  return plan;
}

SpatialOrder order_of(const RunConfig& c, const std::vector<GridMeta>& grids) {
  switch (c.order) {
    case OrderMethod::spiral: return spiral_order(grids, c.stratify_by_zone);
    case OrderMethod::hilbert: return hilbert_order(grids, c.hilbert_bits, c.stratify_by_zone);
    default: return identity_order(grids.size());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Core spatial association of spatial time series"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed_value = 0;
  unsigned jobs_value = 1;
  app.add_option("--config", g.config_path, "key = value run configuration")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed_value, "master seed for permutation nulls");
  auto* jobs_opt = app.add_option("--jobs", jobs_value, "worker threads");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--set", g.overrides, "override one config key (key=value), repeatable");

  std::string grids, series, trim_scope, enso, dmi, input, matrix_path, method = "pearson", name, sb_path, manifest;
  std::optional<std::size_t> n_rows;
  std::optional<int> rank;

  auto* ingest = app.add_subcommand("ingest", "read grids and tmax/tmin series, write the DTR matrix X.csv");
  auto* order = app.add_subcommand("order", "reorder columns spatially, write order.csv and D.csv");
  auto* trim = app.add_subcommand("trim", "trim dominant temporal components, write S.csv and trim_report.json");
  auto* corr = app.add_subcommand("corr", "association matrix of a wide series CSV");
  auto* denoise = app.add_subcommand("denoise", "Marchenko-Pastur denoising of a square matrix CSV");
  auto* esd_cmd = app.add_subcommand("esd", "eigenvalue spectrum summaries per window");
  auto* bergsma = app.add_subcommand("bergsma", "Bergsma correlation matrix of a wide series CSV");
  auto* sb = app.add_subcommand("sb", "spatial Bergsma series over windows and regions");
  auto* tele = app.add_subcommand("teleconnect", "join an S_B series with ENSO phases or DMI");
  auto* run_cmd = app.add_subcommand("run", "end-to-end pipeline with manifest");
  auto* report = app.add_subcommand("report", "verify a manifest and regenerate figures");

  for (auto* sub : {ingest, order, trim, corr, esd_cmd, bergsma, sb, run_cmd}) {
    sub->add_option("--grids", grids, "grid metadata CSV");
  }
  for (auto* sub : {ingest, order, trim, corr, esd_cmd, bergsma, sb, run_cmd}) {
    sub->add_option("--series", series, "long-form tmax/tmin CSV");
  }
  for (auto* sub : {order, trim, corr, esd_cmd, bergsma, sb}) {
    sub->add_option("--input", input, "wide series CSV (default: ingest from grids/series)");
  }
  for (auto* sub : {sb, run_cmd}) {
    sub->add_option("--trim-scope", trim_scope, "global (slice S) or per-window (trim each window of D)");
  }
  corr->add_option("--method", method, "pearson or bergsma");
  for (auto* sub : {corr, bergsma, denoise}) sub->add_option("--name", name, "output file stem");
  denoise->add_option("--matrix", matrix_path, "square matrix CSV")->required()->check(CLI::ExistingFile);
  denoise->add_option("--n", n_rows, "number of time points behind the matrix")->required();
  denoise->add_option("--rank", rank, "components kept (default: MP-significant count)");
  tele->add_option("--sb", sb_path, "S_B series CSV")->required()->check(CLI::ExistingFile);
  tele->add_option("--enso", enso, "year,phase CSV");
  tele->add_option("--dmi", dmi, "year,month,dmi CSV");
  report->add_option("--manifest", manifest, "manifest.json (default: <out>/manifest.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;
  if (jobs_opt->count() > 0) g.jobs = jobs_value;
  if (!grids.empty()) g.overrides.push_back("grids=" + grids);
  if (!series.empty()) g.overrides.push_back("series=" + series);
  if (!trim_scope.empty()) g.overrides.push_back("trim_scope=" + trim_scope);
  if (!enso.empty()) g.overrides.push_back("enso=" + enso);
  if (!dmi.empty()) g.overrides.push_back("dmi=" + dmi);

  try {
    RunConfig c = load_config(g);

    if (*ingest) {
      const StsMatrix x = load_dtr(c.grids_path, c.series_path, c.dtr);
      std::cout << "n=" << x.rows() << " p=" << x.cols() << " negative=" << count_negative(x) << '\n';
      write_to(out_file(c, "X.csv"), [&](std::ostream& o) { write_sts_csv(o, x, c.dtr.missing_token); });
    } else if (*order) {
      const StsMatrix x = load_input(c, input, true);
      const SpatialOrder ord = order_of(c, x.columns);
      write_to(out_file(c, "order.csv"), [&](std::ostream& o) { write_order_csv(o, ord, x.columns); });
      const StsMatrix d = apply_order(x, ord);
      write_to(out_file(c, "D.csv"), [&](std::ostream& o) { write_sts_csv(o, d, c.dtr.missing_token); });
    } else if (*trim) {
      const StsMatrix d = load_input(c, input, false);
      if (!c.fixed_depth && !c.seed) fail(ErrorKind::config, "trim needs --seed unless depth is fixed");
      TrimResult t;
      nlohmann::json tj;
      if (c.fixed_depth) {
        t = trim_to_depth(d, *c.fixed_depth, std::nullopt, c.criterion.acf_lags);
      } else {
        const SvNullModel null = sv_null_thresholds(d, c.n_perm, c.quantile, stage_seed(*c.seed, "trim"), c.jobs);
        t = algorithm1(d, c.criterion, null);
        tj["n_perm"] = null.n_perm;
        tj["quantile"] = null.quantile;
        tj["null_seed"] = null.seed;
        tj["thresholds"] = std::vector<double>(null.thresholds.data(), null.thresholds.data() + null.thresholds.size());
      }
      tj["depth"] = t.depth_d;
      tj["significant"] = t.significant_s;
      tj["cap_hit"] = t.cap_hit;
      tj["sv_share_removed"] = t.sv_share_removed;
      tj["acf_profile"] = t.acf_profile;
      std::cout << "depth=" << t.depth_d << " significant=" << t.significant_s << " cap_hit=" << t.cap_hit << '\n';
      write_to(out_file(c, "S.csv"), [&](std::ostream& o) { write_sts_csv(o, t.trimmed, c.dtr.missing_token); });
      write_to(out_file(c, "trim_report.json"), [&](std::ostream& o) { o << tj.dump(2) << '\n'; });
    } else if (*corr || *bergsma) {
      const StsMatrix x = load_input(c, input, false);
      const AssociationMethod m = *bergsma ? AssociationMethod::bergsma : parse_association_method(method);
      const AssociationMatrix r = m == AssociationMethod::pearson ? pearson_matrix(x) : bergsma_matrix(x, c.jobs);
      const std::string stem = name.empty() ? (m == AssociationMethod::pearson ? "R" : "B") : name;
      write_to(out_file(c, stem + ".csv"), [&](std::ostream& o) { csv::write_square(o, r.m, ids(x)); });
    } else if (*denoise) {
      const csv::SquareMatrix sq = csv::read_square(matrix_path);
      AssociationMatrix r;
      r.m = sq.m;
      r.grid_ids = sq.ids;
      const MpBounds bounds = mp_bounds(sq.ids.size(), *n_rows);
      const int k = significant_eigs(eig_sym(r.m), bounds);
      const AssociationMatrix hat = mp_denoise(r, rank.value_or(k), c.rescale_diagonal);
      std::cout << "lambda_minus=" << bounds.lower << " lambda_plus=" << bounds.upper << " significant=" << k
                << " kept=" << rank.value_or(k) << '\n';
      const std::string stem = name.empty() ? fs::path(matrix_path).stem().string() + "_hat" : name;
      write_to(out_file(c, stem + ".csv"), [&](std::ostream& o) { csv::write_square(o, hat.m, sq.ids); });
    } else if (*esd_cmd) {
      const StsMatrix x = load_input(c, input, false);
      std::vector<AssociationMatrix> mats;
      std::vector<std::size_t> sizes;
      for (const auto& w : make_windows(x, c.windows)) {
        const StsMatrix part = slice(x, w.range, {});
        if (part.rows() < 4) continue;
        mats.push_back(pearson_matrix(part));
        mats.back().window = w.label;
        sizes.push_back(part.rows());
      }
      const auto rows = esd_series(mats, sizes, c.jobs);
      write_to(out_file(c, "esd.csv"), [&](std::ostream& o) { write_esd_csv(o, rows); });
    } else if (*sb) {
      const StsMatrix x = load_input(c, input, true);
      const SbSeries series = sb_series(x, sb_plan_of(c));
      for (const auto& w : series.skipped) std::cerr << "skipped short window " << w << '\n';
      write_to(out_file(c, "sb.csv"), [&](std::ostream& o) { write_sb_csv(o, series); });
    } else if (*tele) {
      if (c.enso_path.empty() && c.dmi_path.empty()) fail(ErrorKind::config, "teleconnect needs --enso or --dmi");
      const SbSeries series = read_sb_csv(sb_path);
      if (!c.enso_path.empty()) {
        const auto rows = teleconnect_enso(series, read_enso_phases(c.enso_path));
        write_to(out_file(c, "teleconnect_enso.csv"), [&](std::ostream& o) { write_enso_csv(o, rows); });
      }
      if (!c.dmi_path.empty()) {
        const auto rows = teleconnect_iod(series, read_dmi(c.dmi_path), c.iod_max_lag);
        write_to(out_file(c, "teleconnect_iod.csv"), [&](std::ostream& o) { write_iod_csv(o, rows); });
      }
    } else if (*run_cmd) {
      const RunReport r = run(c);
      std::cout << "depth=" << r.depth << " significant=" << r.significant_s << " cap_hit=" << r.cap_hit
                << " sv_share_removed=" << r.sv_share_removed << '\n';
      for (const auto& [m, k] : r.significant_eigs) std::cout << "significant_eigs " << m << '=' << k << '\n';
      std::cout << r.outputs.size() << " outputs in " << r.out_dir.string() << '\n';
    } else if (*report) {
      const std::string path = manifest.empty() ? (fs::path(c.out_dir) / "manifest.json").string() : manifest;
      const ReportSummary s = regenerate_report(path);
      std::cout << "verified " << s.verified << " outputs\n";
      for (const auto& f : s.figures) std::cout << "wrote " << f << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
