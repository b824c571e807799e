#include "nspnp/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <optional>
#include <sstream>

#include "nspnp/config.hpp"
#include "nspnp/errors.hpp"
#include "nspnp/snapshot.hpp"

namespace nspnp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Refuses to mix outputs with an earlier run.
void prepare_output(const fs::path& dir) {
  if (fs::exists(dir) && (!fs::is_directory(dir) || !fs::is_empty(dir)))
    throw ConfigError("output directory " + dir.string() + " exists and is not empty");
  fs::create_directories(dir);
}

void write_manifest(const fs::path& dir, json manifest) {
  json files = json::object();
  for (const auto& [name, hash] : hash_tree(dir)) files[name] = hash;
  manifest["files"] = std::move(files);
  manifest["format_version"] = 1;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string selector_name(FieldSelector f) {
  switch (f) {
    case FieldSelector::velocity: return "velocity";
    case FieldSelector::velocity_gradient: return "velocity_gradient";
    case FieldSelector::pressure: return "pressure";
    case FieldSelector::n_plus: return "n_plus";
    case FieldSelector::n_minus: return "n_minus";
    case FieldSelector::psi: return "psi";
    case FieldSelector::grad_psi: return "grad_psi";
  }
  return "unknown";
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json report_json(const ScanEntry& e) {
  const auto& r = e.report;
  json morrey = json::array();
  for (const auto& [key, value] : r.morrey)
    morrey.push_back({{"field", selector_name(key.field)}, {"p", key.p}, {"lambda", key.lambda}, {"value", value}});
  const auto& c = e.cylinder;
  return {{"center", {c.center[0], c.center[1], c.center[2]}},
          {"time", c.time},
          {"radius", c.radius},
          {"A", r.A},
          {"B", r.B},
          {"C", r.C},
          {"D", r.D},
          {"gradpsi_L4", r.gradpsi_L4},
          {"morrey", morrey},
          {"l3_criterion_value", r.l3_criterion_value},
          {"grad_criterion_value", r.grad_criterion_value},
          {"flags", {{"l3_small", r.l3_small}, {"grad_small", r.grad_small}}},
          {"flagged", e.flagged}};
}

struct Options {
  std::string config;
  std::string out;
  std::string input;
  bool strict = false;
  std::optional<std::uint64_t> seed;
  std::vector<double> radii;
  std::optional<double> epsilon0;
  std::optional<double> epsilon1;
};

AppConfig load_with_overrides(const Options& o) {
  AppConfig c = load_config(o.config);
  if (o.seed) c.sim.seed = *o.seed;
  c.validate();
  return c;
}

// ---- run ----

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  const AppConfig cfg = load_with_overrides(o);
  const std::string config_hash = git_blob_sha1(read_file(o.config));
  const fs::path dir(o.out);
  prepare_output(dir);
  const fs::path snaps = dir / "snapshots";
  fs::create_directories(snaps);

  json manifest{{"command", "run"}, {"config_sha1", config_hash}, {"seed", cfg.sim.seed}};
  std::size_t index = 0;
  auto on_snapshot = [&](double t, const State& s) { write_snapshot(snaps / snapshot_name(index++), s, t); };
  auto write_ledger = [&](const EnergyLedger& ledger) {
    std::ostringstream csv;
    ledger.write_csv(csv);
    write_file(dir / "ledger.csv", csv.str());
  };
  try {
    const RunResult result = nspnp::run(cfg.sim, on_snapshot);
    write_ledger(result.ledger);
    manifest["status"] = "ok";
    write_manifest(dir, manifest);
    out << "run finished: " << result.ledger.rows.size() << " ledger rows, " << index << " snapshots in "
        << dir.string() << "\n";
    return ok;
  } catch (const RunFailure& e) {
    write_ledger(e.partial().ledger);
    write_snapshot(dir / "last_good.nspnp", e.last_good(), e.time());
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    manifest["failure_time"] = e.time();
    write_manifest(dir, manifest);
    err << "numerical failure at t=" << e.time() << ": " << e.what() << "\n";
    return numerical_failure;
  }
}

// ---- analyze ----

struct LemmaMax {
  double ratio = 0.0;
  std::size_t samples = 0;
  void add(const LemmaCheck& c) {
    ratio = std::max(ratio, c.ratio);
    ++samples;
  }
  json to_json() const { return {{"max_ratio", ratio}, {"samples", samples}}; }
};

fs::path snapshot_dir(const fs::path& input) {
  if (fs::is_directory(input / "snapshots")) return input / "snapshots";
  return input;
}

int cmd_analyze(const Options& o, std::ostream& out, std::ostream&) {
  AnalysisSettings settings;
  if (!o.config.empty()) settings = load_with_overrides(o).analysis;
  RegularityConfig& reg = settings.regularity;
  if (!o.radii.empty()) reg.radii = o.radii;
  if (o.epsilon0) reg.epsilon0 = *o.epsilon0;
  if (o.epsilon1) reg.epsilon1 = *o.epsilon1;

  const fs::path input(o.input);
  if (!fs::is_directory(input)) throw ConfigError("snapshot directory " + input.string() + " does not exist");
  FieldHistory history;
  try {
    history = restore(snapshot_dir(input));
  } catch (const FormatError& e) {
    throw ConfigError(std::string("bad snapshot input: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("inconsistent snapshots: ") + e.what());
  }
  try {
    reg.validate(history.grid());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("regularity: ") + e.what());
  }
  const fs::path dir = o.out.empty() ? input / "analysis" : fs::path(o.out);
  prepare_output(dir);

  const ScanResult result = scan(history, reg);
  const auto flags = result.flagged();
  const GridSpec& g = history.grid();
  const GridSpec* periodic = g.periodic() ? &g : nullptr;
  const double cover = vitali_cover(flags, periodic);

  CylinderIntegrator integ(history);
  std::vector<std::pair<Point, double>> centers;
  for (const auto& e : result.entries) centers.emplace_back(e.cylinder.center, e.cylinder.time);
  json morrey_k = nullptr;
  if (!centers.empty()) {
    try {
      morrey_k = morrey_norm(integ, FieldSelector::grad_psi, 4.0, 2.0, centers, reg.radii);
    } catch (const CoverageError&) {
    }
  }

  LemmaMax cr, dr, interp;
  const double c = settings.lemma_constant;
  for (const auto& [x, t] : centers) {
    for (std::size_t i = 0; i < reg.radii.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) {
        const double rho = reg.radii[j], r = reg.radii[i];
        try {
          integ.require_cover({x, t, rho});
        } catch (const std::exception&) {
          continue;
        }
        cr.add(check_Cr(integ, x, t, r, rho, c));
        if (2.0 * r <= rho) dr.add(check_Dr(integ, x, t, r, rho, c));
      }
    if (auto n = history.find(t)) interp.add(check_interpolation(history[*n].state->u, {x, reg.radii.back()}, 3.0, c));
  }

  json energy = nullptr;
  if (history.size() >= 3) {
    LocalEnergyProbe probe;
    probe.center = g.center();
    probe.radius = 0.45 * g.min_length();
    const double t0 = history.front().time, t1 = history.back().time;
    probe.time = 0.5 * (t0 + t1);
    probe.half_width = 0.45 * (t1 - t0);
    const double residual = local_energy_residual(history, probe);
    energy = {{"residual", residual},
              {"scale", local_energy_scale(history, probe)},
              {"probe",
               {{"center", {probe.center[0], probe.center[1], probe.center[2]}},
                {"time", probe.time},
                {"radius", probe.radius},
                {"half_width", probe.half_width}}}};
  }

  json records = json::array();
  std::ostringstream csv;
  csv << "t,x,y,z,r,A,B,C,D,gradpsi_L4,l3_criterion_value,grad_criterion_value,l3_small,grad_small,flagged\n";
  for (const auto& e : result.entries) {
    records.push_back(report_json(e));
    const auto& r = e.report;
    const auto& cyl = e.cylinder;
    csv << fmt(cyl.time) << ',' << fmt(cyl.center[0]) << ',' << fmt(cyl.center[1]) << ',' << fmt(cyl.center[2]) << ','
        << fmt(cyl.radius) << ',' << fmt(r.A) << ',' << fmt(r.B) << ',' << fmt(r.C) << ',' << fmt(r.D) << ','
        << fmt(r.gradpsi_L4) << ',' << fmt(r.l3_criterion_value) << ',' << fmt(r.grad_criterion_value) << ','
        << int(r.l3_small) << ',' << int(r.grad_small) << ',' << int(e.flagged) << '\n';
  }
  json selected = json::array();
  for (const auto& s : vitali_select(flags, periodic))
    selected.push_back({{"center", {s.center[0], s.center[1], s.center[2]}}, {"time", s.time}, {"radius", s.radius}});

  const json summary{{"cylinders", result.entries.size()},
                     {"skipped", result.skipped},
                     {"flagged", flags.size()},
                     {"vitali_sum", cover},
                     {"vitali_selected", selected},
                     {"morrey_K_gradpsi_L4", morrey_k},
                     {"lemma",
                      {{"constant", c},
                       {"interpolation_q3", interp.to_json()},
                       {"Cr", cr.to_json()},
                       {"Dr", dr.to_json()}}},
                     {"local_energy", energy},
                     {"errors", result.errors}};
  const json config{{"radii", reg.radii},
                    {"stride_space", reg.stride_space},
                    {"stride_time", reg.stride_time},
                    {"epsilon0", reg.epsilon0},
                    {"epsilon1", reg.epsilon1},
                    {"theta0", reg.theta0}};
  write_file(dir / "analysis.json", json{{"config", config}, {"summary", summary}, {"cylinders", records}}.dump(2) + "\n");
  write_file(dir / "analysis.csv", csv.str());
  write_manifest(dir, {{"command", "analyze"}, {"status", "ok"}});

  out << "analyzed " << history.size() << " snapshots: " << result.entries.size() << " cylinders, " << result.skipped
      << " skipped, " << flags.size() << " flagged, vitali sum " << cover << "\n";
  if (o.strict && !flags.empty()) {
    out << "strict: " << flags.size() << " flagged cylinders\n";
    return strict_violation;
  }
  return ok;
}

// ---- picard ----

ScalarField smooth_perturbation(const GridSpec& g, double amplitude) {
  const double k = (g.periodic() ? 2.0 : 1.0) * std::acos(-1.0) / g.lengths[1];
  return ScalarField::from_function(g, [&](const Point& x) { return amplitude * std::cos(k * x[1]); });
}

json records_json(const std::vector<PicardRecord>& history) {
  json out = json::array();
  for (const auto& r : history)
    out.push_back({{"iter", r.iter}, {"ratio", finite_or_null(r.ratio)}, {"yt_increment", r.yt_increment}, {"T", r.horizon}});
  return out;
}

int cmd_picard(const Options& o, std::ostream& out, std::ostream& err) {
  const AppConfig cfg = load_with_overrides(o);
  const std::string config_hash = git_blob_sha1(read_file(o.config));
  const fs::path dir(o.out);
  prepare_output(dir);

  const PicardSettings& ps = cfg.picard;
  const State initial = initial_state(cfg.sim);
  PicardProblem problem;
  problem.n0_plus = initial.n_plus;
  problem.n0_minus = initial.n_minus;
  problem.steps = ps.steps;
  problem.np.dt = ps.dt;
  problem.np.advection = cfg.sim.advection;
  problem.elliptic = cfg.sim.elliptic;
  if (ps.frozen_drift && initial.u.max_abs() > 0.0) problem.drift.assign(ps.steps, initial.u);

  json manifest{{"command", "picard"}, {"config_sha1", config_hash}, {"seed", cfg.sim.seed}};
  auto write_ratios = [&](const std::vector<PicardRecord>& h) {
    std::ostringstream csv;
    write_ratio_csv(csv, h);
    write_file(dir / "ratio_history.csv", csv.str());
  };
  auto log_restarts = [&](const std::vector<PicardRecord>& h) {
    for (std::size_t n = 1; n < h.size(); ++n)
      if (h[n].horizon < h[n - 1].horizon) out << "horizon reduced: T " << h[n - 1].horizon << " -> " << h[n].horizon << "\n";
  };

  PicardOutcome outcome;
  try {
    outcome = picard_solve(YTState::constant(problem.n0_plus, problem.n0_minus, ps.dt, ps.steps), problem, ps.solver);
  } catch (const MaxItersExceeded& e) {
    write_ratios(e.history());
    log_restarts(e.history());
    write_file(dir / "picard.json",
               json{{"status", "failed"}, {"error", e.what()}, {"history", records_json(e.history())}}.dump(2) + "\n");
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    write_manifest(dir, manifest);
    err << "MaxItersExceeded: " << e.what() << "\n";
    return numerical_failure;
  }
  write_ratios(outcome.history);
  log_restarts(outcome.history);

  json threshold = nullptr;
  try {
    const ScalarField d = smooth_perturbation(cfg.sim.grid, ps.perturbation);
    const ScalarField zero(cfg.sim.grid);
    const auto t = find_contraction_threshold(problem, d, zero, zero, d, ps.threshold_t_max, ps.threshold_target,
                                              ps.bisections);
    json samples = json::array();
    for (const auto& [horizon, ratio] : t.samples) samples.push_back({{"T", horizon}, {"ratio", ratio}});
    threshold = {{"T_star", t.horizon}, {"ratio", t.ratio}, {"target", ps.threshold_target}, {"samples", samples}};
    out << "contraction threshold: T* = " << t.horizon << " (ratio " << t.ratio << ")\n";
  } catch (const std::exception& e) {
    threshold = {{"error", e.what()}};
    out << "contraction threshold unavailable: " << e.what() << "\n";
  }

  const double final_ratio = outcome.history.empty() ? std::numeric_limits<double>::quiet_NaN() : outcome.history.back().ratio;
  write_file(dir / "picard.json", json{{"status", "ok"},
                                       {"iterations", outcome.iterations},
                                       {"restarts", outcome.restarts},
                                       {"horizon", outcome.solution.horizon()},
                                       {"final_ratio", finite_or_null(final_ratio)},
                                       {"history", records_json(outcome.history)},
                                       {"threshold", threshold}}
                                           .dump(2) +
                                       "\n");
  manifest["status"] = "ok";
  write_manifest(dir, manifest);
  out << "picard converged in " << outcome.iterations << " iterations after " << outcome.restarts
      << " horizon reductions, T = " << outcome.solution.horizon() << "\n";
  return ok;
}

// ---- report ----

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path dir(o.input.empty() ? o.out : o.input);
  if (dir.empty()) throw ConfigError("report needs a directory");
  const fs::path path = dir / "manifest.json";
  if (!fs::is_regular_file(path)) throw ConfigError("no manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("unreadable manifest: ") + e.what());
  }
  const auto recorded = manifest.value("files", json::object());
  const auto actual = hash_tree(dir);
  bool clean = recorded.size() == actual.size();
  for (const auto& [name, hash] : actual) {
    const bool match = recorded.contains(name) && recorded[name] == hash;
    clean = clean && match;
    out << (match ? "ok       " : "CHANGED  ") << hash << "  " << name << "\n";
  }
  for (const auto& [name, hash] : recorded.items())
    if (std::none_of(actual.begin(), actual.end(), [&](const auto& a) { return a.first == name; })) {
      clean = false;
      out << "MISSING  " << hash.get<std::string>() << "  " << name << "\n";
    }
  out << "command: " << manifest.value("command", "?") << ", status: " << manifest.value("status", "?") << "\n";
  if (fs::is_regular_file(dir / "ledger.csv")) {
    std::istringstream in(read_file(dir / "ledger.csv"));
    std::string line, last;
    std::size_t rows = 0;
    std::getline(in, line);
    while (std::getline(in, line))
      if (!line.empty()) {
        last = line;
        ++rows;
      }
    out << "ledger rows: " << rows << ", last: " << last << "\n";
  }
  if (fs::is_regular_file(dir / "analysis.json")) {
    const auto a = json::parse(read_file(dir / "analysis.json"));
    out << "analysis: " << a["summary"].dump() << "\n";
  }
  if (!clean) {
    err << "outputs do not match the manifest\n";
    return config_error;
  }
  return ok;
}

}  // namespace

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1)
    throw std::runtime_error("SHA-1 digest failed");
  std::ostringstream hex;
  for (unsigned int n = 0; n < length; ++n) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[n]);
  return hex.str();
}

std::vector<std::pair<std::string, std::string>> hash_tree(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) {
    const auto& entry = *it;
    // nested outputs carry their own manifest
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
      it.disable_recursion_pending();
      continue;
    }
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    out.emplace_back(rel, git_blob_sha1(read_file(entry.path())));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Navier–Stokes–Nernst–Planck–Poisson solver and regularity monitor", "nspnp"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto* run_cmd = app.add_subcommand("run", "time-march a configuration and write snapshots, ledger and manifest");
  run_cmd->add_option("--config", o.config, "config file")->required();
  run_cmd->add_option("--out", o.out, "output directory (created; must be empty)")->required();
  run_cmd->add_option("--seed", seed, "override run.seed");

  auto* analyze = app.add_subcommand("analyze", "scan a snapshot directory for regularity diagnostics");
  analyze->add_option("input", o.input, "run directory or snapshot directory")->required();
  analyze->add_option("--config", o.config, "config file with a [regularity] section");
  analyze->add_option("--out", o.out, "output directory (default: <input>/analysis)");
  analyze->add_flag("--strict", o.strict, "exit 3 when any cylinder is flagged");
  analyze->add_option("--radii", o.radii, "comma-separated decreasing radii")->delimiter(',');
  analyze->add_option("--epsilon0", o.epsilon0, "threshold of the L3 criterion");
  analyze->add_option("--epsilon1", o.epsilon1, "threshold of the gradient criterion");

  auto* picard = app.add_subcommand("picard", "solve the charge fixed point and bisect the contraction horizon");
  picard->add_option("--config", o.config, "config file")->required();
  picard->add_option("--out", o.out, "output directory (created; must be empty)")->required();
  picard->add_option("--seed", seed, "override run.seed");

  auto* report = app.add_subcommand("report", "verify a manifest and summarise an output directory");
  report->add_option("input", o.input, "output directory");
  report->add_option("--out", o.out, "output directory (alternative to the positional form)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return config_error;
  }
  if (run_cmd->count("--seed") || picard->count("--seed")) o.seed = seed;

  try {
    if (*run_cmd) return cmd_run(o, out, err);
    if (*analyze) return cmd_analyze(o, out, err);
    if (*picard) return cmd_picard(o, out, err);
    return cmd_report(o, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const StabilityError& e) {
    err << "numerical failure: StabilityError: " << e.what() << "\n";
    return numerical_failure;
  } catch (const NoConvergence& e) {
    err << "numerical failure: NoConvergence: " << e.what() << "\n";
    return numerical_failure;
  } catch (const IncompatibleRHS& e) {
    err << "numerical failure: IncompatibleRHS: " << e.what() << "\n";
    return numerical_failure;
  }
}

}  // namespace nspnp::cli
