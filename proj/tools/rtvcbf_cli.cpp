// rtvcbf: run, compare and audit robust time-varying CBF safety filters.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rtvcbf/errors.hpp"
#include "rtvcbf/filter.hpp"
#include "rtvcbf/kernels.hpp"
#include "rtvcbf/plot.hpp"
#include "rtvcbf/scenario.hpp"
#include "rtvcbf/sim.hpp"
#include "rtvcbf/trace.hpp"
#include "rtvcbf/verify.hpp"

namespace fs = std::filesystem;
using namespace rtvcbf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct Common {
  std::string scenario;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
};

ScenarioConfig load_config(const Common& c, bool required = true) {
  ScenarioConfig cfg;
  if (!c.scenario.empty()) {
    cfg = load_scenario(c.scenario);
  } else if (required) {
    throw ConfigError("--scenario is required");
  }
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed) cfg.nonlinearity.params.seed = *c.seed;
  cfg.validate();
  return cfg;
}

std::string out_path(const Common& c, const std::string& name) {
  if (c.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(c.out);
  return (fs::path(c.out) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << text;
}

std::string fmt(double v, const char* f = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string summary_line(const RunResult& r) {
  std::ostringstream os;
  os << "arch=" << r.trace.meta.architecture << " min_h=" << fmt(r.verdict.min_h)
     << " first_violation=" << (r.verdict.first_violation ? fmt(*r.verdict.first_violation) : "none")
     << " control_energy=" << fmt(r.verdict.control_energy)
     << " max_abs_u_deg=" << fmt(rad_to_deg(r.verdict.max_abs_u))
     << " fallback_count=" << r.verdict.fallback_count
     << " saturated_steps=" << r.verdict.saturated_count
     << " completed=" << (r.verdict.completed ? "yes" : "no");
  return os.str();
}

int run_simulate(const Common& c, const std::string& arch_name) {
  const ScenarioConfig cfg = load_config(c);
  const auto arch = parse_architecture(arch_name);
  if (!arch) throw ConfigError("unknown architecture '" + arch_name + "'");
  const RunResult r = run_closed_loop(cfg, *arch);
  write_trace(r.trace, out_path(c, cfg.output.trace));
  write_text(out_path(c, cfg.output.verdict), verdict_json(r.trace, r.verdict));
  std::cout << summary_line(r) << "\n";
  if (r.trace.terminal) {
    std::cerr << "error: " << r.trace.terminal->kind << " at step " << r.trace.terminal->step << ": "
              << r.trace.terminal->detail << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

PlotOptions plot_options(const ScenarioConfig& cfg) {
  PlotOptions po;
  po.obstacle = cfg.barrier.circle;
  po.annotation_time = cfg.output.annotation_time;
  po.u_max = cfg.filter.u_max;
  return po;
}

int run_compare(const Common& c) {
  const ScenarioConfig cfg = load_config(c);
  const Architecture archs[] = {Architecture::kBaselineOnly, Architecture::kTvcbf, Architecture::kRtvcbf};
  std::vector<RunResult> runs;
  for (auto a : archs) runs.push_back(run_closed_loop(cfg, a));

  std::vector<LabeledTrace> labeled;
  nlohmann::json verdicts = nlohmann::json::array();
  std::ostringstream table;
  table << "architecture  min_h          violation_t  max_|u|_deg  fallbacks  completed\n";
  bool failed = false;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const std::string name(architecture_name(archs[i]));
    write_trace(r.trace, out_path(c, name + "_" + cfg.output.trace));
    verdicts.push_back(nlohmann::json::parse(verdict_json(r.trace, r.verdict)));
    labeled.push_back({architecture_label(archs[i]), &r.trace});
    char line[200];
    std::snprintf(line, sizeof line, "%-13s %-14.6g %-12s %-12.4g %-10ld %s\n", name.c_str(),
                  r.verdict.min_h,
                  r.verdict.first_violation ? fmt(*r.verdict.first_violation, "%.3f").c_str() : "none",
                  rad_to_deg(r.verdict.max_abs_u), r.verdict.fallback_count,
                  r.verdict.completed ? "yes" : "no");
    table << line;
    failed = failed || r.trace.terminal.has_value();
  }
  const PlotOptions po = plot_options(cfg);
  emit_plot(labeled, PlotKind::kTrajectory, po, out_path(c, "trajectory.vl.json"));
  emit_plot(labeled, PlotKind::kSteering, po, out_path(c, "steering.vl.json"));
  emit_plot(labeled, PlotKind::kBoundaryDistance, po, out_path(c, "boundary_distance.vl.json"));
  write_text(out_path(c, "compare.txt"), table.str());
  write_text(out_path(c, "compare.json"), verdicts.dump(2) + "\n");
  std::cout << table.str();
  return failed ? kExitNumerical : kExitOk;
}

struct Range {
  double lo = 0.0, hi = 0.0;
  long count = 1;
};

Range parse_range(const std::string& s, const char* what) {
  Range r;
  char extra;
  if (std::sscanf(s.c_str(), "%lf:%lf:%ld%c", &r.lo, &r.hi, &r.count, &extra) != 3 || r.count < 1) {
    throw ConfigError(std::string(what) + ": expected lo:hi:count, got '" + s + "'");
  }
  return r;
}

double range_at(const Range& r, long i) {
  return r.count == 1 ? r.lo : r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(r.count - 1);
}

int run_feasibility(const Common& c, const std::string& mode, const std::string& arch_name,
                    const std::string& e_range, const std::string& s_range, double time) {
  const ScenarioConfig cfg = load_config(c);
  const LinearPlant plant = cfg.build_plant();
  const MovingCircleBarrier bar(cfg.barrier.circle, plant.n());
  const double theta = cfg.filter.theta;
  const double u_max = cfg.filter.u_max.value_or(1e9);

  std::ostringstream csv;
  long total = 0, feasible = 0, degenerate = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  auto cell = [&](const Vector& x, double t, const std::string& prefix) {
    const BarrierEvaluation ev = eval_barrier(bar, plant, x, t, cfg.barrier.alpha);
    ++total;
    const bool deg = !relative_degree_ok(ev, relative_degree_eps(ev, cfg.barrier.relative_degree_coeff)).ok;
    if (deg) {
      ++degenerate;
      csv << prefix << ",nan," << (ev.c1 >= 0.0 ? 1 : 0) << ",1\n";
      if (ev.c1 >= 0.0) ++feasible;
      return;
    }
    const FeasibilityMargin fm = feasibility_margin(ev.c1, ev.c2, theta, u_max);
    if (fm.feasible) ++feasible;
    if (ev.c1 < 0.0) min_margin = std::min(min_margin, fm.margin);
    csv << prefix << ',' << fmt(fm.margin, "%.17g") << ',' << (fm.feasible ? 1 : 0) << ",0\n";
  };

  if (mode == "trajectory") {
    const auto arch = parse_architecture(arch_name);
    if (!arch) throw ConfigError("unknown architecture '" + arch_name + "'");
    const RunResult r = run_closed_loop(cfg, *arch);
    csv << "t,margin,feasible,degenerate\n";
    for (const auto& row : r.trace.rows) cell(row.x, row.t, fmt(row.t, "%.17g"));
  } else if (mode == "grid") {
    const Range er = parse_range(e_range, "--e"), sr = parse_range(s_range, "--s");
    const auto& bp = cfg.barrier.circle;
    csv << "e,s,margin,feasible,degenerate\n";
    for (long i = 0; i < er.count; ++i) {
      for (long j = 0; j < sr.count; ++j) {
        Vector x = cfg.sim.x0;
        x(bp.lateral_index) = range_at(er, i);
        x(bp.longitudinal_index) = range_at(sr, j);
        cell(x, time, fmt(x(bp.lateral_index), "%.17g") + "," + fmt(x(bp.longitudinal_index), "%.17g"));
      }
    }
  } else {
    throw ConfigError("--mode must be trajectory or grid");
  }
  write_text(out_path(c, "feasibility.csv"), csv.str());
  const double frac = total ? static_cast<double>(feasible) / static_cast<double>(total) : 1.0;
  std::cout << "cells=" << total << " feasible_fraction=" << fmt(frac)
            << " min_margin=" << (std::isfinite(min_margin) ? fmt(min_margin) : "none")
            << " degenerate=" << degenerate << " theta=" << fmt(theta) << "\n";
  return kExitOk;
}

int run_verify(const Common& c, const std::string& suite_arg) {
  const ScenarioConfig cfg = load_config(c, false);
  std::vector<Suite> suites;
  if (suite_arg == "all") {
    suites = {Suite::kDerivatives, Suite::kSolver, Suite::kCertificates, Suite::kInvariance};
  } else {
    const auto s = parse_suite(suite_arg);
    if (!s) throw ConfigError("unknown suite '" + suite_arg + "'");
    suites = {*s};
  }
  VerifyReport all;
  const std::uint64_t seed = c.seed.value_or(20240601);
  for (auto s : suites) {
    VerifyReport r = run_suite(s, cfg, seed);
    all.results.insert(all.results.end(), r.results.begin(), r.results.end());
  }
  for (const auto& r : all.results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.suite << "/" << r.name << " measured=" << fmt(r.measured)
              << " threshold=" << fmt(r.threshold) << " samples=" << r.samples << "\n";
  }
  std::cout << "kernels=" << kernels::isa_name(kernels::active_isa()) << "\n";
  if (!c.out.empty()) write_text(out_path(c, "verify.json"), all.to_json());
  return all.passed() ? kExitOk : kExitNumerical;
}

struct SweepRow {
  std::string value;
  bool ok = false;
  std::string error;
  RunResult result;
};

int run_sweep(const Common& c, const std::string& param, const std::vector<std::string>& values,
              unsigned jobs) {
  const ScenarioConfig base = load_config(c);
  if (values.empty()) throw ConfigError("--values must list at least one value");
  std::vector<ScenarioConfig> cfgs;
  for (const auto& v : values) {
    ScenarioConfig cfg = base;
    apply_override(cfg, param + "=" + v);
    cfgs.push_back(std::move(cfg));
  }
  std::vector<SweepRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      rows[i].value = values[i];
      try {
        rows[i].result = run_closed_loop(cfgs[i], Architecture::kRtvcbf);
        rows[i].ok = !rows[i].result.trace.terminal;
        if (!rows[i].ok) rows[i].error = rows[i].result.trace.terminal->kind;
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(rows.size()));
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "value,min_h,max_abs_u,feasible_fraction,fallback_count,first_violation,status\n";
  bool any_failed = false;
  double prev = -std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (const auto& r : rows) {
    if (!r.ok && r.result.trace.rows.empty()) {
      csv << r.value << ",nan,nan,nan,nan,nan,error: " << r.error << "\n";
      any_failed = true;
      continue;
    }
    const auto& v = r.result.verdict;
    const auto n = static_cast<double>(r.result.trace.rows.size());
    const double feas = n > 0 ? 1.0 - static_cast<double>(v.fallback_count) / n : 1.0;
    csv << r.value << ',' << fmt(v.min_h, "%.17g") << ',' << fmt(v.max_abs_u, "%.17g") << ','
        << fmt(feas, "%.17g") << ',' << v.fallback_count << ','
        << (v.first_violation ? fmt(*v.first_violation, "%.17g") : "none") << ','
        << (r.ok ? "ok" : "error: " + r.error) << "\n";
    if (!r.ok) any_failed = true;
    if (v.min_h < prev) monotone = false;
    prev = v.min_h;
  }
  write_text(out_path(c, "sweep.csv"), csv.str());
  std::cout << csv.str();
  std::cout << "min_h nondecreasing over the listed values: " << (monotone ? "yes" : "no") << "\n";
  return any_failed ? kExitNumerical : kExitOk;
}

std::vector<std::string> split_values(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust time-varying CBF safety filters: simulate, compare, audit."};
  app.set_version_flag("--version", RTVCBF_VERSION);
  app.require_subcommand(1);

  Common common;
  std::uint64_t seed_value = 0;
  auto add_common = [&](CLI::App* sub, bool scenario_required) {
    auto* opt = sub->add_option("--scenario", common.scenario, "Scenario file");
    if (scenario_required) opt->required();
    sub->add_option("--set", common.overrides, "Override a scenario key: dotted.key=value")
        ->take_all()
        ->allow_extra_args(false);
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--seed", seed_value, "Seed for random-bounded perturbations");
  };

  std::string arch = "rtvcbf";
  auto* sim = app.add_subcommand("simulate", "Run one architecture and write trace + verdict");
  add_common(sim, true);
  sim->add_option("--arch", arch, "baseline-only | tvcbf | rtvcbf");

  auto* cmp = app.add_subcommand("compare", "Run all three architectures, write plots and a table");
  add_common(cmp, true);

  std::string mode = "trajectory", e_range = "-3:3:61", s_range = "-40:10:101";
  double grid_time = 0.0;
  auto* feas = app.add_subcommand("feasibility", "Input-bound feasibility map");
  add_common(feas, true);
  feas->add_option("--arch", arch, "Architecture whose trajectory is sampled");
  feas->add_option("--mode", mode, "trajectory | grid");
  feas->add_option("--e", e_range, "Lateral grid lo:hi:count");
  feas->add_option("--s", s_range, "Longitudinal grid lo:hi:count");
  feas->add_option("--time", grid_time, "Time of the grid slice [s]");

  std::string suite = "all";
  auto* ver = app.add_subcommand("verify", "Run a property suite");
  add_common(ver, false);
  ver->add_option("--suite", suite, "derivatives | solver | certificates | invariance | all");

  std::string param, values_arg;
  unsigned jobs = 0;
  auto* swp = app.add_subcommand("sweep", "Run rtvcbf over values of one numeric key");
  add_common(swp, true);
  swp->add_option("--param", param, "Dotted scenario key")->required();
  swp->add_option("--values", values_arg, "Comma-separated values")->required();
  swp->add_option("--jobs", jobs, "Parallel runs (default: logical cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  for (auto* s : {sim, cmp, feas, ver, swp}) {
    if (s->parsed() && s->count("--seed")) common.seed = seed_value;
  }

  try {
    if (sim->parsed()) return run_simulate(common, arch);
    if (cmp->parsed()) return run_compare(common);
    if (feas->parsed()) return run_feasibility(common, mode, arch, e_range, s_range, grid_time);
    if (ver->parsed()) return run_verify(common, suite);
    if (swp->parsed()) return run_sweep(common, param, split_values(values_arg), jobs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IntegrationError& e) {
    std::cerr << "integration error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegeneracyError& e) {
    std::cerr << "degeneracy error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
