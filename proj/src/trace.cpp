#include "rtvcbf/trace.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "rtvcbf/errors.hpp"

namespace rtvcbf {

namespace {

constexpr const char* kMagic = "# rtvcbf trace v1";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string suffixed(const std::string& base, int j, int m) {
  return m == 1 ? base : base + "_" + std::to_string(j);
}

void put_vec(std::ostringstream& os, const Eigen::Ref<const Eigen::VectorXd>& v, int len) {
  for (int j = 0; j < len; ++j) {
    os << ',' << (j < v.size() ? num(v(j)) : std::string("nan"));
  }
}

std::vector<std::string> split(const std::string& s, char sep, std::size_t max_fields = 0) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    if (max_fields && out.size() + 1 == max_fields) {
      out.push_back(s.substr(start));
      break;
    }
    const auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void bad(const std::string& origin, std::size_t line, const std::string& msg) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

double to_double(const std::string& s, const std::string& origin, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) bad(origin, line, "bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<StateLabel> trace_columns(const std::vector<StateLabel>& labels, int m) {
  std::vector<StateLabel> cols;
  cols.push_back({"t", "s"});
  for (const auto& l : labels) cols.push_back(l);
  for (int j = 0; j < m; ++j) cols.push_back({suffixed("u0", j, m), "rad"});
  for (int j = 0; j < m; ++j) cols.push_back({suffixed("u", j, m), "rad"});
  for (int j = 0; j < m; ++j) cols.push_back({suffixed("w", j, m), "rad"});
  cols.push_back({"h", "m^2"});
  cols.push_back({"lf_h", "m^2/s"});
  cols.push_back({"c1", "m^2/s^2"});
  for (int j = 0; j < m; ++j) cols.push_back({suffixed("c2", j, m), "m^2/(s^2 rad)"});
  cols.push_back({"feas_margin", "rad"});
  cols.push_back({"status", "-"});
  cols.push_back({"degenerate", "bool"});
  cols.push_back({"saturated", "bool"});
  cols.push_back({"sector_ok", "bool"});
  cols.push_back({"kkt", "-"});
  return cols;
}

std::string format_trace(const SimulationTrace& tr) {
  const auto& mt = tr.meta;
  const int n = mt.n, m = mt.m;
  std::ostringstream os;
  os << kMagic << "\n"
     << "# version: " << mt.version << "\n"
     << "# scenario: " << mt.scenario << "\n"
     << "# config_hash: " << mt.config_hash << "\n"
     << "# architecture: " << mt.architecture << "\n"
     << "# nonlinearity: " << mt.nonlinearity << "\n"
     << "# alpha: " << num(mt.alpha) << "\n"
     << "# theta_filter: " << num(mt.theta_filter) << "\n"
     << "# theta_nonlinearity: " << num(mt.theta_nonlinearity) << "\n"
     << "# dt_ctrl: " << num(mt.dt_ctrl) << "\n"
     << "# dt_sim: " << num(mt.dt_sim) << "\n"
     << "# horizon: " << num(mt.horizon) << "\n"
     << "# u_max: " << (mt.u_max ? num(*mt.u_max) : std::string("none")) << "\n"
     << "# seed: " << mt.seed << "\n"
     << "# n: " << n << "\n"
     << "# m: " << m << "\n";
  for (const auto& e : tr.events) {
    os << "# event: " << e.step << ',' << num(e.t) << ',' << e.kind << ',' << e.detail << "\n";
  }
  if (tr.terminal) {
    const auto& e = *tr.terminal;
    os << "# terminal: " << e.step << ',' << num(e.t) << ',' << e.kind << ',' << e.detail << "\n";
  }
  std::vector<StateLabel> labels = tr.labels;
  if (static_cast<int>(labels.size()) != n) {
    labels.clear();
    for (int i = 0; i < n; ++i) labels.push_back({"x" + std::to_string(i), "-"});
  }
  const auto cols = trace_columns(labels, m);
  os << "# units: ";
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i].unit;
  os << "\n";
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i].name;
  os << "\n";

  for (const auto& r : tr.rows) {
    os << num(r.t);
    put_vec(os, r.x, n);
    put_vec(os, r.u0, m);
    put_vec(os, r.u, m);
    put_vec(os, r.w, m);
    os << ',' << num(r.h) << ',' << num(r.lf_h) << ',' << num(r.c1);
    put_vec(os, r.c2.transpose(), m);
    os << ',' << num(r.feas_margin) << ',' << status_name(r.status) << ',' << (r.degenerate ? 1 : 0)
       << ',' << (r.saturated ? 1 : 0) << ',' << (r.sector_ok ? 1 : 0) << ',' << num(r.kkt) << "\n";
  }
  return os.str();
}

void write_trace(const SimulationTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << format_trace(trace);
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::string verdict_json(const SimulationTrace& tr, const MonitorVerdict& v) {
  using nlohmann::json;
  auto finite_or_null = [](double x) -> json { return std::isfinite(x) ? json(x) : json(nullptr); };
  json j;
  j["scenario"] = tr.meta.scenario;
  j["config_hash"] = tr.meta.config_hash;
  j["architecture"] = tr.meta.architecture;
  j["nonlinearity"] = tr.meta.nonlinearity;
  j["seed"] = tr.meta.seed;
  j["records"] = tr.rows.size();
  j["min_h"] = finite_or_null(v.min_h);
  j["min_h_time"] = v.min_h_time;
  j["tolerance"] = v.tolerance;
  j["first_violation"] = v.first_violation ? json(*v.first_violation) : json(nullptr);
  j["initial"] = {{"in_safe_set", v.initial.in_safe_set}, {"in_c1_set", v.initial.in_c1_set}};
  j["sector_ok"] = v.sector_ok;
  j["sector_violations"] = v.sector_violations;
  j["all_feasible"] = v.all_feasible;
  j["fallback_count"] = v.fallback_count;
  j["degenerate_count"] = v.degenerate_count;
  j["saturated_count"] = v.saturated_count;
  j["max_abs_u"] = v.max_abs_u;
  j["max_abs_u_deg"] = v.max_abs_u * 180.0 / kPi;
  j["control_energy"] = v.control_energy;
  j["min_exp_residual"] = finite_or_null(v.min_exp_residual);
  j["guarantee_applies"] = v.guarantee_applies;
  j["completed"] = v.completed;
  if (tr.terminal) {
    j["terminal"] = {{"step", tr.terminal->step}, {"t", tr.terminal->t}, {"kind", tr.terminal->kind},
                     {"detail", tr.terminal->detail}};
  } else {
    j["terminal"] = nullptr;
  }
  return j.dump(2) + "\n";
}

SimulationTrace parse_trace(const std::string& text, const std::string& origin) {
  SimulationTrace tr;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::string> meta;
  std::vector<std::string> units;

  if (!std::getline(in, line) || line != kMagic) bad(origin, 1, "not an rtvcbf trace");
  ++lineno;
  auto parse_event = [&](const std::string& v) {
    auto f = split(v, ',', 4);
    if (f.size() != 4) bad(origin, lineno, "malformed event");
    TraceEvent e;
    e.step = std::strtol(f[0].c_str(), nullptr, 10);
    e.t = to_double(f[1], origin, lineno);
    e.kind = f[2];
    e.detail = f[3];
    return e;
  };
  std::vector<std::string> columns;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) bad(origin, lineno, "malformed metadata line");
      const std::string key = line.substr(2, colon - 2);
      const std::string val = line.substr(colon + 2);
      if (key == "event") {
        tr.events.push_back(parse_event(val));
      } else if (key == "terminal") {
        tr.terminal = parse_event(val);
      } else if (key == "units") {
        units = split(val, ',');
      } else {
        meta[key] = val;
      }
      continue;
    }
    columns = split(line, ',');
    break;
  }
  if (columns.empty()) bad(origin, lineno, "missing column header");

  auto need = [&](const char* k) -> const std::string& {
    auto it = meta.find(k);
    if (it == meta.end()) bad(origin, lineno, std::string("missing metadata '") + k + "'");
    return it->second;
  };
  auto& mt = tr.meta;
  mt.version = need("version");
  mt.scenario = need("scenario");
  mt.config_hash = need("config_hash");
  mt.architecture = need("architecture");
  mt.nonlinearity = need("nonlinearity");
  mt.alpha = to_double(need("alpha"), origin, lineno);
  mt.theta_filter = to_double(need("theta_filter"), origin, lineno);
  mt.theta_nonlinearity = to_double(need("theta_nonlinearity"), origin, lineno);
  mt.dt_ctrl = to_double(need("dt_ctrl"), origin, lineno);
  mt.dt_sim = to_double(need("dt_sim"), origin, lineno);
  mt.horizon = to_double(need("horizon"), origin, lineno);
  if (need("u_max") != "none") mt.u_max = to_double(need("u_max"), origin, lineno);
  mt.seed = std::strtoull(need("seed").c_str(), nullptr, 10);
  mt.n = std::atoi(need("n").c_str());
  mt.m = std::atoi(need("m").c_str());
  const int n = mt.n, m = mt.m;
  if (n < 1 || m < 1) bad(origin, lineno, "bad dimensions");

  const std::size_t expect = static_cast<std::size_t>(1 + n + 4 * m + 3 + 6);
  if (columns.size() != expect) bad(origin, lineno, "unexpected column count");
  if (units.size() != columns.size()) bad(origin, lineno, "units line does not match columns");
  for (int i = 0; i < n; ++i) tr.labels.push_back({columns[1 + i], units[1 + i]});

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != expect) bad(origin, lineno, "row has " + std::to_string(f.size()) + " fields");
    std::size_t c = 0;
    auto next = [&] { return to_double(f[c++], origin, lineno); };
    auto vec = [&](int len) {
      Vector v(len);
      for (int j = 0; j < len; ++j) v(j) = next();
      return v;
    };
    StepRecord r;
    r.t = next();
    r.x = vec(n);
    r.u0 = vec(m);
    r.u = vec(m);
    r.w = vec(m);
    r.h = next();
    r.lf_h = next();
    r.c1 = next();
    r.c2 = vec(m).transpose();
    r.feas_margin = next();
    const auto st = parse_status(f[c++]);
    if (!st) bad(origin, lineno, "unknown status '" + f[c - 1] + "'");
    r.status = *st;
    r.degenerate = next() != 0.0;
    r.saturated = next() != 0.0;
    r.sector_ok = next() != 0.0;
    r.kkt = next();
    tr.rows.push_back(std::move(r));
  }
  return tr;
}

SimulationTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open trace file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str(), path);
}

}  // namespace rtvcbf
