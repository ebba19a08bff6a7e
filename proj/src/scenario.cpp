#include "rtvcbf/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rtvcbf/errors.hpp"

namespace rtvcbf {

std::string_view saturation_mode_name(SaturationMode m) {
  return m == SaturationMode::kInProgram ? "in-program" : "post-saturate";
}

std::optional<SaturationMode> parse_saturation_mode(std::string_view name) {
  if (name == "in-program") return SaturationMode::kInProgram;
  if (name == "post-saturate") return SaturationMode::kPostSaturate;
  return std::nullopt;
}

namespace {

const std::map<std::string, std::vector<std::string>>& section_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"plant",
       {"model", "mass", "yaw_inertia", "cornering_front", "cornering_rear", "front_axle",
        "rear_axle", "speed", "A", "B"}},
      {"barrier",
       {"radius", "lateral_velocity", "longitudinal_velocity", "clearance_multiplier",
        "lateral_index", "longitudinal_index", "alpha", "relative_degree_coeff"}},
      {"filter",
       {"theta", "u_max_deg", "u_max_rad", "tvcbf_saturation", "root_tol", "max_iterations",
        "feas_abs", "feas_rel", "route_nominal_to_qp"}},
      {"baseline", {"K", "reference", "lat_indices", "saturate", "Q", "R"}},
      {"nonlinearity", {"kind", "theta", "gain", "frequency", "phase", "level", "seed"}},
      {"sim", {"dt_ctrl", "dt_sim", "horizon", "x0", "violation_tol_rel"}},
      {"output", {"trace", "verdict", "annotation_time"}},
  };
  return keys;
}

const std::vector<std::string> kSectionOrder = {"plant",        "barrier", "filter", "baseline",
                                                "nonlinearity", "sim",     "output"};

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& key, const std::string& msg) const {
    std::ostringstream os;
    os << origin_;
    if (n.IsDefined() && n.Mark().line >= 0) os << ":" << n.Mark().line + 1;
    os << ": " << key << ": " << msg;
    throw ConfigError(os.str());
  }

  double number(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected a number");
    const std::string s = n.Scalar();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) fail(n, key, "expected a number, got '" + s + "'");
    if (!std::isfinite(v)) fail(n, key, "value must be finite");
    return v;
  }

  long integer(const YAML::Node& n, const std::string& key) const {
    const double v = number(n, key);
    if (v != std::floor(v) || std::abs(v) > 1e15) fail(n, key, "expected an integer");
    return static_cast<long>(v);
  }

  std::uint64_t unsigned64(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected an unsigned integer");
    const std::string s = n.Scalar();
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      fail(n, key, "expected an unsigned integer, got '" + s + "'");
    }
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), nullptr, 10);
    if (errno == ERANGE) fail(n, key, "integer out of range");
    return static_cast<std::uint64_t>(v);
  }

  bool boolean(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected true or false");
    const std::string s = n.Scalar();
    if (s == "true") return true;
    if (s == "false") return false;
    fail(n, key, "expected true or false, got '" + s + "'");
  }

  std::string text(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected a string");
    return n.Scalar();
  }

  std::vector<double> list(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence()) fail(n, key, "expected a list of numbers");
    std::vector<double> out;
    for (const auto& e : n) out.push_back(number(e, key));
    return out;
  }

  Matrix matrix(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence() || n.size() == 0) fail(n, key, "expected a non-empty list of rows");
    std::vector<std::vector<double>> rows;
    if (!n[0].IsSequence()) {
      rows.push_back(list(n, key));
    } else {
      for (const auto& r : n) rows.push_back(list(r, key));
    }
    const std::size_t cols = rows.front().size();
    for (const auto& r : rows) {
      if (r.size() != cols || cols == 0) fail(n, key, "rows must have equal, non-zero length");
    }
    Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
    }
    return M;
  }

  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
};

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

ScenarioConfig from_node(const YAML::Node& root, const std::string& origin) {
  const Reader rd(origin);
  ScenarioConfig c;
  if (!root.IsDefined() || root.IsNull()) return c;
  if (!root.IsMap()) rd.fail(root, "<root>", "expected a mapping of sections");

  const auto& allowed = section_keys();
  for (const auto& kv : root) {
    const std::string sec = kv.first.as<std::string>();
    if (sec == "name") continue;
    auto it = allowed.find(sec);
    if (it == allowed.end()) rd.fail(kv.first, sec, "unknown section");
    if (kv.second.IsNull()) continue;
    if (!kv.second.IsMap()) rd.fail(kv.second, sec, "expected a mapping");
    std::set<std::string> seen;
    for (const auto& e : kv.second) {
      const std::string key = e.first.as<std::string>();
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
        rd.fail(e.first, sec + "." + key, "unknown key");
      }
      if (!seen.insert(key).second) rd.fail(e.first, sec + "." + key, "duplicate key");
    }
  }

  if (root["name"]) c.name = rd.text(root["name"], "name");

  auto section = [&](const char* s) { return root[s]; };

  if (const YAML::Node p = section("plant"); p && p.IsMap()) {
    std::string model = "car";
    if (p["model"]) model = rd.text(p["model"], "plant.model");
    if (model == "car") {
      CarParams cp;
      if (p["mass"]) cp.mass = rd.number(p["mass"], "plant.mass");
      if (p["yaw_inertia"]) cp.yaw_inertia = rd.number(p["yaw_inertia"], "plant.yaw_inertia");
      if (p["cornering_front"]) cp.cornering_front = rd.number(p["cornering_front"], "plant.cornering_front");
      if (p["cornering_rear"]) cp.cornering_rear = rd.number(p["cornering_rear"], "plant.cornering_rear");
      if (p["front_axle"]) cp.front_axle = rd.number(p["front_axle"], "plant.front_axle");
      if (p["rear_axle"]) cp.rear_axle = rd.number(p["rear_axle"], "plant.rear_axle");
      if (p["speed"]) cp.speed = rd.number(p["speed"], "plant.speed");
      if (p["A"] || p["B"]) rd.fail(p["A"] ? p["A"] : p["B"], "plant.A", "A and B are only read with model: matrices");
      c.plant.car = cp;
    } else if (model == "matrices") {
      c.plant.car.reset();
      for (const char* k : {"mass", "yaw_inertia", "cornering_front", "cornering_rear", "front_axle",
                            "rear_axle", "speed"}) {
        if (p[k]) rd.fail(p[k], std::string("plant.") + k, "car parameters need model: car");
      }
      if (!p["A"] || !p["B"]) rd.fail(p, "plant", "model: matrices requires A and B");
      c.plant.A = rd.matrix(p["A"], "plant.A");
      c.plant.B = rd.matrix(p["B"], "plant.B");
      if (p["B"].IsSequence() && !p["B"][0].IsSequence()) c.plant.B.transposeInPlace();
    } else {
      rd.fail(p["model"], "plant.model", "expected car or matrices, got '" + model + "'");
    }
  }

  if (const YAML::Node b = section("barrier"); b && b.IsMap()) {
    auto& cp = c.barrier.circle;
    if (b["radius"]) cp.radius = rd.number(b["radius"], "barrier.radius");
    if (b["lateral_velocity"]) cp.lateral_velocity = rd.number(b["lateral_velocity"], "barrier.lateral_velocity");
    if (b["longitudinal_velocity"]) cp.longitudinal_velocity = rd.number(b["longitudinal_velocity"], "barrier.longitudinal_velocity");
    if (b["clearance_multiplier"]) cp.clearance_multiplier = rd.number(b["clearance_multiplier"], "barrier.clearance_multiplier");
    if (b["lateral_index"]) cp.lateral_index = static_cast<int>(rd.integer(b["lateral_index"], "barrier.lateral_index"));
    if (b["longitudinal_index"]) cp.longitudinal_index = static_cast<int>(rd.integer(b["longitudinal_index"], "barrier.longitudinal_index"));
    if (b["alpha"]) c.barrier.alpha = rd.number(b["alpha"], "barrier.alpha");
    if (b["relative_degree_coeff"]) c.barrier.relative_degree_coeff = rd.number(b["relative_degree_coeff"], "barrier.relative_degree_coeff");
  }

  // A file that names no input bound runs unbounded.
  if (const YAML::Node f = section("filter"); !f || !f.IsMap() || (!f["u_max_deg"] && !f["u_max_rad"])) {
    c.filter.u_max.reset();
  }
  if (const YAML::Node f = section("filter"); f && f.IsMap()) {
    if (f["theta"]) c.filter.theta = rd.number(f["theta"], "filter.theta");
    if (f["u_max_deg"] && f["u_max_rad"]) rd.fail(f["u_max_rad"], "filter.u_max_rad", "give u_max_deg or u_max_rad, not both");
    if (f["u_max_deg"]) {
      const YAML::Node n = f["u_max_deg"];
      if (n.IsNull() || (n.IsScalar() && n.Scalar() == "none")) {
        c.filter.u_max.reset();
      } else {
        c.filter.u_max = deg_to_rad(rd.number(n, "filter.u_max_deg"));
      }
    }
    if (f["u_max_rad"]) {
      const YAML::Node n = f["u_max_rad"];
      if (n.IsNull() || (n.IsScalar() && n.Scalar() == "none")) {
        c.filter.u_max.reset();
      } else {
        c.filter.u_max = rd.number(n, "filter.u_max_rad");
      }
    }
    if (f["tvcbf_saturation"]) {
      const std::string s = rd.text(f["tvcbf_saturation"], "filter.tvcbf_saturation");
      auto m = parse_saturation_mode(s);
      if (!m) rd.fail(f["tvcbf_saturation"], "filter.tvcbf_saturation", "expected in-program or post-saturate");
      c.filter.tvcbf_saturation = *m;
    }
    auto& so = c.filter.solver;
    if (f["root_tol"]) so.root_tol = rd.number(f["root_tol"], "filter.root_tol");
    if (f["max_iterations"]) so.max_iterations = static_cast<int>(rd.integer(f["max_iterations"], "filter.max_iterations"));
    if (f["feas_abs"]) so.feas_abs = rd.number(f["feas_abs"], "filter.feas_abs");
    if (f["feas_rel"]) so.feas_rel = rd.number(f["feas_rel"], "filter.feas_rel");
    if (f["route_nominal_to_qp"]) so.route_nominal_to_qp = rd.boolean(f["route_nominal_to_qp"], "filter.route_nominal_to_qp");
  }

  if (const YAML::Node b = section("baseline"); b && b.IsMap()) {
    if (b["K"]) c.baseline.K = rd.matrix(b["K"], "baseline.K");
    if (b["reference"]) c.baseline.reference = to_vector(rd.list(b["reference"], "baseline.reference"));
    if (b["lat_indices"]) {
      c.baseline.lat_indices.clear();
      if (!b["lat_indices"].IsSequence()) rd.fail(b["lat_indices"], "baseline.lat_indices", "expected a list");
      for (const auto& e : b["lat_indices"]) {
        c.baseline.lat_indices.push_back(static_cast<int>(rd.integer(e, "baseline.lat_indices")));
      }
    }
    if (b["saturate"]) c.baseline.saturate = rd.boolean(b["saturate"], "baseline.saturate");
    if (b["Q"]) c.baseline.q_weights = rd.list(b["Q"], "baseline.Q");
    if (b["R"]) c.baseline.r_weights = rd.list(b["R"], "baseline.R");
  }

  if (const YAML::Node n = section("nonlinearity"); n && n.IsMap()) {
    auto& np = c.nonlinearity.params;
    if (n["kind"]) {
      const std::string s = rd.text(n["kind"], "nonlinearity.kind");
      auto k = parse_nonlinearity(s);
      if (!k) rd.fail(n["kind"], "nonlinearity.kind", "unknown kind '" + s + "'");
      np.kind = *k;
    }
    if (n["theta"]) {
      const YAML::Node t = n["theta"];
      if (t.IsNull() || (t.IsScalar() && t.Scalar() == "none")) {
        c.nonlinearity.theta.reset();
      } else {
        c.nonlinearity.theta = rd.number(t, "nonlinearity.theta");
      }
    }
    if (n["gain"]) np.gain = rd.number(n["gain"], "nonlinearity.gain");
    if (n["frequency"]) np.frequency = rd.number(n["frequency"], "nonlinearity.frequency");
    if (n["phase"]) np.phase = rd.number(n["phase"], "nonlinearity.phase");
    if (n["level"]) np.level = rd.number(n["level"], "nonlinearity.level");
    if (n["seed"]) np.seed = rd.unsigned64(n["seed"], "nonlinearity.seed");
  }

  if (const YAML::Node s = section("sim"); s && s.IsMap()) {
    if (s["dt_ctrl"]) c.sim.dt_ctrl = rd.number(s["dt_ctrl"], "sim.dt_ctrl");
    if (s["dt_sim"]) c.sim.dt_sim = rd.number(s["dt_sim"], "sim.dt_sim");
    if (s["horizon"]) c.sim.horizon = rd.number(s["horizon"], "sim.horizon");
    if (s["x0"]) c.sim.x0 = to_vector(rd.list(s["x0"], "sim.x0"));
    if (s["violation_tol_rel"]) c.sim.violation_tol_rel = rd.number(s["violation_tol_rel"], "sim.violation_tol_rel");
  }

  if (const YAML::Node o = section("output"); o && o.IsMap()) {
    if (o["trace"]) c.output.trace = rd.text(o["trace"], "output.trace");
    if (o["verdict"]) c.output.verdict = rd.text(o["verdict"], "output.verdict");
    if (o["annotation_time"]) c.output.annotation_time = rd.number(o["annotation_time"], "output.annotation_time");
  }

  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

std::string num(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string list_text(const double* v, std::size_t n) {
  std::string s = "[";
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ", ";
    s += num(v[i]);
  }
  return s + "]";
}

std::string vec_text(const Vector& v) { return list_text(v.data(), static_cast<std::size_t>(v.size())); }
std::string vec_text(const std::vector<double>& v) { return list_text(v.data(), v.size()); }

std::string matrix_text(const Matrix& M) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    if (i) s += ", ";
    s += "[";
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) s += ", ";
      s += num(M(i, j));
    }
    s += "]";
  }
  return s + "]";
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

bool integral_ratio(double num_, double den) {
  const double r = num_ / den;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, std::abs(r));
}

bool simple_file_name(const std::string& s) {
  return !s.empty() && s.find('/') == std::string::npos && s.find('\\') == std::string::npos &&
         s != "." && s != "..";
}

}  // namespace

void ScenarioConfig::validate() const {
  int n = 0, m = 0;
  if (plant.car) {
    plant.car->validate();
    n = car_state::kDim;
    m = 1;
  } else {
    require(plant.A.rows() >= 1 && plant.A.rows() == plant.A.cols(), "plant.A must be square and non-empty");
    require(plant.B.rows() == plant.A.rows() && plant.B.cols() >= 1, "plant.B must have n rows and >= 1 column");
    require(plant.A.allFinite() && plant.B.allFinite(), "plant matrices must be finite");
    n = static_cast<int>(plant.A.rows());
    m = static_cast<int>(plant.B.cols());
  }

  const auto& bc = barrier.circle;
  require(bc.radius > 0.0, "barrier.radius must be > 0");
  require(bc.clearance_multiplier >= 1.0, "barrier.clearance_multiplier must be >= 1");
  require(std::isfinite(bc.lateral_velocity) && std::isfinite(bc.longitudinal_velocity),
          "barrier velocities must be finite");
  require(bc.lateral_index >= 0 && bc.lateral_index < n, "barrier.lateral_index out of range");
  require(bc.longitudinal_index >= 0 && bc.longitudinal_index < n, "barrier.longitudinal_index out of range");
  require(bc.lateral_index != bc.longitudinal_index, "barrier indices must differ");
  require(barrier.alpha > 0.0 && std::isfinite(barrier.alpha), "barrier.alpha must be > 0");
  require(barrier.relative_degree_coeff > 0.0, "barrier.relative_degree_coeff must be > 0");

  require(filter.theta >= 0.0 && filter.theta < 1.0, "filter.theta must lie in [0, 1)");
  if (filter.u_max) require(*filter.u_max > 0.0 && std::isfinite(*filter.u_max), "filter.u_max must be > 0");
  require(filter.solver.root_tol > 0.0, "filter.root_tol must be > 0");
  require(filter.solver.max_iterations >= 1, "filter.max_iterations must be >= 1");
  require(filter.solver.feas_abs >= 0.0 && filter.solver.feas_rel >= 0.0, "filter feasibility tolerances must be >= 0");

  const auto nl = static_cast<Eigen::Index>(baseline.lat_indices.size());
  require(nl >= 1, "baseline.lat_indices must not be empty");
  for (int i : baseline.lat_indices) require(i >= 0 && i < n, "baseline.lat_indices out of range");
  require(baseline.K.rows() == m && baseline.K.cols() == nl, "baseline.K must be m x len(lat_indices)");
  require(baseline.K.allFinite(), "baseline.K must be finite");
  require(baseline.reference.size() == nl, "baseline.reference must match lat_indices");
  require(baseline.reference.allFinite(), "baseline.reference must be finite");

  const double th = nonlinearity_theta();
  require(th >= 0.0 && th < 1.0, "nonlinearity.theta must lie in [0, 1)");
  const auto& np = nonlinearity.params;
  if (np.kind == NonlinearityKind::kConstantGain) require(std::abs(np.gain) <= 1.0, "nonlinearity.gain must lie in [-1, 1]");
  if (np.kind == NonlinearityKind::kSaturationResidual) require(np.level > 0.0, "nonlinearity.level must be > 0");

  require(sim.dt_ctrl > 0.0 && sim.dt_sim > 0.0, "sim.dt_ctrl and sim.dt_sim must be > 0");
  require(sim.dt_sim <= sim.dt_ctrl * (1.0 + 1e-12) && integral_ratio(sim.dt_ctrl, sim.dt_sim),
          "sim.dt_ctrl must be an integer multiple of sim.dt_sim");
  require(sim.horizon >= 0.0 && std::isfinite(sim.horizon), "sim.horizon must be >= 0");
  require(integral_ratio(sim.horizon, sim.dt_ctrl), "sim.horizon must be a multiple of sim.dt_ctrl");
  require(sim.horizon / sim.dt_ctrl <= 1e8, "sim.horizon / sim.dt_ctrl too large");
  require(sim.x0.size() == n && sim.x0.allFinite(), "sim.x0 must hold n finite entries");
  require(sim.violation_tol_rel >= 0.0, "sim.violation_tol_rel must be >= 0");

  require(simple_file_name(output.trace) && simple_file_name(output.verdict),
          "output file names must be plain names without directories");
  require(output.annotation_time >= 0.0, "output.annotation_time must be >= 0");
}

LinearPlant ScenarioConfig::build_plant() const {
  if (plant.car) return build_car_plant(*plant.car);
  return LinearPlant(plant.A, plant.B);
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    std::ostringstream os;
    os << origin << ":" << e.mark.line + 1 << ": parse error: " << e.msg;
    throw ConfigError(os.str());
  }
  return from_node(root, origin);
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open scenario file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

std::string serialize_scenario(const ScenarioConfig& c) {
  std::ostringstream os;
  os << "name: " << quoted(c.name) << "\n";
  os << "plant:\n";
  if (c.plant.car) {
    const auto& p = *c.plant.car;
    os << "  model: car\n"
       << "  mass: " << num(p.mass) << "\n"
       << "  yaw_inertia: " << num(p.yaw_inertia) << "\n"
       << "  cornering_front: " << num(p.cornering_front) << "\n"
       << "  cornering_rear: " << num(p.cornering_rear) << "\n"
       << "  front_axle: " << num(p.front_axle) << "\n"
       << "  rear_axle: " << num(p.rear_axle) << "\n"
       << "  speed: " << num(p.speed) << "\n";
  } else {
    os << "  model: matrices\n"
       << "  A: " << matrix_text(c.plant.A) << "\n"
       << "  B: " << matrix_text(c.plant.B) << "\n";
  }
  const auto& b = c.barrier.circle;
  os << "barrier:\n"
     << "  radius: " << num(b.radius) << "\n"
     << "  lateral_velocity: " << num(b.lateral_velocity) << "\n"
     << "  longitudinal_velocity: " << num(b.longitudinal_velocity) << "\n"
     << "  clearance_multiplier: " << num(b.clearance_multiplier) << "\n"
     << "  lateral_index: " << b.lateral_index << "\n"
     << "  longitudinal_index: " << b.longitudinal_index << "\n"
     << "  alpha: " << num(c.barrier.alpha) << "\n"
     << "  relative_degree_coeff: " << num(c.barrier.relative_degree_coeff) << "\n";
  os << "filter:\n"
     << "  theta: " << num(c.filter.theta) << "\n";
  if (!c.filter.u_max) {
    os << "  u_max_deg: none\n";
  } else {
    const double deg = rad_to_deg(*c.filter.u_max);
    if (deg_to_rad(deg) == *c.filter.u_max) {
      os << "  u_max_deg: " << num(deg) << "\n";
    } else {
      os << "  u_max_rad: " << num(*c.filter.u_max) << "\n";
    }
  }
  const auto& so = c.filter.solver;
  os << "  tvcbf_saturation: " << saturation_mode_name(c.filter.tvcbf_saturation) << "\n"
     << "  root_tol: " << num(so.root_tol) << "\n"
     << "  max_iterations: " << so.max_iterations << "\n"
     << "  feas_abs: " << num(so.feas_abs) << "\n"
     << "  feas_rel: " << num(so.feas_rel) << "\n"
     << "  route_nominal_to_qp: " << (so.route_nominal_to_qp ? "true" : "false") << "\n";
  os << "baseline:\n"
     << "  K: " << matrix_text(c.baseline.K) << "\n"
     << "  reference: " << vec_text(c.baseline.reference) << "\n"
     << "  lat_indices: [";
  for (std::size_t i = 0; i < c.baseline.lat_indices.size(); ++i) {
    os << (i ? ", " : "") << c.baseline.lat_indices[i];
  }
  os << "]\n"
     << "  saturate: " << (c.baseline.saturate ? "true" : "false") << "\n"
     << "  Q: " << vec_text(c.baseline.q_weights) << "\n"
     << "  R: " << vec_text(c.baseline.r_weights) << "\n";
  const auto& np = c.nonlinearity.params;
  os << "nonlinearity:\n"
     << "  kind: " << nonlinearity_name(np.kind) << "\n"
     << "  theta: " << (c.nonlinearity.theta ? num(*c.nonlinearity.theta) : std::string("none")) << "\n"
     << "  gain: " << num(np.gain) << "\n"
     << "  frequency: " << num(np.frequency) << "\n"
     << "  phase: " << num(np.phase) << "\n"
     << "  level: " << num(np.level) << "\n"
     << "  seed: " << np.seed << "\n";
  os << "sim:\n"
     << "  dt_ctrl: " << num(c.sim.dt_ctrl) << "\n"
     << "  dt_sim: " << num(c.sim.dt_sim) << "\n"
     << "  horizon: " << num(c.sim.horizon) << "\n"
     << "  x0: " << vec_text(c.sim.x0) << "\n"
     << "  violation_tol_rel: " << num(c.sim.violation_tol_rel) << "\n";
  os << "output:\n"
     << "  trace: " << quoted(c.output.trace) << "\n"
     << "  verdict: " << quoted(c.output.verdict) << "\n"
     << "  annotation_time: " << num(c.output.annotation_time) << "\n";
  return os.str();
}

const std::vector<std::string>& scenario_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out = {"name"};
    for (const auto& sec : kSectionOrder) {
      for (const auto& k : section_keys().at(sec)) out.push_back(sec + "." + k);
    }
    return out;
  }();
  return keys;
}

void apply_override(ScenarioConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "': expected key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  const auto& keys = scenario_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    throw ConfigError("override '" + assignment + "': unknown key '" + key + "'");
  }

  YAML::Node root = YAML::Load(serialize_scenario(c));
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ConfigError("override '" + assignment + "': cannot parse value: " + e.msg);
  }
  if (key == "name") {
    root["name"] = value;
  } else {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    const std::string leaf = key.substr(dot + 1);
    YAML::Node s = root[sec];
    if (sec == "filter" && (leaf == "u_max_deg" || leaf == "u_max_rad")) {
      s.remove("u_max_deg");
      s.remove("u_max_rad");
    }
    if (sec == "plant" && (leaf == "A" || leaf == "B")) {
      for (const char* k : {"mass", "yaw_inertia", "cornering_front", "cornering_rear",
                            "front_axle", "rear_axle", "speed"}) {
        s.remove(k);
      }
      s["model"] = "matrices";
    }
    if (sec == "plant" && leaf == "model" && value == "matrices" && !s["A"]) {
      throw ConfigError("override '" + assignment + "': set plant.A and plant.B instead");
    }
    s[leaf] = value == "none" ? YAML::Node("none") : parsed;
  }
  c = from_node(root, "override '" + assignment + "'");
}

std::string scenario_hash(const ScenarioConfig& c) {
  const std::string text = serialize_scenario(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace rtvcbf
