#include "rtvcbf/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "rtvcbf/errors.hpp"

namespace rtvcbf {

using nlohmann::json;

std::string_view plot_kind_name(PlotKind k) {
  switch (k) {
    case PlotKind::kTrajectory: return "trajectory";
    case PlotKind::kSteering: return "steering";
    case PlotKind::kBoundaryDistance: return "boundary-distance";
  }
  return "unknown";
}

std::optional<PlotKind> parse_plot_kind(std::string_view name) {
  for (auto k : {PlotKind::kTrajectory, PlotKind::kSteering, PlotKind::kBoundaryDistance}) {
    if (plot_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::string architecture_label(Architecture a) {
  switch (a) {
    case Architecture::kBaselineOnly: return "LQR";
    case Architecture::kTvcbf: return "TVCBF";
    case Architecture::kRtvcbf: return "RTVCBF";
  }
  return "?";
}

namespace {

json line_layer(const std::string& x, const std::string& y, const std::string& x_title,
                const std::string& y_title) {
  return {
      {"mark", {{"type", "line"}, {"clip", true}}},
      {"encoding",
       {{"x", {{"field", x}, {"type", "quantitative"}, {"title", x_title}}},
        {"y", {{"field", y}, {"type", "quantitative"}, {"title", y_title}}},
        {"color", {{"field", "series"}, {"type", "nominal"}, {"title", nullptr}}},
        {"order", {{"field", "k"}, {"type", "quantitative"}}}}},
  };
}

json circle_values(const MovingCircleBarrier::Params& p, double t, double radius, const std::string& name,
                   int points) {
  json values = json::array();
  const double ce = p.lateral_velocity * t, cs = p.longitudinal_velocity * t;
  for (int i = 0; i < points; ++i) {
    const double a = 2.0 * kPi * i / (points - 1);
    values.push_back({{"s", cs + radius * std::cos(a)}, {"e", ce + radius * std::sin(a)},
                      {"k", i}, {"shape", name}});
  }
  return values;
}

}  // namespace

std::string plot_document(const std::vector<LabeledTrace>& traces, PlotKind kind,
                          const PlotOptions& o) {
  if (traces.empty()) throw ContractError("emit_plot: no traces");
  for (const auto& lt : traces) {
    if (lt.trace == nullptr) throw ContractError("emit_plot: null trace");
    if (lt.trace->meta.config_hash != traces.front().trace->meta.config_hash) {
      throw ContractError("emit_plot: trace '" + lt.label + "' comes from a different scenario (" +
                          lt.trace->meta.config_hash + " vs " +
                          traces.front().trace->meta.config_hash + ")");
    }
  }
  const int ie = o.obstacle.lateral_index, is = o.obstacle.longitudinal_index;
  const double clearance = o.obstacle.clearance_multiplier * o.obstacle.radius;

  json data = json::array();
  for (const auto& lt : traces) {
    long k = 0;
    for (const auto& r : lt.trace->rows) {
      json row = {{"series", lt.label}, {"k", k++}, {"t", r.t}};
      switch (kind) {
        case PlotKind::kTrajectory:
          row["s"] = r.x(is);
          row["e"] = r.x(ie);
          break;
        case PlotKind::kSteering:
          row["u_deg"] = r.u.size() ? rad_to_deg(r.u(0)) : 0.0;
          break;
        case PlotKind::kBoundaryDistance:
          row["s"] = r.x(is);
          row["clearance"] = std::sqrt(std::max(0.0, r.h + clearance * clearance)) - clearance;
          break;
      }
      data.push_back(std::move(row));
    }
  }

  json doc = {
      {"$schema", "https://vega.github.io/schema/vega-lite/v5.json"},
      {"width", 480},
      {"height", 240},
  };
  json layers = json::array();

  switch (kind) {
    case PlotKind::kTrajectory: {
      doc["title"] = "Trajectory";
      json l = line_layer("s", "e", "s [m]", "e [m]");
      l["data"] = {{"values", data}};
      layers.push_back(l);
      for (double t : {0.0, o.annotation_time}) {
        char name[64];
        std::snprintf(name, sizeof name, "obstacle t=%.3g s", t);
        json circ = json::array();
        for (auto& v : circle_values(o.obstacle, t, o.obstacle.radius, name, o.circle_points)) circ.push_back(v);
        char cname[64];
        std::snprintf(cname, sizeof cname, "clearance t=%.3g s", t);
        for (auto& v : circle_values(o.obstacle, t, clearance, cname, o.circle_points)) circ.push_back(v);
        layers.push_back({
            {"data", {{"values", circ}}},
            {"mark", {{"type", "line"}, {"strokeDash", {4, 3}}, {"color", "gray"}}},
            {"encoding",
             {{"x", {{"field", "s"}, {"type", "quantitative"}}},
              {"y", {{"field", "e"}, {"type", "quantitative"}}},
              {"detail", {{"field", "shape"}, {"type", "nominal"}}},
              {"order", {{"field", "k"}, {"type", "quantitative"}}}}},
        });
      }
      doc["usermeta"] = {{"annotation_time", o.annotation_time}};
      break;
    }
    case PlotKind::kSteering: {
      doc["title"] = "Steering Angle";
      json l = line_layer("t", "u_deg", "t [s]", "steering [deg]");
      l["data"] = {{"values", data}};
      layers.push_back(l);
      if (o.u_max) {
        const double lim = rad_to_deg(*o.u_max);
        layers.push_back({
            {"data", {{"values", json::array({{{"limit", lim}}, {{"limit", -lim}}})}}},
            {"mark", {{"type", "rule"}, {"strokeDash", {6, 4}}, {"color", "black"}}},
            {"encoding", {{"y", {{"field", "limit"}, {"type", "quantitative"}}}}},
        });
      }
      break;
    }
    case PlotKind::kBoundaryDistance: {
      doc["title"] = "Distance to Boundary";
      json l = line_layer("s", "clearance", "s [m]", "distance to boundary [m]");
      l["data"] = {{"values", data}};
      layers.push_back(l);
      layers.push_back({
          {"data", {{"values", json::array({{{"zero", 0.0}}})}}},
          {"mark", {{"type", "rule"}, {"color", "red"}}},
          {"encoding", {{"y", {{"field", "zero"}, {"type", "quantitative"}}}}},
      });
      break;
    }
  }
  doc["layer"] = layers;
  return doc.dump(1) + "\n";
}

void emit_plot(const std::vector<LabeledTrace>& traces, PlotKind kind, const PlotOptions& opts,
               const std::string& path) {
  const std::string text = plot_document(traces, kind, opts);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << text;
}

}  // namespace rtvcbf
