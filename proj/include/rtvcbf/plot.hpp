#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rtvcbf/barrier.hpp"
#include "rtvcbf/sim.hpp"

namespace rtvcbf {

enum class PlotKind { kTrajectory, kSteering, kBoundaryDistance };

std::string_view plot_kind_name(PlotKind k);
std::optional<PlotKind> parse_plot_kind(std::string_view name);

struct LabeledTrace {
  std::string label;
  const SimulationTrace* trace = nullptr;
};

struct PlotOptions {
  MovingCircleBarrier::Params obstacle;
  double annotation_time = 1.1;
  std::optional<double> u_max;  // radians; drawn as +-limit lines on steering plots
  int circle_points = 121;
};

/// Self-contained Vega-Lite v5 JSON document. Throws ContractError when the
/// traces were produced from different scenarios.
std::string plot_document(const std::vector<LabeledTrace>& traces, PlotKind kind,
                          const PlotOptions& opts);

void emit_plot(const std::vector<LabeledTrace>& traces, PlotKind kind, const PlotOptions& opts,
               const std::string& path);

/// Display label for an architecture in plots and tables.
std::string architecture_label(Architecture a);

}  // namespace rtvcbf
