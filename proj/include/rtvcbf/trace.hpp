#pragma once

#include <string>
#include <vector>

#include "rtvcbf/sim.hpp"

namespace rtvcbf {

/// Column names and units for a trace with n states and m inputs. Vector
/// signals get a _<j> suffix when m > 1; with m = 1 they are plain u0, u, w, c2.
std::vector<StateLabel> trace_columns(const std::vector<StateLabel>& state_labels, int m);

/// Comma-separated text: '#' metadata lines, a column-name line, then one
/// row per control step. Numbers use 17 significant digits.
std::string format_trace(const SimulationTrace& trace);
void write_trace(const SimulationTrace& trace, const std::string& path);

/// Machine-readable summary of a run (JSON object).
std::string verdict_json(const SimulationTrace& trace, const MonitorVerdict& verdict);

SimulationTrace parse_trace(const std::string& text, const std::string& origin = "<string>");
SimulationTrace read_trace(const std::string& path);

}  // namespace rtvcbf
