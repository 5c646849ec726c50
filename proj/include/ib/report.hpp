#pragma once

#include <string>

#include "ib/diagnostics.hpp"
#include "ib/landscape.hpp"

namespace ib {

// Serialization of result objects. Every writer is byte-deterministic for
// equal inputs: numbers go through the shortest round-trip formatter and
// JSON keys keep a fixed order.

void write_report_csv(const std::string& path, const RobustnessReport& report);
void write_report_json(const std::string& path, const RobustnessReport& report);

void write_restart_curve_csv(const std::string& path, const RestartCurve& curve);

// Grid rows as "u,v,loss"; the header JSON carries directions, epsilon,
// resolution, extent, the fallback flag, and the ball-boundary vertices.
void write_landscape_csv(const std::string& path, const LandscapeGrid& grid);
void write_landscape_json(const std::string& path, const LandscapeGrid& grid);

std::string report_csv_string(const RobustnessReport& report);

}  // namespace ib
