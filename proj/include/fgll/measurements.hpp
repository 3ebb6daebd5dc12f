#pragma once

#include "fgll/network.hpp"

#include <vector>

namespace fgll {

/// Sensor readings over a window of instants. Pressure entries are
/// hydraulic heads (m) at layout.pressure_nodes(); demand entries are
/// m^3/s at layout.demand_nodes().
struct MeasurementSet {
  SensorLayout layout;
  std::vector<Vector> pressure;
  std::vector<Vector> demand;

  std::size_t T() const { return pressure.size(); }
};

}  // namespace fgll
