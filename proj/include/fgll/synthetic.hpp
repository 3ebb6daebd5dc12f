#pragma once

// Seeded synthetic networks and sensor layouts for tests and benchmarks.

#include "fgll/network.hpp"

#include <cstdint>

namespace fgll {

/// rows x cols grid of nodes; node 0 (a corner) is the reservoir. Pipe
/// lengths, diameters, roughness, elevations and demands are drawn from
/// `seed`.
NetworkSpec grid_network(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Random spanning tree on n nodes (node 0 is the reservoir) plus
/// `extra_pipes` chords closing loops.
NetworkSpec random_network(std::size_t n, std::size_t extra_pipes, std::uint64_t seed);

/// Every reservoir plus round(fraction * n) - reservoirs further nodes of
/// each kind, drawn without replacement.
SensorLayout random_layout(const Network& net, double pressure_fraction, double demand_fraction, std::uint64_t seed);

}  // namespace fgll
