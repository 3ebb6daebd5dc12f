#include "fgll/synthetic.hpp"

#include "fgll/errors.hpp"
#include "fgll/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace fgll {

namespace {

NodeRecord junction(std::size_t i, Rng& rng) {
  NodeRecord r;
  r.id = fmt::format("N{}", i);
  r.kind = NodeKind::Junction;
  r.elevation = rng.uniform(0.0, 10.0);
  r.base_demand = rng.uniform(2e-3, 8e-3);
  return r;
}

NodeRecord reservoir(std::size_t i) {
  NodeRecord r;
  r.id = fmt::format("N{}", i);
  r.kind = NodeKind::Reservoir;
  r.head = 80.0;
  r.elevation = 80.0;
  return r;
}

PipeRecord pipe(std::size_t k, const std::string& from, const std::string& to, Rng& rng) {
  PipeRecord p;
  p.id = fmt::format("P{}", k);
  p.from = from;
  p.to = to;
  p.length_m = rng.uniform(200.0, 800.0);
  p.diameter_m = rng.uniform(0.2, 0.4);
  p.roughness = rng.uniform(100.0, 140.0);
  return p;
}

std::vector<std::size_t> draw(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  std::vector<std::size_t> out;
  while (out.size() < k && !pool.empty()) {
    const std::size_t i = rng.index(pool.size());
    out.push_back(pool[i]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return out;
}

}  // namespace

NetworkSpec grid_network(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0 || rows * cols < 2) throw Error(ErrorCode::EmptyNetwork, "grid needs at least 2 nodes");
  Rng rng(seed);
  NetworkSpec spec;
  for (std::size_t i = 0; i < rows * cols; ++i) spec.nodes.push_back(i == 0 ? reservoir(i) : junction(i, rng));
  std::size_t k = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      if (c + 1 < cols) spec.pipes.push_back(pipe(k++, spec.nodes[i].id, spec.nodes[i + 1].id, rng));
      if (r + 1 < rows) spec.pipes.push_back(pipe(k++, spec.nodes[i].id, spec.nodes[i + cols].id, rng));
    }
  }
  return spec;
}

NetworkSpec random_network(std::size_t n, std::size_t extra_pipes, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::EmptyNetwork, "random network needs at least 2 nodes");
  Rng rng(seed);
  NetworkSpec spec;
  for (std::size_t i = 0; i < n; ++i) spec.nodes.push_back(i == 0 ? reservoir(i) : junction(i, rng));
  std::set<std::pair<std::size_t, std::size_t>> used;
  std::size_t k = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t parent = rng.index(i);
    used.emplace(parent, i);
    spec.pipes.push_back(pipe(k++, spec.nodes[parent].id, spec.nodes[i].id, rng));
  }
  const std::size_t max_extra = n * (n - 1) / 2 - (n - 1);
  for (std::size_t added = 0; added < std::min(extra_pipes, max_extra);) {
    std::size_t a = rng.index(n);
    std::size_t b = rng.index(n);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!used.emplace(a, b).second) continue;
    spec.pipes.push_back(pipe(k++, spec.nodes[a].id, spec.nodes[b].id, rng));
    ++added;
  }
  return spec;
}

SensorLayout random_layout(const Network& net, double pressure_fraction, double demand_fraction, std::uint64_t seed) {
  Rng rng(seed);
  const auto& res = net.reservoirs();
  auto pick = [&](double fraction) {
    const auto target = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(net.n())));
    std::vector<std::size_t> nodes = res;
    if (target > nodes.size()) {
      auto extra = draw(net.junctions(), target - nodes.size(), rng);
      nodes.insert(nodes.end(), extra.begin(), extra.end());
    }
    return nodes;
  };
  auto p = pick(pressure_fraction);
  auto d = pick(demand_fraction);
  return SensorLayout(net, std::move(p), std::move(d));
}

}  // namespace fgll
