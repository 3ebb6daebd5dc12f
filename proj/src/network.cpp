#include "fgll/network.hpp"

#include "fgll/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

namespace fgll {

namespace {

void check_positive(double value, const std::string& what, const std::string& pipe_id) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(ErrorCode::InvalidAttribute,
                "pipe '" + pipe_id + "' has non-positive " + what + " (" + std::to_string(value) + ")");
  }
}

bool is_connected(std::size_t n, const std::vector<std::vector<std::size_t>>& incident,
                  const std::vector<Pipe>& pipes) {
  if (n == 0) return true;
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t k : incident[i]) {
      const std::size_t j = pipes[k].source == i ? pipes[k].sink : pipes[k].source;
      if (!seen[j]) {
        seen[j] = true;
        ++visited;
        stack.push_back(j);
      }
    }
  }
  return visited == n;
}

}  // namespace

Network::Network(std::vector<Node> nodes, std::vector<Pipe> pipes)
    : nodes_(std::move(nodes)), pipes_(std::move(pipes)) {
  if (nodes_.empty()) throw Error(ErrorCode::EmptyNetwork, "network has no nodes");
  if (pipes_.empty()) throw Error(ErrorCode::EmptyNetwork, "network has no pipes");

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].id, i).second) {
      throw Error(ErrorCode::DuplicateId, "node id '" + nodes_[i].id + "'");
    }
    (nodes_[i].is_reservoir() ? reservoirs_ : junctions_).push_back(i);
  }
  if (reservoirs_.empty()) throw Error(ErrorCode::NoReservoir, "network needs at least one reservoir");

  std::unordered_map<std::string, std::size_t> pipe_ids;
  incident_.resize(nodes_.size());
  for (std::size_t k = 0; k < pipes_.size(); ++k) {
    const Pipe& p = pipes_[k];
    if (!pipe_ids.emplace(p.id, k).second) throw Error(ErrorCode::DuplicateId, "pipe id '" + p.id + "'");
    if (p.source >= nodes_.size() || p.sink >= nodes_.size()) {
      throw Error(ErrorCode::DanglingEndpoint, "pipe '" + p.id + "' endpoint out of range");
    }
    if (p.source == p.sink) throw Error(ErrorCode::InvalidAttribute, "pipe '" + p.id + "' is a self-loop");
    check_positive(p.length, "length", p.id);
    check_positive(p.roughness, "roughness", p.id);
    check_positive(p.diameter, "diameter", p.id);
    incident_[p.source].push_back(k);
    incident_[p.sink].push_back(k);
  }
  if (!is_connected(nodes_.size(), incident_, pipes_)) {
    throw Error(ErrorCode::DisconnectedGraph, "network graph is not connected");
  }
}

std::optional<std::size_t> Network::find_node(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Network::node_index(const std::string& id) const {
  if (auto i = find_node(id)) return *i;
  throw Error(ErrorCode::UnknownNode, "node id '" + id + "'");
}

Network Network::with_pipes(std::vector<Pipe> pipes) const {
  if (pipes.size() != pipes_.size()) throw Error(ErrorCode::DimensionMismatch, "pipe count changed");
  for (std::size_t k = 0; k < pipes.size(); ++k) {
    if (pipes[k].source != pipes_[k].source || pipes[k].sink != pipes_[k].sink) {
      throw Error(ErrorCode::InvalidAttribute, "pipe '" + pipes[k].id + "' topology changed");
    }
  }
  return Network(nodes_, std::move(pipes));
}

Network build_network(const NetworkSpec& spec) {
  if (spec.nodes.empty() && spec.pipes.empty()) throw Error(ErrorCode::EmptyNetwork, "empty network description");

  std::vector<Node> nodes;
  nodes.reserve(spec.nodes.size());
  std::unordered_map<std::string, std::size_t> index;
  for (const NodeRecord& r : spec.nodes) {
    if (!index.emplace(r.id, nodes.size()).second) throw Error(ErrorCode::DuplicateId, "node id '" + r.id + "'");
    Node node;
    node.id = r.id;
    node.elevation = r.elevation;
    node.kind = r.kind;
    node.reservoir_head = r.kind == NodeKind::Reservoir ? r.head : 0.0;
    node.base_demand = r.kind == NodeKind::Junction ? r.base_demand : 0.0;
    nodes.push_back(std::move(node));
  }

  std::vector<Pipe> pipes;
  pipes.reserve(spec.pipes.size());
  for (const PipeRecord& r : spec.pipes) {
    auto from = index.find(r.from);
    auto to = index.find(r.to);
    if (from == index.end() || to == index.end()) {
      const std::string& missing = from == index.end() ? r.from : r.to;
      throw Error(ErrorCode::DanglingEndpoint, "pipe '" + r.id + "' references unknown node '" + missing + "'");
    }
    pipes.push_back(Pipe{r.id, from->second, to->second, r.length_m, r.roughness, r.diameter_m});
  }
  return Network(std::move(nodes), std::move(pipes));
}

double resistance(const Pipe& pipe) {
  check_positive(pipe.length, "length", pipe.id);
  check_positive(pipe.roughness, "roughness", pipe.id);
  check_positive(pipe.diameter, "diameter", pipe.id);
  return kHazenWilliamsConstant * pipe.length /
         (std::pow(pipe.roughness, kFlowExponent) * std::pow(pipe.diameter, kDiameterExponent));
}

StructMatrices struct_matrices(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.n());
  StructMatrices s;
  s.degree = Vector::Zero(n);
  s.tau.resize(static_cast<Eigen::Index>(net.m()));

  std::vector<Eigen::Triplet<double>> w;
  w.reserve(2 * net.m());
  for (std::size_t k = 0; k < net.m(); ++k) {
    const Pipe& p = net.pipe(k);
    const double weight = 1.0 / p.length;
    const auto i = static_cast<Eigen::Index>(p.source);
    const auto j = static_cast<Eigen::Index>(p.sink);
    w.emplace_back(i, j, weight);
    w.emplace_back(j, i, weight);
    s.tau(static_cast<Eigen::Index>(k)) = resistance(p);
  }
  // Parallel pipes sum into a single weight.
  s.W.resize(n, n);
  s.W.setFromTriplets(w.begin(), w.end());
  for (Eigen::Index c = 0; c < s.W.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(s.W, c); it; ++it) s.degree(it.row()) += it.value();
  }
  s.D.resize(n, n);
  std::vector<Eigen::Triplet<double>> d;
  for (Eigen::Index i = 0; i < n; ++i) d.emplace_back(i, i, s.degree(i));
  s.D.setFromTriplets(d.begin(), d.end());
  s.L = s.D - s.W;
  s.L.makeCompressed();
  return s;
}

std::vector<int> pipe_orientation(const Network& net, const Vector& h) {
  if (static_cast<std::size_t>(h.size()) != net.n()) {
    throw Error(ErrorCode::DimensionMismatch, "head vector size " + std::to_string(h.size()));
  }
  std::vector<int> sign(net.m());
  for (std::size_t k = 0; k < net.m(); ++k) {
    const Pipe& p = net.pipe(k);
    sign[k] = h(static_cast<Eigen::Index>(p.source)) >= h(static_cast<Eigen::Index>(p.sink)) ? 1 : -1;
  }
  return sign;
}

SparseMatrix signed_incidence(const Network& net, const Vector& h) {
  const std::vector<int> sign = pipe_orientation(net, h);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * net.m());
  for (std::size_t k = 0; k < net.m(); ++k) {
    const Pipe& p = net.pipe(k);
    const auto row = static_cast<Eigen::Index>(k);
    t.emplace_back(row, static_cast<Eigen::Index>(p.source), static_cast<double>(sign[k]));
    t.emplace_back(row, static_cast<Eigen::Index>(p.sink), static_cast<double>(-sign[k]));
  }
  SparseMatrix b(static_cast<Eigen::Index>(net.m()), static_cast<Eigen::Index>(net.n()));
  b.setFromTriplets(t.begin(), t.end());
  return b;
}

SparseMatrix selection_matrix(const std::vector<std::size_t>& rows, std::size_t n) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    t.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(rows[r]), 1.0);
  }
  SparseMatrix s(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

SensorLayout::SensorLayout(const Network& net, std::vector<std::size_t> pressure_nodes,
                           std::vector<std::size_t> demand_nodes)
    : n_(net.n()), pressure_(std::move(pressure_nodes)), demand_(std::move(demand_nodes)) {
  auto normalize = [&](std::vector<std::size_t>& v, const char* what) {
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end()) {
      throw Error(ErrorCode::InvalidLayout, std::string("repeated ") + what + " sensor node");
    }
    if (!v.empty() && v.back() >= n_) throw Error(ErrorCode::InvalidLayout, std::string(what) + " node out of range");
  };
  normalize(pressure_, "pressure");
  normalize(demand_, "demand");

  for (std::size_t r : net.reservoirs()) {
    const bool in_p = std::binary_search(pressure_.begin(), pressure_.end(), r);
    const bool in_d = std::binary_search(demand_.begin(), demand_.end(), r);
    if (!in_p || !in_d) {
      throw Error(ErrorCode::InvalidLayout,
                  "reservoir '" + net.node(r).id + "' must carry both a pressure and a demand sensor");
    }
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (!std::binary_search(pressure_.begin(), pressure_.end(), i)) unmetered_.push_back(i);
  }
  s_p_ = selection_matrix(pressure_, n_);
  s_d_ = selection_matrix(demand_, n_);
  s_u_ = selection_matrix(unmetered_, n_);
}

SensorLayout SensorLayout::all_nodes(const Network& net) {
  std::vector<std::size_t> all(net.n());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return SensorLayout(net, all, all);
}

std::vector<PipeDistance> pipe_distances_from(const Network& net, std::size_t source) {
  if (source >= net.n()) throw Error(ErrorCode::UnknownNode, "source index " + std::to_string(source));
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr auto kNoHops = std::numeric_limits<std::size_t>::max();

  std::vector<double> dist(net.n(), kInf);
  std::vector<std::size_t> hops(net.n(), kNoHops);
  std::vector<bool> done(net.n(), false);
  using Entry = std::tuple<double, std::size_t, std::size_t>;  // (km, hops, node)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  dist[source] = 0.0;
  hops[source] = 0;
  queue.emplace(0.0, 0, source);

  while (!queue.empty()) {
    auto [d, hop, i] = queue.top();
    queue.pop();
    if (done[i]) continue;
    done[i] = true;
    for (std::size_t k : net.incident_pipes(i)) {
      const Pipe& p = net.pipe(k);
      const std::size_t j = p.source == i ? p.sink : p.source;
      const double nd = d + p.length / 1000.0;
      const std::size_t nh = hop + 1;
      if (std::tie(nd, nh) < std::tie(dist[j], hops[j])) {
        dist[j] = nd;
        hops[j] = nh;
        queue.emplace(nd, nh, j);
      }
    }
  }

  std::vector<PipeDistance> out(net.n());
  for (std::size_t j = 0; j < net.n(); ++j) {
    if (!done[j]) throw Error(ErrorCode::DisconnectedGraph, "node '" + net.node(j).id + "' unreachable");
    out[j] = PipeDistance{dist[j], hops[j]};
  }
  return out;
}

PipeDistances::PipeDistances(const Network& net) {
  rows_.reserve(net.n());
  for (std::size_t i = 0; i < net.n(); ++i) rows_.push_back(pipe_distances_from(net, i));
}

}  // namespace fgll
