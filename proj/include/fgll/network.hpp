#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fgll {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Hazen-Williams flow exponent.
inline constexpr double kFlowExponent = 1.852;
/// SI Hazen-Williams constant (length and diameter in m, flow in m^3/s).
inline constexpr double kHazenWilliamsConstant = 10.674;
inline constexpr double kDiameterExponent = 4.87;

enum class NodeKind { Junction, Reservoir };

// Raw, unvalidated description of a network as produced by the parsers.
struct NodeRecord {
  std::string id;
  double elevation = 0.0;
  NodeKind kind = NodeKind::Junction;
  double head = 0.0;         // reservoirs only
  double base_demand = 0.0;  // m^3/s, junctions only
  std::optional<double> x;
  std::optional<double> y;

  bool operator==(const NodeRecord&) const = default;
};

struct PipeRecord {
  std::string id;
  std::string from;
  std::string to;
  double length_m = 0.0;
  double diameter_m = 0.0;
  double roughness = 0.0;

  bool operator==(const PipeRecord&) const = default;
};

struct NetworkSpec {
  std::vector<NodeRecord> nodes;
  std::vector<PipeRecord> pipes;
  // Optional default sensor placement, by node id.
  std::vector<std::string> pressure_sensors;
  std::vector<std::string> demand_sensors;

  bool operator==(const NetworkSpec&) const = default;
};

struct Node {
  std::string id;
  double elevation = 0.0;
  NodeKind kind = NodeKind::Junction;
  double reservoir_head = 0.0;
  double base_demand = 0.0;

  bool is_reservoir() const { return kind == NodeKind::Reservoir; }
};

struct Pipe {
  std::string id;
  std::size_t source = 0;
  std::size_t sink = 0;
  double length = 0.0;     // rho, m
  double roughness = 0.0;  // xi, Hazen-Williams C
  double diameter = 0.0;   // psi, m
};

/// Immutable, validated water distribution network. Node and pipe order is
/// the order of appearance in the input and is used for every vector.
class Network {
 public:
  Network(std::vector<Node> nodes, std::vector<Pipe> pipes);

  std::size_t n() const { return nodes_.size(); }
  std::size_t m() const { return pipes_.size(); }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Pipe>& pipes() const { return pipes_; }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const Pipe& pipe(std::size_t k) const { return pipes_.at(k); }

  std::optional<std::size_t> find_node(const std::string& id) const;
  /// Throws UnknownNode.
  std::size_t node_index(const std::string& id) const;

  const std::vector<std::size_t>& reservoirs() const { return reservoirs_; }
  const std::vector<std::size_t>& junctions() const { return junctions_; }

  /// Pipe indices incident to node i.
  const std::vector<std::size_t>& incident_pipes(std::size_t i) const { return incident_.at(i); }

  /// Returns a copy with replaced pipe attributes (same topology).
  Network with_pipes(std::vector<Pipe> pipes) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Pipe> pipes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> reservoirs_;
  std::vector<std::size_t> junctions_;
  std::vector<std::vector<std::size_t>> incident_;
};

Network build_network(const NetworkSpec& spec);

/// Hazen-Williams resistance tau = 10.674 rho / (xi^1.852 psi^4.87).
double resistance(const Pipe& pipe);

struct StructMatrices {
  SparseMatrix W;  // weighted adjacency, w_ij = 1/rho_k
  SparseMatrix D;  // weighted degree (diagonal)
  SparseMatrix L;  // D - W
  Vector degree;   // diagonal of D
  Vector tau;      // diagonal of T
  double nu = kFlowExponent;
};

StructMatrices struct_matrices(const Network& net);

/// Per-pipe sign relative to the stored orientation: +1 when the source head
/// is greater than or equal to the sink head, -1 otherwise.
std::vector<int> pipe_orientation(const Network& net, const Vector& h);

/// m x n incidence with +1 at the higher-head endpoint, so that B h >= 0.
SparseMatrix signed_incidence(const Network& net, const Vector& h);

class SensorLayout {
 public:
  /// Node indices are sorted into network order. Every reservoir must be
  /// present in both lists.
  SensorLayout(const Network& net, std::vector<std::size_t> pressure_nodes,
               std::vector<std::size_t> demand_nodes);

  static SensorLayout all_nodes(const Network& net);

  std::size_t n() const { return n_; }
  std::size_t n_s() const { return pressure_.size(); }
  std::size_t n_d() const { return demand_.size(); }
  std::size_t n_u() const { return unmetered_.size(); }

  const std::vector<std::size_t>& pressure_nodes() const { return pressure_; }
  const std::vector<std::size_t>& demand_nodes() const { return demand_; }
  const std::vector<std::size_t>& unmetered_nodes() const { return unmetered_; }

  const SparseMatrix& S_p() const { return s_p_; }
  const SparseMatrix& S_d() const { return s_d_; }
  const SparseMatrix& S_u() const { return s_u_; }

  bool operator==(const SensorLayout& other) const {
    return n_ == other.n_ && pressure_ == other.pressure_ && demand_ == other.demand_;
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> pressure_;
  std::vector<std::size_t> demand_;
  std::vector<std::size_t> unmetered_;
  SparseMatrix s_p_;
  SparseMatrix s_d_;
  SparseMatrix s_u_;
};

/// Row-selection matrix picking `rows` out of the n x n identity.
SparseMatrix selection_matrix(const std::vector<std::size_t>& rows, std::size_t n);

/// Shortest-path distance along pipes. Paths are ranked by length first and
/// hop count second; `pipes` is the hop count of the chosen path.
struct PipeDistance {
  double km = 0.0;
  std::size_t pipes = 0;

  bool operator==(const PipeDistance&) const = default;
};

/// Single-source distances to every node (Dijkstra).
std::vector<PipeDistance> pipe_distances_from(const Network& net, std::size_t source);

/// All-pairs table, filled eagerly so it can be shared read-only.
class PipeDistances {
 public:
  explicit PipeDistances(const Network& net);
  const PipeDistance& operator()(std::size_t i, std::size_t j) const { return rows_.at(i).at(j); }
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::vector<PipeDistance>> rows_;
};

}  // namespace fgll
