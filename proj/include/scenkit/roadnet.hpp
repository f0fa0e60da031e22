#pragma once

/**
 * Road-network graph model with a SUMO .net.xml subset reader, an
 * OpenDRIVE 1.6 subset writer/reader, degree-based node classification and
 * the network reconstruction error metrics (intersection count error, lane
 * count error, connectivity error; all percentages in [0, 100], 0 = perfect).
 */

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scenkit::roadnet {

class RoadNetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Node {
  std::string id;
  double x = 0.0;
  double y = 0.0;
};

struct Edge {
  std::string id;
  std::string from;
  std::string to;
  int lane_count = 1;
  double length = 0.0;
};

struct RoadGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  bool directed = true;

  const Node* find_node(std::string_view id) const;
  /// Undirected degree: number of incident edges (self-loops count twice).
  std::unordered_map<std::string, int> degrees() const;
  /// Throws on dangling edge endpoints or non-positive lane counts.
  void validate() const;
};

enum class NodeClass { true_intersection, through_node, dead_end };

struct ClassCounts {
  int true_intersections = 0;  // degree >= 3
  int through_nodes = 0;       // degree == 2
  int dead_ends = 0;           // degree == 1
};

struct Classification {
  std::map<std::string, NodeClass> by_node;
  ClassCounts counts;
  int isolated_dropped = 0;  // degree-0 nodes have no class and are dropped
};

struct LaneComparison {
  double lce = 0.0;
  /// Per-edge lane-count differences (candidate - gt), present only when the
  /// two graphs have the same number of edges. Edges pair up by
  /// lexicographic order of endpoint coordinates rounded to a 0.1 m grid.
  std::optional<std::vector<int>> per_segment_lane_diffs;
};

struct NetworkComparison {
  double ice = 0.0;
  double lce = 0.0;
  double ce = 0.0;
  int segment_count_gt = 0;
  int segment_count_sumo = 0;
  std::optional<std::vector<int>> per_segment_lane_diffs;
};

// ---------------------------------------------------------------------------
// file formats
// ---------------------------------------------------------------------------

/**
 * SUMO network subset: <net> root with <junction id x y> nodes and
 * <edge id from to> elements whose <lane> children set the lane count
 * (an edge without lane children counts as one lane). Internal junctions
 * (type="internal") and internal edges (function="internal") are skipped.
 * Edge length comes from a length attribute when present, otherwise from
 * the Euclidean distance between endpoints.
 */
RoadGraph parse_sumo_net(std::string_view xml_bytes);

std::string write_sumo_net(const RoadGraph& graph);

/**
 * OpenDRIVE 1.6 subset: one <road> per edge with a single straight-line
 * planView geometry from node positions, a laneSection with the edge's
 * lane count as same-direction driving lanes, and a <junction> per
 * true intersection connecting every ordered pair of incident roads.
 * Errors on zero-length edges and on isolated (degree-0) nodes, which the
 * format cannot represent.
 */
std::string write_opendrive(const RoadGraph& graph);

/// Reads back the subset written by write_opendrive. Nodes are recovered by
/// clustering geometry endpoints within 1e-3 m.
RoadGraph parse_opendrive(std::string_view xml_bytes);

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

Classification classify_nodes(const RoadGraph& graph);

/// Clipped relative error of true-intersection counts, in percent.
/// Errors when the ground truth has no true intersection.
double intersection_count_error(const RoadGraph& gt, const RoadGraph& candidate);

/// Clipped relative error of mean per-edge lane counts, in percent.
/// Errors when either graph has no edges.
LaneComparison lane_count_error(const RoadGraph& gt, const RoadGraph& candidate);

/**
 * Share of ground-truth connected components without a size-matched
 * counterpart in the candidate, in percent. When both graphs are a single
 * component the networks agree on full connectivity and the error is 0
 * regardless of node counts. Two empty graphs compare as 0 by convention.
 */
double connectivity_error(const RoadGraph& gt, const RoadGraph& candidate);

NetworkComparison compare_networks(const RoadGraph& gt, const RoadGraph& candidate);

/// Undirected connected component sizes, descending.
std::vector<int> component_sizes(const RoadGraph& graph);

}  // namespace scenkit::roadnet
