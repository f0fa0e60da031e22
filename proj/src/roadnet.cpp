#include "scenkit/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scenkit/util.hpp"
#include "scenkit/xml.hpp"

namespace scenkit::roadnet {

const Node* RoadGraph::find_node(std::string_view id) const {
  for (const Node& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::unordered_map<std::string, int> RoadGraph::degrees() const {
  std::unordered_map<std::string, int> deg;
  for (const Node& n : nodes) deg[n.id] = 0;
  for (const Edge& e : edges) {
    deg[e.from] += 1;
    deg[e.to] += 1;
  }
  return deg;
}

void RoadGraph::validate() const {
  std::unordered_map<std::string, int> seen;
  for (const Node& n : nodes) {
    if (++seen[n.id] > 1) throw RoadNetError("duplicate node id '" + n.id + "'");
  }
  for (const Edge& e : edges) {
    if (!find_node(e.from)) {
      throw RoadNetError("edge '" + e.id + "' references missing node '" + e.from + "'");
    }
    if (!find_node(e.to)) {
      throw RoadNetError("edge '" + e.id + "' references missing node '" + e.to + "'");
    }
    if (e.lane_count < 1) {
      throw RoadNetError("edge '" + e.id + "' has lane_count < 1");
    }
  }
}

// ---------------------------------------------------------------------------
// SUMO net subset
// ---------------------------------------------------------------------------

RoadGraph parse_sumo_net(std::string_view xml_bytes) {
  xml::Element root = xml::parse(xml_bytes);
  if (root.name != "net") {
    throw RoadNetError("expected <net> root element, got <" + root.name + ">");
  }

  RoadGraph graph;
  for (const xml::Element* j : root.children_named("junction")) {
    if (j->attr_or("type", "") == "internal") continue;
    Node node;
    node.id = j->attr_required("id");
    node.x = j->attr_double("x");
    node.y = j->attr_double("y");
    graph.nodes.push_back(std::move(node));
  }

  for (const xml::Element* e : root.children_named("edge")) {
    if (e->attr_or("function", "") == "internal") continue;
    Edge edge;
    edge.id = e->attr_required("id");
    edge.from = e->attr_required("from");
    edge.to = e->attr_required("to");
    std::size_t lanes = e->count_children("lane");
    edge.lane_count = lanes == 0 ? 1 : static_cast<int>(lanes);

    if (e->attr("length")) {
      edge.length = e->attr_double("length");
    } else {
      const Node* from = nullptr;
      const Node* to = nullptr;
      for (const Node& n : graph.nodes) {
        if (n.id == edge.from) from = &n;
        if (n.id == edge.to) to = &n;
      }
      if (from && to) {
        edge.length = std::hypot(to->x - from->x, to->y - from->y);
      }
    }
    graph.edges.push_back(std::move(edge));
  }

  graph.validate();
  return graph;
}

std::string write_sumo_net(const RoadGraph& graph) {
  graph.validate();
  xml::Element net("net");
  net.set("version", "1.9");
  for (const Node& n : graph.nodes) {
    xml::Element j("junction");
    j.set("id", n.id);
    j.set("type", "priority");
    j.set("x", util::format_double(n.x));
    j.set("y", util::format_double(n.y));
    net.add_child(std::move(j));
  }
  for (const Edge& e : graph.edges) {
    xml::Element edge("edge");
    edge.set("id", e.id);
    edge.set("from", e.from);
    edge.set("to", e.to);
    edge.set("length", util::format_double(e.length));
    for (int i = 0; i < e.lane_count; ++i) {
      xml::Element lane("lane");
      lane.set("id", e.id + "_" + std::to_string(i));
      lane.set("index", std::to_string(i));
      lane.set("speed", "13.89");
      lane.set("length", util::format_double(e.length));
      edge.add_child(std::move(lane));
    }
    net.add_child(std::move(edge));
  }
  return xml::write_document(net);
}

// ---------------------------------------------------------------------------
// OpenDRIVE subset
// ---------------------------------------------------------------------------

std::string write_opendrive(const RoadGraph& graph) {
  graph.validate();
  auto deg = graph.degrees();
  for (const Node& n : graph.nodes) {
    if (deg[n.id] == 0) {
      throw RoadNetError("isolated node '" + n.id +
                         "' cannot be represented in the road format");
    }
  }
  for (const Edge& e : graph.edges) {
    if (!(e.length > 0.0)) {
      throw RoadNetError("edge '" + e.id + "' has zero length");
    }
  }

  std::unordered_map<std::string, const Node*> node_by_id;
  for (const Node& n : graph.nodes) node_by_id[n.id] = &n;

  xml::Element root("OpenDRIVE");
  xml::Element header("header");
  header.set("revMajor", "1");
  header.set("revMinor", "6");
  header.set("name", "scenkit");
  header.set("vendor", "scenkit");
  root.add_child(std::move(header));

  // Road ids are 1-based in input edge order; junction ids follow after.
  std::unordered_map<std::string, int> road_id;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    road_id[graph.edges[i].id] = static_cast<int>(i) + 1;
  }

  for (const Edge& e : graph.edges) {
    const Node* from = node_by_id.at(e.from);
    const Node* to = node_by_id.at(e.to);

    xml::Element road("road");
    road.set("name", e.id);
    road.set("id", std::to_string(road_id[e.id]));
    road.set("length", util::format_double(e.length));
    road.set("junction", "-1");

    xml::Element plan_view("planView");
    xml::Element geometry("geometry");
    geometry.set("s", "0");
    geometry.set("x", util::format_double(from->x));
    geometry.set("y", util::format_double(from->y));
    geometry.set("hdg", util::format_double(std::atan2(to->y - from->y, to->x - from->x)));
    geometry.set("length", util::format_double(e.length));
    geometry.add_child(xml::Element("line"));
    plan_view.add_child(std::move(geometry));
    road.add_child(std::move(plan_view));

    xml::Element lanes("lanes");
    xml::Element section("laneSection");
    section.set("s", "0");
    xml::Element center("center");
    xml::Element center_lane("lane");
    center_lane.set("id", "0");
    center_lane.set("type", "none");
    center_lane.set("level", "false");
    center.add_child(std::move(center_lane));
    section.add_child(std::move(center));
    xml::Element right("right");
    for (int i = 1; i <= e.lane_count; ++i) {
      xml::Element lane("lane");
      lane.set("id", std::to_string(-i));
      lane.set("type", "driving");
      lane.set("level", "false");
      xml::Element width("width");
      width.set("sOffset", "0");
      width.set("a", "3.5");
      width.set("b", "0");
      width.set("c", "0");
      width.set("d", "0");
      lane.add_child(std::move(width));
      right.add_child(std::move(lane));
    }
    section.add_child(std::move(right));
    lanes.add_child(std::move(section));
    road.add_child(std::move(lanes));
    root.add_child(std::move(road));
  }

  // A junction per true intersection: one connection per ordered pair of
  // distinct incident roads.
  Classification cls = classify_nodes(graph);
  int next_junction_id = static_cast<int>(graph.edges.size()) + 1;
  int connection_id = 0;
  for (const Node& n : graph.nodes) {
    auto it = cls.by_node.find(n.id);
    if (it == cls.by_node.end() || it->second != NodeClass::true_intersection) {
      continue;
    }
    std::vector<int> incident;
    for (const Edge& e : graph.edges) {
      if (e.from == n.id || e.to == n.id) incident.push_back(road_id[e.id]);
    }
    xml::Element junction("junction");
    junction.set("id", std::to_string(next_junction_id++));
    junction.set("name", n.id);
    for (int in_road : incident) {
      for (int out_road : incident) {
        if (in_road == out_road) continue;
        xml::Element conn("connection");
        conn.set("id", std::to_string(connection_id++));
        conn.set("incomingRoad", std::to_string(in_road));
        conn.set("connectingRoad", std::to_string(out_road));
        conn.set("contactPoint", "start");
        junction.add_child(std::move(conn));
      }
    }
    root.add_child(std::move(junction));
  }

  return xml::write_document(root);
}

RoadGraph parse_opendrive(std::string_view xml_bytes) {
  xml::Element root = xml::parse(xml_bytes);
  if (root.name != "OpenDRIVE") {
    throw RoadNetError("expected <OpenDRIVE> root element, got <" + root.name + ">");
  }

  RoadGraph graph;
  std::vector<std::pair<double, double>> points;  // cluster representatives

  auto node_for = [&](double x, double y) -> std::string {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (std::hypot(points[i].first - x, points[i].second - y) <= 1e-3) {
        return graph.nodes[i].id;
      }
    }
    points.emplace_back(x, y);
    Node n;
    n.id = "n" + std::to_string(points.size());
    n.x = x;
    n.y = y;
    graph.nodes.push_back(n);
    return graph.nodes.back().id;
  };

  for (const xml::Element* road : root.children_named("road")) {
    const xml::Element* plan_view = road->child("planView");
    if (!plan_view) {
      throw RoadNetError("road '" + road->attr_or("id", "?") + "' missing planView");
    }
    const xml::Element* geometry = plan_view->child("geometry");
    if (!geometry) {
      throw RoadNetError("road '" + road->attr_or("id", "?") + "' missing geometry");
    }
    double x = geometry->attr_double("x");
    double y = geometry->attr_double("y");
    double hdg = geometry->attr_double("hdg");
    double length = geometry->attr_double("length");

    Edge edge;
    edge.id = road->attr_or("name", "r" + road->attr_or("id", "?"));
    edge.length = length;
    edge.from = node_for(x, y);
    edge.to = node_for(x + length * std::cos(hdg), y + length * std::sin(hdg));

    int driving = 0;
    if (const xml::Element* lanes = road->child("lanes")) {
      if (const xml::Element* section = lanes->child("laneSection")) {
        for (const char* side : {"left", "right"}) {
          if (const xml::Element* group = section->child(side)) {
            for (const xml::Element* lane : group->children_named("lane")) {
              if (lane->attr_or("type", "driving") == "driving") ++driving;
            }
          }
        }
      }
    }
    edge.lane_count = driving == 0 ? 1 : driving;
    graph.edges.push_back(std::move(edge));
  }

  graph.validate();
  return graph;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

Classification classify_nodes(const RoadGraph& graph) {
  Classification out;
  auto deg = graph.degrees();
  for (const Node& n : graph.nodes) {
    int d = deg[n.id];
    if (d == 0) {
      ++out.isolated_dropped;
      continue;
    }
    NodeClass c = d >= 3   ? NodeClass::true_intersection
                  : d == 2 ? NodeClass::through_node
                           : NodeClass::dead_end;
    out.by_node.emplace(n.id, c);
    switch (c) {
      case NodeClass::true_intersection: ++out.counts.true_intersections; break;
      case NodeClass::through_node: ++out.counts.through_nodes; break;
      case NodeClass::dead_end: ++out.counts.dead_ends; break;
    }
  }
  return out;
}

namespace {
double clipped_relative_error_percent(double gt, double candidate) {
  return std::min(std::fabs(gt - candidate) / gt, 1.0) * 100.0;
}
}  // namespace

double intersection_count_error(const RoadGraph& gt, const RoadGraph& candidate) {
  int n_gt = classify_nodes(gt).counts.true_intersections;
  int n_candidate = classify_nodes(candidate).counts.true_intersections;
  if (n_gt == 0) {
    throw RoadNetError("intersection_count_error: ground truth has no true intersection");
  }
  return clipped_relative_error_percent(n_gt, n_candidate);
}

LaneComparison lane_count_error(const RoadGraph& gt, const RoadGraph& candidate) {
  if (gt.edges.empty() || candidate.edges.empty()) {
    throw RoadNetError("lane_count_error: graph has no edges");
  }
  auto mean_lanes = [](const RoadGraph& g) {
    double sum = 0.0;
    for (const Edge& e : g.edges) sum += e.lane_count;
    return sum / static_cast<double>(g.edges.size());
  };

  LaneComparison out;
  out.lce = clipped_relative_error_percent(mean_lanes(gt), mean_lanes(candidate));

  if (gt.edges.size() == candidate.edges.size()) {
    // Pair edges by endpoint coordinates rounded to a 0.1 m grid.
    auto sorted_lanes = [](const RoadGraph& g) {
      std::unordered_map<std::string, const Node*> by_id;
      for (const Node& n : g.nodes) by_id[n.id] = &n;
      using Key = std::tuple<long long, long long, long long, long long>;
      std::vector<std::pair<Key, int>> keyed;
      for (const Edge& e : g.edges) {
        const Node* a = by_id.at(e.from);
        const Node* b = by_id.at(e.to);
        keyed.push_back({Key{std::llround(a->x * 10.0), std::llround(a->y * 10.0),
                             std::llround(b->x * 10.0), std::llround(b->y * 10.0)},
                         e.lane_count});
      }
      std::sort(keyed.begin(), keyed.end());
      std::vector<int> lanes;
      lanes.reserve(keyed.size());
      for (const auto& [k, v] : keyed) lanes.push_back(v);
      return lanes;
    };
    std::vector<int> gt_lanes = sorted_lanes(gt);
    std::vector<int> cand_lanes = sorted_lanes(candidate);
    std::vector<int> diffs(gt_lanes.size());
    for (std::size_t i = 0; i < gt_lanes.size(); ++i) {
      diffs[i] = cand_lanes[i] - gt_lanes[i];
    }
    out.per_segment_lane_diffs = std::move(diffs);
  }
  return out;
}

std::vector<int> component_sizes(const RoadGraph& graph) {
  // Union-find over node indices.
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) index[graph.nodes[i].id] = i;

  std::vector<std::size_t> parent(graph.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  for (const Edge& e : graph.edges) {
    std::size_t a = find(index.at(e.from));
    std::size_t b = find(index.at(e.to));
    if (a != b) parent[a] = b;
  }

  std::unordered_map<std::size_t, int> sizes;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) sizes[find(i)] += 1;
  std::vector<int> out;
  out.reserve(sizes.size());
  for (const auto& [root, count] : sizes) out.push_back(count);
  std::sort(out.rbegin(), out.rend());
  return out;
}

double connectivity_error(const RoadGraph& gt, const RoadGraph& candidate) {
  std::vector<int> gt_sizes = component_sizes(gt);
  std::vector<int> cand_sizes = component_sizes(candidate);
  if (gt_sizes.empty()) return 0.0;  // empty ground truth, by convention

  // Both single-component: full connectivity is preserved.
  if (gt_sizes.size() == 1 && cand_sizes.size() == 1) return 0.0;

  // Otherwise count gt components with an exact size counterpart.
  std::map<int, int> available;
  for (int s : cand_sizes) available[s] += 1;
  int matched = 0;
  for (int s : gt_sizes) {
    auto it = available.find(s);
    if (it != available.end() && it->second > 0) {
      --it->second;
      ++matched;
    }
  }
  return (1.0 - static_cast<double>(matched) / static_cast<double>(gt_sizes.size())) * 100.0;
}

NetworkComparison compare_networks(const RoadGraph& gt, const RoadGraph& candidate) {
  NetworkComparison out;
  out.ice = intersection_count_error(gt, candidate);
  LaneComparison lanes = lane_count_error(gt, candidate);
  out.lce = lanes.lce;
  out.per_segment_lane_diffs = std::move(lanes.per_segment_lane_diffs);
  out.ce = connectivity_error(gt, candidate);
  out.segment_count_gt = static_cast<int>(gt.edges.size());
  out.segment_count_sumo = static_cast<int>(candidate.edges.size());
  return out;
}

}  // namespace scenkit::roadnet
