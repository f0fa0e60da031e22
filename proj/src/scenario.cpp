#include "scenkit/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "scenkit/util.hpp"
#include "scenkit/xml.hpp"

namespace scenkit::scen {

namespace {
constexpr double kLaneWidth = 3.5;  // m, matches the OpenDRIVE writer
}

const Entity* ScenarioDoc::find_entity(std::string_view name) const {
  for (const Entity& e : entities) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// xosc parsing
// ---------------------------------------------------------------------------

namespace {

Position parse_position(const xml::Element& pos_el, std::vector<std::string>& warnings) {
  for (const xml::Element& child : pos_el.children) {
    if (child.name == "WorldPosition") {
      Position p;
      p.kind = Position::Kind::world;
      p.x = child.attr_double("x");
      p.y = child.attr_double("y");
      if (child.attr("h")) p.heading = child.attr_double("h");
      return p;
    }
    if (child.name == "LanePosition") {
      Position p;
      p.kind = Position::Kind::road;
      p.road_id = child.attr_required("roadId");
      p.lane = static_cast<int>(child.attr_double("laneId"));
      p.s_offset = child.attr_double("s");
      return p;
    }
    warnings.push_back("unknown position element <" + child.name + ">");
  }
  throw ScenError("xml-parse", "Position has no WorldPosition or LanePosition child");
}

double transition_duration(const xml::Element& action, const char* dynamics_name) {
  const xml::Element* dyn = action.child(dynamics_name);
  if (!dyn) return 0.0;
  if (dyn->attr_or("dynamicsDimension", "time") != "time") {
    throw ScenError("xml-parse", std::string(dynamics_name) +
                                     ": only the time dimension is supported");
  }
  return dyn->attr_double("value");
}

double start_trigger_time(const xml::Element& event) {
  const xml::Element* trigger = event.child("StartTrigger");
  if (!trigger) return 0.0;
  for (const xml::Element* group : trigger->children_named("ConditionGroup")) {
    for (const xml::Element* cond : group->children_named("Condition")) {
      if (const xml::Element* by_value = cond->child("ByValueCondition")) {
        if (const xml::Element* sim = by_value->child("SimulationTimeCondition")) {
          return sim->attr_double("value");
        }
      }
    }
  }
  return 0.0;
}

Maneuver parse_private_action(const xml::Element& action, const std::string& entity,
                              double start_time, std::vector<std::string>& warnings) {
  Maneuver m;
  m.entity = entity;
  m.start_time = start_time;

  if (const xml::Element* lon = action.child("LongitudinalAction")) {
    const xml::Element* speed = lon->child("SpeedAction");
    if (!speed) throw ScenError("xml-parse", "LongitudinalAction without SpeedAction");
    m.type = Maneuver::Type::speed_change;
    m.duration = transition_duration(*speed, "SpeedActionDynamics");
    const xml::Element* target = speed->child("SpeedActionTarget");
    const xml::Element* abs = target ? target->child("AbsoluteTargetSpeed") : nullptr;
    if (!abs) {
      throw ScenError("xml-parse", "SpeedAction needs an AbsoluteTargetSpeed target");
    }
    m.target_speed = abs->attr_double("value");
    return m;
  }

  if (const xml::Element* lat = action.child("LateralAction")) {
    const xml::Element* lane = lat->child("LaneChangeAction");
    if (!lane) throw ScenError("xml-parse", "LateralAction without LaneChangeAction");
    m.type = Maneuver::Type::lane_change;
    m.duration = transition_duration(*lane, "LaneChangeActionDynamics");
    const xml::Element* target = lane->child("LaneChangeTarget");
    const xml::Element* rel = target ? target->child("RelativeTargetLane") : nullptr;
    if (!rel) {
      throw ScenError("xml-parse", "LaneChangeAction needs a RelativeTargetLane target");
    }
    m.lane_offset = static_cast<int>(rel->attr_double("value"));
    return m;
  }

  if (const xml::Element* routing = action.child("RoutingAction")) {
    const xml::Element* follow = routing->child("FollowTrajectoryAction");
    if (!follow) {
      throw ScenError("xml-parse", "RoutingAction without FollowTrajectoryAction");
    }
    const xml::Element* trajectory = follow->child("Trajectory");
    if (!trajectory) {
      if (const xml::Element* ref = follow->child("TrajectoryRef")) {
        trajectory = ref->child("Trajectory");
      }
    }
    if (!trajectory) {
      throw ScenError("xml-parse", "FollowTrajectoryAction without Trajectory");
    }
    const xml::Element* shape = trajectory->child("Shape");
    const xml::Element* polyline = shape ? shape->child("Polyline") : nullptr;
    if (!polyline) throw ScenError("xml-parse", "Trajectory without Shape/Polyline");

    m.type = Maneuver::Type::trajectory_follow;
    std::vector<std::string> vertex_warnings;
    for (const xml::Element* vertex : polyline->children_named("Vertex")) {
      TrajectoryVertex v;
      v.time = vertex->attr_double("time");
      const xml::Element* pos = vertex->child("Position");
      if (!pos) throw ScenError("xml-parse", "Vertex without Position");
      Position p = parse_position(*pos, vertex_warnings);
      if (p.kind != Position::Kind::world) {
        throw ScenError("xml-parse", "trajectory vertices must use WorldPosition");
      }
      v.x = p.x;
      v.y = p.y;
      m.vertices.push_back(v);
    }
    warnings.insert(warnings.end(), vertex_warnings.begin(), vertex_warnings.end());
    if (m.vertices.size() < 2) {
      throw ScenError("xml-parse", "trajectory needs at least 2 vertices");
    }
    for (std::size_t i = 1; i < m.vertices.size(); ++i) {
      if (!(m.vertices[i].time > m.vertices[i - 1].time)) {
        throw ScenError("non-monotone-trajectory",
                        "trajectory vertex timestamps must strictly increase");
      }
    }
    m.duration = m.vertices.back().time - m.vertices.front().time;
    return m;
  }

  throw ScenError("xml-parse", "PrivateAction without a supported action child");
}

}  // namespace

ParsedScenario parse_xosc(std::string_view xml_bytes) {
  xml::Element root;
  try {
    root = xml::parse(xml_bytes);
  } catch (const xml::XmlError& e) {
    throw ScenError("xml-parse", e.what());
  }
  if (root.name != "OpenSCENARIO") {
    throw ScenError("xml-parse",
                    "expected <OpenSCENARIO> root, got <" + root.name + ">");
  }

  ParsedScenario out;
  ScenarioDoc& doc = out.doc;

  const xml::Element* entities = root.child("Entities");
  if (entities) {
    for (const xml::Element* obj : entities->children_named("ScenarioObject")) {
      Entity entity;
      entity.name = obj->attr_required("name");
      if (const xml::Element* vehicle = obj->child("Vehicle")) {
        if (const xml::Element* bbox = vehicle->child("BoundingBox")) {
          if (const xml::Element* dims = bbox->child("Dimensions")) {
            entity.dims.length = dims->attr_double("length");
            entity.dims.width = dims->attr_double("width");
          }
        }
      }
      if (doc.find_entity(entity.name)) {
        throw ScenError("entity-ref", "duplicate entity '" + entity.name + "'");
      }
      doc.entities.push_back(std::move(entity));
    }
  }

  const xml::Element* storyboard = root.child("Storyboard");
  if (!storyboard) {
    throw ScenError("xml-parse", "missing <Storyboard>");
  }

  if (const xml::Element* init = storyboard->child("Init")) {
    if (const xml::Element* actions = init->child("Actions")) {
      for (const xml::Element* priv : actions->children_named("Private")) {
        const std::string& ref = priv->attr_required("entityRef");
        if (!doc.find_entity(ref)) {
          throw ScenError("entity-ref",
                          "init references undeclared entity '" + ref + "'");
        }
        InitState state;
        for (const xml::Element* action : priv->children_named("PrivateAction")) {
          if (const xml::Element* teleport = action->child("TeleportAction")) {
            const xml::Element* pos = teleport->child("Position");
            if (!pos) throw ScenError("xml-parse", "TeleportAction without Position");
            state.position = parse_position(*pos, out.warnings);
          } else if (const xml::Element* lon = action->child("LongitudinalAction")) {
            const xml::Element* speed = lon->child("SpeedAction");
            const xml::Element* target =
                speed ? speed->child("SpeedActionTarget") : nullptr;
            const xml::Element* abs =
                target ? target->child("AbsoluteTargetSpeed") : nullptr;
            if (!abs) {
              throw ScenError("xml-parse", "init SpeedAction needs AbsoluteTargetSpeed");
            }
            state.speed = abs->attr_double("value");
          } else {
            for (const xml::Element& child : action->children) {
              out.warnings.push_back("unknown init action <" + child.name + ">");
            }
          }
        }
        doc.init[ref] = state;
      }
    }
  }

  for (const xml::Element* story : storyboard->children_named("Story")) {
    for (const xml::Element* act : story->children_named("Act")) {
      for (const xml::Element* group : act->children_named("ManeuverGroup")) {
        std::string actor;
        if (const xml::Element* actors = group->child("Actors")) {
          if (const xml::Element* ref = actors->child("EntityRef")) {
            actor = ref->attr_required("entityRef");
          }
        }
        for (const xml::Element* maneuver : group->children_named("Maneuver")) {
          for (const xml::Element* event : maneuver->children_named("Event")) {
            double start = start_trigger_time(*event);
            for (const xml::Element* action : event->children_named("Action")) {
              const xml::Element* priv = action->child("PrivateAction");
              if (!priv) {
                out.warnings.push_back("event action without PrivateAction");
                continue;
              }
              if (actor.empty()) {
                throw ScenError("entity-ref", "maneuver group declares no actor");
              }
              if (!doc.find_entity(actor)) {
                throw ScenError("entity-ref",
                                "maneuver references undeclared entity '" + actor + "'");
              }
              doc.story.push_back(
                  parse_private_action(*priv, actor, start, out.warnings));
            }
          }
        }
      }
    }
  }

  for (const xml::Element& child : root.children) {
    static const std::set<std::string> known{"FileHeader", "Entities", "Storyboard",
                                             "ParameterDeclarations", "CatalogLocations",
                                             "RoadNetwork"};
    if (known.find(child.name) == known.end()) {
      out.warnings.push_back("unknown element <" + child.name + ">");
    }
  }

  return out;
}

// ---------------------------------------------------------------------------
// xosc writing
// ---------------------------------------------------------------------------

namespace {

xml::Element position_element(const Position& p) {
  xml::Element pos("Position");
  if (p.kind == Position::Kind::world) {
    xml::Element world("WorldPosition");
    world.set("x", util::format_double(p.x));
    world.set("y", util::format_double(p.y));
    world.set("h", util::format_double(p.heading));
    pos.add_child(std::move(world));
  } else {
    xml::Element lane("LanePosition");
    lane.set("roadId", p.road_id);
    lane.set("laneId", std::to_string(p.lane));
    lane.set("s", util::format_double(p.s_offset));
    pos.add_child(std::move(lane));
  }
  return pos;
}

xml::Element maneuver_action(const Maneuver& m, int index) {
  xml::Element priv("PrivateAction");
  switch (m.type) {
    case Maneuver::Type::speed_change: {
      xml::Element lon("LongitudinalAction");
      xml::Element speed("SpeedAction");
      xml::Element dyn("SpeedActionDynamics");
      dyn.set("dynamicsShape", "linear");
      dyn.set("value", util::format_double(m.duration));
      dyn.set("dynamicsDimension", "time");
      speed.add_child(std::move(dyn));
      xml::Element target("SpeedActionTarget");
      xml::Element abs("AbsoluteTargetSpeed");
      abs.set("value", util::format_double(m.target_speed));
      target.add_child(std::move(abs));
      speed.add_child(std::move(target));
      lon.add_child(std::move(speed));
      priv.add_child(std::move(lon));
      break;
    }
    case Maneuver::Type::lane_change: {
      xml::Element lat("LateralAction");
      xml::Element lane("LaneChangeAction");
      xml::Element dyn("LaneChangeActionDynamics");
      dyn.set("dynamicsShape", "linear");
      dyn.set("value", util::format_double(m.duration));
      dyn.set("dynamicsDimension", "time");
      lane.add_child(std::move(dyn));
      xml::Element target("LaneChangeTarget");
      xml::Element rel("RelativeTargetLane");
      rel.set("entityRef", m.entity);
      rel.set("value", std::to_string(m.lane_offset));
      target.add_child(std::move(rel));
      lane.add_child(std::move(target));
      lat.add_child(std::move(lane));
      priv.add_child(std::move(lat));
      break;
    }
    case Maneuver::Type::trajectory_follow: {
      xml::Element routing("RoutingAction");
      xml::Element follow("FollowTrajectoryAction");
      xml::Element ref("TrajectoryRef");
      xml::Element trajectory("Trajectory");
      trajectory.set("name", "trajectory_" + std::to_string(index));
      trajectory.set("closed", "false");
      xml::Element shape("Shape");
      xml::Element polyline("Polyline");
      for (const TrajectoryVertex& v : m.vertices) {
        xml::Element vertex("Vertex");
        vertex.set("time", util::format_double(v.time));
        Position p;
        p.kind = Position::Kind::world;
        p.x = v.x;
        p.y = v.y;
        vertex.add_child(position_element(p));
        polyline.add_child(std::move(vertex));
      }
      shape.add_child(std::move(polyline));
      trajectory.add_child(std::move(shape));
      ref.add_child(std::move(trajectory));
      follow.add_child(std::move(ref));
      xml::Element time_ref("TimeReference");
      xml::Element timing("Timing");
      timing.set("domainAbsoluteRelative", "absolute");
      timing.set("scale", "1");
      timing.set("offset", "0");
      time_ref.add_child(std::move(timing));
      follow.add_child(std::move(time_ref));
      xml::Element mode("TrajectoryFollowingMode");
      mode.set("followingMode", "position");
      follow.add_child(std::move(mode));
      routing.add_child(std::move(follow));
      priv.add_child(std::move(routing));
      break;
    }
  }
  return priv;
}

}  // namespace

std::string write_xosc(const ScenarioDoc& doc) {
  xml::Element root("OpenSCENARIO");

  xml::Element header("FileHeader");
  header.set("revMajor", "1");
  header.set("revMinor", "1");
  header.set("description", "scenkit scenario");
  header.set("author", "scenkit");
  root.add_child(std::move(header));

  xml::Element entities("Entities");
  for (const Entity& e : doc.entities) {
    xml::Element obj("ScenarioObject");
    obj.set("name", e.name);
    xml::Element vehicle("Vehicle");
    vehicle.set("name", "car");
    vehicle.set("vehicleCategory", "car");
    xml::Element bbox("BoundingBox");
    xml::Element center("Center");
    center.set("x", "0");
    center.set("y", "0");
    center.set("z", "0.9");
    bbox.add_child(std::move(center));
    xml::Element dims("Dimensions");
    dims.set("width", util::format_double(e.dims.width));
    dims.set("length", util::format_double(e.dims.length));
    dims.set("height", "1.5");
    bbox.add_child(std::move(dims));
    vehicle.add_child(std::move(bbox));
    obj.add_child(std::move(vehicle));
    entities.add_child(std::move(obj));
  }
  root.add_child(std::move(entities));

  xml::Element storyboard("Storyboard");
  xml::Element init("Init");
  xml::Element actions("Actions");
  for (const Entity& e : doc.entities) {
    auto it = doc.init.find(e.name);
    if (it == doc.init.end()) continue;
    xml::Element priv("Private");
    priv.set("entityRef", e.name);

    xml::Element teleport_action("PrivateAction");
    xml::Element teleport("TeleportAction");
    teleport.add_child(position_element(it->second.position));
    teleport_action.add_child(std::move(teleport));
    priv.add_child(std::move(teleport_action));

    xml::Element speed_action("PrivateAction");
    xml::Element lon("LongitudinalAction");
    xml::Element speed("SpeedAction");
    xml::Element dyn("SpeedActionDynamics");
    dyn.set("dynamicsShape", "step");
    dyn.set("value", "0");
    dyn.set("dynamicsDimension", "time");
    speed.add_child(std::move(dyn));
    xml::Element target("SpeedActionTarget");
    xml::Element abs("AbsoluteTargetSpeed");
    abs.set("value", util::format_double(it->second.speed));
    target.add_child(std::move(abs));
    speed.add_child(std::move(target));
    lon.add_child(std::move(speed));
    speed_action.add_child(std::move(lon));
    priv.add_child(std::move(speed_action));

    actions.add_child(std::move(priv));
  }
  init.add_child(std::move(actions));
  storyboard.add_child(std::move(init));

  xml::Element story("Story");
  story.set("name", "story");
  xml::Element act("Act");
  act.set("name", "act");
  for (std::size_t i = 0; i < doc.story.size(); ++i) {
    const Maneuver& m = doc.story[i];
    xml::Element group("ManeuverGroup");
    group.set("maximumExecutionCount", "1");
    group.set("name", "group_" + std::to_string(i));
    xml::Element actors("Actors");
    actors.set("selectTriggeringEntities", "false");
    xml::Element entity_ref("EntityRef");
    entity_ref.set("entityRef", m.entity);
    actors.add_child(std::move(entity_ref));
    group.add_child(std::move(actors));

    xml::Element maneuver("Maneuver");
    maneuver.set("name", "maneuver_" + std::to_string(i));
    xml::Element event("Event");
    event.set("name", "event_" + std::to_string(i));
    event.set("priority", "overwrite");
    xml::Element action("Action");
    action.set("name", "action_" + std::to_string(i));
    action.add_child(maneuver_action(m, static_cast<int>(i)));
    event.add_child(std::move(action));

    xml::Element trigger("StartTrigger");
    xml::Element cond_group("ConditionGroup");
    xml::Element cond("Condition");
    cond.set("name", "start_" + std::to_string(i));
    cond.set("delay", "0");
    cond.set("conditionEdge", "rising");
    xml::Element by_value("ByValueCondition");
    xml::Element sim("SimulationTimeCondition");
    sim.set("value", util::format_double(m.start_time));
    sim.set("rule", "greaterThan");
    by_value.add_child(std::move(sim));
    cond.add_child(std::move(by_value));
    cond_group.add_child(std::move(cond));
    trigger.add_child(std::move(cond_group));
    event.add_child(std::move(trigger));

    maneuver.add_child(std::move(event));
    group.add_child(std::move(maneuver));
    act.add_child(std::move(group));
  }
  story.add_child(std::move(act));
  storyboard.add_child(std::move(story));
  root.add_child(std::move(storyboard));

  return xml::write_document(root);
}

// ---------------------------------------------------------------------------
// trajectory extraction
// ---------------------------------------------------------------------------

namespace {

struct ResolvedStart {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

ResolvedStart resolve_position(const Position& p, const roadnet::RoadGraph* net) {
  if (p.kind == Position::Kind::world) {
    return {p.x, p.y, p.heading};
  }
  if (!net) {
    throw ScenError("dangling-road-ref",
                    "road-relative position but no road network given");
  }
  const roadnet::Edge* edge = nullptr;
  for (const roadnet::Edge& e : net->edges) {
    if (e.id == p.road_id) {
      edge = &e;
      break;
    }
  }
  if (!edge) {
    throw ScenError("dangling-road-ref",
                    "road '" + p.road_id + "' not found in network");
  }
  if (std::abs(p.lane) > edge->lane_count) {
    throw ScenError("dangling-lane-ref",
                    "lane " + std::to_string(p.lane) + " outside road '" +
                        p.road_id + "' with " + std::to_string(edge->lane_count) +
                        " lanes");
  }
  if (p.s_offset < 0.0 || p.s_offset > edge->length) {
    throw ScenError("dangling-road-ref",
                    "s offset " + util::format_double(p.s_offset) +
                        " outside road '" + p.road_id + "' of length " +
                        util::format_double(edge->length));
  }
  const roadnet::Node* from = net->find_node(edge->from);
  const roadnet::Node* to = net->find_node(edge->to);
  double dx = to->x - from->x;
  double dy = to->y - from->y;
  double len = std::hypot(dx, dy);
  if (len == 0.0) {
    throw ScenError("dangling-road-ref", "road '" + p.road_id + "' has zero extent");
  }
  double ux = dx / len, uy = dy / len;
  // Left-perpendicular; negative lane ids sit right of the reference line.
  double px = -uy, py = ux;
  double lateral = 0.0;
  if (p.lane < 0) lateral = -((-p.lane) - 0.5) * kLaneWidth;
  if (p.lane > 0) lateral = (p.lane - 0.5) * kLaneWidth;
  ResolvedStart out;
  out.x = from->x + ux * p.s_offset + px * lateral;
  out.y = from->y + uy * p.s_offset + py * lateral;
  out.heading = std::atan2(uy, ux);
  return out;
}

struct EntitySim {
  const Entity* entity = nullptr;
  double x = 0.0, y = 0.0, heading = 0.0, speed = 0.0;

  // Active speed change.
  bool accelerating = false;
  double accel = 0.0;
  double accel_until = 0.0;
  double accel_target = 0.0;

  // Active lane change (lateral velocity frozen at maneuver start).
  bool shifting = false;
  double shift_vx = 0.0, shift_vy = 0.0;
  double shift_until = 0.0;

  // Active trajectory follow.
  const Maneuver* following = nullptr;

  std::vector<Maneuver> maneuvers;  // sorted by start time
  std::size_t next_maneuver = 0;
};

void activate(EntitySim& sim, const Maneuver& m, double now) {
  switch (m.type) {
    case Maneuver::Type::speed_change:
      if (m.duration > 0.0) {
        sim.accelerating = true;
        sim.accel = (m.target_speed - sim.speed) / m.duration;
        sim.accel_until = now + m.duration;
        sim.accel_target = m.target_speed;
      } else {
        sim.speed = m.target_speed;
      }
      break;
    case Maneuver::Type::lane_change: {
      double total = m.lane_offset * kLaneWidth;
      if (m.duration > 0.0) {
        double rate = total / m.duration;
        sim.shifting = true;
        sim.shift_vx = -std::sin(sim.heading) * rate;
        sim.shift_vy = std::cos(sim.heading) * rate;
        sim.shift_until = now + m.duration;
      } else {
        sim.x += -std::sin(sim.heading) * total;
        sim.y += std::cos(sim.heading) * total;
      }
      break;
    }
    case Maneuver::Type::trajectory_follow:
      sim.following = &m;
      break;
  }
}

/// Interpolated position and segment velocity at absolute time t.
void trajectory_state(const Maneuver& m, double t, double& x, double& y, double& vx,
                      double& vy, double& heading) {
  const std::vector<TrajectoryVertex>& verts = m.vertices;
  std::size_t seg = 0;
  while (seg + 2 < verts.size() && t >= verts[seg + 1].time) ++seg;
  const TrajectoryVertex& a = verts[seg];
  const TrajectoryVertex& b = verts[seg + 1];
  double span = b.time - a.time;
  double u = std::clamp((t - a.time) / span, 0.0, 1.0);
  x = a.x + (b.x - a.x) * u;
  y = a.y + (b.y - a.y) * u;
  vx = (b.x - a.x) / span;
  vy = (b.y - a.y) / span;
  if (vx != 0.0 || vy != 0.0) heading = std::atan2(vy, vx);
}

/// Integrates from `from` to `to`, splitting at internal dynamics
/// boundaries so constant-acceleration segments never overshoot.
void advance(EntitySim& sim, double from, double to) {
  double now = from;
  while (now < to - 1e-15) {
    double next = to;
    if (sim.following) {
      next = std::min(next, sim.following->vertices.back().time);
    } else {
      if (sim.accelerating) next = std::min(next, sim.accel_until);
      if (sim.shifting) next = std::min(next, sim.shift_until);
    }
    if (next <= now) next = to;  // boundary already behind us

    if (sim.following) {
      const Maneuver& m = *sim.following;
      double t_eval = std::min(next, m.vertices.back().time);
      double vx, vy;
      trajectory_state(m, t_eval, sim.x, sim.y, vx, vy, sim.heading);
      sim.speed = std::hypot(vx, vy);
      if (next >= m.vertices.back().time - 1e-12) sim.following = nullptr;
    } else {
      double tau = next - now;
      double a = sim.accelerating ? sim.accel : 0.0;
      double ds = sim.speed * tau + 0.5 * a * tau * tau;
      sim.x += std::cos(sim.heading) * ds;
      sim.y += std::sin(sim.heading) * ds;
      sim.speed += a * tau;
      if (sim.accelerating && next >= sim.accel_until - 1e-12) {
        sim.speed = sim.accel_target;
        sim.accelerating = false;
      }
      if (sim.shifting) {
        sim.x += sim.shift_vx * tau;
        sim.y += sim.shift_vy * tau;
        if (next >= sim.shift_until - 1e-12) sim.shifting = false;
      }
    }
    now = next;
  }
}

traj::Sample snapshot(const EntitySim& sim, double t) {
  traj::Sample s;
  s.t = t;
  s.x = sim.x;
  s.y = sim.y;
  s.heading = sim.heading;
  s.vx = sim.speed * std::cos(sim.heading);
  s.vy = sim.speed * std::sin(sim.heading);
  if (sim.following) {
    double x, y, h = sim.heading;
    trajectory_state(*sim.following, t, x, y, s.vx, s.vy, h);
    s.heading = h;
  } else if (sim.shifting) {
    s.vx += sim.shift_vx;
    s.vy += sim.shift_vy;
  }
  s.length = sim.entity->dims.length;
  s.width = sim.entity->dims.width;
  return s;
}

}  // namespace

traj::TrajectorySet extract_trajectories(const ScenarioDoc& doc,
                                         const roadnet::RoadGraph* net, double dt,
                                         double horizon) {
  if (!(dt > 0.0)) throw ScenError("trajectory-extraction", "dt must be positive");
  if (horizon < 0.0) {
    throw ScenError("trajectory-extraction", "horizon must be nonnegative");
  }
  if (doc.entities.empty()) {
    throw ScenError("trajectory-extraction", "scenario declares no entities");
  }
  if (!doc.story.empty()) {
    double first_start = doc.story[0].start_time;
    for (const Maneuver& m : doc.story) first_start = std::min(first_start, m.start_time);
    if (horizon < first_start) {
      throw ScenError("horizon", "horizon " + util::format_double(horizon) +
                                     " ends before the first maneuver starts at " +
                                     util::format_double(first_start));
    }
  }

  const std::size_t n_steps =
      static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));

  std::vector<std::pair<std::string, std::vector<traj::Sample>>> tracks;
  for (const Entity& entity : doc.entities) {
    EntitySim sim;
    sim.entity = &entity;
    auto it = doc.init.find(entity.name);
    if (it != doc.init.end()) {
      ResolvedStart start = resolve_position(it->second.position, net);
      sim.x = start.x;
      sim.y = start.y;
      sim.heading = start.heading;
      sim.speed = it->second.speed;
    }
    for (const Maneuver& m : doc.story) {
      if (m.entity == entity.name) sim.maneuvers.push_back(m);
    }
    std::stable_sort(sim.maneuvers.begin(), sim.maneuvers.end(),
                     [](const Maneuver& a, const Maneuver& b) {
                       return a.start_time < b.start_time;
                     });

    std::vector<traj::Sample> samples;
    samples.reserve(n_steps + 1);
    double now = 0.0;
    // Activate anything starting at t=0 before the first snapshot.
    while (sim.next_maneuver < sim.maneuvers.size() &&
           sim.maneuvers[sim.next_maneuver].start_time <= now) {
      activate(sim, sim.maneuvers[sim.next_maneuver], now);
      ++sim.next_maneuver;
    }
    samples.push_back(snapshot(sim, 0.0));

    for (std::size_t k = 1; k <= n_steps; ++k) {
      double target = static_cast<double>(k) * dt;
      while (sim.next_maneuver < sim.maneuvers.size() &&
             sim.maneuvers[sim.next_maneuver].start_time < target) {
        double at = std::max(sim.maneuvers[sim.next_maneuver].start_time, now);
        advance(sim, now, at);
        now = at;
        activate(sim, sim.maneuvers[sim.next_maneuver], now);
        ++sim.next_maneuver;
      }
      advance(sim, now, target);
      now = target;
      while (sim.next_maneuver < sim.maneuvers.size() &&
             sim.maneuvers[sim.next_maneuver].start_time <= now) {
        activate(sim, sim.maneuvers[sim.next_maneuver], now);
        ++sim.next_maneuver;
      }
      samples.push_back(snapshot(sim, target));
    }
    tracks.emplace_back(entity.name, std::move(samples));
  }

  // Ego is the entity named "ego" when present, else the first entity.
  std::size_t ego_index = 0;
  for (std::size_t i = 0; i < doc.entities.size(); ++i) {
    if (doc.entities[i].name == "ego") {
      ego_index = i;
      break;
    }
  }

  traj::TrajectorySet ts;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    traj::AgentTrack track;
    track.agent_id = tracks[i].first;
    track.role = i == ego_index ? traj::AgentTrack::Role::ego
                                : traj::AgentTrack::Role::other;
    track.samples = std::move(tracks[i].second);
    if (i == ego_index) {
      ts.ego = std::move(track);
    } else {
      ts.others.push_back(std::move(track));
    }
  }
  ts.validate();
  return ts;
}

// ---------------------------------------------------------------------------
// bundle validation
// ---------------------------------------------------------------------------

namespace {
double auto_horizon(const ScenarioDoc& doc) {
  double end = 0.0;
  for (const Maneuver& m : doc.story) {
    double mend = m.start_time + m.duration;
    if (m.type == Maneuver::Type::trajectory_follow && !m.vertices.empty()) {
      mend = std::max(mend, m.vertices.back().time);
    }
    end = std::max(end, mend);
  }
  return std::max(10.0, end + 1.0);
}
}  // namespace

ScenarioBundle validate_bundle(const BundleInput& input, const ExtractOptions& options) {
  ScenarioBundle bundle;
  bundle.name = input.name;

  auto missing = [&](const char* kind) {
    bundle.issues.push_back({"missing-file", std::string(kind) + " file is absent"});
  };

  if (input.net_bytes) {
    ++bundle.files_present;
    try {
      bundle.net = roadnet::parse_sumo_net(*input.net_bytes);
    } catch (const xml::XmlError& e) {
      ++bundle.files_syntax_error;
      bundle.issues.push_back({"xml-parse", std::string("net: ") + e.what()});
    } catch (const roadnet::RoadNetError& e) {
      bundle.issues.push_back({"dangling-ref", std::string("net: ") + e.what()});
    }
  } else {
    missing("net");
  }

  if (input.xodr_bytes) {
    ++bundle.files_present;
    try {
      roadnet::parse_opendrive(*input.xodr_bytes);
      bundle.xodr = *input.xodr_bytes;
    } catch (const xml::XmlError& e) {
      ++bundle.files_syntax_error;
      bundle.issues.push_back({"xml-parse", std::string("xodr: ") + e.what()});
    } catch (const roadnet::RoadNetError& e) {
      bundle.issues.push_back({"dangling-ref", std::string("xodr: ") + e.what()});
    }
  } else {
    missing("xodr");
  }

  std::optional<ParsedScenario> parsed;
  if (input.xosc_bytes) {
    ++bundle.files_present;
    try {
      parsed = parse_xosc(*input.xosc_bytes);
      bundle.xosc = parsed->doc;
    } catch (const ScenError& e) {
      if (e.code() == "xml-parse") ++bundle.files_syntax_error;
      bundle.issues.push_back({e.code(), std::string("xosc: ") + e.what()});
    }
  } else {
    missing("xosc");
  }

  // Cross-references and executability, only meaningful once everything parsed.
  if (bundle.issues.empty() && bundle.net && parsed) {
    try {
      double horizon = options.horizon >= 0.0 ? options.horizon
                                              : auto_horizon(parsed->doc);
      extract_trajectories(parsed->doc, &*bundle.net, options.dt, horizon);
    } catch (const ScenError& e) {
      bundle.issues.push_back({e.code(), std::string("extract: ") + e.what()});
    } catch (const traj::TrajError& e) {
      bundle.issues.push_back({"trajectory-extraction",
                               std::string("extract: ") + e.what()});
    }
  }

  bundle.valid = bundle.issues.empty();
  return bundle;
}

BundleInput read_bundle_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ScenError("missing-file", "bundle directory not found: " + dir.string());
  }
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());

  BundleInput input;
  input.name = dir.filename().string();
  auto ends_with = [](const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (const std::string& name : names) {
    if (!input.net_bytes && ends_with(name, ".net.xml")) {
      input.net_bytes = util::read_file(dir / name);
    } else if (!input.xodr_bytes && ends_with(name, ".xodr")) {
      input.xodr_bytes = util::read_file(dir / name);
    } else if (!input.xosc_bytes && ends_with(name, ".xosc")) {
      input.xosc_bytes = util::read_file(dir / name);
    }
  }
  return input;
}

CorpusStats corpus_stats(const std::vector<ScenarioBundle>& bundles) {
  if (bundles.empty()) {
    throw ScenError("trajectory-extraction", "corpus_stats: empty bundle list");
  }
  CorpusStats stats;
  stats.total = static_cast<int>(bundles.size());
  for (const ScenarioBundle& b : bundles) {
    if (b.valid) ++stats.valid_bundles;
    stats.total_files += b.files_present;
    stats.syntax_error_files += b.files_syntax_error;
  }
  stats.gsr = 100.0 * stats.valid_bundles / static_cast<double>(stats.total);
  stats.aer = stats.total_files == 0
                  ? 0.0
                  : 100.0 * stats.syntax_error_files /
                        static_cast<double>(stats.total_files);
  return stats;
}

}  // namespace scenkit::scen
