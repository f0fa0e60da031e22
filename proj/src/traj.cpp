#include "scenkit/traj.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <sstream>

#include <json.hpp>

#include "scenkit/util.hpp"

namespace scenkit::traj {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSpeedEps = 1e-6;  // m/s; below this TTC is infinite
constexpr double kGridTol = 1e-9;   // s, timestamp comparison between tracks
}  // namespace

void AgentTrack::validate() const {
  if (samples.empty()) {
    throw TrajError("track '" + agent_id + "' has no samples");
  }
  for (const Sample& s : samples) {
    if (!(s.length > 0.0) || !(s.width > 0.0)) {
      throw TrajError("track '" + agent_id + "' has non-positive vehicle dimensions");
    }
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].t > samples[i - 1].t)) {
      throw TrajError("track '" + agent_id + "' timestamps not strictly increasing");
    }
  }
  if (samples.size() >= 3) {
    double dt = samples[1].t - samples[0].t;
    for (std::size_t i = 2; i < samples.size(); ++i) {
      if (std::fabs((samples[i].t - samples[i - 1].t) - dt) > 1e-6) {
        throw TrajError("track '" + agent_id + "' timestep is not uniform");
      }
    }
  }
}

void TrajectorySet::validate() const {
  ego.validate();
  if (ego.role != AgentTrack::Role::ego) {
    throw TrajError("ego track '" + ego.agent_id + "' does not carry the ego role");
  }
  for (const AgentTrack& other : others) {
    other.validate();
    if (other.role == AgentTrack::Role::ego) {
      throw TrajError("more than one ego track ('" + other.agent_id + "')");
    }
    if (other.samples.size() != ego.samples.size()) {
      throw TrajError("track '" + other.agent_id + "' is not on the ego timestamp grid");
    }
    for (std::size_t i = 0; i < other.samples.size(); ++i) {
      if (std::fabs(other.samples[i].t - ego.samples[i].t) > kGridTol) {
        throw TrajError("track '" + other.agent_id + "' is not on the ego timestamp grid");
      }
    }
  }
}

void CriticalityConfig::validate() const {
  for (double v : {tau_ttc, tau_pet, theta_c, theta_ttc, theta_pet, theta_d,
                   delta_safety, d_min_floor, interaction_range, conflict_cell}) {
    if (!(v > 0.0)) throw TrajError("criticality config thresholds must be positive");
  }
  for (int w : {w_collision, w_ttc, w_pet, w_distance}) {
    if (w < 0) throw TrajError("criticality config weights must be nonnegative");
  }
}

std::string to_string(EmergencyLevel level) {
  switch (level) {
    case EmergencyLevel::critical: return "Critical";
    case EmergencyLevel::high: return "High";
    case EmergencyLevel::moderate: return "Moderate";
    case EmergencyLevel::low: return "Low";
  }
  return "Low";
}

// ---------------------------------------------------------------------------
// displacement errors
// ---------------------------------------------------------------------------

namespace {
void check_same_grid(const AgentTrack& a, const AgentTrack& b) {
  if (a.samples.size() != b.samples.size()) {
    throw TrajError("tracks '" + a.agent_id + "' and '" + b.agent_id +
                    "' have different sample counts");
  }
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    if (std::fabs(a.samples[i].t - b.samples[i].t) > kGridTol) {
      throw TrajError("tracks '" + a.agent_id + "' and '" + b.agent_id +
                      "' are not on the same timestamp grid");
    }
  }
}
}  // namespace

double ade(const AgentTrack& predicted, const AgentTrack& reference) {
  predicted.validate();
  reference.validate();
  check_same_grid(predicted, reference);
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.samples.size(); ++i) {
    sum += std::hypot(predicted.samples[i].x - reference.samples[i].x,
                      predicted.samples[i].y - reference.samples[i].y);
  }
  return sum / static_cast<double>(predicted.samples.size());
}

double fde(const AgentTrack& predicted, const AgentTrack& reference) {
  predicted.validate();
  reference.validate();
  check_same_grid(predicted, reference);
  const Sample& p = predicted.samples.back();
  const Sample& r = reference.samples.back();
  return std::hypot(p.x - r.x, p.y - r.y);
}

// ---------------------------------------------------------------------------
// geometry
// ---------------------------------------------------------------------------

namespace {
struct Vec2 {
  double x, y;
};

std::array<Vec2, 4> rect_corners(const Sample& s) {
  double c = std::cos(s.heading), sn = std::sin(s.heading);
  Vec2 fwd{c * s.length / 2.0, sn * s.length / 2.0};
  Vec2 side{-sn * s.width / 2.0, c * s.width / 2.0};
  return {Vec2{s.x + fwd.x + side.x, s.y + fwd.y + side.y},
          Vec2{s.x + fwd.x - side.x, s.y + fwd.y - side.y},
          Vec2{s.x - fwd.x + side.x, s.y - fwd.y + side.y},
          Vec2{s.x - fwd.x - side.x, s.y - fwd.y - side.y}};
}

std::pair<double, double> project(const std::array<Vec2, 4>& corners, Vec2 axis) {
  double lo = kInf, hi = -kInf;
  for (const Vec2& c : corners) {
    double p = c.x * axis.x + c.y * axis.y;
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  return {lo, hi};
}

double center_distance(const Sample& a, const Sample& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}
}  // namespace

bool rectangles_intersect(const Sample& a, const Sample& b) {
  auto ca = rect_corners(a);
  auto cb = rect_corners(b);
  std::array<Vec2, 4> axes = {
      Vec2{std::cos(a.heading), std::sin(a.heading)},
      Vec2{-std::sin(a.heading), std::cos(a.heading)},
      Vec2{std::cos(b.heading), std::sin(b.heading)},
      Vec2{-std::sin(b.heading), std::cos(b.heading)}};
  for (const Vec2& axis : axes) {
    auto [alo, ahi] = project(ca, axis);
    auto [blo, bhi] = project(cb, axis);
    // Strict: rectangles that merely touch do not intersect.
    if (!(ahi > blo && bhi > alo)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// criticality metrics
// ---------------------------------------------------------------------------

namespace {
void require_others(const TrajectorySet& ts, const char* op) {
  if (ts.others.empty()) {
    throw TrajError(std::string(op) + ": scenario has no non-ego agents");
  }
}
}  // namespace

double collision_probability(const TrajectorySet& ts) {
  ts.validate();
  require_others(ts, "collision_probability");
  const std::size_t steps = ts.step_count();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    for (const AgentTrack& other : ts.others) {
      if (rectangles_intersect(ts.ego.samples[i], other.samples[i])) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(steps);
}

double near_miss_probability(const TrajectorySet& ts, const CriticalityConfig& cfg) {
  ts.validate();
  cfg.validate();
  require_others(ts, "near_miss_probability");
  const std::size_t steps = ts.step_count();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    double dmin = kInf;
    for (const AgentTrack& other : ts.others) {
      dmin = std::min(dmin, center_distance(ts.ego.samples[i], other.samples[i]));
    }
    if (dmin < ts.ego.samples[i].length + cfg.delta_safety) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(steps);
}

std::vector<TtcSeries> ttc_series(const TrajectorySet& ts, const CriticalityConfig& cfg) {
  ts.validate();
  cfg.validate();
  require_others(ts, "ttc_series");
  std::vector<TtcSeries> out;
  out.reserve(ts.others.size());
  for (const AgentTrack& other : ts.others) {
    TtcSeries series;
    series.other_id = other.agent_id;
    series.ttc.reserve(ts.step_count());
    series.critical.reserve(ts.step_count());
    for (std::size_t i = 0; i < ts.step_count(); ++i) {
      const Sample& e = ts.ego.samples[i];
      const Sample& o = other.samples[i];
      double d = center_distance(e, o);
      double denom;
      if (cfg.ttc_line_of_sight) {
        // Closing speed along the line of sight; receding pairs never collide.
        double rx = o.x - e.x, ry = o.y - e.y;
        double vx = o.vx - e.vx, vy = o.vy - e.vy;
        denom = d > 0.0 ? -(rx * vx + ry * vy) / d : 0.0;
      } else {
        denom = std::hypot(e.vx - o.vx, e.vy - o.vy);
      }
      double ttc = denom < kSpeedEps ? kInf : d / denom;
      series.ttc.push_back(ttc);
      series.critical.push_back(std::isfinite(ttc) && ttc < cfg.tau_ttc);
    }
    out.push_back(std::move(series));
  }
  return out;
}

namespace {
struct Interval {
  std::size_t first = 0;  // step indices, inclusive
  std::size_t last = 0;
};

using CellKey = std::pair<long long, long long>;

std::map<CellKey, std::vector<Interval>> occupancy_intervals(const AgentTrack& track,
                                                             double cell) {
  std::map<CellKey, std::vector<std::size_t>> steps_by_cell;
  for (std::size_t i = 0; i < track.samples.size(); ++i) {
    CellKey key{static_cast<long long>(std::floor(track.samples[i].x / cell)),
                static_cast<long long>(std::floor(track.samples[i].y / cell))};
    steps_by_cell[key].push_back(i);
  }
  std::map<CellKey, std::vector<Interval>> out;
  for (auto& [key, steps] : steps_by_cell) {
    std::vector<Interval>& intervals = out[key];
    Interval cur{steps[0], steps[0]};
    for (std::size_t i = 1; i < steps.size(); ++i) {
      if (steps[i] == cur.last + 1) {
        cur.last = steps[i];
      } else {
        intervals.push_back(cur);
        cur = {steps[i], steps[i]};
      }
    }
    intervals.push_back(cur);
  }
  return out;
}
}  // namespace

std::vector<PetEvent> pet_events(const TrajectorySet& ts, const CriticalityConfig& cfg) {
  ts.validate();
  cfg.validate();
  require_others(ts, "pet_events");

  auto ego_cells = occupancy_intervals(ts.ego, cfg.conflict_cell);
  std::vector<PetEvent> events;

  for (const AgentTrack& other : ts.others) {
    auto other_cells = occupancy_intervals(other, cfg.conflict_cell);
    for (const auto& [cell, ego_intervals] : ego_cells) {
      auto it = other_cells.find(cell);
      if (it == other_cells.end()) continue;
      for (const Interval& ego_iv : ego_intervals) {
        for (const Interval& other_iv : it->second) {
          bool disjoint = ego_iv.last < other_iv.first || other_iv.last < ego_iv.first;
          if (!disjoint) continue;  // simultaneous occupancy is the collision path
          double t_ego_exit = ts.ego.samples[ego_iv.last].t;
          double t_other_entry = other.samples[other_iv.first].t;
          PetEvent ev;
          ev.cell_x = cell.first;
          ev.cell_y = cell.second;
          ev.other_id = other.agent_id;
          ev.pet = std::fabs(t_ego_exit - t_other_entry);
          ev.critical = ev.pet < cfg.tau_pet;
          events.push_back(std::move(ev));
        }
      }
    }
  }

  std::sort(events.begin(), events.end(), [](const PetEvent& a, const PetEvent& b) {
    return std::tie(a.other_id, a.cell_x, a.cell_y, a.pet) <
           std::tie(b.other_id, b.cell_x, b.cell_y, b.pet);
  });
  return events;
}

InteractionSeries interaction_intensity(const TrajectorySet& ts,
                                        const CriticalityConfig& cfg) {
  ts.validate();
  cfg.validate();
  InteractionSeries out;
  const std::size_t steps = ts.step_count();
  out.intensity.reserve(steps);
  double total = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    double sum = 0.0;
    for (const AgentTrack& other : ts.others) {
      double d = center_distance(ts.ego.samples[i], other.samples[i]);
      if (d < cfg.interaction_range) {
        sum += 1.0 / std::max(d, cfg.d_min_floor);
      }
    }
    out.intensity.push_back(sum);
    total += sum;
  }
  out.mean = steps == 0 ? 0.0 : total / static_cast<double>(steps);
  return out;
}

double min_center_distance(const TrajectorySet& ts) {
  ts.validate();
  require_others(ts, "min_center_distance");
  double dmin = kInf;
  for (std::size_t i = 0; i < ts.step_count(); ++i) {
    for (const AgentTrack& other : ts.others) {
      dmin = std::min(dmin, center_distance(ts.ego.samples[i], other.samples[i]));
    }
  }
  return dmin;
}

EmergencyLevel level_for_score(int score) {
  if (score >= 10) return EmergencyLevel::critical;
  if (score >= 6) return EmergencyLevel::high;
  if (score >= 3) return EmergencyLevel::moderate;
  return EmergencyLevel::low;
}

std::pair<int, EmergencyLevel> emergency_score(const ScoreInputs& inputs,
                                               const CriticalityConfig& cfg) {
  cfg.validate();
  int score = 0;
  if (inputs.p_collision > cfg.theta_c) score += cfg.w_collision;
  if (inputs.min_ttc && *inputs.min_ttc < cfg.theta_ttc) score += cfg.w_ttc;
  if (inputs.min_pet && *inputs.min_pet < cfg.theta_pet) score += cfg.w_pet;
  if (inputs.min_distance < cfg.theta_d) score += cfg.w_distance;
  return {score, level_for_score(score)};
}

CriticalityReport compute_report(const TrajectorySet& ts, const CriticalityConfig& cfg,
                                 const AgentTrack* reference_ego) {
  ts.validate();
  cfg.validate();
  require_others(ts, "compute_report");

  CriticalityReport report;
  report.p_collision = collision_probability(ts);
  report.p_near_miss = near_miss_probability(ts, cfg);
  report.min_distance = min_center_distance(ts);

  double ttc_min = kInf, ttc_sum = 0.0, ttc_crit_sum = 0.0;
  std::size_t ttc_n = 0, ttc_crit_n = 0;
  for (const TtcSeries& series : ttc_series(ts, cfg)) {
    for (std::size_t i = 0; i < series.ttc.size(); ++i) {
      double v = series.ttc[i];
      if (!std::isfinite(v)) continue;
      ttc_min = std::min(ttc_min, v);
      ttc_sum += v;
      ++ttc_n;
      if (series.critical[i]) {
        ttc_crit_sum += v;
        ++ttc_crit_n;
      }
    }
  }
  if (ttc_n > 0) {
    report.min_ttc = ttc_min;
    report.avg_ttc = ttc_sum / static_cast<double>(ttc_n);
  }
  if (ttc_crit_n > 0) {
    report.avg_ttc_critical = ttc_crit_sum / static_cast<double>(ttc_crit_n);
  }

  double pet_min = kInf, pet_sum = 0.0, pet_crit_sum = 0.0;
  std::size_t pet_n = 0, pet_crit_n = 0;
  for (const PetEvent& ev : pet_events(ts, cfg)) {
    pet_min = std::min(pet_min, ev.pet);
    pet_sum += ev.pet;
    ++pet_n;
    if (ev.critical) {
      pet_crit_sum += ev.pet;
      ++pet_crit_n;
    }
  }
  if (pet_n > 0) {
    report.min_pet = pet_min;
    report.avg_pet = pet_sum / static_cast<double>(pet_n);
  }
  if (pet_crit_n > 0) {
    report.avg_pet_critical = pet_crit_sum / static_cast<double>(pet_crit_n);
  }

  report.avg_interaction = interaction_intensity(ts, cfg).mean;

  if (reference_ego) {
    report.ade = ade(ts.ego, *reference_ego);
    report.fde = fde(ts.ego, *reference_ego);
  }

  ScoreInputs inputs;
  inputs.p_collision = report.p_collision;
  inputs.min_ttc = report.min_ttc;
  inputs.min_pet = report.min_pet;
  inputs.min_distance = report.min_distance;
  auto [score, level] = emergency_score(inputs, cfg);
  report.score = score;
  report.level = level;
  return report;
}

// ---------------------------------------------------------------------------
// io
// ---------------------------------------------------------------------------

namespace {

struct RawSample {
  Sample sample;
  bool vx_missing = false;
  bool vy_missing = false;
};

void fill_missing_velocities(std::vector<RawSample>& rows) {
  auto position_x = [&](std::size_t i) { return rows[i].sample.x; };
  auto position_y = [&](std::size_t i) { return rows[i].sample.y; };
  auto time_at = [&](std::size_t i) { return rows[i].sample.t; };
  const std::size_t n = rows.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].vx_missing && !rows[i].vy_missing) continue;
    double vx = 0.0, vy = 0.0;
    if (n >= 2) {
      std::size_t lo = i == 0 ? 0 : i - 1;
      std::size_t hi = i + 1 < n ? i + 1 : i;
      double dt = time_at(hi) - time_at(lo);
      vx = (position_x(hi) - position_x(lo)) / dt;
      vy = (position_y(hi) - position_y(lo)) / dt;
    }
    if (rows[i].vx_missing) rows[i].sample.vx = vx;
    if (rows[i].vy_missing) rows[i].sample.vy = vy;
  }
}

TrajectorySet assemble(std::vector<std::pair<std::string, AgentTrack::Role>> order,
                       std::map<std::string, std::vector<RawSample>>& rows_by_agent) {
  std::optional<AgentTrack> ego;
  std::vector<AgentTrack> others;
  for (auto& [id, role] : order) {
    auto& rows = rows_by_agent[id];
    fill_missing_velocities(rows);
    AgentTrack track;
    track.agent_id = id;
    track.role = role;
    track.samples.reserve(rows.size());
    for (const RawSample& r : rows) track.samples.push_back(r.sample);
    if (role == AgentTrack::Role::ego) {
      if (ego) throw TrajError("trajectory input declares more than one ego");
      ego = std::move(track);
    } else {
      others.push_back(std::move(track));
    }
  }
  if (!ego) throw TrajError("trajectory input declares no ego agent");
  TrajectorySet ts;
  ts.ego = std::move(*ego);
  ts.others = std::move(others);
  ts.validate();
  return ts;
}

}  // namespace

TrajectorySet parse_trajectory_csv(std::string_view text) {
  std::vector<std::string> lines = util::split(text, '\n');
  if (lines.empty()) throw TrajError("trajectory csv is empty");

  const std::string expected = "t,agent_id,role,x,y,vx,vy,heading,length,width";
  if (util::trim(lines[0]) != expected) {
    throw TrajError("trajectory csv: header must be exactly '" + expected + "'");
  }

  std::vector<std::pair<std::string, AgentTrack::Role>> order;
  std::map<std::string, std::vector<RawSample>> rows_by_agent;

  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string line = util::trim(lines[i]);
    if (line.empty()) continue;
    std::vector<std::string> cols = util::split(line, ',');
    if (cols.size() != 10) {
      throw TrajError("trajectory csv line " + std::to_string(i + 1) +
                      ": expected 10 fields, got " + std::to_string(cols.size()));
    }
    auto num = [&](std::size_t c) {
      try {
        return std::stod(cols[c]);
      } catch (const std::exception&) {
        throw TrajError("trajectory csv line " + std::to_string(i + 1) +
                        ": bad numeric field '" + cols[c] + "'");
      }
    };

    RawSample row;
    row.sample.t = num(0);
    const std::string& id = cols[1];
    AgentTrack::Role role;
    if (cols[2] == "ego") {
      role = AgentTrack::Role::ego;
    } else if (cols[2] == "other") {
      role = AgentTrack::Role::other;
    } else {
      throw TrajError("trajectory csv line " + std::to_string(i + 1) +
                      ": role must be 'ego' or 'other'");
    }
    row.sample.x = num(3);
    row.sample.y = num(4);
    row.vx_missing = util::trim(cols[5]).empty();
    row.vy_missing = util::trim(cols[6]).empty();
    if (!row.vx_missing) row.sample.vx = num(5);
    if (!row.vy_missing) row.sample.vy = num(6);
    row.sample.heading = num(7);
    row.sample.length = num(8);
    row.sample.width = num(9);

    if (rows_by_agent.find(id) == rows_by_agent.end()) order.emplace_back(id, role);
    rows_by_agent[id].push_back(row);
  }

  return assemble(std::move(order), rows_by_agent);
}

TrajectorySet parse_trajectory_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw TrajError(std::string("trajectory json: ") + e.what());
  }
  if (!doc.contains("agents") || !doc["agents"].is_array()) {
    throw TrajError("trajectory json: missing 'agents' array");
  }

  std::vector<std::pair<std::string, AgentTrack::Role>> order;
  std::map<std::string, std::vector<RawSample>> rows_by_agent;
  for (const auto& agent : doc["agents"]) {
    std::string id = agent.at("agent_id").get<std::string>();
    std::string role_str = agent.at("role").get<std::string>();
    if (role_str != "ego" && role_str != "other") {
      throw TrajError("trajectory json: role must be 'ego' or 'other'");
    }
    AgentTrack::Role role =
        role_str == "ego" ? AgentTrack::Role::ego : AgentTrack::Role::other;
    order.emplace_back(id, role);
    for (const auto& s : agent.at("samples")) {
      RawSample row;
      row.sample.t = s.at("t").get<double>();
      row.sample.x = s.at("x").get<double>();
      row.sample.y = s.at("y").get<double>();
      row.vx_missing = !s.contains("vx");
      row.vy_missing = !s.contains("vy");
      if (!row.vx_missing) row.sample.vx = s["vx"].get<double>();
      if (!row.vy_missing) row.sample.vy = s["vy"].get<double>();
      row.sample.heading = s.value("heading", 0.0);
      row.sample.length = s.value("length", 4.5);
      row.sample.width = s.value("width", 1.8);
      rows_by_agent[id].push_back(row);
    }
  }
  return assemble(std::move(order), rows_by_agent);
}

std::string write_trajectory_csv(const TrajectorySet& ts) {
  std::string out = "t,agent_id,role,x,y,vx,vy,heading,length,width\n";
  auto emit = [&](const AgentTrack& track) {
    const char* role = track.role == AgentTrack::Role::ego ? "ego" : "other";
    for (const Sample& s : track.samples) {
      out += util::format_double(s.t);
      out += ',' + track.agent_id + ',' + role + ',';
      out += util::format_double(s.x);
      out += ',';
      out += util::format_double(s.y);
      out += ',';
      out += util::format_double(s.vx);
      out += ',';
      out += util::format_double(s.vy);
      out += ',';
      out += util::format_double(s.heading);
      out += ',';
      out += util::format_double(s.length);
      out += ',';
      out += util::format_double(s.width);
      out += '\n';
    }
  };
  emit(ts.ego);
  for (const AgentTrack& other : ts.others) emit(other);
  return out;
}

namespace {
nlohmann::json opt_to_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

std::optional<double> opt_from_json(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}
}  // namespace

std::string report_to_json(const CriticalityReport& report) {
  nlohmann::json j{
      {"p_collision", report.p_collision},
      {"p_near_miss", report.p_near_miss},
      {"min_distance", std::isfinite(report.min_distance)
                           ? nlohmann::json(report.min_distance)
                           : nlohmann::json(nullptr)},
      {"min_ttc", opt_to_json(report.min_ttc)},
      {"avg_ttc", opt_to_json(report.avg_ttc)},
      {"avg_ttc_critical", opt_to_json(report.avg_ttc_critical)},
      {"min_pet", opt_to_json(report.min_pet)},
      {"avg_pet", opt_to_json(report.avg_pet)},
      {"avg_pet_critical", opt_to_json(report.avg_pet_critical)},
      {"avg_interaction", report.avg_interaction},
      {"ade", opt_to_json(report.ade)},
      {"fde", opt_to_json(report.fde)},
      {"score", report.score},
      {"level", to_string(report.level)},
  };
  return j.dump(2) + "\n";
}

CriticalityReport report_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw TrajError(std::string("report json: ") + e.what());
  }
  CriticalityReport report;
  report.p_collision = j.at("p_collision").get<double>();
  report.p_near_miss = j.at("p_near_miss").get<double>();
  if (j.contains("min_distance") && !j["min_distance"].is_null()) {
    report.min_distance = j["min_distance"].get<double>();
  }
  report.min_ttc = opt_from_json(j, "min_ttc");
  report.avg_ttc = opt_from_json(j, "avg_ttc");
  report.avg_ttc_critical = opt_from_json(j, "avg_ttc_critical");
  report.min_pet = opt_from_json(j, "min_pet");
  report.avg_pet = opt_from_json(j, "avg_pet");
  report.avg_pet_critical = opt_from_json(j, "avg_pet_critical");
  report.avg_interaction = j.value("avg_interaction", 0.0);
  report.ade = opt_from_json(j, "ade");
  report.fde = opt_from_json(j, "fde");
  report.score = j.value("score", 0);
  std::string level = j.value("level", "Low");
  report.level = level == "Critical"   ? EmergencyLevel::critical
                 : level == "High"     ? EmergencyLevel::high
                 : level == "Moderate" ? EmergencyLevel::moderate
                                       : EmergencyLevel::low;
  return report;
}

}  // namespace scenkit::traj
