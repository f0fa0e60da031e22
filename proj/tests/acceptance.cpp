// Acceptance suite: every release criterion as one pass/fail line. Each
// check recomputes its expectations through independent oracle code paths
// (naive softmax products, degree scans, BFS components, exhaustive
// cell/interval enumeration) rather than trusting the library internals.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "golden_case.hpp"
#include "scenkit/cad.hpp"
#include "scenkit/pipeline.hpp"
#include "scenkit/roadnet.hpp"
#include "scenkit/scenario.hpp"
#include "scenkit/traj.hpp"
#include "scenkit/util.hpp"

using namespace scenkit;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void criterion(const std::string& name, bool ok, const std::string& detail = "") {
  std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++g_failures;
}

std::string fixture(const std::string& name) {
  return std::string(SCENKIT_FIXTURE_DIR) + "/" + name;
}

// ---------------------------------------------------------------------------
// CAD criteria
// ---------------------------------------------------------------------------

std::vector<double> naive_softmax(const std::vector<double>& logits) {
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i]);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

bool cad_equivalence(std::string& detail) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> value(-20.0, 20.0);
  std::uniform_int_distribution<int> dim(2, 512);
  const double alphas[] = {0.0, 0.3, 0.7, 2.0};

  auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    int n = dim(rng);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = value(rng);
      b[i] = value(rng);
    }
    double alpha = alphas[pair % 4];

    std::vector<double> via_logits =
        cad::cad_distribution(tok::TokenDistribution{a}, tok::TokenDistribution{b},
                              alpha);

    std::vector<double> p = naive_softmax(a);
    std::vector<double> q = naive_softmax(b);
    std::vector<double> w(p.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      w[i] = p[i] * std::pow(p[i] / q[i], alpha);
      sum += w[i];
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      worst = std::max(worst, std::fabs(via_logits[i] - w[i] / sum));
    }
  }
  double seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start).count();
  detail = "max |softmax(eq3) - normalized eq2| = " + util::format_double(worst) +
           ", " + util::format_double(seconds) + " s";
  return worst <= 1e-7 && seconds < 5.0;
}

tok::TableModel random_table_model(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> vocab_size(2, 8);
  std::uniform_int_distribution<int> rule_count(0, 5);
  std::uniform_real_distribution<double> logit(-8.0, 8.0);

  int n = vocab_size(rng);
  std::vector<std::string> tokens;
  for (int i = 0; i < n; ++i) tokens.push_back("t" + std::to_string(i));
  std::vector<double> def(n);
  for (double& v : def) v = logit(rng);

  std::vector<tok::TableRule> rules;
  int nrules = rule_count(rng);
  for (int r = 0; r < nrules; ++r) {
    tok::TableRule rule;
    switch (rng() % 3) {
      case 0: rule.ctx = tok::TableRule::Ctx::present; break;
      case 1: rule.ctx = tok::TableRule::Ctx::absent; break;
      default: break;
    }
    if (rng() % 2 == 0) {
      rule.prefix_last = static_cast<int>(rng() % static_cast<unsigned>(n));
    }
    rule.logits.resize(n);
    for (double& v : rule.logits) v = logit(rng);
    rules.push_back(std::move(rule));
  }
  return tok::TableModel(tok::Vocabulary(tokens), def, rules);
}

bool cad_reduction(std::string& detail) {
  std::mt19937_64 rng(77);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    tok::TableModel model = random_table_model(rng);
    tok::PromptBundle bundle;
    bundle.context_text = trial % 2 == 0 ? "context present" : "";
    bundle.query_text = "query";

    cad::CadConfig config;
    config.alpha = 0.0;
    config.max_tokens = 12;
    cad::DecodeResult cad_result = cad::decode(model, bundle, config);

    std::vector<int> plain;
    tok::PromptBundle work = bundle;
    for (int step = 0; step < 12; ++step) {
      std::vector<double> logits = model.logits_with_context(work).logits;
      int best = 0;
      for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = static_cast<int>(i);
      }
      plain.push_back(best);
      work.prefix.push_back(best);
    }
    if (cad_result.error || cad_result.tokens != plain) ++mismatches;
  }
  detail = std::to_string(mismatches) + " mismatches over 100 models";
  return mismatches == 0;
}

bool fig4_fixture(std::string& detail) {
  tok::TableModel model =
      tok::TableModel::load_fixture_file(fixture("fig4.table"));
  int eos = *model.vocabulary().index_of("<eos>");

  tok::PromptBundle bundle;
  bundle.context_text = "an intersection with two lanes coming from the west";
  bundle.query_text = "How many lanes are there on the westbound approach?";

  cad::CadConfig config;
  config.alpha = 0.7;
  config.max_tokens = 4;
  config.stop_tokens = {eos};
  cad::DecodeResult conditioned = cad::decode(model, bundle, config);

  config.alpha = 0.0;
  cad::DecodeResult stripped = cad::decode(model, bundle.without_context(), config);

  std::string with_ctx =
      conditioned.error ? "<error>" : model.detokenize(conditioned.tokens);
  std::string without_ctx =
      stripped.error ? "<error>" : model.detokenize(stripped.tokens);
  detail = "alpha=0.7 with context -> '" + with_ctx +
           "', alpha=0 context removed -> '" + without_ctx + "'";
  return with_ctx == "Two" && without_ctx == "Four";
}

// ---------------------------------------------------------------------------
// road network criteria
// ---------------------------------------------------------------------------

int oracle_intersections(const roadnet::RoadGraph& g) {
  int count = 0;
  for (const roadnet::Node& n : g.nodes) {
    int degree = 0;
    for (const roadnet::Edge& e : g.edges) {
      if (e.from == n.id) ++degree;
      if (e.to == n.id) ++degree;
    }
    if (degree >= 3) ++count;
  }
  return count;
}

std::vector<int> oracle_components(const roadnet::RoadGraph& g) {
  std::map<std::string, std::vector<std::string>> adjacency;
  for (const roadnet::Node& n : g.nodes) adjacency[n.id];
  for (const roadnet::Edge& e : g.edges) {
    adjacency[e.from].push_back(e.to);
    adjacency[e.to].push_back(e.from);
  }
  std::set<std::string> seen;
  std::vector<int> sizes;
  for (const roadnet::Node& n : g.nodes) {
    if (seen.count(n.id)) continue;
    int size = 0;
    std::queue<std::string> queue;
    queue.push(n.id);
    seen.insert(n.id);
    while (!queue.empty()) {
      std::string cur = queue.front();
      queue.pop();
      ++size;
      for (const std::string& next : adjacency[cur]) {
        if (seen.insert(next).second) queue.push(next);
      }
    }
    sizes.push_back(size);
  }
  std::sort(sizes.rbegin(), sizes.rend());
  return sizes;
}

double oracle_ice(const roadnet::RoadGraph& gt, const roadnet::RoadGraph& cand) {
  double rel = std::fabs(oracle_intersections(gt) - oracle_intersections(cand)) /
               static_cast<double>(oracle_intersections(gt));
  return std::min(rel, 1.0) * 100.0;
}

double oracle_lce(const roadnet::RoadGraph& gt, const roadnet::RoadGraph& cand) {
  double lg = 0.0, lc = 0.0;
  for (const roadnet::Edge& e : gt.edges) lg += e.lane_count;
  for (const roadnet::Edge& e : cand.edges) lc += e.lane_count;
  lg /= static_cast<double>(gt.edges.size());
  lc /= static_cast<double>(cand.edges.size());
  return std::min(std::fabs(lg - lc) / lg, 1.0) * 100.0;
}

double oracle_ce(const roadnet::RoadGraph& gt, const roadnet::RoadGraph& cand) {
  std::vector<int> gs = oracle_components(gt);
  std::vector<int> cs = oracle_components(cand);
  if (gs.empty()) return 0.0;
  if (gs.size() == 1 && cs.size() == 1) return 0.0;
  std::multiset<int> pool(cs.begin(), cs.end());
  int matched = 0;
  for (int s : gs) {
    auto it = pool.find(s);
    if (it != pool.end()) {
      pool.erase(it);
      ++matched;
    }
  }
  return (1.0 - static_cast<double>(matched) / static_cast<double>(gs.size())) * 100.0;
}

roadnet::RoadGraph random_graph(std::mt19937_64& rng) {
  roadnet::RoadGraph g;
  int n = 2 + static_cast<int>(rng() % 10);
  for (int i = 0; i < n; ++i) {
    g.nodes.push_back({"n" + std::to_string(i),
                       10.0 * (i % 4) + 1.0 * i, 10.0 * (i / 4)});
  }
  int edge_id = 0;
  for (int i = 1; i < n; ++i) {
    if (rng() % 4 == 0) continue;
    int j = static_cast<int>(rng() % static_cast<unsigned>(i));
    g.edges.push_back({"e" + std::to_string(edge_id++), g.nodes[j].id,
                       g.nodes[i].id, 1 + static_cast<int>(rng() % 4), 0.0});
  }
  int extra = static_cast<int>(rng() % 5);
  for (int k = 0; k < extra; ++k) {
    int a = static_cast<int>(rng() % static_cast<unsigned>(n));
    int b = static_cast<int>(rng() % static_cast<unsigned>(n));
    if (a == b) continue;
    g.edges.push_back({"e" + std::to_string(edge_id++), g.nodes[a].id,
                       g.nodes[b].id, 1 + static_cast<int>(rng() % 4), 0.0});
  }
  for (roadnet::Edge& e : g.edges) {
    const roadnet::Node* from = g.find_node(e.from);
    const roadnet::Node* to = g.find_node(e.to);
    e.length = std::hypot(to->x - from->x, to->y - from->y);
  }
  return g;
}

bool metric_oracles(std::string& detail) {
  std::mt19937_64 rng(404);
  int pair_mismatches = 0;
  int done = 0;
  while (done < 50) {
    roadnet::RoadGraph gt = random_graph(rng);
    roadnet::RoadGraph cand = random_graph(rng);
    if (oracle_intersections(gt) == 0 || gt.edges.empty() || cand.edges.empty()) {
      continue;
    }
    ++done;
    if (roadnet::intersection_count_error(gt, cand) != oracle_ice(gt, cand)) {
      ++pair_mismatches;
    }
    if (roadnet::lane_count_error(gt, cand).lce != oracle_lce(gt, cand)) {
      ++pair_mismatches;
    }
    if (roadnet::connectivity_error(gt, cand) != oracle_ce(gt, cand)) {
      ++pair_mismatches;
    }
  }

  int identity_mismatches = 0;
  done = 0;
  while (done < 100) {
    roadnet::RoadGraph g = random_graph(rng);
    if (g.edges.empty()) continue;
    ++done;
    if (oracle_intersections(g) > 0 &&
        roadnet::intersection_count_error(g, g) != 0.0) {
      ++identity_mismatches;
    }
    if (roadnet::lane_count_error(g, g).lce != 0.0) ++identity_mismatches;
    if (roadnet::connectivity_error(g, g) != 0.0) ++identity_mismatches;
  }
  detail = std::to_string(pair_mismatches) + " oracle mismatches, " +
           std::to_string(identity_mismatches) + " nonzero self-comparisons";
  return pair_mismatches == 0 && identity_mismatches == 0;
}

// ---------------------------------------------------------------------------
// criticality criteria
// ---------------------------------------------------------------------------

traj::AgentTrack build_track(const std::string& id, traj::AgentTrack::Role role,
                             int steps, double dt,
                             const std::function<traj::Sample(int)>& at) {
  traj::AgentTrack track;
  track.agent_id = id;
  track.role = role;
  for (int k = 0; k < steps; ++k) {
    traj::Sample s = at(k);
    s.t = k * dt;
    track.samples.push_back(s);
  }
  return track;
}

traj::TrajectorySet wreck_scenario() {
  traj::TrajectorySet ts;
  ts.ego = build_track("ego", traj::AgentTrack::Role::ego, 101, 0.1, [](int k) {
    traj::Sample s;
    s.x = -30.05 + std::min(k, 30) * 1.0;
    s.y = 0.0;
    s.vx = k < 30 ? 10.0 : 0.0;
    return s;
  });
  ts.others.push_back(build_track("crosser", traj::AgentTrack::Role::other, 101,
                                  0.1, [](int k) {
                                    traj::Sample s;
                                    s.x = 0.0;
                                    s.y = -31.55 + std::min(k, 30) * 1.0;
                                    s.vy = k < 30 ? 10.0 : 0.0;
                                    s.heading = 1.5707963267948966;
                                    return s;
                                  }));
  ts.others.push_back(build_track("trailer", traj::AgentTrack::Role::other, 101,
                                  0.1, [](int k) {
                                    traj::Sample s;
                                    s.x = -38.05 + 1.2 * k;
                                    s.y = 0.0;
                                    s.vx = 12.0;
                                    return s;
                                  }));
  return ts;
}

bool criticality_thresholds(std::string& detail) {
  traj::CriticalityConfig cfg;  // tau 3.0/1.5, theta (0.3,1.0,0.5,2.0), w (5,5,4,3)
  bool ok = true;

  traj::CriticalityReport critical = traj::compute_report(wreck_scenario(), cfg);
  ok &= critical.score == 17 && critical.level == traj::EmergencyLevel::critical;

  traj::TrajectorySet benign;
  benign.ego = build_track("ego", traj::AgentTrack::Role::ego, 60, 0.1, [](int k) {
    traj::Sample s;
    s.x = k * 1.0;
    s.vx = 10.0;
    return s;
  });
  benign.others.push_back(build_track("o", traj::AgentTrack::Role::other, 60, 0.1,
                                      [](int k) {
                                        traj::Sample s;
                                        s.x = k * 1.0;
                                        s.y = 40.0;
                                        s.vx = 10.0;
                                        return s;
                                      }));
  traj::CriticalityReport low = traj::compute_report(benign, cfg);
  ok &= low.score == 0 && low.level == traj::EmergencyLevel::low;

  int band_errors = 0;
  const int weights[4] = {cfg.w_collision, cfg.w_ttc, cfg.w_pet, cfg.w_distance};
  for (int mask = 0; mask < 16; ++mask) {
    traj::ScoreInputs inputs;
    int expected = 0;
    if (mask & 1) { inputs.p_collision = 0.9; expected += weights[0]; }
    if (mask & 2) { inputs.min_ttc = 0.2; expected += weights[1]; }
    if (mask & 4) { inputs.min_pet = 0.2; expected += weights[2]; }
    if (mask & 8) { inputs.min_distance = 0.2; expected += weights[3]; }
    auto [score, level] = traj::emergency_score(inputs, cfg);
    traj::EmergencyLevel want = expected >= 10  ? traj::EmergencyLevel::critical
                                : expected >= 6 ? traj::EmergencyLevel::high
                                : expected >= 3 ? traj::EmergencyLevel::moderate
                                                : traj::EmergencyLevel::low;
    if (score != expected || level != want) ++band_errors;
  }
  ok &= band_errors == 0;
  detail = "critical fixture S_e=" + std::to_string(critical.score) + " (" +
           traj::to_string(critical.level) + "), benign S_e=" +
           std::to_string(low.score) + " (" + traj::to_string(low.level) + "), " +
           std::to_string(band_errors) + " band errors";
  return ok;
}

std::vector<traj::PetEvent> pet_oracle(const traj::TrajectorySet& ts,
                                       const traj::CriticalityConfig& cfg) {
  std::vector<traj::PetEvent> events;
  long long min_cx = 1000000000, max_cx = -1000000000;
  long long min_cy = 1000000000, max_cy = -1000000000;
  auto visit = [&](const traj::AgentTrack& track) {
    for (const traj::Sample& s : track.samples) {
      long long cx = static_cast<long long>(std::floor(s.x / cfg.conflict_cell));
      long long cy = static_cast<long long>(std::floor(s.y / cfg.conflict_cell));
      min_cx = std::min(min_cx, cx);
      max_cx = std::max(max_cx, cx);
      min_cy = std::min(min_cy, cy);
      max_cy = std::max(max_cy, cy);
    }
  };
  visit(ts.ego);
  for (const traj::AgentTrack& other : ts.others) visit(other);

  auto runs = [&](const traj::AgentTrack& track, long long cx, long long cy) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    bool open = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < track.samples.size(); ++i) {
      bool inside =
          static_cast<long long>(
              std::floor(track.samples[i].x / cfg.conflict_cell)) == cx &&
          static_cast<long long>(
              std::floor(track.samples[i].y / cfg.conflict_cell)) == cy;
      if (inside && !open) {
        open = true;
        start = i;
      } else if (!inside && open) {
        open = false;
        out.push_back({start, i - 1});
      }
    }
    if (open) out.push_back({start, track.samples.size() - 1});
    return out;
  };

  for (long long cx = min_cx; cx <= max_cx; ++cx) {
    for (long long cy = min_cy; cy <= max_cy; ++cy) {
      auto ego_runs = runs(ts.ego, cx, cy);
      if (ego_runs.empty()) continue;
      for (const traj::AgentTrack& other : ts.others) {
        for (const auto& [e0, e1] : ego_runs) {
          for (const auto& [o0, o1] : runs(other, cx, cy)) {
            if (e1 < o0 || o1 < e0) {
              traj::PetEvent ev;
              ev.cell_x = cx;
              ev.cell_y = cy;
              ev.other_id = other.agent_id;
              ev.pet = std::fabs(ts.ego.samples[e1].t - other.samples[o0].t);
              ev.critical = ev.pet < cfg.tau_pet;
              events.push_back(ev);
            }
          }
        }
      }
    }
  }
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.other_id, a.cell_x, a.cell_y, a.pet) <
           std::tie(b.other_id, b.cell_x, b.cell_y, b.pet);
  });
  return events;
}

bool pet_oracle_criterion(std::string& detail) {
  std::mt19937_64 rng(606);
  traj::CriticalityConfig cfg;
  int mismatches = 0;
  int total_events = 0;
  for (int trial = 0; trial < 20; ++trial) {
    // Crossing pair: ego eastbound, the other northbound with a randomized
    // lane offset and start. All positions stay within +-50 m, i.e. a grid
    // of at most 50x50 conflict cells.
    const int steps = 50;
    double ego_speed = 8.0 + static_cast<double>(rng() % 5);
    double other_speed = 8.0 + static_cast<double>(rng() % 5);
    double other_lane = -4.95 + 2.0 * static_cast<double>(rng() % 5);
    double other_start = -44.95 + static_cast<double>(rng() % 12);

    traj::TrajectorySet ts;
    ts.ego = build_track("ego", traj::AgentTrack::Role::ego, steps, 0.1,
                         [&](int k) {
                           traj::Sample s;
                           s.x = -24.95 + ego_speed * 0.1 * k;
                           s.y = 0.05;
                           s.vx = ego_speed;
                           return s;
                         });
    ts.others.push_back(build_track("cross", traj::AgentTrack::Role::other, steps,
                                    0.1, [&](int k) {
                                      traj::Sample s;
                                      s.x = other_lane;
                                      s.y = other_start + other_speed * 0.1 * k;
                                      s.vy = other_speed;
                                      s.heading = 1.5707963267948966;
                                      return s;
                                    }));

    auto got = traj::pet_events(ts, cfg);
    auto want = pet_oracle(ts, cfg);
    total_events += static_cast<int>(want.size());
    if (got.size() != want.size()) {
      ++mismatches;
      continue;
    }
    bool equal = true;
    for (std::size_t i = 0; i < got.size(); ++i) {
      equal &= got[i].cell_x == want[i].cell_x && got[i].cell_y == want[i].cell_y &&
               got[i].other_id == want[i].other_id && got[i].pet == want[i].pet &&
               got[i].critical == want[i].critical;
    }
    if (!equal) ++mismatches;
  }
  detail = std::to_string(mismatches) + " mismatching fixtures, " +
           std::to_string(total_events) + " events checked";
  return mismatches == 0;
}

// ---------------------------------------------------------------------------
// round-trip criteria
// ---------------------------------------------------------------------------

bool round_trips(std::string& detail) {
  std::mt19937_64 rng(808);
  int net_failures = 0;
  int done = 0;
  while (done < 20) {
    roadnet::RoadGraph g = random_graph(rng);
    if (g.edges.empty()) continue;
    ++done;
    roadnet::RoadGraph back = roadnet::parse_sumo_net(roadnet::write_sumo_net(g));
    bool ok = back.nodes.size() == g.nodes.size() &&
              back.edges.size() == g.edges.size();
    if (ok) {
      for (std::size_t i = 0; i < g.edges.size(); ++i) {
        ok &= back.edges[i].lane_count == g.edges[i].lane_count;
      }
    }
    if (!ok) ++net_failures;
  }

  int xosc_failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    scen::ScenarioDoc doc;
    int entities = 1 + static_cast<int>(rng() % 3);
    for (int e = 0; e < entities; ++e) {
      scen::Entity entity;
      entity.name = e == 0 ? "ego" : "agent" + std::to_string(e);
      entity.dims.length = 4.0 + 0.1 * static_cast<double>(rng() % 20);
      entity.dims.width = 1.6 + 0.1 * static_cast<double>(rng() % 6);
      doc.entities.push_back(entity);

      scen::InitState init;
      init.position.kind = scen::Position::Kind::world;
      init.position.x = static_cast<double>(rng() % 100) - 50.0;
      init.position.y = static_cast<double>(rng() % 100) - 50.0;
      init.position.heading = 0.1 * static_cast<double>(rng() % 62);
      init.speed = static_cast<double>(rng() % 20);
      doc.init[entity.name] = init;
    }
    int maneuvers = static_cast<int>(rng() % 4);
    for (int m = 0; m < maneuvers; ++m) {
      scen::Maneuver maneuver;
      maneuver.entity = doc.entities[rng() % doc.entities.size()].name;
      maneuver.start_time = 0.5 * static_cast<double>(rng() % 10);
      switch (rng() % 3) {
        case 0:
          maneuver.type = scen::Maneuver::Type::speed_change;
          maneuver.duration = 0.5 * static_cast<double>(rng() % 8);
          maneuver.target_speed = static_cast<double>(rng() % 25);
          break;
        case 1:
          maneuver.type = scen::Maneuver::Type::lane_change;
          maneuver.duration = 1.0 + 0.5 * static_cast<double>(rng() % 4);
          maneuver.lane_offset = (rng() % 2 == 0) ? 1 : -1;
          break;
        default: {
          maneuver.type = scen::Maneuver::Type::trajectory_follow;
          double t = maneuver.start_time;
          int verts = 2 + static_cast<int>(rng() % 3);
          for (int v = 0; v < verts; ++v) {
            scen::TrajectoryVertex vertex;
            vertex.time = t;
            vertex.x = static_cast<double>(rng() % 100) - 50.0;
            vertex.y = static_cast<double>(rng() % 100) - 50.0;
            maneuver.vertices.push_back(vertex);
            t += 0.5 + 0.5 * static_cast<double>(rng() % 3);
          }
          maneuver.duration =
              maneuver.vertices.back().time - maneuver.vertices.front().time;
          break;
        }
      }
      doc.story.push_back(maneuver);
    }

    scen::ParsedScenario once = scen::parse_xosc(scen::write_xosc(doc));
    scen::ParsedScenario twice = scen::parse_xosc(scen::write_xosc(once.doc));
    if (!(once.doc == doc) || !(twice.doc == once.doc)) ++xosc_failures;
  }

  detail = std::to_string(net_failures) + " net failures, " +
           std::to_string(xosc_failures) + " xosc failures";
  return net_failures == 0 && xosc_failures == 0;
}

// ---------------------------------------------------------------------------
// pipeline criteria
// ---------------------------------------------------------------------------

bool pipeline_determinism(std::string& detail) {
  pipeline::PipelineConfig config;
  rag::KnowledgeStore store = golden::store();

  std::vector<pipeline::GeneratedBundle> runs;
  for (int i = 0; i < 3; ++i) {
    tok::ScriptedModel model = golden::backend();
    runs.push_back(pipeline::generate_scenario(model, golden::crash_case(), &store,
                                               config, "scripted"));
  }

  bool identical = true;
  for (int i = 1; i < 3; ++i) {
    identical &= runs[i].net_xml == runs[0].net_xml;
    identical &= runs[i].xodr == runs[0].xodr;
    identical &= runs[i].xosc == runs[0].xosc;
    identical &= runs[i].manifest_json == runs[0].manifest_json;
  }

  bool matches_golden =
      runs[0].net_xml == util::read_file(fixture("golden/case4way.net.xml")) &&
      runs[0].xodr == util::read_file(fixture("golden/case4way.xodr")) &&
      runs[0].xosc == util::read_file(fixture("golden/case4way.xosc")) &&
      runs[0].manifest_json == util::read_file(fixture("golden/manifest.json"));

  tok::ScriptedModel broken(
      std::vector<std::string>{"<net> <junction id=\"x\" </net>"},
      pipeline::kFeedbackMarker);
  pipeline::GeneratedBundle failed = pipeline::generate_scenario(
      broken, golden::crash_case(), nullptr, config, "scripted");
  bool capped = failed.road_stage.iterations_used == 10 &&
                !failed.road_stage.valid && !failed.validation.valid;

  detail = std::string("3 runs ") + (identical ? "identical" : "DIFFER") +
           ", golden bytes " + (matches_golden ? "match" : "DIFFER") +
           ", forced failure used " +
           std::to_string(failed.road_stage.iterations_used) + " iterations";
  return identical && matches_golden && capped;
}

bool corpus_stats_criterion(std::string& detail) {
  fs::path root = fs::temp_directory_path() / "scenkit_acceptance_corpus";
  fs::remove_all(root);
  fs::create_directories(root);

  std::string net = util::read_file(fixture("golden/case4way.net.xml"));
  std::string xodr = util::read_file(fixture("golden/case4way.xodr"));
  std::string xosc = util::read_file(fixture("golden/case4way.xosc"));

  for (int i = 0; i < 32; ++i) {
    fs::path dir = root / ("bundle" + std::string(i < 10 ? "0" : "") +
                           std::to_string(i));
    fs::create_directories(dir);
    std::string net_out = net;
    std::string xodr_out = xodr;
    std::string xosc_out = xosc;
    if (i >= 27 && i < 30) {
      // Three bundles with exactly one syntax-broken file each.
      xodr_out = xodr.substr(0, 40);
    } else if (i >= 30) {
      // Two bundles invalid for semantic reasons (dangling node ref).
      net_out = "<net> <junction id=\"a\" x=\"0\" y=\"0\"/> "
                "<edge id=\"e\" from=\"a\" to=\"ghost\"/> </net>";
    }
    util::write_file(dir / "scene.net.xml", net_out);
    util::write_file(dir / "scene.xodr", xodr_out);
    util::write_file(dir / "scene.xosc", xosc_out);
  }

  std::vector<scen::ScenarioBundle> bundles;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const fs::path& dir : dirs) {
    bundles.push_back(scen::validate_bundle(scen::read_bundle_dir(dir)));
  }
  scen::CorpusStats stats = scen::corpus_stats(bundles);
  fs::remove_all(root);

  // Hand count: 27 of 32 valid; 96 files on disk, 3 with syntax errors.
  bool ok = stats.total == 32 && stats.valid_bundles == 27 &&
            stats.gsr == 84.375 && stats.total_files == 96 &&
            stats.syntax_error_files == 3 && stats.aer == 3.125;
  detail = "GSR " + util::format_double(stats.gsr) + "% (want 84.375), AER " +
           util::format_double(stats.aer) + "% (want 3.125)";
  return ok;
}

}  // namespace

int main() {
  auto suite_start = std::chrono::steady_clock::now();
  std::string detail;

  detail.clear();
  criterion("CAD equivalence (1000 random pairs, 1e-7, <5s)",
            cad_equivalence(detail), detail);

  detail.clear();
  criterion("CAD reduction (alpha=0 equals conditioned greedy, 100 models)",
            cad_reduction(detail), detail);

  detail.clear();
  criterion("Context-flip fixture (alpha=0.7 vs context removed)",
            fig4_fixture(detail), detail);

  detail.clear();
  criterion("Metric oracles (ICE/LCE/CE on 50 pairs + 100 identities)",
            metric_oracles(detail), detail);

  detail.clear();
  criterion("Criticality thresholds (S_e=17 critical, 0 low, 16 bands)",
            criticality_thresholds(detail), detail);

  detail.clear();
  criterion("PET oracle (20 crossing fixtures, exact)",
            pet_oracle_criterion(detail), detail);

  detail.clear();
  criterion("Round-trips (20 nets, 20 xosc)", round_trips(detail), detail);

  detail.clear();
  criterion("Pipeline determinism (3 golden runs + 10-iteration cap)",
            pipeline_determinism(detail), detail);

  detail.clear();
  criterion("Corpus stats (32 bundles, 27 valid)",
            corpus_stats_criterion(detail), detail);

  double seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - suite_start).count();
  criterion("Suite runtime < 60 s, offline",
            seconds < 60.0, util::format_double(seconds) + " s");

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
