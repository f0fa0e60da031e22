#pragma once

/**
 * Trajectory accuracy and criticality metrics: displacement errors,
 * collision and near-miss probabilities, time-to-collision,
 * post-encroachment time over spatial conflict cells, interaction
 * intensity, and the weighted emergency score with its four-level
 * classification.
 *
 * Conventions, fixed here and relied on by the tests:
 *  - d(t) is center-to-center distance everywhere except collision
 *    detection, which intersects oriented bounding rectangles.
 *  - Threshold comparisons are strict; boundary-equal values do not fire.
 *  - Per-other-agent metrics aggregate by the worst case (minimum) for the
 *    scenario-level report.
 *  - A relative speed below 1e-6 m/s makes TTC infinite; infinite values
 *    are excluded from averages and never flag critical events.
 */

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scenkit::traj {

class TrajError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double heading = 0.0;  // radians
  double length = 4.5;   // meters
  double width = 1.8;
};

struct AgentTrack {
  enum class Role { ego, other };

  std::string agent_id;
  Role role = Role::other;
  std::vector<Sample> samples;

  /// Strictly increasing timestamps on a uniform grid (within 1e-6 s),
  /// positive vehicle dimensions.
  void validate() const;
};

struct TrajectorySet {
  AgentTrack ego;
  std::vector<AgentTrack> others;

  std::size_t step_count() const { return ego.samples.size(); }
  /// All tracks must share the ego's timestamp grid.
  void validate() const;
};

struct CriticalityConfig {
  // Event thresholds.
  double tau_ttc = 3.0;  // s, critical TTC events
  double tau_pet = 1.5;  // s, critical PET events

  // Emergency score indicator thresholds.
  double theta_c = 0.3;    // collision probability
  double theta_ttc = 1.0;  // s
  double theta_pet = 0.5;  // s
  double theta_d = 2.0;    // m

  // Emergency score weights.
  int w_collision = 5;
  int w_ttc = 5;
  int w_pet = 4;
  int w_distance = 3;

  // Artifact parameters (not fixed by the score definition; defaults
  // documented in the README).
  double delta_safety = 1.0;       // m, near-miss margin
  double d_min_floor = 0.5;        // m, interaction intensity floor
  double interaction_range = 20.0; // m
  double conflict_cell = 2.0;      // m, PET conflict zone cell side

  // Literal-formula TTC uses |v_rel|; the projected variant divides by the
  // closing speed along the line of sight instead.
  bool ttc_line_of_sight = false;

  void validate() const;
};

enum class EmergencyLevel { critical, high, moderate, low };

std::string to_string(EmergencyLevel level);

struct PetEvent {
  long long cell_x = 0;  // conflict cell indices (floor(x / conflict_cell))
  long long cell_y = 0;
  std::string other_id;
  double pet = 0.0;  // s
  bool critical = false;
};

struct TtcSeries {
  std::string other_id;
  std::vector<double> ttc;  // +inf where relative speed vanishes
  std::vector<bool> critical;
};

struct InteractionSeries {
  std::vector<double> intensity;  // per step, 1/m
  double mean = 0.0;
};

struct CriticalityReport {
  double p_collision = 0.0;
  double p_near_miss = 0.0;
  double min_distance = std::numeric_limits<double>::infinity();
  std::optional<double> min_ttc;
  std::optional<double> avg_ttc;
  std::optional<double> avg_ttc_critical;
  std::optional<double> min_pet;
  std::optional<double> avg_pet;
  std::optional<double> avg_pet_critical;
  double avg_interaction = 0.0;
  std::optional<double> ade;
  std::optional<double> fde;
  int score = 0;
  EmergencyLevel level = EmergencyLevel::low;
};

// ---------------------------------------------------------------------------
// displacement errors
// ---------------------------------------------------------------------------

/// Mean per-step Euclidean distance. Tracks must share the timestamp grid.
double ade(const AgentTrack& predicted, const AgentTrack& reference);

/// Euclidean distance at the final step.
double fde(const AgentTrack& predicted, const AgentTrack& reference);

// ---------------------------------------------------------------------------
// criticality metrics
// ---------------------------------------------------------------------------

/// Fraction of steps where the ego's oriented bounding rectangle intersects
/// any other agent's rectangle (separating-axis test). Needs >= 1 other.
double collision_probability(const TrajectorySet& ts);

/// Fraction of steps with min center distance < ego length + delta_safety.
double near_miss_probability(const TrajectorySet& ts, const CriticalityConfig& cfg);

std::vector<TtcSeries> ttc_series(const TrajectorySet& ts,
                                  const CriticalityConfig& cfg = {});

std::vector<PetEvent> pet_events(const TrajectorySet& ts, const CriticalityConfig& cfg);

InteractionSeries interaction_intensity(const TrajectorySet& ts,
                                        const CriticalityConfig& cfg);

/// Min over steps of min center distance to any other agent.
double min_center_distance(const TrajectorySet& ts);

struct ScoreInputs {
  double p_collision = 0.0;
  std::optional<double> min_ttc;
  std::optional<double> min_pet;
  double min_distance = std::numeric_limits<double>::infinity();
};

/// Weighted sum of the four strict-threshold indicators, with the fixed
/// level bands Critical >= 10, High [6,10), Moderate [3,6), Low < 3.
std::pair<int, EmergencyLevel> emergency_score(const ScoreInputs& inputs,
                                               const CriticalityConfig& cfg);

EmergencyLevel level_for_score(int score);

/// Full report; reference_ego, when given, adds ADE/FDE against the ego.
CriticalityReport compute_report(const TrajectorySet& ts, const CriticalityConfig& cfg,
                                 const AgentTrack* reference_ego = nullptr);

// ---------------------------------------------------------------------------
// io
// ---------------------------------------------------------------------------

/**
 * CSV with required header `t,agent_id,role,x,y,vx,vy,heading,length,width`.
 * Empty vx/vy fields are reconstructed by central finite differences on
 * positions (one-sided at the ends).
 */
TrajectorySet parse_trajectory_csv(std::string_view text);

/// Equivalent JSON form: {"agents":[{"agent_id","role","samples":[...]}]}.
TrajectorySet parse_trajectory_json(std::string_view text);

std::string write_trajectory_csv(const TrajectorySet& ts);

std::string report_to_json(const CriticalityReport& report);
CriticalityReport report_from_json(std::string_view text);

// Exposed for the collision tests: oriented rectangle overlap via the
// separating-axis theorem (touching rectangles do not intersect).
bool rectangles_intersect(const Sample& a, const Sample& b);

}  // namespace scenkit::traj
