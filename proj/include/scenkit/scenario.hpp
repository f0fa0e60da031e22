#pragma once

/**
 * OpenSCENARIO 1.1 subset: entities with bounding boxes, init teleport +
 * speed actions, and three maneuver kinds (speed change, lane change,
 * trajectory follow). Also bundle validation over the net/xodr/xosc triple,
 * kinematic trajectory extraction onto a uniform grid, and the corpus-level
 * generation-quality statistics.
 */

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scenkit/roadnet.hpp"
#include "scenkit/traj.hpp"

namespace scenkit::scen {

/// Carries a machine-readable reason code ("xml-parse", "entity-ref",
/// "non-monotone-trajectory", "road-ref", "lane-ref", ...).
class ScenError : public std::runtime_error {
 public:
  ScenError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct VehicleDims {
  double length = 4.5;
  double width = 1.8;

  bool operator==(const VehicleDims&) const = default;
};

struct Entity {
  std::string name;
  VehicleDims dims;

  bool operator==(const Entity&) const = default;
};

struct Position {
  enum class Kind { world, road };

  Kind kind = Kind::world;
  // world
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  // road-relative: negative lane ids run rightward from the reference line,
  // matching the lanes written by roadnet::write_opendrive.
  std::string road_id;
  double s_offset = 0.0;
  int lane = 0;

  bool operator==(const Position&) const = default;
};

struct InitState {
  Position position;
  double speed = 0.0;  // m/s

  bool operator==(const InitState&) const = default;
};

struct TrajectoryVertex {
  double time = 0.0;  // absolute simulation seconds
  double x = 0.0;
  double y = 0.0;

  bool operator==(const TrajectoryVertex&) const = default;
};

struct Maneuver {
  enum class Type { speed_change, lane_change, trajectory_follow };

  std::string entity;
  Type type = Type::speed_change;
  double start_time = 0.0;
  double duration = 0.0;
  double target_speed = 0.0;    // speed_change
  int lane_offset = 0;          // lane_change; positive moves left
  std::vector<TrajectoryVertex> vertices;  // trajectory_follow

  bool operator==(const Maneuver&) const = default;
};

struct ScenarioDoc {
  std::vector<Entity> entities;
  std::map<std::string, InitState> init;  // by entity name
  std::vector<Maneuver> story;            // document order

  const Entity* find_entity(std::string_view name) const;

  bool operator==(const ScenarioDoc&) const = default;
};

struct ParsedScenario {
  ScenarioDoc doc;
  std::vector<std::string> warnings;  // unknown elements, one note each
};

/// Throws ScenError with codes "xml-parse", "entity-ref",
/// "non-monotone-trajectory". Unknown elements become warnings.
ParsedScenario parse_xosc(std::string_view xml_bytes);

std::string write_xosc(const ScenarioDoc& doc);

// ---------------------------------------------------------------------------
// trajectory extraction
// ---------------------------------------------------------------------------

/**
 * Samples every entity on a uniform dt grid over [0, horizon] (inclusive,
 * floor(horizon/dt)+1 samples). Speed changes integrate constant
 * acceleration exactly, lane changes ramp the lateral offset linearly,
 * trajectory-follow interpolates vertices linearly and overrides other
 * motion while active. The ego is the entity named "ego" when present,
 * otherwise the first declared entity.
 *
 * Errors (ScenError): "road-ref" / "lane-ref" for unresolvable road
 * positions, "horizon" when the horizon ends before the first maneuver
 * starts.
 */
traj::TrajectorySet extract_trajectories(const ScenarioDoc& doc,
                                         const roadnet::RoadGraph* net,
                                         double dt, double horizon);

// ---------------------------------------------------------------------------
// bundle validation
// ---------------------------------------------------------------------------

struct ValidationIssue {
  std::string code;
  std::string detail;
};

struct BundleInput {
  std::string name;
  std::optional<std::string> net_bytes;
  std::optional<std::string> xodr_bytes;
  std::optional<std::string> xosc_bytes;
};

struct ScenarioBundle {
  std::string name;
  std::optional<roadnet::RoadGraph> net;
  std::optional<std::string> xodr;  // raw bytes, kept for inspection
  std::optional<ScenarioDoc> xosc;
  bool valid = false;
  std::vector<ValidationIssue> issues;
  int files_present = 0;
  int files_syntax_error = 0;  // XML-level failures, the AER numerator
};

struct ExtractOptions {
  double dt = 0.1;
  /// Negative horizon means: max(10 s, last maneuver end + 1 s).
  double horizon = -1.0;
};

/**
 * A bundle is valid iff all three files are present and parse, every
 * cross-reference (entities, roads, lanes) resolves, and trajectory
 * extraction succeeds. Reason codes: "missing-file", "xml-parse",
 * "entity-ref", "non-monotone-trajectory", "road-ref", "lane-ref",
 * "trajectory-extraction", "dangling-ref".
 */
ScenarioBundle validate_bundle(const BundleInput& input,
                               const ExtractOptions& options = {});

/// Reads the first *.net.xml, *.xodr and *.xosc (lexicographic) in DIR.
BundleInput read_bundle_dir(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// corpus statistics
// ---------------------------------------------------------------------------

struct CorpusStats {
  double gsr = 0.0;  // percent of valid bundles
  double aer = 0.0;  // percent of present files with syntax errors
  int total = 0;     // bundle count
  int valid_bundles = 0;
  int total_files = 0;
  int syntax_error_files = 0;
};

/// Errors on an empty list.
CorpusStats corpus_stats(const std::vector<ScenarioBundle>& bundles);

}  // namespace scenkit::scen
