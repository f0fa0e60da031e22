#pragma once

/**
 * Three-stage generation pipeline: build a multimodal context (crash report
 * text + attachments + retrieved snippets), CAD-decode the road network
 * (stage road: net + derived xodr), then the vehicle behaviors (stage
 * behavior: xosc) with the stage-1 road summary appended to the context.
 * Each stage retries with validator feedback appended to the query, up to
 * ten iterations.
 *
 * Runs are deterministic under greedy decoding with deterministic backends;
 * the manifest records alpha, seeds, iteration counts and template hashes
 * for exact reproduction.
 */

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenkit/cad.hpp"
#include "scenkit/rag.hpp"
#include "scenkit/roadnet.hpp"
#include "scenkit/scenario.hpp"
#include "scenkit/token_model.hpp"

namespace scenkit::pipeline {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StageResult;

/// Separator inserted before each retrieved snippet in the context.
inline constexpr const char* kSnippetSeparator = "\n---\n";

/// Marker prefixed to each appended validator-feedback block. Scripted
/// replay backends key their attempt count on it.
inline constexpr const char* kFeedbackMarker = "[validator]";

struct CrashCase {
  std::string id;
  std::string report_text;
  std::optional<std::vector<std::uint8_t>> diagram;
  std::map<std::string, std::string> metadata;
};

/// Case file: {"id":..., "report_text":..., "diagram": optional path
/// relative to base_dir, "metadata": {...}}.
CrashCase load_case_json(std::string_view text, const std::filesystem::path& base_dir);

struct StageTemplates {
  std::string road;      // query template with a {{feedback}} slot
  std::string behavior;
};

/// The templates shipped under share/templates/, embedded at build time.
StageTemplates default_templates();

struct PipelineConfig {
  double alpha = 0.7;
  int max_iterations = 10;
  int retrieval_k = 3;
  int max_tokens = 8192;
  cad::SelectionPolicy selection;  // greedy default; file formats punish randomness
  StageTemplates templates = default_templates();
  scen::ExtractOptions extract;
  int max_feedback_codes = 5;  // reason codes appended per failed iteration
};

enum class Stage { road, behavior };

struct StageResult {
  Stage stage = Stage::road;
  int iterations_used = 0;
  std::string artifact;  // decoded text of the last iteration
  bool valid = false;
  std::vector<scen::ValidationIssue> issues;  // last iteration's
  std::vector<cad::DecodeTrace> traces;       // one per iteration
  std::vector<std::string> queries;           // rendered query per iteration
  std::string context_text;                   // context channel used
};

/// Backend failure mid-stage; carries everything decoded so far, including
/// the failing iteration's partial trace.
class StageFailure : public PipelineError {
 public:
  StageFailure(const std::string& message, StageResult partial_result)
      : PipelineError(message), partial(std::move(partial_result)) {}

  StageResult partial;
};

struct GeneratedBundle {
  std::string case_id;
  std::optional<std::string> net_xml;
  std::optional<std::string> xodr;
  std::optional<std::string> xosc;
  scen::ScenarioBundle validation;
  StageResult road_stage;
  std::optional<StageResult> behavior_stage;
  std::string manifest_json;
};

/// context_text = report ++ separator ++ each of the top-k snippet texts,
/// in retrieval rank order; attachments carried through; query left empty.
tok::PromptBundle build_context(const CrashCase& crash_case,
                                const rag::KnowledgeStore* store, int k);

/// Deterministic node/edge/lane listing appended to the stage-2 context.
std::string road_summary(const roadnet::RoadGraph& graph);

/**
 * Decode-validate-refine loop. Stage road validates with the SUMO parser
 * plus the OpenDRIVE writer; stage behavior parses the xosc and extracts
 * trajectories against stage1_graph. Stops on success or after
 * max_iterations; a backend failure throws PipelineError.
 */
StageResult run_stage(const tok::LogitSource& source, const tok::PromptBundle& context,
                      Stage stage, const PipelineConfig& config,
                      const roadnet::RoadGraph* stage1_graph);

GeneratedBundle generate_scenario(const tok::LogitSource& source,
                                  const CrashCase& crash_case,
                                  const rag::KnowledgeStore* store,
                                  const PipelineConfig& config,
                                  const std::string& backend_descriptor = "unknown");

/// Writes {id}.net.xml / {id}.xodr / {id}.xosc plus manifest.json.
void write_bundle(const GeneratedBundle& bundle, const std::filesystem::path& out_dir);

}  // namespace scenkit::pipeline
