#include "scenkit/pipeline.hpp"

#include <algorithm>

#include <json.hpp>

#include "scenkit/templates_generated.hpp"
#include "scenkit/util.hpp"
#include "scenkit/xml.hpp"

namespace scenkit::pipeline {

using nlohmann::json;

CrashCase load_case_json(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw PipelineError(std::string("case file: ") + e.what());
  }
  CrashCase crash_case;
  crash_case.id = doc.value("id", "case");
  if (!doc.contains("report_text") || !doc["report_text"].is_string()) {
    throw PipelineError("case file: missing 'report_text'");
  }
  crash_case.report_text = doc["report_text"].get<std::string>();
  if (crash_case.report_text.empty()) {
    throw PipelineError("case file: report_text is empty");
  }
  if (doc.contains("diagram") && doc["diagram"].is_string()) {
    std::filesystem::path p = base_dir / doc["diagram"].get<std::string>();
    std::string bytes = util::read_file(p);
    crash_case.diagram = std::vector<std::uint8_t>(bytes.begin(), bytes.end());
  }
  if (doc.contains("metadata") && doc["metadata"].is_object()) {
    for (const auto& [key, value] : doc["metadata"].items()) {
      crash_case.metadata[key] = value.is_string() ? value.get<std::string>()
                                                   : value.dump();
    }
  }
  return crash_case;
}

StageTemplates default_templates() {
  return {std::string(templates_generated::kStageRoad),
          std::string(templates_generated::kStageBehavior)};
}

tok::PromptBundle build_context(const CrashCase& crash_case,
                                const rag::KnowledgeStore* store, int k) {
  if (crash_case.report_text.empty()) {
    throw PipelineError("build_context: crash case has empty report text");
  }
  tok::PromptBundle bundle;
  bundle.context_text = crash_case.report_text;
  if (store && k > 0 && store->size() > 0) {
    for (const rag::ScoredEntry& hit :
         store->retrieve_top_k(crash_case.report_text, static_cast<std::size_t>(k))) {
      bundle.context_text += kSnippetSeparator;
      bundle.context_text += hit.entry.text;
    }
  }
  if (crash_case.diagram) bundle.context_attachments.push_back(*crash_case.diagram);
  return bundle;
}

std::string road_summary(const roadnet::RoadGraph& graph) {
  std::string out = "road network: " + std::to_string(graph.nodes.size()) +
                    " nodes, " + std::to_string(graph.edges.size()) + " edges\n";
  for (const roadnet::Node& n : graph.nodes) {
    out += "node " + n.id + " at (" + util::format_double(n.x) + ", " +
           util::format_double(n.y) + ")\n";
  }
  for (const roadnet::Edge& e : graph.edges) {
    out += "edge " + e.id + " " + e.from + " -> " + e.to + " lanes=" +
           std::to_string(e.lane_count) + " length=" +
           util::format_double(e.length) + "\n";
  }
  return out;
}

namespace {

std::string render_template(const std::string& tmpl, const std::string& feedback) {
  const std::string slot = "{{feedback}}";
  std::size_t at = tmpl.find(slot);
  if (at == std::string::npos) {
    throw PipelineError("stage template is missing the {{feedback}} slot");
  }
  std::string out = tmpl;
  out.replace(at, slot.size(), feedback);
  return out;
}

std::vector<scen::ValidationIssue> validate_stage_output(
    Stage stage, const std::string& text, const roadnet::RoadGraph* stage1_graph,
    const scen::ExtractOptions& extract) {
  std::vector<scen::ValidationIssue> issues;
  if (stage == Stage::road) {
    try {
      roadnet::RoadGraph graph = roadnet::parse_sumo_net(text);
      roadnet::write_opendrive(graph);  // stage 1 must also yield an xodr
    } catch (const xml::XmlError& e) {
      issues.push_back({"xml-parse", e.what()});
    } catch (const roadnet::RoadNetError& e) {
      issues.push_back({"road-network", e.what()});
    }
    return issues;
  }

  try {
    scen::ParsedScenario parsed = scen::parse_xosc(text);
    double horizon = extract.horizon;
    if (horizon < 0.0) {
      horizon = 10.0;
      for (const scen::Maneuver& m : parsed.doc.story) {
        double end = m.start_time + m.duration;
        if (!m.vertices.empty()) end = std::max(end, m.vertices.back().time);
        horizon = std::max(horizon, end + 1.0);
      }
    }
    scen::extract_trajectories(parsed.doc, stage1_graph, extract.dt, horizon);
  } catch (const scen::ScenError& e) {
    issues.push_back({e.code(), e.what()});
  } catch (const traj::TrajError& e) {
    issues.push_back({"trajectory-extraction", e.what()});
  }
  return issues;
}

}  // namespace

StageResult run_stage(const tok::LogitSource& source, const tok::PromptBundle& context,
                      Stage stage, const PipelineConfig& config,
                      const roadnet::RoadGraph* stage1_graph) {
  if (config.max_iterations < 1 || config.max_iterations > 10) {
    throw PipelineError("max_iterations must be within 1..10");
  }

  StageResult result;
  result.stage = stage;
  result.context_text = context.context_text;

  const std::string& tmpl =
      stage == Stage::road ? config.templates.road : config.templates.behavior;

  cad::CadConfig decode_config;
  decode_config.alpha = config.alpha;
  decode_config.max_tokens = config.max_tokens;
  decode_config.selection = config.selection;
  if (auto stop = source.vocabulary().index_of(tok::ScriptedModel::kStopToken)) {
    decode_config.stop_tokens.insert(*stop);
  }

  std::string feedback;
  for (int iteration = 1; iteration <= config.max_iterations; ++iteration) {
    tok::PromptBundle bundle = context;
    bundle.query_text = render_template(tmpl, feedback);

    cad::DecodeResult decoded = cad::decode(source, bundle, decode_config);
    result.queries.push_back(bundle.query_text);
    result.traces.push_back(decoded.trace);
    result.iterations_used = iteration;
    if (decoded.error) {
      throw StageFailure("backend failure in iteration " +
                             std::to_string(iteration) + ": " + *decoded.error,
                         std::move(result));
    }

    result.artifact = source.detokenize(decoded.tokens);
    result.issues = validate_stage_output(stage, result.artifact, stage1_graph,
                                          config.extract);
    if (result.issues.empty()) {
      result.valid = true;
      return result;
    }

    std::string codes;
    int limit = std::min<int>(config.max_feedback_codes,
                              static_cast<int>(result.issues.size()));
    for (int i = 0; i < limit; ++i) {
      if (i > 0) codes += ", ";
      codes += result.issues[static_cast<std::size_t>(i)].code;
    }
    feedback += "\n";
    feedback += kFeedbackMarker;
    feedback += " attempt " + std::to_string(iteration) + " failed: " + codes;
  }
  return result;
}

GeneratedBundle generate_scenario(const tok::LogitSource& source,
                                  const CrashCase& crash_case,
                                  const rag::KnowledgeStore* store,
                                  const PipelineConfig& config,
                                  const std::string& backend_descriptor) {
  GeneratedBundle bundle;
  bundle.case_id = crash_case.id;

  tok::PromptBundle context = build_context(crash_case, store, config.retrieval_k);

  bundle.road_stage = run_stage(source, context, Stage::road, config, nullptr);
  std::optional<roadnet::RoadGraph> graph;
  if (bundle.road_stage.valid) {
    bundle.net_xml = bundle.road_stage.artifact;
    graph = roadnet::parse_sumo_net(*bundle.net_xml);
    bundle.xodr = roadnet::write_opendrive(*graph);

    tok::PromptBundle stage2_context = context;
    stage2_context.context_text += "\n";
    stage2_context.context_text += road_summary(*graph);
    bundle.behavior_stage =
        run_stage(source, stage2_context, Stage::behavior, config, &*graph);
    if (bundle.behavior_stage->valid) {
      bundle.xosc = bundle.behavior_stage->artifact;
    }
  } else {
    bundle.net_xml = bundle.road_stage.artifact;  // last attempt, for inspection
  }

  if (!bundle.road_stage.valid) {
    bundle.validation.name = crash_case.id;
    bundle.validation.valid = false;
    bundle.validation.issues.push_back(
        {"stage1-failed", "road stage invalid after " +
                              std::to_string(bundle.road_stage.iterations_used) +
                              " iterations"});
  } else {
    scen::BundleInput input;
    input.name = crash_case.id;
    input.net_bytes = bundle.net_xml;
    input.xodr_bytes = bundle.xodr;
    if (bundle.behavior_stage && bundle.behavior_stage->valid) {
      input.xosc_bytes = bundle.xosc;
    } else if (bundle.behavior_stage) {
      input.xosc_bytes = bundle.behavior_stage->artifact;
    }
    bundle.validation = scen::validate_bundle(input, config.extract);
  }

  json manifest{
      {"case_id", crash_case.id},
      {"alpha", config.alpha},
      {"selection", config.selection.kind == cad::SelectionPolicy::Kind::greedy
                        ? "greedy"
                        : "sample"},
      {"seed", config.selection.seed},
      {"temperature", config.selection.temperature},
      {"retrieval_k", config.retrieval_k},
      {"backend", backend_descriptor},
      {"iterations",
       json{{"road", bundle.road_stage.iterations_used},
            {"behavior",
             bundle.behavior_stage ? bundle.behavior_stage->iterations_used : 0}}},
      {"template_hashes",
       json{{"road", util::fnv1a64_hex(config.templates.road)},
            {"behavior", util::fnv1a64_hex(config.templates.behavior)}}},
      {"artifact_hashes",
       json{{"net", bundle.net_xml ? util::fnv1a64_hex(*bundle.net_xml) : ""},
            {"xodr", bundle.xodr ? util::fnv1a64_hex(*bundle.xodr) : ""},
            {"xosc", bundle.xosc ? util::fnv1a64_hex(*bundle.xosc) : ""}}},
      {"valid", bundle.validation.valid},
  };
  bundle.manifest_json = manifest.dump(2) + "\n";
  return bundle;
}

void write_bundle(const GeneratedBundle& bundle, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (bundle.net_xml) {
    util::write_file(out_dir / (bundle.case_id + ".net.xml"), *bundle.net_xml);
  }
  if (bundle.xodr) {
    util::write_file(out_dir / (bundle.case_id + ".xodr"), *bundle.xodr);
  }
  if (bundle.xosc) {
    util::write_file(out_dir / (bundle.case_id + ".xosc"), *bundle.xosc);
  }
  util::write_file(out_dir / "manifest.json", bundle.manifest_json);
}

}  // namespace scenkit::pipeline
