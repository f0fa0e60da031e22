// scenkit command line: retrieval, network/trajectory evaluation, bundle
// validation, corpus statistics and scenario generation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "scenkit/pipeline.hpp"
#include "scenkit/remote.hpp"
#include "scenkit/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scenkit;

namespace {

traj::CriticalityConfig load_criticality_config(const std::string& path) {
  traj::CriticalityConfig cfg;
  if (path.empty()) return cfg;
  json doc = json::parse(util::read_file(path));
  cfg.tau_ttc = doc.value("tau_ttc", cfg.tau_ttc);
  cfg.tau_pet = doc.value("tau_pet", cfg.tau_pet);
  cfg.theta_c = doc.value("theta_c", cfg.theta_c);
  cfg.theta_ttc = doc.value("theta_ttc", cfg.theta_ttc);
  cfg.theta_pet = doc.value("theta_pet", cfg.theta_pet);
  cfg.theta_d = doc.value("theta_d", cfg.theta_d);
  cfg.w_collision = doc.value("w_collision", cfg.w_collision);
  cfg.w_ttc = doc.value("w_ttc", cfg.w_ttc);
  cfg.w_pet = doc.value("w_pet", cfg.w_pet);
  cfg.w_distance = doc.value("w_distance", cfg.w_distance);
  cfg.delta_safety = doc.value("delta_safety", cfg.delta_safety);
  cfg.d_min_floor = doc.value("d_min_floor", cfg.d_min_floor);
  cfg.interaction_range = doc.value("interaction_range", cfg.interaction_range);
  cfg.conflict_cell = doc.value("conflict_cell", cfg.conflict_cell);
  cfg.ttc_line_of_sight = doc.value("ttc_line_of_sight", cfg.ttc_line_of_sight);
  cfg.validate();
  return cfg;
}

traj::TrajectorySet load_trajectories(const std::string& path) {
  std::string text = util::read_file(path);
  if (fs::path(path).extension() == ".json") {
    return traj::parse_trajectory_json(text);
  }
  return traj::parse_trajectory_csv(text);
}

std::unique_ptr<tok::LogitSource> open_backend(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw std::runtime_error(
        "backend must be table:FILE, bigram:FILE or remote:ADDR");
  }
  std::string kind = spec.substr(0, colon);
  std::string arg = spec.substr(colon + 1);
  if (kind == "table") {
    return std::make_unique<tok::TableModel>(tok::TableModel::load_fixture_file(arg));
  }
  if (kind == "bigram") {
    return std::make_unique<tok::BigramModel>(tok::BigramModel::load_corpus_file(arg));
  }
  if (kind == "remote") {
    return std::make_unique<remote::RemoteModel>(
        std::make_unique<remote::TcpTransport>(arg));
  }
  throw std::runtime_error("unknown backend kind '" + kind + "'");
}

int cmd_retrieve(const std::string& store_path, const std::string& query, int k) {
  rag::KnowledgeStore store = rag::KnowledgeStore::load(store_path);
  for (const rag::ScoredEntry& hit :
       store.retrieve_top_k(query, static_cast<std::size_t>(k))) {
    std::printf("%.6f  %s\n", hit.score, hit.entry.id.c_str());
  }
  return 0;
}

int cmd_build_store(const std::string& input_path, const std::string& out_path,
                    int dimension) {
  rag::EmbedderSpec spec;
  spec.dimension = static_cast<std::size_t>(dimension);
  rag::KnowledgeStore store(spec);
  std::string text = util::read_file(input_path);
  int line_no = 0;
  for (const std::string& line : util::split(text, '\n')) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols = util::split(line, '\t');
    if (cols.size() != 3) {
      throw std::runtime_error("input line " + std::to_string(line_no) +
                               ": expected id<TAB>tags<TAB>text");
    }
    std::set<std::string> tags;
    for (const std::string& t : util::split(cols[1], ',')) {
      if (!t.empty()) tags.insert(t);
    }
    store.insert(util::unescape_field(cols[0]), util::unescape_field(cols[2]),
                 std::move(tags));
  }
  store.save(out_path);
  std::printf("wrote %zu entries to %s\n", store.size(), out_path.c_str());
  return 0;
}

int cmd_evaluate_net(const std::string& gt_path, const std::string& candidate_path,
                     bool as_json) {
  roadnet::RoadGraph gt = roadnet::parse_sumo_net(util::read_file(gt_path));
  roadnet::RoadGraph candidate =
      roadnet::parse_sumo_net(util::read_file(candidate_path));
  roadnet::NetworkComparison cmp = roadnet::compare_networks(gt, candidate);
  if (as_json) {
    json j{{"ice", cmp.ice},
           {"lce", cmp.lce},
           {"ce", cmp.ce},
           {"segment_count_gt", cmp.segment_count_gt},
           {"segment_count_sumo", cmp.segment_count_sumo}};
    if (cmp.per_segment_lane_diffs) {
      j["per_segment_lane_diffs"] = *cmp.per_segment_lane_diffs;
    }
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    std::printf("ICE %.2f%%  LCE %.2f%%  CE %.2f%%  (segments gt=%d candidate=%d)\n",
                cmp.ice, cmp.lce, cmp.ce, cmp.segment_count_gt,
                cmp.segment_count_sumo);
  }
  return 0;
}

int cmd_evaluate_traj(const std::string& input_path, const std::string& reference_path,
                      const std::string& config_path) {
  traj::TrajectorySet ts = load_trajectories(input_path);
  traj::CriticalityConfig cfg = load_criticality_config(config_path);
  std::optional<traj::AgentTrack> reference;
  if (!reference_path.empty()) {
    reference = load_trajectories(reference_path).ego;
  }
  traj::CriticalityReport report =
      traj::compute_report(ts, cfg, reference ? &*reference : nullptr);
  std::printf("%s", traj::report_to_json(report).c_str());
  return 0;
}

int cmd_score(const std::string& report_path, const std::string& config_path) {
  traj::CriticalityReport report =
      traj::report_from_json(util::read_file(report_path));
  traj::CriticalityConfig cfg = load_criticality_config(config_path);
  traj::ScoreInputs inputs;
  inputs.p_collision = report.p_collision;
  inputs.min_ttc = report.min_ttc;
  inputs.min_pet = report.min_pet;
  inputs.min_distance = report.min_distance;
  auto [score, level] = traj::emergency_score(inputs, cfg);
  std::printf("S_e=%d level=%s\n", score, traj::to_string(level).c_str());
  return 0;
}

int cmd_validate(const std::string& bundle_dir) {
  scen::ScenarioBundle bundle =
      scen::validate_bundle(scen::read_bundle_dir(bundle_dir));
  if (bundle.valid) {
    std::printf("%s: valid\n", bundle.name.c_str());
    return 0;
  }
  std::printf("%s: invalid\n", bundle.name.c_str());
  for (const scen::ValidationIssue& issue : bundle.issues) {
    std::printf("  %s: %s\n", issue.code.c_str(), issue.detail.c_str());
  }
  return 1;
}

int cmd_corpus_stats(const std::string& root, bool as_json) {
  std::vector<scen::ScenarioBundle> bundles;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const fs::path& dir : dirs) {
    bundles.push_back(scen::validate_bundle(scen::read_bundle_dir(dir)));
  }
  scen::CorpusStats stats = scen::corpus_stats(bundles);
  if (as_json) {
    json j{{"gsr", stats.gsr},
           {"aer", stats.aer},
           {"total", stats.total},
           {"valid_bundles", stats.valid_bundles},
           {"total_files", stats.total_files},
           {"syntax_error_files", stats.syntax_error_files}};
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    std::printf("bundles %d  valid %d  GSR %.3f%%  files %d  syntax errors %d  AER %.3f%%\n",
                stats.total, stats.valid_bundles, stats.gsr, stats.total_files,
                stats.syntax_error_files, stats.aer);
  }
  return 0;
}

int cmd_generate(const std::string& case_path, const std::string& store_path,
                 const std::string& backend_spec, const std::string& out_dir,
                 double alpha, std::optional<long long> seed, double temperature,
                 bool dump_traces) {
  pipeline::CrashCase crash_case = pipeline::load_case_json(
      util::read_file(case_path), fs::path(case_path).parent_path());

  std::optional<rag::KnowledgeStore> store;
  if (!store_path.empty()) store = rag::KnowledgeStore::load(store_path);

  std::unique_ptr<tok::LogitSource> backend = open_backend(backend_spec);

  pipeline::PipelineConfig config;
  config.alpha = alpha;
  if (seed) {
    config.selection = cad::SelectionPolicy::sample(
        temperature, static_cast<std::uint64_t>(*seed));
  }

  pipeline::GeneratedBundle bundle = pipeline::generate_scenario(
      *backend, crash_case, store ? &*store : nullptr, config, backend_spec);
  pipeline::write_bundle(bundle, out_dir);

  if (dump_traces) {
    auto dump = [&](const pipeline::StageResult& stage, const std::string& name) {
      std::string jsonl;
      for (const cad::DecodeTrace& trace : stage.traces) {
        jsonl += cad::trace_to_jsonl(trace, &backend->vocabulary());
      }
      util::write_file(fs::path(out_dir) / (bundle.case_id + "." + name +
                                            ".trace.jsonl"),
                       jsonl);
    };
    dump(bundle.road_stage, "road");
    if (bundle.behavior_stage) dump(*bundle.behavior_stage, "behavior");
  }

  std::printf("case %s: %s (road iterations %d, behavior iterations %d)\n",
              bundle.case_id.c_str(),
              bundle.validation.valid ? "valid" : "invalid",
              bundle.road_stage.iterations_used,
              bundle.behavior_stage ? bundle.behavior_stage->iterations_used : 0);
  for (const scen::ValidationIssue& issue : bundle.validation.issues) {
    std::printf("  %s: %s\n", issue.code.c_str(), issue.detail.c_str());
  }
  std::printf("wrote %s\n", (fs::path(out_dir) / "manifest.json").string().c_str());
  return bundle.validation.valid ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenario generation and evaluation toolkit"};
  app.require_subcommand(1);

  // retrieve
  std::string store_path, query;
  int top_k = 5;
  CLI::App* retrieve = app.add_subcommand("retrieve", "rank store entries for a query");
  retrieve->add_option("--store", store_path, "store file")->required();
  retrieve->add_option("--query", query, "query text")->required();
  retrieve->add_option("-k", top_k, "number of results");

  // build-store
  std::string build_input, build_out;
  int build_dim = 512;
  CLI::App* build_store =
      app.add_subcommand("build-store", "embed id<TAB>tags<TAB>text lines into a store");
  build_store->add_option("--input", build_input, "tsv input")->required();
  build_store->add_option("--out", build_out, "store file to write")->required();
  build_store->add_option("--dim", build_dim, "embedding dimension");

  // evaluate-net
  std::string gt_path, candidate_path;
  bool net_json = false;
  CLI::App* evaluate_net =
      app.add_subcommand("evaluate-net", "compare a candidate network to ground truth");
  evaluate_net->add_option("--gt", gt_path, "ground-truth .net.xml")->required();
  evaluate_net->add_option("--candidate", candidate_path, "candidate .net.xml")->required();
  evaluate_net->add_flag("--json", net_json, "JSON output");

  // evaluate-traj
  std::string traj_input, traj_reference, traj_config;
  CLI::App* evaluate_traj =
      app.add_subcommand("evaluate-traj", "criticality report for a trajectory file");
  evaluate_traj->add_option("--input", traj_input, "trajectory csv/json")->required();
  evaluate_traj->add_option("--reference", traj_reference, "reference trajectory for ADE/FDE");
  evaluate_traj->add_option("--config", traj_config, "criticality config json");

  // score
  std::string report_path, score_config;
  CLI::App* score = app.add_subcommand("score", "emergency score from a report");
  score->add_option("--report", report_path, "report json")->required();
  score->add_option("--config", score_config, "criticality config json");

  // validate
  std::string bundle_dir;
  CLI::App* validate = app.add_subcommand("validate", "validate a scenario bundle dir");
  validate->add_option("--bundle", bundle_dir, "bundle directory")->required();

  // corpus-stats
  std::string corpus_root;
  bool corpus_json = false;
  CLI::App* corpus =
      app.add_subcommand("corpus-stats", "GSR/AER over a directory of bundles");
  corpus->add_option("--root", corpus_root, "corpus root directory")->required();
  corpus->add_flag("--json", corpus_json, "JSON output");

  // generate
  std::string case_path, gen_store, backend_spec, out_dir;
  double alpha = 0.7;
  double temperature = 1.0;
  std::optional<long long> seed;
  CLI::App* generate = app.add_subcommand("generate", "run the generation pipeline");
  generate->add_option("--case", case_path, "crash case json")->required();
  generate->add_option("--store", gen_store, "retrieval store file");
  generate->add_option("--backend", backend_spec,
                       "table:FILE | bigram:FILE | remote:ADDR")->required();
  generate->add_option("--out", out_dir, "output directory")->required();
  generate->add_option("--alpha", alpha, "contextual emphasis strength");
  generate->add_option("--seed", seed, "sampling seed (enables sampling)");
  generate->add_option("--temperature", temperature, "sampling temperature");
  bool dump_traces = false;
  generate->add_flag("--traces", dump_traces, "export per-stage decode traces as JSONL");

  CLI11_PARSE(app, argc, argv);

  try {
    if (retrieve->parsed()) return cmd_retrieve(store_path, query, top_k);
    if (build_store->parsed()) return cmd_build_store(build_input, build_out, build_dim);
    if (evaluate_net->parsed()) return cmd_evaluate_net(gt_path, candidate_path, net_json);
    if (evaluate_traj->parsed()) {
      return cmd_evaluate_traj(traj_input, traj_reference, traj_config);
    }
    if (score->parsed()) return cmd_score(report_path, score_config);
    if (validate->parsed()) return cmd_validate(bundle_dir);
    if (corpus->parsed()) return cmd_corpus_stats(corpus_root, corpus_json);
    if (generate->parsed()) {
      return cmd_generate(case_path, gen_store, backend_spec, out_dir, alpha, seed,
                          temperature, dump_traces);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
