// lobmc — limit-order price-change Markov chain pipeline.
//
// Subcommands: run | ingest | estimate | metrics | embed | cluster | jsd |
// simulate | report. Exit codes: 0 success, 1 usage, 2 data error, 3 numeric
// failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "lobmc/config.hpp"
#include "lobmc/pipeline.hpp"
#include "lobmc/simulate_fixture.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOpts {
  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<int> workers;
  std::optional<std::string> sides;
  std::optional<std::string> aggregation;
  std::optional<double> smoothing_alpha;
  std::optional<int> pca_components;
  std::optional<std::uint64_t> tsne_seed;
  std::optional<std::string> cluster_space;
  std::optional<int> ward_cut_k;
  std::optional<double> dbscan_eps;
  std::optional<int> dbscan_min_pts;
  bool dump_sequences = false;
  bool gtest_pooled = false;
  std::vector<std::string> inputs;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  const char* env_default = std::getenv("LOBMC_CONFIG");
  opts.config_path = env_default ? env_default : "";
  cmd->add_option("-c,--config", opts.config_path, "run config JSON (env LOBMC_CONFIG)");
  cmd->add_option("-o,--output-dir", opts.output_dir, "artifact directory override");
  cmd->add_option("-w,--workers", opts.workers, "worker threads");
  cmd->add_option("--sides", opts.sides, "ask | bid | both");
  cmd->add_option("--aggregation", opts.aggregation, "pooled | averaged");
  cmd->add_option("--smoothing-alpha", opts.smoothing_alpha, "additive count smoothing");
  cmd->add_option("--pca-k", opts.pca_components, "PCA component count");
  cmd->add_option("--tsne-seed", opts.tsne_seed, "t-SNE seed");
  cmd->add_option("--cluster-space", opts.cluster_space, "pca | tsne | raw");
  cmd->add_option("--ward-cut-k", opts.ward_cut_k, "dendrogram cut count");
  cmd->add_option("--dbscan-eps", opts.dbscan_eps, "DBSCAN radius (default: k-distance elbow)");
  cmd->add_option("--dbscan-min-pts", opts.dbscan_min_pts, "DBSCAN core threshold");
  cmd->add_flag("--dump-sequences", opts.dump_sequences, "write per-run state-letter dumps");
  cmd->add_flag("--gtest-pooled", opts.gtest_pooled, "also run the pooled-table G-test");
  cmd->add_option("inputs", opts.inputs, "tick files (overrides config inputs)");
}

lobmc::RunConfig resolve_config(const CommonOpts& opts) {
  lobmc::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = lobmc::RunConfig::from_json_file(opts.config_path);
  if (!opts.inputs.empty()) cfg.inputs = opts.inputs;
  if (opts.output_dir) cfg.output_dir = *opts.output_dir;
  if (opts.workers) cfg.workers = *opts.workers;
  if (opts.sides) {
    if (*opts.sides == "ask")
      cfg.sides = lobmc::SideSelection::Ask;
    else if (*opts.sides == "bid")
      cfg.sides = lobmc::SideSelection::Bid;
    else if (*opts.sides == "both")
      cfg.sides = lobmc::SideSelection::Both;
    else
      throw lobmc::DataError("--sides must be ask, bid, or both");
  }
  if (opts.aggregation) {
    if (*opts.aggregation == "pooled")
      cfg.aggregation = lobmc::Aggregation::Pooled;
    else if (*opts.aggregation == "averaged")
      cfg.aggregation = lobmc::Aggregation::Averaged;
    else
      throw lobmc::DataError("--aggregation must be pooled or averaged");
  }
  if (opts.smoothing_alpha) cfg.smoothing_alpha = *opts.smoothing_alpha;
  if (opts.pca_components) cfg.pca_components = *opts.pca_components;
  if (opts.tsne_seed) cfg.tsne.seed = *opts.tsne_seed;
  if (opts.cluster_space) {
    if (*opts.cluster_space == "pca")
      cfg.cluster_space = lobmc::ClusterSpace::Pca;
    else if (*opts.cluster_space == "tsne")
      cfg.cluster_space = lobmc::ClusterSpace::Tsne;
    else if (*opts.cluster_space == "raw")
      cfg.cluster_space = lobmc::ClusterSpace::Raw;
    else
      throw lobmc::DataError("--cluster-space must be pca, tsne, or raw");
  }
  if (opts.ward_cut_k) cfg.ward_cut_k = *opts.ward_cut_k;
  if (opts.dbscan_eps) cfg.dbscan.eps = *opts.dbscan_eps;
  if (opts.dbscan_min_pts) cfg.dbscan.min_pts = *opts.dbscan_min_pts;
  if (opts.dump_sequences) cfg.dump_sequences = true;
  if (opts.gtest_pooled) cfg.gtest_pooled = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-time Markov chain analytics for limit order price changes"};
  app.set_version_flag("--version", "lobmc 0.1.0");
  app.require_subcommand(1);

  CommonOpts run_opts, ingest_opts, estimate_opts, metrics_opts, embed_opts, cluster_opts,
      jsd_opts, report_opts;
  auto* cmd_run = app.add_subcommand("run", "full pipeline: ingest through JSD");
  add_common(cmd_run, run_opts);
  auto* cmd_ingest = app.add_subcommand("ingest", "parse ticks, build counts + reports");
  add_common(cmd_ingest, ingest_opts);
  auto* cmd_estimate = app.add_subcommand("estimate", "counts -> transition matrices");
  add_common(cmd_estimate, estimate_opts);
  auto* cmd_metrics = app.add_subcommand("metrics", "matrices -> chain metrics + stationary");
  add_common(cmd_metrics, metrics_opts);
  auto* cmd_embed = app.add_subcommand("embed", "matrices -> PCA + t-SNE embedding");
  add_common(cmd_embed, embed_opts);
  auto* cmd_cluster = app.add_subcommand("cluster", "embedding -> Ward + DBSCAN labels");
  add_common(cmd_cluster, cluster_opts);
  auto* cmd_jsd = app.add_subcommand("jsd", "stationary vectors -> pairwise JSD tables");
  add_common(cmd_jsd, jsd_opts);
  auto* cmd_report = app.add_subcommand("report", "summarize an artifact tree");
  add_common(cmd_report, report_opts);

  auto* cmd_simulate = app.add_subcommand("simulate", "generate a synthetic tick fixture");
  std::string plant_path, simulate_out = "fixture";
  std::string builtin = "";
  cmd_simulate->add_option("--plant", plant_path, "plant config JSON");
  cmd_simulate->add_option("--builtin", builtin, "built-in plant: full | small");
  cmd_simulate->add_option("--out", simulate_out, "fixture output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (cmd_run->parsed()) {
      const auto cfg = resolve_config(run_opts);
      const auto manifest = lobmc::run_pipeline(cfg);
      std::cout << "run complete: " << manifest.artifacts.size() << " artifacts under "
                << cfg.output_dir
                << (manifest.all_reproduced ? " (all reproduced byte-identically)" : "") << "\n";
    } else if (cmd_ingest->parsed()) {
      lobmc::stage_ingest(resolve_config(ingest_opts));
      std::cout << "ingest complete\n";
    } else if (cmd_estimate->parsed()) {
      lobmc::stage_estimate(resolve_config(estimate_opts));
      std::cout << "estimate complete\n";
    } else if (cmd_metrics->parsed()) {
      lobmc::stage_metrics(resolve_config(metrics_opts));
      std::cout << "metrics complete\n";
    } else if (cmd_embed->parsed()) {
      lobmc::stage_embed(resolve_config(embed_opts));
      std::cout << "embed complete\n";
    } else if (cmd_cluster->parsed()) {
      lobmc::stage_cluster(resolve_config(cluster_opts));
      std::cout << "cluster complete\n";
    } else if (cmd_jsd->parsed()) {
      lobmc::stage_jsd(resolve_config(jsd_opts));
      std::cout << "jsd complete\n";
    } else if (cmd_report->parsed()) {
      std::cout << lobmc::pipeline_report_text(resolve_config(report_opts));
    } else if (cmd_simulate->parsed()) {
      lobmc::PlantConfig plant;
      if (!plant_path.empty())
        plant = lobmc::PlantConfig::from_json_file(plant_path);
      else if (builtin == "full")
        plant = lobmc::builtin_full_plant();
      else if (builtin == "small" || builtin.empty())
        plant = lobmc::builtin_small_plant();
      else
        throw lobmc::DataError("--builtin must be full or small");
      const auto fixture = lobmc::generate_fixture(plant, simulate_out);
      std::cout << "fixture: " << fixture.tick_files.size() << " files, " << fixture.total_rows
                << " rows, " << fixture.total_bytes << " bytes\n"
                << "truth:  " << fixture.truth_path << "\n"
                << "config: " << fixture.config_path << "\n";
    }
  } catch (const lobmc::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const lobmc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
