// eemo: command-line driver for the refinement, reward and evaluation pipeline.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "eemo/cli/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  std::size_t jobs = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "pipeline config (JSON)");
  cmd->add_option("--seed", c.seed, "seed for every random choice (default: config seed)");
  cmd->add_flag("--strict", c.strict, "exit 1 when any record is rejected or errors");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "primary output path (default: <output_dir>/<command>.<ext>)");
}

eemo::cli::RunContext make_context(const Common& c, const std::string& command, const std::string& ext) {
  eemo::cli::RunContext ctx;
  if (!c.config.empty()) {
    ctx.config = eemo::io::load_config(c.config);
    ctx.config_path = c.config;
  } else {
    auto doc = eemo::io::to_json(eemo::io::PipelineConfig{});
    eemo::io::apply_overrides(doc, eemo::io::environment_overrides());
    ctx.config = eemo::io::config_from_json(doc, std::filesystem::current_path());
  }
  ctx.seed = c.seed.value_or(ctx.config.seed);
  ctx.strict = c.strict;
  ctx.jobs = c.jobs;
  ctx.out = !c.out.empty() ? c.out : ctx.config.resolve(ctx.config.output_dir + "/" + command + ext);
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion label refinement, reward scoring and evaluation"};
  app.require_subcommand(1);
  Common common;
  std::vector<std::string> inputs;
  std::string mapping, overrides, method = "progressive", mode = "class", dimension = "valence", templates, judge;
  std::optional<std::size_t> folds, repeats, steps, group_size;

  auto* map_labels = app.add_subcommand("map-labels", "rewrite annotation labels through a mapping table");
  map_labels->add_option("input", inputs, "annotation records")->required()->expected(1);
  map_labels->add_option("--mapping", mapping, "mapping table (TSV)")->required();

  auto* fit_vad = app.add_subcommand("fit-vad", "fit category VAD centroids and cluster them to anchors");
  fit_vad->add_option("samples", inputs, "VAD sample records")->required()->expected(1);
  fit_vad->add_option("--folds", folds, "k of the repeated k-fold");
  fit_vad->add_option("--repeats", repeats, "number of k-fold repetitions");
  fit_vad->add_option("--overrides", overrides, "manual category -> anchor overrides (TSV)");

  auto* gen_vad = app.add_subcommand("gen-vad", "synthesize VAD labels from comment keywords");
  gen_vad->add_option("input", inputs, "annotation records")->required()->expected(1);

  auto* derive = app.add_subcommand("derive-rankings", "derive top-3 emotion rankings");
  derive->add_option("input", inputs, "annotation records")->required()->expected(1);
  derive->add_option("--method", method, "distribution | progressive")
      ->check(CLI::IsMember({"distribution", "progressive"}));

  auto* balance = app.add_subcommand("balance", "rebalance records by class or VAD histogram");
  balance->add_option("input", inputs, "annotation records")->required()->expected(1);
  balance->add_option("--mode", mode, "class | vad")->check(CLI::IsMember({"class", "vad"}));
  balance->add_option("--dimension", dimension, "VAD dimension for --mode vad")
      ->check(CLI::IsMember({"valence", "arousal", "dominance"}));

  auto* qa = app.add_subcommand("instantiate-qa", "instantiate QA templates from refined labels");
  qa->add_option("input", inputs, "annotation records")->required()->expected(1);
  qa->add_option("--templates", templates, "template records")->required();

  auto* score = app.add_subcommand("score", "score responses against ground truth");
  score->add_option("files", inputs, "responses and ground truth")->required()->expected(2);
  score->add_option("--group-size", group_size, "append group-relative advantages")->check(CLI::Range(2, 1 << 20));

  auto* evaluate = app.add_subcommand("evaluate", "benchmark metrics over predictions");
  evaluate->add_option("files", inputs, "predictions and evaluation items")->required()->expected(2);
  evaluate->add_option("--judge", judge, "judge replay file for description items");

  auto* simulate = app.add_subcommand("simulate", "run the GRPO policy simulator on a candidate pool");
  simulate->add_option("pool", inputs, "pool definition (JSON)")->required()->expected(1);
  simulate->add_option("--steps", steps, "optimization steps (default: config)");

  for (auto* cmd : {map_labels, fit_vad, gen_vad, derive, balance, qa, score, evaluate, simulate}) {
    add_common(cmd, common);
  }
  CLI11_PARSE(app, argc, argv);

  auto* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  using namespace eemo::cli;
  try {
    const std::string ext = name == "fit-vad" || name == "evaluate" ? ".json" : ".jsonl";
    const auto ctx = make_context(common, name, ext);
    CommandResult r;
    if (name == "map-labels") r = cmd_map_labels(ctx, inputs[0], mapping);
    else if (name == "fit-vad") {
      r = cmd_fit_vad(ctx, inputs[0], folds, repeats,
                      overrides.empty() ? std::nullopt : std::optional<std::string>(overrides));
    }
    else if (name == "gen-vad") r = cmd_gen_vad(ctx, inputs[0]);
    else if (name == "derive-rankings") {
      r = cmd_derive_rankings(ctx, inputs[0], method == "distribution" ? RankingMethod::kDistribution
                                                                       : RankingMethod::kProgressive);
    } else if (name == "balance") {
      r = cmd_balance(ctx, inputs[0], mode == "class" ? BalanceMode::kClass : BalanceMode::kVad, dimension);
    } else if (name == "instantiate-qa") r = cmd_instantiate_qa(ctx, inputs[0], templates);
    else if (name == "score") r = cmd_score(ctx, inputs[0], inputs[1], group_size);
    else if (name == "evaluate") {
      r = cmd_evaluate(ctx, inputs[0], inputs[1], judge.empty() ? std::nullopt : std::optional<std::string>(judge));
    } else if (name == "simulate") r = cmd_simulate(ctx, inputs[0], steps);
    std::cerr << r.summary(name) << "\n";
    return r.exit_code();
  } catch (const eemo::Error& e) {
    std::cerr << name << ": error (" << eemo::to_string(e.kind()) << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << name << ": error: " << e.what() << "\n";
    return 2;
  }
}
