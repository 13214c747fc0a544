/*
 * Copyright 2026 The csdet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "csdet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <ostream>
#include <sstream>

#include "binary_io.hpp"
#include "csdet/error.hpp"
#include "csdet/experiment.hpp"
#include "csdet/text.hpp"

namespace csdet {
namespace {

struct Options {
  std::uint64_t seed = 7;
  bool quiet = false;
  std::string config;
  std::string out;
  std::string data;
  std::string taxonomy;
  std::string ckpt;
  std::string counts;
  std::string tree;
};

std::vector<int> parse_counts(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    const auto v = parse_double(trim_view(part));
    if (!v || *v < 1 || *v != static_cast<int>(*v)) {
      throw Error(ErrorCode::kConfigInvalid, "bad proposal count '" + part + "'");
    }
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

int taxonomy_check(const Options& o, std::ostream& out) {
  try {
    const Taxonomy t = load_taxonomy(o.tree);
    out << "nodes " << t.num_nodes() << "\n"
        << "leaves " << t.num_leaves() << "\n"
        << "depth " << t.depth() << "\n"
        << "root " << t.nodes()[t.root()] << "\n"
        << "status ok\n";
    return 0;
  } catch (const Error& e) {
    out << "status invalid: " << e.what() << "\n";
    return 1;
  }
}

int gen_data(const Options& o, bool seed_given, std::ostream& out) {
  WorldConfig wc = o.config.empty() ? default_world_config() : load_world_config(o.config);
  if (seed_given || o.config.empty()) wc.seed = o.seed;
  const GeneratedWorld world = generate_dataset(wc);
  save_world(world, wc, o.out);
  out << "train " << world.train.images.size() << " images, eval "
      << world.eval.images.size() << " images, hidden " << world.hidden.images.size()
      << " images -> " << o.out << "\n";
  return 0;
}

int train_cmd(const Options& o, bool seed_given, std::ostream& out) {
  TrainConfig tc = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
  if (seed_given || o.config.empty()) tc.seed = o.seed;
  const Taxonomy taxonomy = load_taxonomy(o.taxonomy);
  const Dataset data = load_dataset(std::filesystem::path(o.data) / "train" / "manifest.jsonl");
  const std::filesystem::path dir = o.out;
  std::filesystem::create_directories(dir);
  write_file(dir / "train.cfg", train_config_to_text(tc));
  const TrainResult r = train(data, taxonomy, tc, [&](int epoch, const ModelParams& params) {
    save_checkpoint(params, taxonomy, dir / ("epoch" + std::to_string(epoch) + ".ckpt"));
    if (!o.quiet) out << "epoch " << epoch << " done\n";
  });
  write_log_csv(r.log, dir / "log.csv");
  if (!r.log.empty()) out << "final l_cross " << format_double(r.log.back().loss.l_cross) << "\n";
  return 0;
}

int eval_cmd(const Options& o, std::ostream& out) {
  const Taxonomy taxonomy = load_taxonomy(o.taxonomy);
  const TrainConfig tc = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
  EvalOptions eo;
  eo.detector = tc.detector;
  if (!o.counts.empty()) eo.proposal_counts = parse_counts(o.counts);
  const ModelParams params = load_checkpoint(o.ckpt, taxonomy);
  if (params.feature_dim() != feature_dim(eo.detector.features)) {
    eo.detector.features = FeatureConfig::from_dim(params.feature_dim());
  }
  const std::filesystem::path data = o.data;
  const Dataset eval = load_dataset(data / "eval" / "manifest.jsonl");
  const SplitMap splits = load_splits(data / "splits.json");
  const EvalReport report = evaluate(params, taxonomy, taxonomy, eval, splits, eo);
  write_report(report, o.out);
  out << format_report(report);
  return 0;
}

CLI::App* active_subcommand(CLI::App& app) {
  for (auto* sub : app.get_subcommands({})) {
    if (sub->parsed()) return sub;
  }
  return nullptr;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-supervised object detection on a synthetic shape world", "csdet"};
  app.require_subcommand(1);
  Options o;
  app.add_flag("-q,--quiet", o.quiet, "Suppress progress output");

  auto* tax = app.add_subcommand("taxonomy-check", "Validate a taxonomy file");
  tax->add_option("file", o.tree, "child<TAB>parent edge list")->required();

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--config", o.config, "World config JSON (default world if omitted)");
  gen->add_option("--out", o.out, "Output directory")->required();
  auto* gen_seed = gen->add_option("--seed", o.seed, "Seed (default 7)");

  auto* tr = app.add_subcommand("train", "Train a detector");
  tr->add_option("--data", o.data, "Dataset directory from gen-data")->required();
  tr->add_option("--taxonomy", o.taxonomy, "Taxonomy file")->required();
  tr->add_option("--config", o.config, "key=value training config");
  tr->add_option("--out", o.out, "Output directory")->required();
  auto* tr_seed = tr->add_option("--seed", o.seed, "Seed (default 7)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--data", o.data, "Dataset directory from gen-data")->required();
  ev->add_option("--taxonomy", o.taxonomy, "Taxonomy file")->required();
  ev->add_option("--ckpt", o.ckpt, "Checkpoint file")->required();
  ev->add_option("--out", o.out, "Output directory")->required();
  ev->add_option("--proposal-counts", o.counts, "Ascending proposal budgets")
      ->default_str("10,20,50,100,200,300");
  ev->add_option("--config", o.config, "Training config (detector settings)");

  auto* demo = app.add_subcommand("demo", "gen-data, train and eval with small defaults");
  demo->add_option("--seed", o.seed, "Seed (default 7)");
  demo->add_option("--out", o.out, "Output directory")->default_str("demo_out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << (active_subcommand(app) ? active_subcommand(app)->help() : app.help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    auto* sub = active_subcommand(app);
    err << (sub ? sub->help() : app.help());
    return 2;
  }

  std::ostringstream sink;
  std::ostream& log = o.quiet ? sink : out;
  try {
    if (tax->parsed()) return taxonomy_check(o, out);
    if (gen->parsed()) return gen_data(o, gen_seed->count() > 0, log);
    if (tr->parsed()) return train_cmd(o, tr_seed->count() > 0, log);
    if (ev->parsed()) return eval_cmd(o, out);
    if (demo->parsed()) {
      if (o.out.empty()) o.out = "demo_out";
      const EvalReport report = run_demo(o.seed, o.out, log);
      out << format_report(report);
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: IoError: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace csdet
