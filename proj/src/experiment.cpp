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

#include "csdet/experiment.hpp"

#include <ostream>

#include "binary_io.hpp"
#include "csdet/text.hpp"

namespace csdet {

WorldConfig demo_world_config(std::uint64_t seed) {
  WorldConfig c = default_world_config();
  c.seed = seed;
  return c;
}

TrainConfig demo_train_config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.base_lr = 0.3;
  c.total_epochs = 30;
  c.lr_drop_epoch = 24;
  return c;
}

WorldConfig with_ancestor_pools(WorldConfig config, const std::vector<std::string>& ancestors) {
  for (const auto& a : ancestors) config.image_level.push_back(a);
  return config;
}

RunResult train_and_evaluate(const GeneratedWorld& world, const Taxonomy& taxonomy,
                             const TrainConfig& config, const EvalOptions& options) {
  RunResult r;
  r.train = train(world.train, taxonomy, config);
  EvalOptions o = options;
  o.detector = config.detector;
  r.report = evaluate(r.train.params, taxonomy, taxonomy, world.eval, world.splits, o);
  return r;
}

RunResult train_fully_supervised(const GeneratedWorld& world, const Taxonomy& taxonomy,
                                 const TrainConfig& config, const EvalOptions& options) {
  GeneratedWorld full = world;
  full.train = fully_supervised(world);
  return train_and_evaluate(full, taxonomy, config, options);
}

EvalReport run_demo(std::uint64_t seed, const std::filesystem::path& out, std::ostream& log) {
  const WorldConfig wc = demo_world_config(seed);
  log << "generating world (seed " << seed << ")\n";
  const GeneratedWorld world = generate_dataset(wc);
  save_world(world, wc, out / "data");
  const Taxonomy taxonomy = build_taxonomy(wc.taxonomy);

  const TrainConfig tc = demo_train_config(seed);
  const auto train_dir = out / "train";
  std::filesystem::create_directories(train_dir);
  write_file(train_dir / "train.cfg", train_config_to_text(tc));
  log << "training " << world.train.images.size() << " images, " << tc.total_epochs
      << " epochs\n";
  const TrainResult result =
      train(world.train, taxonomy, tc, [&](int epoch, const ModelParams& params) {
        save_checkpoint(params, taxonomy, train_dir / ("epoch" + std::to_string(epoch) + ".ckpt"));
        log << "  epoch " << epoch << " done\n";
      });
  write_log_csv(result.log, train_dir / "log.csv");
  if (!result.log.empty()) {
    log << "final l_cross " << format_double(result.log.back().loss.l_cross) << "\n";
  }

  EvalOptions eo;
  eo.detector = tc.detector;
  log << "evaluating " << world.eval.images.size() << " images\n";
  const EvalReport report =
      evaluate(result.params, taxonomy, taxonomy, world.eval, world.splits, eo);
  write_report(report, out / "eval");
  return report;
}

}  // namespace csdet
