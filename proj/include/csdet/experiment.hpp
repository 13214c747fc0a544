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

// End-to-end runs: generate a world, train, evaluate, write artifacts.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "csdet/evaluator.hpp"
#include "csdet/synthworld.hpp"
#include "csdet/trainer.hpp"

namespace csdet {

// Defaults sized so the demo finishes in well under five minutes.
WorldConfig demo_world_config(std::uint64_t seed = 7);
TrainConfig demo_train_config(std::uint64_t seed = 7);

// Adds ancestor categories as extra image-level pools.
WorldConfig with_ancestor_pools(WorldConfig config, const std::vector<std::string>& ancestors);

struct RunResult {
  TrainResult train;
  EvalReport report;
};

// Trains on world.train and evaluates on world.eval with the model's
// taxonomy as ground-truth taxonomy.
RunResult train_and_evaluate(const GeneratedWorld& world, const Taxonomy& taxonomy,
                             const TrainConfig& config, const EvalOptions& options = {});

// Same world, with the image-level images replaced by their hidden boxes.
RunResult train_fully_supervised(const GeneratedWorld& world, const Taxonomy& taxonomy,
                                 const TrainConfig& config, const EvalOptions& options = {});

// Writes <out>/data (gen-data layout), <out>/train (log.csv, epoch<N>.ckpt,
// train.cfg) and <out>/eval (report CSVs). Progress goes to `log`.
EvalReport run_demo(std::uint64_t seed, const std::filesystem::path& out, std::ostream& log);

}  // namespace csdet
