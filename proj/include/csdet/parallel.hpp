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

// Index-parallel loop with results written per index, so the outcome does
// not depend on scheduling. Worker count comes from CSRF_THREADS (0 or unset
// means hardware concurrency).

#pragma once

#include <cstddef>
#include <functional>

namespace csdet {

int worker_count();

// Runs fn(i) for i in [0, n). Exceptions are rethrown on the calling thread
// (the one from the lowest failing index).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace csdet
