// Copyright 2026 The Flatmeter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLATMETER_EXPERIMENT_POOL_HPP_
#define FLATMETER_EXPERIMENT_POOL_HPP_

#include <cstddef>
#include <functional>

namespace flatmeter {

// Number of workers for a --jobs value; 0 means one per hardware thread.
std::size_t ResolveJobs(std::size_t jobs);

// Runs task(0..count-1) on up to `jobs` threads. Tasks must write only to
// their own outputs. If any task throws, the remaining unstarted tasks are
// skipped and the exception of the lowest failing index is rethrown, so
// the reported error does not depend on scheduling.
void ParallelFor(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task);

}  // namespace flatmeter

#endif  // FLATMETER_EXPERIMENT_POOL_HPP_
