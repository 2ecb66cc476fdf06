// Copyright 2026 The rscmjp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.
#ifndef RSCMJP_RSCMJP_HPP_
#define RSCMJP_RSCMJP_HPP_

#include "rscmjp/diagnostics.hpp"
#include "rscmjp/error.hpp"
#include "rscmjp/estimators.hpp"
#include "rscmjp/information.hpp"
#include "rscmjp/io.hpp"
#include "rscmjp/likelihood.hpp"
#include "rscmjp/linalg.hpp"
#include "rscmjp/model.hpp"
#include "rscmjp/parallel.hpp"
#include "rscmjp/rng.hpp"
#include "rscmjp/simulator.hpp"

#endif  // RSCMJP_RSCMJP_HPP_
