// Copyright 2026 The spikefirst Authors
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

// Umbrella header.

#ifndef SPIKEFIRST_SPIKEFIRST_HPP_
#define SPIKEFIRST_SPIKEFIRST_HPP_

#include "spikefirst/architecture.hpp"
#include "spikefirst/bptt.hpp"
#include "spikefirst/coding.hpp"
#include "spikefirst/datasets.hpp"
#include "spikefirst/errors.hpp"
#include "spikefirst/metrics.hpp"
#include "spikefirst/network.hpp"
#include "spikefirst/neuron.hpp"
#include "spikefirst/rng.hpp"
#include "spikefirst/tensor.hpp"
#include "spikefirst/trainer.hpp"
#include "spikefirst/tuner.hpp"

#endif  // SPIKEFIRST_SPIKEFIRST_HPP_
