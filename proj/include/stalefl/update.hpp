/*
 * Copyright 2026 The StaleFL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>

#include "stalefl/nn.hpp"

namespace stalefl {

// A client's upload: trained weights minus the global snapshot it started
// from (base_epoch), delivered to the server at arrival_epoch.
struct ModelUpdate {
  int client_id = 0;
  int base_epoch = 0;
  int arrival_epoch = 0;
  ParamVector delta;
  std::size_t num_samples = 1;

  int staleness() const { return arrival_epoch - base_epoch; }
};

}  // namespace stalefl
