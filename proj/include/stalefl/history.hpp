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

#include <deque>
#include <map>
#include <vector>

#include "stalefl/nn.hpp"
#include "stalefl/update.hpp"

namespace stalefl {

// The last `capacity` global snapshots, keyed by consecutive epochs.
class GlobalHistory {
 public:
  explicit GlobalHistory(std::size_t capacity);

  // Epochs must be pushed consecutively.
  void push(int epoch, ParamVector weights);

  bool contains(int epoch) const;
  // Throws PreconditionError if the epoch was evicted or never pushed.
  const ParamVector& at(int epoch) const;
  const ParamVector& latest() const;
  int latest_epoch() const;
  int oldest_epoch() const;
  std::size_t size() const { return snapshots_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  int first_epoch_ = 0;
  std::deque<ParamVector> snapshots_;
};

// In-flight client updates keyed by arrival epoch.
class DelayQueue {
 public:
  void push(ModelUpdate update);
  // Removes and returns updates arriving at `epoch`, ordered by client id
  // then base epoch.
  std::vector<ModelUpdate> pop_arrivals(int epoch);
  bool in_flight(int client_id) const;
  std::size_t pending() const;

 private:
  std::map<int, std::vector<ModelUpdate>> by_arrival_;
};

}  // namespace stalefl
