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

#include "stalefl/history.hpp"

#include <algorithm>
#include <string>

#include "stalefl/errors.hpp"

namespace stalefl {

GlobalHistory::GlobalHistory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw PreconditionError("history capacity must be >= 1");
}

void GlobalHistory::push(int epoch, ParamVector weights) {
  if (!snapshots_.empty() && epoch != latest_epoch() + 1) {
    throw PreconditionError("history epochs must be consecutive: got " +
                            std::to_string(epoch) + " after " +
                            std::to_string(latest_epoch()));
  }
  if (snapshots_.empty()) first_epoch_ = epoch;
  snapshots_.push_back(std::move(weights));
  if (snapshots_.size() > capacity_) {
    snapshots_.pop_front();
    ++first_epoch_;
  }
}

bool GlobalHistory::contains(int epoch) const {
  return !snapshots_.empty() && epoch >= first_epoch_ && epoch <= latest_epoch();
}

const ParamVector& GlobalHistory::at(int epoch) const {
  if (!contains(epoch)) {
    throw PreconditionError("global snapshot for epoch " + std::to_string(epoch) +
                            " is not retained");
  }
  return snapshots_[static_cast<std::size_t>(epoch - first_epoch_)];
}

const ParamVector& GlobalHistory::latest() const {
  if (snapshots_.empty()) throw PreconditionError("history is empty");
  return snapshots_.back();
}

int GlobalHistory::latest_epoch() const {
  if (snapshots_.empty()) throw PreconditionError("history is empty");
  return first_epoch_ + static_cast<int>(snapshots_.size()) - 1;
}

int GlobalHistory::oldest_epoch() const {
  if (snapshots_.empty()) throw PreconditionError("history is empty");
  return first_epoch_;
}

void DelayQueue::push(ModelUpdate update) {
  if (update.arrival_epoch < update.base_epoch) {
    throw PreconditionError("update arrives before its base epoch");
  }
  by_arrival_[update.arrival_epoch].push_back(std::move(update));
}

std::vector<ModelUpdate> DelayQueue::pop_arrivals(int epoch) {
  auto it = by_arrival_.find(epoch);
  if (it == by_arrival_.end()) return {};
  std::vector<ModelUpdate> out = std::move(it->second);
  by_arrival_.erase(it);
  std::stable_sort(out.begin(), out.end(), [](const ModelUpdate& a, const ModelUpdate& b) {
    return a.client_id != b.client_id ? a.client_id < b.client_id
                                      : a.base_epoch < b.base_epoch;
  });
  return out;
}

bool DelayQueue::in_flight(int client_id) const {
  for (const auto& [arrival, ups] : by_arrival_) {
    for (const auto& u : ups) {
      if (u.client_id == client_id) return true;
    }
  }
  return false;
}

std::size_t DelayQueue::pending() const {
  std::size_t n = 0;
  for (const auto& [arrival, ups] : by_arrival_) n += ups.size();
  return n;
}

}  // namespace stalefl
