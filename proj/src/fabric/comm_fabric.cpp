/*
 Copyright 2026 The distgame Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "distgame/fabric/comm_fabric.h"

#include <fstream>
#include <utility>

#include "distgame/common/errors.h"

namespace distgame {

std::size_t Payload::bytes() const {
  std::size_t total = 0;
  for (const auto& b : blocks) total += static_cast<std::size_t>(b.size()) * sizeof(double);
  return total;
}

long MessageAudit::total_messages() const {
  long n = 0;
  for (const auto& [edge, c] : counts) n += c;
  return n;
}

void MessageAudit::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write audit file " + path);
  out << "# distgame audit v1";
  if (truncated) out << " truncated=1";
  out << " violations=" << violations.size() << "\n";
  out << "round,sender,receiver,bytes\n";
  for (const auto& r : records) {
    out << r.round << ',' << r.sender << ',' << r.receiver << ',' << r.bytes << '\n';
  }
}

CommFabric::CommFabric(CommGraph graph, FabricOptions options)
    : graph_(std::move(graph)), options_(options) {}

Inbox CommFabric::exchange(const Outbox& outbound) {
  RoundMailbox box;
  box.round = ++round_;
  for (const auto& [sender, targets] : outbound) {
    for (const auto& [receiver, payload] : targets) {
      const bool ok = sender >= 0 && sender < graph_.size() && receiver >= 0 &&
                      receiver < graph_.size() && graph_.adjacent(sender, receiver);
      if (!ok) {
        audit_.violations.push_back({box.round, sender, receiver, payload.bytes()});
        if (options_.strict) {
          throw LocalityViolation("robot " + std::to_string(sender) + " addressed robot " +
                                  std::to_string(receiver) + ", which is not a neighbour");
        }
        continue;
      }
      box.messages.emplace(std::make_pair(sender, receiver), payload);
    }
  }

  Inbox inbox;
  for (RobotId i = 0; i < graph_.size(); ++i) inbox[i];
  for (auto& [key, payload] : box.messages) {
    const auto [sender, receiver] = key;
    const std::size_t b = payload.bytes();
    audit_.counts[key] += 1;
    audit_.bytes[key] += b;
    if (audit_.records.size() < options_.record_limit) {
      audit_.records.push_back({box.round, sender, receiver, b});
    } else {
      audit_.truncated = true;
    }
    inbox[receiver].emplace(sender, std::move(payload));
  }
  return inbox;
}

Inbox CommFabric::broadcast_to_neighbors(const std::vector<Payload>& per_robot) {
  Outbox out;
  for (RobotId i = 0; i < static_cast<RobotId>(per_robot.size()); ++i) {
    for (RobotId j : graph_.neighbors(i)) out[i][j] = per_robot[i];
  }
  return exchange(out);
}

}  // namespace distgame
