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

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "distgame/common/types.h"
#include "distgame/game/comm_graph.h"

namespace distgame {

/// Opaque message body. The fabric only measures its size.
struct Payload {
  std::vector<Matrix> blocks;

  std::size_t bytes() const;
};

/// sender -> receiver -> payload
using Outbox = std::map<RobotId, std::map<RobotId, Payload>>;
/// receiver -> sender -> payload
using Inbox = std::map<RobotId, std::map<RobotId, Payload>>;

/// Messages posted in one synchronous round, keyed by (sender, receiver).
struct RoundMailbox {
  long round = 0;
  std::map<std::pair<RobotId, RobotId>, Payload> messages;
};

struct AuditRecord {
  long round = 0;
  RobotId sender = 0;
  RobotId receiver = 0;
  std::size_t bytes = 0;
};

/// Traffic log. Directed (sender, receiver) keys.
struct MessageAudit {
  std::map<std::pair<RobotId, RobotId>, long> counts;
  std::map<std::pair<RobotId, RobotId>, std::size_t> bytes;
  std::vector<AuditRecord> violations;
  std::vector<AuditRecord> records;
  bool truncated = false;

  bool clean() const { return violations.empty(); }
  long total_messages() const;
  /// Columns: round,sender,receiver,bytes.
  void write_csv(const std::string& path) const;
};

struct FabricOptions {
  /// Strict: a non-neighbour send throws LocalityViolation. Permissive: it is
  /// dropped and logged as a violation.
  bool strict = true;
  /// Per-message records kept for CSV export; totals are always kept.
  std::size_t record_limit = 1'000'000;
};

/// Bulk-synchronous message passing restricted to graph edges. Every
/// payload of a round is posted before any is delivered.
class CommFabric {
 public:
  explicit CommFabric(CommGraph graph, FabricOptions options = {});

  /// One round. The returned inbox has an entry (possibly empty) for every robot.
  Inbox exchange(const Outbox& outbound);

  /// Sends the same payload from each robot to all of its neighbours.
  Inbox broadcast_to_neighbors(const std::vector<Payload>& per_robot);

  long round() const { return round_; }
  const MessageAudit& audit() const { return audit_; }
  const CommGraph& graph() const { return graph_; }
  const FabricOptions& options() const { return options_; }

 private:
  CommGraph graph_;
  FabricOptions options_;
  long round_ = 0;
  MessageAudit audit_;
};

}  // namespace distgame
