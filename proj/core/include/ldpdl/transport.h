// Copyright 2026 The ldpdl Authors
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

#ifndef LDPDL_TRANSPORT_H_
#define LDPDL_TRANSPORT_H_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "ldpdl/config.h"
#include "ldpdl/protocol.h"
#include "ldpdl/wire.h"

namespace ldpdl {

struct HostPort {
  std::string host;
  uint16_t port = 0;
};

// Parses "host:port" (IPv4 dotted quad or "localhost").
absl::StatusOr<HostPort> ParseHostPort(absl::string_view address);

// Serves one data owner over TCP. Each connection gets its own thread and
// handles requests in order; budget charging is serialized by DataOwner.
// Malformed frames get an ERROR reply and the connection is closed; a frame
// announcing more than kMaxFrameBytes closes the connection at once.
class OwnerNode {
 public:
  // `bind_address` may use port 0 to pick a free port.
  static absl::StatusOr<std::unique_ptr<OwnerNode>> Start(
      absl::string_view bind_address, std::shared_ptr<DataOwner> owner);

  ~OwnerNode();
  OwnerNode(const OwnerNode&) = delete;
  OwnerNode& operator=(const OwnerNode&) = delete;

  uint16_t port() const { return port_; }
  // "host:port" that a client can connect to.
  std::string address() const;

  // Stops accepting, closes every connection and joins all threads.
  void Shutdown();
  // Blocks until Shutdown is called from another thread.
  void Wait();

 private:
  OwnerNode(int listen_fd, std::string host, uint16_t port,
            std::shared_ptr<DataOwner> owner);
  void AcceptLoop();
  void Serve(int fd);

  const int listen_fd_;
  const std::string host_;
  const uint16_t port_;
  const std::shared_ptr<DataOwner> owner_;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<int> connections_;
  std::vector<std::thread> workers_;
  std::thread acceptor_;
  std::condition_variable stopped_;
};

// Client side of one owner connection. One request is in flight at a time.
class RemoteOwnerClient {
 public:
  // Connects and performs the HELLO handshake, checking that the node serves
  // `owner_id` with `k` classes and `mechanism`.
  static absl::StatusOr<std::unique_ptr<RemoteOwnerClient>> Connect(
      absl::string_view address, int owner_id, int k, MechanismKind mechanism,
      std::chrono::milliseconds timeout);

  ~RemoteOwnerClient();
  RemoteOwnerClient(const RemoteOwnerClient&) = delete;
  RemoteOwnerClient& operator=(const RemoteOwnerClient&) = delete;

  // Transport failures are Unavailable, timeouts DeadlineExceeded, protocol
  // violations DataLoss, and ERROR replies FailedPrecondition. Exhaustion is
  // an OwnerReply, never an error.
  absl::StatusOr<OwnerReply> Query(int64_t sample_id,
                                   absl::Span<const double> x, double eps_i);

  int owner_id() const { return owner_id_; }
  int input_width() const { return input_width_; }

 private:
  RemoteOwnerClient(int fd, int owner_id, int k, MechanismKind mechanism,
                    std::chrono::milliseconds timeout)
      : fd_(fd),
        owner_id_(owner_id),
        k_(k),
        mechanism_(mechanism),
        timeout_(timeout) {}
  absl::StatusOr<Message> RoundTrip(const Message& request);

  int fd_;
  const int owner_id_;
  const int k_;
  const MechanismKind mechanism_;
  const std::chrono::milliseconds timeout_;
  int input_width_ = 0;
  bool broken_ = false;
  FrameDecoder decoder_;
};

// Owner id to "host:port".
using OwnerDirectory = std::map<int, std::string>;

// Reads `owner.<id> = host:port` entries. Ids that appear twice (for example
// "owner.3" and "owner.03") are an error, as is any id in [0, num_owners)
// without an address.
absl::StatusOr<OwnerDirectory> ParseDirectory(const Config& config,
                                              int num_owners);

// An OwnerFleet whose owners are remote nodes.
class RemoteFleet : public OwnerFleet {
 public:
  static absl::StatusOr<std::unique_ptr<RemoteFleet>> Connect(
      const OwnerDirectory& directory, int k, MechanismKind mechanism,
      std::chrono::milliseconds timeout);

  int size() const override { return static_cast<int>(clients_.size()); }
  absl::StatusOr<OwnerReply> Query(int owner_id, int64_t sample_id,
                                   absl::Span<const double> x,
                                   double eps_i) override;

 private:
  explicit RemoteFleet(std::vector<std::unique_ptr<RemoteOwnerClient>> clients)
      : clients_(std::move(clients)) {}
  std::vector<std::unique_ptr<RemoteOwnerClient>> clients_;
};

}  // namespace ldpdl

#endif  // LDPDL_TRANSPORT_H_
