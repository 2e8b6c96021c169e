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

#include "ldpdl/transport.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "absl/strings/numbers.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "ldpdl/status_macros.h"

namespace ldpdl {
namespace {

constexpr int kAcceptPollMillis = 100;
constexpr size_t kReadChunk = 64 * 1024;

absl::Status ErrnoError(absl::string_view what) {
  return absl::UnavailableError(
      absl::StrFormat("%s: %s", what, std::strerror(errno)));
}

bool SendAll(int fd, absl::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    bytes.remove_prefix(static_cast<size_t>(n));
  }
  return true;
}

void SetNoDelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

absl::StatusOr<sockaddr_in> ToSockaddr(const HostPort& hp) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(hp.port);
  const std::string host = hp.host == "localhost" ? "127.0.0.1" : hp.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    return absl::InvalidArgumentError(
        absl::StrFormat("'%s' is not an IPv4 address", hp.host));
  }
  return addr;
}

ErrorMsg MakeError(WireErrorCode code, absl::string_view text) {
  return ErrorMsg{static_cast<uint16_t>(code), std::string(text)};
}

}  // namespace

absl::StatusOr<HostPort> ParseHostPort(absl::string_view address) {
  const size_t colon = address.rfind(':');
  if (colon == absl::string_view::npos || colon == 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("address '%s' is not host:port", address));
  }
  int port;
  if (!absl::SimpleAtoi(address.substr(colon + 1), &port) || port < 0 ||
      port > 65535) {
    return absl::InvalidArgumentError(
        absl::StrFormat("address '%s' has an invalid port", address));
  }
  HostPort hp{std::string(address.substr(0, colon)),
              static_cast<uint16_t>(port)};
  LDPDL_RETURN_IF_ERROR(ToSockaddr(hp).status());
  return hp;
}

OwnerNode::OwnerNode(int listen_fd, std::string host, uint16_t port,
                     std::shared_ptr<DataOwner> owner)
    : listen_fd_(listen_fd),
      host_(std::move(host)),
      port_(port),
      owner_(std::move(owner)) {}

absl::StatusOr<std::unique_ptr<OwnerNode>> OwnerNode::Start(
    absl::string_view bind_address, std::shared_ptr<DataOwner> owner) {
  if (owner == nullptr) return absl::InvalidArgumentError("owner is null");
  LDPDL_ASSIGN_OR_RETURN(HostPort hp, ParseHostPort(bind_address));
  LDPDL_ASSIGN_OR_RETURN(sockaddr_in addr, ToSockaddr(hp));
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return ErrnoError("socket");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd, 64) != 0) {
    absl::Status status = ErrnoError(absl::StrFormat("bind %s", bind_address));
    ::close(fd);
    return status;
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  std::unique_ptr<OwnerNode> node(
      new OwnerNode(fd, hp.host, ntohs(addr.sin_port), std::move(owner)));
  node->acceptor_ = std::thread(&OwnerNode::AcceptLoop, node.get());
  return node;
}

OwnerNode::~OwnerNode() { Shutdown(); }

std::string OwnerNode::address() const {
  const std::string host = host_ == "0.0.0.0" ? "127.0.0.1" : host_;
  return absl::StrFormat("%s:%d", host, port_);
}

void OwnerNode::Shutdown() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (int fd : connections_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (std::thread& t : workers) t.join();
  stopped_.notify_all();
}

void OwnerNode::Wait() {
  std::unique_lock<std::mutex> lock(mu_);
  stopped_.wait(lock, [this] { return stopping_.load() && workers_.empty(); });
}

void OwnerNode::AcceptLoop() {
  while (!stopping_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, kAcceptPollMillis) <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    SetNoDelay(fd);
    std::lock_guard<std::mutex> lock(mu_);
    if (stopping_.load()) {
      ::close(fd);
      break;
    }
    connections_.push_back(fd);
    workers_.emplace_back(&OwnerNode::Serve, this, fd);
  }
}

void OwnerNode::Serve(int fd) {
  FrameDecoder decoder;
  bool greeted = false;
  bool open = true;
  std::string chunk(kReadChunk, '\0');

  // Replies to one request; returns false when the connection must close.
  auto handle = [&](absl::string_view payload) -> bool {
    absl::StatusOr<Message> request = DecodePayload(payload);
    if (!request.ok()) {
      const bool bad_version =
          payload.size() >= 1 && static_cast<uint8_t>(payload[0]) != kWireVersion;
      SendAll(fd, EncodeFrame(MakeError(bad_version
                                            ? WireErrorCode::kUnsupportedVersion
                                            : WireErrorCode::kMalformed,
                                        request.status().message())));
      return false;
    }
    if (const auto* hello = std::get_if<HelloMsg>(&*request)) {
      if (greeted || hello->owner_id != owner_->owner_id() ||
          hello->k != static_cast<uint32_t>(owner_->class_count()) ||
          hello->mechanism != owner_->mechanism()) {
        SendAll(fd, EncodeFrame(MakeError(
                        WireErrorCode::kHandshake,
                        absl::StrFormat("node serves owner %d with k=%d and %s",
                                        owner_->owner_id(),
                                        owner_->class_count(),
                                        MechanismName(owner_->mechanism())))));
        return false;
      }
      greeted = true;
      return SendAll(fd, EncodeFrame(HelloOkMsg{
                             owner_->owner_id(),
                             static_cast<uint32_t>(owner_->class_count()),
                             static_cast<uint32_t>(owner_->input_width()),
                             owner_->mechanism()}));
    }
    const auto* query = std::get_if<QueryMsg>(&*request);
    if (query == nullptr) {
      SendAll(fd, EncodeFrame(MakeError(WireErrorCode::kMalformed,
                                        "only HELLO and QUERY are accepted")));
      return false;
    }
    if (!greeted) {
      SendAll(fd, EncodeFrame(MakeError(WireErrorCode::kHandshake,
                                        "QUERY before HELLO")));
      return false;
    }
    if (query->features.size() != static_cast<size_t>(owner_->input_width())) {
      SendAll(fd, EncodeFrame(MakeError(
                      WireErrorCode::kWidthMismatch,
                      absl::StrFormat("query has %d features, expected %d",
                                      query->features.size(),
                                      owner_->input_width()))));
      return false;
    }
    absl::StatusOr<OwnerReply> reply =
        owner_->Answer(query->sample_id, query->features, query->eps_i);
    if (!reply.ok()) {
      SendAll(fd, EncodeFrame(MakeError(WireErrorCode::kRejected,
                                        reply.status().message())));
      return false;
    }
    if (reply->exhausted) {
      return SendAll(fd, EncodeFrame(ExhaustedMsg{query->sample_id}));
    }
    return SendAll(fd, EncodeFrame(AnswerMsg{query->sample_id,
                                             std::move(reply->answer.coords)}));
  };

  while (open && !stopping_.load()) {
    absl::StatusOr<std::optional<std::string>> payload = decoder.Next();
    if (!payload.ok()) break;  // oversized frame: close without replying
    if (payload->has_value()) {
      open = handle(**payload);
      continue;
    }
    const ssize_t n = ::recv(fd, chunk.data(), chunk.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    decoder.Append(absl::string_view(chunk.data(), static_cast<size_t>(n)));
  }

  std::lock_guard<std::mutex> lock(mu_);
  ::close(fd);
  std::erase(connections_, fd);
}

absl::StatusOr<std::unique_ptr<RemoteOwnerClient>> RemoteOwnerClient::Connect(
    absl::string_view address, int owner_id, int k, MechanismKind mechanism,
    std::chrono::milliseconds timeout) {
  LDPDL_ASSIGN_OR_RETURN(HostPort hp, ParseHostPort(address));
  LDPDL_ASSIGN_OR_RETURN(sockaddr_in addr, ToSockaddr(hp));
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0);
  if (fd < 0) return ErrnoError("socket");
  std::unique_ptr<RemoteOwnerClient> client(
      new RemoteOwnerClient(fd, owner_id, k, mechanism, timeout));

  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    if (errno != EINPROGRESS) {
      return ErrnoError(absl::StrFormat("connect %s", address));
    }
    pollfd pfd{fd, POLLOUT, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (ready == 0) {
      return absl::DeadlineExceededError(
          absl::StrFormat("connect %s timed out", address));
    }
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (ready < 0 || err != 0) {
      errno = ready < 0 ? errno : err;
      return ErrnoError(absl::StrFormat("connect %s", address));
    }
  }
  ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) & ~O_NONBLOCK);
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  SetNoDelay(fd);

  LDPDL_ASSIGN_OR_RETURN(
      Message reply,
      client->RoundTrip(HelloMsg{owner_id, static_cast<uint32_t>(k), mechanism}));
  const auto* ok = std::get_if<HelloOkMsg>(&reply);
  if (ok == nullptr || ok->owner_id != owner_id ||
      ok->k != static_cast<uint32_t>(k) || ok->mechanism != mechanism) {
    if (const auto* error = std::get_if<ErrorMsg>(&reply)) {
      return absl::FailedPreconditionError(absl::StrFormat(
          "owner %d at %s refused the handshake: %s", owner_id, address,
          error->text));
    }
    return absl::DataLossError(
        absl::StrFormat("owner %d at %s sent a bad handshake reply", owner_id,
                        address));
  }
  client->input_width_ = static_cast<int>(ok->input_width);
  return client;
}

RemoteOwnerClient::~RemoteOwnerClient() {
  if (fd_ >= 0) ::close(fd_);
}

absl::StatusOr<Message> RemoteOwnerClient::RoundTrip(const Message& request) {
  if (broken_) {
    return absl::UnavailableError(
        absl::StrFormat("connection to owner %d is unusable", owner_id_));
  }
  if (!SendAll(fd_, EncodeFrame(request))) {
    broken_ = true;
    return ErrnoError(absl::StrFormat("send to owner %d", owner_id_));
  }
  std::string chunk(kReadChunk, '\0');
  while (true) {
    absl::StatusOr<std::optional<std::string>> payload = decoder_.Next();
    if (!payload.ok()) {
      broken_ = true;
      return absl::DataLossError(payload.status().message());
    }
    if (payload->has_value()) {
      absl::StatusOr<Message> reply = DecodePayload(**payload);
      if (!reply.ok()) {
        broken_ = true;
        return absl::DataLossError(absl::StrFormat(
            "owner %d: %s", owner_id_, reply.status().message()));
      }
      return reply;
    }
    const ssize_t n = ::recv(fd_, chunk.data(), chunk.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      broken_ = true;
      return absl::DeadlineExceededError(absl::StrFormat(
          "owner %d did not reply within %d ms", owner_id_, timeout_.count()));
    }
    if (n <= 0) {
      broken_ = true;
      return absl::UnavailableError(
          absl::StrFormat("owner %d closed the connection", owner_id_));
    }
    decoder_.Append(absl::string_view(chunk.data(), static_cast<size_t>(n)));
  }
}

absl::StatusOr<OwnerReply> RemoteOwnerClient::Query(int64_t sample_id,
                                                    absl::Span<const double> x,
                                                    double eps_i) {
  LDPDL_ASSIGN_OR_RETURN(
      Message reply,
      RoundTrip(QueryMsg{sample_id, eps_i, std::vector<double>(x.begin(), x.end())}));
  if (auto* answer = std::get_if<AnswerMsg>(&reply)) {
    if (answer->sample_id != sample_id ||
        answer->coords.size() != static_cast<size_t>(k_)) {
      broken_ = true;
      return absl::DataLossError(absl::StrFormat(
          "owner %d answered sample %d with %d values; expected sample %d "
          "with %d",
          owner_id_, answer->sample_id, answer->coords.size(), sample_id, k_));
    }
    return OwnerReply{false,
                      PerturbedVector{std::move(answer->coords), mechanism_, eps_i}};
  }
  if (const auto* exhausted = std::get_if<ExhaustedMsg>(&reply)) {
    if (exhausted->sample_id != sample_id) {
      broken_ = true;
      return absl::DataLossError("EXHAUSTED reply for a different sample");
    }
    return OwnerReply{true, {}};
  }
  broken_ = true;
  if (const auto* error = std::get_if<ErrorMsg>(&reply)) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "owner %d rejected the query (code %d): %s", owner_id_, error->code,
        error->text));
  }
  return absl::DataLossError(
      absl::StrFormat("owner %d sent an unexpected message kind", owner_id_));
}

absl::StatusOr<OwnerDirectory> ParseDirectory(const Config& config,
                                              int num_owners) {
  OwnerDirectory directory;
  std::map<int, std::string> key_of;
  for (const std::string& key : config.KeysWithPrefix("owner.")) {
    int id;
    if (!absl::SimpleAtoi(absl::string_view(key).substr(6), &id) || id < 0) {
      return absl::InvalidArgumentError(
          absl::StrFormat("directory key '%s' does not name an owner id", key));
    }
    LDPDL_ASSIGN_OR_RETURN(std::string address, config.GetString(key, ""));
    LDPDL_RETURN_IF_ERROR(ParseHostPort(address).status());
    if (auto it = key_of.find(id); it != key_of.end()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "owner id %d appears twice in the directory ('%s' and '%s')", id,
          it->second, key));
    }
    if (id >= num_owners) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "directory entry '%s' is outside the %d planned owners", key,
          num_owners));
    }
    key_of[id] = key;
    directory[id] = address;
  }
  std::vector<int> missing;
  for (int id = 0; id < num_owners; ++id) {
    if (!directory.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    return absl::InvalidArgumentError(
        absl::StrFormat("no address for owner id(s) %s",
                        absl::StrJoin(missing, ", ")));
  }
  return directory;
}

absl::StatusOr<std::unique_ptr<RemoteFleet>> RemoteFleet::Connect(
    const OwnerDirectory& directory, int k, MechanismKind mechanism,
    std::chrono::milliseconds timeout) {
  std::vector<std::unique_ptr<RemoteOwnerClient>> clients;
  int expected = 0;
  for (const auto& [id, address] : directory) {
    if (id != expected++) {
      return absl::InvalidArgumentError("directory ids must be 0..L-1");
    }
    LDPDL_ASSIGN_OR_RETURN(
        std::unique_ptr<RemoteOwnerClient> client,
        RemoteOwnerClient::Connect(address, id, k, mechanism, timeout));
    if (!clients.empty() &&
        client->input_width() != clients.front()->input_width()) {
      return absl::FailedPreconditionError(
          "owner nodes disagree on the input width");
    }
    clients.push_back(std::move(client));
  }
  return std::unique_ptr<RemoteFleet>(new RemoteFleet(std::move(clients)));
}

absl::StatusOr<OwnerReply> RemoteFleet::Query(int owner_id, int64_t sample_id,
                                              absl::Span<const double> x,
                                              double eps_i) {
  if (owner_id < 0 || owner_id >= size()) {
    return absl::NotFoundError(absl::StrFormat("no owner with id %d", owner_id));
  }
  return clients_[owner_id]->Query(sample_id, x, eps_i);
}

}  // namespace ldpdl
