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

#ifndef LDPDL_WIRE_H_
#define LDPDL_WIRE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "ldpdl/mechanisms.h"

namespace ldpdl {

// Framed binary protocol between the data user and owner nodes. Every frame
// is a big-endian u32 payload length followed by the payload: u8 version,
// u8 kind, then the kind's body. Integers are big-endian; doubles travel as
// their big-endian IEEE-754 bit patterns. See docs/wire_protocol.md.
inline constexpr uint8_t kWireVersion = 1;
inline constexpr uint32_t kMaxFrameBytes = 16u * 1024u * 1024u;

enum class MessageKind : uint8_t {
  kHello = 1,
  kHelloOk = 2,
  kQuery = 3,
  kAnswer = 4,
  kExhausted = 5,
  kError = 6,
};

enum class WireErrorCode : uint16_t {
  kMalformed = 1,
  kUnsupportedVersion = 2,
  kHandshake = 3,
  kWidthMismatch = 4,
  kRejected = 5,
};

struct HelloMsg {
  int32_t owner_id = 0;
  uint32_t k = 0;
  MechanismKind mechanism = MechanismKind::kPiecewise;
  bool operator==(const HelloMsg&) const = default;
};

struct HelloOkMsg {
  int32_t owner_id = 0;
  uint32_t k = 0;
  uint32_t input_width = 0;
  MechanismKind mechanism = MechanismKind::kPiecewise;
  bool operator==(const HelloOkMsg&) const = default;
};

struct QueryMsg {
  int64_t sample_id = 0;
  double eps_i = 0.0;
  std::vector<double> features;
  bool operator==(const QueryMsg&) const = default;
};

struct AnswerMsg {
  int64_t sample_id = 0;
  std::vector<double> coords;
  bool operator==(const AnswerMsg&) const = default;
};

struct ExhaustedMsg {
  int64_t sample_id = 0;
  bool operator==(const ExhaustedMsg&) const = default;
};

struct ErrorMsg {
  uint16_t code = 0;
  std::string text;
  bool operator==(const ErrorMsg&) const = default;
};

using Message = std::variant<HelloMsg, HelloOkMsg, QueryMsg, AnswerMsg,
                             ExhaustedMsg, ErrorMsg>;

MessageKind KindOf(const Message& message);

// Version, kind and body, without the length prefix.
std::string EncodePayload(const Message& message);
// Length prefix plus payload.
std::string EncodeFrame(const Message& message);

// Decodes one payload. Unknown versions or kinds, short or overlong bodies,
// and bad mechanism tags are InvalidArgument errors.
absl::StatusOr<Message> DecodePayload(absl::string_view payload);

// Incremental splitter for a byte stream of frames. A declared length above
// kMaxFrameBytes is a ResourceExhausted error and the stream is unusable
// afterwards; nothing beyond the header is buffered for such a frame.
class FrameDecoder {
 public:
  void Append(absl::string_view bytes) { buffer_.append(bytes.data(), bytes.size()); }

  // The next complete payload, or nullopt if more bytes are needed.
  absl::StatusOr<std::optional<std::string>> Next();

  size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::string buffer_;
  size_t offset_ = 0;
};

}  // namespace ldpdl

#endif  // LDPDL_WIRE_H_
