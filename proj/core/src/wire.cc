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

#include "ldpdl/wire.h"

#include <bit>
#include <cstring>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace ldpdl {
namespace {

class Writer {
 public:
  void U8(uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void U16(uint16_t v) { BigEndian(v, 2); }
  void U32(uint32_t v) { BigEndian(v, 4); }
  void U64(uint64_t v) { BigEndian(v, 8); }
  void I32(int32_t v) { U32(static_cast<uint32_t>(v)); }
  void I64(int64_t v) { U64(static_cast<uint64_t>(v)); }
  void F64(double v) { U64(std::bit_cast<uint64_t>(v)); }
  void Bytes(absl::string_view s) { out_.append(s.data(), s.size()); }
  std::string Take() { return std::move(out_); }

 private:
  void BigEndian(uint64_t v, int bytes) {
    for (int i = bytes - 1; i >= 0; --i) {
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(absl::string_view in) : in_(in) {}

  bool U8(uint8_t& v) {
    uint64_t x;
    if (!BigEndian(1, x)) return false;
    v = static_cast<uint8_t>(x);
    return true;
  }
  bool U16(uint16_t& v) {
    uint64_t x;
    if (!BigEndian(2, x)) return false;
    v = static_cast<uint16_t>(x);
    return true;
  }
  bool U32(uint32_t& v) {
    uint64_t x;
    if (!BigEndian(4, x)) return false;
    v = static_cast<uint32_t>(x);
    return true;
  }
  bool I32(int32_t& v) {
    uint32_t x;
    if (!U32(x)) return false;
    v = static_cast<int32_t>(x);
    return true;
  }
  bool I64(int64_t& v) {
    uint64_t x;
    if (!BigEndian(8, x)) return false;
    v = static_cast<int64_t>(x);
    return true;
  }
  bool F64(double& v) {
    uint64_t x;
    if (!BigEndian(8, x)) return false;
    v = std::bit_cast<double>(x);
    return true;
  }
  // Reads a u32 count followed by that many doubles. The count is checked
  // against the remaining bytes before anything is allocated.
  bool F64Vector(std::vector<double>& v) {
    uint32_t n;
    if (!U32(n) || static_cast<uint64_t>(n) * 8 > remaining()) return false;
    v.resize(n);
    for (double& x : v) F64(x);
    return true;
  }
  bool Text(std::string& s) {
    uint32_t n;
    if (!U32(n) || n > remaining()) return false;
    s.assign(in_.data() + pos_, n);
    pos_ += n;
    return true;
  }
  size_t remaining() const { return in_.size() - pos_; }

 private:
  bool BigEndian(int bytes, uint64_t& v) {
    if (remaining() < static_cast<size_t>(bytes)) return false;
    v = 0;
    for (int i = 0; i < bytes; ++i) {
      v = (v << 8) | static_cast<uint8_t>(in_[pos_ + i]);
    }
    pos_ += bytes;
    return true;
  }
  absl::string_view in_;
  size_t pos_ = 0;
};

bool ReadMechanism(Reader& r, MechanismKind& kind) {
  uint8_t tag;
  if (!r.U8(tag) || tag > static_cast<uint8_t>(MechanismKind::kLaplace)) {
    return false;
  }
  kind = static_cast<MechanismKind>(tag);
  return true;
}

void WriteBody(Writer& w, const HelloMsg& m) {
  w.I32(m.owner_id);
  w.U32(m.k);
  w.U8(static_cast<uint8_t>(m.mechanism));
}
void WriteBody(Writer& w, const HelloOkMsg& m) {
  w.I32(m.owner_id);
  w.U32(m.k);
  w.U32(m.input_width);
  w.U8(static_cast<uint8_t>(m.mechanism));
}
void WriteBody(Writer& w, const QueryMsg& m) {
  w.I64(m.sample_id);
  w.F64(m.eps_i);
  w.U32(static_cast<uint32_t>(m.features.size()));
  for (double x : m.features) w.F64(x);
}
void WriteBody(Writer& w, const AnswerMsg& m) {
  w.I64(m.sample_id);
  w.U32(static_cast<uint32_t>(m.coords.size()));
  for (double x : m.coords) w.F64(x);
}
void WriteBody(Writer& w, const ExhaustedMsg& m) { w.I64(m.sample_id); }
void WriteBody(Writer& w, const ErrorMsg& m) {
  w.U16(m.code);
  w.U32(static_cast<uint32_t>(m.text.size()));
  w.Bytes(m.text);
}

bool ReadBody(Reader& r, HelloMsg& m) {
  return r.I32(m.owner_id) && r.U32(m.k) && ReadMechanism(r, m.mechanism);
}
bool ReadBody(Reader& r, HelloOkMsg& m) {
  return r.I32(m.owner_id) && r.U32(m.k) && r.U32(m.input_width) &&
         ReadMechanism(r, m.mechanism);
}
bool ReadBody(Reader& r, QueryMsg& m) {
  return r.I64(m.sample_id) && r.F64(m.eps_i) && r.F64Vector(m.features);
}
bool ReadBody(Reader& r, AnswerMsg& m) {
  return r.I64(m.sample_id) && r.F64Vector(m.coords);
}
bool ReadBody(Reader& r, ExhaustedMsg& m) { return r.I64(m.sample_id); }
bool ReadBody(Reader& r, ErrorMsg& m) { return r.U16(m.code) && r.Text(m.text); }

template <typename T>
absl::StatusOr<Message> Decode(Reader& r, absl::string_view kind_name) {
  T m;
  if (!ReadBody(r, m)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("truncated or malformed %s body", kind_name));
  }
  if (r.remaining() != 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%d trailing bytes after %s body", r.remaining(), kind_name));
  }
  return Message(std::move(m));
}

}  // namespace

MessageKind KindOf(const Message& message) {
  return static_cast<MessageKind>(message.index() + 1);
}

std::string EncodePayload(const Message& message) {
  Writer w;
  w.U8(kWireVersion);
  w.U8(static_cast<uint8_t>(KindOf(message)));
  std::visit([&w](const auto& m) { WriteBody(w, m); }, message);
  return w.Take();
}

std::string EncodeFrame(const Message& message) {
  const std::string payload = EncodePayload(message);
  Writer w;
  w.U32(static_cast<uint32_t>(payload.size()));
  w.Bytes(payload);
  return w.Take();
}

absl::StatusOr<Message> DecodePayload(absl::string_view payload) {
  Reader r(payload);
  uint8_t version, kind;
  if (!r.U8(version) || !r.U8(kind)) {
    return absl::InvalidArgumentError("payload shorter than its header");
  }
  if (version != kWireVersion) {
    return absl::InvalidArgumentError(
        absl::StrFormat("unsupported protocol version %d", version));
  }
  switch (static_cast<MessageKind>(kind)) {
    case MessageKind::kHello:
      return Decode<HelloMsg>(r, "HELLO");
    case MessageKind::kHelloOk:
      return Decode<HelloOkMsg>(r, "HELLO_OK");
    case MessageKind::kQuery:
      return Decode<QueryMsg>(r, "QUERY");
    case MessageKind::kAnswer:
      return Decode<AnswerMsg>(r, "ANSWER");
    case MessageKind::kExhausted:
      return Decode<ExhaustedMsg>(r, "EXHAUSTED");
    case MessageKind::kError:
      return Decode<ErrorMsg>(r, "ERROR");
  }
  return absl::InvalidArgumentError(
      absl::StrFormat("unknown message kind %d", kind));
}

absl::StatusOr<std::optional<std::string>> FrameDecoder::Next() {
  if (buffered() < 4) return std::nullopt;
  const auto* p = reinterpret_cast<const uint8_t*>(buffer_.data() + offset_);
  const uint32_t length = (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) |
                          (uint32_t{p[2]} << 8) | uint32_t{p[3]};
  if (length > kMaxFrameBytes) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "frame of %d bytes exceeds the %d byte cap", length, kMaxFrameBytes));
  }
  if (buffered() - 4 < length) return std::nullopt;
  std::string payload = buffer_.substr(offset_ + 4, length);
  offset_ += 4 + length;
  if (offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  } else if (offset_ > (1u << 20)) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  return payload;
}

}  // namespace ldpdl
