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

#ifndef LDPDL_CONFIG_H_
#define LDPDL_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"

namespace ldpdl {

// A flat key-value file:
//
//   # comment
//   key = value
//   list_key = 1, 2, 4
//
// Keys are unique; blank lines and text after '#' are ignored. Getters
// report the source line on type errors and mark keys as consumed, so that
// leftover (misspelled) keys can be rejected with UnusedKeys().
class Config {
 public:
  static absl::StatusOr<Config> Parse(absl::string_view text,
                                      std::string source = "<config>");
  static absl::StatusOr<Config> Load(const std::string& path);

  // Adds or replaces a key, as a command-line override would.
  void Set(absl::string_view key, absl::string_view value);
  // Parses "key=value" and calls Set.
  absl::Status SetFromAssignment(absl::string_view assignment);

  bool Has(absl::string_view key) const;
  std::vector<std::string> KeysWithPrefix(absl::string_view prefix) const;

  absl::StatusOr<std::string> GetString(absl::string_view key,
                                        absl::string_view fallback) const;
  absl::StatusOr<int> GetInt(absl::string_view key, int fallback) const;
  absl::StatusOr<uint64_t> GetUint64(absl::string_view key,
                                     uint64_t fallback) const;
  absl::StatusOr<double> GetDouble(absl::string_view key,
                                   double fallback) const;
  absl::StatusOr<bool> GetBool(absl::string_view key, bool fallback) const;
  absl::StatusOr<std::vector<int>> GetIntList(
      absl::string_view key, std::vector<int> fallback) const;
  absl::StatusOr<std::vector<double>> GetDoubleList(
      absl::string_view key, std::vector<double> fallback) const;
  absl::StatusOr<std::vector<std::string>> GetStringList(
      absl::string_view key, std::vector<std::string> fallback) const;

  // Fails, naming every key with its line, if some key was never read.
  absl::Status CheckAllUsed() const;

  // Canonical "key = value" lines in key order; stable across formatting
  // differences in the source file.
  std::string Canonical() const;

  const std::string& source() const { return source_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;  // 0 for overrides
    mutable bool used = false;
  };

  const Entry* Find(absl::string_view key) const;
  std::string Where(const Entry& e) const;
  absl::Status TypeError(absl::string_view key, const Entry& e,
                         absl::string_view expected) const;

  std::string source_;
  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace ldpdl

#endif  // LDPDL_CONFIG_H_
