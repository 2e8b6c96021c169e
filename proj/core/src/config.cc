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

#include "ldpdl/config.h"

#include <fstream>
#include <sstream>

#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"

namespace ldpdl {
namespace {

bool ValidKey(absl::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!absl::ascii_isalnum(c) && c != '_' && c != '.' && c != '-') {
      return false;
    }
  }
  return true;
}

std::vector<std::string> SplitList(absl::string_view value) {
  std::vector<std::string> items;
  for (absl::string_view item : absl::StrSplit(value, ',')) {
    items.emplace_back(absl::StripAsciiWhitespace(item));
  }
  return items;
}

}  // namespace

absl::StatusOr<Config> Config::Parse(absl::string_view text,
                                     std::string source) {
  Config config;
  config.source_ = std::move(source);
  int line_number = 0;
  for (absl::string_view raw : absl::StrSplit(text, '\n')) {
    ++line_number;
    absl::string_view line = raw;
    if (size_t hash = line.find('#'); hash != absl::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s:%d: expected 'key = value'", config.source_, line_number));
    }
    const absl::string_view key = absl::StripAsciiWhitespace(line.substr(0, eq));
    const absl::string_view value =
        absl::StripAsciiWhitespace(line.substr(eq + 1));
    if (!ValidKey(key)) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s:%d: invalid key '%s'", config.source_, line_number, key));
    }
    if (auto it = config.entries_.find(key); it != config.entries_.end()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s:%d: duplicate key '%s' (first set on line %d)", config.source_,
          line_number, key, it->second.line));
    }
    config.entries_.emplace(std::string(key),
                            Entry{std::string(value), line_number});
  }
  return config;
}

absl::StatusOr<Config> Config::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrFormat("cannot open %s", path));
  std::stringstream text;
  text << in.rdbuf();
  return Parse(text.str(), path);
}

void Config::Set(absl::string_view key, absl::string_view value) {
  entries_.insert_or_assign(std::string(key), Entry{std::string(value), 0});
}

absl::Status Config::SetFromAssignment(absl::string_view assignment) {
  const size_t eq = assignment.find('=');
  const absl::string_view key =
      absl::StripAsciiWhitespace(assignment.substr(0, eq));
  if (eq == absl::string_view::npos || !ValidKey(key)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "override '%s' is not of the form key=value", assignment));
  }
  Set(key, absl::StripAsciiWhitespace(assignment.substr(eq + 1)));
  return absl::OkStatus();
}

bool Config::Has(absl::string_view key) const { return Find(key) != nullptr; }

std::vector<std::string> Config::KeysWithPrefix(absl::string_view prefix) const {
  std::vector<std::string> keys;
  for (const auto& [key, entry] : entries_) {
    if (absl::string_view(key).substr(0, prefix.size()) == prefix) {
      keys.push_back(key);
    }
  }
  return keys;
}

const Config::Entry* Config::Find(absl::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.used = true;
  return &it->second;
}

std::string Config::Where(const Entry& e) const {
  if (e.line == 0) return "command line";
  return absl::StrFormat("%s:%d", source_, e.line);
}

absl::Status Config::TypeError(absl::string_view key, const Entry& e,
                               absl::string_view expected) const {
  return absl::InvalidArgumentError(absl::StrFormat(
      "%s: key '%s': expected %s, got '%s'", Where(e), key, expected, e.value));
}

absl::StatusOr<std::string> Config::GetString(absl::string_view key,
                                              absl::string_view fallback) const {
  const Entry* e = Find(key);
  return e == nullptr ? std::string(fallback) : e->value;
}

absl::StatusOr<int> Config::GetInt(absl::string_view key, int fallback) const {
  const Entry* e = Find(key);
  if (e == nullptr) return fallback;
  int v;
  if (!absl::SimpleAtoi(e->value, &v)) return TypeError(key, *e, "an integer");
  return v;
}

absl::StatusOr<uint64_t> Config::GetUint64(absl::string_view key,
                                           uint64_t fallback) const {
  const Entry* e = Find(key);
  if (e == nullptr) return fallback;
  uint64_t v;
  if (!absl::SimpleAtoi(e->value, &v)) {
    return TypeError(key, *e, "a nonnegative integer");
  }
  return v;
}

absl::StatusOr<double> Config::GetDouble(absl::string_view key,
                                         double fallback) const {
  const Entry* e = Find(key);
  if (e == nullptr) return fallback;
  double v;
  if (!absl::SimpleAtod(e->value, &v)) return TypeError(key, *e, "a number");
  return v;
}

absl::StatusOr<bool> Config::GetBool(absl::string_view key,
                                     bool fallback) const {
  const Entry* e = Find(key);
  if (e == nullptr) return fallback;
  bool v;
  if (!absl::SimpleAtob(e->value, &v)) return TypeError(key, *e, "true or false");
  return v;
}

absl::StatusOr<std::vector<int>> Config::GetIntList(
    absl::string_view key, std::vector<int> fallback) const {
  const Entry* e = Find(key);
  if (e == nullptr) return fallback;
  std::vector<int> out;
  for (const std::string& item : SplitList(e->value)) {
    int v;
    if (!absl::SimpleAtoi(item, &v)) {
      return TypeError(key, *e, "a comma-separated list of integers");
    }
    out.push_back(v);
  }
  return out;
}

absl::StatusOr<std::vector<double>> Config::GetDoubleList(
    absl::string_view key, std::vector<double> fallback) const {
  const Entry* e = Find(key);
  if (e == nullptr) return fallback;
  std::vector<double> out;
  for (const std::string& item : SplitList(e->value)) {
    double v;
    if (!absl::SimpleAtod(item, &v)) {
      return TypeError(key, *e, "a comma-separated list of numbers");
    }
    out.push_back(v);
  }
  return out;
}

absl::StatusOr<std::vector<std::string>> Config::GetStringList(
    absl::string_view key, std::vector<std::string> fallback) const {
  const Entry* e = Find(key);
  if (e == nullptr) return fallback;
  std::vector<std::string> out = SplitList(e->value);
  for (const std::string& item : out) {
    if (item.empty()) return TypeError(key, *e, "a list without empty items");
  }
  return out;
}

absl::Status Config::CheckAllUsed() const {
  std::vector<std::string> unused;
  for (const auto& [key, entry] : entries_) {
    if (!entry.used) {
      unused.push_back(absl::StrFormat("%s: unknown key '%s'", Where(entry), key));
    }
  }
  if (unused.empty()) return absl::OkStatus();
  return absl::InvalidArgumentError(absl::StrJoin(unused, "; "));
}

std::string Config::Canonical() const {
  std::string out;
  for (const auto& [key, entry] : entries_) {
    absl::StrAppend(&out, key, " = ", entry.value, "\n");
  }
  return out;
}

}  // namespace ldpdl
