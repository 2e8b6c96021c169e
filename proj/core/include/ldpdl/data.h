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

#ifndef LDPDL_DATA_H_
#define LDPDL_DATA_H_

#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "absl/types/span.h"
#include "ldpdl/matrix.h"

namespace ldpdl {

// Labeled examples with features normalized to [0, 1]. Labels are class
// indices in [0, k).
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int k = 0;
  // Image geometry when loaded from IDX; {1, d} otherwise.
  uint32_t rows = 1;
  uint32_t cols = 0;

  size_t size() const { return labels.size(); }
  size_t dims() const { return features.cols(); }
};

// Public inputs without labels. `ids` are indices into the source dataset and
// double as sample ids throughout the protocol.
struct UnlabeledPool {
  std::vector<int64_t> ids;
  Matrix features;

  size_t size() const { return ids.size(); }
};

// Disjoint index groups over one dataset.
struct Partition {
  std::vector<std::vector<size_t>> owner_shards;
  std::vector<size_t> public_pool;
  std::vector<size_t> test_set;
};

inline constexpr uint32_t kIdxImageMagic = 0x00000803;
inline constexpr uint32_t kIdxLabelMagic = 0x00000801;

// Parses an IDX image/label pair held in memory. Pixels are divided by 255;
// k is one more than the largest label.
absl::StatusOr<Dataset> ParseIdx(absl::string_view image_bytes,
                                 absl::string_view label_bytes);
absl::StatusOr<Dataset> LoadIdx(const std::string& images_path,
                                const std::string& labels_path);

// Inverse of ParseIdx: features are written as round(255 * v).
std::string EncodeIdxImages(const Dataset& ds);
std::string EncodeIdxLabels(const Dataset& ds);
absl::Status WriteIdx(const Dataset& ds, const std::string& images_path,
                      const std::string& labels_path);

// k Gaussian clusters in [0, 1]^d with seeded, well-separated centers; each
// feature is center + spread * N(0, 1), clamped to [0, 1]. Samples are
// ordered class by class.
absl::StatusOr<Dataset> GenBlobs(uint64_t seed, int k, int n_per_class, int d,
                                 double spread);

// Seeded shuffle, then contiguous assignment: L shards of `shard_size`, then
// the public pool, then the test set.
absl::StatusOr<Partition> MakePartition(const Dataset& ds, int num_owners,
                                        int shard_size, int public_size,
                                        int test_size, uint64_t seed);

// Fails if any index is out of range or belongs to two groups, or if shard
// sizes differ.
absl::Status CheckPartition(const Partition& partition, size_t dataset_size);

Dataset Subset(const Dataset& ds, absl::Span<const size_t> indices);

// Features only; labels never leave the source dataset.
UnlabeledPool MakePool(const Dataset& ds, absl::Span<const size_t> indices);

}  // namespace ldpdl

#endif  // LDPDL_DATA_H_
