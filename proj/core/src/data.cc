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

#include "ldpdl/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "absl/strings/str_format.h"
#include "ldpdl/random.h"

namespace ldpdl {
namespace {

uint32_t ReadBigEndian32(absl::string_view bytes, size_t offset) {
  return (uint32_t{static_cast<uint8_t>(bytes[offset])} << 24) |
         (uint32_t{static_cast<uint8_t>(bytes[offset + 1])} << 16) |
         (uint32_t{static_cast<uint8_t>(bytes[offset + 2])} << 8) |
         uint32_t{static_cast<uint8_t>(bytes[offset + 3])};
}

void AppendBigEndian32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

absl::Status ParseError(absl::string_view file, size_t offset,
                        absl::string_view what) {
  return absl::DataLossError(
      absl::StrFormat("%s file, offset %d: %s", file, offset, what));
}

absl::StatusOr<std::string> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrFormat("cannot open %s", path));
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

absl::StatusOr<Dataset> ParseIdx(absl::string_view image_bytes,
                                 absl::string_view label_bytes) {
  if (image_bytes.size() < 16) {
    return ParseError("image", image_bytes.size(), "header truncated");
  }
  if (uint32_t magic = ReadBigEndian32(image_bytes, 0); magic != kIdxImageMagic) {
    return ParseError("image", 0,
                      absl::StrFormat("bad magic 0x%08x, expected 0x%08x",
                                      magic, kIdxImageMagic));
  }
  if (label_bytes.size() < 8) {
    return ParseError("label", label_bytes.size(), "header truncated");
  }
  if (uint32_t magic = ReadBigEndian32(label_bytes, 0); magic != kIdxLabelMagic) {
    return ParseError("label", 0,
                      absl::StrFormat("bad magic 0x%08x, expected 0x%08x",
                                      magic, kIdxLabelMagic));
  }
  const uint32_t n_images = ReadBigEndian32(image_bytes, 4);
  const uint32_t rows = ReadBigEndian32(image_bytes, 8);
  const uint32_t cols = ReadBigEndian32(image_bytes, 12);
  const uint32_t n_labels = ReadBigEndian32(label_bytes, 4);
  if (n_images != n_labels) {
    return ParseError("label", 4,
                      absl::StrFormat("label count %d does not match image "
                                      "count %d",
                                      n_labels, n_images));
  }
  const uint64_t d = uint64_t{rows} * cols;
  const uint64_t image_payload = uint64_t{n_images} * d;
  if (image_bytes.size() - 16 < image_payload) {
    return ParseError("image", image_bytes.size(),
                      absl::StrFormat("payload truncated, expected %d bytes "
                                      "after the header",
                                      image_payload));
  }
  if (label_bytes.size() - 8 < n_labels) {
    return ParseError("label", label_bytes.size(),
                      absl::StrFormat("payload truncated, expected %d bytes "
                                      "after the header",
                                      n_labels));
  }

  Dataset ds;
  ds.rows = rows;
  ds.cols = cols;
  ds.features = Matrix(n_images, d);
  ds.labels.resize(n_labels);
  for (uint32_t i = 0; i < n_images; ++i) {
    absl::Span<double> row = ds.features.mutable_row(i);
    for (uint64_t j = 0; j < d; ++j) {
      row[j] = static_cast<uint8_t>(image_bytes[16 + i * d + j]) / 255.0;
    }
    ds.labels[i] = static_cast<uint8_t>(label_bytes[8 + i]);
    ds.k = std::max(ds.k, ds.labels[i] + 1);
  }
  return ds;
}

absl::StatusOr<Dataset> LoadIdx(const std::string& images_path,
                                const std::string& labels_path) {
  absl::StatusOr<std::string> images = ReadFile(images_path);
  if (!images.ok()) return images.status();
  absl::StatusOr<std::string> labels = ReadFile(labels_path);
  if (!labels.ok()) return labels.status();
  return ParseIdx(*images, *labels);
}

std::string EncodeIdxImages(const Dataset& ds) {
  std::string out;
  AppendBigEndian32(out, kIdxImageMagic);
  AppendBigEndian32(out, static_cast<uint32_t>(ds.size()));
  uint32_t rows = ds.rows;
  uint32_t cols = ds.cols;
  if (uint64_t{rows} * cols != ds.dims()) {
    rows = 1;
    cols = static_cast<uint32_t>(ds.dims());
  }
  AppendBigEndian32(out, rows);
  AppendBigEndian32(out, cols);
  for (double v : ds.features.values()) {
    const double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    out.push_back(static_cast<char>(static_cast<uint8_t>(scaled)));
  }
  return out;
}

std::string EncodeIdxLabels(const Dataset& ds) {
  std::string out;
  AppendBigEndian32(out, kIdxLabelMagic);
  AppendBigEndian32(out, static_cast<uint32_t>(ds.size()));
  for (int label : ds.labels) out.push_back(static_cast<char>(label));
  return out;
}

absl::Status WriteIdx(const Dataset& ds, const std::string& images_path,
                      const std::string& labels_path) {
  std::ofstream images(images_path, std::ios::binary);
  std::ofstream labels(labels_path, std::ios::binary);
  if (!images || !labels) {
    return absl::PermissionDeniedError("cannot open IDX output files");
  }
  const std::string image_bytes = EncodeIdxImages(ds);
  const std::string label_bytes = EncodeIdxLabels(ds);
  images.write(image_bytes.data(), image_bytes.size());
  labels.write(label_bytes.data(), label_bytes.size());
  if (!images || !labels) return absl::DataLossError("IDX write failed");
  return absl::OkStatus();
}

absl::StatusOr<Dataset> GenBlobs(uint64_t seed, int k, int n_per_class, int d,
                                 double spread) {
  if (k <= 0 || n_per_class <= 0 || d <= 0 || !(spread >= 0.0)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "blobs need positive k, n and d and nonnegative spread (got k=%d "
        "n=%d d=%d spread=%g)",
        k, n_per_class, d, spread));
  }
  Rng rng(seed);
  // Rejection-sample centers in [0.1, 0.9]^d at a packing-scale separation;
  // after a bounded number of tries the candidate is accepted as is.
  const double min_separation = 0.5 * std::pow(static_cast<double>(k), -1.0 / d);
  std::vector<std::vector<double>> centers;
  while (static_cast<int>(centers.size()) < k) {
    std::vector<double> candidate(d);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (double& c : candidate) c = 0.1 + 0.8 * rng.Uniform();
      bool separated = true;
      for (const auto& other : centers) {
        double dist2 = 0.0;
        for (int j = 0; j < d; ++j) {
          dist2 += (candidate[j] - other[j]) * (candidate[j] - other[j]);
        }
        if (dist2 < min_separation * min_separation) {
          separated = false;
          break;
        }
      }
      if (separated) break;
    }
    centers.push_back(candidate);
  }

  Dataset ds;
  ds.k = k;
  ds.rows = 1;
  ds.cols = static_cast<uint32_t>(d);
  ds.features = Matrix(static_cast<size_t>(k) * n_per_class, d);
  ds.labels.reserve(static_cast<size_t>(k) * n_per_class);
  size_t r = 0;
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++r) {
      absl::Span<double> row = ds.features.mutable_row(r);
      for (int j = 0; j < d; ++j) {
        row[j] = std::clamp(centers[c][j] + spread * rng.Gaussian(), 0.0, 1.0);
      }
      ds.labels.push_back(c);
    }
  }
  return ds;
}

absl::StatusOr<Partition> MakePartition(const Dataset& ds, int num_owners,
                                        int shard_size, int public_size,
                                        int test_size, uint64_t seed) {
  if (num_owners < 0 || shard_size < 0 || public_size < 0 || test_size < 0) {
    return absl::InvalidArgumentError("partition sizes must be nonnegative");
  }
  const uint64_t needed = uint64_t(num_owners) * shard_size + public_size +
                          uint64_t(test_size);
  if (needed > ds.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "partition needs %d samples (%d owners x %d + %d public + %d test) but "
        "the dataset has %d; short by %d",
        needed, num_owners, shard_size, public_size, test_size, ds.size(),
        needed - ds.size()));
  }
  std::vector<size_t> order(ds.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(order);

  Partition p;
  size_t next = 0;
  auto take = [&](size_t count) {
    std::vector<size_t> group(order.begin() + next,
                              order.begin() + next + count);
    next += count;
    return group;
  };
  for (int l = 0; l < num_owners; ++l) p.owner_shards.push_back(take(shard_size));
  p.public_pool = take(public_size);
  p.test_set = take(test_size);
  return p;
}

absl::Status CheckPartition(const Partition& partition, size_t dataset_size) {
  std::vector<int> owner_of(dataset_size, -1);
  auto claim = [&](const std::vector<size_t>& group, int tag) -> absl::Status {
    for (size_t index : group) {
      if (index >= dataset_size) {
        return absl::OutOfRangeError(
            absl::StrFormat("index %d out of range", index));
      }
      if (owner_of[index] != -1) {
        return absl::FailedPreconditionError(absl::StrFormat(
            "index %d assigned to groups %d and %d", index, owner_of[index],
            tag));
      }
      owner_of[index] = tag;
    }
    return absl::OkStatus();
  };
  const int owners = static_cast<int>(partition.owner_shards.size());
  for (int l = 0; l < owners; ++l) {
    if (partition.owner_shards[l].size() != partition.owner_shards[0].size()) {
      return absl::FailedPreconditionError("owner shards differ in size");
    }
    if (absl::Status s = claim(partition.owner_shards[l], l); !s.ok()) return s;
  }
  if (absl::Status s = claim(partition.public_pool, owners); !s.ok()) return s;
  return claim(partition.test_set, owners + 1);
}

Dataset Subset(const Dataset& ds, absl::Span<const size_t> indices) {
  Dataset out;
  out.k = ds.k;
  out.rows = ds.rows;
  out.cols = ds.cols;
  out.features = ds.features.SelectRows(indices);
  out.labels.reserve(indices.size());
  for (size_t i : indices) out.labels.push_back(ds.labels[i]);
  return out;
}

UnlabeledPool MakePool(const Dataset& ds, absl::Span<const size_t> indices) {
  UnlabeledPool pool;
  pool.features = ds.features.SelectRows(indices);
  pool.ids.assign(indices.begin(), indices.end());
  return pool;
}

}  // namespace ldpdl
