// Copyright 2026 The fedsim Authors
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

#ifndef FEDSIM_DATASETS_H_
#define FEDSIM_DATASETS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedsim/rng.h"

namespace fedsim {

// N x num_features row-major feature matrix with integer labels in [0, C).
struct LabeledDataset {
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
  // Throws ConfigError if the shape or label invariants are broken.
  void validate() const;
  // Number of samples per label, indexed by label.
  std::vector<std::size_t> label_counts() const;
};

// --- IDX (MNIST) files -------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;  // 2051
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;  // 2049

// Parses in-memory IDX images (ubyte, 3 dims) and labels (ubyte, 1 dim).
// Pixels are scaled by 1/255. Throws FormatError on bad magic ("not an IDX
// file"), truncation, or an image/label count mismatch.
LabeledDataset parse_idx(std::span<const std::uint8_t> image_bytes,
                         std::span<const std::uint8_t> label_bytes);
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

// Encodes features (rounded to the nearest byte after x255, clamped to
// [0, 255]) as an IDX image file of rows x cols images.
std::vector<std::uint8_t> encode_idx_images(const LabeledDataset& ds, std::uint32_t rows,
                                            std::uint32_t cols);
std::vector<std::uint8_t> encode_idx_labels(const LabeledDataset& ds);

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
};

// Loads train-images-idx3-ubyte / train-labels-idx1-ubyte /
// t10k-images-idx3-ubyte / t10k-labels-idx1-ubyte from `dir`.
TrainTestSplit load_mnist_dir(const std::filesystem::path& dir);

// --- synthetic data ----------------------------------------------------------

struct SyntheticOptions {
  // Distance between neighbouring class means (noise has unit variance).
  double class_separation = 3.0;
};

// Gaussian class clusters with balanced labels: sample s carries label s % C
// (then shuffled). Class means are distinct scaled axis directions when
// d_in >= C, otherwise random directions.
LabeledDataset make_synthetic_classification(std::size_t n, std::size_t d_in, std::size_t num_classes,
                                             RngStream stream, const SyntheticOptions& options = {});

// --- partitioning ------------------------------------------------------------

enum class PartitionScheme { kIid, kDigit, kShards };

struct PartitionPlan {
  std::size_t num_workers = 0;
  PartitionScheme scheme = PartitionScheme::kIid;
  // For kDigit: labels per worker. Zero otherwise.
  std::size_t labels_per_worker = 0;
  std::vector<std::vector<std::size_t>> assignment;

  // Checks pairwise disjointness, index bounds, and for kDigit the exact
  // per-worker label count and equal sizes. Throws ConfigError.
  void validate(const LabeledDataset& ds) const;
  std::size_t min_worker_size() const;
};

PartitionPlan partition_iid(const LabeledDataset& ds, std::size_t m, RngStream stream);

// Each worker owns exactly p distinct labels and an equal number of samples
// from each. Label ownership is spread so every label has floor(m*p/C) or
// one more owners. Leftover samples are dropped.
PartitionPlan partition_digit_based(const LabeledDataset& ds, std::size_t m, std::size_t p,
                                    RngStream stream);

// Sort by label, cut the first num_shards*shard_size samples into consecutive
// shards, deal shards_per_worker random shards to each worker.
PartitionPlan partition_shards(const LabeledDataset& ds, std::size_t m, std::size_t num_shards,
                               std::size_t shard_size, std::size_t shards_per_worker,
                               RngStream stream);

// Distinct labels held by a worker.
std::size_t distinct_labels(const LabeledDataset& ds, std::span<const std::size_t> indices);

// In-place Fisher-Yates shuffle driven by `stream`.
void shuffle_indices(std::vector<std::size_t>& indices, RngStream& stream);

std::string to_string(PartitionScheme scheme);

}  // namespace fedsim

#endif  // FEDSIM_DATASETS_H_
