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

#include "fedsim/datasets.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "fedsim/errors.h"

namespace fedsim {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void LabeledDataset::validate() const {
  if (features.size() != labels.size() * num_features) {
    throw ConfigError("dataset: feature rows do not match label count");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw ConfigError("dataset: label " + std::to_string(label) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
  }
}

std::vector<std::size_t> LabeledDataset::label_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int label : labels) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

LabeledDataset parse_idx(std::span<const std::uint8_t> image_bytes,
                         std::span<const std::uint8_t> label_bytes) {
  if (image_bytes.size() < 16 || label_bytes.size() < 8) {
    throw FormatError("IDX: truncated header");
  }
  if (read_be32(image_bytes, 0) != kIdxImageMagic) throw FormatError("images: not an IDX file");
  if (read_be32(label_bytes, 0) != kIdxLabelMagic) throw FormatError("labels: not an IDX file");

  const std::size_t count = read_be32(image_bytes, 4);
  const std::size_t rows = read_be32(image_bytes, 8);
  const std::size_t cols = read_be32(image_bytes, 12);
  const std::size_t label_count = read_be32(label_bytes, 4);
  if (count != label_count) {
    throw FormatError("IDX: " + std::to_string(count) + " images but " +
                      std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (image_bytes.size() < 16 + count * pixels) throw FormatError("images: truncated file");
  if (label_bytes.size() < 8 + count) throw FormatError("labels: truncated file");

  LabeledDataset ds;
  ds.num_features = pixels;
  ds.features.resize(count * pixels);
  for (std::size_t j = 0; j < count * pixels; ++j) {
    ds.features[j] = static_cast<double>(image_bytes[16 + j]) / 255.0;
  }
  ds.labels.resize(count);
  int max_label = -1;
  for (std::size_t i = 0; i < count; ++i) {
    ds.labels[i] = label_bytes[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  return ds;
}

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_idx(images, labels);
}

std::vector<std::uint8_t> encode_idx_images(const LabeledDataset& ds, std::uint32_t rows,
                                            std::uint32_t cols) {
  if (static_cast<std::size_t>(rows) * cols != ds.num_features) {
    throw ConfigError("encode_idx_images: rows*cols must equal the feature count");
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + ds.features.size());
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(ds.size()));
  write_be32(out, rows);
  write_be32(out, cols);
  for (double v : ds.features) {
    const double byte = std::clamp(std::round(v * 255.0), 0.0, 255.0);
    out.push_back(static_cast<std::uint8_t>(byte));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const LabeledDataset& ds) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + ds.size());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(ds.size()));
  for (int label : ds.labels) {
    if (label < 0 || label > 255) throw ConfigError("encode_idx_labels: label does not fit a byte");
    out.push_back(static_cast<std::uint8_t>(label));
  }
  return out;
}

TrainTestSplit load_mnist_dir(const std::filesystem::path& dir) {
  TrainTestSplit split;
  split.train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  split.test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  const std::size_t classes = std::max(split.train.num_classes, split.test.num_classes);
  split.train.num_classes = classes;
  split.test.num_classes = classes;
  return split;
}

LabeledDataset make_synthetic_classification(std::size_t n, std::size_t d_in, std::size_t num_classes,
                                             RngStream stream, const SyntheticOptions& options) {
  if (num_classes == 0 || d_in == 0) throw ConfigError("synthetic: need at least one class and feature");
  if (n < num_classes) throw ConfigError("synthetic: need at least one sample per class");

  // Any two means are class_separation apart.
  const double radius = options.class_separation / std::sqrt(2.0);
  std::vector<double> means(num_classes * d_in, 0.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    double* mean = means.data() + c * d_in;
    if (d_in >= num_classes) {
      mean[c] = radius;
    } else {
      double len = 0.0;
      for (std::size_t j = 0; j < d_in; ++j) {
        mean[j] = stream.normal();
        len += mean[j] * mean[j];
      }
      len = std::sqrt(len);
      for (std::size_t j = 0; j < d_in; ++j) mean[j] *= radius / len;
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle_indices(order, stream);

  LabeledDataset ds;
  ds.num_features = d_in;
  ds.num_classes = num_classes;
  ds.features.resize(n * d_in);
  ds.labels.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t label = order[s] % num_classes;
    ds.labels[s] = static_cast<int>(label);
    for (std::size_t j = 0; j < d_in; ++j) {
      ds.features[s * d_in + j] = means[label * d_in + j] + stream.normal();
    }
  }
  return ds;
}

void shuffle_indices(std::vector<std::size_t>& indices, RngStream& stream) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    const std::size_t j = stream.uniform_index(i);
    std::swap(indices[i - 1], indices[j]);
  }
}

std::size_t distinct_labels(const LabeledDataset& ds, std::span<const std::size_t> indices) {
  std::vector<bool> seen(ds.num_classes, false);
  std::size_t count = 0;
  for (std::size_t idx : indices) {
    const auto label = static_cast<std::size_t>(ds.labels[idx]);
    if (!seen[label]) {
      seen[label] = true;
      ++count;
    }
  }
  return count;
}

void PartitionPlan::validate(const LabeledDataset& ds) const {
  if (assignment.size() != num_workers) throw ConfigError("partition: worker count mismatch");
  std::vector<bool> used(ds.size(), false);
  for (const auto& indices : assignment) {
    for (std::size_t idx : indices) {
      if (idx >= ds.size()) throw ConfigError("partition: index out of range");
      if (used[idx]) throw ConfigError("partition: sample assigned twice");
      used[idx] = true;
    }
  }
  if (scheme == PartitionScheme::kDigit) {
    for (std::size_t w = 0; w < num_workers; ++w) {
      if (distinct_labels(ds, assignment[w]) != labels_per_worker) {
        throw ConfigError("partition: worker " + std::to_string(w) + " does not hold exactly " +
                          std::to_string(labels_per_worker) + " labels");
      }
      if (assignment[w].size() != assignment.front().size()) {
        throw ConfigError("partition: unequal worker sizes");
      }
    }
  }
}

std::size_t PartitionPlan::min_worker_size() const {
  std::size_t smallest = assignment.empty() ? 0 : assignment.front().size();
  for (const auto& indices : assignment) smallest = std::min(smallest, indices.size());
  return smallest;
}

PartitionPlan partition_iid(const LabeledDataset& ds, std::size_t m, RngStream stream) {
  if (m == 0) throw ConfigError("partition_iid: m must be positive");
  if (m > ds.size()) throw ConfigError("partition_iid: more workers than samples");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_indices(order, stream);

  PartitionPlan plan;
  plan.num_workers = m;
  plan.scheme = PartitionScheme::kIid;
  const std::size_t per_worker = ds.size() / m;
  plan.assignment.resize(m);
  for (std::size_t w = 0; w < m; ++w) {
    plan.assignment[w].assign(order.begin() + static_cast<std::ptrdiff_t>(w * per_worker),
                              order.begin() + static_cast<std::ptrdiff_t>((w + 1) * per_worker));
  }
  return plan;
}

PartitionPlan partition_digit_based(const LabeledDataset& ds, std::size_t m, std::size_t p,
                                    RngStream stream) {
  const std::size_t classes = ds.num_classes;
  if (m == 0) throw ConfigError("partition_digit_based: m must be positive");
  if (p == 0 || p > classes) {
    throw ConfigError("partition_digit_based: p must lie in [1, " + std::to_string(classes) + "]");
  }
  if (m * p < classes) {
    throw ConfigError("partition_digit_based: m*p label slots cannot cover all " +
                      std::to_string(classes) + " labels");
  }

  // Consecutive runs of p entries of a cyclic label order are distinct, and
  // slot r holds label order[r % C], which balances ownership counts.
  std::vector<std::size_t> label_order(classes);
  std::iota(label_order.begin(), label_order.end(), 0);
  shuffle_indices(label_order, stream);
  std::vector<std::size_t> worker_order(m);
  std::iota(worker_order.begin(), worker_order.end(), 0);
  shuffle_indices(worker_order, stream);

  std::vector<std::vector<std::size_t>> owned(m);
  std::vector<std::vector<std::size_t>> owners(classes);
  for (std::size_t slot_block = 0; slot_block < m; ++slot_block) {
    const std::size_t worker = worker_order[slot_block];
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t label = label_order[(slot_block * p + j) % classes];
      owned[worker].push_back(label);
    }
  }
  for (std::size_t w = 0; w < m; ++w) {
    for (std::size_t label : owned[w]) owners[label].push_back(w);
  }

  std::vector<std::vector<std::size_t>> by_label(classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_label[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  std::size_t quota = ds.size();
  for (std::size_t label = 0; label < classes; ++label) {
    const std::size_t share = by_label[label].size() / owners[label].size();
    if (share == 0) {
      throw ConfigError("partition_digit_based: label " + std::to_string(label) + " has " +
                        std::to_string(by_label[label].size()) + " samples for " +
                        std::to_string(owners[label].size()) + " owning workers");
    }
    quota = std::min(quota, share);
  }

  PartitionPlan plan;
  plan.num_workers = m;
  plan.scheme = PartitionScheme::kDigit;
  plan.labels_per_worker = p;
  plan.assignment.resize(m);
  for (std::size_t label = 0; label < classes; ++label) {
    auto& pool = by_label[label];
    shuffle_indices(pool, stream);
    for (std::size_t r = 0; r < owners[label].size(); ++r) {
      auto& dest = plan.assignment[owners[label][r]];
      dest.insert(dest.end(), pool.begin() + static_cast<std::ptrdiff_t>(r * quota),
                  pool.begin() + static_cast<std::ptrdiff_t>((r + 1) * quota));
    }
  }
  return plan;
}

PartitionPlan partition_shards(const LabeledDataset& ds, std::size_t m, std::size_t num_shards,
                               std::size_t shard_size, std::size_t shards_per_worker,
                               RngStream stream) {
  if (m == 0 || shard_size == 0 || shards_per_worker == 0) {
    throw ConfigError("partition_shards: sizes must be positive");
  }
  if (num_shards * shard_size > ds.size()) {
    throw ConfigError("partition_shards: " + std::to_string(num_shards) + " shards of " +
                      std::to_string(shard_size) + " exceed " + std::to_string(ds.size()) + " samples");
  }
  if (m * shards_per_worker > num_shards) {
    throw ConfigError("partition_shards: not enough shards for " + std::to_string(m) + " workers");
  }
  std::vector<std::size_t> sorted(ds.size());
  std::iota(sorted.begin(), sorted.end(), 0);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return ds.labels[a] < ds.labels[b]; });

  std::vector<std::size_t> shard_ids(num_shards);
  std::iota(shard_ids.begin(), shard_ids.end(), 0);
  shuffle_indices(shard_ids, stream);

  PartitionPlan plan;
  plan.num_workers = m;
  plan.scheme = PartitionScheme::kShards;
  plan.assignment.resize(m);
  for (std::size_t w = 0; w < m; ++w) {
    for (std::size_t j = 0; j < shards_per_worker; ++j) {
      const std::size_t shard = shard_ids[w * shards_per_worker + j];
      auto& dest = plan.assignment[w];
      dest.insert(dest.end(), sorted.begin() + static_cast<std::ptrdiff_t>(shard * shard_size),
                  sorted.begin() + static_cast<std::ptrdiff_t>((shard + 1) * shard_size));
    }
  }
  return plan;
}

std::string to_string(PartitionScheme scheme) {
  switch (scheme) {
    case PartitionScheme::kIid:
      return "iid";
    case PartitionScheme::kDigit:
      return "digit";
    case PartitionScheme::kShards:
      return "shards";
  }
  return "unknown";
}

}  // namespace fedsim
