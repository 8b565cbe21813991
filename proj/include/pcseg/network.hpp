// Copyright 2026 The pcseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "pcseg/autodiff.hpp"
#include "pcseg/dataio.hpp"
#include "pcseg/geometry.hpp"

// Query-based mask decoder over a voxel-pyramid point encoder.
//
// Backbone: L voxel levels at size base*2^l. Per level, a point MLP over
// (voxel-centroid-relative offset, color) is mean-pooled per voxel, mixed
// once with the 6-neighborhood mean, and broadcast back to points; level 0
// supplies the per-point features the mask head scores against.
//
// Decoder: per layer, coarse-to-fine over levels: masked cross-attention of
// queries onto voxel features, query self-attention, feed-forward; pre-norm
// residual blocks. Queries start at FPS positions with Fourier embeddings.
//
// Heads: per-query mask feature (2-layer MLP) scored against point features
// by temperature-scaled cosine similarity; per-query objectness logits
// (index 0 = object, 1 = no-object). Mask membership is sigmoid(h) > 0.5,
// i.e. h > 0.

namespace pcseg::net {

struct NetworkConfig {
  int feature_dim = 64;
  int levels = 3;
  int decoder_layers = 3;
  int fourier_bands = 6;
  int ffn_hidden = 128;
  double backbone_base_voxel = 0.1;  // meters, level l uses base * 2^l
  bool masked_attention = true;

  void validate() const;
};

struct NetworkParams {
  NetworkConfig config;
  // Ordered by name; every consumer (optimizer, checkpoints, gradient
  // reduction) iterates this map so the order is part of the contract.
  std::map<std::string, ad::Tensor> tensors;

  static NetworkParams init(const NetworkConfig& config, std::uint64_t seed);
  void validate() const;
};

struct Prediction {
  ad::Tensor heatmaps;        // [Q, N] raw scores
  ad::Tensor objectness;      // [Q, 2] logits, object class first
  std::vector<Vec3> query_positions;
};

/// Everything the training loop needs from one differentiable forward pass.
struct ForwardPass {
  std::map<std::string, ad::Val> params;  // leaf per parameter tensor
  ad::Val heatmaps;                       // [Q, N]
  ad::Val objectness;                     // [Q, 2]
  ad::Val initial_queries;                // [Q, D] embeddings before any decoder block
  ad::Val refined_queries;                // [Q, D] decoder output (pre final norm)
  std::vector<Vec3> query_positions;
  std::vector<std::size_t> query_indices;
};

/// Per-point multi-scale features (forward values only; level 0 first).
std::vector<ad::Tensor> backbone_forward(const NetworkParams& params,
                                         const geom::PointCloud& cloud);

/// Differentiable forward pass with FPS-seeded queries.
ForwardPass network_forward(ad::Graph& g, const NetworkParams& params,
                            const geom::PointCloud& cloud, std::size_t query_count,
                            std::uint64_t query_seed);

/// Forward pass at explicit query point indices (determinism and
/// permutation tests; also the path network_forward delegates to).
ForwardPass network_forward_at(ad::Graph& g, const NetworkParams& params,
                               const geom::PointCloud& cloud,
                               const std::vector<std::size_t>& query_indices);

/// Convenience non-training entry point.
Prediction predict(const NetworkParams& params, const geom::PointCloud& cloud,
                   std::size_t query_count, std::uint64_t query_seed);

/// sigma(h) > 0.5 <=> h > 0, strict.
std::vector<std::uint8_t> binarize(const double* heatmap_row, std::size_t n);

// Checkpoint container: magic line, JSON header (config, tensor shapes,
// provenance), then raw little-endian doubles in header order.
void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     const io::Provenance& prov = {});
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace pcseg::net
