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

#include "pcseg/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pcseg/kernels.hpp"

namespace pcseg::net {

using ad::Graph;
using ad::Tensor;
using ad::Val;
using nlohmann::json;

namespace {

constexpr double kAttnMaskValue = -1e9;

struct LevelData {
  double voxel_size = 0;
  std::vector<std::vector<std::size_t>> members;    // voxel -> point indices
  std::vector<std::size_t> point_to_voxel;          // N
  std::vector<Vec3> centroids;
  std::vector<std::vector<std::size_t>> neighbors;  // 6-connectivity, occupied only
};

LevelData build_level(const geom::PointCloud& cloud, double voxel_size) {
  const geom::VoxelGrid grid = geom::build_voxel_grid(cloud, voxel_size);
  LevelData level;
  level.voxel_size = voxel_size;
  level.point_to_voxel.resize(cloud.size());

  std::map<geom::VoxelGrid::Cell, std::size_t> index_of;
  for (const auto& [cell, members] : grid.cells) {
    const std::size_t vi = level.members.size();
    index_of.emplace(cell, vi);
    Vec3 centroid{0, 0, 0};
    for (std::size_t m : members) {
      centroid += cloud.positions[m];
      level.point_to_voxel[m] = vi;
    }
    level.centroids.push_back(centroid / double(members.size()));
    level.members.push_back(members);
  }
  level.neighbors.resize(level.members.size());
  std::size_t vi = 0;
  for (const auto& [cell, members] : grid.cells) {
    for (int axis = 0; axis < 3; ++axis) {
      for (int dir : {-1, 1}) {
        geom::VoxelGrid::Cell nb = cell;
        nb[axis] += dir;
        const auto it = index_of.find(nb);
        if (it != index_of.end()) level.neighbors[vi].push_back(it->second);
      }
    }
    ++vi;
  }
  return level;
}

Aabb padded_bounds(const geom::PointCloud& cloud) {
  Aabb box = cloud.bounds();
  for (int a = 0; a < 3; ++a) {
    if (!(box.max[a] - box.min[a] > 1e-9)) {
      box.min[a] -= 0.5;
      box.max[a] += 0.5;
    }
  }
  return box;
}

Tensor fourier_rows(const std::vector<Vec3>& points, int bands, const Aabb& bounds) {
  Tensor out({points.size(), static_cast<std::size_t>(6 * bands)});
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::vector<double> enc = geom::fourier_encode(points[i], bands, bounds);
    std::copy(enc.begin(), enc.end(), out.data.data() + i * enc.size());
  }
  return out;
}

// Linear + bias.
Val linear(Graph& g, Val x, Val w, Val b) { return g.add_rowvec(g.matmul(x, w), b); }

struct ParamVals {
  Graph* g;
  std::map<std::string, Val>* vals;
  Val operator()(const std::string& name) const {
    const auto it = vals->find(name);
    if (it == vals->end()) throw ValidationError("network: missing parameter " + name);
    return it->second;
  }
};

// Plain-value mask-head evaluation used for attention mask decisions; these
// decisions are binarized so they are constants to the gradient.
Tensor mask_features_values(const NetworkParams& p, const Tensor& queries) {
  const std::size_t q = queries.rows(), d = queries.cols();
  const Tensor& lng = p.tensors.at("final_ln.g");
  const Tensor& lnb = p.tensors.at("final_ln.b");
  Tensor normed({q, d});
  for (std::size_t r = 0; r < q; ++r) {
    const double* row = queries.data.data() + r * d;
    const double mean = kernels::sum(row, d) / d;
    double var = 0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
    const double inv = 1.0 / std::sqrt(var / d + 1e-5);
    for (std::size_t c = 0; c < d; ++c)
      normed.at(r, c) = (row[c] - mean) * inv * lng.data[c] + lnb.data[c];
  }
  const Tensor& w1 = p.tensors.at("mask_head.fc1.w");
  const Tensor& b1 = p.tensors.at("mask_head.fc1.b");
  const Tensor& w2 = p.tensors.at("mask_head.fc2.w");
  const Tensor& b2 = p.tensors.at("mask_head.fc2.b");
  Tensor h({q, d});
  kernels::matmul_nn(h.data.data(), normed.data.data(), w1.data.data(), q, d, d, false);
  for (std::size_t r = 0; r < q; ++r) {
    double* row = h.data.data() + r * d;
    kernels::add(row, b1.data.data(), d);
    for (std::size_t c = 0; c < d; ++c) row[c] = row[c] > 0 ? row[c] : 0;
  }
  Tensor out({q, d});
  kernels::matmul_nn(out.data.data(), h.data.data(), w2.data.data(), q, d, d, false);
  for (std::size_t r = 0; r < q; ++r) kernels::add(out.data.data() + r * d, b2.data.data(), d);
  return out;
}

// Additive attention mask from the current query state against one level's
// voxel features: 0 where attended, -1e9 elsewhere; rows whose predicted
// mask is empty fall back to full attention.
Tensor attention_mask(const NetworkParams& p, const Tensor& query_state,
                      const Tensor& voxel_features) {
  const Tensor f = mask_features_values(p, query_state);
  const std::size_t q = f.rows(), d = f.cols(), v = voxel_features.rows();
  const double scale = p.tensors.at("heat.scale").data[0];
  Tensor mask({q, v});
  for (std::size_t i = 0; i < q; ++i) {
    const double* fi = f.data.data() + i * d;
    const double fn = std::sqrt(kernels::dot(fi, fi, d) + 1e-24);
    bool any = false;
    for (std::size_t j = 0; j < v; ++j) {
      const double* gj = voxel_features.data.data() + j * d;
      const double gn = std::sqrt(kernels::dot(gj, gj, d) + 1e-24);
      const double h = scale * kernels::dot(fi, gj, d) / (fn * gn);
      const bool in = h > 0;
      mask.at(i, j) = in ? 0.0 : kAttnMaskValue;
      any = any || in;
    }
    if (!any)
      for (std::size_t j = 0; j < v; ++j) mask.at(i, j) = 0.0;
  }
  return mask;
}

}  // namespace

void NetworkConfig::validate() const {
  if (feature_dim < 2 || levels < 1 || decoder_layers < 1 || fourier_bands < 1 ||
      ffn_hidden < 1)
    throw ValidationError("network config: all dimensions must be positive");
  if (!(backbone_base_voxel > 0))
    throw ValidationError("network config: backbone voxel size must be > 0");
}

NetworkParams NetworkParams::init(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.feature_dim;
  const std::size_t h = config.ffn_hidden;
  const std::size_t enc = 6 * static_cast<std::size_t>(config.fourier_bands);

  NetworkParams p;
  p.config = config;
  auto& t = p.tensors;
  const auto mat = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    t.emplace(name, Tensor({rows, cols}));
  };
  const auto vec = [&](const std::string& name, std::size_t n, double fill = 0.0) {
    t.emplace(name, Tensor({n}, fill));
  };

  for (int l = 0; l < config.levels; ++l) {
    const std::string base = "backbone.l" + std::to_string(l);
    mat(base + ".fc1.w", 6, d);
    vec(base + ".fc1.b", d);
    mat(base + ".fc2.w", d, d);
    vec(base + ".fc2.b", d);
    mat(base + ".mp.w", 2 * d, d);
    vec(base + ".mp.b", d);
  }
  mat("query_embed.w", enc, d);
  vec("query_embed.b", d);
  mat("pos.w", enc, d);
  vec("pos.b", d);
  for (int layer = 0; layer < config.decoder_layers; ++layer) {
    for (int l = 0; l < config.levels; ++l) {
      const std::string base = "decoder.t" + std::to_string(layer) + ".l" + std::to_string(l);
      for (const char* attn : {".cross", ".self"}) {
        for (const char* proj : {".q", ".k", ".v", ".o"}) {
          mat(base + attn + proj + ".w", d, d);
          vec(base + attn + proj + ".b", d);
        }
      }
      vec(base + ".ln1.g", d, 1.0);
      vec(base + ".ln1.b", d);
      vec(base + ".ln2.g", d, 1.0);
      vec(base + ".ln2.b", d);
      vec(base + ".ln3.g", d, 1.0);
      vec(base + ".ln3.b", d);
      mat(base + ".ffn.fc1.w", d, h);
      vec(base + ".ffn.fc1.b", h);
      mat(base + ".ffn.fc2.w", h, d);
      vec(base + ".ffn.fc2.b", d);
    }
  }
  vec("final_ln.g", d, 1.0);
  vec("final_ln.b", d);
  mat("mask_head.fc1.w", d, d);
  vec("mask_head.fc1.b", d);
  mat("mask_head.fc2.w", d, d);
  vec("mask_head.fc2.b", d);
  mat("obj_head.w", d, 2);
  vec("obj_head.b", 2);
  vec("heat.scale", 1, 10.0);

  // Xavier draws in map (name) order so init is a pure function of the seed.
  Rng rng(seed);
  for (auto& [name, tensor] : t) {
    if (tensor.shape.size() != 2) continue;  // biases/gains keep their fill
    const double std_dev = std::sqrt(2.0 / (tensor.shape[0] + tensor.shape[1]));
    for (double& x : tensor.data) x = rng.normal() * std_dev;
  }
  return p;
}

void NetworkParams::validate() const {
  config.validate();
  for (const auto& [name, tensor] : tensors)
    for (double v : tensor.data)
      if (!std::isfinite(v))
        throw ValidationError("network params: non-finite value in " + name);
}

std::vector<Tensor> backbone_forward(const NetworkParams& params, const geom::PointCloud& cloud) {
  if (cloud.size() == 0) throw ValidationError("backbone: empty cloud");
  std::vector<Tensor> out;
  Graph g2;
  std::map<std::string, Val> vals;
  for (const auto& [name, tensor] : params.tensors) vals.emplace(name, g2.input(tensor));
  ParamVals P{&g2, &vals};
  for (int l = 0; l < params.config.levels; ++l) {
    const LevelData level =
        build_level(cloud, params.config.backbone_base_voxel * std::ldexp(1.0, l));
    Tensor x({cloud.size(), 6});
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3 off =
          (cloud.positions[i] - level.centroids[level.point_to_voxel[i]]) / level.voxel_size;
      x.data[i * 6 + 0] = off.x;
      x.data[i * 6 + 1] = off.y;
      x.data[i * 6 + 2] = off.z;
      x.data[i * 6 + 3] = cloud.colors[i].x;
      x.data[i * 6 + 4] = cloud.colors[i].y;
      x.data[i * 6 + 5] = cloud.colors[i].z;
    }
    const std::string base = "backbone.l" + std::to_string(l);
    Val pts = g2.input(std::move(x));
    Val h = linear(g2, g2.relu(linear(g2, pts, P(base + ".fc1.w"), P(base + ".fc1.b"))),
                   P(base + ".fc2.w"), P(base + ".fc2.b"));
    Val vox = g2.pool_rows_mean(h, level.members);
    Val nbr = g2.pool_rows_mean(vox, level.neighbors);
    Val mixed = g2.relu(
        linear(g2, g2.concat_cols(vox, nbr), P(base + ".mp.w"), P(base + ".mp.b")));
    out.push_back(g2.value(g2.scatter_rows(mixed, level.point_to_voxel)));
  }
  return out;
}

ForwardPass network_forward(Graph& g, const NetworkParams& params, const geom::PointCloud& cloud,
                            std::size_t query_count, std::uint64_t query_seed) {
  return network_forward_at(g, params, cloud,
                            geom::fps_sample(cloud, query_count, query_seed));
}

ForwardPass network_forward_at(Graph& g, const NetworkParams& params,
                               const geom::PointCloud& cloud,
                               const std::vector<std::size_t>& query_indices) {
  params.config.validate();
  if (cloud.size() == 0) throw ValidationError("network: empty cloud");
  if (query_indices.empty() || query_indices.size() > cloud.size())
    throw ValidationError("network: need 1 <= Q <= N queries");
  const NetworkConfig& cfg = params.config;
  const std::size_t dim = cfg.feature_dim;
  const Aabb bounds = padded_bounds(cloud);

  ForwardPass fp;
  for (const auto& [name, tensor] : params.tensors) fp.params.emplace(name, g.input(tensor));
  ParamVals P{&g, &fp.params};

  // -- backbone ---------------------------------------------------------------
  std::vector<Val> level_voxfeat;      // [V_l, D]
  std::vector<Val> level_kv;           // voxel features + positional encoding
  Val point_features{};                // level 0 broadcast to points
  for (int l = 0; l < cfg.levels; ++l) {
    const LevelData level = build_level(cloud, cfg.backbone_base_voxel * std::ldexp(1.0, l));
    Tensor x({cloud.size(), 6});
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3 off =
          (cloud.positions[i] - level.centroids[level.point_to_voxel[i]]) / level.voxel_size;
      x.data[i * 6 + 0] = off.x;
      x.data[i * 6 + 1] = off.y;
      x.data[i * 6 + 2] = off.z;
      x.data[i * 6 + 3] = cloud.colors[i].x;
      x.data[i * 6 + 4] = cloud.colors[i].y;
      x.data[i * 6 + 5] = cloud.colors[i].z;
    }
    const std::string base = "backbone.l" + std::to_string(l);
    Val pts = g.input(std::move(x));
    Val h = linear(g, g.relu(linear(g, pts, P(base + ".fc1.w"), P(base + ".fc1.b"))),
                   P(base + ".fc2.w"), P(base + ".fc2.b"));
    Val vox = g.pool_rows_mean(h, level.members);
    Val nbr = g.pool_rows_mean(vox, level.neighbors);
    Val mixed =
        g.relu(linear(g, g.concat_cols(vox, nbr), P(base + ".mp.w"), P(base + ".mp.b")));
    level_voxfeat.push_back(mixed);

    Val pe = g.input(fourier_rows(level.centroids, cfg.fourier_bands, bounds));
    level_kv.push_back(g.add(mixed, linear(g, pe, P("pos.w"), P("pos.b"))));
    if (l == 0) point_features = g.scatter_rows(mixed, level.point_to_voxel);
  }

  // -- queries -----------------------------------------------------------------
  fp.query_indices = query_indices;
  for (std::size_t idx : query_indices) fp.query_positions.push_back(cloud.positions[idx]);
  Val query_enc = g.input(fourier_rows(fp.query_positions, cfg.fourier_bands, bounds));
  Val queries = linear(g, query_enc, P("query_embed.w"), P("query_embed.b"));
  Val query_pos = linear(g, query_enc, P("pos.w"), P("pos.b"));
  fp.initial_queries = queries;

  // -- decoder: per layer, coarse -> fine --------------------------------------
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int layer = 0; layer < cfg.decoder_layers; ++layer) {
    for (int l = cfg.levels - 1; l >= 0; --l) {
      const std::string base = "decoder.t" + std::to_string(layer) + ".l" + std::to_string(l);

      // masked cross-attention (mask decided on current values, held constant)
      Val xn = g.layer_norm(queries, P(base + ".ln1.g"), P(base + ".ln1.b"));
      Val q = linear(g, g.add(xn, query_pos), P(base + ".cross.q.w"), P(base + ".cross.q.b"));
      Val k = linear(g, level_kv[l], P(base + ".cross.k.w"), P(base + ".cross.k.b"));
      Val v = linear(g, level_voxfeat[l], P(base + ".cross.v.w"), P(base + ".cross.v.b"));
      Val scores = g.scale(g.matmul_nt(q, k), attn_scale);
      if (cfg.masked_attention)
        scores = g.add_const(scores, attention_mask(params, g.value(queries),
                                                    g.value(level_voxfeat[l])));
      Val ctx = g.matmul(g.softmax_rows(scores), v);
      queries = g.add(queries,
                      linear(g, ctx, P(base + ".cross.o.w"), P(base + ".cross.o.b")));

      // query self-attention
      Val xn2 = g.layer_norm(queries, P(base + ".ln2.g"), P(base + ".ln2.b"));
      Val sq_in = g.add(xn2, query_pos);
      Val q2 = linear(g, sq_in, P(base + ".self.q.w"), P(base + ".self.q.b"));
      Val k2 = linear(g, sq_in, P(base + ".self.k.w"), P(base + ".self.k.b"));
      Val v2 = linear(g, xn2, P(base + ".self.v.w"), P(base + ".self.v.b"));
      Val ctx2 = g.matmul(g.softmax_rows(g.scale(g.matmul_nt(q2, k2), attn_scale)), v2);
      queries = g.add(queries,
                      linear(g, ctx2, P(base + ".self.o.w"), P(base + ".self.o.b")));

      // feed-forward
      Val xn3 = g.layer_norm(queries, P(base + ".ln3.g"), P(base + ".ln3.b"));
      Val ffn = linear(g, g.relu(linear(g, xn3, P(base + ".ffn.fc1.w"), P(base + ".ffn.fc1.b"))),
                       P(base + ".ffn.fc2.w"), P(base + ".ffn.fc2.b"));
      queries = g.add(queries, ffn);
    }
  }

  // -- heads --------------------------------------------------------------------
  fp.refined_queries = queries;
  Val final_q = g.layer_norm(queries, P("final_ln.g"), P("final_ln.b"));
  Val mask_feat = linear(
      g, g.relu(linear(g, final_q, P("mask_head.fc1.w"), P("mask_head.fc1.b"))),
      P("mask_head.fc2.w"), P("mask_head.fc2.b"));
  fp.heatmaps = g.cosine_scores(mask_feat, point_features, P("heat.scale"));
  fp.objectness = linear(g, final_q, P("obj_head.w"), P("obj_head.b"));
  return fp;
}

Prediction predict(const NetworkParams& params, const geom::PointCloud& cloud,
                   std::size_t query_count, std::uint64_t query_seed) {
  Graph g;
  const ForwardPass fp = network_forward(g, params, cloud, query_count, query_seed);
  Prediction pred;
  pred.heatmaps = g.value(fp.heatmaps);
  pred.objectness = g.value(fp.objectness);
  pred.query_positions = fp.query_positions;
  return pred;
}

std::vector<std::uint8_t> binarize(const double* heatmap_row, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = heatmap_row[i] > 0 ? 1 : 0;
  return out;
}

// -- checkpoints ------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     const io::Provenance& prov) {
  params.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());

  json header;
  header["config"] = {{"feature_dim", params.config.feature_dim},
                      {"levels", params.config.levels},
                      {"decoder_layers", params.config.decoder_layers},
                      {"fourier_bands", params.config.fourier_bands},
                      {"ffn_hidden", params.config.ffn_hidden},
                      {"backbone_base_voxel", params.config.backbone_base_voxel},
                      {"masked_attention", params.config.masked_attention}};
  header["provenance"] = {{"config_hash", prov.config_hash}, {"version", prov.version}};
  json tensors = json::array();
  for (const auto& [name, tensor] : params.tensors)
    tensors.push_back({{"name", name}, {"shape", tensor.shape}});
  header["tensors"] = std::move(tensors);

  const std::string header_str = header.dump();
  out << "pcsegckpt/1\n";
  const std::uint64_t len = header_str.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, tensor] : params.tensors)
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * 8));
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("missing checkpoint: " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != "pcsegckpt/1")
    throw ValidationError(path.string() + ": not a pcseg checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(in.gcount()) != len)
    throw ValidationError(path.string() + ": truncated header");

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": bad header: " + e.what());
  }
  NetworkParams params;
  try {
    const json& c = header.at("config");
    params.config.feature_dim = c.at("feature_dim").get<int>();
    params.config.levels = c.at("levels").get<int>();
    params.config.decoder_layers = c.at("decoder_layers").get<int>();
    params.config.fourier_bands = c.at("fourier_bands").get<int>();
    params.config.ffn_hidden = c.at("ffn_hidden").get<int>();
    params.config.backbone_base_voxel = c.at("backbone_base_voxel").get<double>();
    params.config.masked_attention = c.at("masked_attention").get<bool>();
    for (const json& item : header.at("tensors")) {
      Tensor t(item.at("shape").get<std::vector<std::size_t>>());
      in.read(reinterpret_cast<char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * 8));
      if (static_cast<std::size_t>(in.gcount()) != t.data.size() * 8)
        throw ValidationError(path.string() + ": truncated tensor data");
      params.tensors.emplace(item.at("name").get<std::string>(), std::move(t));
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": bad header: " + e.what());
  }
  params.validate();
  return params;
}

}  // namespace pcseg::net
