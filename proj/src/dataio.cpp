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

#include "pcseg/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pcseg::io {

using nlohmann::json;

namespace {

std::string provenance_comment(const Provenance& prov) {
  return "pcseg config=" + prov.config_hash + " version=" + prov.version;
}

json provenance_json(const Provenance& prov) {
  return json{{"config_hash", prov.config_hash}, {"version", prov.version}};
}

std::ofstream open_out(const fs::path& path, bool binary) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw MissingInputError("missing input file: " + path.string());
  return in;
}

json parse_json_file(const fs::path& path) {
  std::ifstream in = open_in(path, false);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& doc) {
  std::ofstream out = open_out(path, false);
  out << doc.dump(2) << "\n";
}

// PNM token reader: skips whitespace and '#' comments.
std::string pnm_token(std::istream& in, const fs::path& path) {
  std::string tok;
  for (;;) {
    const int c = in.get();
    if (c == EOF) {
      if (tok.empty()) throw ValidationError(path.string() + ": truncated header");
      return tok;
    }
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

int pnm_int(std::istream& in, const fs::path& path) {
  const std::string tok = pnm_token(in, path);
  try {
    return std::stoi(tok);
  } catch (...) {
    throw ValidationError(path.string() + ": bad integer '" + tok + "' in header");
  }
}

double parse_double(const std::string& tok, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (...) {
    throw ValidationError(path.string() + ": bad number '" + tok + "'");
  }
}

/// Reads all whitespace-separated numeric tokens, skipping '#' comments.
std::vector<double> read_matrix_tokens(const fs::path& path) {
  std::ifstream in = open_in(path, false);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream row(line);
    std::string tok;
    while (row >> tok) values.push_back(parse_double(tok, path));
  }
  return values;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void FrameBundle::validate() const {
  frame.validate();
  intrinsics.validate();
  pose.validate(1e-6);
  if (masks2d.width != frame.width || masks2d.height != frame.height)
    throw ValidationError("frame " + frame_id + ": mask raster dimensions (" +
                          std::to_string(masks2d.width) + "x" + std::to_string(masks2d.height) +
                          ") do not match frame (" + std::to_string(frame.width) + "x" +
                          std::to_string(frame.height) + ")");
  masks2d.validate();
}

// -- depth / color rasters ----------------------------------------------------

void save_depth_pgm(const fs::path& path, const geom::DepthFrame& frame,
                    const Provenance& prov) {
  std::ofstream out = open_out(path, true);
  out << "P5\n# " << provenance_comment(prov) << "\n"
      << frame.width << " " << frame.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(frame.width) * 2);
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      const double mm = std::round(frame.depth_at(u, v) * 1000.0);
      const unsigned value = static_cast<unsigned>(std::clamp(mm, 0.0, 65535.0));
      row[2 * u] = static_cast<unsigned char>(value >> 8);  // big-endian
      row[2 * u + 1] = static_cast<unsigned char>(value & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
}

void load_depth_pgm(const fs::path& path, geom::DepthFrame& frame) {
  std::ifstream in = open_in(path, true);
  if (pnm_token(in, path) != "P5") throw ValidationError(path.string() + ": not a P5 PGM");
  const int w = pnm_int(in, path);
  const int h = pnm_int(in, path);
  const int maxval = pnm_int(in, path);
  if (w <= 0 || h <= 0) throw ValidationError(path.string() + ": bad dimensions");
  if (maxval != 65535)
    throw ValidationError(path.string() + ": expected maxval 65535, got " +
                          std::to_string(maxval));
  frame.width = w;
  frame.height = h;
  frame.depth.resize(static_cast<std::size_t>(w) * h);
  std::vector<unsigned char> raw(frame.depth.size() * 2);
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw ValidationError(path.string() + ": truncated pixel data");
  for (std::size_t i = 0; i < frame.depth.size(); ++i) {
    const unsigned value = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    frame.depth[i] = value / 1000.0;
  }
}

void save_color_ppm(const fs::path& path, const geom::DepthFrame& frame,
                    const Provenance& prov) {
  std::ofstream out = open_out(path, true);
  out << "P6\n# " << provenance_comment(prov) << "\n"
      << frame.width << " " << frame.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(frame.width) * 3);
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      const Vec3& c = frame.color[static_cast<std::size_t>(v) * frame.width + u];
      for (int ch = 0; ch < 3; ++ch)
        row[3 * u + ch] =
            static_cast<unsigned char>(std::clamp(std::round(c[ch] * 255.0), 0.0, 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
}

void load_color_ppm(const fs::path& path, geom::DepthFrame& frame) {
  std::ifstream in = open_in(path, true);
  if (pnm_token(in, path) != "P6") throw ValidationError(path.string() + ": not a P6 PPM");
  const int w = pnm_int(in, path);
  const int h = pnm_int(in, path);
  const int maxval = pnm_int(in, path);
  if (maxval != 255)
    throw ValidationError(path.string() + ": expected maxval 255, got " + std::to_string(maxval));
  if (frame.width == 0 && frame.height == 0) {
    frame.width = w;
    frame.height = h;
  } else if (w != frame.width || h != frame.height) {
    throw ValidationError(path.string() + ": color dimensions " + std::to_string(w) + "x" +
                          std::to_string(h) + " do not match depth " +
                          std::to_string(frame.width) + "x" + std::to_string(frame.height));
  }
  frame.color.resize(static_cast<std::size_t>(w) * h);
  std::vector<unsigned char> raw(frame.color.size() * 3);
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw ValidationError(path.string() + ": truncated pixel data");
  for (std::size_t i = 0; i < frame.color.size(); ++i)
    frame.color[i] = {raw[3 * i] / 255.0, raw[3 * i + 1] / 255.0, raw[3 * i + 2] / 255.0};
}

// -- matrices -------------------------------------------------------------------

void save_intrinsics(const fs::path& path, const geom::CameraIntrinsics& k,
                     const Provenance& prov) {
  std::ofstream out = open_out(path, false);
  out << "# " << provenance_comment(prov) << "\n";
  out << fmt_double(k.fx) << " 0 " << fmt_double(k.cx) << "\n";
  out << "0 " << fmt_double(k.fy) << " " << fmt_double(k.cy) << "\n";
  out << "0 0 1\n";
}

geom::CameraIntrinsics load_intrinsics(const fs::path& path) {
  const std::vector<double> v = read_matrix_tokens(path);
  if (v.size() != 9)
    throw ValidationError(path.string() + ": expected 9 entries, got " +
                          std::to_string(v.size()));
  if (v[1] != 0 || v[3] != 0 || v[6] != 0 || v[7] != 0 || v[8] != 1)
    throw ValidationError(path.string() + ": not an axis-aligned pinhole matrix");
  geom::CameraIntrinsics k{v[0], v[4], v[2], v[5]};
  k.validate();
  return k;
}

void save_pose(const fs::path& path, const geom::RigidPose& pose, const Provenance& prov) {
  std::ofstream out = open_out(path, false);
  out << "# " << provenance_comment(prov) << "\n";
  for (int r = 0; r < 3; ++r) {
    out << fmt_double(pose.rotation(r, 0)) << " " << fmt_double(pose.rotation(r, 1)) << " "
        << fmt_double(pose.rotation(r, 2)) << " " << fmt_double(pose.translation[r]) << "\n";
  }
}

geom::RigidPose load_pose(const fs::path& path) {
  const std::vector<double> v = read_matrix_tokens(path);
  if (v.size() != 12)
    throw ValidationError(path.string() + ": expected 12 entries, got " +
                          std::to_string(v.size()));
  geom::RigidPose pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pose.rotation(r, c) = v[r * 4 + c];
    pose.translation[r] = v[r * 4 + 3];
  }
  try {
    pose.validate(1e-6);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return pose;
}

// -- PLY ---------------------------------------------------------------------------

namespace {

struct PlyProperty {
  std::string type;
  std::string name;
};

void append_le(std::string& buf, double v) {
  // host is little-endian on every supported target
  char tmp[8];
  std::memcpy(tmp, &v, 8);
  buf.append(tmp, 8);
}

void append_le(std::string& buf, std::int32_t v) {
  char tmp[4];
  std::memcpy(tmp, &v, 4);
  buf.append(tmp, 4);
}

}  // namespace

void save_cloud(const fs::path& path, const geom::PointCloud& cloud,
                const std::vector<int>* labels, const PlyOptions& opts) {
  cloud.validate();
  if (labels && labels->size() != cloud.size())
    throw ValidationError("save_cloud: label count does not match cloud size");

  std::ofstream out = open_out(path, true);
  out << "ply\nformat " << (opts.binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  out << "comment " << provenance_comment(opts.prov) << "\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.has_normals())
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (labels) out << "property int mask_id\n";
  out << "end_header\n";

  const auto byte_of = [](double c) {
    return static_cast<int>(std::clamp(std::round(c * 255.0), 0.0, 255.0));
  };
  if (opts.binary) {
    std::string buf;
    buf.reserve(cloud.size() * 40);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      append_le(buf, cloud.positions[i].x);
      append_le(buf, cloud.positions[i].y);
      append_le(buf, cloud.positions[i].z);
      buf.push_back(static_cast<char>(byte_of(cloud.colors[i].x)));
      buf.push_back(static_cast<char>(byte_of(cloud.colors[i].y)));
      buf.push_back(static_cast<char>(byte_of(cloud.colors[i].z)));
      if (cloud.has_normals()) {
        append_le(buf, cloud.normals[i].x);
        append_le(buf, cloud.normals[i].y);
        append_le(buf, cloud.normals[i].z);
      }
      if (labels) append_le(buf, static_cast<std::int32_t>((*labels)[i]));
    }
    out.write(buf.data(), buf.size());
  } else {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      out << fmt_double(cloud.positions[i].x) << " " << fmt_double(cloud.positions[i].y) << " "
          << fmt_double(cloud.positions[i].z) << " " << byte_of(cloud.colors[i].x) << " "
          << byte_of(cloud.colors[i].y) << " " << byte_of(cloud.colors[i].z);
      if (cloud.has_normals())
        out << " " << fmt_double(cloud.normals[i].x) << " " << fmt_double(cloud.normals[i].y)
            << " " << fmt_double(cloud.normals[i].z);
      if (labels) out << " " << (*labels)[i];
      out << "\n";
    }
  }
}

LoadedCloud load_cloud(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  std::string line;
  if (!std::getline(in, line) || line != "ply")
    throw ValidationError(path.string() + ": missing ply magic");

  bool binary = false;
  bool got_format = false;
  std::size_t vertex_count = 0;
  bool in_vertex_element = false;
  std::vector<PlyProperty> props;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word.empty()) continue;
    if (word == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "binary_little_endian")
        binary = true;
      else if (fmt == "ascii")
        binary = false;
      else
        throw ValidationError(path.string() + ": unsupported format '" + fmt + "'");
      got_format = true;
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name != "vertex")
        throw ValidationError(path.string() + ": unknown element '" + name + "'");
      vertex_count = count;
      in_vertex_element = true;
    } else if (word == "property") {
      if (!in_vertex_element)
        throw ValidationError(path.string() + ": property before any element");
      PlyProperty p;
      ls >> p.type >> p.name;
      static const std::set<std::string> known = {"x",  "y",  "z",  "red", "green",
                                                  "blue", "nx", "ny", "nz", "mask_id"};
      if (!known.count(p.name))
        throw ValidationError(path.string() + ": unknown property '" + p.name + "'");
      props.push_back(p);
    } else if (word == "end_header") {
      break;
    } else {
      throw ValidationError(path.string() + ": unexpected header line '" + line + "'");
    }
  }
  if (!got_format) throw ValidationError(path.string() + ": missing format line");

  const auto has = [&](const char* n) {
    return std::any_of(props.begin(), props.end(),
                       [&](const PlyProperty& p) { return p.name == n; });
  };
  for (const char* req : {"x", "y", "z", "red", "green", "blue"})
    if (!has(req))
      throw ValidationError(path.string() + ": missing required property '" + req + "'");
  const bool normals = has("nx");
  const bool with_labels = has("mask_id");

  LoadedCloud out;
  out.cloud.positions.resize(vertex_count);
  out.cloud.colors.resize(vertex_count);
  if (normals) out.cloud.normals.resize(vertex_count);
  if (with_labels) out.labels.resize(vertex_count);

  const auto scalar_size = [&](const PlyProperty& p) -> std::size_t {
    if (p.type == "double") return 8;
    if (p.type == "float") return 4;
    if (p.type == "uchar") return 1;
    if (p.type == "int") return 4;
    throw ValidationError(path.string() + ": unsupported property type '" + p.type + "'");
  };

  if (binary) {
    std::size_t stride = 0;
    for (const PlyProperty& p : props) stride += scalar_size(p);
    std::vector<char> raw(stride);
    for (std::size_t i = 0; i < vertex_count; ++i) {
      in.read(raw.data(), static_cast<std::streamsize>(stride));
      if (static_cast<std::size_t>(in.gcount()) != stride)
        throw ValidationError(path.string() + ": truncated vertex data at vertex " +
                              std::to_string(i));
      std::size_t off = 0;
      for (const PlyProperty& p : props) {
        double value = 0;
        if (p.type == "double") {
          std::memcpy(&value, raw.data() + off, 8);
        } else if (p.type == "float") {
          float f;
          std::memcpy(&f, raw.data() + off, 4);
          value = f;
        } else if (p.type == "uchar") {
          value = static_cast<unsigned char>(raw[off]);
        } else {
          std::int32_t n;
          std::memcpy(&n, raw.data() + off, 4);
          value = n;
        }
        off += scalar_size(p);
        if (p.name == "x") out.cloud.positions[i].x = value;
        else if (p.name == "y") out.cloud.positions[i].y = value;
        else if (p.name == "z") out.cloud.positions[i].z = value;
        else if (p.name == "red") out.cloud.colors[i].x = value / 255.0;
        else if (p.name == "green") out.cloud.colors[i].y = value / 255.0;
        else if (p.name == "blue") out.cloud.colors[i].z = value / 255.0;
        else if (p.name == "nx") out.cloud.normals[i].x = value;
        else if (p.name == "ny") out.cloud.normals[i].y = value;
        else if (p.name == "nz") out.cloud.normals[i].z = value;
        else if (p.name == "mask_id") out.labels[i] = static_cast<int>(value);
      }
    }
  } else {
    for (std::size_t i = 0; i < vertex_count; ++i) {
      if (!std::getline(in, line))
        throw ValidationError(path.string() + ": truncated vertex data at vertex " +
                              std::to_string(i));
      std::istringstream ls(line);
      for (const PlyProperty& p : props) {
        std::string tok;
        if (!(ls >> tok))
          throw ValidationError(path.string() + ": truncated vertex line " + std::to_string(i));
        const double value = parse_double(tok, path);
        if (p.name == "x") out.cloud.positions[i].x = value;
        else if (p.name == "y") out.cloud.positions[i].y = value;
        else if (p.name == "z") out.cloud.positions[i].z = value;
        else if (p.name == "red") out.cloud.colors[i].x = value / 255.0;
        else if (p.name == "green") out.cloud.colors[i].y = value / 255.0;
        else if (p.name == "blue") out.cloud.colors[i].z = value / 255.0;
        else if (p.name == "nx") out.cloud.normals[i].x = value;
        else if (p.name == "ny") out.cloud.normals[i].y = value;
        else if (p.name == "nz") out.cloud.normals[i].z = value;
        else if (p.name == "mask_id") out.labels[i] = static_cast<int>(value);
      }
    }
  }
  return out;
}

// -- mask sets -----------------------------------------------------------------------

void save_masks2d(const fs::path& path, const mask::MaskSet2D& ms, const Provenance& prov) {
  ms.validate();
  json doc;
  doc["schema"] = "pcseg.masks2d/1";
  doc["width"] = ms.width;
  doc["height"] = ms.height;
  doc["provenance"] = provenance_json(prov);
  json arr = json::array();
  for (const mask::Mask2D& m : ms.masks) {
    arr.push_back(
        {{"mask_id", m.id}, {"score", m.score}, {"rle", mask::rle_encode(m.raster)}});
  }
  doc["masks"] = std::move(arr);
  write_json_file(path, doc);
}

mask::MaskSet2D load_masks2d(const fs::path& path) {
  const json doc = parse_json_file(path);
  try {
    if (doc.at("schema") != "pcseg.masks2d/1")
      throw ValidationError(path.string() + ": unexpected schema");
    mask::MaskSet2D ms;
    ms.width = doc.at("width").get<int>();
    ms.height = doc.at("height").get<int>();
    const std::size_t n = static_cast<std::size_t>(ms.width) * ms.height;
    for (const json& item : doc.at("masks")) {
      mask::Mask2D m;
      m.id = item.at("mask_id").get<int>();
      m.score = item.at("score").get<double>();
      m.raster = mask::rle_decode(item.at("rle").get<std::vector<std::uint64_t>>(), n);
      ms.masks.push_back(std::move(m));
    }
    ms.validate();
    return ms;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_masks(const fs::path& path, const mask::MaskSet& ms, const Provenance& prov) {
  json doc;
  doc["schema"] = "pcseg.masks3d/1";
  doc["point_count"] = ms.point_count;
  doc["provenance"] = provenance_json(prov);
  json arr = json::array();
  for (const mask::Mask& m : ms.masks) {
    json item = {{"mask_id", m.id},
                 {"structural", m.structural},
                 {"rle", mask::rle_encode(m.membership)}};
    if (m.score)
      item["score"] = *m.score;
    else
      item["score"] = nullptr;
    arr.push_back(std::move(item));
  }
  doc["masks"] = std::move(arr);
  write_json_file(path, doc);
}

mask::MaskSet load_masks(const fs::path& path) {
  const json doc = parse_json_file(path);
  try {
    if (doc.at("schema") != "pcseg.masks3d/1")
      throw ValidationError(path.string() + ": unexpected schema");
    mask::MaskSet ms;
    ms.point_count = doc.at("point_count").get<std::size_t>();
    for (const json& item : doc.at("masks")) {
      mask::Mask m;
      m.id = item.at("mask_id").get<int>();
      m.structural = item.at("structural").get<bool>();
      if (!item.at("score").is_null()) m.score = item.at("score").get<double>();
      m.membership =
          mask::rle_decode(item.at("rle").get<std::vector<std::uint64_t>>(), ms.point_count);
      ms.masks.push_back(std::move(m));
    }
    ms.validate();
    return ms;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// -- frame bundles ----------------------------------------------------------------------

void save_frame_bundle(const fs::path& prefix, const FrameBundle& bundle,
                       const Provenance& prov) {
  bundle.validate();
  save_depth_pgm(fs::path(prefix.string() + ".depth.pgm"), bundle.frame, prov);
  save_color_ppm(fs::path(prefix.string() + ".color.ppm"), bundle.frame, prov);
  save_intrinsics(fs::path(prefix.string() + ".intrinsics.txt"), bundle.intrinsics, prov);
  save_pose(fs::path(prefix.string() + ".pose.txt"), bundle.pose, prov);
  save_masks2d(fs::path(prefix.string() + ".masks.json"), bundle.masks2d, prov);
}

FrameBundle load_frame_bundle(const fs::path& prefix) {
  FrameBundle b;
  b.frame_id = prefix.filename().string();
  load_depth_pgm(fs::path(prefix.string() + ".depth.pgm"), b.frame);
  load_color_ppm(fs::path(prefix.string() + ".color.ppm"), b.frame);
  b.intrinsics = load_intrinsics(fs::path(prefix.string() + ".intrinsics.txt"));
  b.pose = load_pose(fs::path(prefix.string() + ".pose.txt"));
  b.masks2d = load_masks2d(fs::path(prefix.string() + ".masks.json"));
  b.validate();
  return b;
}

// -- scenes -----------------------------------------------------------------------------

void save_scene(const fs::path& scene_dir, const SceneRecord& scene, const Provenance& prov) {
  fs::create_directories(scene_dir / "frames");
  std::vector<int> labels = scene.gt_masks.to_labels();
  save_cloud(scene_dir / "full_cloud.ply", scene.full_cloud,
             scene.gt_masks.masks.empty() ? nullptr : &labels, {true, prov});
  if (!scene.gt_masks.masks.empty())
    save_masks(scene_dir / "full_cloud.masks.json", scene.gt_masks, prov);

  json doc;
  doc["schema"] = "pcseg.scene/1";
  doc["scene_id"] = scene.scene_id;
  doc["provenance"] = provenance_json(prov);
  json frames = json::array();
  for (const FrameBundle& f : scene.frames) {
    save_frame_bundle(scene_dir / "frames" / f.frame_id, f, prov);
    frames.push_back(f.frame_id);
  }
  doc["frames"] = std::move(frames);
  write_json_file(scene_dir / "scene.json", doc);
}

SceneRecord load_scene(const fs::path& scene_dir) {
  const json doc = parse_json_file(scene_dir / "scene.json");
  SceneRecord scene;
  try {
    if (doc.at("schema") != "pcseg.scene/1")
      throw ValidationError((scene_dir / "scene.json").string() + ": unexpected schema");
    scene.scene_id = doc.at("scene_id").get<std::string>();
    scene.full_cloud = load_cloud(scene_dir / "full_cloud.ply").cloud;
    if (fs::exists(scene_dir / "full_cloud.masks.json"))
      scene.gt_masks = load_masks(scene_dir / "full_cloud.masks.json");
    for (const json& fid : doc.at("frames"))
      scene.frames.push_back(load_frame_bundle(scene_dir / "frames" / fid.get<std::string>()));
  } catch (const json::exception& e) {
    throw ValidationError((scene_dir / "scene.json").string() + ": " + e.what());
  }

  // Every frame's camera center must sit inside the scene bounds (10% slack
  // per side).
  const Aabb box = scene.full_cloud.bounds().inflated(0.2);
  for (const FrameBundle& f : scene.frames) {
    if (!box.contains(f.pose.camera_center()))
      throw ValidationError("scene " + scene.scene_id + ": frame " + f.frame_id +
                            " camera center outside scene bounds");
  }
  return scene;
}

std::vector<fs::path> list_scenes(const fs::path& root) {
  if (!fs::exists(root)) throw MissingInputError("missing scene root: " + root.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "scene.json"))
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pcseg::io
