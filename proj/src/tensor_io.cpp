// Copyright 2026 The fmapood Authors
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

#include "fmapood/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "fmapood/errors.hpp"
#include "json.hpp"

namespace fmapood {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");
static_assert(sizeof(float) == 4);

constexpr std::size_t kHeaderFixed = 6;  // magic + version + ndim

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorKind::Io, "write failed for " + path.string());
}

// ---- manifest field helpers ------------------------------------------------

[[noreturn]] void field_error(const std::string& where, const std::string& what) {
  raise(ErrorKind::Format, where + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) field_error(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) field_error(where, std::string("missing field '") + key + "'");
  return *it;
}

std::uint32_t as_u32(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0 ||
      v.get<std::int64_t>() > 0xFFFFFFFFLL) {
    field_error(where, "expected an unsigned integer");
  }
  return v.get<std::uint32_t>();
}

std::int32_t as_i32(const json& v, const std::string& where) {
  if (!v.is_number_integer()) field_error(where, "expected an integer");
  auto x = v.get<std::int64_t>();
  if (x < INT32_MIN || x > INT32_MAX) field_error(where, "integer out of range");
  return static_cast<std::int32_t>(x);
}

float as_float(const json& v, const std::string& where) {
  if (!v.is_number()) field_error(where, "expected a number");
  return v.get<float>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) field_error(where, "expected a string");
  return v.get<std::string>();
}

BoundingBox parse_box(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 4) field_error(where, "box must be [x1,y1,x2,y2]");
  BoundingBox b{as_float(v[0], where), as_float(v[1], where),
                as_float(v[2], where), as_float(v[3], where)};
  return b;
}

json box_json(const BoundingBox& b) {
  return json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

DatasetManifest parse_manifest(const json& doc) {
  DatasetManifest m;
  m.name = as_string(require(doc, "name", "manifest"), "manifest.name");
  m.num_classes = as_u32(require(doc, "num_classes", "manifest"), "manifest.num_classes");
  m.stride_count = as_u32(require(doc, "stride_count", "manifest"), "manifest.stride_count");
  const json& images = require(doc, "images", "manifest");
  if (!images.is_array()) field_error("manifest.images", "expected an array");
  m.images.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const json& img = images[i];
    std::string where = "images[" + std::to_string(i) + "]";
    ImageRecord rec;
    rec.image_id = as_string(require(img, "image_id", where), where + ".image_id");
    where = "image '" + rec.image_id + "'";
    rec.width = as_u32(require(img, "width", where), where + ".width");
    rec.height = as_u32(require(img, "height", where), where + ".height");

    const json& strides = require(img, "strides", where);
    if (!strides.is_array()) field_error(where + ".strides", "expected an array");
    for (const json& s : strides) {
      StrideEntry e;
      e.stride_index = as_u32(require(s, "stride_index", where), where + ".strides.stride_index");
      e.downsample_factor =
          as_u32(require(s, "downsample_factor", where), where + ".strides.downsample_factor");
      e.tensor_path = as_string(require(s, "tensor_path", where), where + ".strides.tensor_path");
      rec.strides.push_back(std::move(e));
    }

    const json& dets = require(img, "detections", where);
    if (!dets.is_array()) field_error(where + ".detections", "expected an array");
    for (std::size_t k = 0; k < dets.size(); ++k) {
      const json& d = dets[k];
      std::string dw = where + ".detections[" + std::to_string(k) + "]";
      Detection det;
      det.box = parse_box(require(d, "box", dw), dw + ".box");
      det.class_id = as_u32(require(d, "class_id", dw), dw + ".class_id");
      det.confidence = as_float(require(d, "confidence", dw), dw + ".confidence");
      det.stride_index = as_u32(require(d, "stride_index", dw), dw + ".stride_index");
      const json& logits = require(d, "logits", dw);
      if (!logits.is_array()) field_error(dw + ".logits", "expected an array");
      det.logits.reserve(logits.size());
      for (const json& z : logits) det.logits.push_back(as_float(z, dw + ".logits"));
      rec.detections.push_back(std::move(det));
    }

    const json& gts = require(img, "ground_truth", where);
    if (!gts.is_array()) field_error(where + ".ground_truth", "expected an array");
    for (std::size_t k = 0; k < gts.size(); ++k) {
      const json& g = gts[k];
      std::string gw = where + ".ground_truth[" + std::to_string(k) + "]";
      GroundTruthObject gt;
      gt.box = parse_box(require(g, "box", gw), gw + ".box");
      gt.class_id = as_i32(require(g, "class_id", gw), gw + ".class_id");
      rec.ground_truth.push_back(gt);
    }
    m.images.push_back(std::move(rec));
  }
  return m;
}

json manifest_json(const DatasetManifest& m) {
  json images = json::array();
  for (const auto& rec : m.images) {
    json strides = json::array();
    for (const auto& s : rec.strides) {
      strides.push_back({{"stride_index", s.stride_index},
                         {"downsample_factor", s.downsample_factor},
                         {"tensor_path", s.tensor_path}});
    }
    json dets = json::array();
    for (const auto& d : rec.detections) {
      dets.push_back({{"box", box_json(d.box)},
                      {"class_id", d.class_id},
                      {"confidence", d.confidence},
                      {"stride_index", d.stride_index},
                      {"logits", d.logits}});
    }
    json gts = json::array();
    for (const auto& g : rec.ground_truth) {
      gts.push_back({{"box", box_json(g.box)}, {"class_id", g.class_id}});
    }
    images.push_back({{"image_id", rec.image_id},
                      {"width", rec.width},
                      {"height", rec.height},
                      {"strides", std::move(strides)},
                      {"detections", std::move(dets)},
                      {"ground_truth", std::move(gts)}});
  }
  return {{"name", m.name},
          {"num_classes", m.num_classes},
          {"stride_count", m.stride_count},
          {"images", std::move(images)}};
}

void check_box(const BoundingBox& b, const std::string& where) {
  if (!(std::isfinite(b.x_min) && std::isfinite(b.y_min) &&
        std::isfinite(b.x_max) && std::isfinite(b.y_max))) {
    field_error(where, "box coordinates must be finite");
  }
  if (!b.valid()) field_error(where, "box must satisfy 0 <= x_min < x_max and 0 <= y_min < y_max");
}

Dataset load_impl(const std::filesystem::path& path, bool keep_maps) {
  auto bytes = read_file(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    raise(ErrorKind::Format, path.string() + ": invalid JSON: " + e.what());
  }
  Dataset ds;
  ds.manifest = parse_manifest(doc);
  validate_manifest(ds.manifest);

  const auto base = path.parent_path();
  std::vector<StrideFeatureMaps> maps;
  maps.reserve(ds.manifest.images.size());
  for (const auto& rec : ds.manifest.images) {
    StrideFeatureMaps fm;
    fm.image_id = rec.image_id;
    fm.image_width = rec.width;
    fm.image_height = rec.height;
    for (const auto& s : rec.strides) {
      auto tpath = base / s.tensor_path;
      if (!std::filesystem::exists(tpath)) {
        raise(ErrorKind::Format, "image '" + rec.image_id + "': missing tensor file " +
                                     tpath.string());
      }
      Tensor t;
      try {
        t = read_tensor(tpath);
      } catch (const Error& e) {
        raise(ErrorKind::Format, "image '" + rec.image_id + "': " + e.what());
      }
      fm.per_stride.push_back({s.stride_index, s.downsample_factor, std::move(t)});
    }
    maps.push_back(std::move(fm));
    validate_maps(ds.manifest, std::span(maps).last(1));
    if (!keep_maps) maps.clear();
  }
  if (keep_maps) ds.maps = std::move(maps);
  return ds;
}

}  // namespace

Tensor::Tensor(std::vector<std::uint32_t> dims, std::vector<float> values)
    : shape(std::move(dims)), data(std::move(values)) {
  if (shape.empty()) raise(ErrorKind::Data, "tensor must have ndim >= 1");
  for (auto d : shape) {
    if (d == 0) raise(ErrorKind::Data, "tensor dims must be >= 1");
  }
  if (element_count(shape) != data.size()) {
    raise(ErrorKind::Data, "tensor data length does not match shape");
  }
}

Tensor::Tensor(std::vector<std::uint32_t> dims)
    : Tensor(dims, std::vector<float>(element_count(dims), 0.0F)) {}

std::size_t element_count(std::span<const std::uint32_t> shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

const StrideFeatureMaps::Level* StrideFeatureMaps::find(std::uint32_t stride_index) const {
  for (const auto& level : per_stride) {
    if (level.stride_index == stride_index) return &level;
  }
  return nullptr;
}

const StrideFeatureMaps::Level& StrideFeatureMaps::highest_resolution() const {
  if (per_stride.empty()) raise(ErrorKind::Data, "image '" + image_id + "' has no strides");
  const Level* best = &per_stride.front();
  for (const auto& level : per_stride) {
    if (std::size_t(level.tensor.height()) * level.tensor.width() >
        std::size_t(best->tensor.height()) * best->tensor.width()) {
      best = &level;
    }
  }
  return *best;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.shape.empty() || t.shape.size() > 255) {
    raise(ErrorKind::Data, "tensor ndim must be in 1..255");
  }
  if (element_count(t.shape) != t.data.size()) {
    raise(ErrorKind::Data, "tensor data length does not match shape");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderFixed + 4 * t.shape.size() + 4 * t.data.size());
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  out.push_back(kTensorVersion);
  out.push_back(static_cast<std::uint8_t>(t.shape.size()));
  auto put_u32 = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  for (auto d : t.shape) put_u32(d);
  const auto* raw = reinterpret_cast<const std::uint8_t*>(t.data.data());
  out.insert(out.end(), raw, raw + 4 * t.data.size());
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < kHeaderFixed) raise(ErrorKind::Format, origin + ": truncated header");
  if (std::memcmp(bytes.data(), kTensorMagic, 4) != 0) {
    raise(ErrorKind::Format, origin + ": bad magic");
  }
  if (bytes[4] != kTensorVersion) {
    raise(ErrorKind::Format, origin + ": unsupported version " + std::to_string(bytes[4]));
  }
  const std::size_t ndim = bytes[5];
  if (ndim == 0) raise(ErrorKind::Format, origin + ": ndim must be >= 1");
  const std::size_t header = kHeaderFixed + 4 * ndim;
  if (bytes.size() < header) raise(ErrorKind::Format, origin + ": truncated shape");
  std::vector<std::uint32_t> shape(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
      v |= std::uint32_t(bytes[kHeaderFixed + 4 * i + b]) << (8 * b);
    }
    if (v == 0) raise(ErrorKind::Format, origin + ": zero-sized dimension");
    shape[i] = v;
  }
  const std::size_t count = element_count(shape);
  if (bytes.size() - header != 4 * count) {
    raise(ErrorKind::Format, origin + ": payload length " +
                                 std::to_string(bytes.size() - header) +
                                 " does not match shape (expected " +
                                 std::to_string(4 * count) + ")");
  }
  std::vector<float> data(count);
  std::memcpy(data.data(), bytes.data() + header, 4 * count);
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  write_file(path, encode_tensor(tensor));
}

Tensor read_tensor(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return decode_tensor(bytes, path.string());
}

void validate_manifest(const DatasetManifest& m) {
  if (m.num_classes == 0) field_error("manifest.num_classes", "must be >= 1");
  if (m.stride_count == 0) field_error("manifest.stride_count", "must be >= 1");
  std::set<std::string> ids;
  for (const auto& rec : m.images) {
    const std::string where = "image '" + rec.image_id + "'";
    if (!ids.insert(rec.image_id).second) field_error(where, "duplicate image_id");
    if (rec.width == 0 || rec.height == 0) field_error(where, "width/height must be >= 1");
    if (rec.strides.size() != m.stride_count) {
      field_error(where + ".strides", "expected " + std::to_string(m.stride_count) +
                                          " entries, found " +
                                          std::to_string(rec.strides.size()));
    }
    for (std::size_t s = 0; s < rec.strides.size(); ++s) {
      if (rec.strides[s].stride_index != s + 1) {
        field_error(where + ".strides", "stride_index values must be 1..stride_count in order");
      }
      if (rec.strides[s].downsample_factor == 0) {
        field_error(where + ".strides.downsample_factor", "must be >= 1");
      }
      if (s > 0 && rec.strides[s].downsample_factor <= rec.strides[s - 1].downsample_factor) {
        field_error(where + ".strides.downsample_factor", "must strictly increase with stride_index");
      }
    }
    for (std::size_t k = 0; k < rec.detections.size(); ++k) {
      const auto& d = rec.detections[k];
      const std::string dw = where + ".detections[" + std::to_string(k) + "]";
      check_box(d.box, dw + ".box");
      if (d.class_id >= m.num_classes) {
        field_error(dw + ".class_id", "must be < num_classes (" +
                                          std::to_string(m.num_classes) + ")");
      }
      if (!(d.confidence >= 0.0F && d.confidence <= 1.0F)) {
        field_error(dw + ".confidence", "must lie in [0,1]");
      }
      if (d.stride_index < 1 || d.stride_index > m.stride_count) {
        field_error(dw + ".stride_index", "must lie in 1..stride_count");
      }
      if (d.logits.size() != m.num_classes) {
        field_error(dw + ".logits", "length must equal num_classes");
      }
      for (float z : d.logits) {
        if (!std::isfinite(z)) field_error(dw + ".logits", "values must be finite");
      }
    }
    for (std::size_t k = 0; k < rec.ground_truth.size(); ++k) {
      const auto& g = rec.ground_truth[k];
      const std::string gw = where + ".ground_truth[" + std::to_string(k) + "]";
      check_box(g.box, gw + ".box");
      if (g.class_id < -1 || g.class_id >= static_cast<std::int64_t>(m.num_classes)) {
        field_error(gw + ".class_id", "must be -1 (unknown) or in 0..num_classes-1");
      }
    }
  }
}

void validate_maps(const DatasetManifest& m, std::span<const StrideFeatureMaps> maps) {
  for (const auto& fm : maps) {
    const std::string where = "image '" + fm.image_id + "'";
    if (fm.per_stride.size() != m.stride_count) {
      field_error(where, "feature map count differs from stride_count");
    }
    std::size_t prev_area = 0;
    for (std::size_t s = 0; s < fm.per_stride.size(); ++s) {
      const auto& level = fm.per_stride[s];
      if (level.tensor.ndim() != 3) {
        field_error(where + " stride " + std::to_string(level.stride_index),
                    "feature map must be C x H x W");
      }
      std::size_t area = std::size_t(level.tensor.height()) * level.tensor.width();
      if (s > 0 && area > prev_area) {
        field_error(where, "stride 1 must have the largest H x W and extents must not grow");
      }
      prev_area = area;
    }
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return load_impl(path, false).manifest;
}

Dataset load_dataset(const std::filesystem::path& path) { return load_impl(path, true); }

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  const std::string text = manifest_json(manifest).dump(1);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::filesystem::path save_dataset(const std::filesystem::path& directory,
                                   const Dataset& dataset,
                                   const std::string& manifest_name) {
  if (dataset.maps.size() != dataset.manifest.images.size()) {
    raise(ErrorKind::Data, "dataset maps do not match manifest images");
  }
  std::error_code ec;
  std::filesystem::create_directories(directory / "tensors", ec);
  if (ec) raise(ErrorKind::Io, "cannot create " + (directory / "tensors").string());
  DatasetManifest out = dataset.manifest;
  for (std::size_t i = 0; i < out.images.size(); ++i) {
    auto& rec = out.images[i];
    const auto& fm = dataset.maps[i];
    for (std::size_t s = 0; s < rec.strides.size(); ++s) {
      const auto* level = fm.find(rec.strides[s].stride_index);
      if (level == nullptr) raise(ErrorKind::Data, "image '" + rec.image_id + "' lacks a stride map");
      std::string rel = "tensors/" + rec.image_id + "_s" +
                        std::to_string(rec.strides[s].stride_index) + ".fmap";
      write_tensor(directory / rel, level->tensor);
      rec.strides[s].tensor_path = rel;
    }
  }
  auto manifest_path = directory / manifest_name;
  save_manifest(manifest_path, out);
  return manifest_path;
}

}  // namespace fmapood
