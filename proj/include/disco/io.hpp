#pragma once

// On-disk interchange: FMX1 binary feature files, label JSON, benchmark JSON
// and hub manifests.
//
// FMX1 record layout, all integers unsigned 32-bit little-endian:
//   bytes 0-3   magic "FMX1"
//   u32         dtype (1 = IEEE-754 binary32, little-endian)
//   u32         rank (2 or 3)
//   rank * u32  dims (N, d) or (C, H, W)
//   payload     prod(dims) values, row-major
// A classification file holds exactly one rank-2 record. A detection file is
// a back-to-back sequence of rank-3 records, one per image in label order.

#include <Eigen/Dense>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <random>
#include <string>
#include <system_error>
#include <utility>
#include <variant>
#include <vector>

#include "disco/box_features.hpp"
#include "disco/error.hpp"
#include "disco/feature_matrix.hpp"
#include "disco/rank_eval.hpp"

namespace disco::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::array<char, 4> kMagic{'F', 'M', 'X', '1'};
inline constexpr std::uint32_t kDtypeFloat32 = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline std::uint32_t dims_u32(Index v, const char* what) {
  disco::detail::require(v >= 0 && v <= static_cast<Index>(UINT32_MAX), ErrorCode::InvalidInput,
                         std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  std::size_t offset() const noexcept { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::FormatError, "truncated " + std::string(what) + " at byte offset " +
                                              std::to_string(pos_) + " (need " +
                                              std::to_string(n) + " bytes, have " +
                                              std::to_string(bytes_.size() - pos_) + ")");
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::array<char, 4> magic() {
    need(4, "magic");
    std::array<char, 4> m{};
    std::memcpy(m.data(), bytes_.data() + pos_, 4);
    pos_ += 4;
    return m;
  }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

struct Record {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

inline Record read_record(Reader& in) {
  const std::size_t start = in.offset();
  if (in.magic() != kMagic) {
    throw Error(ErrorCode::FormatError, "bad magic at byte offset " + std::to_string(start));
  }
  const std::size_t dtype_at = in.offset();
  const std::uint32_t dtype = in.u32("dtype");
  if (dtype != kDtypeFloat32) {
    throw Error(ErrorCode::FormatError, "unsupported dtype code " + std::to_string(dtype) +
                                            " at byte offset " + std::to_string(dtype_at));
  }
  const std::size_t rank_at = in.offset();
  const std::uint32_t rank = in.u32("rank");
  if (rank != 2 && rank != 3) {
    throw Error(ErrorCode::FormatError, "unsupported rank " + std::to_string(rank) +
                                            " at byte offset " + std::to_string(rank_at));
  }
  Record rec;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::size_t at = in.offset();
    const std::uint32_t dim = in.u32("dims");
    if (dim == 0) {
      throw Error(ErrorCode::FormatError, "zero dimension at byte offset " + std::to_string(at));
    }
    rec.dims.push_back(dim);
    count *= dim;
  }
  const std::size_t payload_at = in.offset();
  if (count > (std::uint64_t{1} << 34)) {
    throw Error(ErrorCode::FormatError, "payload too large at byte offset " + std::to_string(payload_at));
  }
  in.need(static_cast<std::size_t>(count) * 4, "payload");
  rec.values.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < rec.values.size(); ++i) {
    const std::size_t at = in.offset();
    const float f = std::bit_cast<float>(in.u32("payload"));
    if (!std::isfinite(f)) {
      throw Error(ErrorCode::FormatError, "non-finite value at byte offset " + std::to_string(at));
    }
    rec.values[i] = static_cast<double>(f);
  }
  return rec;
}

inline std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void encode_matrix(std::string& out, const Eigen::MatrixXd& m) {
  out.append(kMagic.data(), kMagic.size());
  put_u32(out, kDtypeFloat32);
  put_u32(out, 2);
  put_u32(out, dims_u32(m.rows(), "row count"));
  put_u32(out, dims_u32(m.cols(), "column count"));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) put_f32(out, static_cast<float>(m(i, j)));
  }
}

inline json parse_json_file(const fs::path& path) {
  const std::string text = read_bytes(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::FormatError, where + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, where + ": field '" + key + "' has wrong type (" + e.what() + ")");
  }
}

}  // namespace detail

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written file.
inline void write_atomically(const fs::path& path, const std::string& contents) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::random_device rd;
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::InvalidInput, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::InvalidInput, "cannot rename into " + path.string());
  }
}

inline std::string encode_features(const FeatureMatrix& features) {
  std::string out;
  out.reserve(20 + static_cast<std::size_t>(features.values().size()) * 4);
  detail::encode_matrix(out, features.values());
  return out;
}

inline std::string encode_spatial_maps(const std::vector<SpatialMap>& maps) {
  std::string out;
  for (const SpatialMap& map : maps) {
    out.append(kMagic.data(), kMagic.size());
    detail::put_u32(out, kDtypeFloat32);
    detail::put_u32(out, 3);
    detail::put_u32(out, detail::dims_u32(map.channels, "channels"));
    detail::put_u32(out, detail::dims_u32(map.height, "height"));
    detail::put_u32(out, detail::dims_u32(map.width, "width"));
    for (double v : map.data) detail::put_f32(out, static_cast<float>(v));
  }
  return out;
}

inline FeatureMatrix decode_features(std::string bytes) {
  detail::Reader in(std::move(bytes));
  detail::Record rec = detail::read_record(in);
  if (rec.dims.size() != 2) {
    throw Error(ErrorCode::FormatError, "expected a rank-2 feature matrix, got rank " +
                                            std::to_string(rec.dims.size()));
  }
  if (!in.at_end()) {
    throw Error(ErrorCode::FormatError,
                "trailing bytes after feature matrix at byte offset " + std::to_string(in.offset()));
  }
  Eigen::MatrixXd m(rec.dims[0], rec.dims[1]);
  std::size_t t = 0;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rec.values[t++];
  }
  return FeatureMatrix(std::move(m));
}

inline std::vector<SpatialMap> decode_spatial_maps(std::string bytes) {
  detail::Reader in(std::move(bytes));
  std::vector<SpatialMap> maps;
  while (!in.at_end()) {
    const std::size_t at = in.offset();
    detail::Record rec = detail::read_record(in);
    if (rec.dims.size() != 3) {
      throw Error(ErrorCode::FormatError,
                  "expected rank-3 spatial map at byte offset " + std::to_string(at));
    }
    SpatialMap map(rec.dims[0], rec.dims[1], rec.dims[2]);
    map.data = std::move(rec.values);
    maps.push_back(std::move(map));
  }
  if (maps.empty()) throw Error(ErrorCode::FormatError, "empty spatial map file");
  return maps;
}

inline FeatureMatrix load_features(const fs::path& path) {
  try {
    return decode_features(detail::read_bytes(path));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::FormatError) throw;
    throw Error(ErrorCode::FormatError, path.string() + ": " + e.message());
  }
}

inline void save_features(const FeatureMatrix& features, const fs::path& path) {
  write_atomically(path, encode_features(features));
}

inline std::vector<SpatialMap> load_spatial_maps(const fs::path& path) {
  try {
    return decode_spatial_maps(detail::read_bytes(path));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::FormatError) throw;
    throw Error(ErrorCode::FormatError, path.string() + ": " + e.message());
  }
}

inline void save_spatial_maps(const std::vector<SpatialMap>& maps, const fs::path& path) {
  write_atomically(path, encode_spatial_maps(maps));
}

// ---- label files ---------------------------------------------------------

struct ClassificationLabels {
  std::vector<int> labels;
};

struct DetectionLabels {
  std::vector<DetectionImage> images;
};

using LabelFile = std::variant<ClassificationLabels, DetectionLabels>;

namespace detail {

inline void check_dense_classes(const std::vector<int>& classes, const std::string& where) {
  if (classes.empty()) throw Error(ErrorCode::InvalidLabels, where + ": no labels");
  int hi = 0;
  for (int c : classes) {
    if (c < 0) throw Error(ErrorCode::InvalidLabels, where + ": negative class index");
    hi = std::max(hi, c);
  }
  std::vector<bool> seen(static_cast<std::size_t>(hi) + 1, false);
  for (int c : classes) seen[static_cast<std::size_t>(c)] = true;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) {
      throw Error(ErrorCode::InvalidLabels,
                  where + ": class indices are not dense, class " + std::to_string(c) + " unused");
    }
  }
}

inline std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return v.dump();
}

}  // namespace detail

inline LabelFile parse_labels(const json& doc, const std::string& where = "labels") {
  const auto task = detail::field<std::string>(doc, "task", where);
  if (task == "classification") {
    ClassificationLabels out{detail::field<std::vector<int>>(doc, "labels", where)};
    detail::check_dense_classes(out.labels, where);
    return out;
  }
  if (task != "detection") {
    throw Error(ErrorCode::FormatError, where + ": unknown task '" + task + "'");
  }
  if (!doc.contains("images") || !doc["images"].is_array()) {
    throw Error(ErrorCode::FormatError, where + ": detection labels need an 'images' array");
  }
  DetectionLabels out;
  std::vector<int> classes;
  for (const json& img : doc["images"]) {
    DetectionImage image;
    image.image_id = img.contains("image_id") ? detail::id_string(img["image_id"])
                                             : std::to_string(out.images.size());
    const std::string here = where + ": image " + image.image_id;
    image.width = detail::field<double>(img, "width", here);
    image.height = detail::field<double>(img, "height", here);
    if (!(image.width > 0.0 && image.height > 0.0)) {
      throw Error(ErrorCode::FormatError, here + ": non-positive image size");
    }
    if (!img.contains("boxes") || !img["boxes"].is_array()) {
      throw Error(ErrorCode::FormatError, here + ": missing 'boxes' array");
    }
    for (const json& b : img["boxes"]) {
      PixelBox box{detail::field<int>(b, "class", here), detail::field<double>(b, "x_min", here),
                   detail::field<double>(b, "y_min", here), detail::field<double>(b, "x_max", here),
                   detail::field<double>(b, "y_max", here)};
      if (!(box.x_min >= 0.0 && box.y_min >= 0.0 && box.x_min <= box.x_max &&
            box.y_min <= box.y_max && box.x_max <= image.width && box.y_max <= image.height)) {
        throw Error(ErrorCode::FormatError, here + ": box outside image bounds or inverted");
      }
      classes.push_back(box.label);
      image.boxes.push_back(box);
    }
    out.images.push_back(std::move(image));
  }
  detail::check_dense_classes(classes, where);
  return out;
}

inline LabelFile load_labels(const fs::path& path) {
  return parse_labels(detail::parse_json_file(path), path.string());
}

inline json labels_to_json(const LabelFile& labels) {
  if (const auto* cls = std::get_if<ClassificationLabels>(&labels)) {
    return {{"task", "classification"}, {"labels", cls->labels}};
  }
  const auto& det = std::get<DetectionLabels>(labels);
  json images = json::array();
  for (const DetectionImage& img : det.images) {
    json boxes = json::array();
    for (const PixelBox& b : img.boxes) {
      boxes.push_back({{"class", b.label}, {"x_min", b.x_min}, {"y_min", b.y_min},
                       {"x_max", b.x_max}, {"y_max", b.y_max}});
    }
    images.push_back({{"image_id", img.image_id}, {"width", img.width}, {"height", img.height},
                      {"boxes", boxes}});
  }
  return {{"task", "detection"}, {"images", images}};
}

// ---- benchmark and manifest --------------------------------------------

inline BenchmarkRecord parse_benchmark(const json& doc, const std::string& where = "benchmark") {
  if (!doc.is_array()) throw Error(ErrorCode::FormatError, where + ": expected a JSON array");
  BenchmarkRecord rec;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string here = where + "[" + std::to_string(i) + "]";
    rec.model_ids.push_back(detail::field<std::string>(doc[i], "model_id", here));
    rec.scores.push_back(detail::field<double>(doc[i], "score", here));
    rec.performances.push_back(detail::field<double>(doc[i], "performance", here));
  }
  return rec;
}

inline BenchmarkRecord load_benchmark(const fs::path& path) {
  return parse_benchmark(detail::parse_json_file(path), path.string());
}

struct ManifestEntry {
  std::string model_id;
  fs::path features;
  fs::path labels;
};

/// Hub manifest entries; relative paths are resolved against the manifest's
/// directory.
inline std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  const json doc = detail::parse_json_file(path);
  if (!doc.is_array()) throw Error(ErrorCode::FormatError, path.string() + ": expected a JSON array");
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string here = path.string() + "[" + std::to_string(i) + "]";
    ManifestEntry e;
    e.model_id = detail::field<std::string>(doc[i], "model_id", here);
    fs::path f = detail::field<std::string>(doc[i], "features", here);
    fs::path l = detail::field<std::string>(doc[i], "labels", here);
    e.features = f.is_absolute() ? f : base / f;
    e.labels = l.is_absolute() ? l : base / l;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace disco::io
