#pragma once

// Adaptive average pooling and box-level feature construction for detection
// datasets.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "disco/error.hpp"
#include "disco/feature_matrix.hpp"

namespace disco {

/// C x H x W activation map, row-major per channel.
struct SpatialMap {
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  std::vector<double> data;

  SpatialMap() = default;
  SpatialMap(Index c, Index h, Index w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c * h * w), fill) {}

  double& at(Index c, Index y, Index x) {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  double at(Index c, Index y, Index x) const {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }
};

/// Average of `map` over rows [y0, y1) and columns [x0, x1), per channel,
/// pooled to out_h x out_w with the standard adaptive partition
/// [floor(i*H/out), ceil((i+1)*H/out)).
inline SpatialMap adaptive_avg_pool(const SpatialMap& map, Index y0, Index y1, Index x0, Index x1,
                                    Index out_h, Index out_w) {
  const Index h = y1 - y0;
  const Index w = x1 - x0;
  detail::require(map.channels >= 1 && h >= 1 && w >= 1, ErrorCode::InvalidInput,
                  "pooling region is empty");
  detail::require(out_h >= 1 && out_w >= 1, ErrorCode::InvalidInput,
                  "pooled output size must be positive");
  detail::require(y0 >= 0 && x0 >= 0 && y1 <= map.height && x1 <= map.width,
                  ErrorCode::InvalidInput, "pooling region exceeds the map");
  SpatialMap out(map.channels, out_h, out_w);
  for (Index i = 0; i < out_h; ++i) {
    const Index r0 = (i * h) / out_h;
    const Index r1 = ((i + 1) * h + out_h - 1) / out_h;
    for (Index j = 0; j < out_w; ++j) {
      const Index c0 = (j * w) / out_w;
      const Index c1 = ((j + 1) * w + out_w - 1) / out_w;
      const double cells = static_cast<double>((r1 - r0) * (c1 - c0));
      for (Index c = 0; c < map.channels; ++c) {
        double sum = 0.0;
        for (Index y = r0; y < r1; ++y) {
          for (Index x = c0; x < c1; ++x) sum += map.at(c, y0 + y, x0 + x);
        }
        out.at(c, i, j) = sum / cells;
      }
    }
  }
  return out;
}

inline SpatialMap adaptive_avg_pool(const SpatialMap& map, Index out_h, Index out_w) {
  return adaptive_avg_pool(map, 0, map.height, 0, map.width, out_h, out_w);
}

/// Box corners in pixels, (x_min, y_min, x_max, y_max).
struct PixelBox {
  int label = 0;
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
};

/// (cx, cy, w, h) to (x_min, y_min, x_max, y_max).
inline PixelBox from_center_size(int label, double cx, double cy, double w, double h) {
  return {label, cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

struct DetectionImage {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<PixelBox> boxes;
};

struct DetectionTargets {
  Eigen::MatrixXd boxes;  // K x 4, normalized to [0, 1]
  std::vector<int> box_classes;
  std::vector<Index> box_to_image;
};

struct BoxFeatures {
  FeatureMatrix features;  // K x (C * pooled_side^2)
  DetectionTargets targets;
  std::vector<std::string> warnings;
};

namespace detail {

/// Grid cells [first, last) covered by the pixel interval [lo, hi] on an
/// axis of `pixels` pixels mapped onto `cells` cells; rounds outward. An
/// empty result is widened to the single nearest cell.
inline std::pair<Index, Index> cover_cells(double lo, double hi, double pixels, Index cells,
                                           bool& widened) {
  const double scale = static_cast<double>(cells) / pixels;
  const double a = lo * scale;
  const double b = hi * scale;
  auto first = static_cast<Index>(std::floor(a + 1e-9));
  auto last = static_cast<Index>(std::ceil(b - 1e-9));
  first = std::clamp<Index>(first, 0, cells);
  last = std::clamp<Index>(last, 0, cells);
  widened = false;
  if (last <= first) {
    const Index cell = std::clamp<Index>(static_cast<Index>(std::floor(0.5 * (a + b))), 0, cells - 1);
    first = cell;
    last = cell + 1;
    widened = true;
  }
  return {first, last};
}

}  // namespace detail

/// One row per box, in (image, box) order: the box is mapped onto its
/// image's feature grid, cropped, pooled to pooled_side x pooled_side, and
/// flattened channel-major.
inline BoxFeatures build_box_features(const std::vector<SpatialMap>& maps,
                                      const std::vector<DetectionImage>& images,
                                      Index pooled_side = 2) {
  detail::require(maps.size() == images.size(), ErrorCode::InvalidInput,
                  "got " + std::to_string(maps.size()) + " feature maps for " +
                      std::to_string(images.size()) + " images");
  detail::require(pooled_side >= 1, ErrorCode::InvalidInput, "pooled side must be >= 1");
  detail::require(!maps.empty(), ErrorCode::InvalidInput, "no images");
  const Index channels = maps.front().channels;
  Index total = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    detail::require(maps[i].channels == channels && maps[i].height >= 1 && maps[i].width >= 1,
                    ErrorCode::InvalidInput,
                    "feature map " + std::to_string(i) + " has inconsistent channels or empty grid");
    detail::require(images[i].width > 0.0 && images[i].height > 0.0, ErrorCode::InvalidInput,
                    "image " + images[i].image_id + " has non-positive size");
    total += static_cast<Index>(images[i].boxes.size());
  }
  detail::require(total >= 1, ErrorCode::InvalidInput, "detection labels contain no boxes");

  const Index cell_count = pooled_side * pooled_side;
  Eigen::MatrixXd rows(total, channels * cell_count);
  DetectionTargets targets;
  targets.boxes.resize(total, 4);
  std::vector<std::string> warnings;

  Index k = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const DetectionImage& img = images[i];
    const SpatialMap& map = maps[i];
    for (std::size_t b = 0; b < img.boxes.size(); ++b, ++k) {
      const PixelBox& box = img.boxes[b];
      detail::require(box.x_min <= box.x_max && box.y_min <= box.y_max && box.x_min >= 0.0 &&
                          box.y_min >= 0.0 && box.x_max <= img.width && box.y_max <= img.height,
                      ErrorCode::InvalidInput,
                      "box " + std::to_string(b) + " of image " + img.image_id +
                          " lies outside the image or is inverted");
      bool wide_x = false;
      bool wide_y = false;
      const auto [x0, x1] = detail::cover_cells(box.x_min, box.x_max, img.width, map.width, wide_x);
      const auto [y0, y1] = detail::cover_cells(box.y_min, box.y_max, img.height, map.height, wide_y);
      if (wide_x || wide_y) {
        warnings.push_back("box " + std::to_string(b) + " of image " + img.image_id +
                           " covers no grid cell; widened to the nearest cell");
      }
      const SpatialMap pooled = adaptive_avg_pool(map, y0, y1, x0, x1, pooled_side, pooled_side);
      for (Index t = 0; t < static_cast<Index>(pooled.data.size()); ++t) {
        rows(k, t) = pooled.data[static_cast<std::size_t>(t)];
      }
      targets.boxes.row(k) << box.x_min / img.width, box.y_min / img.height,
          box.x_max / img.width, box.y_max / img.height;
      targets.box_classes.push_back(box.label);
      targets.box_to_image.push_back(static_cast<Index>(i));
    }
  }
  return {FeatureMatrix(std::move(rows)), std::move(targets), std::move(warnings)};
}

}  // namespace disco
