#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace semcal {

// Segmented LIDAR scan, points in the LIDAR frame.
struct SemanticPointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::uint32_t> labels;  // same length as points
  int frame_id = 0;

  std::size_t size() const { return points.size(); }
};

// Per-pixel class ids in row-major scanline order.
struct SemanticMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> classes;  // width * height entries
  int frame_id = 0;

  std::uint16_t at(int u, int v) const {
    return classes[static_cast<std::size_t>(v) * width + u];
  }
  std::uint16_t& at(int u, int v) {
    return classes[static_cast<std::size_t>(v) * width + u];
  }
};

// Tracked pixel pairs between two consecutive camera frames.
struct PixelPair {
  Eigen::Vector2d first;   // frame k+delta-1
  Eigen::Vector2d second;  // frame k+delta
};

struct FeatureCorrespondences {
  std::vector<PixelPair> pairs;
  std::size_t size() const { return pairs.size(); }
};

// CSV "x,y,z,label" per line; '#' comments and blank lines skipped.
// Throws ParseError with the offending line, EmptyCloud on zero valid rows.
SemanticPointCloud load_point_cloud_csv(const std::string& path);
void save_point_cloud_csv(const SemanticPointCloud& cloud, const std::string& path);

// KITTI velodyne .bin (little-endian f32 x,y,z,intensity records) plus a
// label file (little-endian u32 per point, semantic class in the lower
// 16 bits). Intensity is discarded.
SemanticPointCloud load_kitti_bin_with_labels(const std::string& bin_path,
                                              const std::string& label_path);

// Binary PGM (P5, maxval <= 255); pixel value is the class id.
SemanticMask load_mask_pgm(const std::string& path);
void save_mask_pgm(const SemanticMask& mask, const std::string& path);

// Keeps only points whose label matches class_id, preserving order.
SemanticPointCloud filter_by_class(const SemanticPointCloud& cloud,
                                   std::uint32_t class_id);

// CSV "u1,v1,u2,v2" per line. An empty file yields zero pairs; the
// eight-pair minimum is enforced by the essential-matrix estimator.
FeatureCorrespondences load_correspondences_csv(const std::string& path);
void save_correspondences_csv(const FeatureCorrespondences& c, const std::string& path);

}  // namespace semcal
