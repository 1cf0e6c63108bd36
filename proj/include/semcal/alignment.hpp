#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "semcal/geometry.hpp"
#include "semcal/semantic_io.hpp"

namespace semcal {

// Precomputed exact nearest-feature transform: cell (u, v) stores the
// integer coordinates of the nearest mask pixel of class_id. Ties break to
// the smaller v, then the smaller u, so lookups are fully deterministic.
class NearestPixelIndex {
 public:
  // Throws ClassAbsent when no pixel of class_id exists in the mask.
  static NearestPixelIndex build(const SemanticMask& mask, std::uint16_t class_id);

  std::array<int, 2> nearest(int u, int v) const {
    return nearest_[static_cast<std::size_t>(v) * width_ + u];
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint16_t class_id() const { return class_id_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::uint16_t class_id_ = 0;
  std::vector<std::array<int, 2>> nearest_;
};

// Projected cloud points surviving the field-of-view cull,
// in input order, with source indices into the originating cloud.
struct ProjectedSet {
  std::vector<PixelPoint> pixels;
  std::size_t size() const { return pixels.size(); }
};

// Deterministic down-sample of the mask pixels of one class.
struct SampledPixels {
  std::vector<std::array<int, 2>> pixels;  // (u, v), all of the target class
  std::uint64_t seed = 0;
  std::size_t size() const { return pixels.size(); }
};

// Projects every cloud point through the delay-compensated pinhole model and
// keeps those landing inside [0, width) x [0, height).
ProjectedSet project_cloud(const SemanticPointCloud& cloud,
                           const CalibrationParams& params,
                           const Eigen::Vector3d& velocity,
                           const CameraIntrinsics& intrinsics);

// Sum over projected points of the squared distance to the nearest mask
// pixel of the index's class. The index is queried at the rounded projected
// coordinate; the distance uses the continuous coordinate.
// Throws EmptyProjection on an empty set.
double loss_point_to_pixel(const ProjectedSet& projected,
                           const NearestPixelIndex& index);

// Uniform without-replacement sample of max(1, round(rate * count)) class
// pixels; identical (mask, class, rate, seed) give identical output.
SampledPixels downsample_pixels(const SemanticMask& mask, std::uint16_t class_id,
                                double rate, std::uint64_t seed);

// Sum over sampled pixels of the squared distance to the nearest projected
// point (exact 2D KD-tree query, ties to the smaller source index).
double loss_pixel_to_point(const SampledPixels& sampled,
                           const ProjectedSet& projected);

// L_p2i + w * (n_p / n_i) * L_i2p. With w = 0 the pixel-to-point direction
// is skipped entirely and the result equals loss_point_to_pixel exactly.
double bidirectional_loss(const ProjectedSet& projected,
                          const NearestPixelIndex& index,
                          const SampledPixels& sampled, double w);

// Exact 2D nearest-neighbor tree over a projected set. Rebuilt per loss
// evaluation since the projection moves with the calibration parameters.
class PlanarKdTree {
 public:
  explicit PlanarKdTree(const std::vector<PixelPoint>& points);

  // Index (into the constructing vector) of the nearest point; ties break
  // to the smaller source_index.
  std::size_t nearest(double u, double v) const;

 private:
  struct Node {
    double split = 0.0;
    int axis = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t point = -1;  // leaf payload
  };

  std::int32_t build(std::size_t begin, std::size_t end, int depth);
  void query(std::int32_t node, double u, double v, double& best_d2,
             std::size_t& best_order) const;

  const std::vector<PixelPoint>* points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace semcal
