#include "semcal/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "semcal/error.hpp"
#include "semcal/rng.hpp"

namespace semcal {

NearestPixelIndex NearestPixelIndex::build(const SemanticMask& mask,
                                           std::uint16_t class_id) {
  const int w = mask.width;
  const int h = mask.height;
  NearestPixelIndex index;
  index.width_ = w;
  index.height_ = h;
  index.class_id_ = class_id;

  // Column pass: nearest feature row within each column, ties to the
  // smaller row.
  std::vector<std::int32_t> col_row(static_cast<std::size_t>(w) * h, -1);
  bool any = false;
  for (int u = 0; u < w; ++u) {
    std::int32_t last = -1;
    for (int v = 0; v < h; ++v) {
      if (mask.at(u, v) == class_id) {
        last = v;
        any = true;
      }
      col_row[static_cast<std::size_t>(v) * w + u] = last;
    }
    std::int32_t next = -1;
    for (int v = h - 1; v >= 0; --v) {
      if (mask.at(u, v) == class_id) next = v;
      std::int32_t& cur = col_row[static_cast<std::size_t>(v) * w + u];
      if (next != -1 && (cur == -1 || (next - v) < (v - cur))) cur = next;
    }
  }
  if (!any) throw ClassAbsent("mask has no pixel of class " + std::to_string(class_id));

  // Row pass: expand outwards per cell until no nearer column can exist.
  // Candidates are compared by (distance^2, feature row, feature column)
  // which realizes the smaller-v-then-smaller-u tie break exactly.
  index.nearest_.resize(static_cast<std::size_t>(w) * h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      long best_cost = std::numeric_limits<long>::max();
      int best_row = -1;
      int best_col = -1;
      const auto consider = [&](int uc) {
        const std::int32_t row = col_row[static_cast<std::size_t>(v) * w + uc];
        if (row < 0) return;
        const long du = uc - u;
        const long dv = static_cast<long>(v) - row;
        const long cost = du * du + dv * dv;
        if (cost < best_cost ||
            (cost == best_cost &&
             (row < best_row || (row == best_row && uc < best_col)))) {
          best_cost = cost;
          best_row = row;
          best_col = uc;
        }
      };
      for (long r = 0;; ++r) {
        if (r * r > best_cost) break;
        const int left = u - static_cast<int>(r);
        const int right = u + static_cast<int>(r);
        if (left < 0 && right >= w) break;
        if (left >= 0) consider(left);
        if (r > 0 && right < w) consider(right);
      }
      index.nearest_[static_cast<std::size_t>(v) * w + u] = {best_col, best_row};
    }
  }
  return index;
}

ProjectedSet project_cloud(const SemanticPointCloud& cloud,
                           const CalibrationParams& params,
                           const Eigen::Vector3d& velocity,
                           const CameraIntrinsics& intrinsics) {
  ProjectedSet result;
  result.pixels.reserve(cloud.points.size());
  const RigidTransform transform = params.transform();
  const double w = intrinsics.width;
  const double h = intrinsics.height;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    auto px = project_point_delayed(cloud.points[i], transform, velocity,
                                    params.delay, intrinsics);
    if (!px) continue;
    if (px->u < 0.0 || px->u >= w || px->v < 0.0 || px->v >= h) continue;
    px->source_index = i;
    result.pixels.push_back(*px);
  }
  return result;
}

double loss_point_to_pixel(const ProjectedSet& projected,
                           const NearestPixelIndex& index) {
  if (projected.pixels.empty())
    throw EmptyProjection("point-to-pixel loss over an empty projection");
  const int wmax = index.width() - 1;
  const int hmax = index.height() - 1;
  double total = 0.0;
  for (const auto& p : projected.pixels) {
    const int ru = std::clamp(static_cast<int>(std::lround(p.u)), 0, wmax);
    const int rv = std::clamp(static_cast<int>(std::lround(p.v)), 0, hmax);
    const auto q = index.nearest(ru, rv);
    const double du = p.u - q[0];
    const double dv = p.v - q[1];
    total += du * du + dv * dv;
  }
  return total;
}

SampledPixels downsample_pixels(const SemanticMask& mask, std::uint16_t class_id,
                                double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0))
    throw Error("downsample rate must be in (0, 1]");
  std::vector<std::array<int, 2>> all;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      if (mask.at(u, v) == class_id) all.push_back({u, v});
  if (all.empty())
    throw ClassAbsent("mask has no pixel of class " + std::to_string(class_id));

  std::size_t count = static_cast<std::size_t>(
      std::llround(rate * static_cast<double>(all.size())));
  count = std::clamp<std::size_t>(count, 1, all.size());

  // Partial Fisher-Yates over the row-major pixel list.
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(all.size() - i);
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  return SampledPixels{std::move(all), seed};
}

PlanarKdTree::PlanarKdTree(const std::vector<PixelPoint>& points)
    : points_(&points) {
  order_.resize(points.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points.empty()) {
    nodes_.reserve(2 * points.size());
    root_ = build(0, points.size(), 0);
  }
}

std::int32_t PlanarKdTree::build(std::size_t begin, std::size_t end, int depth) {
  if (end - begin == 1) {
    Node leaf;
    leaf.point = static_cast<std::int32_t>(order_[begin]);
    nodes_.push_back(leaf);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }
  const int axis = depth & 1;
  const std::size_t mid = (begin + end) / 2;
  const auto coord = [&](std::size_t idx) {
    return axis == 0 ? (*points_)[idx].u : (*points_)[idx].v;
  };
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](std::size_t a, std::size_t b) {
                     const double ca = coord(a), cb = coord(b);
                     return ca < cb || (ca == cb && a < b);
                   });
  Node node;
  node.axis = axis;
  node.split = coord(order_[mid]);
  node.left = build(begin, mid, depth + 1);
  node.right = build(mid, end, depth + 1);
  nodes_.push_back(node);
  return static_cast<std::int32_t>(nodes_.size() - 1);
}

std::size_t PlanarKdTree::nearest(double u, double v) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  std::size_t best_order = std::numeric_limits<std::size_t>::max();
  query(root_, u, v, best_d2, best_order);
  return best_order;
}

void PlanarKdTree::query(std::int32_t ni, double u, double v, double& best_d2,
                         std::size_t& best_pos) const {
  const Node& node = nodes_[ni];
  if (node.point >= 0) {
    const PixelPoint& p = (*points_)[node.point];
    const double du = p.u - u;
    const double dv = p.v - v;
    const double d2 = du * du + dv * dv;
    const bool better =
        d2 < best_d2 ||
        (d2 == best_d2 &&
         (best_pos == std::numeric_limits<std::size_t>::max() ||
          p.source_index < (*points_)[best_pos].source_index));
    if (better) {
      best_d2 = d2;
      best_pos = static_cast<std::size_t>(node.point);
    }
    return;
  }
  const double q = node.axis == 0 ? u : v;
  const std::int32_t near_side = q < node.split ? node.left : node.right;
  const std::int32_t far_side = q < node.split ? node.right : node.left;
  query(near_side, u, v, best_d2, best_pos);
  const double dd = q - node.split;
  // <= keeps equidistant far-side points reachable for the index tie break.
  if (dd * dd <= best_d2) query(far_side, u, v, best_d2, best_pos);
}

double loss_pixel_to_point(const SampledPixels& sampled,
                           const ProjectedSet& projected) {
  if (projected.pixels.empty())
    throw EmptyProjection("pixel-to-point loss over an empty projection");
  const PlanarKdTree tree(projected.pixels);
  double total = 0.0;
  for (const auto& q : sampled.pixels) {
    const std::size_t j = tree.nearest(q[0], q[1]);
    const PixelPoint& p = projected.pixels[j];
    const double du = q[0] - p.u;
    const double dv = q[1] - p.v;
    total += du * du + dv * dv;
  }
  return total;
}

double bidirectional_loss(const ProjectedSet& projected,
                          const NearestPixelIndex& index,
                          const SampledPixels& sampled, double w) {
  const double p2i = loss_point_to_pixel(projected, index);
  if (w == 0.0) return p2i;
  const double i2p = loss_pixel_to_point(sampled, projected);
  const double ratio = static_cast<double>(projected.size()) /
                       static_cast<double>(sampled.size());
  return p2i + w * ratio * i2p;
}

}  // namespace semcal
