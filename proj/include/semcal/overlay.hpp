#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "semcal/alignment.hpp"
#include "semcal/semantic_io.hpp"

namespace semcal {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major RGB triplets

  std::array<std::uint8_t, 3> at(int u, int v) const {
    const std::size_t o = 3 * (static_cast<std::size_t>(v) * width + u);
    return {data[o], data[o + 1], data[o + 2]};
  }
};

// Class pixels in yellow, the rest in purple, projected points splatted as
// red 3x3 squares.
inline constexpr std::array<std::uint8_t, 3> kOverlayClassColor = {235, 195, 50};
inline constexpr std::array<std::uint8_t, 3> kOverlayBackgroundColor = {90, 60, 130};
inline constexpr std::array<std::uint8_t, 3> kOverlayPointColor = {230, 40, 40};

RgbImage render_overlay(const SemanticMask& mask, std::uint16_t class_id,
                        const ProjectedSet& projected);

// Binary PPM (P6).
void save_ppm(const RgbImage& image, const std::string& path);

}  // namespace semcal
