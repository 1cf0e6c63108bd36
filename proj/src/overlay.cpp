#include "semcal/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "semcal/error.hpp"

namespace semcal {

RgbImage render_overlay(const SemanticMask& mask, std::uint16_t class_id,
                        const ProjectedSet& projected) {
  RgbImage image;
  image.width = mask.width;
  image.height = mask.height;
  image.data.resize(3 * static_cast<std::size_t>(mask.width) * mask.height);
  const auto put = [&](int u, int v, const std::array<std::uint8_t, 3>& color) {
    const std::size_t o = 3 * (static_cast<std::size_t>(v) * image.width + u);
    image.data[o] = color[0];
    image.data[o + 1] = color[1];
    image.data[o + 2] = color[2];
  };
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      put(u, v, mask.at(u, v) == class_id ? kOverlayClassColor
                                          : kOverlayBackgroundColor);
  for (const auto& p : projected.pixels) {
    const int cu = std::clamp(static_cast<int>(std::lround(p.u)), 0,
                              mask.width - 1);
    const int cv = std::clamp(static_cast<int>(std::lround(p.v)), 0,
                              mask.height - 1);
    for (int dv = -1; dv <= 1; ++dv) {
      for (int du = -1; du <= 1; ++du) {
        const int u = cu + du;
        const int v = cv + dv;
        if (u >= 0 && u < mask.width && v >= 0 && v < mask.height)
          put(u, v, kOverlayPointColor);
      }
    }
  }
  return image;
}

void save_ppm(const RgbImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
}

}  // namespace semcal
