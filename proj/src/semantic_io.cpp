#include "semcal/semantic_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semcal/error.hpp"

namespace semcal {

namespace {

// Splits a line into comma-separated fields and parses them as doubles.
// Returns false for blank/comment lines; throws on malformed content.
bool parse_csv_row(const std::string& path, std::size_t lineno,
                   const std::string& line, std::size_t expected,
                   std::vector<double>& out) {
  std::string body = line;
  const auto hash = body.find('#');
  if (hash != std::string::npos) body.erase(hash);
  if (body.find_first_not_of(" \t\r") == std::string::npos) return false;
  out.clear();
  std::stringstream ss(body);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      std::size_t used = 0;
      const double d = std::stod(field, &used);
      while (used < field.size() &&
             (field[used] == ' ' || field[used] == '\t' || field[used] == '\r'))
        ++used;
      if (used != field.size()) throw std::invalid_argument(field);
      out.push_back(d);
    } catch (const std::exception&) {
      throw ParseError(path, lineno, "bad numeric field '" + field + "'");
    }
  }
  if (out.size() != expected)
    throw ParseError(path, lineno,
                     "expected " + std::to_string(expected) + " fields, got " +
                         std::to_string(out.size()));
  for (const double d : out)
    if (!std::isfinite(d)) throw ParseError(path, lineno, "non-finite value");
  return true;
}

std::vector<char> read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open file");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return bytes;
}

float le_float(const char* p) {
  std::uint32_t u = 0;
  std::memcpy(&u, p, 4);
  if constexpr (std::endian::native == std::endian::big)
    u = __builtin_bswap32(u);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

std::uint32_t le_u32(const char* p) {
  std::uint32_t u = 0;
  std::memcpy(&u, p, 4);
  if constexpr (std::endian::native == std::endian::big)
    u = __builtin_bswap32(u);
  return u;
}

}  // namespace

SemanticPointCloud load_point_cloud_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open file");
  SemanticPointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++lineno;
    if (!parse_csv_row(path, lineno, line, 4, row)) continue;
    if (row[3] < 0.0 || row[3] != std::floor(row[3]))
      throw ParseError(path, lineno, "label must be a non-negative integer");
    cloud.points.emplace_back(row[0], row[1], row[2]);
    cloud.labels.push_back(static_cast<std::uint32_t>(row[3]));
  }
  if (cloud.points.empty()) throw EmptyCloud(path + ": no valid rows");
  return cloud;
}

void save_point_cloud_csv(const SemanticPointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  char buf[128];
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    // 9 significant digits round-trip 32-bit sensor data exactly.
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%u\n", p.x(), p.y(), p.z(),
                  cloud.labels[i]);
    out << buf;
  }
}

SemanticPointCloud load_kitti_bin_with_labels(const std::string& bin_path,
                                              const std::string& label_path) {
  const std::vector<char> bin = read_binary(bin_path);
  const std::vector<char> lab = read_binary(label_path);
  if (bin.size() % 16 != 0)
    throw TruncatedFile(bin_path + ": byte length not divisible by 16");
  if (lab.size() % 4 != 0)
    throw TruncatedFile(label_path + ": byte length not divisible by 4");
  const std::size_t n_points = bin.size() / 16;
  const std::size_t n_labels = lab.size() / 4;
  if (n_points != n_labels)
    throw LengthMismatch(bin_path + ": " + std::to_string(n_points) +
                         " points vs " + std::to_string(n_labels) + " labels");
  SemanticPointCloud cloud;
  cloud.points.reserve(n_points);
  cloud.labels.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const char* rec = bin.data() + i * 16;
    cloud.points.emplace_back(le_float(rec), le_float(rec + 4), le_float(rec + 8));
    // Lower 16 bits carry the semantic class, upper bits the instance id.
    cloud.labels.push_back(le_u32(lab.data() + i * 4) & 0xFFFFu);
  }
  if (cloud.points.empty()) throw EmptyCloud(bin_path + ": zero records");
  return cloud;
}

namespace {

// Reads the next PGM header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

SemanticMask load_mask_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open file");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5')
    throw BadMagic(path + ": not a binary PGM (P5)");
  const auto parse_int = [&](const std::string& what) {
    const std::string tok = pgm_token(in);
    try {
      std::size_t used = 0;
      const long v = std::stol(tok, &used);
      if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw BadHeader(path + ": bad " + what + " '" + tok + "'");
    }
  };
  const long width = parse_int("width");
  const long height = parse_int("height");
  const long maxval = parse_int("maxval");
  if (maxval > 255) throw BadHeader(path + ": maxval above 255 unsupported");
  SemanticMask mask;
  mask.width = static_cast<int>(width);
  mask.height = static_cast<int>(height);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<char> raw(n);
  in.read(raw.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw TruncatedPixels(path + ": expected " + std::to_string(n) + " pixels");
  mask.classes.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    mask.classes[i] = static_cast<std::uint8_t>(raw[i]);
  return mask;
}

void save_mask_pgm(const SemanticMask& mask, const std::string& path) {
  if (mask.classes.size() != static_cast<std::size_t>(mask.width) * mask.height)
    throw Error("mask grid size does not match dimensions");
  for (const auto c : mask.classes)
    if (c > 255) throw Error("mask class id above 255 cannot be saved as PGM");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<char> raw(mask.classes.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<char>(static_cast<std::uint8_t>(mask.classes[i]));
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

SemanticPointCloud filter_by_class(const SemanticPointCloud& cloud,
                                   std::uint32_t class_id) {
  SemanticPointCloud result;
  result.frame_id = cloud.frame_id;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (cloud.labels[i] == class_id) {
      result.points.push_back(cloud.points[i]);
      result.labels.push_back(cloud.labels[i]);
    }
  }
  return result;
}

FeatureCorrespondences load_correspondences_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open file");
  FeatureCorrespondences result;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++lineno;
    if (!parse_csv_row(path, lineno, line, 4, row)) continue;
    result.pairs.push_back(
        {Eigen::Vector2d(row[0], row[1]), Eigen::Vector2d(row[2], row[3])});
  }
  return result;
}

void save_correspondences_csv(const FeatureCorrespondences& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  char buf[160];
  for (const auto& p : c.pairs) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", p.first.x(),
                  p.first.y(), p.second.x(), p.second.y());
    out << buf;
  }
}

}  // namespace semcal
