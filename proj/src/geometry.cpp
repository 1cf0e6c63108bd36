#include "semcal/geometry.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "semcal/error.hpp"

namespace semcal {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  const Eigen::Matrix3d residual = r.transpose() * r - Eigen::Matrix3d::Identity();
  return residual.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace

bool RigidTransform::valid() const {
  return is_rotation(rotation, 1e-9) && translation.allFinite();
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  // Applies b first, then a.
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

RigidTransform inverse(const RigidTransform& a) {
  const Eigen::Matrix3d rt = a.rotation.transpose();
  return {rt, -(rt * a.translation)};
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error("intrinsics: image dimensions must be positive");
  if (!(cx >= 0.0 && cx < width)) throw Error("intrinsics: cx outside [0, width)");
  if (!(cy >= 0.0 && cy < height)) throw Error("intrinsics: cy outside [0, height)");
}

CameraIntrinsics load_intrinsics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open intrinsics file");
  std::map<std::string, double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw ParseError(path, lineno, "expected key=value");
      continue;
    }
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(val);
    try {
      std::size_t used = 0;
      const double d = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
      values[key] = d;
    } catch (const std::exception&) {
      throw ParseError(path, lineno, "bad numeric value for key '" + key + "'");
    }
  }
  CameraIntrinsics k;
  const auto require = [&](const char* name) {
    const auto it = values.find(name);
    if (it == values.end()) throw ParseError(path, 0, std::string("missing key '") + name + "'");
    return it->second;
  };
  k.fx = require("fx");
  k.fy = require("fy");
  k.cx = require("cx");
  k.cy = require("cy");
  k.width = static_cast<int>(require("width"));
  k.height = static_cast<int>(require("height"));
  k.validate();
  return k;
}

void save_intrinsics(const CameraIntrinsics& k, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  out.precision(17);
  out << "fx=" << k.fx << "\nfy=" << k.fy << "\ncx=" << k.cx << "\ncy=" << k.cy
      << "\nwidth=" << k.width << "\nheight=" << k.height << "\n";
}

CalibrationParams::CalibrationParams(const Eigen::Vector3d& aa,
                                     const Eigen::Vector3d& t, double d)
    : axis_angle(canonicalize_axis_angle(aa)), translation(t), delay(d) {}

RigidTransform CalibrationParams::transform() const {
  return {axis_angle_to_matrix(axis_angle), translation};
}

Eigen::Vector3d canonicalize_axis_angle(const Eigen::Vector3d& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta <= M_PI) return axis_angle;
  // Wrap the angle into (-pi, pi] and fold the sign into the axis.
  double wrapped = std::fmod(theta, 2.0 * M_PI);
  if (wrapped > M_PI) wrapped -= 2.0 * M_PI;
  return axis_angle * (wrapped / theta);
}

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& axis_angle) {
  const double theta2 = axis_angle.squaredNorm();
  const Eigen::Matrix3d k = skew(axis_angle);
  double a;  // sin(theta)/theta
  double b;  // (1 - cos(theta))/theta^2
  if (theta2 < 1e-14) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Eigen::Matrix3d::Identity() + a * k + b * (k * k);
}

Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& rotation) {
  const Eigen::Vector4d q = matrix_to_quaternion(rotation);
  const Eigen::Vector3d v = q.tail<3>();
  const double vnorm = v.norm();
  if (vnorm < 1e-300) return Eigen::Vector3d::Zero();
  const double angle = 2.0 * std::atan2(vnorm, q[0]);
  return v * (angle / vnorm);
}

Eigen::Vector4d matrix_to_quaternion(const Eigen::Matrix3d& r) {
  if (!is_rotation(r, 1e-6)) throw NotARotation("matrix is not a rotation");
  // Shepperd's method: branch on the largest diagonal combination.
  Eigen::Vector4d q;
  const double trace = r.trace();
  if (trace > 0.0) {
    double s = std::sqrt(trace + 1.0) * 2.0;
    q << 0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s,
        (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q << (r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s,
        (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s,
        (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s,
        (r(1, 2) + r(2, 1)) / s, 0.25 * s;
  }
  q.normalize();
  // Scalar part >= 0; on w == 0 make the largest-magnitude component positive
  // so the double-cover representative is unique.
  if (q[0] < 0.0) {
    q = -q;
  } else if (q[0] == 0.0) {
    int imax = 1;
    for (int i = 2; i < 4; ++i)
      if (std::abs(q[i]) > std::abs(q[imax])) imax = i;
    if (q[imax] < 0.0) q = -q;
  }
  return q;
}

Eigen::Matrix3d quaternion_to_matrix(const Eigen::Vector4d& wxyz) {
  const Eigen::Vector4d q = wxyz.normalized();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

std::optional<PixelPoint> project_point(const Eigen::Vector3d& p,
                                        const RigidTransform& transform,
                                        const CameraIntrinsics& intrinsics) {
  const Eigen::Vector3d cam = transform.apply(p);
  const Eigen::Vector3d hom = intrinsics.matrix() * cam;
  if (!(hom.z() > kMinProjectionDepth)) return std::nullopt;
  return PixelPoint{hom.x() / hom.z(), hom.y() / hom.z(), 0};
}

std::optional<PixelPoint> project_point_delayed(
    const Eigen::Vector3d& p, const RigidTransform& transform,
    const Eigen::Vector3d& velocity, double delay,
    const CameraIntrinsics& intrinsics) {
  const RigidTransform shifted{transform.rotation,
                               transform.translation + velocity * delay};
  return project_point(p, shifted, intrinsics);
}

}  // namespace semcal
