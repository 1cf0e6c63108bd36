#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semcal/calibrate.hpp"
#include "semcal/error.hpp"
#include "semcal/geometry.hpp"
#include "semcal/json_io.hpp"
#include "semcal/metrics.hpp"
#include "semcal/odometry.hpp"
#include "semcal/overlay.hpp"
#include "semcal/rng.hpp"
#include "semcal/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// Exit codes are stable API: 0 ok, 2 usage, 3 I/O, 4 optimization failure,
// 5 unidentifiable (zero excitation).
enum ExitCode {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kOptimizationFailed = 4,
  kZeroExcitation = 5,
};

std::vector<double> parse_doubles(const std::string& text, std::size_t expected,
                                  const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      values.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw semcal::Error(what + ": bad number '" + field + "'");
    }
  }
  if (values.size() != expected)
    throw semcal::Error(what + ": expected " + std::to_string(expected) +
                        " comma-separated numbers");
  return values;
}

// "tx,ty,tz,roll,pitch,yaw" with angles in degrees, or a path to a JSON file
// carrying axis_angle_rad / translation_m / delay_s.
semcal::CalibrationParams parse_params(const std::string& value) {
  if (fs::exists(value)) return semcal::load_gt_json(value).params;
  const auto v = parse_doubles(value, 6, "parameter string");
  const Eigen::Matrix3d rotation = semcal::euler_to_matrix(
      v[3] * M_PI / 180.0, v[4] * M_PI / 180.0, v[5] * M_PI / 180.0);
  return semcal::CalibrationParams(semcal::matrix_to_axis_angle(rotation),
                                   Eigen::Vector3d(v[0], v[1], v[2]), 0.0);
}

void write_manifest(const std::string& command, const fs::path& out_dir,
                    const std::map<std::string, std::string>& inputs,
                    std::uint64_t seed) {
  json j;
  j["command"] = command;
  j["inputs"] = inputs;
  j["seed"] = seed;
  j["out"] = out_dir.string();
  j["tool_version"] = kToolVersion;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw semcal::IoError((out_dir / "manifest.json").string(),
                                  "cannot open for writing");
  out << j.dump(2) << "\n";
}

semcal::SemanticPointCloud load_cloud_any(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon != std::string::npos)
    return semcal::load_kitti_bin_with_labels(spec.substr(0, colon),
                                              spec.substr(colon + 1));
  if (spec.size() > 4 && spec.substr(spec.size() - 4) == ".bin") {
    std::string label = spec.substr(0, spec.size() - 4) + ".label";
    return semcal::load_kitti_bin_with_labels(spec, label);
  }
  return semcal::load_point_cloud_csv(spec);
}

struct FrameSpec {
  std::string cloud;
  std::string mask;
  std::string extra;  // velocity csv or correspondences csv
};

// One "cloud_path,mask_path[,extra_path]" per line; relative paths resolve
// against the manifest's own directory.
std::vector<FrameSpec> load_frame_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw semcal::IoError(path, "cannot open frame manifest");
  const fs::path base = fs::path(path).parent_path();
  std::vector<FrameSpec> frames;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) {
      const auto b = field.find_first_not_of(" \t\r");
      const auto e = field.find_last_not_of(" \t\r");
      fields.push_back(b == std::string::npos
                           ? std::string()
                           : field.substr(b, e - b + 1));
    }
    if (fields.size() < 2 || fields.size() > 3)
      throw semcal::ParseError(path, lineno,
                               "expected cloud_path,mask_path[,extra_path]");
    const auto resolve = [&](const std::string& p) {
      if (p.empty() || fs::path(p).is_absolute()) return p;
      return (base / p).string();
    };
    FrameSpec spec;
    spec.cloud = resolve(fields[0]);
    spec.mask = resolve(fields[1]);
    if (fields.size() == 3) spec.extra = resolve(fields[2]);
    frames.push_back(spec);
  }
  if (frames.empty()) throw semcal::ParseError(path, 0, "no frames listed");
  return frames;
}

struct CommonCalibrateOptions {
  std::string frames_path;
  std::string cloud_path;
  std::string mask_path;
  std::string intrinsics_path;
  std::string config_path;
  std::string out_dir;
  std::string gt_path;
  std::uint32_t class_id_cloud = 10;
  std::uint16_t class_id_mask = 13;
  std::uint64_t seed = 1;
  int threads = 1;
};

std::vector<FrameSpec> resolve_frames(const CommonCalibrateOptions& opt) {
  if (!opt.frames_path.empty()) return load_frame_manifest(opt.frames_path);
  if (opt.cloud_path.empty() || opt.mask_path.empty())
    throw semcal::Error("supply --frames or both --cloud and --mask");
  return {{opt.cloud_path, opt.mask_path, ""}};
}

semcal::FrameBundle build_bundle(const FrameSpec& spec,
                                 const CommonCalibrateOptions& opt,
                                 const semcal::CameraIntrinsics& intrinsics,
                                 const semcal::OptimizerConfig& config,
                                 std::optional<Eigen::Vector3d> velocity,
                                 int frame_index) {
  semcal::SemanticPointCloud cloud = load_cloud_any(spec.cloud);
  cloud = semcal::filter_by_class(cloud, opt.class_id_cloud);
  semcal::SemanticMask mask = semcal::load_mask_pgm(spec.mask);
  const std::uint64_t sample_seed =
      semcal::SplitMix64::derive(config.sample_seed, frame_index);
  return semcal::make_frame_bundle(std::move(cloud), std::move(mask),
                                   opt.class_id_mask, intrinsics, velocity,
                                   config.sample_rate, sample_seed, frame_index);
}

semcal::CalibrationError compute_error(const semcal::CalibrationParams& estimate,
                                       const semcal::GroundTruth& gt,
                                       bool with_delay) {
  semcal::CalibrationError error;
  const Eigen::Matrix3d r_est = semcal::axis_angle_to_matrix(estimate.axis_angle);
  const Eigen::Matrix3d r_gt = semcal::axis_angle_to_matrix(gt.params.axis_angle);
  error.qad_deg = semcal::qad(r_gt, r_est);
  error.aead_deg = semcal::aead(r_gt, r_est).degrees;
  error.atd_cm = semcal::atd(gt.params.translation, estimate.translation);
  if (with_delay)
    error.delay_error_ms = semcal::delay_error(gt.params.delay, estimate.delay);
  return error;
}

void write_metrics(const semcal::CalibrationError& error, const fs::path& out_dir) {
  json j;
  j["qad_deg"] = error.qad_deg;
  j["aead_deg"] = error.aead_deg;
  j["atd_cm"] = error.atd_cm;
  if (error.delay_error_ms) j["delay_error_ms"] = *error.delay_error_ms;
  std::ofstream jout(out_dir / "metrics.json");
  jout << j.dump(2) << "\n";
  std::ofstream tout(out_dir / "metrics.txt");
  tout << semcal::format_error_text(error);
}

int finish_calibration(const semcal::CalibrationResult& result,
                       const CommonCalibrateOptions& opt, bool joint) {
  const fs::path out_dir(opt.out_dir);
  semcal::save_result_json(result, (out_dir / "result.json").string());
  if (!opt.gt_path.empty()) {
    const semcal::GroundTruth gt = semcal::load_gt_json(opt.gt_path);
    write_metrics(compute_error(result.params, gt, joint), out_dir);
  }
  std::cout << "status: " << semcal::to_string(result.status)
            << "  final_loss: " << result.final_loss;
  if (joint) std::cout << "  delay_s: " << result.params.delay;
  std::cout << "\n";
  if (result.status == semcal::CalibrationStatus::Failed) {
    std::cerr << "calibration failed: " << result.failure_reason << "\n";
    return result.failure_reason == "zero excitation" ? kZeroExcitation
                                                      : kOptimizationFailed;
  }
  return kOk;
}

int cmd_synth(const semcal::SceneConfig& scene, const std::string& out_dir,
              double frame_dt) {
  fs::create_directories(out_dir);
  write_manifest("synth", out_dir,
                 {{"clusters", std::to_string(scene.n_clusters)},
                  {"points_per_cluster", std::to_string(scene.points_per_cluster)},
                  {"delay_s", std::to_string(scene.gt_delay)}},
                 scene.seed);
  const semcal::SceneBundle bundle = semcal::generate_scene(scene);
  semcal::write_scene_files(bundle, scene, out_dir, frame_dt);
  std::cout << "wrote scene with " << bundle.cloud.size() << " points to "
            << out_dir << "\n";
  return kOk;
}

int cmd_calibrate_static(const CommonCalibrateOptions& opt,
                         const std::string& init_value) {
  const auto frames = resolve_frames(opt);
  semcal::CameraIntrinsics intrinsics = semcal::load_intrinsics(opt.intrinsics_path);
  semcal::OptimizerConfig config = semcal::default_static_config();
  if (!opt.config_path.empty())
    config = semcal::load_optimizer_config(opt.config_path, config);
  config.sample_seed = opt.seed;
  config.threads = opt.threads;
  const semcal::CalibrationParams init = parse_params(init_value);

  fs::create_directories(opt.out_dir);
  write_manifest("calibrate-static", opt.out_dir,
                 {{"frames", opt.frames_path},
                  {"cloud", opt.cloud_path},
                  {"mask", opt.mask_path},
                  {"intrinsics", opt.intrinsics_path},
                  {"config", opt.config_path},
                  {"init", init_value}},
                 opt.seed);

  std::vector<semcal::FrameBundle> bundles;
  for (std::size_t i = 0; i < frames.size(); ++i)
    bundles.push_back(build_bundle(frames[i], opt, intrinsics, config,
                                   std::nullopt, static_cast<int>(i)));
  const semcal::CalibrationResult result =
      semcal::calibrate_static(bundles, init, config);
  return finish_calibration(result, opt, false);
}

int cmd_calibrate_joint(const CommonCalibrateOptions& opt,
                        const std::string& static_result_path,
                        const std::string& velocity_source,
                        std::optional<double> speed, double init_delay,
                        double frame_dt) {
  const auto frames = resolve_frames(opt);
  semcal::CameraIntrinsics intrinsics = semcal::load_intrinsics(opt.intrinsics_path);
  semcal::OptimizerConfig config = semcal::default_joint_config();
  if (!opt.config_path.empty())
    config = semcal::load_optimizer_config(opt.config_path, config);
  config.sample_seed = opt.seed;
  config.threads = opt.threads;

  const bool from_odometry = velocity_source == "correspondences";
  if (from_odometry && !speed)
    throw semcal::Error(
        "--speed is required when velocities come from correspondences "
        "(monocular scale)");

  const semcal::CalibrationResult static_result =
      semcal::load_result_json(static_result_path);

  fs::create_directories(opt.out_dir);
  write_manifest("calibrate-joint", opt.out_dir,
                 {{"frames", opt.frames_path},
                  {"cloud", opt.cloud_path},
                  {"mask", opt.mask_path},
                  {"intrinsics", opt.intrinsics_path},
                  {"config", opt.config_path},
                  {"static_result", static_result_path},
                  {"velocity_source", velocity_source},
                  {"init_delay", std::to_string(init_delay)}},
                 opt.seed);

  std::vector<semcal::FrameBundle> bundles;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].extra.empty())
      throw semcal::Error("frame " + std::to_string(i) +
                          " lacks a velocity/correspondences path");
    Eigen::Vector3d velocity;
    if (from_odometry) {
      const semcal::FeatureCorrespondences corr =
          semcal::load_correspondences_csv(frames[i].extra);
      semcal::RansacConfig ransac;
      ransac.seed = semcal::SplitMix64::derive(opt.seed, 0x8A5C + i);
      const semcal::EssentialEstimate estimate =
          semcal::estimate_essential_ransac(corr, intrinsics, ransac);
      const semcal::RelativePose pose = semcal::decompose_essential(
          estimate.essential, corr, estimate.inlier_mask, intrinsics);
      velocity = semcal::velocity_from_pose(pose, *speed, frame_dt).v;
    } else {
      const auto rows = semcal::load_velocity_csv(frames[i].extra);
      if (rows.empty())
        throw semcal::MissingVelocity(frames[i].extra + ": no velocity rows");
      const semcal::VelocityEstimate* row = nullptr;
      if (rows.size() == 1) {
        row = &rows.front();
      } else {
        for (const auto& r : rows)
          if (r.frame_id == static_cast<int>(i)) row = &r;
      }
      if (!row)
        throw semcal::MissingVelocity(frames[i].extra + ": no row for frame " +
                                      std::to_string(i));
      velocity = row->v;
    }
    bundles.push_back(build_bundle(frames[i], opt, intrinsics, config, velocity,
                                   static_cast<int>(i)));
  }

  const semcal::CalibrationResult result =
      semcal::calibrate_joint(bundles, static_result, init_delay, config);
  return finish_calibration(result, opt, true);
}

int cmd_eval(const std::vector<std::string>& result_paths,
             const std::vector<std::string>& gt_paths,
             const std::string& out_dir) {
  if (result_paths.empty()) throw semcal::Error("at least one --result required");
  if (gt_paths.size() != 1 && gt_paths.size() != result_paths.size())
    throw semcal::Error("--gt count must be 1 or match --result count");

  std::vector<semcal::CalibrationError> errors;
  bool any_delay = false;
  for (std::size_t i = 0; i < result_paths.size(); ++i) {
    const semcal::CalibrationResult result =
        semcal::load_result_json(result_paths[i]);
    const semcal::GroundTruth gt =
        semcal::load_gt_json(gt_paths.size() == 1 ? gt_paths[0] : gt_paths[i]);
    const bool with_delay =
        result.params.delay != 0.0 || gt.params.delay != 0.0;
    any_delay = any_delay || with_delay;
    errors.push_back(compute_error(result.params, gt, with_delay));
  }

  const auto collect = [&](auto getter) {
    std::vector<double> values;
    for (const auto& e : errors) values.push_back(getter(e));
    return values;
  };
  json j;
  json per_frame = json::array();
  for (const auto& e : errors) {
    json f;
    f["qad_deg"] = e.qad_deg;
    f["aead_deg"] = e.aead_deg;
    f["atd_cm"] = e.atd_cm;
    if (e.delay_error_ms) f["delay_error_ms"] = *e.delay_error_ms;
    per_frame.push_back(f);
  }
  j["frames"] = per_frame;
  std::ostringstream text;
  text.precision(17);
  const auto aggregate = [&](const char* name, std::vector<double> values) {
    if (values.empty()) return;
    j["mean"][name] = semcal::mean(values);
    j["median"][name] = semcal::median(values);
    text << name << "_mean=" << semcal::mean(values) << "\n";
    text << name << "_median=" << semcal::median(values) << "\n";
  };
  aggregate("qad_deg", collect([](const auto& e) { return e.qad_deg; }));
  aggregate("aead_deg", collect([](const auto& e) { return e.aead_deg; }));
  aggregate("atd_cm", collect([](const auto& e) { return e.atd_cm; }));
  if (any_delay) {
    std::vector<double> delays;
    for (const auto& e : errors)
      if (e.delay_error_ms) delays.push_back(*e.delay_error_ms);
    aggregate("delay_error_ms", delays);
  }

  std::cout << text.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream jout(fs::path(out_dir) / "metrics.json");
    jout << j.dump(2) << "\n";
    std::ofstream tout(fs::path(out_dir) / "metrics.txt");
    tout << text.str();
  }
  return kOk;
}

int cmd_render_overlay(const std::string& cloud_path, const std::string& mask_path,
                       const std::string& intrinsics_path,
                       const std::string& params_value,
                       const std::string& velocity_value,
                       std::optional<double> delay_override,
                       std::uint32_t class_id_cloud, std::uint16_t class_id_mask,
                       const std::string& out_dir) {
  semcal::SemanticPointCloud cloud = load_cloud_any(cloud_path);
  cloud = semcal::filter_by_class(cloud, class_id_cloud);
  const semcal::SemanticMask mask = semcal::load_mask_pgm(mask_path);
  const semcal::CameraIntrinsics intrinsics =
      semcal::load_intrinsics(intrinsics_path);
  semcal::CalibrationParams params = parse_params(params_value);
  if (delay_override) params.delay = *delay_override;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  if (!velocity_value.empty()) {
    const auto v = parse_doubles(velocity_value, 3, "--velocity");
    velocity = {v[0], v[1], v[2]};
  }

  fs::create_directories(out_dir);
  write_manifest("render-overlay", out_dir,
                 {{"cloud", cloud_path},
                  {"mask", mask_path},
                  {"intrinsics", intrinsics_path},
                  {"params", params_value}},
                 0);
  const semcal::ProjectedSet projected =
      semcal::project_cloud(cloud, params, velocity, intrinsics);
  if (projected.pixels.empty())
    std::cerr << "warning: no points project into the image\n";
  const semcal::RgbImage image =
      semcal::render_overlay(mask, class_id_mask, projected);
  semcal::save_ppm(image, (fs::path(out_dir) / "overlay.ppm").string());
  std::cout << "wrote overlay with " << projected.size() << " splats\n";
  return kOk;
}

int dispatch_exit(const std::exception& error) {
  std::cerr << "error: " << error.what() << "\n";
  if (dynamic_cast<const semcal::IoError*>(&error) ||
      dynamic_cast<const semcal::ParseError*>(&error) ||
      dynamic_cast<const semcal::EmptyCloud*>(&error) ||
      dynamic_cast<const semcal::LengthMismatch*>(&error) ||
      dynamic_cast<const semcal::TruncatedFile*>(&error) ||
      dynamic_cast<const semcal::BadMagic*>(&error) ||
      dynamic_cast<const semcal::BadHeader*>(&error) ||
      dynamic_cast<const semcal::TruncatedPixels*>(&error) ||
      dynamic_cast<const semcal::EmptyScene*>(&error) ||
      dynamic_cast<const semcal::TooFewVisible*>(&error))
    return kIo;
  if (dynamic_cast<const semcal::ClassAbsent*>(&error) ||
      dynamic_cast<const semcal::AllFramesDegenerate*>(&error) ||
      dynamic_cast<const semcal::DegenerateConfiguration*>(&error) ||
      dynamic_cast<const semcal::CheiralityAmbiguous*>(&error) ||
      dynamic_cast<const semcal::InsufficientCorrespondences*>(&error) ||
      dynamic_cast<const semcal::MissingVelocity*>(&error))
    return kOptimizationFailed;
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic LIDAR-camera spatial and temporal calibration"};
  app.require_subcommand(1);

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene bundle");
  semcal::SceneConfig scene;
  std::string synth_out;
  std::string synth_gt = "0.1,-0.2,0.3,90,0,90";
  std::string synth_velocity = "0,0,0";
  double synth_frame_dt = 0.1;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--clusters", scene.n_clusters, "Number of clusters")
      ->check(CLI::PositiveNumber);
  synth->add_option("--points-per-cluster", scene.points_per_cluster,
                    "Surface points per cluster")
      ->check(CLI::Range(10, 100000));
  synth->add_option("--seed", scene.seed, "Scene seed");
  synth->add_option("--delay", scene.gt_delay, "Ground-truth delay, seconds");
  synth->add_option("--velocity", synth_velocity,
                    "Ground-truth velocity vx,vy,vz (camera frame, m/s)");
  synth->add_option("--gt", synth_gt,
                    "Ground-truth extrinsics tx,ty,tz,roll,pitch,yaw (m, deg)");
  synth->add_option("--width", scene.intrinsics.width, "Image width");
  synth->add_option("--height", scene.intrinsics.height, "Image height");
  synth->add_option("--fx", scene.intrinsics.fx, "Focal length x");
  synth->add_option("--fy", scene.intrinsics.fy, "Focal length y");
  synth->add_option("--cx", scene.intrinsics.cx, "Principal point x");
  synth->add_option("--cy", scene.intrinsics.cy, "Principal point y");
  synth->add_option("--depth-min", scene.depth_min, "Cluster depth range low");
  synth->add_option("--depth-max", scene.depth_max, "Cluster depth range high");
  synth->add_option("--lateral", scene.lateral_range, "Cluster lateral range, m");
  synth->add_option("--size-min", scene.cluster_size_min, "Cluster edge low, m");
  synth->add_option("--size-max", scene.cluster_size_max, "Cluster edge high, m");
  synth->add_option("--class-id-cloud", scene.cloud_class_id, "Cloud class id");
  synth->add_option("--class-id-mask", scene.mask_class_id, "Mask class id");
  synth->add_option("--label-flip-rate", scene.label_flip_rate,
                    "Mask label flip probability");
  synth->add_flag("--dense-mask", scene.dense_mask,
                  "Densify the mask footprint beyond projected points");
  synth->add_option("--frame-dt", synth_frame_dt, "Camera frame interval, s");

  // --- shared calibrate options ---
  CommonCalibrateOptions so;  // static
  CommonCalibrateOptions jo;  // joint
  const auto add_common = [](CLI::App* cmd, CommonCalibrateOptions& opt) {
    cmd->add_option("--frames", opt.frames_path,
                    "Frame manifest: cloud,mask[,extra] per line");
    cmd->add_option("--cloud", opt.cloud_path, "Point cloud (csv or bin[:label])");
    cmd->add_option("--mask", opt.mask_path, "Semantic mask (PGM)");
    cmd->add_option("--intrinsics", opt.intrinsics_path, "Intrinsics key=value file")
        ->required();
    cmd->add_option("--config", opt.config_path, "Optimizer config key=value file");
    cmd->add_option("--out", opt.out_dir, "Output directory")->required();
    cmd->add_option("--gt", opt.gt_path, "Ground truth gt.json for metrics");
    cmd->add_option("--class-id-cloud", opt.class_id_cloud, "Cloud class id");
    cmd->add_option("--class-id-mask", opt.class_id_mask, "Mask class id");
    cmd->add_option("--seed", opt.seed, "Sampling seed");
    cmd->add_option("--threads", opt.threads, "Worker threads")
        ->check(CLI::PositiveNumber);
  };

  auto* cal_static = app.add_subcommand(
      "calibrate-static", "Static spatial calibration (delay fixed at 0)");
  std::string static_init;
  add_common(cal_static, so);
  cal_static
      ->add_option("--init", static_init,
                   "Initial guess: file or tx,ty,tz,roll,pitch,yaw (m, deg)")
      ->required();

  auto* cal_joint = app.add_subcommand(
      "calibrate-joint", "Joint spatial-temporal calibration");
  std::string static_result_path;
  std::string velocity_source = "velocity";
  double init_delay = 0.0;
  double joint_frame_dt = 0.1;
  std::optional<double> speed;
  add_common(cal_joint, jo);
  cal_joint->add_option("--static-result", static_result_path,
                        "result.json of the static stage")
      ->required();
  cal_joint
      ->add_option("--velocity-source", velocity_source,
                   "Per-frame extra files are 'velocity' or 'correspondences'")
      ->check(CLI::IsMember({"velocity", "correspondences"}));
  cal_joint->add_option("--speed", speed,
                        "Vehicle speed in m/s (monocular scale for odometry)");
  cal_joint->add_option("--init-delay", init_delay, "Initial delay guess, s");
  cal_joint->add_option("--frame-dt", joint_frame_dt, "Camera frame interval, s");

  auto* eval = app.add_subcommand("eval", "Report QAD/AEAD/ATD/delay metrics");
  std::vector<std::string> eval_results, eval_gts;
  std::string eval_out;
  eval->add_option("--result", eval_results, "result.json path(s)")->required();
  eval->add_option("--gt", eval_gts, "gt.json path(s), one or per-result")
      ->required();
  eval->add_option("--out", eval_out, "Optional output directory");

  auto* render = app.add_subcommand("render-overlay",
                                    "Render the projection over the mask");
  std::string r_cloud, r_mask, r_intr, r_params, r_velocity, r_out;
  std::optional<double> r_delay;
  std::uint32_t r_class_cloud = 10;
  std::uint16_t r_class_mask = 13;
  render->add_option("--cloud", r_cloud, "Point cloud")->required();
  render->add_option("--mask", r_mask, "Semantic mask (PGM)")->required();
  render->add_option("--intrinsics", r_intr, "Intrinsics file")->required();
  render->add_option("--params", r_params, "Params: file or tx,ty,tz,r,p,y")
      ->required();
  render->add_option("--velocity", r_velocity, "Velocity vx,vy,vz (m/s)");
  render->add_option("--delay", r_delay, "Delay override, s");
  render->add_option("--class-id-cloud", r_class_cloud, "Cloud class id");
  render->add_option("--class-id-mask", r_class_mask, "Mask class id");
  render->add_option("--out", r_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) {
      const auto v = parse_doubles(synth_velocity, 3, "--velocity");
      scene.gt_velocity = {v[0], v[1], v[2]};
      const semcal::CalibrationParams gt = parse_params(synth_gt);
      scene.gt_transform = gt.transform();
      return cmd_synth(scene, synth_out, synth_frame_dt);
    }
    if (cal_static->parsed()) return cmd_calibrate_static(so, static_init);
    if (cal_joint->parsed())
      return cmd_calibrate_joint(jo, static_result_path, velocity_source, speed,
                                 init_delay, joint_frame_dt);
    if (eval->parsed()) return cmd_eval(eval_results, eval_gts, eval_out);
    if (render->parsed())
      return cmd_render_overlay(r_cloud, r_mask, r_intr, r_params, r_velocity,
                                r_delay, r_class_cloud, r_class_mask, r_out);
  } catch (const std::exception& e) {
    return dispatch_exit(e);
  }
  return kUsage;
}
