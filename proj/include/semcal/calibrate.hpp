#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "semcal/alignment.hpp"
#include "semcal/geometry.hpp"
#include "semcal/semantic_io.hpp"

namespace semcal {

// Piecewise-constant weight w_l over optimization iterations.
struct WeightSegment {
  int iterations = 0;
  double w = 0.0;
};

struct WeightSchedule {
  std::vector<WeightSegment> segments;

  int total_iterations() const;
  double w_at(int iteration) const;  // 0-based, must be < total
  void validate() const;
};

// "20:20,30:1,10:0.02" -> three segments of (iterations, w).
WeightSchedule parse_schedule(const std::string& text);

struct OptimizerConfig {
  WeightSchedule schedule;
  double fd_epsilon_rot = 1e-4;    // radians
  double fd_epsilon_trans = 1e-3;  // meters
  double fd_epsilon_delay = 1e-4;  // seconds
  double initial_step = 4.0;       // in preconditioned units
  double backtrack_factor = 0.5;
  int max_backtracks = 12;
  double lambda1 = 0.0;  // translation regularization
  double lambda2 = 0.0;  // rotation regularization
  double sample_rate = 0.02;
  std::uint64_t sample_seed = 1;
  double failure_loss_threshold = 50.0;  // pixels^2 per matched element
  int threads = 1;
  bool optimize_delay = true;

  void validate() const;
};

// Static-stage defaults: w = 20 / 1 / 0.02 over 20 / 30 / 10 iterations.
OptimizerConfig default_static_config();

// Joint-stage defaults: constant w = 5 for 20 iterations,
// lambda1 = 1e6, lambda2 = 1e9.
OptimizerConfig default_joint_config();

// key=value text file mirroring OptimizerConfig fields; unknown keys are
// rejected, absent keys keep the supplied base value.
OptimizerConfig load_optimizer_config(const std::string& path,
                                      const OptimizerConfig& base);

// Everything fixed about one frame during an optimization run: the
// class-filtered cloud, the mask with its nearest-pixel index, and the
// frozen pixel sample.
struct FrameBundle {
  SemanticPointCloud cloud;
  SemanticMask mask;
  CameraIntrinsics intrinsics;
  std::optional<Eigen::Vector3d> velocity;  // camera frame, m/s
  NearestPixelIndex index;
  SampledPixels sample;
  int frame_id = 0;
};

// Builds the index and the frozen pixel sample for one frame.
// Throws ClassAbsent when the mask lacks the class entirely.
FrameBundle make_frame_bundle(SemanticPointCloud cloud_filtered,
                              SemanticMask mask, std::uint16_t mask_class_id,
                              const CameraIntrinsics& intrinsics,
                              std::optional<Eigen::Vector3d> velocity,
                              double sample_rate, std::uint64_t sample_seed,
                              int frame_id);

enum class CalibrationStatus { Converged, MaxIterations, Failed };

const char* to_string(CalibrationStatus status);

struct TraceEntry {
  int iteration = 0;
  double w = 0.0;
  double loss = 0.0;
  CalibrationParams params;
};

struct CalibrationResult {
  CalibrationParams params;  // best-loss parameters seen
  double final_loss = 0.0;   // loss of the last trace entry
  std::vector<TraceEntry> trace;
  CalibrationStatus status = CalibrationStatus::Failed;
  std::string failure_reason;
  std::size_t matched_elements = 0;  // n_p + n_i at the final iteration
};

// lambda1 * ||t - t_anchor||^2 + lambda2 * ||R R_anchor^-1 - I||_F^2.
// The chordal rotation term is zero iff the rotations coincide.
double regularization(const CalibrationParams& params,
                      const CalibrationParams& anchor, double lambda1,
                      double lambda2);

// Single-frame objective. Without an anchor this is the static objective
// (velocity and delay are ignored); with an anchor it is the
// delay-compensated objective plus the regularization term.
// EmptyProjection surfaces as EvaluationFailed carrying the frame id.
double evaluate_objective(const CalibrationParams& params,
                          const FrameBundle& bundle,
                          const std::optional<CalibrationParams>& static_anchor,
                          const OptimizerConfig& config, double w);

using ObjectiveFn = std::function<double(const CalibrationParams&)>;

// Central differences over the first `dims` parameters (6 without delay,
// 7 with) using the per-kind epsilons from config.
Eigen::VectorXd finite_difference_gradient(const ObjectiveFn& objective,
                                           const CalibrationParams& at,
                                           const OptimizerConfig& config,
                                           int dims);

// Static spatial calibration: optimizes rotation and translation with the
// delay fixed at zero. Throws AllFramesDegenerate when every bundle fails
// evaluation at the initial parameters.
CalibrationResult calibrate_static(const std::vector<FrameBundle>& bundles,
                                   const CalibrationParams& init,
                                   const OptimizerConfig& config);

// Joint spatial-temporal calibration seeded and regularized by the static
// result. Refuses with status Failed / "zero excitation" when the mean
// speed over bundles is below 0.1 m/s. Throws MissingVelocity when a
// bundle lacks a velocity estimate.
CalibrationResult calibrate_joint(const std::vector<FrameBundle>& bundles,
                                  const CalibrationResult& static_result,
                                  double init_delay,
                                  const OptimizerConfig& config);

// Classifies a completed run: Failed on non-finite values or when the
// final per-element loss exceeds the threshold; otherwise Converged or
// MaxIterations by the loss-decrease tolerance over the final segment.
// Updates result.status / result.failure_reason and returns the status.
CalibrationStatus detect_failure(CalibrationResult& result,
                                 const OptimizerConfig& config);

}  // namespace semcal
