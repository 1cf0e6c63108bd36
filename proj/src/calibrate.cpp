#include "semcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include "semcal/error.hpp"
#include "semcal/rng.hpp"

namespace semcal {

namespace {

using Vec7 = Eigen::Matrix<double, 7, 1>;

// Natural per-dimension scales used to precondition the descent direction;
// without them the pixel-space gradient is dominated by rotation.
constexpr double kScaleRot = 0.01;     // radians
constexpr double kScaleTrans = 0.05;   // meters
constexpr double kScaleDelay = 0.01;   // seconds

// With regularization active, a unit scaled step should cost O(1) pixels^2
// against the penalty, otherwise the quadratic walls around the anchor make
// the line search reject every move that also adjusts the delay.
Vec7 preconditioner_scales(const OptimizerConfig& config, bool regularized) {
  double s_rot = kScaleRot;
  double s_trans = kScaleTrans;
  if (regularized) {
    if (config.lambda2 > 0.0)
      s_rot = std::min(s_rot, 1.0 / std::sqrt(config.lambda2));
    if (config.lambda1 > 0.0)
      s_trans = std::min(s_trans, 1.0 / std::sqrt(config.lambda1));
  }
  Vec7 scales;
  scales << s_rot, s_rot, s_rot, s_trans, s_trans, s_trans, kScaleDelay;
  return scales;
}

Vec7 pack(const CalibrationParams& p) {
  Vec7 v;
  v << p.axis_angle, p.translation, p.delay;
  return v;
}

CalibrationParams unpack(const Vec7& v) {
  return CalibrationParams(v.head<3>(), v.segment<3>(3), v[6]);
}

// Runs fn(i) for i in [0, n); with more than one thread the work is strided
// across std::async tasks. fn writes only to its own slot, so the result is
// identical for any thread count.
template <typename Fn>
void indexed_parallel_for(std::size_t n, int threads, const Fn& fn) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    futures.push_back(std::async(std::launch::async, [&, t] {
      for (std::size_t i = t; i < n; i += workers) fn(i);
    }));
  }
  for (auto& f : futures) f.get();
}

struct TotalObjective {
  double loss = 0.0;
  std::size_t matched = 0;       // n_p + n_i over surviving frames
  std::size_t failed_frames = 0;
  std::size_t total_frames = 0;

  bool all_failed() const { return failed_frames == total_frames; }
};

// Single-frame objective that also reports n_p + n_i for failure scoring.
double evaluate_frame(const CalibrationParams& params,
                      const FrameBundle& bundle,
                      const std::optional<CalibrationParams>& static_anchor,
                      const OptimizerConfig& config, double w,
                      std::size_t* matched) {
  if (static_anchor && !bundle.velocity)
    throw MissingVelocity("frame " + std::to_string(bundle.frame_id) +
                          " has no velocity estimate");
  try {
    ProjectedSet projected;
    if (static_anchor) {
      projected = project_cloud(bundle.cloud, params, *bundle.velocity,
                                bundle.intrinsics);
    } else {
      CalibrationParams effective = params;
      effective.delay = 0.0;
      projected = project_cloud(bundle.cloud, effective, Eigen::Vector3d::Zero(),
                                bundle.intrinsics);
    }
    double loss = bidirectional_loss(projected, bundle.index, bundle.sample, w);
    if (static_anchor)
      loss += regularization(params, *static_anchor, config.lambda1,
                             config.lambda2);
    if (matched) *matched = projected.size() + bundle.sample.size();
    return loss;
  } catch (const EmptyProjection& e) {
    throw EvaluationFailed(bundle.frame_id, e.what());
  }
}

TotalObjective evaluate_total(const CalibrationParams& params,
                              const std::vector<FrameBundle>& bundles,
                              const std::optional<CalibrationParams>& anchor,
                              const OptimizerConfig& config, double w) {
  struct Slot {
    double loss = 0.0;
    std::size_t matched = 0;
    bool failed = false;
  };
  std::vector<Slot> slots(bundles.size());
  indexed_parallel_for(bundles.size(), config.threads, [&](std::size_t i) {
    try {
      slots[i].loss = evaluate_frame(params, bundles[i], anchor, config, w,
                                     &slots[i].matched);
    } catch (const EvaluationFailed&) {
      slots[i].failed = true;
    }
  });
  TotalObjective total;
  total.total_frames = bundles.size();
  for (const auto& s : slots) {
    if (s.failed) {
      ++total.failed_frames;
      continue;
    }
    total.loss += s.loss;
    total.matched += s.matched;
  }
  if (total.all_failed()) total.loss = std::numeric_limits<double>::infinity();
  return total;
}

}  // namespace

int WeightSchedule::total_iterations() const {
  int total = 0;
  for (const auto& s : segments) total += s.iterations;
  return total;
}

double WeightSchedule::w_at(int iteration) const {
  int offset = iteration;
  for (const auto& s : segments) {
    if (offset < s.iterations) return s.w;
    offset -= s.iterations;
  }
  throw Error("iteration " + std::to_string(iteration) + " beyond schedule");
}

void WeightSchedule::validate() const {
  if (segments.empty()) throw Error("schedule has no segments");
  for (const auto& s : segments) {
    if (s.iterations <= 0) throw Error("schedule segment with no iterations");
    if (!(s.w >= 0.0)) throw Error("schedule weight must be non-negative");
  }
}

WeightSchedule parse_schedule(const std::string& text) {
  WeightSchedule schedule;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos)
      throw Error("schedule segment '" + part + "' is not count:w");
    try {
      std::size_t used = 0;
      const int count = std::stoi(part.substr(0, colon), &used);
      const double w = std::stod(part.substr(colon + 1));
      schedule.segments.push_back({count, w});
    } catch (const std::exception&) {
      throw Error("schedule segment '" + part + "' is not count:w");
    }
  }
  schedule.validate();
  return schedule;
}

void OptimizerConfig::validate() const {
  schedule.validate();
  if (!(fd_epsilon_rot > 0.0 && fd_epsilon_trans > 0.0 && fd_epsilon_delay > 0.0))
    throw Error("finite-difference epsilons must be positive");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
    throw Error("backtrack_factor must be in (0, 1)");
  if (!(initial_step > 0.0)) throw Error("initial_step must be positive");
  if (max_backtracks < 0) throw Error("max_backtracks must be >= 0");
  if (!(lambda1 >= 0.0 && lambda2 >= 0.0))
    throw Error("regularization coefficients must be >= 0");
  if (!(sample_rate > 0.0 && sample_rate <= 1.0))
    throw Error("sample_rate must be in (0, 1]");
  if (!(failure_loss_threshold > 0.0))
    throw Error("failure_loss_threshold must be positive");
  if (threads < 1) throw Error("threads must be >= 1");
}

OptimizerConfig default_static_config() {
  OptimizerConfig config;
  config.schedule.segments = {{20, 20.0}, {30, 1.0}, {10, 0.02}};
  return config;
}

OptimizerConfig default_joint_config() {
  OptimizerConfig config;
  config.schedule.segments = {{20, 5.0}};
  config.lambda1 = 1e6;
  config.lambda2 = 1e9;
  return config;
}

OptimizerConfig load_optimizer_config(const std::string& path,
                                      const OptimizerConfig& base) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config file");
  OptimizerConfig config = base;
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
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "schedule") {
        config.schedule = parse_schedule(val);
      } else if (key == "fd_epsilon_rot") {
        config.fd_epsilon_rot = std::stod(val);
      } else if (key == "fd_epsilon_trans") {
        config.fd_epsilon_trans = std::stod(val);
      } else if (key == "fd_epsilon_delay") {
        config.fd_epsilon_delay = std::stod(val);
      } else if (key == "initial_step") {
        config.initial_step = std::stod(val);
      } else if (key == "backtrack_factor") {
        config.backtrack_factor = std::stod(val);
      } else if (key == "max_backtracks") {
        config.max_backtracks = std::stoi(val);
      } else if (key == "lambda1") {
        config.lambda1 = std::stod(val);
      } else if (key == "lambda2") {
        config.lambda2 = std::stod(val);
      } else if (key == "sample_rate") {
        config.sample_rate = std::stod(val);
      } else if (key == "sample_seed") {
        config.sample_seed = std::stoull(val);
      } else if (key == "failure_loss_threshold") {
        config.failure_loss_threshold = std::stod(val);
      } else if (key == "threads") {
        config.threads = std::stoi(val);
      } else if (key == "optimize_delay") {
        config.optimize_delay = (val == "1" || val == "true");
      } else {
        throw ParseError(path, lineno, "unknown key '" + key + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError(path, lineno, "bad value for key '" + key + "'");
    }
  }
  config.validate();
  return config;
}

FrameBundle make_frame_bundle(SemanticPointCloud cloud_filtered,
                              SemanticMask mask, std::uint16_t mask_class_id,
                              const CameraIntrinsics& intrinsics,
                              std::optional<Eigen::Vector3d> velocity,
                              double sample_rate, std::uint64_t sample_seed,
                              int frame_id) {
  intrinsics.validate();
  FrameBundle bundle;
  bundle.index = NearestPixelIndex::build(mask, mask_class_id);
  bundle.sample = downsample_pixels(mask, mask_class_id, sample_rate, sample_seed);
  bundle.cloud = std::move(cloud_filtered);
  bundle.mask = std::move(mask);
  bundle.intrinsics = intrinsics;
  bundle.velocity = velocity;
  bundle.frame_id = frame_id;
  return bundle;
}

const char* to_string(CalibrationStatus status) {
  switch (status) {
    case CalibrationStatus::Converged:
      return "converged";
    case CalibrationStatus::MaxIterations:
      return "max_iterations";
    case CalibrationStatus::Failed:
      return "failed";
  }
  return "unknown";
}

double regularization(const CalibrationParams& params,
                      const CalibrationParams& anchor, double lambda1,
                      double lambda2) {
  const double t_term = (params.translation - anchor.translation).squaredNorm();
  const Eigen::Matrix3d relative = axis_angle_to_matrix(params.axis_angle) *
                                   axis_angle_to_matrix(anchor.axis_angle).transpose();
  const double r_term = (relative - Eigen::Matrix3d::Identity()).squaredNorm();
  return lambda1 * t_term + lambda2 * r_term;
}

double evaluate_objective(const CalibrationParams& params,
                          const FrameBundle& bundle,
                          const std::optional<CalibrationParams>& static_anchor,
                          const OptimizerConfig& config, double w) {
  return evaluate_frame(params, bundle, static_anchor, config, w, nullptr);
}

Eigen::VectorXd finite_difference_gradient(const ObjectiveFn& objective,
                                           const CalibrationParams& at,
                                           const OptimizerConfig& config,
                                           int dims) {
  if (dims != 6 && dims != 7) throw Error("gradient dims must be 6 or 7");
  const Vec7 center = pack(at);
  std::vector<double> probes(static_cast<std::size_t>(2 * dims));
  indexed_parallel_for(probes.size(), config.threads, [&](std::size_t k) {
    const int dim = static_cast<int>(k / 2);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    const double eps = dim < 3   ? config.fd_epsilon_rot
                       : dim < 6 ? config.fd_epsilon_trans
                                 : config.fd_epsilon_delay;
    Vec7 probe = center;
    probe[dim] += sign * eps;
    try {
      probes[k] = objective(unpack(probe));
    } catch (const Error&) {
      probes[k] = std::numeric_limits<double>::infinity();
    }
  });
  Eigen::VectorXd gradient(dims);
  for (int dim = 0; dim < dims; ++dim) {
    const double eps = dim < 3   ? config.fd_epsilon_rot
                       : dim < 6 ? config.fd_epsilon_trans
                                 : config.fd_epsilon_delay;
    gradient[dim] = (probes[2 * dim] - probes[2 * dim + 1]) / (2.0 * eps);
  }
  return gradient;
}

namespace {

CalibrationResult run_descent(const std::vector<FrameBundle>& bundles,
                              const std::optional<CalibrationParams>& anchor,
                              const CalibrationParams& init,
                              const OptimizerConfig& config, int dims) {
  config.validate();
  if (bundles.empty()) throw Error("no frame bundles supplied");

  CalibrationResult result;
  Vec7 theta = pack(init);
  const Vec7 scales = preconditioner_scales(config, anchor.has_value());
  const int total = config.schedule.total_iterations();
  result.trace.reserve(total);

  double best_loss = std::numeric_limits<double>::infinity();
  Vec7 best_theta = theta;
  std::size_t last_matched = 0;
  Vec7 previous_end = theta;

  for (int l = 0; l < total; ++l) {
    const double w = config.schedule.w_at(l);
    TotalObjective current = evaluate_total(unpack(theta), bundles, anchor, config, w);
    if (current.all_failed())
      throw AllFramesDegenerate("every frame bundle failed evaluation");

    const auto eval = [&](const Vec7& th) {
      return evaluate_total(unpack(th), bundles, anchor, config, w);
    };

    // Evaluate the whole backtracking ladder and keep the step with the
    // largest decrease, then expand while doubling keeps improving. Taking
    // the first marginal decrease at a long step instead would let the
    // noisy large-w phases jump across basins. Returns the accepted step
    // length, 0 when nothing improved.
    const auto line_search = [&](const Vec7& direction, double start_step,
                                 double min_factor) {
      double accepted_step = 0.0;
      TotalObjective accepted;
      accepted.loss = current.loss;
      const double min_step = start_step * min_factor;
      for (double step = start_step; step >= min_step;
           step *= config.backtrack_factor) {
        const TotalObjective trial = eval(theta + step * direction);
        if (!trial.all_failed() && trial.loss < accepted.loss) {
          accepted_step = step;
          accepted = trial;
        }
      }
      if (accepted_step == 0.0) return 0.0;
      for (int e = 0; e < 8; ++e) {
        const TotalObjective trial = eval(theta + 2.0 * accepted_step * direction);
        if (trial.all_failed() || trial.loss >= accepted.loss) break;
        accepted_step *= 2.0;
        accepted = trial;
      }
      theta += accepted_step * direction;
      current = accepted;
      return accepted_step;
    };

    const ObjectiveFn objective = [&](const CalibrationParams& p) {
      return evaluate_total(p, bundles, anchor, config, w).loss;
    };
    const Eigen::VectorXd gradient =
        finite_difference_gradient(objective, unpack(theta), config, dims);

    // Scaled steepest-descent direction.
    Eigen::VectorXd scaled = gradient;
    for (int d = 0; d < dims; ++d) scaled[d] *= scales[d];
    const double norm = scaled.norm();

    const Vec7 iteration_start = theta;
    if (std::isfinite(norm) && norm > 0.0) {
      Vec7 direction = Vec7::Zero();
      for (int d = 0; d < dims; ++d)
        direction[d] = -(scaled[d] / norm) * scales[d];
      line_search(direction, config.initial_step,
                  std::pow(config.backtrack_factor, config.max_backtracks));
    }

    // Pattern step along the displacement of the last two iterations; this
    // tracks the floor of the coupled rotation-translation valley that
    // steepest descent zig-zags across.
    if (l > 0) {
      const Vec7 pattern = theta - previous_end;
      if (pattern.norm() > 0.0) line_search(pattern, 2.0, 0.2);
    }
    previous_end = iteration_start;

    result.trace.push_back({l, w, current.loss, unpack(theta)});
    last_matched = current.matched;
    if (current.loss < best_loss) {
      best_loss = current.loss;
      best_theta = theta;
    }
  }

  result.params = unpack(best_theta);
  result.final_loss = result.trace.back().loss;
  result.matched_elements = last_matched;
  detect_failure(result, config);
  return result;
}

}  // namespace

CalibrationResult calibrate_static(const std::vector<FrameBundle>& bundles,
                                   const CalibrationParams& init,
                                   const OptimizerConfig& config) {
  CalibrationParams start = init;
  start.delay = 0.0;
  return run_descent(bundles, std::nullopt, start, config, 6);
}

CalibrationResult calibrate_joint(const std::vector<FrameBundle>& bundles,
                                  const CalibrationResult& static_result,
                                  double init_delay,
                                  const OptimizerConfig& config) {
  config.validate();
  if (bundles.empty()) throw Error("no frame bundles supplied");
  double speed_sum = 0.0;
  for (const auto& bundle : bundles) {
    if (!bundle.velocity)
      throw MissingVelocity("frame " + std::to_string(bundle.frame_id) +
                            " has no velocity estimate");
    speed_sum += bundle.velocity->norm();
  }
  const double mean_speed = speed_sum / static_cast<double>(bundles.size());
  if (mean_speed < 0.1) {
    // The delay only enters the objective multiplied by the velocity, so a
    // near-stationary platform cannot identify it.
    CalibrationResult result;
    result.params = static_result.params;
    result.params.delay = init_delay;
    result.status = CalibrationStatus::Failed;
    result.failure_reason = "zero excitation";
    return result;
  }
  CalibrationParams start = static_result.params;
  start.delay = init_delay;
  return run_descent(bundles, static_result.params, start, config,
                     config.optimize_delay ? 7 : 6);
}

CalibrationStatus detect_failure(CalibrationResult& result,
                                 const OptimizerConfig& config) {
  bool finite = std::isfinite(result.final_loss);
  for (const auto& entry : result.trace) {
    if (!std::isfinite(entry.loss) || !entry.params.axis_angle.allFinite() ||
        !entry.params.translation.allFinite() ||
        !std::isfinite(entry.params.delay))
      finite = false;
  }
  if (!finite) {
    result.status = CalibrationStatus::Failed;
    result.failure_reason = "non-finite value in optimization trace";
    return result.status;
  }
  const double per_element =
      result.final_loss /
      static_cast<double>(std::max<std::size_t>(1, result.matched_elements));
  if (per_element > config.failure_loss_threshold) {
    result.status = CalibrationStatus::Failed;
    result.failure_reason = "per-element loss above threshold";
    return result.status;
  }
  result.failure_reason.clear();
  // Converged when the final segment stopped improving.
  constexpr double kRelTol = 1e-6;
  const auto& trace = result.trace;
  if (result.final_loss == 0.0) {
    result.status = CalibrationStatus::Converged;
  } else if (trace.size() >= 2 &&
             trace[trace.size() - 2].w == trace.back().w) {
    const double previous = trace[trace.size() - 2].loss;
    const double relative = std::abs(previous - result.final_loss) /
                            std::max(1.0, std::abs(previous));
    result.status = relative < kRelTol ? CalibrationStatus::Converged
                                       : CalibrationStatus::MaxIterations;
  } else {
    result.status = CalibrationStatus::MaxIterations;
  }
  return result.status;
}

}  // namespace semcal
