// Direct-method localization against a chain of keyframes.
//
// Camera convention: x right, y down, z along the optical axis. Pixel (u, v)
// is (column, row). A pose "delta" maps keyframe coordinates into the
// current frame: P_frame = exp(delta) * P_keyframe.

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "warenav/errors.hpp"
#include "warenav/geometry.hpp"
#include "warenav/gray_image.hpp"

namespace warenav {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
    }
  }

  [[nodiscard]] Vec2 project(const Vec3& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
};

/// Gaussian belief over a pixel's inverse depth.
struct InverseDepthEstimate {
  double mean = 1.0;
  double variance = 1.0;
};

struct PixelCoord {
  int u = 0;
  int v = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct SelectedPixel {
  PixelCoord pixel;
  InverseDepthEstimate depth;
};

struct KeyFrame {
  GrayImage image;
  std::vector<SelectedPixel> pixels;
  /// Transform into the successor keyframe; empty for the newest keyframe,
  /// which is also the only one still fusing depth.
  std::optional<SE3Transform> to_next;
  /// Keyframe-to-world transform, the product of inverted links before it.
  SE3Transform world_pose;

  [[nodiscard]] bool frozen() const { return to_next.has_value(); }
};

struct FrontendConfig {
  double gradient_threshold = 0.05;
  double keyframe_distance = 0.1;
  double image_noise_variance = 1e-4;
  int lm_max_iters = 100;
  double lm_init_lambda = 1e-3;
  double convergence_tol = 1e-10;
  double init_depth_mean = 1.0;
  double init_depth_variance = 1.0;
  double depth_derivative_step = 1e-4;
  double min_overlap = 0.25;

  void validate() const {
    if (!(gradient_threshold > 0.0) || !(keyframe_distance > 0.0) ||
        !(image_noise_variance > 0.0) || lm_max_iters <= 0 ||
        !(lm_init_lambda > 0.0) || !(convergence_tol > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "frontend config values must be positive");
    }
  }
};

/// Interior pixels whose central-difference gradient magnitude exceeds the
/// threshold, in row-major order.
[[nodiscard]] inline std::vector<PixelCoord> select_pixels(const GrayImage& img,
                                                           double gradient_threshold) {
  std::vector<PixelCoord> out;
  for (int v = 1; v + 1 < img.height(); ++v) {
    for (int u = 1; u + 1 < img.width(); ++u) {
      if (img.gradient_magnitude(u, v) > gradient_threshold) out.push_back({u, v});
    }
  }
  return out;
}

[[nodiscard]] inline Vec3 backproject(const Vec2& p, double inverse_depth,
                                      const CameraIntrinsics& cam) {
  if (!(inverse_depth > 0.0)) {
    throw Error(ErrorCode::kInvalidDepth, "inverse depth must be positive");
  }
  const Vec3 ray((p.x() - cam.cx) / cam.fx, (p.y() - cam.cy) / cam.fy, 1.0);
  return ray / inverse_depth;
}

/// Backproject, move into the target frame, reproject. nullopt when the
/// point lands behind the camera; image bounds are the caller's concern.
[[nodiscard]] inline std::optional<Vec2> warp_pixel(const Vec2& p, double inverse_depth,
                                                    const SE3Transform& pose,
                                                    const CameraIntrinsics& cam) {
  const Vec3 moved = pose * backproject(p, inverse_depth, cam);
  if (!(moved.z() > 0.0)) return std::nullopt;
  return cam.project(moved);
}

[[nodiscard]] inline std::optional<Vec2> warp_pixel(const Vec2& p, double inverse_depth,
                                                    const Twist& delta,
                                                    const CameraIntrinsics& cam) {
  return warp_pixel(p, inverse_depth, exp_twist(delta), cam);
}

struct PhotometricResidual {
  std::vector<double> residuals;
  std::vector<double> weights;
  /// Index into KeyFrame::pixels for each in-view residual.
  std::vector<std::size_t> pixel_index;
  double energy = 0.0;

  [[nodiscard]] std::size_t in_view() const { return residuals.size(); }
};

namespace detail {

struct ResidualEvaluation {
  PhotometricResidual residual;
  // Rows of d r / d epsilon for a left perturbation exp(epsilon) * pose.
  std::vector<Vec6> jacobian;
};

inline std::optional<double> warped_intensity(const GrayImage& frame, const Vec2& p,
                                              double inverse_depth, const SE3Transform& pose,
                                              const CameraIntrinsics& cam) {
  if (!(inverse_depth > 0.0)) return std::nullopt;
  const auto q = warp_pixel(p, inverse_depth, pose, cam);
  if (!q) return std::nullopt;
  return frame.sample(q->x(), q->y());
}

inline ResidualEvaluation evaluate_residuals(const KeyFrame& kf, const GrayImage& frame,
                                             const SE3Transform& pose,
                                             const CameraIntrinsics& cam,
                                             const FrontendConfig& cfg,
                                             bool with_jacobian) {
  ResidualEvaluation out;
  auto& res = out.residual;
  const double h = cfg.depth_derivative_step;
  for (std::size_t i = 0; i < kf.pixels.size(); ++i) {
    const auto& sp = kf.pixels[i];
    const Vec2 p(sp.pixel.u, sp.pixel.v);
    const double mu = sp.depth.mean;
    const Vec3 moved = pose * backproject(p, mu, cam);
    if (!(moved.z() > 0.0)) continue;
    const Vec2 q = cam.project(moved);
    const auto value = frame.sample(q.x(), q.y());
    if (!value) continue;
    const double reference = kf.image.at(sp.pixel.u, sp.pixel.v);
    const double r = reference - *value;

    // d r / d mu by central difference, one-sided where a side is unusable.
    double dr_dmu = 0.0;
    const auto plus = warped_intensity(frame, p, mu + h, pose, cam);
    const auto minus = warped_intensity(frame, p, mu - h, pose, cam);
    if (plus && minus) {
      dr_dmu = -(*plus - *minus) / (2.0 * h);
    } else if (plus) {
      dr_dmu = -(*plus - *value) / h;
    } else if (minus) {
      dr_dmu = -(*value - *minus) / h;
    }
    const double weight =
        1.0 / (2.0 * cfg.image_noise_variance + dr_dmu * dr_dmu * sp.depth.variance);

    res.residuals.push_back(r);
    res.weights.push_back(weight);
    res.pixel_index.push_back(i);
    res.energy += weight * r * r;

    if (with_jacobian) {
      const auto grad = frame.sample_gradient(q.x(), q.y());
      const double iz = 1.0 / moved.z();
      const double x = moved.x() * iz;
      const double y = moved.y() * iz;
      // d(pixel)/d(point) * d(point)/d(epsilon), with d(point)/d(epsilon) = [I | -[P]x].
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << cam.fx * iz, 0.0, -cam.fx * x * iz,  //
          0.0, cam.fy * iz, -cam.fy * y * iz;
      Eigen::Matrix<double, 3, 6> dpoint;
      dpoint << Mat3::Identity(), -skew(moved);
      const Eigen::RowVector2d g(grad->first, grad->second);
      out.jacobian.push_back(-(g * dproj * dpoint).transpose());
    }
  }
  return out;
}

}  // namespace detail

/// Weighted photometric error of the keyframe's selected pixels warped into
/// the frame. Pixels that leave the image or fall behind the camera are
/// dropped from the sum.
[[nodiscard]] inline PhotometricResidual photometric_residual(
    const KeyFrame& kf, const GrayImage& frame, const Twist& delta,
    const CameraIntrinsics& cam, const FrontendConfig& cfg) {
  auto eval =
      detail::evaluate_residuals(kf, frame, exp_twist(delta), cam, cfg, /*with_jacobian=*/false);
  if (eval.residual.in_view() == 0) {
    throw Error(ErrorCode::kNoOverlap, "no keyframe pixel is visible in the frame");
  }
  return std::move(eval.residual);
}

struct TrackResult {
  Twist twist;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
  /// Energy after initialization and after every accepted step.
  std::vector<double> energy_log;
};

/// Weighted Levenberg-Marquardt alignment of a frame to a keyframe.
///
/// Steps are applied on the left, pose <- exp(eps) * pose; lambda is divided
/// by 10 on an accepted step and multiplied by 10 on a rejected one. The
/// returned twist is log() of the final pose, so the energy at the result is
/// never above the energy at delta_init.
[[nodiscard]] inline TrackResult track_frame(const KeyFrame& kf, const GrayImage& frame,
                                             const Twist& delta_init,
                                             const CameraIntrinsics& cam,
                                             const FrontendConfig& cfg) {
  cfg.validate();
  if (kf.pixels.empty()) {
    throw Error(ErrorCode::kTrackingLost, "keyframe has no selected pixels");
  }
  const auto min_in_view =
      static_cast<std::size_t>(std::ceil(cfg.min_overlap * static_cast<double>(kf.pixels.size())));

  SE3Transform pose = exp_twist(delta_init);
  auto current = detail::evaluate_residuals(kf, frame, pose, cam, cfg, true);
  if (current.residual.in_view() < std::max<std::size_t>(min_in_view, 1)) {
    throw Error(ErrorCode::kTrackingLost, "initial overlap below minimum");
  }

  TrackResult result;
  result.twist = delta_init;
  result.initial_energy = current.residual.energy;
  result.energy_log.push_back(current.residual.energy);

  double lambda = cfg.lm_init_lambda;
  bool moved = false;
  for (int iter = 0; iter < cfg.lm_max_iters; ++iter) {
    result.iterations = iter + 1;
    if (current.residual.energy == 0.0) break;

    Mat6 hessian = Mat6::Zero();
    Vec6 gradient = Vec6::Zero();
    const auto& res = current.residual;
    for (std::size_t k = 0; k < res.in_view(); ++k) {
      const Vec6& j = current.jacobian[k];
      hessian.noalias() += res.weights[k] * j * j.transpose();
      gradient.noalias() += res.weights[k] * res.residuals[k] * j;
    }

    Mat6 damped = hessian;
    damped.diagonal() += lambda * hessian.diagonal().cwiseMax(1e-12);
    const Vec6 step = -damped.ldlt().solve(gradient);
    if (!step.allFinite() || step.norm() < cfg.convergence_tol) break;

    const SE3Transform candidate_pose = exp_twist(Twist(step)) * pose;
    auto candidate = detail::evaluate_residuals(kf, frame, candidate_pose, cam, cfg, true);
    if (candidate.residual.in_view() < std::max<std::size_t>(min_in_view, 1)) {
      throw Error(ErrorCode::kTrackingLost, "overlap lost during alignment");
    }
    if (candidate.residual.energy < current.residual.energy) {
      pose = candidate_pose;
      current = std::move(candidate);
      lambda /= 10.0;
      moved = true;
      ++result.accepted_steps;
      result.energy_log.push_back(current.residual.energy);
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }

  if (moved) result.twist = log_transform(pose);
  result.final_energy = current.residual.energy;
  return result;
}

/// Product of two Gaussian inverse-depth beliefs.
[[nodiscard]] inline InverseDepthEstimate fuse_inverse_depth(const InverseDepthEstimate& prior,
                                                             const InverseDepthEstimate& obs) {
  if (!(prior.variance > 0.0) || !(obs.variance > 0.0)) {
    throw Error(ErrorCode::kInvalidEstimate, "variances must be positive");
  }
  const double sum = prior.variance + obs.variance;
  return {(prior.variance * obs.mean + obs.variance * prior.mean) / sum,
          prior.variance * obs.variance / sum};
}

/// Source of inverse-depth observations for keyframe pixels.
class DepthObserver {
 public:
  virtual ~DepthObserver() = default;

  /// Observation for kf.pixels[index] given the keyframe-to-frame transform,
  /// or nullopt when the pixel cannot be observed.
  virtual std::optional<InverseDepthEstimate> observe(const KeyFrame& kf, std::size_t index,
                                                      const SE3Transform& kf_to_frame) = 0;
};

/// Fuses one round of observations into the keyframe. Frozen keyframes are
/// left untouched. Returns the number of fused pixels.
inline std::size_t fuse_keyframe_depths(KeyFrame& kf, const SE3Transform& kf_to_frame,
                                        DepthObserver& observer) {
  if (kf.frozen()) return 0;
  std::size_t fused = 0;
  for (std::size_t i = 0; i < kf.pixels.size(); ++i) {
    if (auto obs = observer.observe(kf, i, kf_to_frame)) {
      kf.pixels[i].depth = fuse_inverse_depth(kf.pixels[i].depth, *obs);
      ++fused;
    }
  }
  return fused;
}

[[nodiscard]] inline KeyFrame make_keyframe(const GrayImage& image, const SE3Transform& world_pose,
                                            const FrontendConfig& cfg) {
  KeyFrame kf;
  kf.image = image;
  kf.world_pose = world_pose;
  for (const auto& p : select_pixels(image, cfg.gradient_threshold)) {
    kf.pixels.push_back({p, {cfg.init_depth_mean, cfg.init_depth_variance}});
  }
  return kf;
}

/// Starts a new keyframe from `frame` once the tracked translation reaches
/// keyframe_distance (inclusive). Returns true when the chain grew.
inline bool advance_keyframe(std::vector<KeyFrame>& chain, const Twist& current_delta,
                             const GrayImage& frame, const FrontendConfig& cfg) {
  if (chain.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "keyframe chain is empty");
  }
  const SE3Transform link = exp_twist(current_delta);
  if (link.translation.norm() < cfg.keyframe_distance) return false;
  KeyFrame& newest = chain.back();
  newest.to_next = link;
  const SE3Transform world = newest.world_pose * invert(link);
  chain.push_back(make_keyframe(frame, world, cfg));
  return true;
}

/// Keyframe-chain localization: tracks each incoming frame against the
/// newest keyframe, fuses depth observations and spawns keyframes.
class DirectOdometry {
 public:
  DirectOdometry(CameraIntrinsics cam, FrontendConfig cfg) : cam_(cam), cfg_(cfg) {
    cam_.validate();
    cfg_.validate();
  }

  void initialize(const GrayImage& first_frame, DepthObserver& observer) {
    chain_.clear();
    chain_.push_back(make_keyframe(first_frame, SE3Transform::identity(), cfg_));
    fuse_keyframe_depths(chain_.back(), SE3Transform::identity(), observer);
    delta_ = Twist{};
  }

  /// Returns the frame-to-world pose after processing.
  SE3Transform process(const GrayImage& frame, DepthObserver& observer) {
    if (chain_.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "odometry not initialized");
    }
    const auto tracked = track_frame(chain_.back(), frame, delta_, cam_, cfg_);
    delta_ = tracked.twist;
    fuse_keyframe_depths(chain_.back(), exp_twist(delta_), observer);
    if (advance_keyframe(chain_, delta_, frame, cfg_)) {
      delta_ = Twist{};
      fuse_keyframe_depths(chain_.back(), SE3Transform::identity(), observer);
    }
    return current_world_pose();
  }

  [[nodiscard]] SE3Transform current_world_pose() const {
    return chain_.back().world_pose * invert(exp_twist(delta_));
  }

  [[nodiscard]] const std::vector<KeyFrame>& chain() const { return chain_; }
  [[nodiscard]] const Twist& delta() const { return delta_; }
  [[nodiscard]] const CameraIntrinsics& camera() const { return cam_; }

 private:
  CameraIntrinsics cam_;
  FrontendConfig cfg_;
  std::vector<KeyFrame> chain_;
  Twist delta_;
};

}  // namespace warenav
