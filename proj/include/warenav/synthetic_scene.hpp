// Ray-cast renderer for a textured box room, used to produce image
// sequences with exact ground-truth poses and depths.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "warenav/errors.hpp"
#include "warenav/geometry.hpp"
#include "warenav/gray_image.hpp"
#include "warenav/visual_frontend.hpp"

namespace warenav {

struct TextureWave {
  Vec3 wave_vector = Vec3::Zero();
  double phase = 0.0;
  double amplitude = 0.0;
};

/// Camera inside an axis-aligned box whose walls carry a smooth solid
/// texture 0.5 + sum_k a_k sin(w_k . P + phi_k).
struct BoxRoom {
  Vec3 min_corner{-1.0, -0.75, -1.0};
  Vec3 max_corner{1.0, 0.75, 1.5};
  std::vector<TextureWave> texture;

  [[nodiscard]] double intensity(const Vec3& p) const {
    double value = 0.5;
    for (const auto& w : texture) value += w.amplitude * std::sin(w.wave_vector.dot(p) + w.phase);
    return value;
  }

  /// Distance along `dir` from an interior `origin` to the wall it exits by.
  [[nodiscard]] std::optional<double> exit_distance(const Vec3& origin, const Vec3& dir) const {
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (dir[a] > 0.0) {
        best = std::min(best, (max_corner[a] - origin[a]) / dir[a]);
      } else if (dir[a] < 0.0) {
        best = std::min(best, (min_corner[a] - origin[a]) / dir[a]);
      }
    }
    if (!(best > 0.0) || !std::isfinite(best)) return std::nullopt;
    return best;
  }
};

/// Random texture whose wavelengths (in scene units) lie in the given range
/// and whose amplitudes sum to `total_amplitude` (< 0.5 keeps it in [0, 1]).
[[nodiscard]] inline std::vector<TextureWave> random_texture(std::uint64_t seed, int waves,
                                                             double min_wavelength,
                                                             double max_wavelength,
                                                             double total_amplitude = 0.45) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<TextureWave> out;
  for (int i = 0; i < waves; ++i) {
    Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
    dir.normalize();
    const double wavelength = min_wavelength + (max_wavelength - min_wavelength) * unit(rng);
    out.push_back({dir * (2.0 * std::numbers::pi / wavelength),
                   2.0 * std::numbers::pi * unit(rng), total_amplitude / waves});
  }
  return out;
}

struct SceneSpec {
  int width = 160;
  int height = 120;
  CameraIntrinsics camera{120.0, 120.0, 79.5, 59.5};
  BoxRoom room;
  /// Camera-to-world pose of every frame.
  std::vector<SE3Transform> trajectory;
};

struct SyntheticSequence {
  std::vector<GrayImage> frames;
  std::vector<SE3Transform> poses;
  /// Per-frame inverse depth, row-major, same layout as the image.
  std::vector<std::vector<double>> inverse_depths;
};

/// Inverse depth seen through pixel (u, v) by a camera at `camera_to_world`.
[[nodiscard]] inline std::optional<double> scene_inverse_depth(const BoxRoom& room,
                                                               const CameraIntrinsics& cam,
                                                               const SE3Transform& camera_to_world,
                                                               double u, double v) {
  const Vec3 ray_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
  const Vec3 dir = camera_to_world.rotation * ray_cam;
  // Camera-frame depth equals the ray parameter because ray_cam.z() == 1.
  const auto t = room.exit_distance(camera_to_world.translation, dir);
  if (!t) return std::nullopt;
  return 1.0 / *t;
}

[[nodiscard]] inline GrayImage render_view(const BoxRoom& room, const CameraIntrinsics& cam,
                                           int width, int height,
                                           const SE3Transform& camera_to_world,
                                           std::vector<double>* inverse_depth = nullptr) {
  GrayImage img(width, height);
  if (inverse_depth) inverse_depth->assign(static_cast<std::size_t>(width) * height, 0.0);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const Vec3 ray_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      const Vec3 dir = camera_to_world.rotation * ray_cam;
      const auto t = room.exit_distance(camera_to_world.translation, dir);
      if (!t) throw Error(ErrorCode::kInvalidArgument, "camera is outside the room");
      img.at(u, v) = room.intensity(camera_to_world.translation + *t * dir);
      if (inverse_depth) (*inverse_depth)[static_cast<std::size_t>(v) * width + u] = 1.0 / *t;
    }
  }
  return img;
}

[[nodiscard]] inline SyntheticSequence generate_synthetic_scene(const SceneSpec& spec) {
  spec.camera.validate();
  if (spec.room.texture.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "scene texture has no variance");
  }
  SyntheticSequence seq;
  for (const auto& pose : spec.trajectory) {
    std::vector<double> depth;
    seq.frames.push_back(render_view(spec.room, spec.camera, spec.width, spec.height, pose, &depth));
    seq.poses.push_back(pose);
    seq.inverse_depths.push_back(std::move(depth));
  }
  return seq;
}

/// Depth observations from the scene geometry plus Gaussian noise, standing
/// in for epipolar stereo matching.
class GroundTruthDepthObserver final : public DepthObserver {
 public:
  GroundTruthDepthObserver(BoxRoom room, CameraIntrinsics cam, double noise_std,
                           std::uint64_t seed)
      : room_(std::move(room)), cam_(cam), noise_std_(noise_std), rng_(seed) {}

  std::optional<InverseDepthEstimate> observe(const KeyFrame& kf, std::size_t index,
                                              const SE3Transform& /*kf_to_frame*/) override {
    const auto& px = kf.pixels[index].pixel;
    const auto truth = scene_inverse_depth(room_, cam_, kf.world_pose, px.u, px.v);
    if (!truth) return std::nullopt;
    const double variance = std::max(noise_std_ * noise_std_, 1e-12);
    const double noisy = *truth + (noise_std_ > 0.0 ? noise_std_ * gauss_(rng_) : 0.0);
    if (!(noisy > 0.0)) return std::nullopt;
    return InverseDepthEstimate{noisy, variance};
  }

 private:
  BoxRoom room_;
  CameraIntrinsics cam_;
  double noise_std_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

/// A keyframe rendered at the origin with exact depths, and the frame seen
/// after the camera moves by `truth` (frame pose = exp(truth) * keyframe).
struct TrackingTrial {
  KeyFrame keyframe;
  GrayImage frame;
  Twist truth;
};

[[nodiscard]] inline TrackingTrial make_tracking_trial(const SceneSpec& spec, const Twist& truth,
                                                       const FrontendConfig& cfg,
                                                       double depth_variance = 1e-6) {
  std::vector<double> depth;
  const GrayImage key =
      render_view(spec.room, spec.camera, spec.width, spec.height, SE3Transform::identity(), &depth);
  TrackingTrial trial{make_keyframe(key, SE3Transform::identity(), cfg),
                      render_view(spec.room, spec.camera, spec.width, spec.height,
                                  invert(exp_twist(truth))),
                      truth};
  for (auto& p : trial.keyframe.pixels) {
    p.depth = {depth[static_cast<std::size_t>(p.pixel.v) * spec.width + p.pixel.u], depth_variance};
  }
  return trial;
}

/// Scene used by the tracking tests: a box room with a fine random texture.
[[nodiscard]] inline SceneSpec default_tracking_scene(std::uint64_t texture_seed = 7) {
  SceneSpec spec;
  spec.room.texture = random_texture(texture_seed, 12, 0.15, 0.6);
  return spec;
}

}  // namespace warenav
