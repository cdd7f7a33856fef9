// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gs4d/gaussian.hpp"
#include "gs4d/image.hpp"

namespace gs4d {

/// A colored point of the sparse initialization cloud.
struct InitPoint {
  Vec3 position = Vec3::Zero();
  Vec3 color = Vec3::Zero();  // linear [0, 1]
};

/// Synchronized multi-camera video, fully resident in memory.
struct MultiViewDataset {
  std::vector<std::string> camera_ids;
  std::vector<Camera> cameras;
  std::vector<std::vector<ImageU8>> frames;  // [camera][timestep]
  int timesteps = 0;
  std::vector<std::string> held_out;
  std::vector<InitPoint> init_points;

  /// Index of a camera id, or -1.
  int camera_index(const std::string& id) const;
  void validate() const;
};

/// Reads `poses.json`, `cam_<id>/frame_%05d.png` and the optional
/// `points.json` under `root`.
MultiViewDataset load_multiview(const std::filesystem::path& root);

/// Writes the on-disk layout load_multiview() reads.
void write_multiview(const MultiViewDataset& dataset, const std::filesystem::path& root);

enum class Motion { Static, Oscillate, Drift };

Motion parse_motion(const std::string& name);
std::string to_string(Motion motion);

struct SynthOptions {
  std::uint64_t seed = 0;
  int n_gaussians = 200;
  Motion motion = Motion::Oscillate;
  int n_cameras = 6;
  int timesteps = 100;
  int image_size = 96;
  double max_amplitude = 0.1;
  double ring_radius = 3.0;
  double ring_height = 0.8;
  double fov_degrees = 40.0;
  /// Std-dev of the noise added to true centers for the init cloud.
  double point_jitter = 0.01;
};

/// Ground-truth trajectories plus the dataset rendered from them.
struct SynthScene {
  std::vector<GaussianPrimitive> canonical;
  std::vector<Vec3> displacement;  // per Gaussian: amplitude * axis, or drift velocity
  Motion motion = Motion::Static;
  int timesteps = 1;
  MultiViewDataset dataset;

  std::vector<GaussianPrimitive> at_frame(int frame) const;
};

SynthScene synth_scene(const SynthOptions& options);

/// Renders ground truth exactly as synth_scene does.
ImageU8 render_ground_truth(std::span<const GaussianPrimitive> gaussians, const Camera& camera);

/// Camera on a ring around the origin, looking at it (OpenCV axes).
Camera look_at_camera(const Vec3& position, const Vec3& target, int image_size,
                      double fov_degrees);

struct ViewRef {
  int camera = 0;
  int frame = 0;
};

struct ViewSplit {
  std::vector<ViewRef> train;
  std::vector<ViewRef> eval;
  bool eval_empty_warning = false;
};

/// Eval = every frame of the held-out cameras; train = the rest.
ViewSplit split_train_eval(const MultiViewDataset& dataset,
                           std::span<const std::string> held_out);

}  // namespace gs4d
