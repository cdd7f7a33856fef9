// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gs4d/datasets.hpp"
#include "gs4d/deform_field.hpp"
#include "gs4d/lowrank.hpp"
#include "gs4d/rasterizer.hpp"
#include "gs4d/stream_codec.hpp"

namespace gs4d {

struct LearningRates {
  double center = 1.6e-4;  // decays exponentially to center_final
  double center_final = 1.6e-6;
  double rotation = 1e-3;
  double scale = 5e-3;
  double opacity = 5e-2;
  double sh0 = 2.5e-3;
  double sh_rest = 1.25e-4;
  double embedding = 1e-3;
  double plane = 1.6e-3;  // decays to plane_final
  double plane_final = 1.6e-4;
  double decoder = 1.6e-4;  // decays to decoder_final
  double decoder_final = 1.6e-5;
  double factor = 1e-2;  // decays to factor_final
  double factor_final = 1e-3;
};

struct TrainConfig {
  int chunk_length = 50;
  int base_iterations = 5000;
  int delta_iterations = 2000;
  LearningRates lr;
  double w_ssim = 0.2;

  int densify_from = 500;
  int densify_until = 3000;
  int densify_interval = 100;
  /// Threshold on the mean view-space gradient norm, in NDC units. Small
  /// images give much larger per-Gaussian gradients than megapixel ones, and
  /// motion the deformation field has not fit yet also reads as gradient.
  double densify_grad_threshold = 5e-2;
  /// Gaussians larger than this fraction of the camera extent split, smaller ones clone.
  double percent_dense = 0.01;
  double prune_opacity = 0.005;
  int max_gaussians = 20000;

  /// Active SH degree grows by one every this many base iterations.
  int sh_increase_interval = 1000;
  int rank = 3;
  Precision factor_precision = Precision::F32;
  /// Used when the dataset carries no init points.
  int random_init_points = 1000;
  std::uint64_t seed = 0;
  int log_interval = 100;

  void validate() const;
};

struct MetricsRecord {
  int chunk = 0;
  int iteration = 0;
  double loss = 0.0;
  double psnr = 0.0;
  double dssim = 0.0;
  double wall_ms = 0.0;
};

struct TrainHooks {
  std::function<void(const MetricsRecord&)> on_metrics;
  /// Receives the loss of every iteration when non-null.
  std::vector<double>* loss_trace = nullptr;
};

/// Frames [start, start + count) of chunk k; the last chunk may be short.
FrameRange chunk_frames(int timesteps, int chunk_length, int k);
int chunk_count(int timesteps, int chunk_length);

/// Normalized time of `frame` within `range`, in [0, 1].
double chunk_time(int frame, FrameRange range);

/// Gaussians from the dataset's init points (or random ones), planes
/// uniform in [0.1, 0.5], He-uniform hidden layers and zero output heads.
ModelState initialize_model(const MultiViewDataset& dataset, const ModelConfig& config,
                            const TrainConfig& train);

/// Accumulated screen-space gradient statistics for density control.
struct DensifyStats {
  std::vector<double> grad_sum;
  std::vector<int> visible_count;

  explicit DensifyStats(std::size_t n = 0) : grad_sum(n, 0.0), visible_count(n, 0) {}
  void reset(std::size_t n) { *this = DensifyStats(n); }
};

/// Clones small high-gradient Gaussians, splits large ones in two (scale / 1.6,
/// positions sampled from the parent) and prunes low opacity. Returns, for
/// every Gaussian of the new state, its source index or -1 if it is new.
std::vector<int> densify_and_prune(ModelState& state, const DensifyStats& stats,
                                   const TrainConfig& config, double extent,
                                   std::mt19937_64& rng);

/// Renders the model at chunk-normalized time t.
RenderOutput render_model(const ModelState& state, const Camera& camera, double t,
                          const RenderSettings& settings);

ModelState train_base_chunk(ModelState state, const MultiViewDataset& dataset,
                            std::span<const ViewRef> views, FrameRange frames,
                            const TrainConfig& config, const TrainHooks& hooks = {});

/// Trains one rank-lambda factor per plane channel on top of `previous`.
/// Nothing in `previous` changes.
std::vector<LowRankFactor> train_delta_chunk(const ModelState& previous,
                                             const MultiViewDataset& dataset,
                                             std::span<const ViewRef> views,
                                             FrameRange frames, int chunk_index,
                                             const TrainConfig& config,
                                             const TrainHooks& hooks = {});

struct ViewMetrics {
  std::string camera;
  int frame = 0;
  double psnr = 0.0;
  double dssim = 0.0;
};

struct EvalReport {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0.0;
  double mean_dssim = 0.0;
};

/// Metrics of 8-bit quantized renders against the stored frames, over the
/// views whose frame lies in `frames`.
EvalReport evaluate(const ModelState& state, const MultiViewDataset& dataset,
                    std::span<const ViewRef> views, FrameRange frames);

struct ChunkSummary {
  int chunk = 0;
  FrameRange frames;
  int iterations = 0;
  std::size_t gaussians = 0;
  std::size_t bytes = 0;
  double final_loss = 0.0;
  double wall_ms = 0.0;
  /// Held-out metrics of the previous state on this chunk (delta chunks only).
  std::optional<EvalReport> before;
  std::optional<EvalReport> after;
};

struct StreamResult {
  Bytes stream;
  /// state k exactly as a receiver reconstructs it from the stream.
  std::vector<ModelState> states;
  std::vector<ChunkSummary> chunks;
};

/// Base chunk then delta chunks, appended to one stream. max_chunks <= 0
/// trains every chunk of the dataset.
StreamResult train_stream(const MultiViewDataset& dataset, const ModelConfig& model,
                          const TrainConfig& config, int max_chunks,
                          const TrainHooks& hooks = {});

}  // namespace gs4d
