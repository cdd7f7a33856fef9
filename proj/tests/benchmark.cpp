// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

// Trainer properties on the oscillating synthetic scene at the default
// configuration. One two-chunk run is shared by every test.

#include <algorithm>
#include <cstdio>
#include <memory>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "gs4d/datasets.hpp"
#include "gs4d/image.hpp"
#include "gs4d/metrics.hpp"
#include "gs4d/trainer.hpp"

namespace gs4d {
namespace {

struct BenchRun {
  SynthScene scene;
  TrainConfig train;
  StreamResult result;
  std::vector<double> trace;
};

class Benchmark : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    run_ = std::make_unique<BenchRun>();
    SynthOptions so;
    so.motion = Motion::Oscillate;
    so.n_gaussians = 200;
    so.n_cameras = 6;
    so.timesteps = 100;
    so.image_size = 96;
    run_->scene = synth_scene(so);
    TrainHooks hooks;
    hooks.loss_trace = &run_->trace;
    run_->result = train_stream(run_->scene.dataset, ModelConfig{}, run_->train, 2, hooks);
  }
  static void TearDownTestSuite() { run_.reset(); }

  static std::unique_ptr<BenchRun> run_;
};

std::unique_ptr<BenchRun> Benchmark::run_;

// The 100-iteration moving average of the training loss over the first 2000
// base iterations never rises more than 5% above its running minimum.
TEST_F(Benchmark, BaseLossTrend) {
  constexpr int kWindow = 100, kHorizon = 2000;
  const auto& trace = run_->trace;
  ASSERT_GE(run_->train.base_iterations, kHorizon);
  ASSERT_GE(trace.size(), static_cast<std::size_t>(kHorizon));
  double sum = std::accumulate(trace.begin(), trace.begin() + kWindow, 0.0);
  double best = sum / kWindow, worst_rise = 0.0;
  int worst_at = kWindow - 1, over = 0;
  for (int i = kWindow; i < kHorizon; ++i) {
    sum += trace[i] - trace[i - kWindow];
    const double ma = sum / kWindow;
    best = std::min(best, ma);
    const double rise = ma / best - 1.0;
    over += rise > 0.05;
    if (rise > worst_rise) worst_rise = rise, worst_at = i;
  }
  std::printf("moving average: worst rise %.1f%% at iteration %d, %d of %d iterations above 5%%\n",
              100.0 * worst_rise, worst_at, over, kHorizon - kWindow);
  EXPECT_LE(worst_rise, 0.05);
}

// Delta training cuts the chunk 1 loss over the training views by at least
// 20% against the unadapted state.
TEST_F(Benchmark, DeltaCutsChunkLoss) {
  const auto& ds = run_->scene.dataset;
  const ViewSplit split = split_train_eval(ds, ds.held_out);
  const FrameRange chunk1 = chunk_frames(ds.timesteps, run_->train.chunk_length, 1);
  double before = 0.0, after = 0.0;
  for (const ViewRef& v : split.train) {
    if (v.frame < static_cast<int>(chunk1.start)) continue;
    const Camera& cam = ds.cameras[v.camera];
    const Image gt = to_linear(ds.frames[v.camera][v.frame]);
    const double t = chunk_time(v.frame, chunk1);
    const RenderSettings rs = RenderSettings::for_camera(cam);
    const double w = run_->train.w_ssim;
    before += photometric_loss(render_model(run_->result.states[0], cam, t, rs).color, gt, w).value;
    after += photometric_loss(render_model(run_->result.states[1], cam, t, rs).color, gt, w).value;
  }
  std::printf("chunk 1 training loss %.5f -> %.5f\n", before, after);
  EXPECT_LE(after, 0.8 * before);
}

}  // namespace
}  // namespace gs4d
