// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "gs4d/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "gs4d/adam.hpp"
#include "gs4d/error.hpp"
#include "gs4d/metrics.hpp"

namespace gs4d {

namespace {

constexpr double kShC0 = 0.28209479177387814;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Log-linear interpolation from a to b over `total` steps.
double decayed(double a, double b, int it, int total) {
  if (total <= 1) return a;
  const double s = std::clamp(static_cast<double>(it) / (total - 1), 0.0, 1.0);
  return std::exp(std::log(a) * (1.0 - s) + std::log(b) * s);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<ViewRef> views_in(std::span<const ViewRef> views, FrameRange frames) {
  std::vector<ViewRef> out;
  for (const auto& v : views) {
    if (v.frame >= static_cast<int>(frames.start) &&
        v.frame < static_cast<int>(frames.start + frames.count)) {
      out.push_back(v);
    }
  }
  return out;
}

// Epoch-wise shuffled view order.
class ViewSampler {
 public:
  ViewSampler(std::vector<ViewRef> views, std::uint64_t seed)
      : views_(std::move(views)), rng_(seed) {}

  const ViewRef& next() {
    if (pos_ == order_.size()) {
      order_.resize(views_.size());
      for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    return views_[order_[pos_++]];
  }

 private:
  std::vector<ViewRef> views_;
  std::mt19937_64 rng_;
  std::vector<size_t> order_;
  size_t pos_ = 0;
};

// Radius of the training cameras around their centroid, padded by 10%.
double camera_extent(const MultiViewDataset& ds, std::span<const ViewRef> views) {
  std::vector<Vec3> centers;
  std::vector<bool> seen(ds.cameras.size(), false);
  for (const auto& v : views) {
    if (seen[v.camera]) continue;
    seen[v.camera] = true;
    centers.push_back(ds.cameras[v.camera].center());
  }
  Vec3 mean = Vec3::Zero();
  for (const auto& c : centers) mean += c;
  mean /= static_cast<double>(centers.size());
  double radius = 0.0;
  for (const auto& c : centers) radius = std::max(radius, (c - mean).norm());
  return 1.1 * std::max(radius, 1e-3);
}

struct StepOutput {
  double loss = 0.0;
  RenderOutput render;
  Image gt;
  std::vector<GaussianGrad> raster_grads;
  DeformGrads grads;
};

StepOutput forward_backward(const ModelState& state, const MultiViewDataset& ds,
                            const ViewRef& view, FrameRange frames, int sh_degree,
                            double w_ssim, const DeformGradOptions& options) {
  StepOutput s;
  const Camera& cam = ds.cameras[view.camera];
  DeformCache cache;
  const auto deformed = deform_gaussians(state, chunk_time(view.frame, frames), &cache);
  RenderSettings settings = RenderSettings::for_camera(cam);
  settings.sh_degree = sh_degree;
  s.render = rasterize(deformed, cam, settings);
  s.gt = to_linear(ds.frames[view.camera][view.frame]);
  LossValue loss = photometric_loss(s.render.color, s.gt, w_ssim);
  s.loss = loss.value;
  s.raster_grads = rasterize_backward(deformed, cam, settings, s.render, loss.grad);
  s.grads = deform_gradients(state, cache, s.raster_grads, options);
  return s;
}

void emit(const TrainHooks& hooks, int chunk, int it, const StepOutput& s, Clock::time_point start) {
  if (!hooks.on_metrics) return;
  MetricsRecord r;
  r.chunk = chunk;
  r.iteration = it;
  r.loss = s.loss;
  r.psnr = psnr(s.render.color, s.gt);
  r.dssim = dssim(s.render.color, s.gt);
  r.wall_ms = elapsed_ms(start);
  hooks.on_metrics(r);
}

// Adam states for the per-Gaussian groups.
struct GaussianOptim {
  Adam center, rotation, scale, opacity, sh0, sh_rest, embedding;
  int rest = 0;  // SH triples beyond degree 0
  int embed = 0;

  GaussianOptim(size_t n, int sh_count, int embed_dim)
      : center(n * 3), rotation(n * 4), scale(n * 3), opacity(n), sh0(n * 3),
        sh_rest(n * 3 * (sh_count - 1)), embedding(n * embed_dim), rest(sh_count - 1),
        embed(embed_dim) {}

  void remap(std::span<const int> source) {
    center.remap(source, 3);
    rotation.remap(source, 4);
    scale.remap(source, 3);
    opacity.remap(source, 1);
    sh0.remap(source, 3);
    sh_rest.remap(source, 3 * rest);
    embedding.remap(source, embed);
  }
};

template <class Param, class Grad>
void step_group(Adam& opt, size_t n, size_t stride, double lr, Param param, Grad grad) {
  if (stride == 0 || n == 0) return;
  std::vector<double> p(n * stride), g(n * stride);
  for (size_t i = 0; i < n; ++i) {
    const double* src = param(i);
    const double* d = grad(i);
    std::copy(src, src + stride, p.begin() + i * stride);
    std::copy(d, d + stride, g.begin() + i * stride);
  }
  opt.step(p, g, lr);
  for (size_t i = 0; i < n; ++i) std::copy(p.begin() + i * stride, p.begin() + (i + 1) * stride, param(i));
}

void step_gaussians(GaussianOptim& o, std::vector<GaussianPrimitive>& gs, const DeformGrads& dg,
                    const LearningRates& lr, double center_lr) {
  const size_t n = gs.size();
  const auto& g = dg.canonical;
  step_group(o.center, n, 3, center_lr, [&](size_t i) { return gs[i].center.data(); },
             [&](size_t i) { return g[i].center.data(); });
  step_group(o.rotation, n, 4, lr.rotation, [&](size_t i) { return gs[i].rotation.data(); },
             [&](size_t i) { return g[i].rotation.data(); });
  step_group(o.scale, n, 3, lr.scale, [&](size_t i) { return gs[i].log_scale.data(); },
             [&](size_t i) { return g[i].log_scale.data(); });
  step_group(o.opacity, n, 1, lr.opacity, [&](size_t i) { return &gs[i].opacity_logit; },
             [&](size_t i) { return &g[i].opacity_logit; });
  step_group(o.sh0, n, 3, lr.sh0, [&](size_t i) { return gs[i].sh_coeffs[0].data(); },
             [&](size_t i) { return g[i].sh_coeffs[0].data(); });
  step_group(o.sh_rest, n, 3 * o.rest, lr.sh_rest,
             [&](size_t i) { return gs[i].sh_coeffs[1].data(); },
             [&](size_t i) { return g[i].sh_coeffs[1].data(); });
  step_group(o.embedding, n, o.embed, lr.embedding,
             [&](size_t i) { return gs[i].embedding.data(); },
             [&](size_t i) { return dg.embeddings[i].data(); });
}

}  // namespace

void TrainConfig::validate() const {
  if (chunk_length < 1) fail(ErrorKind::Parameter, "chunk_length must be >= 1");
  if (base_iterations < 0 || delta_iterations < 0) fail(ErrorKind::Parameter, "iterations must be >= 0");
  if (!(w_ssim >= 0.0 && w_ssim <= 1.0)) fail(ErrorKind::Parameter, "w_ssim must lie in [0, 1]");
  const double rates[] = {lr.center,   lr.center_final, lr.rotation,    lr.scale,
                          lr.opacity,  lr.sh0,          lr.sh_rest,     lr.embedding,
                          lr.plane,    lr.plane_final,  lr.decoder,     lr.decoder_final,
                          lr.factor,   lr.factor_final};
  for (double r : rates) {
    if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorKind::Parameter, "learning rates must be > 0");
  }
  if (densify_interval < 1) fail(ErrorKind::Parameter, "densify_interval must be >= 1");
  if (!(densify_grad_threshold > 0.0)) fail(ErrorKind::Parameter, "densify_grad_threshold must be > 0");
  if (!(percent_dense > 0.0)) fail(ErrorKind::Parameter, "percent_dense must be > 0");
  if (!(prune_opacity >= 0.0 && prune_opacity < 1.0)) fail(ErrorKind::Parameter, "prune_opacity must lie in [0, 1)");
  if (max_gaussians < 1) fail(ErrorKind::Parameter, "max_gaussians must be >= 1");
  if (sh_increase_interval < 1) fail(ErrorKind::Parameter, "sh_increase_interval must be >= 1");
  if (rank < 1) fail(ErrorKind::Parameter, "rank must be >= 1");
  if (random_init_points < 0) fail(ErrorKind::Parameter, "random_init_points must be >= 0");
  if (log_interval < 1) fail(ErrorKind::Parameter, "log_interval must be >= 1");
}

int chunk_count(int timesteps, int chunk_length) {
  if (chunk_length < 1) fail(ErrorKind::Parameter, "chunk_length must be >= 1");
  return (std::max(timesteps, 0) + chunk_length - 1) / chunk_length;
}

FrameRange chunk_frames(int timesteps, int chunk_length, int k) {
  if (k < 0 || k >= chunk_count(timesteps, chunk_length)) {
    fail(ErrorKind::Parameter, "chunk " + std::to_string(k) + " is out of range");
  }
  FrameRange r;
  r.start = static_cast<std::uint32_t>(k * chunk_length);
  r.count = static_cast<std::uint32_t>(std::min(chunk_length, timesteps - k * chunk_length));
  return r;
}

double chunk_time(int frame, FrameRange range) {
  if (range.count <= 1) return 0.0;
  return static_cast<double>(frame - static_cast<int>(range.start)) / (range.count - 1);
}

ModelState initialize_model(const MultiViewDataset& ds, const ModelConfig& config,
                            const TrainConfig& train) {
  config.validate();
  train.validate();
  std::mt19937_64 rng(train.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<InitPoint> points = ds.init_points;
  if (points.empty()) {
    if (train.random_init_points == 0) fail(ErrorKind::Input, "no init points and random_init_points = 0");
    for (int i = 0; i < train.random_init_points; ++i) {
      InitPoint p;
      for (int k = 0; k < 3; ++k) p.position[k] = unit(rng) - 0.5;
      p.color = Vec3::Constant(0.5);
      points.push_back(p);
    }
  }

  Bounds b{points[0].position, points[0].position};
  for (const auto& p : points) {
    b.min = b.min.cwiseMin(p.position);
    b.max = b.max.cwiseMax(p.position);
  }
  const double pad = 0.1 * (b.max - b.min).maxCoeff() + 0.05;
  b.min.array() -= pad;
  b.max.array() += pad;

  ModelState s = empty_model(config, b);
  const int sh_count = sh_coeff_count(config.sh_degree);
  std::normal_distribution<double> embed_dist(0.0, 0.01);
  const size_t n = points.size();
  for (size_t i = 0; i < n; ++i) {
    // Mean squared distance to the three nearest neighbours.
    std::array<double, 3> best{std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity()};
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d2 = (points[j].position - points[i].position).squaredNorm();
      if (d2 < best[2]) {
        best[2] = d2;
        std::sort(best.begin(), best.end());
      }
    }
    double sum = 0.0;
    int found = 0;
    for (double d : best) {
      if (std::isfinite(d)) {
        sum += d;
        ++found;
      }
    }
    const double mean_d2 = found ? std::max(sum / found, 1e-7) : 1e-4;

    GaussianPrimitive g;
    g.center = points[i].position;
    g.log_scale = Vec3::Constant(std::log(std::sqrt(mean_d2)));
    g.opacity_logit = logit(0.1);
    g.sh_coeffs.assign(sh_count, Vec3::Zero());
    g.sh_coeffs[0] = (points[i].color.array() - 0.5) / kShC0;
    g.embedding.resize(config.embed_dim);
    for (int k = 0; k < config.embed_dim; ++k) g.embedding[k] = embed_dist(rng);
    s.gaussians.push_back(std::move(g));
  }

  std::uniform_real_distribution<double> plane_dist(0.1, 0.5);
  for (auto& plane : s.planes.channels) {
    for (auto& m : plane) m = m.unaryExpr([&](double) { return plane_dist(rng); });
  }
  for (DenseLayer* layer : {&s.decoder.hidden1, &s.decoder.hidden2}) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer->weight.cols()));
    std::uniform_real_distribution<double> he(-bound, bound);
    layer->weight = layer->weight.unaryExpr([&](double) { return he(rng); });
  }
  return s;
}

std::vector<int> densify_and_prune(ModelState& state, const DensifyStats& stats,
                                   const TrainConfig& config, double extent,
                                   std::mt19937_64& rng) {
  auto& gs = state.gaussians;
  const size_t n = gs.size();
  if (stats.grad_sum.size() != n || stats.visible_count.size() != n) {
    fail(ErrorKind::InconsistentState, "densify statistics do not match the Gaussian count");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale_limit = config.percent_dense * extent;
  const double shrink = std::log(1.6);

  std::vector<GaussianPrimitive> kept, added;
  std::vector<int> source;
  size_t budget = config.max_gaussians > static_cast<int>(n) ? config.max_gaussians - n : 0;
  for (size_t i = 0; i < n; ++i) {
    const GaussianPrimitive& g = gs[i];
    const bool hot = stats.visible_count[i] > 0 &&
                     stats.grad_sum[i] / stats.visible_count[i] >= config.densify_grad_threshold;
    if (hot && budget > 0 && g.scale().maxCoeff() <= scale_limit) {
      kept.push_back(g);
      source.push_back(static_cast<int>(i));
      added.push_back(g);
      --budget;
    } else if (hot && budget > 0) {
      const Mat3 r = quaternion_to_matrix(g.rotation);
      const Vec3 s = g.scale();
      for (int c = 0; c < 2; ++c) {
        GaussianPrimitive child = g;
        const Vec3 z(normal(rng), normal(rng), normal(rng));
        child.center = g.center + r * s.cwiseProduct(z);
        child.log_scale.array() -= shrink;
        added.push_back(std::move(child));
      }
      --budget;
    } else {
      kept.push_back(g);
      source.push_back(static_cast<int>(i));
    }
  }
  for (auto& g : added) {
    kept.push_back(std::move(g));
    source.push_back(-1);
  }

  std::vector<GaussianPrimitive> out;
  std::vector<int> out_source;
  for (size_t k = 0; k < kept.size(); ++k) {
    if (kept[k].opacity() < config.prune_opacity) continue;
    out.push_back(std::move(kept[k]));
    out_source.push_back(source[k]);
  }
  gs = std::move(out);
  return out_source;
}

RenderOutput render_model(const ModelState& state, const Camera& camera, double t,
                          const RenderSettings& settings) {
  const auto deformed = deform_gaussians(state, t);
  return rasterize(deformed, camera, settings);
}

ModelState train_base_chunk(ModelState state, const MultiViewDataset& ds,
                            std::span<const ViewRef> views, FrameRange frames,
                            const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  state.validate();
  std::vector<ViewRef> chunk_views = views_in(views, frames);
  if (chunk_views.empty()) fail(ErrorKind::Input, "no training views in chunk 0");
  const int iters = config.base_iterations;
  if (iters == 0) return state;

  const auto start = Clock::now();
  const double extent = camera_extent(ds, chunk_views);
  std::mt19937_64 rng(mix_seed(config.seed, 1000));
  ViewSampler sampler(chunk_views, mix_seed(config.seed, 0));
  const int sh_count = sh_coeff_count(state.config.sh_degree);
  GaussianOptim gopt(state.gaussians.size(), sh_count, state.config.embed_dim);
  std::array<std::vector<Adam>, 3> plane_opt;
  for (int p = 0; p < kPlaneCount; ++p) {
    for (const auto& m : state.planes.channels[p]) plane_opt[p].emplace_back(m.size());
  }
  std::array<Adam, 14> dec_opt;
  {
    const auto layers = state.decoder.layers();
    for (size_t l = 0; l < layers.size(); ++l) {
      dec_opt[2 * l] = Adam(layers[l]->weight.size());
      dec_opt[2 * l + 1] = Adam(layers[l]->bias.size());
    }
  }
  DensifyStats stats(state.gaussians.size());
  const DeformGradOptions all;

  for (int it = 0; it < iters; ++it) {
    const ViewRef& view = sampler.next();
    const Camera& cam = ds.cameras[view.camera];
    const int degree = std::min(state.config.sh_degree, it / config.sh_increase_interval);
    StepOutput s = forward_backward(state, ds, view, frames, degree, config.w_ssim, all);
    if (hooks.loss_trace) hooks.loss_trace->push_back(s.loss);
    if (it % config.log_interval == 0) emit(hooks, 0, it, s, start);

    const LearningRates& lr = config.lr;
    step_gaussians(gopt, state.gaussians, s.grads, lr,
                   decayed(lr.center, lr.center_final, it, iters));
    const double plane_lr = decayed(lr.plane, lr.plane_final, it, iters);
    for (int p = 0; p < kPlaneCount; ++p) {
      for (int ch = 0; ch < state.planes.features; ++ch) {
        auto& m = state.planes.channels[p][ch];
        const auto& g = s.grads.planes[p][ch];
        plane_opt[p][ch].step({m.data(), static_cast<size_t>(m.size())},
                              {g.data(), static_cast<size_t>(g.size())}, plane_lr);
      }
    }
    const double dec_lr = decayed(lr.decoder, lr.decoder_final, it, iters);
    const auto layers = state.decoder.layers();
    for (size_t l = 0; l < layers.size(); ++l) {
      DenseLayer& layer = *layers[l];
      const DenseLayer& g = s.grads.decoder[l];
      dec_opt[2 * l].step({layer.weight.data(), static_cast<size_t>(layer.weight.size())},
                          {g.weight.data(), static_cast<size_t>(g.weight.size())}, dec_lr);
      dec_opt[2 * l + 1].step({layer.bias.data(), static_cast<size_t>(layer.bias.size())},
                              {g.bias.data(), static_cast<size_t>(g.bias.size())}, dec_lr);
    }

    // Density control on view-space gradients in NDC units.
    const int done = it + 1;
    if (done <= config.densify_until) {
      const Vec2 ndc(0.5 * cam.width, 0.5 * cam.height);
      for (size_t i = 0; i < s.raster_grads.size(); ++i) {
        if (!s.raster_grads[i].visible) continue;
        stats.grad_sum[i] += s.raster_grads[i].mean2d.cwiseProduct(ndc).norm();
        ++stats.visible_count[i];
      }
      if (done > config.densify_from && done % config.densify_interval == 0) {
        const auto source = densify_and_prune(state, stats, config, extent, rng);
        gopt.remap(source);
        stats.reset(state.gaussians.size());
      }
    }
    if (it == iters - 1 && it % config.log_interval != 0) emit(hooks, 0, it, s, start);
  }
  return state;
}

std::vector<LowRankFactor> train_delta_chunk(const ModelState& previous, const MultiViewDataset& ds,
                                             std::span<const ViewRef> views, FrameRange frames,
                                             int chunk_index, const TrainConfig& config,
                                             const TrainHooks& hooks) {
  config.validate();
  previous.validate();
  if (chunk_index < 1) fail(ErrorKind::Protocol, "delta chunks start at index 1");
  std::vector<ViewRef> chunk_views = views_in(views, frames);
  if (chunk_views.empty()) {
    fail(ErrorKind::Input, "no training views in chunk " + std::to_string(chunk_index));
  }
  const int res = previous.planes.resolution;
  const int feats = previous.planes.features;
  std::vector<LowRankFactor> factors;
  for (int p = 0; p < kPlaneCount; ++p) {
    for (int ch = 0; ch < feats; ++ch) {
      const std::uint64_t salt = (static_cast<std::uint64_t>(chunk_index) << 32) | (p * feats + ch);
      factors.push_back(
          factor_init(res, res, config.rank, mix_seed(config.seed, salt), {p, ch}, chunk_index));
    }
  }
  const int iters = config.delta_iterations;
  if (iters == 0) return factors;

  const auto start = Clock::now();
  ViewSampler sampler(chunk_views, mix_seed(config.seed, chunk_index));
  std::vector<Adam> u_opt, v_opt;
  for (const auto& f : factors) {
    u_opt.emplace_back(f.u.size());
    v_opt.emplace_back(f.v.size());
  }
  ModelState work = previous;
  DeformGradOptions planes_only;
  planes_only.canonical = false;
  planes_only.decoder = false;

  for (int it = 0; it < iters; ++it) {
    for (const auto& f : factors) {
      work.planes.channel(f.target.plane, f.target.channel) =
          compose_adaptation(previous.planes.channel(f.target.plane, f.target.channel), f);
    }
    StepOutput s = forward_backward(work, ds, sampler.next(), frames, -1, config.w_ssim, planes_only);
    if (hooks.loss_trace) hooks.loss_trace->push_back(s.loss);
    if (it % config.log_interval == 0) emit(hooks, chunk_index, it, s, start);

    const double lr = decayed(config.lr.factor, config.lr.factor_final, it, iters);
    for (size_t k = 0; k < factors.size(); ++k) {
      LowRankFactor& f = factors[k];
      const Eigen::MatrixXd& g = s.grads.planes[f.target.plane][f.target.channel];
      const Eigen::MatrixXd gu = g * f.v;
      const Eigen::MatrixXd gv = g.transpose() * f.u;
      u_opt[k].step({f.u.data(), static_cast<size_t>(f.u.size())},
                    {gu.data(), static_cast<size_t>(gu.size())}, lr);
      v_opt[k].step({f.v.data(), static_cast<size_t>(f.v.size())},
                    {gv.data(), static_cast<size_t>(gv.size())}, lr);
    }
    if (it == iters - 1 && it % config.log_interval != 0) emit(hooks, chunk_index, it, s, start);
  }
  return factors;
}

EvalReport evaluate(const ModelState& state, const MultiViewDataset& ds,
                    std::span<const ViewRef> views, FrameRange frames) {
  EvalReport report;
  for (const auto& v : views_in(views, frames)) {
    const Camera& cam = ds.cameras[v.camera];
    const RenderOutput out =
        render_model(state, cam, chunk_time(v.frame, frames), RenderSettings::for_camera(cam));
    const Image render = to_linear(quantize(out.color));
    const Image gt = to_linear(ds.frames[v.camera][v.frame]);
    ViewMetrics m;
    m.camera = ds.camera_ids[v.camera];
    m.frame = v.frame;
    m.psnr = psnr(render, gt);
    m.dssim = dssim(render, gt);
    report.mean_psnr += m.psnr;
    report.mean_dssim += m.dssim;
    report.views.push_back(m);
  }
  if (!report.views.empty()) {
    report.mean_psnr /= static_cast<double>(report.views.size());
    report.mean_dssim /= static_cast<double>(report.views.size());
  }
  return report;
}

StreamResult train_stream(const MultiViewDataset& ds, const ModelConfig& model,
                          const TrainConfig& config, int max_chunks, const TrainHooks& hooks) {
  config.validate();
  model.validate();
  ds.validate();
  const ViewSplit split = split_train_eval(ds, ds.held_out);
  if (split.train.empty()) fail(ErrorKind::Input, "no training views");
  int chunks = chunk_count(ds.timesteps, config.chunk_length);
  if (max_chunks > 0) chunks = std::min(chunks, max_chunks);

  StreamResult result;
  std::vector<double> trace;
  TrainHooks local = hooks;
  local.loss_trace = &trace;
  const auto finish = [&](ChunkSummary& sum) {
    if (!trace.empty()) sum.final_loss = trace.back();
    if (hooks.loss_trace) hooks.loss_trace->insert(hooks.loss_trace->end(), trace.begin(), trace.end());
    trace.clear();
  };
  const auto append = [&](const Bytes& b) {
    result.stream.insert(result.stream.end(), b.begin(), b.end());
  };

  {
    const auto start = Clock::now();
    const FrameRange range = chunk_frames(ds.timesteps, config.chunk_length, 0);
    ModelState state = initialize_model(ds, model, config);
    state = train_base_chunk(std::move(state), ds, split.train, range, config, local);
    const Bytes bytes = encode_base_chunk(state, range);
    append(bytes);
    result.states.push_back(*decode_chunk(bytes).base);
    ChunkSummary sum;
    sum.chunk = 0;
    sum.frames = range;
    sum.iterations = config.base_iterations;
    sum.gaussians = result.states.back().gaussians.size();
    sum.bytes = bytes.size();
    if (!split.eval.empty()) sum.after = evaluate(result.states.back(), ds, split.eval, range);
    sum.wall_ms = elapsed_ms(start);
    finish(sum);
    result.chunks.push_back(std::move(sum));
  }

  for (int k = 1; k < chunks; ++k) {
    const auto start = Clock::now();
    const FrameRange range = chunk_frames(ds.timesteps, config.chunk_length, k);
    const ModelState& prev = result.states.back();
    ChunkSummary sum;
    sum.chunk = k;
    sum.frames = range;
    sum.iterations = config.delta_iterations;
    if (!split.eval.empty()) sum.before = evaluate(prev, ds, split.eval, range);
    const auto factors = train_delta_chunk(prev, ds, split.train, range, k, config, local);
    const Bytes bytes =
        encode_delta_chunk(factors, static_cast<std::uint32_t>(k), range, config.factor_precision);
    append(bytes);
    ModelState next = apply_delta(prev, decode_chunk(bytes));
    result.states.push_back(std::move(next));
    sum.gaussians = result.states.back().gaussians.size();
    sum.bytes = bytes.size();
    if (!split.eval.empty()) sum.after = evaluate(result.states.back(), ds, split.eval, range);
    sum.wall_ms = elapsed_ms(start);
    finish(sum);
    result.chunks.push_back(std::move(sum));
  }
  return result;
}

}  // namespace gs4d
