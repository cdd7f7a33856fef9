// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "gs4d/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include <Eigen/Dense>

#include "gs4d/error.hpp"

namespace gs4d {

RenderSettings RenderSettings::for_camera(const Camera& camera) {
  RenderSettings s;
  s.width = camera.width;
  s.height = camera.height;
  return s;
}

void RenderSettings::validate() const {
  if (width < 1 || height < 1) fail(ErrorKind::Parameter, "image size must be >= 1");
  if (tile_size < 1) fail(ErrorKind::Parameter, "tile_size must be >= 1");
  if (!(near_plane > 0.0)) fail(ErrorKind::Parameter, "near_plane must be > 0");
  if (!(alpha_cutoff > 0.0 && alpha_cutoff < max_alpha && max_alpha < 1.0)) {
    fail(ErrorKind::Parameter, "require 0 < alpha_cutoff < max_alpha < 1");
  }
  if (!(transmittance_floor >= 0.0 && transmittance_floor < 1.0)) {
    fail(ErrorKind::Parameter, "transmittance_floor must lie in [0, 1)");
  }
  if (!(low_pass >= 0.0) || !(cull_sigma >= 0.0)) {
    fail(ErrorKind::Parameter, "low_pass and cull_sigma must be >= 0");
  }
  if (sh_degree > kMaxShDegree) fail(ErrorKind::Parameter, "sh_degree must be <= 3");
}

namespace {

struct Splat {
  bool visible = false;
  double depth = 0.0;
  Vec3 p_cam = Vec3::Zero();
  Vec2 mean = Vec2::Zero();
  Mat23 jac = Mat23::Zero();
  Mat3 cov3 = Mat3::Zero();
  Mat2 conic = Mat2::Zero();
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  Vec3 color_raw = Vec3::Zero();
  Vec3 view = Vec3::Zero();  // unnormalized center - camera center
  int degree = 0;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel footprint
};

struct Prepared {
  std::vector<Splat> splats;
  std::vector<int> order;                 // visible splats, front to back
  std::vector<std::vector<int>> tiles;    // per tile, in compositing order
  int tiles_x = 0, tiles_y = 0;
};

void check_inputs(const Camera& camera, const RenderSettings& settings) {
  settings.validate();
  camera.validate();
  if (camera.width != settings.width || camera.height != settings.height) {
    fail(ErrorKind::Shape, "render settings image size differs from the camera's");
  }
}

Splat prepare_splat(const GaussianPrimitive& g, const Camera& camera,
                    const RenderSettings& settings) {
  Splat s;
  const Mat3 w_rot = camera.rotation();
  s.p_cam = w_rot * g.center + camera.translation();
  s.depth = s.p_cam.z();
  if (!(s.depth > settings.near_plane)) return s;

  s.opacity = g.opacity();
  if (s.opacity < settings.alpha_cutoff) return s;

  s.cov3 = build_covariance(g.rotation, g.log_scale);
  s.jac = compute_jacobian(s.p_cam, camera.focal, settings.near_plane);
  Mat2 cov2 = project_covariance(s.cov3, w_rot, s.jac);
  cov2(0, 0) += settings.low_pass;
  cov2(1, 1) += settings.low_pass;
  const double det = cov2.determinant();
  if (!(det > 0.0)) return s;
  s.conic << cov2(1, 1) / det, -cov2(0, 1) / det, -cov2(1, 0) / det, cov2(0, 0) / det;
  s.mean = project_point(s.p_cam, camera.focal, camera.principal_point);

  const double mid = 0.5 * (cov2(0, 0) + cov2(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  double radius;
  if (settings.cull_sigma > 0.0) {
    radius = settings.cull_sigma * std::sqrt(lambda_max);
  } else {
    // alpha >= cutoff needs opacity * G >= cutoff whether or not alpha clamps.
    const double reach = s.opacity / settings.alpha_cutoff;
    radius = std::sqrt(2.0 * std::log(std::max(reach, 1.0)) * lambda_max);
  }
  s.x0 = std::max(0, static_cast<int>(std::ceil(s.mean.x() - radius - 0.5)));
  s.x1 = std::min(settings.width - 1, static_cast<int>(std::floor(s.mean.x() + radius - 0.5)));
  s.y0 = std::max(0, static_cast<int>(std::ceil(s.mean.y() - radius - 0.5)));
  s.y1 = std::min(settings.height - 1, static_cast<int>(std::floor(s.mean.y() + radius - 0.5)));
  if (s.x0 > s.x1 || s.y0 > s.y1) return s;

  s.degree = g.sh_degree();
  if (settings.sh_degree >= 0) s.degree = std::min(s.degree, settings.sh_degree);
  s.view = g.center - camera.center();
  const double vn = s.view.norm();
  const Vec3 dir = vn > 0.0 ? Vec3(s.view / vn) : Vec3(0.0, 0.0, 1.0);
  double basis[16];
  sh_basis(s.degree, dir, basis);
  s.color_raw = Vec3::Constant(0.5);
  for (int k = 0; k < sh_coeff_count(s.degree); ++k) s.color_raw += basis[k] * g.sh_coeffs[k];
  s.color = s.color_raw.cwiseMax(0.0);
  s.visible = true;
  return s;
}

Prepared prepare(std::span<const GaussianPrimitive> gaussians, const Camera& camera,
                 const RenderSettings& settings) {
  Prepared p;
  p.splats.reserve(gaussians.size());
  for (const auto& g : gaussians) p.splats.push_back(prepare_splat(g, camera, settings));
  for (int i = 0; i < static_cast<int>(p.splats.size()); ++i) {
    if (p.splats[i].visible) p.order.push_back(i);
  }
  std::sort(p.order.begin(), p.order.end(), [&](int a, int b) {
    const double da = p.splats[a].depth, db = p.splats[b].depth;
    return da < db || (da == db && a < b);
  });

  const int ts = settings.tile_size;
  p.tiles_x = (settings.width + ts - 1) / ts;
  p.tiles_y = (settings.height + ts - 1) / ts;
  p.tiles.assign(static_cast<size_t>(p.tiles_x) * p.tiles_y, {});
  for (int idx : p.order) {
    const Splat& s = p.splats[idx];
    for (int ty = s.y0 / ts; ty <= s.y1 / ts; ++ty) {
      for (int tx = s.x0 / ts; tx <= s.x1 / ts; ++tx) {
        p.tiles[static_cast<size_t>(ty) * p.tiles_x + tx].push_back(idx);
      }
    }
  }
  return p;
}

struct Hit {
  int index;
  double alpha;
  double gauss;  // exp(power)
  bool clamped;
  double transmittance;
  Vec2 d;
};

// Composites one pixel; fills `hits` when non-null. Returns final T.
template <typename OnHit>
double composite_pixel(const Prepared& p, const RenderSettings& settings, int x, int y,
                       OnHit&& on_hit) {
  const int ts = settings.tile_size;
  const auto& list = p.tiles[static_cast<size_t>(y / ts) * p.tiles_x + x / ts];
  const Vec2 px(x + 0.5, y + 0.5);
  double t = 1.0;
  for (int idx : list) {
    const Splat& s = p.splats[idx];
    if (x < s.x0 || x > s.x1 || y < s.y0 || y > s.y1) continue;
    const Vec2 d = px - s.mean;
    const double power = -0.5 * (s.conic(0, 0) * d.x() * d.x() +
                                 2.0 * s.conic(0, 1) * d.x() * d.y() +
                                 s.conic(1, 1) * d.y() * d.y());
    if (power > 0.0) continue;
    const double gauss = std::exp(power);
    const double raw = s.opacity * gauss;
    const bool clamped = raw > settings.max_alpha;
    const double alpha = clamped ? settings.max_alpha : raw;
    if (alpha < settings.alpha_cutoff) continue;
    on_hit(Hit{idx, alpha, gauss, clamped, t, d});
    t *= 1.0 - alpha;
    if (t < settings.transmittance_floor) break;
  }
  return t;
}

void hash_bytes(std::uint64_t& h, const void* data, size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
}

void hash_doubles(std::uint64_t& h, const double* v, size_t n) { hash_bytes(h, v, n * sizeof(double)); }

// d R(q) / d q contracted with an upstream gradient on R, for unit q.
Vec4 rotation_matrix_vjp(const Vec4& q, const Mat3& g) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Vec4 out;
  out[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) +
                  x * g(2, 1));
  out[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) +
                  z * g(2, 0) + w * g(2, 1) - 2.0 * x * g(2, 2));
  out[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) +
                  z * g(1, 2) - w * g(2, 0) + z * g(2, 1) - 2.0 * y * g(2, 2));
  out[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
                  2.0 * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  return out;
}

}  // namespace

std::uint64_t scene_fingerprint(std::span<const GaussianPrimitive> gaussians,
                                const Camera& camera, const RenderSettings& settings) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& g : gaussians) {
    hash_doubles(h, g.center.data(), 3);
    hash_doubles(h, g.rotation.data(), 4);
    hash_doubles(h, g.log_scale.data(), 3);
    hash_doubles(h, &g.opacity_logit, 1);
    for (const auto& c : g.sh_coeffs) hash_doubles(h, c.data(), 3);
  }
  const size_t n = gaussians.size();
  hash_bytes(h, &n, sizeof(n));
  hash_doubles(h, camera.world_to_camera.data(), 16);
  hash_doubles(h, camera.focal.data(), 2);
  hash_doubles(h, camera.principal_point.data(), 2);
  const double scalars[] = {settings.near_plane,  settings.alpha_cutoff,
                            settings.transmittance_floor, settings.max_alpha,
                            settings.low_pass,    settings.cull_sigma};
  hash_doubles(h, scalars, 6);
  hash_doubles(h, settings.background.data(), 3);
  const int ints[] = {settings.width, settings.height, settings.sh_degree};
  hash_bytes(h, ints, sizeof(ints));
  return h;
}

RenderOutput rasterize(std::span<const GaussianPrimitive> gaussians, const Camera& camera,
                       const RenderSettings& settings) {
  check_inputs(camera, settings);
  const Prepared p = prepare(gaussians, camera, settings);

  RenderOutput out;
  out.color = Image(settings.width, settings.height);
  out.final_transmittance.assign(out.color.pixel_count(), 1.0);
  out.contributor_count.assign(out.color.pixel_count(), 0);
  out.scene_hash = scene_fingerprint(gaussians, camera, settings);

  for (int y = 0; y < settings.height; ++y) {
    for (int x = 0; x < settings.width; ++x) {
      Vec3 c = Vec3::Zero();
      int count = 0;
      const double t = composite_pixel(p, settings, x, y, [&](const Hit& h) {
        c += h.transmittance * h.alpha * p.splats[h.index].color;
        ++count;
      });
      c += t * settings.background;
      const size_t pix = static_cast<size_t>(y) * settings.width + x;
      for (int ch = 0; ch < 3; ++ch) out.color.data[pix * 3 + ch] = c[ch];
      out.final_transmittance[pix] = t;
      out.contributor_count[pix] = count;
    }
  }
  return out;
}

std::vector<SplatSample> trace_pixel(std::span<const GaussianPrimitive> gaussians,
                                     const Camera& camera, const RenderSettings& settings,
                                     int x, int y) {
  check_inputs(camera, settings);
  if (x < 0 || y < 0 || x >= settings.width || y >= settings.height) {
    fail(ErrorKind::Parameter, "pixel outside the image");
  }
  const Prepared p = prepare(gaussians, camera, settings);
  std::vector<SplatSample> trace;
  composite_pixel(p, settings, x, y, [&](const Hit& h) {
    trace.push_back({h.index, h.alpha, h.transmittance});
  });
  return trace;
}

std::vector<GaussianGrad> rasterize_backward(std::span<const GaussianPrimitive> gaussians,
                                             const Camera& camera,
                                             const RenderSettings& settings,
                                             const RenderOutput& forward,
                                             const Image& upstream) {
  check_inputs(camera, settings);
  if (forward.scene_hash != scene_fingerprint(gaussians, camera, settings) ||
      forward.color.width != settings.width || forward.color.height != settings.height) {
    fail(ErrorKind::InconsistentState, "backward pass scene differs from the forward pass");
  }
  if (upstream.width != settings.width || upstream.height != settings.height) {
    fail(ErrorKind::Shape, "upstream gradient size differs from the image size");
  }
  const Prepared p = prepare(gaussians, camera, settings);
  const size_t n = gaussians.size();

  // Screen-space accumulators.
  std::vector<Vec2> g_mean(n, Vec2::Zero());
  std::vector<Mat2> g_conic(n, Mat2::Zero());
  std::vector<double> g_opacity(n, 0.0);
  std::vector<Vec3> g_color(n, Vec3::Zero());

  std::vector<Hit> hits;
  for (int y = 0; y < settings.height; ++y) {
    for (int x = 0; x < settings.width; ++x) {
      const size_t pix = static_cast<size_t>(y) * settings.width + x;
      const Vec3 g(upstream.data[pix * 3], upstream.data[pix * 3 + 1], upstream.data[pix * 3 + 2]);
      if (g.isZero(0.0)) continue;
      hits.clear();
      const double t_final =
          composite_pixel(p, settings, x, y, [&](const Hit& h) { hits.push_back(h); });
      if (t_final != forward.final_transmittance[pix] ||
          static_cast<int>(hits.size()) != forward.contributor_count[pix]) {
        fail(ErrorKind::InconsistentState, "backward pass compositing diverged from forward");
      }
      double after = t_final * settings.background.dot(g);  // g . (color behind splat i)
      for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
        const Splat& s = p.splats[it->index];
        const double w = it->transmittance * it->alpha;
        g_color[it->index] += w * g;
        const double gc = s.color.dot(g);
        const double d_alpha = it->transmittance * gc - after / (1.0 - it->alpha);
        after += w * gc;
        if (it->clamped) continue;
        g_opacity[it->index] += it->gauss * d_alpha;
        const double d_power = d_alpha * it->alpha;
        g_mean[it->index] += d_power * (s.conic * it->d);
        g_conic[it->index] += -0.5 * d_power * (it->d * it->d.transpose());
      }
    }
  }

  std::vector<GaussianGrad> grads(n);
  const Mat3 w_rot = camera.rotation();
  const Vec2 f = camera.focal;
  for (size_t i = 0; i < n; ++i) {
    GaussianGrad& out = grads[i];
    const GaussianPrimitive& g = gaussians[i];
    out.sh_coeffs.assign(g.sh_coeffs.size(), Vec3::Zero());
    const Splat& s = p.splats[i];
    if (!s.visible) continue;
    out.visible = true;

    out.mean2d = g_mean[i];
    out.opacity_logit = g_opacity[i] * s.opacity * (1.0 - s.opacity);

    // Color: SH coefficients and view direction.
    Vec3 g_raw = g_color[i];
    for (int c = 0; c < 3; ++c) {
      if (s.color_raw[c] < 0.0) g_raw[c] = 0.0;
    }
    const double vn = s.view.norm();
    Vec3 g_center = Vec3::Zero();
    if (vn > 0.0) {
      const Vec3 dir = s.view / vn;
      double basis[16];
      Vec3 dbasis[16];
      sh_basis(s.degree, dir, basis, dbasis);
      Vec3 g_dir = Vec3::Zero();
      for (int k = 0; k < sh_coeff_count(s.degree); ++k) {
        out.sh_coeffs[k] = basis[k] * g_raw;
        g_dir += g.sh_coeffs[k].dot(g_raw) * dbasis[k];
      }
      g_center += (g_dir - dir * dir.dot(g_dir)) / vn;
    }

    // Conic -> 2D covariance -> (J, Sigma).
    const Mat2& conic = s.conic;
    const Mat2 g_cov2 = -conic * g_conic[i] * conic;
    const Mat23 t = s.jac * w_rot;
    const Mat3 g_cov3 = t.transpose() * g_cov2 * t;
    const Mat23 g_t = (g_cov2 + g_cov2.transpose()) * t * s.cov3;
    const Mat23 g_j = g_t * w_rot.transpose();

    // Camera-space position through mean2d = proj(p) and J(p).
    const double px = s.p_cam.x(), py = s.p_cam.y(), pz = s.p_cam.z();
    const double iz = 1.0 / pz, iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 g_pcam = s.jac.transpose() * g_mean[i];
    g_pcam.x() += g_j(0, 2) * (-f.x() * iz2);
    g_pcam.y() += g_j(1, 2) * (-f.y() * iz2);
    g_pcam.z() += g_j(0, 0) * (-f.x() * iz2) + g_j(0, 2) * (2.0 * f.x() * px * iz3) +
                  g_j(1, 1) * (-f.y() * iz2) + g_j(1, 2) * (2.0 * f.y() * py * iz3);
    g_center += w_rot.transpose() * g_pcam;
    out.center = g_center;

    // Sigma = M M^T with M = R diag(s).
    const Vec4 q = normalize_quaternion(g.rotation);
    const Mat3 r = quaternion_to_matrix(q);
    const Vec3 scale = g.scale();
    const Mat3 m = r * scale.asDiagonal();
    const Mat3 g_m = (g_cov3 + g_cov3.transpose()) * m;
    Mat3 g_r;
    for (int k = 0; k < 3; ++k) {
      out.log_scale[k] = scale[k] * g_m.col(k).dot(r.col(k));
      g_r.col(k) = g_m.col(k) * scale[k];
    }
    const Vec4 g_q = rotation_matrix_vjp(q, g_r);
    out.rotation = (g_q - q * q.dot(g_q)) / g.rotation.norm();
  }
  return grads;
}

}  // namespace gs4d
