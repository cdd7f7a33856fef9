// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations written independently of the library code paths
// they check. Slow and direct on purpose.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "gs4d/deform_field.hpp"
#include "gs4d/gaussian.hpp"
#include "gs4d/image.hpp"
#include "gs4d/rasterizer.hpp"
#include "test_util.hpp"

namespace gs4d::oracle {

struct PixelResult {
  Image color;
  std::vector<double> transmittance;
};

/// Per-pixel alpha blending over a global depth sort, no tiles, no culling.
inline PixelResult blend(const std::vector<GaussianPrimitive>& gs, const Camera& cam,
                         const RenderSettings& st) {
  struct Entry {
    double z;
    int index;
    Vec2 mean;
    Mat2 conic;
    double opacity;
    Vec3 color;
  };
  std::vector<Entry> entries;
  const Mat3 r = cam.world_to_camera.topLeftCorner<3, 3>();
  const Vec3 t = cam.world_to_camera.topRightCorner<3, 1>();
  const Vec3 eye = -r.transpose() * t;
  for (int i = 0; i < static_cast<int>(gs.size()); ++i) {
    const GaussianPrimitive& g = gs[i];
    const Vec3 p = r * g.center + t;
    if (p.z() <= st.near_plane) continue;
    const Eigen::Quaterniond q(g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]);
    const Mat3 rot = q.normalized().toRotationMatrix();
    const Mat3 s = g.log_scale.array().exp().matrix().asDiagonal();
    const Mat3 sigma = rot * s * s * rot.transpose();
    Eigen::Matrix<double, 2, 3> j;
    const double fx = cam.focal.x(), fy = cam.focal.y(), z = p.z();
    j << fx / z, 0, -fx * p.x() / (z * z), 0, fy / z, -fy * p.y() / (z * z);
    Mat2 cov = j * r * sigma * r.transpose() * j.transpose();
    cov(0, 0) += st.low_pass;
    cov(1, 1) += st.low_pass;
    Entry e;
    e.z = z;
    e.index = i;
    e.mean = Vec2(fx * p.x() / z + cam.principal_point.x(), fy * p.y() / z + cam.principal_point.y());
    e.conic = cov.inverse();
    e.opacity = 1.0 / (1.0 + std::exp(-g.opacity_logit));
    const int degree = st.sh_degree >= 0 ? std::min(st.sh_degree, g.sh_degree()) : g.sh_degree();
    e.color = eval_sh(g.sh_coeffs, (g.center - eye).normalized(), degree);
    entries.push_back(e);
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.z < b.z; });

  PixelResult out;
  out.color = Image(st.width, st.height);
  out.transmittance.assign(static_cast<size_t>(st.width) * st.height, 1.0);
  for (int y = 0; y < st.height; ++y) {
    for (int x = 0; x < st.width; ++x) {
      const Vec2 px(x + 0.5, y + 0.5);
      Vec3 c = Vec3::Zero();
      double tr = 1.0;
      for (const Entry& e : entries) {
        const Vec2 d = px - e.mean;
        const double alpha = std::min(st.max_alpha, e.opacity * std::exp(-0.5 * d.dot(e.conic * d)));
        if (alpha < st.alpha_cutoff) continue;
        c += tr * alpha * e.color;
        tr *= 1.0 - alpha;
        if (tr < st.transmittance_floor) break;
      }
      c += tr * st.background;
      for (int k = 0; k < 3; ++k) out.color.at(x, y, k) = c[k];
      out.transmittance[static_cast<size_t>(y) * st.width + x] = tr;
    }
  }
  return out;
}

/// Random scene of n Gaussians in front of an 8x8-ish camera.
inline std::vector<GaussianPrimitive> random_scene(std::mt19937_64& rng, int n, int sh_degree = 1) {
  std::vector<GaussianPrimitive> gs;
  for (int i = 0; i < n; ++i) gs.push_back(testing::random_gaussian(rng, sh_degree));
  return gs;
}

struct GradCheck {
  int checked = 0;
  int failed = 0;
  double worst_rel = 0.0;  // over derivatives not near zero
  std::string first_failure;
  std::string context;  // prefixed to the group name in first_failure
  std::set<std::string> groups;

  void record(const std::string& group, double analytic, double numeric, double rel = 1e-3,
              double abs = 1e-6) {
    ++checked;
    groups.insert(group);
    const double err = std::abs(analytic - numeric);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale >= abs) worst_rel = std::max(worst_rel, err / scale);
    if (!testing::grad_close(analytic, numeric, rel, abs)) {
      if (failed++ == 0) {
        first_failure = context + group + ": analytic " + std::to_string(analytic) + " numeric " +
                        std::to_string(numeric);
      }
    }
  }
};

/// Every parameter of every Gaussian against central differences of
/// L = sum(upstream * color).
inline GradCheck check_raster_gradients(std::vector<GaussianPrimitive> gs, const Camera& cam,
                                        const RenderSettings& st, const Image& upstream,
                                        double h = 1e-4) {
  const auto loss = [&]() {
    const RenderOutput out = rasterize(gs, cam, st);
    double l = 0.0;
    for (size_t k = 0; k < out.color.data.size(); ++k) l += upstream.data[k] * out.color.data[k];
    return l;
  };
  const RenderOutput fwd = rasterize(gs, cam, st);
  const auto grads = rasterize_backward(gs, cam, st, fwd, upstream);
  GradCheck gc;
  for (size_t i = 0; i < gs.size(); ++i) {
    GaussianPrimitive& g = gs[i];
    gc.context = "gaussian " + std::to_string(i) + " ";
    for (int k = 0; k < 3; ++k) {
      gc.record("center", grads[i].center[k], testing::central_difference(loss, &g.center[k], h));
      gc.record("log_scale", grads[i].log_scale[k],
                testing::central_difference(loss, &g.log_scale[k], h));
    }
    for (int k = 0; k < 4; ++k) {
      gc.record("rotation", grads[i].rotation[k],
                testing::central_difference(loss, &g.rotation[k], h));
    }
    gc.record("opacity", grads[i].opacity_logit,
              testing::central_difference(loss, &g.opacity_logit, h));
    for (size_t c = 0; c < g.sh_coeffs.size(); ++c) {
      for (int k = 0; k < 3; ++k) {
        gc.record("sh", grads[i].sh_coeffs[c][k],
                  testing::central_difference(loss, &g.sh_coeffs[c][k], h));
      }
    }
  }
  return gc;
}

inline Image random_image(std::mt19937_64& rng, int w, int h, double lo = -1.0, double hi = 1.0) {
  Image img(w, h);
  for (auto& v : img.data) v = testing::uniform(rng, lo, hi);
  return img;
}

/// Scalar forward pass of the deformation decoder.
inline std::vector<double> decoder_forward(const DeformDecoder& d, const std::vector<double>& in) {
  const auto dense = [](const DenseLayer& l, const std::vector<double>& x, bool relu) {
    std::vector<double> y(l.weight.rows());
    for (int r = 0; r < l.weight.rows(); ++r) {
      double acc = l.bias[r];
      for (int c = 0; c < l.weight.cols(); ++c) acc += l.weight(r, c) * x[c];
      y[r] = relu ? std::max(0.0, acc) : acc;
    }
    return y;
  };
  const auto h1 = dense(d.hidden1, in, true);
  const auto h2 = dense(d.hidden2, h1, true);
  std::vector<double> out;
  for (const auto& head : d.heads) {
    const auto y = dense(head, h2, false);
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

/// Direct bilinear lookup of one plane channel at normalized coords (u, v) in [0, 1].
inline double bilinear(const Eigen::MatrixXd& m, double u, double v) {
  const int r = static_cast<int>(m.rows());
  const double gu = std::clamp(u, 0.0, 1.0) * (r - 1), gv = std::clamp(v, 0.0, 1.0) * (r - 1);
  const int i = std::min(static_cast<int>(std::floor(gu)), r - 2);
  const int j = std::min(static_cast<int>(std::floor(gv)), r - 2);
  const double a = gu - i, b = gv - j;
  return (1 - a) * (1 - b) * m(i, j) + a * (1 - b) * m(i + 1, j) + (1 - a) * b * m(i, j + 1) +
         a * b * m(i + 1, j + 1);
}

/// Windowed SSIM evaluated pixel by pixel with the 2D window directly.
inline double ssim(const Image& a, const Image& b) {
  const int rad = 5;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double w[11][11], sum = 0.0;
  for (int i = -rad; i <= rad; ++i) {
    for (int j = -rad; j <= rad; ++j) {
      w[i + rad][j + rad] = std::exp(-(i * i + j * j) / (2 * sigma * sigma));
      sum += w[i + rad][j + rad];
    }
  }
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < a.height; ++y) {
      for (int x = 0; x < a.width; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int i = -rad; i <= rad; ++i) {
          for (int j = -rad; j <= rad; ++j) {
            const int yy = y + i, xx = x + j;
            if (yy < 0 || xx < 0 || yy >= a.height || xx >= a.width) continue;
            const double ww = w[i + rad][j + rad] / sum;
            const double va = a.at(xx, yy, c), vb = b.at(xx, yy, c);
            mx += ww * va;
            my += ww * vb;
            sxx += ww * va * va;
            syy += ww * vb * vb;
            sxy += ww * va * vb;
          }
        }
        sxx -= mx * mx;
        syy -= my * my;
        sxy -= mx * my;
        total += ((2 * mx * my + c1) * (2 * sxy + c2)) /
                 ((mx * mx + my * my + c1) * (sxx + syy + c2));
      }
    }
  }
  return total / (3.0 * a.width * a.height);
}


/// Random upstream gradient for each deformed Gaussian.
inline std::vector<GaussianGrad> random_upstream(std::mt19937_64& rng,
                                                 const std::vector<GaussianPrimitive>& gs) {
  std::vector<GaussianGrad> up(gs.size());
  for (size_t i = 0; i < gs.size(); ++i) {
    auto r = [&] { return testing::uniform(rng, -1.0, 1.0); };
    up[i].center = Vec3(r(), r(), r());
    up[i].rotation = Vec4(r(), r(), r(), r());
    up[i].log_scale = Vec3(r(), r(), r());
    up[i].opacity_logit = r();
    up[i].sh_coeffs.resize(gs[i].sh_coeffs.size());
    for (auto& c : up[i].sh_coeffs) c = Vec3(r(), r(), r());
  }
  return up;
}

/// L = sum over deformed Gaussians of upstream . parameters.
inline double deform_objective(const ModelState& s, double t, const std::vector<GaussianGrad>& up) {
  const auto out = deform_gaussians(s, t);
  double l = 0.0;
  for (size_t i = 0; i < out.size(); ++i) {
    l += up[i].center.dot(out[i].center) + up[i].rotation.dot(out[i].rotation) +
         up[i].log_scale.dot(out[i].log_scale) + up[i].opacity_logit * out[i].opacity_logit;
    for (size_t c = 0; c < out[i].sh_coeffs.size(); ++c) l += up[i].sh_coeffs[c].dot(out[i].sh_coeffs[c]);
  }
  return l;
}

/// Every canonical, embedding and time gradient plus `samples` random plane
/// entries and decoder weights per group.
inline GradCheck check_deform_gradients(ModelState s, double t, const std::vector<GaussianGrad>& up,
                                        std::mt19937_64& rng, int samples = 20, double h = 1e-5) {
  DeformCache cache;
  deform_gaussians(s, t, &cache);
  const DeformGrads g = deform_gradients(s, cache, up);
  const auto loss = [&] { return deform_objective(s, t, up); };
  GradCheck gc;
  for (size_t i = 0; i < s.gaussians.size(); ++i) {
    GaussianPrimitive& p = s.gaussians[i];
    for (int k = 0; k < 3; ++k) {
      gc.record("center", g.canonical[i].center[k], testing::central_difference(loss, &p.center[k], h));
      gc.record("log_scale", g.canonical[i].log_scale[k],
                testing::central_difference(loss, &p.log_scale[k], h));
      gc.record("sh0", g.canonical[i].sh_coeffs[0][k],
                testing::central_difference(loss, &p.sh_coeffs[0][k], h));
    }
    for (int k = 0; k < 4; ++k) {
      gc.record("rotation", g.canonical[i].rotation[k],
                testing::central_difference(loss, &p.rotation[k], h));
    }
    gc.record("opacity", g.canonical[i].opacity_logit,
              testing::central_difference(loss, &p.opacity_logit, h));
    for (int k = 0; k < p.embedding.size(); ++k) {
      gc.record("embedding", g.embeddings[i][k], testing::central_difference(loss, &p.embedding[k], h));
    }
  }
  std::uniform_int_distribution<int> node(0, s.planes.resolution - 1);
  std::uniform_int_distribution<int> chan(0, s.planes.features - 1);
  for (int p = 0; p < kPlaneCount; ++p) {
    for (int k = 0; k < samples; ++k) {
      const int c = chan(rng), a = node(rng), b = node(rng);
      gc.record("plane", g.planes[p][c](a, b),
                testing::central_difference(loss, &s.planes.channels[p][c](a, b), h));
    }
    // Nodes that actually carry weight.
    for (size_t i = 0; i < s.gaussians.size() && i < 4; ++i) {
      const auto st = cache.stencils[i][p];
      const int c = chan(rng);
      gc.record("plane", g.planes[p][c](st.i0 + 1, st.j0),
                testing::central_difference(loss, &s.planes.channels[p][c](st.i0 + 1, st.j0), h));
    }
  }
  auto layers = s.decoder.layers();
  for (size_t l = 0; l < layers.size(); ++l) {
    DenseLayer& layer = *layers[l];
    std::uniform_int_distribution<int> row(0, static_cast<int>(layer.weight.rows()) - 1);
    std::uniform_int_distribution<int> col(0, static_cast<int>(layer.weight.cols()) - 1);
    for (int k = 0; k < samples; ++k) {
      const int r = row(rng), c = col(rng);
      gc.record("decoder weight", g.decoder[l].weight(r, c),
                testing::central_difference(loss, &layer.weight(r, c), h));
      gc.record("decoder bias", g.decoder[l].bias[r], testing::central_difference(loss, &layer.bias[r], h));
    }
  }
  gc.record("time", g.time, testing::central_difference(loss, &t, h));
  return gc;
}

/// Small random deformable model whose decoder is fully random.
inline ModelState random_model(std::mt19937_64& rng, int n, const ModelConfig& cfg) {
  Bounds b;
  b.min = Vec3::Constant(-0.7);
  b.max = Vec3::Constant(0.7);
  ModelState s = empty_model(cfg, b);
  for (auto& plane : s.planes.channels) {
    for (auto& m : plane) m = m.unaryExpr([&](double) { return testing::uniform(rng, -0.5, 0.5); });
  }
  for (DenseLayer* l : s.decoder.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l->weight.cols()));
    l->weight = l->weight.unaryExpr([&](double) { return testing::uniform(rng, -bound, bound); });
    l->bias = l->bias.unaryExpr([&](double) { return testing::uniform(rng, -0.1, 0.1); });
  }
  for (int i = 0; i < n; ++i) s.gaussians.push_back(testing::random_gaussian(rng, cfg.sh_degree, cfg.embed_dim));
  return s;
}

// Singular values, largest first, as square roots of the eigenvalues of the
// smaller Gram matrix.
inline std::vector<double> singular_values(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd gram = a.rows() >= a.cols() ? Eigen::MatrixXd(a.transpose() * a)
                                                    : Eigen::MatrixXd(a * a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  std::vector<double> s;
  for (Eigen::Index k = eig.eigenvalues().size() - 1; k >= 0; --k) {
    s.push_back(std::sqrt(std::max(0.0, eig.eigenvalues()[k])));
  }
  return s;
}

}  // namespace gs4d::oracle
