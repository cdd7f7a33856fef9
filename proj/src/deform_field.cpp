// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "gs4d/deform_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "gs4d/error.hpp"

namespace gs4d {

TriPlane::TriPlane(int res, int feats, const Bounds& b, double fill)
    : resolution(res), features(feats), bounds(b) {
  for (auto& plane : channels) {
    plane.assign(static_cast<size_t>(feats), Eigen::MatrixXd::Constant(res, res, fill));
  }
}

void TriPlane::validate() const {
  if (resolution < 2) fail(ErrorKind::Parameter, "plane resolution must be >= 2");
  if (features < 1) fail(ErrorKind::Parameter, "plane features must be >= 1");
  if (!((bounds.max - bounds.min).minCoeff() > 0.0)) {
    fail(ErrorKind::Parameter, "plane bounds need positive extent on every axis");
  }
  for (const auto& plane : channels) {
    if (static_cast<int>(plane.size()) != features) {
      fail(ErrorKind::Shape, "plane channel count differs from features");
    }
    for (const auto& m : plane) {
      if (m.rows() != resolution || m.cols() != resolution) {
        fail(ErrorKind::Shape, "plane channel is not resolution x resolution");
      }
    }
  }
}

namespace {

// Maps one world coordinate onto grid index space; returns (cell, frac, dfrac/dx).
void grid_coord(double x, double lo, double hi, int res, int& cell, double& frac,
                double& dfrac) {
  const double extent = hi - lo;
  double u = (x - lo) / extent;
  dfrac = (res - 1) / extent;
  if (!(u > 0.0)) {
    u = 0.0;
    dfrac = 0.0;
  } else if (u > 1.0) {
    u = 1.0;
    dfrac = 0.0;
  }
  const double s = u * (res - 1);
  cell = std::min(static_cast<int>(std::floor(s)), res - 2);
  frac = s - cell;
}

double bilinear(const Eigen::MatrixXd& m, const PlaneStencil& st) {
  const int i = st.i0, j = st.j0;
  return (1.0 - st.fu) * (1.0 - st.fv) * m(i, j) + st.fu * (1.0 - st.fv) * m(i + 1, j) +
         (1.0 - st.fu) * st.fv * m(i, j + 1) + st.fu * st.fv * m(i + 1, j + 1);
}

}  // namespace

std::array<PlaneStencil, 3> triplane_stencils(const TriPlane& planes, const Vec3& x) {
  std::array<PlaneStencil, 3> out;
  for (int p = 0; p < kPlaneCount; ++p) {
    const int a = kPlaneAxes[p][0], b = kPlaneAxes[p][1];
    PlaneStencil& st = out[p];
    grid_coord(x[a], planes.bounds.min[a], planes.bounds.max[a], planes.resolution, st.i0,
               st.fu, st.dfu);
    grid_coord(x[b], planes.bounds.min[b], planes.bounds.max[b], planes.resolution, st.j0,
               st.fv, st.dfv);
  }
  return out;
}

Eigen::VectorXd sample_triplane(const TriPlane& planes, const Vec3& x) {
  const int f = planes.features;
  Eigen::VectorXd out(3 * f);
  const auto stencils = triplane_stencils(planes, x);
  for (int p = 0; p < kPlaneCount; ++p) {
    for (int c = 0; c < f; ++c) out[p * f + c] = bilinear(planes.channels[p][c], stencils[p]);
  }
  return out;
}

Eigen::VectorXd freq_encode(double t, int levels) {
  if (levels < 0) fail(ErrorKind::Parameter, "frequency levels must be >= 0");
  Eigen::VectorXd out(2 * levels);
  double freq = std::numbers::pi;
  for (int l = 0; l < levels; ++l, freq *= 2.0) {
    out[2 * l] = std::sin(freq * t);
    out[2 * l + 1] = std::cos(freq * t);
  }
  return out;
}

DeformDecoder DeformDecoder::zeros(int input_width, int hidden_width) {
  DeformDecoder d;
  d.hidden1 = {Eigen::MatrixXd::Zero(hidden_width, input_width), Eigen::VectorXd::Zero(hidden_width)};
  d.hidden2 = {Eigen::MatrixXd::Zero(hidden_width, hidden_width), Eigen::VectorXd::Zero(hidden_width)};
  for (size_t h = 0; h < d.heads.size(); ++h) {
    d.heads[h] = {Eigen::MatrixXd::Zero(kHeadWidths[h], hidden_width),
                  Eigen::VectorXd::Zero(kHeadWidths[h])};
  }
  return d;
}

std::array<const DenseLayer*, 7> DeformDecoder::layers() const {
  return {&hidden1, &hidden2, &heads[0], &heads[1], &heads[2], &heads[3], &heads[4]};
}

std::array<DenseLayer*, 7> DeformDecoder::layers() {
  return {&hidden1, &hidden2, &heads[0], &heads[1], &heads[2], &heads[3], &heads[4]};
}

void DeformDecoder::validate() const {
  const int in = input_width(), hid = hidden_width();
  auto check = [](const DenseLayer& l, int out, int in_w) {
    if (l.weight.rows() != out || l.weight.cols() != in_w || l.bias.size() != out) {
      fail(ErrorKind::Shape, "decoder layer has inconsistent widths");
    }
  };
  check(hidden1, hid, in);
  check(hidden2, hid, hid);
  for (size_t h = 0; h < heads.size(); ++h) check(heads[h], kHeadWidths[h], hid);
}

namespace {

Eigen::MatrixXd stacked_head_weights(const DeformDecoder& d) {
  Eigen::MatrixXd w(kDeformOutputs, d.hidden_width());
  int row = 0;
  for (const auto& h : d.heads) {
    w.middleRows(row, h.weight.rows()) = h.weight;
    row += static_cast<int>(h.weight.rows());
  }
  return w;
}

Eigen::VectorXd stacked_head_bias(const DeformDecoder& d) {
  Eigen::VectorXd b(kDeformOutputs);
  int row = 0;
  for (const auto& h : d.heads) {
    b.segment(row, h.bias.size()) = h.bias;
    row += static_cast<int>(h.bias.size());
  }
  return b;
}

DeformOutput unpack_output(const Eigen::Ref<const Eigen::VectorXd>& o) {
  DeformOutput d;
  d.d_center = o.segment<3>(0);
  d.d_rotation = o.segment<4>(3);
  d.d_log_scale = o.segment<3>(7);
  d.d_opacity_logit = o[10];
  d.d_sh0 = o.segment<3>(11);
  return d;
}

// Forward through the MLP for a batch of column inputs.
void decoder_forward(const DeformDecoder& d, const Eigen::MatrixXd& in, Eigen::MatrixXd& h1,
                     Eigen::MatrixXd& h2, Eigen::MatrixXd& out) {
  h1.noalias() = d.hidden1.weight * in;
  h1.colwise() += d.hidden1.bias;
  h1 = h1.cwiseMax(0.0);
  h2.noalias() = d.hidden2.weight * h1;
  h2.colwise() += d.hidden2.bias;
  h2 = h2.cwiseMax(0.0);
  out.noalias() = stacked_head_weights(d) * h2;
  out.colwise() += stacked_head_bias(d);
}

// d normalize(v) / dv, transposed, applied to g.
Vec4 normalize_vjp(const Vec4& v, const Vec4& g) {
  const double n = v.norm();
  const Vec4 u = v / n;
  return (g - u * u.dot(g)) / n;
}

}  // namespace

DeformOutput decode_deformation(const Eigen::VectorXd& features, const Eigen::VectorXd& embedding,
                                const Eigen::VectorXd& t_enc, const DeformDecoder& decoder) {
  decoder.validate();
  const Eigen::Index width = features.size() + embedding.size() + t_enc.size();
  if (width != decoder.input_width()) {
    fail(ErrorKind::Shape, "decoder input width " + std::to_string(decoder.input_width()) +
                               " differs from supplied " + std::to_string(width));
  }
  Eigen::MatrixXd in(width, 1);
  in << features, embedding, t_enc;
  Eigen::MatrixXd h1, h2, out;
  decoder_forward(decoder, in, h1, h2, out);
  return unpack_output(out.col(0));
}

GaussianPrimitive apply_deformation(const GaussianPrimitive& g, const DeformOutput& d) {
  GaussianPrimitive out = g;
  out.center += d.d_center;
  out.rotation = normalize_quaternion(g.rotation + d.d_rotation);
  out.log_scale += d.d_log_scale;
  out.opacity_logit += d.d_opacity_logit;
  if (out.sh_coeffs.empty()) fail(ErrorKind::Shape, "gaussian has no SH coefficients");
  out.sh_coeffs[0] += d.d_sh0;
  return out;
}

void ModelConfig::validate() const {
  if (sh_degree < 0 || sh_degree > kMaxShDegree) fail(ErrorKind::Parameter, "sh_degree must be in [0, 3]");
  if (embed_dim < 0) fail(ErrorKind::Parameter, "embed_dim must be >= 0");
  if (plane_res < 2) fail(ErrorKind::Parameter, "plane_res must be >= 2");
  if (plane_features < 1) fail(ErrorKind::Parameter, "plane_features must be >= 1");
  if (time_freqs < 0) fail(ErrorKind::Parameter, "time_freqs must be >= 0");
  if (hidden_width < 1) fail(ErrorKind::Parameter, "hidden_width must be >= 1");
}

void ModelState::validate() const {
  config.validate();
  planes.validate();
  decoder.validate();
  if (planes.resolution != config.plane_res || planes.features != config.plane_features) {
    fail(ErrorKind::Shape, "planes disagree with the model config");
  }
  if (decoder.input_width() != config.decoder_input_width() ||
      decoder.hidden_width() != config.hidden_width) {
    fail(ErrorKind::Shape, "decoder disagrees with the model config");
  }
  for (const auto& g : gaussians) {
    if (static_cast<int>(g.sh_coeffs.size()) != sh_coeff_count(config.sh_degree) ||
        g.embedding.size() != config.embed_dim) {
      fail(ErrorKind::Shape, "gaussian disagrees with the model config");
    }
  }
}

ModelState empty_model(const ModelConfig& config, const Bounds& bounds) {
  config.validate();
  ModelState s;
  s.config = config;
  s.planes = TriPlane(config.plane_res, config.plane_features, bounds);
  s.decoder = DeformDecoder::zeros(config.decoder_input_width(), config.hidden_width);
  return s;
}

std::vector<GaussianPrimitive> deform_gaussians(const ModelState& state, double t,
                                                DeformCache* cache) {
  const int n = static_cast<int>(state.gaussians.size());
  const int f = state.planes.features;
  const int de = state.config.embed_dim;
  const Eigen::VectorXd t_enc =
      state.config.freq_enc ? freq_encode(t, state.config.time_freqs) : Eigen::VectorXd();
  const int width = 3 * f + de + static_cast<int>(t_enc.size());
  if (width != state.decoder.input_width()) {
    fail(ErrorKind::Shape, "decoder input width disagrees with planes/embedding/time widths");
  }

  DeformCache local;
  DeformCache& c = cache ? *cache : local;
  c.t = t;
  c.input.resize(width, n);
  c.stencils.resize(n);
  for (int i = 0; i < n; ++i) {
    const GaussianPrimitive& g = state.gaussians[i];
    if (g.embedding.size() != de) fail(ErrorKind::Shape, "embedding width mismatch");
    c.stencils[i] = triplane_stencils(state.planes, g.center);
    for (int p = 0; p < kPlaneCount; ++p) {
      for (int ch = 0; ch < f; ++ch) {
        c.input(p * f + ch, i) = bilinear(state.planes.channels[p][ch], c.stencils[i][p]);
      }
    }
    c.input.col(i).segment(3 * f, de) = g.embedding;
    c.input.col(i).tail(t_enc.size()) = t_enc;
  }
  decoder_forward(state.decoder, c.input, c.hidden1, c.hidden2, c.output);

  std::vector<GaussianPrimitive> out;
  out.reserve(n);
  c.rotation_sum.resize(n);
  for (int i = 0; i < n; ++i) {
    const DeformOutput d = unpack_output(c.output.col(i));
    c.rotation_sum[i] = state.gaussians[i].rotation + d.d_rotation;
    out.push_back(apply_deformation(state.gaussians[i], d));
  }
  return out;
}

DeformGrads deform_gradients(const ModelState& state, const DeformCache& cache,
                             std::span<const GaussianGrad> upstream,
                             const DeformGradOptions& options) {
  const int n = static_cast<int>(state.gaussians.size());
  if (static_cast<int>(upstream.size()) != n || cache.input.cols() != n) {
    fail(ErrorKind::InconsistentState, "gradient count differs from the deformed set");
  }
  const int f = state.planes.features;
  const int de = state.config.embed_dim;
  const int res = state.planes.resolution;

  DeformGrads out;
  Eigen::MatrixXd g_out(kDeformOutputs, n);
  if (options.canonical) out.canonical.resize(n);
  for (int i = 0; i < n; ++i) {
    const GaussianGrad& g = upstream[i];
    const Vec4 g_sum = normalize_vjp(cache.rotation_sum[i], g.rotation);
    const Vec3 g_sh0 = g.sh_coeffs.empty() ? Vec3::Zero() : g.sh_coeffs[0];
    g_out.col(i) << g.center, g_sum, g.log_scale, g.opacity_logit, g_sh0;
    if (options.canonical) {
      GaussianGrad& cg = out.canonical[i];
      cg = g;
      cg.rotation = g_sum;
    }
  }

  // Back through the MLP.
  const DeformDecoder& dec = state.decoder;
  Eigen::MatrixXd g_h2 = stacked_head_weights(dec).transpose() * g_out;
  g_h2 = (cache.hidden2.array() > 0.0).select(g_h2, 0.0);
  Eigen::MatrixXd g_h1 = dec.hidden2.weight.transpose() * g_h2;
  g_h1 = (cache.hidden1.array() > 0.0).select(g_h1, 0.0);
  const Eigen::MatrixXd g_in = dec.hidden1.weight.transpose() * g_h1;

  if (options.decoder) {
    out.decoder[0] = {g_h1 * cache.input.transpose(), g_h1.rowwise().sum()};
    out.decoder[1] = {g_h2 * cache.hidden1.transpose(), g_h2.rowwise().sum()};
    int row = 0;
    for (size_t h = 0; h < dec.heads.size(); ++h) {
      const int w = kHeadWidths[h];
      const auto rows = g_out.middleRows(row, w);
      out.decoder[2 + h] = {rows * cache.hidden2.transpose(), rows.rowwise().sum()};
      row += w;
    }
  }

  // Plane features and canonical centers through bilinear sampling.
  if (options.planes) {
    for (auto& plane : out.planes) plane.assign(f, Eigen::MatrixXd::Zero(res, res));
  }
  for (int i = 0; i < n; ++i) {
    Vec3 g_x = Vec3::Zero();
    for (int p = 0; p < kPlaneCount; ++p) {
      const PlaneStencil& st = cache.stencils[i][p];
      const double w00 = (1.0 - st.fu) * (1.0 - st.fv), w10 = st.fu * (1.0 - st.fv);
      const double w01 = (1.0 - st.fu) * st.fv, w11 = st.fu * st.fv;
      double g_fu = 0.0, g_fv = 0.0;
      for (int ch = 0; ch < f; ++ch) {
        const double g = g_in(p * f + ch, i);
        if (g == 0.0) continue;
        if (options.planes) {
          Eigen::MatrixXd& m = out.planes[p][ch];
          m(st.i0, st.j0) += w00 * g;
          m(st.i0 + 1, st.j0) += w10 * g;
          m(st.i0, st.j0 + 1) += w01 * g;
          m(st.i0 + 1, st.j0 + 1) += w11 * g;
        }
        if (options.canonical) {
          const Eigen::MatrixXd& m = state.planes.channels[p][ch];
          const double m00 = m(st.i0, st.j0), m10 = m(st.i0 + 1, st.j0);
          const double m01 = m(st.i0, st.j0 + 1), m11 = m(st.i0 + 1, st.j0 + 1);
          g_fu += g * ((1.0 - st.fv) * (m10 - m00) + st.fv * (m11 - m01));
          g_fv += g * ((1.0 - st.fu) * (m01 - m00) + st.fu * (m11 - m10));
        }
      }
      g_x[kPlaneAxes[p][0]] += g_fu * st.dfu;
      g_x[kPlaneAxes[p][1]] += g_fv * st.dfv;
    }
    if (options.canonical) out.canonical[i].center += g_x;
  }

  if (options.canonical) {
    out.embeddings.resize(n);
    for (int i = 0; i < n; ++i) out.embeddings[i] = g_in.col(i).segment(3 * f, de);
  }

  if (state.config.freq_enc) {
    const int levels = state.config.time_freqs;
    const Eigen::VectorXd g_enc = g_in.bottomRows(2 * levels).rowwise().sum();
    double freq = std::numbers::pi;
    for (int l = 0; l < levels; ++l, freq *= 2.0) {
      out.time += g_enc[2 * l] * freq * std::cos(freq * cache.t) -
                  g_enc[2 * l + 1] * freq * std::sin(freq * cache.t);
    }
  }
  return out;
}

}  // namespace gs4d
