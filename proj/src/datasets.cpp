// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "gs4d/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <regex>
#include <set>

#include <Eigen/Geometry>
#include <json.hpp>

#include "gs4d/error.hpp"
#include "gs4d/rasterizer.hpp"

namespace gs4d {

namespace fs = std::filesystem;
using nlohmann::json;

int MultiViewDataset::camera_index(const std::string& id) const {
  const auto it = std::find(camera_ids.begin(), camera_ids.end(), id);
  return it == camera_ids.end() ? -1 : static_cast<int>(it - camera_ids.begin());
}

void MultiViewDataset::validate() const {
  if (cameras.size() != camera_ids.size() || frames.size() != cameras.size()) {
    fail(ErrorKind::Input, "camera, id and frame lists differ in length");
  }
  if (cameras.empty()) fail(ErrorKind::Input, "dataset has no cameras");
  std::set<std::string> ids(camera_ids.begin(), camera_ids.end());
  if (ids.size() != camera_ids.size()) fail(ErrorKind::Input, "duplicate camera ids");
  for (size_t c = 0; c < cameras.size(); ++c) {
    cameras[c].validate();
    if (static_cast<int>(frames[c].size()) != timesteps) {
      fail(ErrorKind::RaggedFrames, "camera " + camera_ids[c] + " has " +
                                        std::to_string(frames[c].size()) + " frames, expected " +
                                        std::to_string(timesteps));
    }
    for (const auto& f : frames[c]) {
      if (f.width != cameras[c].width || f.height != cameras[c].height) {
        fail(ErrorKind::Input, "frame size differs from camera " + camera_ids[c]);
      }
    }
  }
  for (const auto& h : held_out) {
    if (!ids.count(h)) fail(ErrorKind::Input, "held-out camera " + h + " is not in the dataset");
  }
  std::set<std::string> held(held_out.begin(), held_out.end());
  if (held.size() >= ids.size()) fail(ErrorKind::Input, "dataset needs at least one training camera");
}

namespace {

std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.png", t);
  return buf;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "missing " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Input, "malformed " + path.string() + ": " + e.what());
  }
}

Camera parse_camera(const json& j) {
  Camera cam;
  const auto& m = j.at("world_to_camera");
  if (!m.is_array() || m.size() != 16) fail(ErrorKind::Input, "world_to_camera needs 16 values");
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) cam.world_to_camera(r, c) = m[r * 4 + c].get<double>();
  }
  cam.focal = {j.at("fx").get<double>(), j.at("fy").get<double>()};
  cam.principal_point = {j.at("cx").get<double>(), j.at("cy").get<double>()};
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  return cam;
}

}  // namespace

MultiViewDataset load_multiview(const fs::path& root) {
  const json poses = read_json(root / "poses.json");
  MultiViewDataset ds;
  try {
    for (const auto& jc : poses.at("cameras")) {
      ds.camera_ids.push_back(jc.at("id").get<std::string>());
      ds.cameras.push_back(parse_camera(jc));
    }
    if (poses.contains("held_out")) ds.held_out = poses.at("held_out").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Input, std::string("malformed poses.json: ") + e.what());
  }
  for (size_t c = 0; c < ds.cameras.size(); ++c) ds.cameras[c].validate();

  static const std::regex pattern(R"(frame_(\d{5})\.png)");
  std::vector<int> counts;
  for (size_t c = 0; c < ds.cameras.size(); ++c) {
    const fs::path dir = root / ("cam_" + ds.camera_ids[c]);
    if (!fs::is_directory(dir)) fail(ErrorKind::MissingFile, "missing frame directory " + dir.string());
    std::set<int> indices;
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::smatch m;
      const std::string name = entry.path().filename().string();
      if (std::regex_match(name, m, pattern)) indices.insert(std::stoi(m[1]));
    }
    const int n = static_cast<int>(indices.size());
    if (n > 0 && *indices.rbegin() != n - 1) {
      fail(ErrorKind::RaggedFrames, "frame numbering has gaps in " + dir.string());
    }
    counts.push_back(n);
  }
  if (counts.empty()) fail(ErrorKind::Input, "poses.json lists no cameras");
  if (std::adjacent_find(counts.begin(), counts.end(), std::not_equal_to<>()) != counts.end()) {
    fail(ErrorKind::RaggedFrames, "cameras have different frame counts");
  }
  ds.timesteps = counts.front();
  if (ds.timesteps < 1) fail(ErrorKind::Input, "no frames found");

  ds.frames.resize(ds.cameras.size());
  for (size_t c = 0; c < ds.cameras.size(); ++c) {
    const fs::path dir = root / ("cam_" + ds.camera_ids[c]);
    for (int t = 0; t < ds.timesteps; ++t) ds.frames[c].push_back(read_png(dir / frame_name(t)));
  }

  const fs::path points = root / "points.json";
  if (fs::exists(points)) {
    const json jp = read_json(points);
    try {
      for (const auto& p : jp.at("points")) {
        if (p.size() != 6) fail(ErrorKind::Input, "points.json entries need 6 values");
        InitPoint ip;
        ip.position = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
        ip.color = {p[3].get<double>(), p[4].get<double>(), p[5].get<double>()};
        ds.init_points.push_back(ip);
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::Input, std::string("malformed points.json: ") + e.what());
    }
  }
  ds.validate();
  return ds;
}

void write_multiview(const MultiViewDataset& ds, const fs::path& root) {
  ds.validate();
  fs::create_directories(root);
  json poses;
  poses["cameras"] = json::array();
  for (size_t c = 0; c < ds.cameras.size(); ++c) {
    const Camera& cam = ds.cameras[c];
    json m = json::array();
    for (int r = 0; r < 4; ++r) {
      for (int k = 0; k < 4; ++k) m.push_back(cam.world_to_camera(r, k));
    }
    poses["cameras"].push_back({{"id", ds.camera_ids[c]},
                                {"world_to_camera", m},
                                {"fx", cam.focal.x()},
                                {"fy", cam.focal.y()},
                                {"cx", cam.principal_point.x()},
                                {"cy", cam.principal_point.y()},
                                {"width", cam.width},
                                {"height", cam.height}});
  }
  poses["held_out"] = ds.held_out;
  {
    std::ofstream out(root / "poses.json");
    out << poses.dump(2) << "\n";
    if (!out) fail(ErrorKind::Io, "cannot write poses.json");
  }
  for (size_t c = 0; c < ds.cameras.size(); ++c) {
    const fs::path dir = root / ("cam_" + ds.camera_ids[c]);
    fs::create_directories(dir);
    for (int t = 0; t < ds.timesteps; ++t) write_png(dir / frame_name(t), ds.frames[c][t]);
  }
  if (!ds.init_points.empty()) {
    json pts = json::array();
    for (const auto& p : ds.init_points) {
      pts.push_back({p.position.x(), p.position.y(), p.position.z(), p.color.x(), p.color.y(),
                     p.color.z()});
    }
    std::ofstream out(root / "points.json");
    out << json{{"points", pts}}.dump() << "\n";
    if (!out) fail(ErrorKind::Io, "cannot write points.json");
  }
}

Motion parse_motion(const std::string& name) {
  if (name == "static") return Motion::Static;
  if (name == "oscillate") return Motion::Oscillate;
  if (name == "drift") return Motion::Drift;
  fail(ErrorKind::Input, "unknown motion '" + name + "' (static, oscillate, drift)");
}

std::string to_string(Motion motion) {
  switch (motion) {
    case Motion::Static: return "static";
    case Motion::Oscillate: return "oscillate";
    case Motion::Drift: return "drift";
  }
  return "static";
}

Camera look_at_camera(const Vec3& position, const Vec3& target, int image_size,
                      double fov_degrees) {
  const Vec3 up(0.0, 1.0, 0.0);
  const Vec3 z = (target - position).normalized();
  const Vec3 x = (-up).cross(z).normalized();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = z;
  Camera cam;
  cam.world_to_camera.setIdentity();
  cam.world_to_camera.topLeftCorner<3, 3>() = r;
  cam.world_to_camera.topRightCorner<3, 1>() = -r * position;
  const double f = 0.5 * image_size / std::tan(0.5 * fov_degrees * std::numbers::pi / 180.0);
  cam.focal = {f, f};
  cam.principal_point = {0.5 * image_size, 0.5 * image_size};
  cam.width = image_size;
  cam.height = image_size;
  return cam;
}

ImageU8 render_ground_truth(std::span<const GaussianPrimitive> gaussians, const Camera& camera) {
  return quantize(rasterize(gaussians, camera, RenderSettings::for_camera(camera)).color);
}

std::vector<GaussianPrimitive> SynthScene::at_frame(int frame) const {
  if (motion == Motion::Static) return canonical;
  std::vector<GaussianPrimitive> out = canonical;
  const double phase = motion == Motion::Oscillate
                           ? std::sin(2.0 * std::numbers::pi * frame / timesteps)
                           : static_cast<double>(frame) / timesteps;
  for (size_t i = 0; i < out.size(); ++i) out[i].center += phase * displacement[i];
  return out;
}

SynthScene synth_scene(const SynthOptions& o) {
  if (o.n_gaussians < 0 || o.n_cameras < 1 || o.timesteps < 1 || o.image_size < 1) {
    fail(ErrorKind::Parameter, "synth_scene needs n_gaussians >= 0 and positive counts");
  }
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto f32 = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  constexpr double kShC0 = 0.28209479177387814;

  SynthScene scene;
  scene.motion = o.motion;
  scene.timesteps = o.timesteps;
  for (int i = 0; i < o.n_gaussians; ++i) {
    GaussianPrimitive g;
    for (int k = 0; k < 3; ++k) g.center[k] = f32(uniform(-0.45, 0.45));
    Vec4 q(normal(rng), normal(rng), normal(rng), normal(rng));
    q.normalize();
    for (int k = 0; k < 4; ++k) g.rotation[k] = f32(q[k]);
    for (int k = 0; k < 3; ++k) g.log_scale[k] = f32(std::log(uniform(0.03, 0.09)));
    g.opacity_logit = f32(logit(uniform(0.5, 0.95)));
    Vec3 rgb;
    for (int k = 0; k < 3; ++k) rgb[k] = uniform(0.1, 0.9);
    g.sh_coeffs = {((rgb.array() - 0.5) / kShC0).matrix().unaryExpr(f32)};
    scene.canonical.push_back(g);

    Vec3 axis(normal(rng), normal(rng), normal(rng));
    axis.normalize();
    const double amp = uniform(0.5, 1.0) * o.max_amplitude;
    scene.displacement.push_back((amp * axis).unaryExpr(f32));
  }
  if (o.motion == Motion::Static) {
    for (auto& d : scene.displacement) d.setZero();
  }

  MultiViewDataset& ds = scene.dataset;
  ds.timesteps = o.timesteps;
  for (int c = 0; c < o.n_cameras; ++c) {
    char id[16];
    std::snprintf(id, sizeof(id), "%02d", c);
    ds.camera_ids.push_back(id);
    const double angle = 2.0 * std::numbers::pi * c / o.n_cameras;
    const Vec3 pos(o.ring_radius * std::sin(angle), o.ring_height, o.ring_radius * std::cos(angle));
    ds.cameras.push_back(look_at_camera(pos, Vec3::Zero(), o.image_size, o.fov_degrees));
  }
  if (o.n_cameras > 1) ds.held_out = {ds.camera_ids.front()};
  ds.frames.assign(o.n_cameras, {});
  for (int t = 0; t < o.timesteps; ++t) {
    const auto gs = scene.at_frame(t);
    for (int c = 0; c < o.n_cameras; ++c) ds.frames[c].push_back(render_ground_truth(gs, ds.cameras[c]));
  }

  std::normal_distribution<double> jitter(0.0, o.point_jitter);
  for (const auto& g : scene.canonical) {
    InitPoint p;
    for (int k = 0; k < 3; ++k) p.position[k] = g.center[k] + jitter(rng);
    p.color = (kShC0 * g.sh_coeffs[0]).array() + 0.5;
    ds.init_points.push_back(p);
  }
  return scene;
}

ViewSplit split_train_eval(const MultiViewDataset& ds, std::span<const std::string> held_out) {
  std::set<int> held;
  for (const auto& id : held_out) {
    const int idx = ds.camera_index(id);
    if (idx < 0) fail(ErrorKind::Input, "held-out camera " + id + " is not in the dataset");
    held.insert(idx);
  }
  ViewSplit split;
  for (int c = 0; c < static_cast<int>(ds.cameras.size()); ++c) {
    auto& dst = held.count(c) ? split.eval : split.train;
    for (int t = 0; t < ds.timesteps; ++t) dst.push_back({c, t});
  }
  if (split.eval.empty()) {
    split.eval_empty_warning = true;
    std::cerr << "warning: no held-out cameras; evaluation set is empty\n";
  }
  return split;
}

}  // namespace gs4d
