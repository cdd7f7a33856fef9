// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "gs4d/cli.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gs4d/datasets.hpp"
#include "gs4d/error.hpp"
#include "gs4d/image.hpp"
#include "gs4d/metrics.hpp"
#include "gs4d/stream_codec.hpp"

namespace gs4d {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Kind { Int, Real, Bool, Text };

struct Entry {
  const char* key;
  Kind kind;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int parse_int(const std::string& key, const std::string& s) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    fail(ErrorKind::Parameter, "config " + key + ": '" + s + "' is not an integer");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& s) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::Parameter, "config " + key + ": '" + s + "' is not a number");
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail(ErrorKind::Parameter, "config " + key + ": '" + s + "' is not true/false");
}

template <typename Field>
Entry int_entry(const char* key, Field field) {
  return {key, Kind::Int, [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); },
          [field, key](RunConfig& c, const std::string& s) { field(c) = parse_int(key, s); }};
}

template <typename Field>
Entry real_entry(const char* key, Field field) {
  return {key, Kind::Real, [field](const RunConfig& c) { return format_real(field(const_cast<RunConfig&>(c))); },
          [field, key](RunConfig& c, const std::string& s) { field(c) = parse_real(key, s); }};
}

#define GS4D_INT(key, expr) int_entry(key, [](RunConfig& c) -> int& { return c.expr; })
#define GS4D_REAL(key, expr) real_entry(key, [](RunConfig& c) -> double& { return c.expr; })

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t{
        GS4D_INT("model.sh_degree", model.sh_degree),
        GS4D_INT("model.embed_dim", model.embed_dim),
        GS4D_INT("model.plane_res", model.plane_res),
        GS4D_INT("model.plane_features", model.plane_features),
        GS4D_INT("model.time_freqs", model.time_freqs),
        GS4D_INT("model.hidden_width", model.hidden_width),
        {"model.freq_enc", Kind::Bool,
         [](const RunConfig& c) { return std::string(c.model.freq_enc ? "true" : "false"); },
         [](RunConfig& c, const std::string& s) { c.model.freq_enc = parse_bool("model.freq_enc", s); }},
        GS4D_INT("train.chunk_length", train.chunk_length),
        GS4D_INT("train.base_iterations", train.base_iterations),
        GS4D_INT("train.delta_iterations", train.delta_iterations),
        GS4D_REAL("train.w_ssim", train.w_ssim),
        GS4D_INT("train.densify_from", train.densify_from),
        GS4D_INT("train.densify_until", train.densify_until),
        GS4D_INT("train.densify_interval", train.densify_interval),
        GS4D_REAL("train.densify_grad_threshold", train.densify_grad_threshold),
        GS4D_REAL("train.percent_dense", train.percent_dense),
        GS4D_REAL("train.prune_opacity", train.prune_opacity),
        GS4D_INT("train.max_gaussians", train.max_gaussians),
        GS4D_INT("train.sh_increase_interval", train.sh_increase_interval),
        GS4D_INT("train.rank", train.rank),
        {"train.factor_precision", Kind::Text,
         [](const RunConfig& c) {
           return std::string(c.train.factor_precision == Precision::F16 ? "f16" : "f32");
         },
         [](RunConfig& c, const std::string& s) {
           if (s == "f32") {
             c.train.factor_precision = Precision::F32;
           } else if (s == "f16") {
             c.train.factor_precision = Precision::F16;
           } else {
             fail(ErrorKind::Parameter, "config train.factor_precision: '" + s + "' is not f32/f16");
           }
         }},
        GS4D_INT("train.random_init_points", train.random_init_points),
        {"train.seed", Kind::Int, [](const RunConfig& c) { return std::to_string(c.train.seed); },
         [](RunConfig& c, const std::string& s) {
           std::uint64_t v = 0;
           const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
           if (ec != std::errc() || p != s.data() + s.size()) {
             fail(ErrorKind::Parameter, "config train.seed: '" + s + "' is not an unsigned integer");
           }
           c.train.seed = v;
         }},
        GS4D_INT("train.log_interval", train.log_interval),
        GS4D_REAL("lr.center", train.lr.center),
        GS4D_REAL("lr.center_final", train.lr.center_final),
        GS4D_REAL("lr.rotation", train.lr.rotation),
        GS4D_REAL("lr.scale", train.lr.scale),
        GS4D_REAL("lr.opacity", train.lr.opacity),
        GS4D_REAL("lr.sh0", train.lr.sh0),
        GS4D_REAL("lr.sh_rest", train.lr.sh_rest),
        GS4D_REAL("lr.embedding", train.lr.embedding),
        GS4D_REAL("lr.plane", train.lr.plane),
        GS4D_REAL("lr.plane_final", train.lr.plane_final),
        GS4D_REAL("lr.decoder", train.lr.decoder),
        GS4D_REAL("lr.decoder_final", train.lr.decoder_final),
        GS4D_REAL("lr.factor", train.lr.factor),
        GS4D_REAL("lr.factor_final", train.lr.factor_final),
        GS4D_INT("render.tile_size", tile_size),
        GS4D_REAL("render.low_pass", low_pass),
        GS4D_REAL("render.cull_sigma", cull_sigma),
        GS4D_REAL("render.alpha_cutoff", alpha_cutoff),
        GS4D_REAL("render.background_r", background[0]),
        GS4D_REAL("render.background_g", background[1]),
        GS4D_REAL("render.background_b", background[2]),
    };
    return t;
  }();
  return table;
}

#undef GS4D_INT
#undef GS4D_REAL

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (key == e.key) return e;
  }
  fail(ErrorKind::Parameter, "unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

json config_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& e : entries()) {
    const std::string v = e.get(c);
    switch (e.kind) {
      case Kind::Int: j[e.key] = e.key == std::string("train.seed") ? json(c.train.seed) : json(std::stoll(v)); break;
      case Kind::Real: j[e.key] = std::stod(v); break;
      case Kind::Bool: j[e.key] = v == "true"; break;
      case Kind::Text: j[e.key] = v; break;
    }
  }
  return j;
}

RenderSettings render_settings(const RunConfig& c, const Camera& cam) {
  RenderSettings s = RenderSettings::for_camera(cam);
  s.tile_size = c.tile_size;
  s.low_pass = c.low_pass;
  s.cull_sigma = c.cull_sigma;
  s.alpha_cutoff = c.alpha_cutoff;
  s.background = c.background;
  return s;
}

json report_json(const EvalReport& r) {
  return {{"mean_psnr", r.mean_psnr}, {"mean_dssim", r.mean_dssim}, {"views", r.views.size()}};
}

json frames_json(FrameRange f) { return {{"start", f.start}, {"count", f.count}}; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "short write to " + path.string());
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

// Per-command flag values.
struct Flags {
  std::string config_path;
  std::vector<std::string> sets;

  // synth
  std::string out_dir;
  std::uint64_t seed = 0;
  int gaussians = 200;
  std::string motion = "oscillate";
  int cameras = 6;
  int timesteps = 100;
  int size = 96;
  double amplitude = 0.1;
  std::string oracle_stream;

  // train / render / eval / report
  std::string data;
  std::string stream;
  std::string out;
  std::string metrics;
  int chunks = 0;
  int chunk = 0;
  double time = 0.0;
  std::string camera;
  std::vector<std::string> held_out;
};

RunConfig resolve_config(const Flags& f) {
  RunConfig c;
  if (!f.config_path.empty()) load_config_file(c, f.config_path);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Parameter, "--set expects key=value, got '" + kv + "'");
    set_config_value(c, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  c.validate();
  return c;
}

// A static scene rendered from its own ground truth: canonical Gaussians,
// zero deformation field.
Bytes oracle_stream(const SynthScene& scene) {
  ModelConfig mc;
  mc.sh_degree = 0;
  mc.embed_dim = 0;
  mc.plane_res = 2;
  mc.plane_features = 1;
  mc.time_freqs = 0;
  mc.hidden_width = 1;
  mc.freq_enc = false;
  ModelState s = empty_model(mc, Bounds{});
  s.gaussians = scene.canonical;
  return encode_base_chunk(s, {0, static_cast<std::uint32_t>(scene.timesteps)});
}

int cmd_synth(const Flags& f, const RunConfig& c, std::ostream& out) {
  SynthOptions o;
  o.seed = f.seed;
  o.n_gaussians = f.gaussians;
  o.motion = parse_motion(f.motion);
  o.n_cameras = f.cameras;
  o.timesteps = f.timesteps;
  o.image_size = f.size;
  o.max_amplitude = f.amplitude;
  if (!(o.max_amplitude >= 0.0 && o.max_amplitude <= 0.1)) {
    fail(ErrorKind::Input, "--amplitude must lie in [0, 0.1]");
  }
  if (!f.oracle_stream.empty() && o.motion != Motion::Static) {
    fail(ErrorKind::Input, "--oracle-stream needs --motion static");
  }
  const SynthScene scene = synth_scene(o);

  // Replace earlier output so repeated runs give identical trees.
  const fs::path root = f.out_dir;
  if (fs::exists(root)) {
    for (const auto& entry : fs::directory_iterator(root)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("cam_", 0) == 0 && entry.is_directory()) fs::remove_all(entry.path());
    }
    fs::remove(root / "poses.json");
    fs::remove(root / "points.json");
  }
  write_multiview(scene.dataset, root);
  if (!f.oracle_stream.empty()) write_file(f.oracle_stream, oracle_stream(scene));

  json j;
  j["command"] = "synth";
  j["config"] = config_json(c);
  j["synth"] = {{"seed", o.seed},         {"gaussians", o.n_gaussians}, {"motion", to_string(o.motion)},
                {"cameras", o.n_cameras}, {"timesteps", o.timesteps},   {"image_size", o.image_size},
                {"amplitude", o.max_amplitude}};
  j["out"] = root.string();
  j["camera_ids"] = scene.dataset.camera_ids;
  j["held_out"] = scene.dataset.held_out;
  j["chunks"] = chunk_count(o.timesteps, c.train.chunk_length);
  if (!f.oracle_stream.empty()) j["oracle_stream"] = f.oracle_stream;
  out << j.dump(2) << "\n";
  return 0;
}

json metrics_line(const MetricsRecord& r) {
  return {{"chunk", r.chunk}, {"iteration", r.iteration}, {"loss", r.loss},
          {"psnr", r.psnr},   {"dssim", r.dssim},         {"wall_ms", r.wall_ms}};
}

int cmd_train(const Flags& f, const RunConfig& c, std::ostream& out) {
  MultiViewDataset ds = load_multiview(f.data);
  if (!f.held_out.empty()) {
    ds.held_out = f.held_out;
    ds.validate();
  }
  const fs::path stream_path = f.stream;
  const fs::path metrics_path = f.metrics.empty() ? fs::path(f.stream + ".metrics.jsonl") : fs::path(f.metrics);
  std::ofstream metrics(metrics_path);
  if (!metrics) fail(ErrorKind::Io, "cannot write " + metrics_path.string());

  TrainHooks hooks;
  hooks.on_metrics = [&](const MetricsRecord& r) { metrics << metrics_line(r).dump() << "\n" << std::flush; };
  const StreamResult result = train_stream(ds, c.model, c.train, f.chunks, hooks);
  write_file(stream_path, result.stream);

  json j;
  j["command"] = "train";
  j["config"] = config_json(c);
  j["data"] = f.data;
  j["stream"] = stream_path.string();
  j["metrics"] = metrics_path.string();
  j["held_out"] = ds.held_out;
  j["total_bytes"] = result.stream.size();
  j["chunks"] = json::array();
  for (const auto& s : result.chunks) {
    json cj = {{"chunk", s.chunk},
               {"frames", frames_json(s.frames)},
               {"iterations", s.iterations},
               {"gaussians", s.gaussians},
               {"bytes", s.bytes},
               {"final_loss", s.final_loss},
               {"wall_ms", s.wall_ms}};
    cj["before"] = s.before ? report_json(*s.before) : json(nullptr);
    cj["after"] = s.after ? report_json(*s.after) : json(nullptr);
    j["chunks"].push_back(cj);
  }
  const std::string text = j.dump(2) + "\n";
  if (!f.out.empty()) write_text(f.out, text);
  out << text;
  return 0;
}

int cmd_render(const Flags& f, const RunConfig& c, std::ostream& out) {
  const Bytes bytes = read_file(f.stream);
  const auto chunks = decode_stream(bytes);
  if (f.chunk < 0 || f.chunk >= static_cast<int>(chunks.size())) {
    fail(ErrorKind::Input, "--chunk " + std::to_string(f.chunk) + " not in stream with " +
                               std::to_string(chunks.size()) + " chunks");
  }
  if (!(f.time >= 0.0 && f.time <= 1.0)) fail(ErrorKind::Input, "--time must lie in [0, 1]");
  const ModelState state = reconstruct_state(std::span<const ChunkPayload>(chunks), f.chunk);
  const MultiViewDataset ds = load_multiview(f.data);
  const int cam_index = ds.camera_index(f.camera);
  if (cam_index < 0) fail(ErrorKind::Input, "camera " + f.camera + " is not in the dataset");
  const Camera& cam = ds.cameras[cam_index];
  const RenderOutput r = render_model(state, cam, f.time, render_settings(c, cam));
  write_png(f.out, quantize(r.color));

  json j;
  j["command"] = "render";
  j["config"] = config_json(c);
  j["stream"] = f.stream;
  j["chunk"] = f.chunk;
  j["frames"] = frames_json(chunks[f.chunk].header.frames);
  j["time"] = f.time;
  j["camera"] = f.camera;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["gaussians"] = state.gaussians.size();
  j["out"] = f.out;
  out << j.dump(2) << "\n";
  return 0;
}

int cmd_eval(const Flags& f, const RunConfig& c, std::ostream& out) {
  const Bytes bytes = read_file(f.stream);
  const auto chunks = decode_stream(bytes);
  const MultiViewDataset ds = load_multiview(f.data);
  const std::vector<std::string> held = f.held_out.empty() ? ds.held_out : f.held_out;
  if (held.empty()) fail(ErrorKind::Input, "no held-out camera to evaluate on");
  for (const auto& id : held) {
    if (ds.camera_index(id) < 0) fail(ErrorKind::Input, "held-out camera " + id + " is not in the dataset");
  }
  const ViewSplit split = split_train_eval(ds, held);

  json j;
  j["command"] = "eval";
  j["config"] = config_json(c);
  j["stream"] = f.stream;
  j["data"] = f.data;
  j["held_out"] = held;
  j["views"] = json::array();
  j["chunks"] = json::array();
  double psnr_sum = 0.0, dssim_sum = 0.0;
  size_t count = 0;
  std::optional<ModelState> state;
  for (size_t k = 0; k < chunks.size(); ++k) {
    state = k == 0 ? reconstruct_state(std::span<const ChunkPayload>(chunks), 0) : apply_delta(*state, chunks[k]);
    const FrameRange range = chunks[k].header.frames;
    if (static_cast<int>(range.start + range.count) > ds.timesteps) {
      fail(ErrorKind::Input, "stream chunk " + std::to_string(k) + " covers frames beyond the dataset");
    }
    const EvalReport r = evaluate(*state, ds, split.eval, range);
    for (const auto& v : r.views) {
      j["views"].push_back({{"chunk", k}, {"camera", v.camera}, {"frame", v.frame}, {"psnr", v.psnr}, {"dssim", v.dssim}});
      psnr_sum += v.psnr;
      dssim_sum += v.dssim;
      ++count;
    }
    json cj = report_json(r);
    cj["chunk"] = k;
    cj["frames"] = frames_json(range);
    j["chunks"].push_back(cj);
  }
  j["mean_psnr"] = count ? psnr_sum / count : 0.0;
  j["mean_dssim"] = count ? dssim_sum / count : 0.0;
  const std::string text = j.dump(2) + "\n";
  if (!f.out.empty()) write_text(f.out, text);
  out << text;
  return 0;
}

int cmd_report(const Flags& f, const RunConfig& c, std::ostream& out) {
  const BandwidthReport r = bandwidth_report(read_file(f.stream));
  json j;
  j["command"] = "report";
  j["config"] = config_json(c);
  j["stream"] = f.stream;
  j["chunks"] = json::array();
  for (const auto& cb : r.chunks) {
    j["chunks"].push_back({{"chunk", cb.chunk_index},
                           {"kind", cb.kind == PayloadKind::Base ? "base" : "delta"},
                           {"frame_count", cb.frame_count},
                           {"bytes", cb.bytes},
                           {"payload_bytes", cb.payload_bytes},
                           {"factor_bytes", cb.factor_bytes},
                           {"bytes_per_frame", cb.bytes_per_frame}});
  }
  j["total_bytes"] = r.total_bytes;
  j["base_bytes"] = r.base_bytes;
  j["delta_total_bytes"] = r.delta_total_bytes;
  j["full_plane_bytes"] = optional_json(r.full_plane_bytes);
  j["mean_delta_chunk_bytes"] = optional_json(r.mean_delta_chunk_bytes);
  j["delta_to_full_ratio"] = optional_json(r.delta_to_full_ratio);
  j["factor_to_full_ratio"] = optional_json(r.factor_to_full_ratio);
  j["reduction_ratio"] = optional_json(r.reduction_ratio);
  j["reduction_ratio_ex_overhead"] = optional_json(r.reduction_ratio_ex_overhead);
  const std::string text = j.dump(2) + "\n";
  if (!f.out.empty()) write_text(f.out, text);
  out << text;
  return 0;
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}}.dump() << "\n";
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (tile_size < 1) fail(ErrorKind::Parameter, "render.tile_size must be >= 1");
  if (!(low_pass >= 0.0)) fail(ErrorKind::Parameter, "render.low_pass must be >= 0");
  if (!(cull_sigma >= 0.0)) fail(ErrorKind::Parameter, "render.cull_sigma must be >= 0");
  if (!(alpha_cutoff > 0.0 && alpha_cutoff < 1.0)) fail(ErrorKind::Parameter, "render.alpha_cutoff must lie in (0, 1)");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.push_back(e.key);
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  find_entry(key).set(config, value);
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
  return find_entry(key).get(config);
}

void load_config_file(RunConfig& config, const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "cannot open config " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::Parameter, path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string format_config_file(const RunConfig& config) {
  std::string s;
  for (const auto& e : entries()) s += std::string(e.key) + " = " + e.get(config) + "\n";
  return s;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InconsistentState:
    case ErrorKind::DegenerateRotation:
    case ErrorKind::BehindCamera:
      return 2;
    default:
      return 1;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streamable dynamic Gaussian splatting: synthesize, train, render, evaluate, report.", "gs4d"};
  app.require_subcommand(1);
  Flags f;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config_path, "Flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", f.sets, "Override one config key: key=value (repeatable)");
  };

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic multi-view dataset");
  common(synth);
  synth->add_option("--out", f.out_dir, "Output dataset directory")->required();
  synth->add_option("--seed", f.seed, "Scene seed");
  synth->add_option("--gaussians", f.gaussians, "Gaussian count")->check(CLI::NonNegativeNumber);
  synth->add_option("--motion", f.motion, "static | oscillate | drift");
  synth->add_option("--cameras", f.cameras, "Cameras on the ring")->check(CLI::PositiveNumber);
  synth->add_option("--timesteps", f.timesteps, "Frames per camera")->check(CLI::PositiveNumber);
  synth->add_option("--size", f.size, "Square image size in pixels")->check(CLI::PositiveNumber);
  synth->add_option("--amplitude", f.amplitude, "Maximum motion amplitude (<= 0.1)");
  synth->add_option("--oracle-stream", f.oracle_stream, "Also write the ground truth as a stream (static only)");

  CLI::App* train = app.add_subcommand("train", "Train a base chunk and delta chunks into a stream");
  common(train);
  train->add_option("--data", f.data, "Dataset directory")->required();
  train->add_option("--out-stream", f.stream, "Output .gs4d stream")->required();
  train->add_option("--chunks", f.chunks, "Train at most N chunks (0 = all)")->check(CLI::NonNegativeNumber);
  train->add_option("--metrics", f.metrics, "JSON-lines metrics file (default <stream>.metrics.jsonl)");
  train->add_option("--out", f.out, "Also write the summary JSON here");
  train->add_option("--held-out", f.held_out, "Held-out camera id (repeatable; default from poses.json)");

  CLI::App* render = app.add_subcommand("render", "Render one view from a stream");
  common(render);
  render->add_option("--stream", f.stream, "Input .gs4d stream")->required();
  render->add_option("--data", f.data, "Dataset directory holding the camera")->required();
  render->add_option("--camera", f.camera, "Camera id")->required();
  render->add_option("--chunk", f.chunk, "Chunk index");
  render->add_option("--time", f.time, "Normalized time within the chunk, [0, 1]");
  render->add_option("--out", f.out, "Output PNG")->required();

  CLI::App* eval = app.add_subcommand("eval", "Held-out PSNR/DSSIM of every chunk of a stream");
  common(eval);
  eval->add_option("--stream", f.stream, "Input .gs4d stream")->required();
  eval->add_option("--data", f.data, "Dataset directory")->required();
  eval->add_option("--held-out", f.held_out, "Held-out camera id (repeatable; default from poses.json)");
  eval->add_option("--out", f.out, "Also write the metrics JSON here");

  CLI::App* report = app.add_subcommand("report", "Byte accounting of a stream");
  common(report);
  report->add_option("--stream", f.stream, "Input .gs4d stream")->required();
  report->add_option("--out", f.out, "Also write the report JSON here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what(), 1);
    return 1;
  }

  try {
    const RunConfig config = resolve_config(f);
    if (*synth) return cmd_synth(f, config, out);
    if (*train) return cmd_train(f, config, out);
    if (*render) return cmd_render(f, config, out);
    if (*eval) return cmd_eval(f, config, out);
    return cmd_report(f, config, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    print_error(err, std::string(to_string(e.kind())), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what(), 2);
    return 2;
  }
}

}  // namespace gs4d
