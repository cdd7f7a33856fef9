// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "gs4d/cli.hpp"
#include "gs4d/datasets.hpp"
#include "gs4d/image.hpp"
#include "gs4d/stream_codec.hpp"
#include "test_util.hpp"

namespace gs4d {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
  json out_json() const { return json::parse(out); }
  json err_json() const { return json::parse(err); }
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

const char* const kTinyConfig = R"(# small enough to train in well under a second
model.embed_dim = 4
model.plane_res = 8
model.plane_features = 2
model.time_freqs = 2
model.hidden_width = 16
train.chunk_length = 3   # two chunks over six frames
train.base_iterations = 30
train.delta_iterations = 15
train.densify_from = 10
train.densify_until = 20
train.densify_interval = 10
train.rank = 2
train.log_interval = 5
)";

TEST(Config, DefaultsRoundTripThroughFile) {
  TempDir dir;
  const RunConfig defaults;
  std::ofstream(dir.path() / "all.cfg") << format_config_file(defaults);
  RunConfig loaded;
  set_config_value(loaded, "train.rank", "7");
  load_config_file(loaded, dir.path() / "all.cfg");
  for (const auto& key : config_keys()) {
    EXPECT_EQ(get_config_value(loaded, key), get_config_value(defaults, key)) << key;
  }
  EXPECT_EQ(loaded.train.rank, defaults.train.rank);
}

TEST(Config, RealValuesRoundTripExactly) {
  RunConfig c;
  c.train.lr.center = 1.0 / 3.0;
  RunConfig d;
  set_config_value(d, "lr.center", get_config_value(c, "lr.center"));
  EXPECT_EQ(d.train.lr.center, c.train.lr.center);
}

TEST(Config, SetParsesEveryKind) {
  RunConfig c;
  set_config_value(c, "model.freq_enc", "false");
  set_config_value(c, "train.factor_precision", "f16");
  set_config_value(c, "train.seed", "18446744073709551615");
  set_config_value(c, "render.background_g", "0.5");
  set_config_value(c, "train.w_ssim", "0");
  EXPECT_FALSE(c.model.freq_enc);
  EXPECT_EQ(c.train.factor_precision, Precision::F16);
  EXPECT_EQ(c.train.seed, 18446744073709551615ull);
  EXPECT_EQ(c.background[1], 0.5);
  EXPECT_EQ(c.train.w_ssim, 0.0);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  RunConfig c;
  const auto kind_of = [&](const std::string& key, const std::string& value) {
    try {
      set_config_value(c, key, value);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  EXPECT_EQ(kind_of("train.nope", "1"), ErrorKind::Parameter);
  EXPECT_EQ(kind_of("train.rank", "two"), ErrorKind::Parameter);
  EXPECT_EQ(kind_of("train.rank", "2.5"), ErrorKind::Parameter);
  EXPECT_EQ(kind_of("lr.center", "1e-3x"), ErrorKind::Parameter);
  EXPECT_EQ(kind_of("model.freq_enc", "yes"), ErrorKind::Parameter);
  EXPECT_EQ(kind_of("train.factor_precision", "f64"), ErrorKind::Parameter);
  EXPECT_EQ(kind_of("train.seed", "-1"), ErrorKind::Parameter);
}

TEST(Config, FileWithoutEqualsIsRejected) {
  TempDir dir;
  std::ofstream(dir.path() / "bad.cfg") << "train.rank = 2\ntrain.rank 3\n";
  RunConfig c;
  try {
    load_config_file(c, dir.path() / "bad.cfg");
    FAIL() << "expected a throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parameter);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Config, ValidateRejectsOutOfRange) {
  RunConfig c;
  c.alpha_cutoff = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = RunConfig();
  c.train.rank = 0;
  EXPECT_THROW(c.validate(), Error);
  RunConfig().validate();
}

TEST(ExitCode, InputsVersusInternal) {
  EXPECT_EQ(exit_code_for(ErrorKind::MissingFile), 1);
  EXPECT_EQ(exit_code_for(ErrorKind::Checksum), 1);
  EXPECT_EQ(exit_code_for(ErrorKind::Parameter), 1);
  EXPECT_EQ(exit_code_for(ErrorKind::Input), 1);
  EXPECT_EQ(exit_code_for(ErrorKind::InconsistentState), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::DegenerateRotation), 2);
}

TEST(Cli, HelpExitsZero) {
  const CliRun r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("synth"), std::string::npos);
  EXPECT_EQ(run({"train", "--help"}).code, 0);
}

TEST(Cli, UsageErrorsAreJsonOnStderr) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"fly"}, {"report"}, {"report", "--stream", "x", "--bogus"}, {"synth", "--out", "x", "--size", "-3"}}) {
    const CliRun r = run(args);
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(r.out.empty());
    const json e = r.err_json();
    EXPECT_EQ(e["exit_code"], 1);
    EXPECT_EQ(e["error"]["kind"], "usage");
  }
}

TEST(Cli, MissingStreamIsInputError) {
  TempDir dir;
  const CliRun r = run({"report", "--stream", (dir.path() / "none.gs4d").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err_json()["error"]["kind"], "missing_file");
}

TEST(Cli, CorruptStreamIsInputError) {
  TempDir dir;
  Bytes junk(40, 0x11);
  write_file(dir.path() / "junk.gs4d", junk);
  const CliRun r = run({"report", "--stream", (dir.path() / "junk.gs4d").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err_json()["error"]["kind"], "bad_magic");
}

TEST(Cli, BadSetIsParameterError) {
  TempDir dir;
  const CliRun r = run({"synth", "--out", dir.path().string(), "--set", "train.rank=zero"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err_json()["error"]["kind"], "parameter");
  const CliRun r2 = run({"synth", "--out", dir.path().string(), "--set", "train.rank"});
  EXPECT_EQ(r2.code, 1);
}

TEST(Cli, OracleStreamNeedsStaticMotion) {
  TempDir dir;
  const CliRun r = run({"synth", "--out", (dir.path() / "d").string(), "--size", "8", "--timesteps", "2",
                     "--oracle-stream", (dir.path() / "o.gs4d").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err_json()["error"]["kind"], "input");
  EXPECT_FALSE(fs::exists(dir.path() / "o.gs4d"));
}

TEST(Cli, StaticOracleStreamIsPerfect) {
  TempDir dir;
  const std::string data = (dir.path() / "d").string(), stream = (dir.path() / "o.gs4d").string();
  ASSERT_EQ(run({"synth", "--out", data, "--motion", "static", "--gaussians", "40", "--cameras", "3",
                 "--timesteps", "2", "--size", "24", "--oracle-stream", stream})
                .code,
            0);
  const CliRun r = run({"eval", "--stream", stream, "--data", data});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out_json()["mean_psnr"], 99.0);
  EXPECT_EQ(r.out_json()["mean_dssim"], 0.0);
}

TEST(Cli, SynthIsIdempotent) {
  TempDir dir;
  const std::string data = (dir.path() / "d").string();
  const std::vector<std::string> args = {"synth", "--out", data, "--cameras", "5", "--timesteps", "2", "--size", "12"};
  ASSERT_EQ(run(args).code, 0);
  const MultiViewDataset first = load_multiview(data);
  // A smaller ring written over the first must leave no stale cameras.
  ASSERT_EQ(run({"synth", "--out", data, "--cameras", "3", "--timesteps", "2", "--size", "12"}).code, 0);
  EXPECT_EQ(load_multiview(data).cameras.size(), 3u);
  ASSERT_EQ(run(args).code, 0);
  const MultiViewDataset again = load_multiview(data);
  ASSERT_EQ(again.camera_ids, first.camera_ids);
  for (size_t c = 0; c < first.frames.size(); ++c) {
    for (size_t t = 0; t < first.frames[c].size(); ++t) EXPECT_EQ(again.frames[c][t].data, first.frames[c][t].data);
  }
}

// One tiny dataset and stream shared by the pipeline tests.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<TempDir>();
    std::ofstream(cfg()) << kTinyConfig;
    const CliRun s = run({"synth", "--out", data(), "--seed", "3", "--gaussians", "24", "--cameras", "4",
                       "--timesteps", "6", "--size", "24", "--config", cfg()});
    ASSERT_EQ(s.code, 0) << s.err;
    synth_ = new CliRun(s);
    const CliRun t = run({"train", "--config", cfg(), "--data", data(), "--out-stream", stream(), "--set",
                       "train.seed=5", "--out", (dir_->path() / "train.json").string()});
    ASSERT_EQ(t.code, 0) << t.err;
    train_ = new CliRun(t);
  }
  static void TearDownTestSuite() {
    delete synth_;
    delete train_;
    dir_.reset();
  }

  static std::string cfg() { return (dir_->path() / "tiny.cfg").string(); }
  static std::string data() { return (dir_->path() / "data").string(); }
  static std::string stream() { return (dir_->path() / "s.gs4d").string(); }

  static inline std::unique_ptr<TempDir> dir_;
  static inline CliRun* synth_ = nullptr;
  static inline CliRun* train_ = nullptr;
};

TEST_F(Pipeline, SynthSummary) {
  const json j = synth_->out_json();
  EXPECT_EQ(j["command"], "synth");
  EXPECT_EQ(j["chunks"], 2);
  EXPECT_EQ(j["camera_ids"].size(), 4u);
  EXPECT_EQ(j["config"]["train.chunk_length"], 3);
  EXPECT_EQ(j["synth"]["motion"], "oscillate");
}

TEST_F(Pipeline, TrainEchoesResolvedConfig) {
  const json c = train_->out_json()["config"];
  EXPECT_EQ(c.size(), config_keys().size());
  EXPECT_EQ(c["train.seed"], 5);
  EXPECT_EQ(c["model.hidden_width"], 16);
  EXPECT_EQ(c["train.base_iterations"], 30);
  EXPECT_EQ(c["train.factor_precision"], "f32");
  EXPECT_EQ(c["model.freq_enc"], true);
  EXPECT_EQ(c["train.w_ssim"], 0.2);
}

TEST_F(Pipeline, TrainSummaryMatchesStream) {
  const json j = train_->out_json();
  const Bytes bytes = read_file(stream());
  EXPECT_EQ(j["total_bytes"], bytes.size());
  ASSERT_EQ(j["chunks"].size(), 2u);
  EXPECT_EQ(j["chunks"][0]["before"], nullptr);
  EXPECT_TRUE(j["chunks"][1]["before"].is_object());
  EXPECT_EQ(j["chunks"][1]["frames"]["start"], 3);
  std::uint64_t sum = 0;
  for (const auto& c : j["chunks"]) sum += c["bytes"].get<std::uint64_t>();
  EXPECT_EQ(sum, bytes.size());
  std::ifstream saved(dir_->path() / "train.json");
  EXPECT_EQ(json::parse(saved), j);
}

TEST_F(Pipeline, MetricsFileHasOneRecordPerLogStep) {
  std::ifstream in(stream() + ".metrics.jsonl");
  ASSERT_TRUE(in);
  std::string line;
  int lines = 0, delta = 0;
  while (std::getline(in, line)) {
    const json r = json::parse(line);
    for (const char* key : {"chunk", "iteration", "loss", "psnr", "dssim", "wall_ms"}) EXPECT_TRUE(r.contains(key));
    delta += r["chunk"] == 1;
    ++lines;
  }
  // Records at iterations 0, 5, ... plus the last one of each chunk.
  EXPECT_EQ(lines, 7 + 4);
  EXPECT_EQ(delta, 4);
}

TEST_F(Pipeline, ReportMatchesLibrary) {
  const CliRun r = run({"report", "--stream", stream()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = r.out_json();
  const BandwidthReport b = bandwidth_report(read_file(stream()));
  EXPECT_EQ(j["total_bytes"], b.total_bytes);
  EXPECT_EQ(j["base_bytes"], b.base_bytes);
  EXPECT_EQ(j["full_plane_bytes"], *b.full_plane_bytes);
  EXPECT_EQ(j["reduction_ratio"], *b.reduction_ratio);
  EXPECT_EQ(j["chunks"][1]["kind"], "delta");
  EXPECT_EQ(j["chunks"][1]["factor_bytes"], b.chunks[1].factor_bytes);
  // 3 planes * 2 channels * rank 2 * (8 + 8) floats of 4 bytes.
  EXPECT_EQ(j["chunks"][1]["factor_bytes"], 3 * 2 * 2 * 16 * 4);
}

TEST_F(Pipeline, ReportOfBaseOnlyStreamHasNulls) {
  const Bytes all = read_file(stream());
  const auto chunks = decode_stream(all);
  const fs::path base = dir_->path() / "base.gs4d";
  write_file(base, std::span<const std::uint8_t>(all.data(), 32 + chunks[0].header.payload_bytes));
  const CliRun r = run({"report", "--stream", base.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out_json()["reduction_ratio"], nullptr);
  EXPECT_EQ(r.out_json()["mean_delta_chunk_bytes"], nullptr);
}

TEST_F(Pipeline, EvalMatchesLibrary) {
  const CliRun r = run({"eval", "--stream", stream(), "--data", data()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = r.out_json();
  const MultiViewDataset ds = load_multiview(data());
  const Bytes bytes = read_file(stream());
  const ViewSplit split = split_train_eval(ds, ds.held_out);
  double sum = 0.0;
  for (int k = 0; k < 2; ++k) {
    const ModelState s = reconstruct_state(bytes, k);
    const EvalReport e = evaluate(s, ds, split.eval, chunk_frames(ds.timesteps, 3, k));
    EXPECT_DOUBLE_EQ(j["chunks"][k]["mean_psnr"].get<double>(), e.mean_psnr);
    for (const auto& v : e.views) sum += v.psnr;
  }
  EXPECT_EQ(j["views"].size(), 6u);
  EXPECT_NEAR(j["mean_psnr"].get<double>(), sum / 6.0, 1e-9);
  // Training summaries see the same numbers.
  EXPECT_DOUBLE_EQ(train_->out_json()["chunks"][1]["after"]["mean_psnr"].get<double>(),
                   j["chunks"][1]["mean_psnr"].get<double>());
}

TEST_F(Pipeline, EvalHeldOutOverride) {
  const MultiViewDataset ds = load_multiview(data());
  const CliRun r = run({"eval", "--stream", stream(), "--data", data(), "--held-out", ds.camera_ids[0],
                     "--held-out", ds.camera_ids[1]});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out_json()["views"].size(), 12u);
  const CliRun bad = run({"eval", "--stream", stream(), "--data", data(), "--held-out", "zz"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(bad.err_json()["error"]["kind"], "input");
}

TEST_F(Pipeline, RenderMatchesLibrary) {
  const MultiViewDataset ds = load_multiview(data());
  const fs::path png = dir_->path() / "view.png";
  const CliRun r = run({"render", "--stream", stream(), "--data", data(), "--camera", ds.camera_ids[2], "--chunk",
                     "1", "--time", "0.25", "--out", png.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const ModelState s = reconstruct_state(read_file(stream()), 1);
  const Camera& cam = ds.cameras[2];
  const ImageU8 expected = quantize(render_model(s, cam, 0.25, RenderSettings::for_camera(cam)).color);
  const ImageU8 got = read_png(png);
  EXPECT_EQ(got.width, cam.width);
  EXPECT_EQ(got.data, expected.data);
}

TEST_F(Pipeline, RenderKnobsChangeTheImage) {
  const MultiViewDataset ds = load_multiview(data());
  const fs::path a = dir_->path() / "a.png", b = dir_->path() / "b.png";
  ASSERT_EQ(run({"render", "--stream", stream(), "--data", data(), "--camera", ds.camera_ids[0], "--out",
                 a.string()})
                .code,
            0);
  ASSERT_EQ(run({"render", "--stream", stream(), "--data", data(), "--camera", ds.camera_ids[0], "--out",
                 b.string(), "--set", "render.background_r=1"})
                .code,
            0);
  EXPECT_NE(read_png(a).data, read_png(b).data);
}

TEST_F(Pipeline, RenderRejectsBadArguments) {
  const MultiViewDataset ds = load_multiview(data());
  const std::string out = (dir_->path() / "x.png").string();
  for (const auto& extra : std::vector<std::vector<std::string>>{
           {"--chunk", "2"}, {"--chunk", "-1"}, {"--time", "1.5"}, {"--time", "-0.1"}}) {
    std::vector<std::string> args = {"render", "--stream", stream(), "--data", data(),
                                     "--camera", ds.camera_ids[0], "--out", out};
    args.insert(args.end(), extra.begin(), extra.end());
    const CliRun r = run(args);
    EXPECT_EQ(r.code, 1) << extra[0] << " " << extra[1];
    EXPECT_EQ(r.err_json()["error"]["kind"], "input");
  }
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(Pipeline, TrainIsDeterministic) {
  const std::string again = (dir_->path() / "again.gs4d").string();
  const CliRun t = run({"train", "--config", cfg(), "--data", data(), "--out-stream", again, "--set", "train.seed=5",
                     "--metrics", (dir_->path() / "again.jsonl").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(read_file(again), read_file(stream()));
}

}  // namespace
}  // namespace gs4d
