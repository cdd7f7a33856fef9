// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "gs4d/stream_codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <zlib.h>

#include "gs4d/error.hpp"
#include "gs4d/half.hpp"

namespace gs4d {

namespace {

class Writer {
 public:
  explicit Writer(Bytes& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(value);
    for (size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void f32(double value) { put(std::bit_cast<std::uint32_t>(static_cast<float>(value))); }
  void f16(double value) {
    const float f = static_cast<float>(value);
    if (!std::isfinite(f) || std::abs(f) > kHalfMax) {
      fail(ErrorKind::Parameter, "factor value not representable in half precision");
    }
    put(float_to_half(f));
  }
  void real(double value, Precision p) { p == Precision::F16 ? f16(value) : f32(value); }

 private:
  Bytes& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double real(Precision p) {
    return p == Precision::F16 ? static_cast<double>(half_to_float(get<std::uint16_t>())) : f32();
  }
  void need(size_t n) const {
    if (in_.size() - pos_ < n) fail(ErrorKind::Truncated, "chunk payload ends early");
  }
  size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  size_t pos_ = 0;
};

void write_matrix(Writer& w, const Eigen::MatrixXd& m, Precision p = Precision::F32) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.real(m(r, c), p);
  }
}

Eigen::MatrixXd read_matrix(Reader& r, Eigen::Index rows, Eigen::Index cols,
                            Precision p = Precision::F32) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.real(p);
  }
  return m;
}

Bytes finish_chunk(const ChunkHeader& h, const Bytes& payload) {
  Bytes out;
  out.reserve(kHeaderBytes + payload.size());
  Writer w(out);
  for (char c : kStreamMagic) out.push_back(static_cast<std::uint8_t>(c));
  w.put(h.version);
  w.put(static_cast<std::uint8_t>(h.kind));
  w.put(static_cast<std::uint8_t>(h.precision));
  w.put(h.chunk_index);
  w.put(h.frames.start);
  w.put(h.frames.count);
  w.put(static_cast<std::uint64_t>(payload.size()));
  w.put(crc32_of(payload));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

void check_frames(FrameRange frames) {
  if (frames.count < 1) fail(ErrorKind::Protocol, "frame_count must be >= 1");
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  size_t pos = 0;
  while (pos < bytes.size()) {
    const size_t n = std::min<size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::size_t base_payload_size(const ModelConfig& c, std::size_t n) {
  const size_t per_gaussian = 3 + 4 + 3 + 1 + 3 * sh_coeff_count(c.sh_degree) + c.embed_dim;
  const size_t planes = 3 * static_cast<size_t>(c.plane_features) * c.plane_res * c.plane_res;
  const size_t in = c.decoder_input_width(), hid = c.hidden_width;
  const size_t decoder = (in * hid + hid) + (hid * hid + hid) + kDeformOutputs * hid + kDeformOutputs;
  return kConfigBlockBytes + 4 * (n * per_gaussian + planes + decoder);
}

std::size_t factor_record_size(std::size_t rows, std::size_t cols, std::size_t rank,
                               Precision precision) {
  const size_t scalar = precision == Precision::F16 ? 2 : 4;
  return kFactorRecordHeaderBytes + scalar * rank * (rows + cols);
}

Bytes encode_base_chunk(const ModelState& state, FrameRange frames) {
  state.validate();
  check_frames(frames);
  const ModelConfig& c = state.config;
  Bytes payload;
  payload.reserve(base_payload_size(c, state.gaussians.size()));
  Writer w(payload);
  w.put(static_cast<std::uint32_t>(c.sh_degree));
  w.put(static_cast<std::uint32_t>(c.embed_dim));
  w.put(static_cast<std::uint32_t>(c.plane_res));
  w.put(static_cast<std::uint32_t>(c.plane_features));
  w.put(static_cast<std::uint32_t>(c.time_freqs));
  w.put(static_cast<std::uint32_t>(c.hidden_width));
  w.put(static_cast<std::uint32_t>(c.freq_enc ? 1u : 0u));
  for (int k = 0; k < 3; ++k) w.f32(state.planes.bounds.min[k]);
  for (int k = 0; k < 3; ++k) w.f32(state.planes.bounds.max[k]);
  w.put(static_cast<std::uint32_t>(state.gaussians.size()));

  const auto& gs = state.gaussians;
  for (const auto& g : gs) for (int k = 0; k < 3; ++k) w.f32(g.center[k]);
  for (const auto& g : gs) for (int k = 0; k < 4; ++k) w.f32(g.rotation[k]);
  for (const auto& g : gs) for (int k = 0; k < 3; ++k) w.f32(g.log_scale[k]);
  for (const auto& g : gs) w.f32(g.opacity_logit);
  for (const auto& g : gs) {
    for (const auto& sh : g.sh_coeffs) for (int k = 0; k < 3; ++k) w.f32(sh[k]);
  }
  for (const auto& g : gs) for (Eigen::Index k = 0; k < g.embedding.size(); ++k) w.f32(g.embedding[k]);

  for (const auto& plane : state.planes.channels) {
    for (const auto& m : plane) write_matrix(w, m);
  }
  for (const DenseLayer* layer : state.decoder.layers()) {
    write_matrix(w, layer->weight);
    for (Eigen::Index k = 0; k < layer->bias.size(); ++k) w.f32(layer->bias[k]);
  }

  ChunkHeader h;
  h.kind = PayloadKind::Base;
  h.chunk_index = 0;
  h.frames = frames;
  return finish_chunk(h, payload);
}

Bytes encode_delta_chunk(std::span<const LowRankFactor> factors, std::uint32_t chunk_index,
                         FrameRange frames, Precision precision) {
  if (chunk_index == 0) fail(ErrorKind::Protocol, "chunk 0 must carry the base model");
  check_frames(frames);
  Bytes payload;
  Writer w(payload);
  for (const auto& f : factors) {
    f.validate();
    if (f.target.plane < 0 || f.target.plane >= kPlaneCount || f.target.channel < 0 ||
        f.target.channel > 0xffff || f.rank() > 0xffff) {
      fail(ErrorKind::Parameter, "factor target or rank does not fit the record format");
    }
    w.put(static_cast<std::uint8_t>(f.target.plane));
    w.put(static_cast<std::uint8_t>(0));
    w.put(static_cast<std::uint16_t>(f.target.channel));
    w.put(static_cast<std::uint16_t>(f.rank()));
    w.put(static_cast<std::uint16_t>(0));
    w.put(static_cast<std::uint32_t>(f.u.rows()));
    w.put(static_cast<std::uint32_t>(f.v.rows()));
    write_matrix(w, f.u, precision);
    write_matrix(w, f.v, precision);
  }
  ChunkHeader h;
  h.kind = PayloadKind::Delta;
  h.precision = precision;
  h.chunk_index = chunk_index;
  h.frames = frames;
  return finish_chunk(h, payload);
}

namespace {

ModelState decode_base(Reader& r) {
  ModelConfig c;
  c.sh_degree = static_cast<int>(r.get<std::uint32_t>());
  c.embed_dim = static_cast<int>(r.get<std::uint32_t>());
  c.plane_res = static_cast<int>(r.get<std::uint32_t>());
  c.plane_features = static_cast<int>(r.get<std::uint32_t>());
  c.time_freqs = static_cast<int>(r.get<std::uint32_t>());
  c.hidden_width = static_cast<int>(r.get<std::uint32_t>());
  const std::uint32_t flags = r.get<std::uint32_t>();
  c.freq_enc = (flags & 1u) != 0;
  Bounds b;
  for (int k = 0; k < 3; ++k) b.min[k] = r.f32();
  for (int k = 0; k < 3; ++k) b.max[k] = r.f32();
  const std::uint32_t n = r.get<std::uint32_t>();
  if (c.sh_degree < 0 || c.sh_degree > kMaxShDegree || c.embed_dim < 0 || c.plane_res < 2 ||
      c.plane_res > (1 << 14) || c.plane_features < 1 || c.plane_features > (1 << 14) ||
      c.time_freqs < 0 || c.time_freqs > 64 || c.hidden_width < 1 || c.hidden_width > (1 << 16) ||
      c.embed_dim > (1 << 16) || (flags & ~1u) != 0) {
    fail(ErrorKind::Protocol, "base chunk config block is out of range");
  }
  const size_t expected = base_payload_size(c, n) - kConfigBlockBytes;
  if (r.remaining() < expected) fail(ErrorKind::Truncated, "base payload shorter than its config implies");
  if (r.remaining() > expected) fail(ErrorKind::Protocol, "base payload has trailing bytes");

  ModelState s = empty_model(c, b);
  s.gaussians.resize(n);
  const int sh_count = sh_coeff_count(c.sh_degree);
  for (auto& g : s.gaussians) for (int k = 0; k < 3; ++k) g.center[k] = r.f32();
  for (auto& g : s.gaussians) for (int k = 0; k < 4; ++k) g.rotation[k] = r.f32();
  for (auto& g : s.gaussians) for (int k = 0; k < 3; ++k) g.log_scale[k] = r.f32();
  for (auto& g : s.gaussians) g.opacity_logit = r.f32();
  for (auto& g : s.gaussians) {
    g.sh_coeffs.resize(sh_count);
    for (auto& sh : g.sh_coeffs) for (int k = 0; k < 3; ++k) sh[k] = r.f32();
  }
  for (auto& g : s.gaussians) {
    g.embedding.resize(c.embed_dim);
    for (int k = 0; k < c.embed_dim; ++k) g.embedding[k] = r.f32();
  }
  for (auto& plane : s.planes.channels) {
    for (auto& m : plane) m = read_matrix(r, c.plane_res, c.plane_res);
  }
  for (DenseLayer* layer : s.decoder.layers()) {
    layer->weight = read_matrix(r, layer->weight.rows(), layer->weight.cols());
    for (Eigen::Index k = 0; k < layer->bias.size(); ++k) layer->bias[k] = r.f32();
  }
  return s;
}

std::vector<LowRankFactor> decode_delta(Reader& r, const ChunkHeader& h) {
  std::vector<LowRankFactor> factors;
  while (r.remaining() > 0) {
    LowRankFactor f;
    f.target.plane = r.get<std::uint8_t>();
    r.get<std::uint8_t>();
    f.target.channel = r.get<std::uint16_t>();
    const int rank = r.get<std::uint16_t>();
    r.get<std::uint16_t>();
    const std::uint32_t rows = r.get<std::uint32_t>();
    const std::uint32_t cols = r.get<std::uint32_t>();
    if (f.target.plane >= kPlaneCount || rank < 1 || rank > static_cast<int>(std::min(rows, cols))) {
      fail(ErrorKind::Protocol, "factor record header is invalid");
    }
    const size_t scalar = h.precision == Precision::F16 ? 2 : 4;
    r.need(scalar * static_cast<size_t>(rank) * (static_cast<size_t>(rows) + cols));
    f.u = read_matrix(r, rows, rank, h.precision);
    f.v = read_matrix(r, cols, rank, h.precision);
    f.chunk_index = static_cast<int>(h.chunk_index);
    factors.push_back(std::move(f));
  }
  return factors;
}

}  // namespace

ChunkPayload decode_chunk(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  if (bytes.size() < kHeaderBytes) fail(ErrorKind::Truncated, "chunk shorter than its header");
  if (std::memcmp(bytes.data(), kStreamMagic, 4) != 0) fail(ErrorKind::BadMagic, "missing GS4D magic");
  Reader hr(bytes.subspan(4, kHeaderBytes - 4));
  ChunkPayload out;
  ChunkHeader& h = out.header;
  h.version = hr.get<std::uint16_t>();
  if (h.version != kFormatVersion) {
    fail(ErrorKind::VersionMismatch, "unsupported format version " + std::to_string(h.version));
  }
  const auto kind = hr.get<std::uint8_t>();
  const auto precision = hr.get<std::uint8_t>();
  h.chunk_index = hr.get<std::uint32_t>();
  h.frames.start = hr.get<std::uint32_t>();
  h.frames.count = hr.get<std::uint32_t>();
  h.payload_bytes = hr.get<std::uint64_t>();
  h.checksum = hr.get<std::uint32_t>();
  if (bytes.size() - kHeaderBytes < h.payload_bytes) {
    fail(ErrorKind::Truncated, "stream ends before the declared payload");
  }
  const auto payload = bytes.subspan(kHeaderBytes, static_cast<size_t>(h.payload_bytes));
  if (crc32_of(payload) != h.checksum) fail(ErrorKind::Checksum, "payload checksum mismatch");

  if (kind > 1 || precision > 1) fail(ErrorKind::Protocol, "unknown payload kind or precision");
  h.kind = static_cast<PayloadKind>(kind);
  h.precision = static_cast<Precision>(precision);
  if ((h.chunk_index == 0) != (h.kind == PayloadKind::Base)) {
    fail(ErrorKind::Protocol, "chunk 0 must be Base and only chunk 0 may be Base");
  }
  if (h.kind == PayloadKind::Base && h.precision != Precision::F32) {
    fail(ErrorKind::Protocol, "base chunks are always f32");
  }
  if (h.frames.count < 1) fail(ErrorKind::Protocol, "frame_count must be >= 1");

  Reader r(payload);
  if (h.kind == PayloadKind::Base) {
    out.base = decode_base(r);
  } else {
    out.factors = decode_delta(r, h);
  }
  if (consumed) *consumed = kHeaderBytes + payload.size();
  return out;
}

std::vector<ChunkPayload> decode_stream(std::span<const std::uint8_t> bytes) {
  std::vector<ChunkPayload> chunks;
  size_t pos = 0;
  while (pos < bytes.size()) {
    size_t used = 0;
    chunks.push_back(decode_chunk(bytes.subspan(pos), &used));
    pos += used;
  }
  return chunks;
}

ModelState apply_delta(const ModelState& previous, const ChunkPayload& delta) {
  if (delta.header.kind != PayloadKind::Delta) fail(ErrorKind::Protocol, "expected a delta chunk");
  ModelState next = previous;
  for (const auto& f : delta.factors) {
    if (f.target.channel >= next.planes.features) {
      fail(ErrorKind::Shape, "factor targets a channel the model does not have");
    }
    auto& m = next.planes.channel(f.target.plane, f.target.channel);
    m = compose_adaptation(m, f);
  }
  return next;
}

ModelState reconstruct_state(std::span<const ChunkPayload> chunks, int k) {
  if (k < 0) fail(ErrorKind::Parameter, "chunk index must be >= 0");
  if (chunks.empty() || chunks[0].header.chunk_index != 0 || !chunks[0].base) {
    fail(ErrorKind::Gap, "stream does not start with base chunk 0");
  }
  ModelState state = *chunks[0].base;
  for (int j = 1; j <= k; ++j) {
    if (static_cast<size_t>(j) >= chunks.size() ||
        chunks[j].header.chunk_index != static_cast<std::uint32_t>(j)) {
      fail(ErrorKind::Gap, "chunk " + std::to_string(j) + " missing before chunk " +
                               std::to_string(k));
    }
    state = apply_delta(state, chunks[j]);
  }
  return state;
}

ModelState reconstruct_state(std::span<const std::uint8_t> stream, int k) {
  const auto chunks = decode_stream(stream);
  return reconstruct_state(std::span<const ChunkPayload>(chunks), k);
}

BandwidthReport bandwidth_report(std::span<const std::uint8_t> stream) {
  BandwidthReport rep;
  std::optional<ModelConfig> config;
  size_t pos = 0;
  while (pos < stream.size()) {
    size_t used = 0;
    const ChunkPayload c = decode_chunk(stream.subspan(pos), &used);
    pos += used;
    ChunkBytes cb;
    cb.chunk_index = c.header.chunk_index;
    cb.kind = c.header.kind;
    cb.frame_count = c.header.frames.count;
    cb.bytes = used;
    cb.payload_bytes = c.header.payload_bytes;
    cb.bytes_per_frame = static_cast<double>(used) / c.header.frames.count;
    if (c.header.kind == PayloadKind::Base) {
      config = c.base->config;
      rep.base_bytes += used;
    } else {
      cb.factor_bytes = cb.payload_bytes - kFactorRecordHeaderBytes * c.factors.size();
      rep.delta_total_bytes += used;
    }
    rep.total_bytes += used;
    rep.chunks.push_back(cb);
  }
  if (config) {
    rep.full_plane_bytes = 4ull * 3 * config->plane_features * config->plane_res * config->plane_res;
  }
  size_t deltas = 0;
  std::uint64_t factor_total = 0;
  for (const auto& cb : rep.chunks) {
    if (cb.kind == PayloadKind::Delta) {
      ++deltas;
      factor_total += cb.factor_bytes;
    }
  }
  if (deltas > 0) {
    rep.mean_delta_chunk_bytes = static_cast<double>(rep.delta_total_bytes) / deltas;
    if (rep.full_plane_bytes && *rep.full_plane_bytes > 0) {
      const double full = static_cast<double>(*rep.full_plane_bytes);
      rep.delta_to_full_ratio = *rep.mean_delta_chunk_bytes / full;
      rep.factor_to_full_ratio = static_cast<double>(factor_total) / deltas / full;
      rep.reduction_ratio = 1.0 - *rep.delta_to_full_ratio;
      rep.reduction_ratio_ex_overhead = 1.0 - *rep.factor_to_full_ratio;
    }
  }
  return rep;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingFile, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "short write to " + path.string());
}

}  // namespace gs4d
