#include "epxhop/model_store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <string>
#include <unistd.h>

#include "epxhop/byte_io.hpp"
#include "epxhop/dataset.hpp"
#include "epxhop/error.hpp"

namespace epxhop {
namespace {

constexpr std::size_t kEntryBytes = 4 + 8 + 8 + 4;
constexpr std::uint32_t kStage1Bundle = 1;
constexpr std::uint32_t kPairBundle = 2;
constexpr std::uint32_t kMetaFused = 0;
constexpr std::uint32_t kMetaP = 1;
constexpr std::uint32_t kMetaQ = 2;

[[noreturn]] void corrupt(const std::string& what) { throw Error(Errc::corrupt_model, what); }

void put(ByteWriter& w, const BoostParams& p) {
  w.i32(p.rounds);
  w.i32(p.max_depth);
  w.f64(p.learning_rate);
  w.i32(p.min_leaf_samples);
  w.f64(p.subsample);
  w.f64(p.colsample);
  w.f64(p.lambda);
  w.i32(p.max_bins);
  w.u64(p.seed);
}

BoostParams get_params(ByteReader& r) {
  BoostParams p;
  p.rounds = r.i32();
  p.max_depth = r.i32();
  p.learning_rate = r.f64();
  p.min_leaf_samples = r.i32();
  p.subsample = r.f64();
  p.colsample = r.f64();
  p.lambda = r.f64();
  p.max_bins = r.i32();
  p.seed = r.u64();
  return p;
}

void put(ByteWriter& w, const BoostedModel& m) {
  w.i32(m.class_count());
  w.i32(m.feature_count());
  put(w, m.params());
  w.u64(m.trees().size());
  for (const auto& t : m.trees()) {
    w.u64(t.nodes.size());
    for (const auto& n : t.nodes) {
      w.i32(n.feature);
      w.f64(n.threshold);
      w.i32(n.left);
      w.i32(n.right);
      w.f64(n.value);
    }
  }
}

BoostedModel get_boosted(ByteReader& r) {
  const int classes = r.i32();
  const int features = r.i32();
  BoostedModel m(classes, features, get_params(r));
  const std::size_t trees = r.count(8);
  m.mutable_trees().resize(trees);
  for (auto& t : m.mutable_trees()) {
    t.nodes.resize(r.count(28));
    for (auto& n : t.nodes) {
      n.feature = r.i32();
      n.threshold = static_cast<float>(r.f64());
      n.left = r.i32();
      n.right = r.i32();
      n.value = r.f64();
    }
  }
  return m;
}

void put(ByteWriter& w, const HopConfig& c) {
  w.i32(c.window.height);
  w.i32(c.window.width);
  w.i32(c.window.stride_h);
  w.i32(c.window.stride_w);
  w.i32(c.window.padding);
  w.u8(c.pool_after ? 1 : 0);
  w.i32(c.pool_after ? c.pool_after->window : 0);
  w.i32(c.pool_after ? c.pool_after->stride : 0);
  w.f64(c.th1);
  w.f64(c.th2);
  w.u8(c.max_channels ? 1 : 0);
  w.i32(c.max_channels.value_or(0));
}

HopConfig get_hop_config(ByteReader& r) {
  HopConfig c;
  c.window.height = r.i32();
  c.window.width = r.i32();
  c.window.stride_h = r.i32();
  c.window.stride_w = r.i32();
  c.window.padding = r.i32();
  const bool pool = r.u8() != 0;
  const int pw = r.i32();
  const int ps = r.i32();
  if (pool) c.pool_after = PoolConfig{pw, ps};
  c.th1 = r.f64();
  c.th2 = r.f64();
  const bool has_max = r.u8() != 0;
  const int mx = r.i32();
  if (has_max) c.max_channels = mx;
  return c;
}

ChannelRole get_role(ByteReader& r) {
  const auto v = r.u8();
  if (v > static_cast<std::uint8_t>(ChannelRole::discarded)) corrupt("unknown channel role");
  return static_cast<ChannelRole>(v);
}

void put(ByteWriter& w, const SaabNode& n) {
  w.vec(n.dc_kernel);
  w.mat(n.ac_kernels);
  w.vec(n.eigenvalues);
  w.f64s(n.energy_shares);
  w.f64(n.parent_energy);
  w.f64s(n.child_energies);
  w.u64(n.child_roles.size());
  for (auto role : n.child_roles) w.u8(static_cast<std::uint8_t>(role));
  w.u32(n.input_channel);
  w.f64(n.bias);
}

SaabNode get_node(ByteReader& r) {
  SaabNode n;
  n.dc_kernel = r.vec();
  n.ac_kernels = r.mat();
  n.eigenvalues = r.vec();
  n.energy_shares = r.f64s();
  n.parent_energy = r.f64();
  n.child_energies = r.f64s();
  n.child_roles.resize(r.count(1));
  for (auto& role : n.child_roles) role = get_role(r);
  n.input_channel = r.u32();
  n.bias = r.f64();
  return n;
}

void put(ByteWriter& w, const CascadeModel& m) {
  w.u8(static_cast<std::uint8_t>(m.mode));
  w.u8(m.bias ? 1 : 0);
  w.i32(m.input_size);
  w.u64(m.hops.size());
  for (const auto& h : m.hops) {
    put(w, h.config);
    w.u64(h.nodes.size());
    for (const auto& n : h.nodes) put(w, n);
    w.u64(h.channels.size());
    for (const auto& e : h.channels) {
      w.u32(e.node);
      w.u32(e.child);
      w.u8(static_cast<std::uint8_t>(e.role));
      w.f64(e.energy);
    }
    w.i32(h.input_size);
    w.i32(h.output_size);
    w.i32(h.pooled_size);
  }
}

CascadeModel get_cascade(ByteReader& r) {
  CascadeModel m;
  const auto mode = r.u8();
  if (mode > static_cast<std::uint8_t>(SelectionMode::fixed_k)) corrupt("unknown channel selection mode");
  m.mode = static_cast<SelectionMode>(mode);
  m.bias = r.u8() != 0;
  m.input_size = r.i32();
  m.hops.resize(r.count(16));
  for (auto& h : m.hops) {
    h.config = get_hop_config(r);
    h.nodes.resize(r.count(16));
    for (auto& n : h.nodes) n = get_node(r);
    h.channels.resize(r.count(17));
    for (auto& e : h.channels) {
      e.node = r.u32();
      e.child = r.u32();
      e.role = get_role(r);
      e.energy = r.f64();
    }
    h.input_size = r.i32();
    h.output_size = r.i32();
    h.pooled_size = r.i32();
  }
  return m;
}

void put(ByteWriter& w, const SlsModel& m) {
  w.i32(m.class_count);
  w.u8(static_cast<std::uint8_t>(m.mode));
  w.u64(m.init.size());
  for (const auto& b : m.init) put(w, b);
  w.u64(m.updates.size());
  for (const auto& it : m.updates) {
    w.u64(it.size());
    for (const auto& b : it) put(w, b);
  }
}

SlsModel get_sls(ByteReader& r) {
  SlsModel m;
  m.class_count = r.i32();
  const auto mode = r.u8();
  if (mode > static_cast<std::uint8_t>(SlsMode::intra_hop)) corrupt("unknown label smoothing mode");
  m.mode = static_cast<SlsMode>(mode);
  m.init.resize(r.count(16));
  for (auto& b : m.init) b = get_boosted(r);
  m.updates.resize(r.count(8));
  for (auto& it : m.updates) {
    it.resize(r.count(16));
    for (auto& b : it) b = get_boosted(r);
  }
  return m;
}

void put_levels(ByteWriter& w, const std::vector<HopRef>& levels) {
  w.u64(levels.size());
  for (const auto& l : levels) {
    w.i32(l.hop);
    w.u8(l.pooled ? 1 : 0);
  }
}

std::vector<HopRef> get_levels(ByteReader& r) {
  std::vector<HopRef> levels(r.count(5));
  for (auto& l : levels) {
    l.hop = r.i32();
    l.pooled = r.u8() != 0;
  }
  return levels;
}

Chunk make(ChunkKind kind, ByteWriter&& w) { return {kind, std::move(w).take()}; }

template <typename T>
Chunk indexed(ChunkKind kind, std::uint32_t index, const T& value) {
  ByteWriter w;
  w.u32(index);
  put(w, value);
  return make(kind, std::move(w));
}

void append_stage1(std::vector<Chunk>& out, const Stage1Model& m) {
  ByteWriter info;
  info.u32(kStage1Bundle);
  info.u64(m.class_labels.size());
  for (int l : m.class_labels) info.i32(l);
  info.u8(m.augment ? 1 : 0);
  info.u64(m.seed);
  put_levels(info, m.levels);
  out.push_back(make(ChunkKind::bundle_info, std::move(info)));

  ByteWriter color;
  color.mat(m.color.basis);
  color.vec(m.color.mean);
  color.vec(m.color.eigenvalues);
  color.vec(m.color.energy_fractions);
  out.push_back(make(ChunkKind::color_pca, std::move(color)));

  for (std::uint32_t ch = 0; ch < 2; ++ch) out.push_back(indexed(ChunkKind::cascade, ch, m.cascades[ch]));
  for (std::uint32_t ch = 0; ch < 2; ++ch) out.push_back(indexed(ChunkKind::sls, ch, m.sls[ch]));
  out.push_back(indexed(ChunkKind::meta, kMetaFused, m.meta));
  if (m.meta_p) out.push_back(indexed(ChunkKind::meta, kMetaP, *m.meta_p));
  if (m.meta_q) out.push_back(indexed(ChunkKind::meta, kMetaQ, *m.meta_q));
}

void append_pair(std::vector<Chunk>& out, const PairModel& p) {
  ByteWriter info;
  info.u32(kPairBundle);
  info.i32(p.a);
  info.i32(p.b);
  info.u8(p.augment ? 1 : 0);
  info.u64(p.seed);
  put_levels(info, p.levels);
  out.push_back(make(ChunkKind::bundle_info, std::move(info)));
  for (std::uint32_t ch = 0; ch < 2; ++ch) out.push_back(indexed(ChunkKind::sls, ch, p.sls[ch]));
  out.push_back(indexed(ChunkKind::meta, kMetaFused, p.meta));
}

// Tracks which parts of a bundle have been read.
struct BundleState {
  std::uint32_t type = 0;
  bool color = false;
  std::array<bool, 2> cascade{};
  std::array<bool, 2> sls{};
  bool meta = false;
};

void finish(const BundleState& s) {
  if (s.type == kStage1Bundle && !(s.color && s.cascade[0] && s.cascade[1] && s.sls[0] && s.sls[1] && s.meta)) {
    corrupt("stage-1 bundle is incomplete");
  }
  if (s.type == kPairBundle && !(s.sls[0] && s.sls[1] && s.meta)) corrupt("pair bundle is incomplete");
}

}  // namespace

std::string_view chunk_name(ChunkKind kind) {
  switch (kind) {
    case ChunkKind::bundle_info: return "BUNDLE_INFO";
    case ChunkKind::color_pca: return "COLOR_PCA";
    case ChunkKind::cascade: return "CASCADE";
    case ChunkKind::sls: return "SLS";
    case ChunkKind::meta: return "META";
    case ChunkKind::config: return "CONFIG";
  }
  return "UNKNOWN";
}

std::vector<std::uint8_t> encode_container(std::span<const Chunk> chunks) {
  ByteWriter dir;
  dir.u32(static_cast<std::uint32_t>(chunks.size()));
  std::uint64_t offset = kContainerMagic.size() + 4 + chunks.size() * kEntryBytes + 4;
  for (const auto& c : chunks) {
    dir.u32(static_cast<std::uint32_t>(c.kind));
    dir.u64(offset);
    dir.u64(c.payload.size());
    dir.u32(crc32(c.payload));
    offset += c.payload.size();
  }
  const std::uint32_t dir_crc = crc32(dir.bytes());

  ByteWriter out;
  out.raw({reinterpret_cast<const std::uint8_t*>(kContainerMagic.data()), kContainerMagic.size()});
  out.raw(dir.bytes());
  out.u32(dir_crc);
  for (const auto& c : chunks) out.raw(c.payload);
  return std::move(out).take();
}

std::vector<ManifestEntry> read_manifest(std::span<const std::uint8_t> bytes) {
  const std::size_t magic = kContainerMagic.size();
  if (bytes.size() < magic || std::memcmp(bytes.data(), kContainerMagic.data(), magic) != 0) {
    if (bytes.size() >= magic && std::memcmp(bytes.data(), kContainerMagic.data(), magic - 2) == 0) {
      throw Error(Errc::bad_version, "unsupported container version '" +
                                         std::string(reinterpret_cast<const char*>(bytes.data()) + magic - 2, 2) +
                                         "', expected '01'");
    }
    throw Error(Errc::bad_magic, "not an epxhop model container");
  }
  auto truncated = [](const std::string& what) {
    return Error(Errc::checksum_mismatch, "checksum error in " + what + ": file truncated");
  };
  if (bytes.size() < magic + 4) throw truncated("manifest");
  ByteReader head(bytes.subspan(magic, 4), "manifest");
  const std::uint32_t count = head.u32();
  const std::size_t dir_bytes = 4 + static_cast<std::size_t>(count) * kEntryBytes;
  if (bytes.size() < magic + dir_bytes + 4) throw truncated("manifest");

  const auto dir = bytes.subspan(magic, dir_bytes);
  ByteReader crc_reader(bytes.subspan(magic + dir_bytes, 4), "manifest");
  if (crc32(dir) != crc_reader.u32()) {
    throw Error(Errc::checksum_mismatch, "checksum error in manifest");
  }

  ByteReader r(dir.subspan(4), "manifest");
  std::vector<ManifestEntry> entries(count);
  std::uint64_t expected = magic + dir_bytes + 4;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& e = entries[i];
    const std::uint32_t kind = r.u32();
    if (kind < static_cast<std::uint32_t>(ChunkKind::bundle_info) || kind > static_cast<std::uint32_t>(ChunkKind::config)) {
      throw Error(Errc::unknown_chunk, "unknown chunk kind " + std::to_string(kind) + " in container version 01");
    }
    e.kind = static_cast<ChunkKind>(kind);
    e.offset = r.u64();
    e.length = r.u64();
    e.crc = r.u32();
    if (e.offset != expected) corrupt("chunk " + std::to_string(i) + " overlaps or leaves a gap");
    expected = e.offset + e.length;
  }
  return entries;
}

std::vector<Chunk> decode_container(std::span<const std::uint8_t> bytes) {
  const auto entries = read_manifest(bytes);
  std::vector<Chunk> chunks;
  std::uint64_t end = entries.empty() ? bytes.size() : 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string name = "chunk " + std::to_string(i) + " (" + std::string(chunk_name(e.kind)) + ")";
    if (e.offset > bytes.size() || e.length > bytes.size() - e.offset) {
      throw Error(Errc::checksum_mismatch, "checksum error in " + name + ": file truncated");
    }
    const auto payload = bytes.subspan(e.offset, e.length);
    if (crc32(payload) != e.crc) throw Error(Errc::checksum_mismatch, "checksum error in " + name);
    chunks.push_back({e.kind, {payload.begin(), payload.end()}});
    end = e.offset + e.length;
  }
  if (!entries.empty() && end != bytes.size()) corrupt("trailing bytes after the last chunk");
  return chunks;
}

std::vector<std::uint8_t> encode_model_file(const ModelFile& file) {
  std::vector<Chunk> chunks;
  if (file.config_text) {
    ByteWriter w;
    w.str(*file.config_text);
    chunks.push_back(make(ChunkKind::config, std::move(w)));
  }
  if (file.stage1) append_stage1(chunks, *file.stage1);
  for (const auto& p : file.pairs) append_pair(chunks, p);
  return encode_container(chunks);
}

ModelFile decode_model_file(std::span<const std::uint8_t> bytes) {
  const auto chunks = decode_container(bytes);
  ModelFile file;
  BundleState state;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto& c = chunks[i];
    ByteReader r(c.payload, "chunk " + std::to_string(i) + " (" + std::string(chunk_name(c.kind)) + ")");
    switch (c.kind) {
      case ChunkKind::config:
        if (file.config_text) corrupt("container holds two CONFIG chunks");
        file.config_text = r.str();
        break;
      case ChunkKind::bundle_info: {
        finish(state);
        state = {};
        state.type = r.u32();
        if (state.type == kStage1Bundle) {
          if (file.stage1) corrupt("container holds two stage-1 bundles");
          file.stage1.emplace();
          auto& m = *file.stage1;
          m.class_labels.resize(r.count(4));
          for (auto& l : m.class_labels) l = r.i32();
          m.augment = r.u8() != 0;
          m.seed = r.u64();
          m.levels = get_levels(r);
        } else if (state.type == kPairBundle) {
          auto& p = file.pairs.emplace_back();
          p.a = r.i32();
          p.b = r.i32();
          p.augment = r.u8() != 0;
          p.seed = r.u64();
          p.levels = get_levels(r);
        } else {
          corrupt("unknown bundle type " + std::to_string(state.type));
        }
        break;
      }
      case ChunkKind::color_pca: {
        if (state.type != kStage1Bundle || state.color) corrupt("unexpected COLOR_PCA chunk");
        auto& color = file.stage1->color;
        const Eigen::MatrixXd basis = r.mat();
        const Eigen::VectorXd mean = r.vec();
        const Eigen::VectorXd eig = r.vec();
        const Eigen::VectorXd energy = r.vec();
        if (basis.rows() != 3 || basis.cols() != 3 || mean.size() != 3 || eig.size() != 3 || energy.size() != 3) {
          corrupt("color PCA has wrong dimensions");
        }
        color.basis = basis;
        color.mean = mean;
        color.eigenvalues = eig;
        color.energy_fractions = energy;
        state.color = true;
        break;
      }
      case ChunkKind::cascade: {
        const auto ch = r.u32();
        if (state.type != kStage1Bundle || ch > 1 || state.cascade[ch]) corrupt("unexpected CASCADE chunk");
        file.stage1->cascades[ch] = get_cascade(r);
        state.cascade[ch] = true;
        break;
      }
      case ChunkKind::sls: {
        const auto ch = r.u32();
        if (state.type == 0 || ch > 1 || state.sls[ch]) corrupt("unexpected SLS chunk");
        (state.type == kStage1Bundle ? file.stage1->sls[ch] : file.pairs.back().sls[ch]) = get_sls(r);
        state.sls[ch] = true;
        break;
      }
      case ChunkKind::meta: {
        const auto which = r.u32();
        if (state.type == 0 || which > kMetaQ || (state.type == kPairBundle && which != kMetaFused)) {
          corrupt("unexpected META chunk");
        }
        BoostedModel m = get_boosted(r);
        if (state.type == kPairBundle) {
          file.pairs.back().meta = std::move(m);
        } else if (which == kMetaFused) {
          file.stage1->meta = std::move(m);
        } else {
          (which == kMetaP ? file.stage1->meta_p : file.stage1->meta_q) = std::move(m);
        }
        if (which == kMetaFused) state.meta = true;
        break;
      }
    }
    r.expect_done();
  }
  finish(state);

  if (file.stage1) {
    validate(*file.stage1);
    for (const auto& p : file.pairs) validate(p, *file.stage1);
  } else {
    for (const auto& p : file.pairs) {
      for (const auto& s : p.sls) validate(s, p.levels.size());
      validate(p.meta);
    }
  }
  return file;
}

void save_model_file(const std::filesystem::path& path, const ModelFile& file) {
  const auto bytes = encode_model_file(file);
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(Errc::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(Errc::io, "cannot move model into place at " + path.string());
  }
}

ModelFile load_model_file(const std::filesystem::path& path) {
  return decode_model_file(read_file_bytes(path));
}

}  // namespace epxhop
