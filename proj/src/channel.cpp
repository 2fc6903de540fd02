#include "ctce/channel.hpp"

#include <cstring>
#include <fstream>

namespace ctce {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'C', 'E', 'Q', 'R', 'Y', '1'};

template <typename T>
void put(QueryPacket& p, T v) {
  const size_t off = p.size();
  p.resize(off + sizeof(T));
  std::memcpy(p.data() + off, &v, sizeof(T));
}

template <typename T>
T take(const QueryPacket& p, size_t& off) {
  T v;
  std::memcpy(&v, p.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

QueryPacket serialize(const QueryFrame& f) {
  f.validate();
  if (f.count() >= (1 << 16)) throw WireError(WireErrorCode::oversize, "serialize: too many queries");
  QueryPacket p;
  const int d = f.dim();
  p.reserve(kPacketHeaderSize + static_cast<size_t>(f.count()) * 4 * (4 + d));
  p.insert(p.end(), kMagic, kMagic + 8);
  put<uint16_t>(p, static_cast<uint16_t>(f.agent_id));
  put<uint32_t>(p, f.frame_id);
  put<double>(p, f.timestamp);
  put<float>(p, static_cast<float>(f.sender_pose.yaw()));
  for (int a = 0; a < 3; ++a) put<float>(p, static_cast<float>(f.sender_pose.translation(a)));
  put<uint16_t>(p, static_cast<uint16_t>(f.count()));
  for (int i = 0; i < f.count(); ++i) {
    for (int a = 0; a < 3; ++a) put<float>(p, static_cast<float>(f.ref_points[i](a)));
    put<float>(p, static_cast<float>(f.confidences[i]));
    for (int j = 0; j < d; ++j) put<float>(p, static_cast<float>(f.embeddings.at(i, j)));
  }
  return p;
}

QueryFrame deserialize(const QueryPacket& p) {
  if (p.size() < kPacketHeaderSize) throw WireError(WireErrorCode::truncated, "packet shorter than header");
  if (std::memcmp(p.data(), kMagic, 8) != 0) throw WireError(WireErrorCode::bad_magic, "bad magic");
  size_t off = 8;
  QueryFrame f;
  f.agent_id = take<uint16_t>(p, off);
  f.frame_id = take<uint32_t>(p, off);
  f.timestamp = take<double>(p, off);
  const float yaw = take<float>(p, off);
  Vec3 t;
  for (int a = 0; a < 3; ++a) t(a) = take<float>(p, off);
  f.sender_pose = Pose::yaw_translation(yaw, t);
  const uint16_t count = take<uint16_t>(p, off);

  const size_t payload = p.size() - kPacketHeaderSize;
  if (count == 0) {
    if (payload != 0) throw WireError(WireErrorCode::length_mismatch, "payload on empty frame");
    f.tag = FrameTag::roadside_temporal;
    return f;
  }
  if (payload % (4ull * count) != 0)
    throw WireError(WireErrorCode::length_mismatch, "payload not divisible by query count");
  const size_t floats_per_query = payload / (4ull * count);
  if (floats_per_query < 4)
    throw WireError(WireErrorCode::truncated, "query record shorter than geometry fields");
  const int d = static_cast<int>(floats_per_query - 4);

  std::vector<double> emb(static_cast<size_t>(count) * d);
  for (int i = 0; i < count; ++i) {
    Vec3 r;
    for (int a = 0; a < 3; ++a) r(a) = take<float>(p, off);
    f.ref_points.push_back(r);
    f.confidences.push_back(take<float>(p, off));
    for (int j = 0; j < d; ++j) emb[static_cast<size_t>(i) * d + j] = take<float>(p, off);
  }
  f.embeddings = Tensor(count, d, std::move(emb));
  f.tag = FrameTag::roadside_temporal;
  f.validate();
  return f;
}

double channel_draw(uint64_t seed, uint32_t frame_id) {
  const uint64_t h = splitmix64(splitmix64(seed) ^ (0x9e3779b97f4a7c15ull * (frame_id + 1)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

bool channel_drops(const ChannelConfig& cfg, uint32_t frame_id) {
  return channel_draw(cfg.seed, frame_id) < cfg.pdr;
}

std::optional<QueryPacket> transmit(const QueryPacket& p, const ChannelConfig& cfg,
                                    uint32_t frame_id) {
  if (channel_drops(cfg, frame_id)) return std::nullopt;
  return p;
}

struct CaptureWriter::Impl {
  std::ofstream os;
};

CaptureWriter::CaptureWriter(const std::string& path) : impl_(new Impl) {
  impl_->os.open(path, std::ios::binary);
  if (!impl_->os) {
    delete impl_;
    throw std::runtime_error("capture: cannot open " + path);
  }
}

CaptureWriter::~CaptureWriter() { delete impl_; }

void CaptureWriter::record(uint32_t frame_id, bool delivered, const QueryPacket& packet) {
  auto& os = impl_->os;
  const uint8_t dflag = delivered ? 1 : 0;
  const uint32_t len = static_cast<uint32_t>(packet.size());
  os.write(reinterpret_cast<const char*>(&frame_id), 4);
  os.write(reinterpret_cast<const char*>(&dflag), 1);
  os.write(reinterpret_cast<const char*>(&len), 4);
  os.write(reinterpret_cast<const char*>(packet.data()), len);
}

std::vector<CaptureRecord> read_capture(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("capture: cannot open " + path);
  std::vector<CaptureRecord> out;
  while (true) {
    CaptureRecord r;
    uint8_t dflag;
    uint32_t len;
    if (!is.read(reinterpret_cast<char*>(&r.frame_id), 4)) break;
    if (!is.read(reinterpret_cast<char*>(&dflag), 1) ||
        !is.read(reinterpret_cast<char*>(&len), 4))
      throw std::runtime_error("capture: truncated record");
    r.delivered = dflag != 0;
    r.packet.resize(len);
    if (len && !is.read(reinterpret_cast<char*>(r.packet.data()), len))
      throw std::runtime_error("capture: truncated packet bytes");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ctce
