#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctce/geometry.hpp"

namespace ctce {

// Fixed little-endian layout, 40-byte header:
//   magic "CTCEQRY1" (8) | agent_id u16 | frame_id u32 | timestamp f64
//   | pose yaw f32 | pose translation 3xf32 | query count u16
// then per query: ref_point 3xf32 | confidence f32 | embedding d x f32.
// The embedding width is inferred from the packet length.
using QueryPacket = std::vector<uint8_t>;

constexpr size_t kPacketHeaderSize = 40;

enum class WireErrorCode { bad_magic, truncated, length_mismatch, oversize };

class WireError : public std::runtime_error {
 public:
  WireError(WireErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  WireErrorCode code() const { return code_; }

 private:
  WireErrorCode code_;
};

QueryPacket serialize(const QueryFrame& f);
QueryFrame deserialize(const QueryPacket& p);

struct ChannelConfig {
  double pdr = 0.0;  // per-frame drop probability
  uint64_t seed = 0;
};

// Per-frame uniform draw keyed by (seed, frame_id); drop iff draw < pdr.
// The same seed therefore produces nested drop sets as pdr grows.
double channel_draw(uint64_t seed, uint32_t frame_id);
bool channel_drops(const ChannelConfig& cfg, uint32_t frame_id);
std::optional<QueryPacket> transmit(const QueryPacket& p, const ChannelConfig& cfg,
                                    uint32_t frame_id);

// Capture file: records of (frame_id u32, delivered u8, length u32, bytes).
class CaptureWriter {
 public:
  explicit CaptureWriter(const std::string& path);
  ~CaptureWriter();
  void record(uint32_t frame_id, bool delivered, const QueryPacket& packet);

 private:
  struct Impl;
  Impl* impl_;
};

struct CaptureRecord {
  uint32_t frame_id;
  bool delivered;
  QueryPacket packet;
};

std::vector<CaptureRecord> read_capture(const std::string& path);

}  // namespace ctce
