#pragma once

#include <bitset>
#include <cstdint>
#include <initializer_list>

#include "rtcimpair/core.hpp"

namespace rtcimpair::rtp {

constexpr std::size_t kFixedHeaderLen = 12;

// Parsed fixed header plus CSRC/extension accounting. The SRTP auth tag is
// opaque and counted as payload.
struct Header {
    std::uint8_t version = 2;
    bool padding = false;
    bool extension = false;
    std::uint8_t csrc_count = 0;
    bool marker = false;
    std::uint8_t payload_type = 0;
    std::uint16_t sequence_number = 0;
    std::uint32_t timestamp = 0;
    std::uint32_t ssrc = 0;
    std::uint32_t header_length = kFixedHeaderLen;  // incl. CSRCs and extension
    std::uint32_t payload_length = 0;
};

Expected<Header> parse(ByteView payload);

// Serialize a header (fixed part + zeroed CSRC/extension words); generators
// append payload bytes after it.
Bytes encode(const Header& h);

// Video payload types; the observed WebRTC defaults are 102 and 77.
class VideoPtSet {
  public:
    VideoPtSet() : VideoPtSet{102, 77} {}
    VideoPtSet(std::initializer_list<std::uint8_t> pts) {
        for (auto pt : pts) add(pt);
    }
    void add(std::uint8_t pt) { bits_.set(pt & 0x7f); }
    bool contains(std::uint8_t pt) const { return bits_.test(pt & 0x7f); }
    bool empty() const { return bits_.none(); }
    std::vector<std::uint8_t> to_list() const {
        std::vector<std::uint8_t> v;
        for (std::size_t i = 0; i < bits_.size(); ++i)
            if (bits_.test(i)) v.push_back(static_cast<std::uint8_t>(i));
        return v;
    }
    bool operator==(const VideoPtSet&) const = default;

  private:
    std::bitset<128> bits_;
};

inline bool is_video(const Header& h, const VideoPtSet& pts) {
    return pts.contains(h.payload_type);
}

enum class FrameEventKind : std::uint8_t { FrameStart, FrameContinue, FrameEnd };

// `began_frame` is set on the first packet of a frame regardless of kind: a
// marker-set packet that opens a frame reports FrameEnd (single-packet
// frame) but still begins it.
struct FrameEvent {
    FrameEventKind kind = FrameEventKind::FrameStart;
    std::uint32_t ssrc = 0;
    std::uint32_t frame_ordinal = 0;
    bool began_frame = false;
};

// Per-ssrc segmentation state. Fixed size; lives in the flow table's slots.
struct SsrcAssemblerState {
    std::uint32_t last_timestamp = 0;
    bool saw_marker_last = false;
    bool has_seen_packet = false;
    bool drop_current_frame = false;  // owned by the frame-drop policy
    std::uint32_t frame_ordinal = 0;
    double drop_accumulator = 0.0;  // owned by the periodic drop mode
};

// A packet begins a new frame iff the previous video packet of this ssrc had
// the marker set, or (unless marker_only) its timestamp changed — the
// fallback for a frame whose marker packet was lost. Marker-set packets are
// FrameEnd.
FrameEvent frame_event(const Header& h, SsrcAssemblerState& state, bool marker_only = false);

}  // namespace rtcimpair::rtp
