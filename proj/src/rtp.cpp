#include "rtcimpair/rtp.hpp"

namespace rtcimpair::rtp {

namespace {

std::uint16_t rd16(ByteView b, std::size_t off) {
    return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

std::uint32_t rd32(ByteView b, std::size_t off) {
    return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
           (static_cast<std::uint32_t>(b[off + 2]) << 8) | b[off + 3];
}

}  // namespace

Expected<Header> parse(ByteView payload) {
    if (payload.size() < kFixedHeaderLen) return Error{"truncated RTP header", 0};

    Header h;
    h.version = payload[0] >> 6;
    if (h.version != 2) return Error{"not RTP: version != 2", 0};
    h.padding = (payload[0] & 0x20) != 0;
    h.extension = (payload[0] & 0x10) != 0;
    h.csrc_count = payload[0] & 0x0f;
    h.marker = (payload[1] & 0x80) != 0;
    h.payload_type = payload[1] & 0x7f;
    h.sequence_number = rd16(payload, 2);
    h.timestamp = rd32(payload, 4);
    h.ssrc = rd32(payload, 8);

    std::size_t off = kFixedHeaderLen + 4u * h.csrc_count;
    if (payload.size() < off) return Error{"truncated CSRC list", kFixedHeaderLen};
    if (h.extension) {
        if (payload.size() < off + 4) return Error{"truncated extension header", off};
        const std::size_t ext_words = rd16(payload, off + 2);
        off += 4 + 4 * ext_words;
        if (payload.size() < off) return Error{"truncated extension body", off};
    }
    h.header_length = static_cast<std::uint32_t>(off);
    h.payload_length = static_cast<std::uint32_t>(payload.size() - off);
    return h;
}

Bytes encode(const Header& h) {
    Bytes out;
    out.reserve(h.header_length);
    out.push_back(static_cast<std::uint8_t>((h.version << 6) | (h.padding ? 0x20 : 0) |
                                            (h.extension ? 0x10 : 0) | (h.csrc_count & 0x0f)));
    out.push_back(static_cast<std::uint8_t>((h.marker ? 0x80 : 0) | (h.payload_type & 0x7f)));
    out.push_back(static_cast<std::uint8_t>(h.sequence_number >> 8));
    out.push_back(static_cast<std::uint8_t>(h.sequence_number));
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(h.timestamp >> (8 * i)));
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(h.ssrc >> (8 * i)));
    for (std::uint8_t c = 0; c < h.csrc_count; ++c) {
        for (int i = 0; i < 4; ++i) out.push_back(0);
    }
    if (h.extension) {
        out.push_back(0);
        out.push_back(0);
        out.push_back(0);
        out.push_back(0);  // profile id 0, length 0 words
    }
    return out;
}

FrameEvent frame_event(const Header& h, SsrcAssemblerState& state, bool marker_only) {
    bool begins = !state.has_seen_packet || state.saw_marker_last;
    if (!marker_only && state.has_seen_packet && !state.saw_marker_last &&
        h.timestamp != state.last_timestamp) {
        begins = true;  // previous frame's marker never arrived
    }

    if (begins && state.has_seen_packet) {
        state.frame_ordinal += 1;
    }

    FrameEvent ev;
    ev.ssrc = h.ssrc;
    ev.frame_ordinal = state.frame_ordinal;
    ev.began_frame = begins;
    if (h.marker) {
        ev.kind = FrameEventKind::FrameEnd;
    } else {
        ev.kind = begins ? FrameEventKind::FrameStart : FrameEventKind::FrameContinue;
    }

    state.last_timestamp = h.timestamp;
    state.saw_marker_last = h.marker;
    state.has_seen_packet = true;
    return ev;
}

}  // namespace rtcimpair::rtp
