#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtcimpair/core.hpp"

namespace rtcimpair::io {

// An ordered packet trace. Timestamps are non-decreasing after read_capture's
// normalization; original_index is the ordinal in the input file.
struct Trace {
    LinkType link = LinkType::Ethernet;
    std::vector<Packet> packets;
};

// Classic capture format, microsecond timestamps, magic 0xa1b2c3d4 native or
// byte-swapped. Link types Ethernet(1) and raw-IP(101).
constexpr std::uint32_t kPcapMagic = 0xa1b2c3d4;
constexpr std::uint32_t kPcapMagicSwapped = 0xd4c3b2a1;

// Reads a capture, normalizes timestamp order (stable), and decodes each
// packet to UDP-payload level. Non-UDP packets stay as opaque entries.
Expected<Trace> read_capture(const std::string& path);
Expected<Trace> read_capture_bytes(ByteView data);

// Writes little-endian classic format. Byte-for-byte reproducible.
Expected<std::monostate> write_capture(const Trace& trace, const std::string& path);
Bytes write_capture_bytes(const Trace& trace);

// Decode link/IP/UDP for one packet in place (sets flow/payload fields).
void decode_packet(Packet& pkt, LinkType link);

}  // namespace rtcimpair::io
