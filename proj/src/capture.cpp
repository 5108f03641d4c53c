#include "rtcimpair/capture.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace rtcimpair::io {

namespace {

std::uint32_t rd32(const std::uint8_t* p, bool swap) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    if (swap) v = __builtin_bswap32(v);
    return v;
}

void wr32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void wr16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

void decode_packet(Packet& pkt, LinkType link) {
    auto view = parse_udp_packet(pkt.frame, link);
    if (view.ok()) {
        pkt.flow = view.value().flow;
        pkt.payload_offset = view.value().payload_offset;
        pkt.payload_len = view.value().payload_len;
    } else {
        pkt.flow.reset();
        pkt.payload_offset = 0;
        pkt.payload_len = 0;
    }
}

Expected<Trace> read_capture_bytes(ByteView data) {
    if (data.size() < 24) return Error{"unsupported format: file shorter than global header", 0};
    const std::uint32_t magic_native = rd32(data.data(), false);
    bool swap = false;
    if (magic_native == kPcapMagic) {
        swap = false;
    } else if (magic_native == kPcapMagicSwapped) {
        swap = true;
    } else {
        return Error{"unsupported format: bad magic", 0};
    }

    const std::uint32_t network = rd32(data.data() + 20, swap);
    Trace trace;
    if (network == 1) {
        trace.link = LinkType::Ethernet;
    } else if (network == 101) {
        trace.link = LinkType::RawIp;
    } else {
        return Error{"unsupported link type " + std::to_string(network), 20};
    }

    std::size_t off = 24;
    std::uint64_t ordinal = 0;
    while (off < data.size()) {
        if (data.size() - off < 16) {
            return Error{"truncated record header at record " + std::to_string(ordinal), off};
        }
        Packet pkt;
        pkt.ts.sec = rd32(data.data() + off, swap);
        pkt.ts.usec = rd32(data.data() + off + 4, swap);
        const std::uint32_t incl_len = rd32(data.data() + off + 8, swap);
        pkt.orig_len = rd32(data.data() + off + 12, swap);
        off += 16;
        if (data.size() - off < incl_len) {
            return Error{"truncated record body at record " + std::to_string(ordinal), off};
        }
        pkt.frame.assign(data.begin() + off, data.begin() + off + incl_len);
        off += incl_len;
        pkt.original_index = ordinal++;
        decode_packet(pkt, trace.link);
        trace.packets.push_back(std::move(pkt));
    }

    std::stable_sort(trace.packets.begin(), trace.packets.end(),
                     [](const Packet& a, const Packet& b) { return a.ts < b.ts; });
    return trace;
}

Expected<Trace> read_capture(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return Error{"cannot open " + path, 0};
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_capture_bytes(data);
}

Bytes write_capture_bytes(const Trace& trace) {
    Bytes out;
    out.reserve(24 + trace.packets.size() * 64);
    wr32(out, kPcapMagic);
    wr16(out, 2);   // version major
    wr16(out, 4);   // version minor
    wr32(out, 0);   // thiszone
    wr32(out, 0);   // sigfigs
    wr32(out, 65535);
    wr32(out, static_cast<std::uint32_t>(trace.link));
    for (const Packet& pkt : trace.packets) {
        wr32(out, static_cast<std::uint32_t>(pkt.ts.sec));
        wr32(out, static_cast<std::uint32_t>(pkt.ts.usec));
        wr32(out, static_cast<std::uint32_t>(pkt.frame.size()));
        wr32(out, pkt.orig_len ? pkt.orig_len : static_cast<std::uint32_t>(pkt.frame.size()));
        out.insert(out.end(), pkt.frame.begin(), pkt.frame.end());
    }
    return out;
}

Expected<std::monostate> write_capture(const Trace& trace, const std::string& path) {
    Bytes data = write_capture_bytes(trace);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return Error{"cannot open " + path + " for writing", 0};
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) return Error{"write failed for " + path, 0};
    return std::monostate{};
}

}  // namespace rtcimpair::io
