#include "rtcimpair/core.hpp"

#include <arpa/inet.h>

#include <cstring>

namespace rtcimpair {

std::optional<IpAddr> IpAddr::parse(const std::string& text) {
    IpAddr ip;
    if (text.find(':') != std::string::npos) {
        ip.v6 = true;
        if (inet_pton(AF_INET6, text.c_str(), ip.bytes.data()) != 1) return std::nullopt;
    } else {
        if (inet_pton(AF_INET, text.c_str(), ip.bytes.data()) != 1) return std::nullopt;
    }
    return ip;
}

std::string IpAddr::to_string() const {
    char buf[INET6_ADDRSTRLEN] = {0};
    if (v6) {
        inet_ntop(AF_INET6, bytes.data(), buf, sizeof(buf));
    } else {
        inet_ntop(AF_INET, bytes.data(), buf, sizeof(buf));
    }
    return buf;
}

std::string FlowKey::to_string() const {
    return src_addr.to_string() + ":" + std::to_string(src_port) + "->" + dst_addr.to_string() +
           ":" + std::to_string(dst_port);
}

namespace {

// FNV-1a, 64-bit. Stable across platforms.
std::uint64_t fnv1a(const std::uint8_t* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (std::size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t endpoint_hash(const IpAddr& addr, std::uint16_t port) {
    std::uint64_t h = fnv1a(addr.bytes.data(), addr.v6 ? 16 : 4);
    std::uint8_t pb[3] = {static_cast<std::uint8_t>(port >> 8), static_cast<std::uint8_t>(port),
                          static_cast<std::uint8_t>(addr.v6 ? 6 : 4)};
    return fnv1a(pb, sizeof(pb), h);
}

}  // namespace

std::uint64_t flow_hash(const FlowKey& key) {
    std::uint64_t a = endpoint_hash(key.src_addr, key.src_port);
    std::uint64_t b = endpoint_hash(key.dst_addr, key.dst_port);
    // order-sensitive mix
    std::uint64_t h = a * 0x9e3779b97f4a7c15ULL;
    h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

std::uint64_t flow_pair_hash(const FlowKey& key) {
    std::uint64_t a = endpoint_hash(key.src_addr, key.src_port);
    std::uint64_t b = endpoint_hash(key.dst_addr, key.dst_port);
    return (a ^ b) * 0x2545f4914f6cdd1dULL + (a + b);
}

const char* demux_class_name(DemuxClass c) {
    switch (c) {
        case DemuxClass::Stun: return "stun";
        case DemuxClass::Dtls: return "dtls";
        case DemuxClass::Rtp: return "rtp";
        case DemuxClass::Unknown: return "unknown";
    }
    return "unknown";
}

namespace {

std::uint16_t rd16(ByteView b, std::size_t off) {
    return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

Expected<UdpPacketView> parse_from_ip(ByteView frame, std::size_t ip_off) {
    if (ip_off >= frame.size()) return Error{"missing IP header", ip_off};
    const std::uint8_t version = frame[ip_off] >> 4;

    IpAddr src, dst;
    std::size_t l4_off = 0;
    if (version == 4) {
        if (frame.size() < ip_off + 20) return Error{"truncated IPv4 header", ip_off};
        const std::size_t ihl = (frame[ip_off] & 0x0f) * 4u;
        if (ihl < 20 || frame.size() < ip_off + ihl) return Error{"bad IPv4 header length", ip_off};
        if (frame[ip_off + 9] != 17) return Error{"not UDP", ip_off + 9};
        std::memcpy(src.bytes.data(), frame.data() + ip_off + 12, 4);
        std::memcpy(dst.bytes.data(), frame.data() + ip_off + 16, 4);
        l4_off = ip_off + ihl;
    } else if (version == 6) {
        if (frame.size() < ip_off + 40) return Error{"truncated IPv6 header", ip_off};
        // Extension headers are not walked; only a direct UDP next-header.
        if (frame[ip_off + 6] != 17) return Error{"not UDP", ip_off + 6};
        src.v6 = dst.v6 = true;
        std::memcpy(src.bytes.data(), frame.data() + ip_off + 8, 16);
        std::memcpy(dst.bytes.data(), frame.data() + ip_off + 24, 16);
        l4_off = ip_off + 40;
    } else {
        return Error{"not an IP packet", ip_off};
    }

    if (frame.size() < l4_off + 8) return Error{"truncated UDP header", l4_off};
    UdpPacketView view;
    view.flow.src_addr = src;
    view.flow.dst_addr = dst;
    view.flow.src_port = rd16(frame, l4_off);
    view.flow.dst_port = rd16(frame, l4_off + 2);
    const std::size_t udp_len = rd16(frame, l4_off + 4);
    if (udp_len < 8) return Error{"bad UDP length", l4_off + 4};
    view.payload_offset = static_cast<std::uint32_t>(l4_off + 8);
    std::size_t avail = frame.size() - (l4_off + 8);
    view.payload_len = static_cast<std::uint32_t>(std::min(avail, udp_len - 8));
    return view;
}

}  // namespace

Expected<UdpPacketView> parse_udp_packet(ByteView frame, LinkType link) {
    if (link == LinkType::Ethernet) {
        if (frame.size() < 14) return Error{"truncated Ethernet header", 0};
        const std::uint16_t ethertype = rd16(frame, 12);
        if (ethertype != 0x0800 && ethertype != 0x86dd) return Error{"not an IP ethertype", 12};
        return parse_from_ip(frame, 14);
    }
    return parse_from_ip(frame, 0);
}

}  // namespace rtcimpair
