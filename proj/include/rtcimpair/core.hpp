#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rtcimpair {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Microsecond-resolution timestamp. usec is kept normalized to [0, 1000000).
struct TimeUsec {
    std::int64_t sec = 0;
    std::int64_t usec = 0;

    static TimeUsec from_total_usec(std::int64_t total) {
        TimeUsec t;
        t.sec = total / 1000000;
        t.usec = total % 1000000;
        if (t.usec < 0) {
            t.sec -= 1;
            t.usec += 1000000;
        }
        return t;
    }
    static TimeUsec from_seconds(double s) {
        return from_total_usec(static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5)));
    }

    std::int64_t total_usec() const { return sec * 1000000 + usec; }
    double seconds() const { return static_cast<double>(sec) + static_cast<double>(usec) * 1e-6; }

    TimeUsec plus_usec(std::int64_t du) const { return from_total_usec(total_usec() + du); }
    TimeUsec plus_ms(std::int64_t ms) const { return plus_usec(ms * 1000); }

    auto operator<=>(const TimeUsec& o) const { return total_usec() <=> o.total_usec(); }
    bool operator==(const TimeUsec& o) const = default;
};

// IPv4 or IPv6 address as an opaque comparable value.
struct IpAddr {
    std::array<std::uint8_t, 16> bytes{};
    bool v6 = false;

    static IpAddr v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
        IpAddr ip;
        ip.bytes[0] = a;
        ip.bytes[1] = b;
        ip.bytes[2] = c;
        ip.bytes[3] = d;
        return ip;
    }
    static std::optional<IpAddr> parse(const std::string& text);

    std::string to_string() const;

    auto operator<=>(const IpAddr&) const = default;
};

// Directional 4-tuple. (A->B) and (B->A) are distinct keys.
struct FlowKey {
    IpAddr src_addr;
    std::uint16_t src_port = 0;
    IpAddr dst_addr;
    std::uint16_t dst_port = 0;

    FlowKey reversed() const { return FlowKey{dst_addr, dst_port, src_addr, src_port}; }

    std::string to_string() const;

    auto operator<=>(const FlowKey&) const = default;
};

// Directional hash, stable across runs and platforms.
std::uint64_t flow_hash(const FlowKey& key);
// Direction-invariant hash: equal for a key and its reverse. Used to shard
// flows so both directions of a conversation land on the same worker.
std::uint64_t flow_pair_hash(const FlowKey& key);

struct FlowKeyHasher {
    std::size_t operator()(const FlowKey& k) const { return static_cast<std::size_t>(flow_hash(k)); }
};

// First-byte demultiplexing of UDP payloads, per the usual WebRTC co-location
// convention. Bytes 16-19 and 64-79 belong to other multiplexed protocols and
// map to Unknown.
enum class DemuxClass : std::uint8_t { Stun, Dtls, Rtp, Unknown };

constexpr DemuxClass demux_first_byte(std::uint8_t first_byte) {
    if (first_byte <= 3) return DemuxClass::Stun;
    if (first_byte >= 20 && first_byte <= 63) return DemuxClass::Dtls;
    if (first_byte >= 128 && first_byte <= 191) return DemuxClass::Rtp;
    return DemuxClass::Unknown;
}

inline DemuxClass demux(ByteView payload) {
    if (payload.empty()) return DemuxClass::Unknown;
    return demux_first_byte(payload[0]);
}

const char* demux_class_name(DemuxClass c);

// The only actions available to the traffic-manipulation side.
class Verdict {
  public:
    enum class Action : std::uint8_t { Pass, Drop, Delay };

    static Verdict pass() { return Verdict(Action::Pass, 0); }
    static Verdict drop() { return Verdict(Action::Drop, 0); }
    static Verdict delay(std::uint32_t ms) {
        return ms == 0 ? pass() : Verdict(Action::Delay, ms);
    }

    Action action() const { return action_; }
    bool is_pass() const { return action_ == Action::Pass; }
    bool is_drop() const { return action_ == Action::Drop; }
    bool is_delay() const { return action_ == Action::Delay; }
    std::uint32_t delay_ms() const { return delay_ms_; }

    bool operator==(const Verdict&) const = default;

  private:
    Verdict(Action a, std::uint32_t ms) : action_(a), delay_ms_(ms) {}
    Action action_;
    std::uint32_t delay_ms_;
};

// Parse failure with the offset where decoding stopped.
struct Error {
    std::string message;
    std::size_t offset = 0;
};

template <typename T>
class Expected {
  public:
    Expected(T value) : v_(std::move(value)) {}
    Expected(Error err) : v_(std::move(err)) {}

    bool ok() const { return std::holds_alternative<T>(v_); }
    explicit operator bool() const { return ok(); }

    const T& value() const& { return std::get<T>(v_); }
    T& value() & { return std::get<T>(v_); }
    T&& value() && { return std::get<T>(std::move(v_)); }
    const Error& error() const { return std::get<Error>(v_); }

  private:
    std::variant<T, Error> v_;
};

// One captured packet. `frame` holds the raw link-layer bytes so that passed
// packets can be re-emitted unchanged; the UDP decode, when present, points
// into `frame`.
struct Packet {
    TimeUsec ts;
    std::uint64_t original_index = 0;
    Bytes frame;
    std::uint32_t orig_len = 0;

    std::optional<FlowKey> flow;
    std::uint32_t payload_offset = 0;
    std::uint32_t payload_len = 0;

    bool is_udp() const { return flow.has_value(); }
    ByteView payload() const {
        if (!flow) return {};
        return ByteView(frame).subspan(payload_offset, payload_len);
    }
};

enum class LinkType : std::uint32_t { Ethernet = 1, RawIp = 101 };

struct UdpPacketView {
    FlowKey flow;
    std::uint32_t payload_offset = 0;
    std::uint32_t payload_len = 0;
};

// Decode link/IP/UDP headers and return the directional flow key plus the UDP
// payload location. Non-UDP or non-IP frames come back as an Error naming the
// offset where decoding stopped; callers treat those as opaque pass-through.
Expected<UdpPacketView> parse_udp_packet(ByteView frame, LinkType link);

}  // namespace rtcimpair
