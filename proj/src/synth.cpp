#include "rtcimpair/synth.hpp"

#include <algorithm>
#include <cmath>

#include "rtcimpair/dtls.hpp"

namespace rtcimpair::synth {

std::vector<ResolutionProfile> default_profiles() {
    // 1080p pinned from 151.0 KBytes/s / 24 fps; lower rungs by pixel ratio.
    return {
        {"1080p", 6300, 1260, 24.0, 1920, 1080},
        {"540p", 1575, 315, 24.0, 960, 540},
        {"240p", 311, 62, 24.0, 426, 240},
        {"180p", 175, 35, 24.0, 320, 180},
    };
}

const ResolutionProfile* find_profile(const std::vector<ResolutionProfile>& profiles,
                                      const std::string& name) {
    for (const auto& p : profiles) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

AdaptiveModel default_adaptive_model() {
    auto profiles = default_profiles();
    AdaptiveModel model;
    model.ladder = {profiles[0], profiles[1]};
    return model;
}

AdaptiveController::AdaptiveController(AdaptiveModel model) : model_(std::move(model)) {}

void AdaptiveController::observe_window(double loss_fraction) {
    if (loss_fraction >= model_.downshift_loss_threshold) {
        clean_streak_ = 0;
        if (rung_ + 1 < model_.ladder.size()) ++rung_;
    } else {
        ++clean_streak_;
        if (clean_streak_ >= 2 && rung_ > 0) {
            --rung_;
            clean_streak_ = 0;
        }
    }
}

// ---- UDP framing ----

namespace {

void wr16be(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint16_t ipv4_header_checksum(const std::uint8_t* hdr, std::size_t len) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < len; i += 2) {
        sum += static_cast<std::uint32_t>((hdr[i] << 8) | hdr[i + 1]);
    }
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

}  // namespace

Bytes build_udp_frame(const FlowKey& flow, ByteView payload) {
    Bytes frame;
    const std::size_t udp_len = 8 + payload.size();
    if (!flow.src_addr.v6) {
        frame.reserve(20 + udp_len);
        frame.push_back(0x45);  // v4, ihl 5
        frame.push_back(0);
        wr16be(frame, static_cast<std::uint16_t>(20 + udp_len));
        wr16be(frame, 0);       // identification
        wr16be(frame, 0x4000);  // DF
        frame.push_back(64);    // ttl
        frame.push_back(17);    // udp
        wr16be(frame, 0);       // checksum placeholder
        frame.insert(frame.end(), flow.src_addr.bytes.begin(), flow.src_addr.bytes.begin() + 4);
        frame.insert(frame.end(), flow.dst_addr.bytes.begin(), flow.dst_addr.bytes.begin() + 4);
        const std::uint16_t csum = ipv4_header_checksum(frame.data(), 20);
        frame[10] = static_cast<std::uint8_t>(csum >> 8);
        frame[11] = static_cast<std::uint8_t>(csum);
    } else {
        frame.reserve(40 + udp_len);
        frame.push_back(0x60);
        frame.push_back(0);
        frame.push_back(0);
        frame.push_back(0);
        wr16be(frame, static_cast<std::uint16_t>(udp_len));
        frame.push_back(17);  // next header
        frame.push_back(64);  // hop limit
        frame.insert(frame.end(), flow.src_addr.bytes.begin(), flow.src_addr.bytes.end());
        frame.insert(frame.end(), flow.dst_addr.bytes.begin(), flow.dst_addr.bytes.end());
    }
    wr16be(frame, flow.src_port);
    wr16be(frame, flow.dst_port);
    wr16be(frame, static_cast<std::uint16_t>(udp_len));
    wr16be(frame, 0);  // no UDP checksum
    frame.insert(frame.end(), payload.begin(), payload.end());
    return frame;
}

Packet make_udp_packet(const FlowKey& flow, Bytes payload, TimeUsec ts) {
    Packet pkt;
    pkt.ts = ts;
    pkt.frame = build_udp_frame(flow, payload);
    pkt.orig_len = static_cast<std::uint32_t>(pkt.frame.size());
    io::decode_packet(pkt, LinkType::RawIp);
    return pkt;
}

io::Trace packets_to_trace(std::vector<Packet> packets, LinkType link) {
    io::Trace trace;
    trace.link = link;
    trace.packets = std::move(packets);
    std::stable_sort(trace.packets.begin(), trace.packets.end(),
                     [](const Packet& a, const Packet& b) { return a.ts < b.ts; });
    for (std::size_t i = 0; i < trace.packets.size(); ++i) {
        trace.packets[i].original_index = i;
    }
    return trace;
}

io::Trace merge_traces(std::vector<io::Trace> traces, LinkType link) {
    std::vector<Packet> all;
    for (auto& t : traces) {
        all.insert(all.end(), std::make_move_iterator(t.packets.begin()),
                   std::make_move_iterator(t.packets.end()));
    }
    return packets_to_trace(std::move(all), link);
}

// ---- video stream generator ----

VideoStreamGenerator::VideoStreamGenerator(SourceModel model, StreamSpec spec, FlowKey flow,
                                           TimeUsec start)
    : model_(std::move(model)), spec_(spec), flow_(flow), start_(start), rng_(spec.seed) {
    if (const auto* adaptive = std::get_if<AdaptiveModel>(&model_)) {
        controller_.emplace(*adaptive);
        window_end_s_ = adaptive->window_s;
    } else {
        fixed_profile_ = std::get<NonAdaptiveModel>(model_).profile;
        window_end_s_ = spec_.duration_s;  // no windows needed
    }
}

const ResolutionProfile& VideoStreamGenerator::active_profile() const {
    return controller_ ? controller_->active() : fixed_profile_;
}

bool VideoStreamGenerator::done() const { return clock_s_ >= spec_.duration_s; }

bool VideoStreamGenerator::needs_feedback() const { return feedback_due_; }

void VideoStreamGenerator::report_window_loss(double loss_fraction) {
    if (!feedback_due_) return;
    feedback_due_ = false;
    ++window_index_;
    if (controller_) {
        const std::size_t rung_before = controller_->rung();
        controller_->observe_window(loss_fraction);
        window_end_s_ += controller_->window_s();
        if (controller_->rung() != rung_before) {
            base_clock_s_ = clock_s_;
            frames_at_base_ = frame_index_;
        }
    }
}

GeneratedFrame VideoStreamGenerator::next_frame() {
    const ResolutionProfile& profile = active_profile();

    GeneratedFrame frame;
    frame.frame_index = frame_index_;
    frame.profile_name = profile.name;

    double size = profile.mean_frame_bytes + rng_.next_gaussian() * profile.frame_bytes_stdev;
    if (spec_.keyframe_every > 0 && frame_index_ % spec_.keyframe_every == 0) {
        size *= spec_.keyframe_scale;
    }
    frame.size_bytes = static_cast<std::uint32_t>(std::max(1.0, std::round(size)));
    frame.packet_count = (frame.size_bytes + spec_.mtu_payload_bytes - 1) / spec_.mtu_payload_bytes;

    // All packets of a frame share the media timestamp (90 kHz clock).
    const std::uint32_t media_ts =
        static_cast<std::uint32_t>(static_cast<std::uint64_t>(clock_s_ * 90000.0));
    frame.first_packet_ts = start_.plus_usec(static_cast<std::int64_t>(clock_s_ * 1e6));

    std::uint32_t remaining = frame.size_bytes;
    for (std::uint32_t i = 0; i < frame.packet_count; ++i) {
        rtp::Header h;
        h.marker = (i + 1 == frame.packet_count);
        h.payload_type = spec_.payload_type;
        h.sequence_number = seq_++;
        h.timestamp = media_ts;
        h.ssrc = spec_.ssrc;
        Bytes payload = rtp::encode(h);
        const std::uint32_t chunk = std::min(remaining, spec_.mtu_payload_bytes);
        for (std::uint32_t b = 0; b < chunk; ++b) {
            payload.push_back(static_cast<std::uint8_t>(rng_.next_u64()));
        }
        remaining -= chunk;
        // 200 us pacing between a frame's packets
        frame.packets.push_back(make_udp_packet(flow_, std::move(payload),
                                                frame.first_packet_ts.plus_usec(200 * i)));
    }

    ++frame_index_;
    clock_s_ =
        base_clock_s_ + static_cast<double>(frame_index_ - frames_at_base_) / profile.fps;
    if (controller_ && clock_s_ >= window_end_s_ && clock_s_ < spec_.duration_s) {
        feedback_due_ = true;
    }
    return frame;
}

std::vector<Packet> gen_video_stream(const SourceModel& model, const StreamSpec& spec,
                                     const FlowKey& flow,
                                     const std::function<double(std::size_t)>& loss_feedback,
                                     TimeUsec start) {
    VideoStreamGenerator gen(model, spec, flow, start);
    std::vector<Packet> out;
    while (!gen.done()) {
        if (gen.needs_feedback()) {
            gen.report_window_loss(loss_feedback ? loss_feedback(gen.window_index()) : 0.0);
        }
        GeneratedFrame frame = gen.next_frame();
        out.insert(out.end(), std::make_move_iterator(frame.packets.begin()),
                   std::make_move_iterator(frame.packets.end()));
    }
    return out;
}

std::vector<Packet> gen_audio_stream(const FlowKey& flow, double duration_s,
                                     std::uint8_t payload_type, std::uint32_t ssrc,
                                     std::uint64_t seed, TimeUsec start) {
    SplitMix64 rng(seed);
    std::vector<Packet> out;
    std::uint16_t seq = 0;
    // 20 ms ptime, 160-byte payloads
    for (double t = 0.0; t < duration_s; t += 0.020) {
        rtp::Header h;
        h.marker = false;
        h.payload_type = payload_type;
        h.sequence_number = seq++;
        h.timestamp = static_cast<std::uint32_t>(static_cast<std::uint64_t>(t * 8000.0));
        h.ssrc = ssrc;
        Bytes payload = rtp::encode(h);
        for (int b = 0; b < 160; ++b) payload.push_back(static_cast<std::uint8_t>(rng.next_u64()));
        out.push_back(make_udp_packet(flow, std::move(payload),
                                      start.plus_usec(static_cast<std::int64_t>(t * 1e6))));
    }
    return out;
}

// ---- DER & DTLS flight ----

namespace {

Bytes der_wrap(std::uint8_t tag, ByteView content) {
    Bytes out;
    out.push_back(tag);
    const std::size_t n = content.size();
    if (n < 0x80) {
        out.push_back(static_cast<std::uint8_t>(n));
    } else if (n <= 0xff) {
        out.push_back(0x81);
        out.push_back(static_cast<std::uint8_t>(n));
    } else {
        out.push_back(0x82);
        out.push_back(static_cast<std::uint8_t>(n >> 8));
        out.push_back(static_cast<std::uint8_t>(n));
    }
    out.insert(out.end(), content.begin(), content.end());
    return out;
}

Bytes der_wrap(std::uint8_t tag, const Bytes& content) { return der_wrap(tag, ByteView(content)); }

void append(Bytes& out, const Bytes& piece) { out.insert(out.end(), piece.begin(), piece.end()); }

const Bytes kOidCommonName = {0x06, 0x03, 0x55, 0x04, 0x03};
const Bytes kOidSha256Rsa = {0x06, 0x09, 0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x01, 0x0b};
const Bytes kOidRsaEncryption = {0x06, 0x09, 0x2a, 0x86, 0x48, 0x86,
                                 0xf7, 0x0d, 0x01, 0x01, 0x01};

Bytes der_name_with_cn(const std::string& cn) {
    Bytes atv = kOidCommonName;
    append(atv, der_wrap(0x0c, ByteView(reinterpret_cast<const std::uint8_t*>(cn.data()), cn.size())));
    Bytes rdn = der_wrap(0x30, atv);
    Bytes set = der_wrap(0x31, rdn);
    return der_wrap(0x30, set);
}

}  // namespace

Expected<Bytes> der_certificate_with_issuer_cn(const std::string& common_name) {
    if (common_name.size() > kMaxIssuerLen) {
        return Error{"issuer longer than 64 bytes", common_name.size()};
    }
    for (char c : common_name) {
        if (c < 0x20 || c > 0x7e) return Error{"issuer must be printable ASCII", 0};
    }

    const Bytes sig_alg = der_wrap(0x30, kOidSha256Rsa);
    const Bytes name = der_name_with_cn(common_name);

    Bytes tbs;
    append(tbs, der_wrap(0xa0, der_wrap(0x02, Bytes{0x02})));  // [0] version v3
    append(tbs, der_wrap(0x02, Bytes{0x01}));                  // serialNumber
    append(tbs, sig_alg);
    append(tbs, name);  // issuer
    Bytes validity;
    const char* not_before = "250101000000Z";
    const char* not_after = "350101000000Z";
    append(validity, der_wrap(0x17, ByteView(reinterpret_cast<const std::uint8_t*>(not_before), 13)));
    append(validity, der_wrap(0x17, ByteView(reinterpret_cast<const std::uint8_t*>(not_after), 13)));
    append(tbs, der_wrap(0x30, validity));
    append(tbs, name);  // subject == issuer (self-signed)
    Bytes spki_alg = kOidRsaEncryption;
    append(spki_alg, Bytes{0x05, 0x00});  // NULL params
    Bytes spki;
    append(spki, der_wrap(0x30, spki_alg));
    append(spki, der_wrap(0x03, Bytes{0x00, 0xde, 0xad, 0xbe, 0xef, 0x01, 0x02, 0x03, 0x04}));
    append(tbs, der_wrap(0x30, spki));

    Bytes cert;
    append(cert, der_wrap(0x30, tbs));
    append(cert, sig_alg);
    append(cert, der_wrap(0x03, Bytes{0x00, 0x0b, 0xad, 0xca, 0xfe, 0x05, 0x06, 0x07, 0x08}));
    return der_wrap(0x30, cert);
}

namespace {

Bytes handshake_fragment(std::uint8_t msg_type, std::uint32_t total_len, std::uint16_t msg_seq,
                         std::uint32_t frag_off, ByteView frag) {
    Bytes out;
    out.push_back(msg_type);
    out.push_back(static_cast<std::uint8_t>(total_len >> 16));
    out.push_back(static_cast<std::uint8_t>(total_len >> 8));
    out.push_back(static_cast<std::uint8_t>(total_len));
    out.push_back(static_cast<std::uint8_t>(msg_seq >> 8));
    out.push_back(static_cast<std::uint8_t>(msg_seq));
    out.push_back(static_cast<std::uint8_t>(frag_off >> 16));
    out.push_back(static_cast<std::uint8_t>(frag_off >> 8));
    out.push_back(static_cast<std::uint8_t>(frag_off));
    out.push_back(static_cast<std::uint8_t>(frag.size() >> 16));
    out.push_back(static_cast<std::uint8_t>(frag.size() >> 8));
    out.push_back(static_cast<std::uint8_t>(frag.size()));
    out.insert(out.end(), frag.begin(), frag.end());
    return out;
}

constexpr std::uint16_t kDtls12Version = 0xfefd;

}  // namespace

Expected<std::vector<Packet>> gen_dtls_flight(const std::string& issuer, const FlowKey& flow,
                                              std::optional<std::uint32_t> fragment_at,
                                              TimeUsec start) {
    auto cert = der_certificate_with_issuer_cn(issuer);
    if (!cert.ok()) return cert.error();

    // Certificate message body: 3-byte list length, then 3-byte-length-
    // prefixed DER certificates (a single-entry chain here).
    Bytes body;
    const std::uint32_t cert_len = static_cast<std::uint32_t>(cert.value().size());
    const std::uint32_t list_len = cert_len + 3;
    body.push_back(static_cast<std::uint8_t>(list_len >> 16));
    body.push_back(static_cast<std::uint8_t>(list_len >> 8));
    body.push_back(static_cast<std::uint8_t>(list_len));
    body.push_back(static_cast<std::uint8_t>(cert_len >> 16));
    body.push_back(static_cast<std::uint8_t>(cert_len >> 8));
    body.push_back(static_cast<std::uint8_t>(cert_len));
    append(body, cert.value());

    const std::uint32_t total_len = static_cast<std::uint32_t>(body.size());
    std::vector<Bytes> fragments;
    if (fragment_at && *fragment_at > 0 && *fragment_at < total_len) {
        fragments.push_back(handshake_fragment(dtls::kHsCertificate, total_len, 0, 0,
                                               ByteView(body).first(*fragment_at)));
        fragments.push_back(handshake_fragment(dtls::kHsCertificate, total_len, 0, *fragment_at,
                                               ByteView(body).subspan(*fragment_at)));
    } else if (fragment_at) {
        return Error{"fragment offset outside message body", *fragment_at};
    } else {
        fragments.push_back(handshake_fragment(dtls::kHsCertificate, total_len, 0, 0, body));
    }

    std::vector<Packet> packets;
    std::uint64_t record_seq = 0;
    for (const Bytes& frag : fragments) {
        dtls::Record rec;
        rec.content_type = dtls::kHandshake;
        rec.protocol_version = kDtls12Version;
        rec.epoch = 0;
        rec.sequence_number = record_seq;
        rec.fragment = frag;
        packets.push_back(make_udp_packet(flow, dtls::encode_record(rec),
                                          start.plus_usec(1000 * static_cast<std::int64_t>(record_seq))));
        ++record_seq;
    }
    return packets;
}

std::vector<Packet> gen_appdata_stream(const FlowKey& flow, std::size_t count,
                                       std::size_t record_bytes, std::uint64_t seed,
                                       TimeUsec start, std::int64_t interval_usec) {
    SplitMix64 rng(seed);
    std::vector<Packet> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        dtls::Record rec;
        rec.content_type = dtls::kApplicationData;
        rec.protocol_version = kDtls12Version;
        rec.epoch = 1;
        rec.sequence_number = i;
        rec.fragment.reserve(record_bytes);
        for (std::size_t b = 0; b < record_bytes; ++b) {
            rec.fragment.push_back(static_cast<std::uint8_t>(rng.next_u64()));
        }
        out.push_back(make_udp_packet(flow, dtls::encode_record(rec),
                                      start.plus_usec(interval_usec * static_cast<std::int64_t>(i))));
    }
    return out;
}

}  // namespace rtcimpair::synth
