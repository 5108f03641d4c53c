#include "rtcimpair/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>

#include "rtcimpair/rng.hpp"

namespace rtcimpair::sim {

CovertChannelModel default_covert_model() {
    CovertChannelModel m;
    m.carrier = synth::default_profiles()[0];  // 1080p
    return m;
}

Expected<double> analytic_frame_loss(double q, std::uint32_t packets_per_frame) {
    if (q < 0.0 || q > 1.0) return Error{"loss rate outside [0,1]", 0};
    if (packets_per_frame < 1) return Error{"packets_per_frame must be >= 1", 0};
    return 1.0 - std::pow(1.0 - q, static_cast<double>(packets_per_frame));
}

namespace {

struct SimPolicy {
    double frame_drop_rate = 0.0;
    bool has_frame_drop = false;
    double uniform_loss_rate = 0.0;
    bool has_uniform_loss = false;
    double delay_ms = 0.0;
};

Expected<SimPolicy> flatten_policy(const attack::PolicyChain& chain) {
    SimPolicy p;
    for (const auto& entry : chain.policies) {
        if (const auto* fd = std::get_if<attack::FrameDropConfig>(&entry)) {
            if (p.has_frame_drop) return Error{"more than one frame_drop policy", 0};
            p.frame_drop_rate = fd->rate;
            p.has_frame_drop = true;
        } else if (const auto* ul = std::get_if<attack::UniformLossConfig>(&entry)) {
            if (p.has_uniform_loss) return Error{"more than one uniform_loss policy", 0};
            p.uniform_loss_rate = ul->rate;
            p.has_uniform_loss = true;
        } else if (const auto* fix = std::get_if<attack::FixedDelayConfig>(&entry)) {
            p.delay_ms += fix->delay_ms;
        } else {
            return Error{"policy not applicable to the simulator", 0};
        }
    }
    return p;
}

// Attack outcome for one frame of n packets.
struct FrameFate {
    bool frame_dropped = false;        // whole frame removed (frame drop)
    std::vector<bool> packet_dropped;  // per-packet under uniform loss
    bool any_packet_dropped = false;
};

FrameFate attack_frame(const SimPolicy& policy, std::uint32_t n_packets, SplitMix64& rng) {
    FrameFate fate;
    if (policy.has_frame_drop) {
        fate.frame_dropped = rng.bernoulli(policy.frame_drop_rate);
    }
    if (policy.has_uniform_loss) {
        fate.packet_dropped.assign(n_packets, false);
        for (std::uint32_t i = 0; i < n_packets; ++i) {
            fate.packet_dropped[i] = rng.bernoulli(policy.uniform_loss_rate);
            fate.any_packet_dropped = fate.any_packet_dropped || fate.packet_dropped[i];
        }
    }
    return fate;
}

std::uint32_t frame_size_draw(const synth::ResolutionProfile& p, SplitMix64& rng) {
    const double size = p.mean_frame_bytes + rng.next_gaussian() * p.frame_bytes_stdev;
    return static_cast<std::uint32_t>(std::max(1.0, std::round(size)));
}

struct Message {
    double first_send_s = -1.0;
    double rto_s = 0.0;
    double deadline_s = 0.0;
    bool acked = false;
    bool delivered = false;
    double delivered_s = 0.0;
    bool first_tx_lost = false;
    std::uint32_t tx_count = 0;
};

}  // namespace

Expected<DegradationReport> simulate(const CovertChannelModel& covert,
                                     const synth::SourceModel& video,
                                     const attack::PolicyChain& policy, double duration_s,
                                     std::uint64_t seed) {
    auto flattened = flatten_policy(policy);
    if (!flattened.ok()) return flattened.error();
    const SimPolicy& atk = flattened.value();
    if (duration_s <= 0.0) return Error{"duration must be positive", 0};
    if (covert.message_bytes == 0 || covert.window_messages == 0) {
        return Error{"covert model parameters must be positive", 0};
    }

    DegradationReport report;
    report.duration_s = duration_s;
    report.seed = seed;
    const double delay_s = atk.delay_ms / 1000.0;

    // Independent deterministic streams per role.
    SplitMix64 covert_size_rng(seed ^ 0xc0de5150ULL);
    SplitMix64 covert_attack_rng(seed ^ 0x5eedfa11ULL);
    SplitMix64 video_size_rng(seed ^ 0x71de0515ULL);
    SplitMix64 video_attack_rng(seed ^ 0x0a77ac4eULL);

    double window_s = 2.0;  // reporting granularity; adaptive models override
    if (const auto* adaptive = std::get_if<synth::AdaptiveModel>(&video)) {
        window_s = adaptive->window_s;
    }
    std::vector<double> covert_window_bytes;
    auto bucket_delivery = [&](double at, double bytes) {
        const auto idx = static_cast<std::size_t>(std::max(0.0, at) / window_s);
        if (covert_window_bytes.size() <= idx) covert_window_bytes.resize(idx + 1, 0.0);
        covert_window_bytes[idx] += bytes;
    };

    // ---- covert side ----
    {
        const synth::ResolutionProfile& carrier = covert.carrier;
        std::vector<Message> messages;
        std::vector<std::size_t> live;  // sent, unacked message ids
        std::deque<std::pair<double, std::size_t>> ack_queue;  // (ack time, id), FIFO in time
        double latency_sum_s = 0.0;

        for (std::uint64_t tick = 0;; ++tick) {
            const double t = static_cast<double>(tick) / carrier.fps;
            if (t >= duration_s) break;
            while (!ack_queue.empty() && ack_queue.front().first <= t) {
                const std::size_t id = ack_queue.front().second;
                ack_queue.pop_front();
                if (!messages[id].acked) {
                    messages[id].acked = true;
                    live.erase(std::remove(live.begin(), live.end(), id), live.end());
                }
            }

            const std::uint32_t frame_bytes = frame_size_draw(carrier, covert_size_rng);
            const std::uint32_t n_packets =
                (frame_bytes + covert.mtu_payload_bytes - 1) / covert.mtu_payload_bytes;
            const std::uint32_t capacity = frame_bytes / covert.message_bytes;

            // Fill the frame: overdue retransmissions first, then new sends
            // while the window allows.
            std::vector<std::size_t> carried;
            for (std::size_t id : live) {
                if (carried.size() >= capacity) break;
                if (!messages[id].acked && messages[id].deadline_s <= t) {
                    carried.push_back(id);
                    Message& m = messages[id];
                    m.rto_s = std::min(m.rto_s * covert.rto_backoff,
                                       covert.rto_cap_ms / 1000.0);
                    m.deadline_s = t + m.rto_s;
                    ++m.tx_count;
                }
            }
            while (carried.size() < capacity && live.size() < covert.window_messages) {
                Message m;
                m.first_send_s = t;
                m.rto_s = covert.retransmit_timeout_ms / 1000.0;
                m.deadline_s = t + m.rto_s;
                m.tx_count = 1;
                messages.push_back(m);
                const std::size_t id = messages.size() - 1;
                live.push_back(id);
                carried.push_back(id);
            }

            ++report.covert_frames_total;
            FrameFate fate = attack_frame(atk, n_packets, covert_attack_rng);
            // achieved frame loss counts frames the attack damaged at all
            if (fate.frame_dropped || fate.any_packet_dropped) ++report.covert_frames_dropped;
            bool frame_lost = fate.frame_dropped;

            // Optional QoS-style single fast retransmit of a dropped frame.
            if (frame_lost && covert.fast_retransmit_probability > 0.0 &&
                covert_attack_rng.bernoulli(covert.fast_retransmit_probability)) {
                FrameFate retry = attack_frame(atk, n_packets, covert_attack_rng);
                if (!retry.frame_dropped) {
                    frame_lost = false;
                    fate = retry;
                }
            }

            for (std::size_t slot = 0; slot < carried.size(); ++slot) {
                Message& m = messages[carried[slot]];
                bool lost = frame_lost;
                if (!lost && atk.has_uniform_loss) {
                    // messages sit at fixed offsets; a message is lost with
                    // any of its covering packets
                    const std::uint64_t lo =
                        static_cast<std::uint64_t>(slot) * covert.message_bytes;
                    const std::uint64_t hi = lo + covert.message_bytes - 1;
                    for (std::uint64_t p = lo / covert.mtu_payload_bytes;
                         p <= hi / covert.mtu_payload_bytes && p < fate.packet_dropped.size();
                         ++p) {
                        if (fate.packet_dropped[p]) {
                            lost = true;
                            break;
                        }
                    }
                }
                if (lost) {
                    if (m.tx_count == 1) m.first_tx_lost = true;
                    continue;
                }
                const double delivered_at = t + delay_s;
                if (!m.delivered) {
                    m.delivered = true;
                    m.delivered_s = delivered_at;
                    ++report.covert_messages_delivered;
                    latency_sum_s += delivered_at - m.first_send_s;
                    bucket_delivery(delivered_at, covert.message_bytes);
                }
                ack_queue.emplace_back(delivered_at, carried[slot]);
            }
        }

        report.covert_messages_sent = messages.size();
        report.covert_goodput_bytes_per_s =
            static_cast<double>(report.covert_messages_delivered) * covert.message_bytes /
            duration_s;
        report.covert_latency_ms = report.covert_messages_delivered
                                       ? latency_sum_s * 1000.0 / report.covert_messages_delivered
                                       : 0.0;
        std::uint64_t first_tx_lost = 0;
        for (const Message& m : messages) {
            if (m.first_tx_lost) ++first_tx_lost;
        }
        report.covert_message_loss_before_recovery =
            messages.empty() ? 0.0 : static_cast<double>(first_tx_lost) / messages.size();
        report.frame_loss_achieved =
            report.covert_frames_total
                ? static_cast<double>(report.covert_frames_dropped) / report.covert_frames_total
                : 0.0;
    }

    // ---- video side ----
    {
        std::optional<synth::AdaptiveController> controller;
        synth::ResolutionProfile fixed;
        if (const auto* adaptive = std::get_if<synth::AdaptiveModel>(&video)) {
            controller.emplace(*adaptive);
        } else {
            fixed = std::get<synth::NonAdaptiveModel>(video).profile;
        }

        double base_t = 0.0;
        std::uint64_t frames_at_base = 0;
        double t = 0.0;
        double window_end = window_s;
        std::uint64_t win_total = 0, win_dropped = 0, win_delivered = 0;
        while (t < duration_s) {
            const synth::ResolutionProfile& profile = controller ? controller->active() : fixed;
            const std::uint32_t frame_bytes = frame_size_draw(profile, video_size_rng);
            const std::uint32_t n_packets =
                (frame_bytes + covert.mtu_payload_bytes - 1) / covert.mtu_payload_bytes;
            FrameFate fate = attack_frame(atk, n_packets, video_attack_rng);
            const bool lost = fate.frame_dropped || fate.any_packet_dropped;

            ++report.video_frames_total;
            ++win_total;
            if (lost) {
                ++win_dropped;
            } else {
                ++report.video_frames_delivered;
                ++win_delivered;
            }

            t = base_t +
                static_cast<double>(report.video_frames_total - frames_at_base) / profile.fps;
            if (t >= window_end || t >= duration_s) {
                const double loss = win_total ? static_cast<double>(win_dropped) / win_total : 0.0;
                WindowRow row;
                row.t_end_s = std::min(t, duration_s);
                row.video_delivered_fps = window_s > 0 ? win_delivered / window_s : 0.0;
                row.video_frame_loss = loss;
                row.video_profile = profile.name;
                report.windows.push_back(row);
                if (controller) {
                    const std::size_t rung_before = controller->rung();
                    controller->observe_window(loss);
                    if (controller->rung() != rung_before) {
                        base_t = t;
                        frames_at_base = report.video_frames_total;
                    }
                }
                win_total = win_dropped = win_delivered = 0;
                window_end += window_s;
            }
        }
        report.video_delivered_fps = report.video_frames_delivered / duration_s;
        report.video_final_profile = controller ? controller->active().name : fixed.name;
    }

    for (std::size_t i = 0; i < report.windows.size(); ++i) {
        const double bytes = i < covert_window_bytes.size() ? covert_window_bytes[i] : 0.0;
        report.windows[i].covert_goodput_bytes_per_s = bytes / window_s;
    }

    return report;
}

Expected<RatioResult> differential_ratio(const DegradationReport& report,
                                         const DegradationReport& baseline) {
    if (baseline.covert_goodput_bytes_per_s <= 0.0) {
        return Error{"baseline covert goodput is zero", 0};
    }
    if (baseline.video_delivered_fps <= 0.0) {
        return Error{"baseline video fps is zero", 0};
    }
    double d_covert = 1.0 - report.covert_goodput_bytes_per_s / baseline.covert_goodput_bytes_per_s;
    double d_video = 1.0 - report.video_delivered_fps / baseline.video_delivered_fps;
    d_covert = std::max(0.0, d_covert);
    d_video = std::max(0.0, d_video);

    RatioResult out;
    if (d_covert == 0.0 && d_video == 0.0) {
        out.value = 1.0;
        out.no_degradation = true;
        return out;
    }
    if (d_video == 0.0) {
        out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    out.value = d_covert / d_video;
    return out;
}

nlohmann::json degradation_report_to_json(const DegradationReport& r) {
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : r.windows) {
        windows.push_back({{"t_end_s", w.t_end_s},
                           {"covert_goodput_bytes_per_s", w.covert_goodput_bytes_per_s},
                           {"video_delivered_fps", w.video_delivered_fps},
                           {"video_frame_loss", w.video_frame_loss},
                           {"video_profile", w.video_profile}});
    }
    return nlohmann::json{
        {"covert_goodput_bytes_per_s", r.covert_goodput_bytes_per_s},
        {"covert_message_loss_before_recovery", r.covert_message_loss_before_recovery},
        {"covert_latency_ms", r.covert_latency_ms},
        {"video_delivered_fps", r.video_delivered_fps},
        {"video_final_profile", r.video_final_profile},
        {"frame_loss_achieved", r.frame_loss_achieved},
        {"duration_s", r.duration_s},
        {"seed", r.seed},
        {"covert_messages_sent", r.covert_messages_sent},
        {"covert_messages_delivered", r.covert_messages_delivered},
        {"covert_frames_total", r.covert_frames_total},
        {"covert_frames_dropped", r.covert_frames_dropped},
        {"video_frames_total", r.video_frames_total},
        {"video_frames_delivered", r.video_frames_delivered},
        {"windows", windows}};
}

std::string windows_to_csv(const DegradationReport& r) {
    std::ostringstream out;
    out << "t_end_s,covert_goodput_bytes_per_s,video_delivered_fps,video_frame_loss,video_profile\n";
    for (const auto& w : r.windows) {
        out << w.t_end_s << ',' << w.covert_goodput_bytes_per_s << ',' << w.video_delivered_fps
            << ',' << w.video_frame_loss << ',' << w.video_profile << '\n';
    }
    return out.str();
}

}  // namespace rtcimpair::sim
