#include "doctest.h"
#include "rtcimpair/config.hpp"

using namespace rtcimpair;
using nlohmann::json;

TEST_CASE("default document parses") {
    auto cfg = config::parse_config(config::default_config_json());
    REQUIRE(cfg.ok());
    CHECK(cfg.value().seed == 0);
    CHECK(cfg.value().chain.policies.empty());
    CHECK(cfg.value().profiles.size() == 4);
    CHECK(std::holds_alternative<synth::NonAdaptiveModel>(cfg.value().source));
    CHECK(cfg.value().covert.carrier.name == "1080p");
}

TEST_CASE("unknown keys are rejected with their path") {
    json doc = {{"polcy", {{"chain", json::array()}}}};
    auto cfg = config::parse_config(doc);
    REQUIRE(!cfg.ok());
    CHECK(cfg.error().message.find("polcy") != std::string::npos);

    json nested = {{"engine", {{"worker_count", 2}}}};
    auto cfg2 = config::parse_config(nested);
    REQUIRE(!cfg2.ok());
    CHECK(cfg2.error().message.find("engine.worker_count") != std::string::npos);
}

TEST_CASE("rates outside [0,1] are rejected with the key path") {
    json doc = {{"policy", {{"chain", {{{"kind", "frame_drop"}, {"rate", 1.5}}}}}}};
    auto cfg = config::parse_config(doc);
    REQUIRE(!cfg.ok());
    CHECK(cfg.error().message.find("policy.chain[0].rate") != std::string::npos);
}

TEST_CASE("policy chain parses every kind in order") {
    json doc = {{"seed", 7},
                {"policy",
                 {{"chain",
                   {{{"kind", "data_channel_block"}},
                    {{"kind", "frame_drop"}, {"rate", 0.25}},
                    {{"kind", "uniform_loss"}, {"rate", 0.05}},
                    {{"kind", "fixed_delay"}, {"delay_ms", 100}}}}}}};
    auto cfg = config::parse_config(doc);
    REQUIRE(cfg.ok());
    REQUIRE(cfg.value().chain.policies.size() == 4);
    CHECK(std::holds_alternative<attack::DataChannelBlockConfig>(cfg.value().chain.policies[0]));
    const auto& drop = std::get<attack::FrameDropConfig>(cfg.value().chain.policies[1]);
    CHECK(drop.rate == 0.25);
    CHECK(drop.seed == 7);  // policy seeds default to the run seed
    CHECK(drop.pt_set.contains(102));
    CHECK(drop.pt_set.contains(77));
    CHECK(std::get<attack::UniformLossConfig>(cfg.value().chain.policies[2]).seed == 7);
    CHECK(std::get<attack::FixedDelayConfig>(cfg.value().chain.policies[3]).delay_ms == 100);
    CHECK(cfg.value().engine.seed == 7);
}

TEST_CASE("bad policy kinds and parameters error with paths") {
    json unknown_kind = {{"policy", {{"chain", {{{"kind", "tarpit"}}}}}}};
    CHECK(!config::parse_config(unknown_kind).ok());

    json zero_delay = {{"policy", {{"chain", {{{"kind", "fixed_delay"}, {"delay_ms", 0}}}}}}};
    auto r = config::parse_config(zero_delay);
    REQUIRE(!r.ok());
    CHECK(r.error().message.find("delay_ms") != std::string::npos);
}

TEST_CASE("adaptive source resolves ladder profiles") {
    json doc = {{"source",
                 {{"kind", "adaptive"}, {"ladder", {"1080p", "540p", "240p"}}}}};
    auto cfg = config::parse_config(doc);
    REQUIRE(cfg.ok());
    const auto& model = std::get<synth::AdaptiveModel>(cfg.value().source);
    REQUIRE(model.ladder.size() == 3);
    CHECK(model.ladder[2].mean_frame_bytes == 311);

    json bad = {{"source", {{"kind", "adaptive"}, {"ladder", {"1080p", "4k"}}}}};
    auto r = config::parse_config(bad);
    REQUIRE(!r.ok());
    CHECK(r.error().message.find("ladder") != std::string::npos);

    json ascending = {{"source", {{"kind", "adaptive"}, {"ladder", {"540p", "1080p"}}}}};
    CHECK(!config::parse_config(ascending).ok());
}

TEST_CASE("custom profiles replace the defaults") {
    json doc = {{"profiles",
                 {{{"name", "tiny"}, {"mean_frame_bytes", 800}, {"frame_bytes_stdev", 100},
                   {"fps", 30.0}, {"width", 100}, {"height", 100}},
                  {{"name", "nano"}, {"mean_frame_bytes", 200}, {"frame_bytes_stdev", 20},
                   {"fps", 30.0}, {"width", 50}, {"height", 50}}}},
                {"source", {{"kind", "nonadaptive"}, {"profile", "tiny"}}},
                {"covert", {{"carrier_profile", "nano"}}}};
    auto cfg = config::parse_config(doc);
    REQUIRE(cfg.ok());
    CHECK(std::get<synth::NonAdaptiveModel>(cfg.value().source).profile.mean_frame_bytes == 800);
    CHECK(cfg.value().covert.carrier.mean_frame_bytes == 200);
}

TEST_CASE("merge: overlay wins, siblings survive") {
    json base = config::default_config_json();
    json overlay = {{"seed", 99}, {"engine", {{"workers", 8}}}};
    json merged = config::merge_config(base, overlay);
    CHECK(merged["seed"] == 99);
    CHECK(merged["engine"]["workers"] == 8);
    CHECK(merged["engine"]["issuer_match"] == "WebRTC");  // untouched sibling

    auto cfg = config::parse_config(merged);
    REQUIRE(cfg.ok());
    CHECK(cfg.value().engine.workers == 8);
    CHECK(cfg.value().seed == 99);
}

TEST_CASE("sim section validation") {
    json bad_rate = {{"sim", {{"frame_drop_rates", {0.0, 1.5}}}}};
    CHECK(!config::parse_config(bad_rate).ok());

    json bad_policy = {{"sim", {{"policy", "ddos"}}}};
    CHECK(!config::parse_config(bad_policy).ok());

    json good = {{"sim", {{"frame_drop_rates", {0.0, 0.05, 0.15, 0.25}}}}};
    auto cfg = config::parse_config(good);
    REQUIRE(cfg.ok());
    CHECK(cfg.value().sim.frame_drop_rates.size() == 4);
}

TEST_CASE("synth section validation") {
    json bad_mode = {{"synth", {{"mode", "quantum"}}}};
    CHECK(!config::parse_config(bad_mode).ok());

    json frag = {{"synth", {{"mode", "dtls_flight"}, {"fragment_at", 40}}}};
    auto cfg = config::parse_config(frag);
    REQUIRE(cfg.ok());
    REQUIRE(cfg.value().synth.fragment_at.has_value());
    CHECK(*cfg.value().synth.fragment_at == 40);
}
