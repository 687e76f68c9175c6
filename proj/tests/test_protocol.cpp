#include <catch2/catch_amalgamated.hpp>

#include "airpose/rng.hpp"
#include "airpose/sync.hpp"
#include "airpose/timing.hpp"
#include "airpose/wire.hpp"

using namespace airpose;

TEST_CASE("message body is exactly 544 bytes") {
  StageMessage m;
  m.frame_id = 42;
  m.stage = 1;
  const auto bytes = encode_message(m);
  CHECK(bytes.size() == kMessageBytes);
  CHECK(bytes.size() - kMessageHeaderBytes == 544);
}

TEST_CASE("zero message decodes to all-zero payload") {
  std::vector<std::uint8_t> bytes(kMessageBytes, 0);
  const StageMessage m = decode_message(bytes);
  CHECK(m.frame_id == 0);
  CHECK(m.stage == 0);
  for (float f : m.theta) CHECK(f == 0.0f);
  for (float f : m.beta) CHECK(f == 0.0f);
}

TEST_CASE("encode/decode round trip is bit identical") {
  Rng rng(301);
  for (int trial = 0; trial < 10000; ++trial) {
    StageMessage m;
    m.frame_id = static_cast<std::int64_t>(rng.next_u64());
    m.stage = rng.bernoulli(0.5) ? 1 : 0;
    for (auto& f : m.theta) f = static_cast<float>(rng.normal() * 10.0);
    for (auto& f : m.beta) f = static_cast<float>(rng.normal() * 10.0);
    const StageMessage back = decode_message(encode_message(m));
    REQUIRE(back.frame_id == m.frame_id);
    REQUIRE(back.stage == m.stage);
    REQUIRE(std::memcmp(back.theta.data(), m.theta.data(), sizeof(m.theta)) == 0);
    REQUIRE(std::memcmp(back.beta.data(), m.beta.data(), sizeof(m.beta)) == 0);
  }
}

TEST_CASE("malformed messages are rejected") {
  StageMessage m;
  auto bytes = encode_message(m);
  bytes.pop_back();
  CHECK_THROWS_AS(decode_message(bytes), MalformedMessage);

  auto long_bytes = encode_message(m);
  long_bytes.push_back(0);
  CHECK_THROWS_AS(decode_message(long_bytes), MalformedMessage);

  StageMessage bad_stage;
  bad_stage.stage = 2;
  CHECK_THROWS_AS(encode_message(bad_stage), MalformedMessage);

  StageMessage nan_msg;
  nan_msg.theta[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(encode_message(nan_msg), MalformedMessage);

  auto nan_bytes = encode_message(m);
  const std::uint32_t nan_bits = 0x7fc00000u;
  std::memcpy(nan_bytes.data() + kMessageHeaderBytes, &nan_bits, 4);
  CHECK_THROWS_AS(decode_message(nan_bytes), MalformedMessage);
}

namespace {
std::vector<TimedFrame> make_stream(int agent, double period_ms, int n, double offset_ms = 0) {
  std::vector<TimedFrame> s;
  for (int i = 0; i < n; ++i)
    s.push_back({agent, static_cast<std::int64_t>((offset_ms + i * period_ms) * 1e6),
                 static_cast<std::size_t>(i)});
  return s;
}
}  // namespace

TEST_CASE("match_frames pairs identical streams completely") {
  const auto a = make_stream(0, 25.0, 100);
  const auto b = make_stream(1, 25.0, 100);
  const MatchResult r = match_frames(a, b);
  CHECK(r.pairs.size() == 100);
  CHECK(r.drops.empty());
}

TEST_CASE("match_frames tolerates a constant offset within tolerance") {
  const auto a = make_stream(0, 25.0, 200);
  const auto b = make_stream(1, 25.0, 200, 5.0);
  const MatchResult r = match_frames(a, b);
  CHECK(r.pairs.size() == 200);
  CHECK(r.drops.empty());
  for (const auto& [i, j] : r.pairs) CHECK(i == j);
}

TEST_CASE("match_frames drops half of a double-rate stream") {
  const auto a = make_stream(0, 25.0, 100);  // 40 fps
  const auto b = make_stream(1, 50.0, 50);   // half rate
  const MatchResult r = match_frames(a, b);
  CHECK(r.pairs.size() == 50);
  CHECK(r.drops.size() == 50);
  for (const auto& d : r.drops) CHECK(d.agent_id == 0);
}

TEST_CASE("match_frames never pairs beyond tolerance") {
  const auto a = make_stream(0, 25.0, 100);
  const auto b = make_stream(1, 25.0, 100, 13.0);  // beyond the 12.5 default
  const MatchResult r = match_frames(a, b);
  for (const auto& [i, j] : r.pairs) {
    const double dt = std::abs(static_cast<double>(a[i].shutter_timestamp_ns -
                                                   b[j].shutter_timestamp_ns)) / 1e6;
    CHECK(dt <= 12.5);
  }
}

TEST_CASE("match_frames requires monotone streams") {
  std::vector<TimedFrame> bad{{0, 100, 0}, {0, 50, 1}};
  const auto good = make_stream(1, 25.0, 2);
  CHECK_THROWS_AS(match_frames(bad, good), DatasetError);
}

TEST_CASE("nominal window timing fits the budget exactly") {
  TimingModel timing;  // no jitter
  Rng rng(1);
  const WindowSchedule w = plan_frame_window(timing, true, false, rng);
  CHECK(w.completed);
  for (const auto& t : w.agents) {
    CHECK(t.acquisition == 140.0);
    CHECK(t.stage1 == 43.0);
    CHECK(t.comm1 == 25.0);
    CHECK(t.stage2 == 2.5);
    CHECK(t.comm2 == 25.0);
    CHECK(t.stage3 == 2.5);
    CHECK(t.total == Catch::Approx(238.0));
  }
  CHECK(timing.window_rate_fps() == Catch::Approx(1000.0 / 240.0));
}

TEST_CASE("three extra milliseconds anywhere drop the frame") {
  Rng rng(1);
  for (int component = 0; component < 4; ++component) {
    TimingModel t;
    switch (component) {
      case 0: t.acquisition_ms += 3; break;
      case 1: t.stage1_ms += 3; break;
      case 2: t.comm_ms += 1.5; break;  // two exchanges on the critical path
      case 3: t.later_stage_ms += 1.5; break;
    }
    const WindowSchedule w = plan_frame_window(t, true, false, rng);
    CHECK_FALSE(w.completed);
  }
}

TEST_CASE("non-exchanging and pipelined schedules skip comm waits") {
  TimingModel timing;
  Rng rng(1);
  const WindowSchedule solo = plan_frame_window(timing, false, false, rng);
  CHECK(solo.agents[0].total == Catch::Approx(140 + 43 + 2.5 + 2.5));
  const WindowSchedule piped = plan_frame_window(timing, true, true, rng);
  CHECK(piped.agents[0].total == Catch::Approx(140 + 43 + 2.5 + 2.5));
  CHECK(piped.completed);
}

TEST_CASE("asymmetric jitter delays the partner through the exchange") {
  TimingModel t;
  Rng rng(1);
  // Slow down agent 0's first stage only; agent 1 must wait for the message.
  t.stage1_ms = 43;
  WindowSchedule w = plan_frame_window(t, true, false, rng);
  const double nominal_total = w.agents[1].total;
  t.stage1_ms = 46;  // both agents slower; partner wait grows identically
  w = plan_frame_window(t, true, false, rng);
  CHECK(w.agents[1].total == Catch::Approx(nominal_total + 3.0));
}
