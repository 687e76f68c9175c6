#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "airpose/types.hpp"

namespace airpose {

struct TimedFrame {
  int agent_id = 0;
  std::int64_t shutter_timestamp_ns = 0;
  std::size_t frame_index = 0;  // index into the agent's own frame stream
};

struct MatchDrop {
  int agent_id = 0;
  std::size_t frame_index = 0;
  std::int64_t shutter_timestamp_ns = 0;
};

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<MatchDrop> drops;
};

// Greedy nearest-shutter-timestamp pairing within tolerance; every frame is
// used at most once and unmatched frames land in the drop log.
inline MatchResult match_frames(std::span<const TimedFrame> a, std::span<const TimedFrame> b,
                                double tolerance_ms = 12.5) {
  for (std::size_t i = 1; i < a.size(); ++i)
    if (a[i].shutter_timestamp_ns < a[i - 1].shutter_timestamp_ns)
      throw DatasetError("match_frames: stream timestamps must be nondecreasing");
  for (std::size_t i = 1; i < b.size(); ++i)
    if (b[i].shutter_timestamp_ns < b[i - 1].shutter_timestamp_ns)
      throw DatasetError("match_frames: stream timestamps must be nondecreasing");

  const std::int64_t tol_ns = static_cast<std::int64_t>(tolerance_ms * 1e6);
  MatchResult out;
  std::size_t i = 0, j = 0;
  auto drop_a = [&](std::size_t k) {
    out.drops.push_back({a[k].agent_id, a[k].frame_index, a[k].shutter_timestamp_ns});
  };
  auto drop_b = [&](std::size_t k) {
    out.drops.push_back({b[k].agent_id, b[k].frame_index, b[k].shutter_timestamp_ns});
  };
  while (i < a.size() && j < b.size()) {
    const std::int64_t dt = b[j].shutter_timestamp_ns - a[i].shutter_timestamp_ns;
    if (std::abs(dt) <= tol_ns) {
      // Commit only if neither side has a strictly closer upcoming partner.
      if (j + 1 < b.size() &&
          std::abs(b[j + 1].shutter_timestamp_ns - a[i].shutter_timestamp_ns) < std::abs(dt)) {
        drop_b(j++);
      } else if (i + 1 < a.size() &&
                 std::abs(b[j].shutter_timestamp_ns - a[i + 1].shutter_timestamp_ns) < std::abs(dt)) {
        drop_a(i++);
      } else {
        out.pairs.emplace_back(a[i].frame_index, b[j].frame_index);
        ++i;
        ++j;
      }
    } else if (dt < 0) {
      drop_b(j++);
    } else {
      drop_a(i++);
    }
  }
  while (i < a.size()) drop_a(i++);
  while (j < b.size()) drop_b(j++);
  return out;
}

}  // namespace airpose
