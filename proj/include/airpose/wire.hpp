#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "airpose/types.hpp"

namespace airpose {

// Inter-agent stage payload: the viewpoint-independent (theta, beta) pair as
// float32. Body is exactly 544 bytes (136 floats, theta then beta), preceded
// by a 12-byte header: frame_id (8, little-endian), stage (1), reserved (3).
struct StageMessage {
  std::int64_t frame_id = 0;
  std::uint8_t stage = 0;
  std::array<float, kThetaDim> theta{};
  std::array<float, kShapeDim> beta{};
};

inline constexpr std::size_t kMessageBodyBytes = 4 * (kThetaDim + kShapeDim);
inline constexpr std::size_t kMessageHeaderBytes = 12;
inline constexpr std::size_t kMessageBytes = kMessageHeaderBytes + kMessageBodyBytes;
static_assert(kMessageBodyBytes == 544);

namespace detail {

inline void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_u64_le(std::span<const std::uint8_t> in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[static_cast<size_t>(i)]) << (8 * i);
  return v;
}

inline void put_f32_le(std::vector<std::uint8_t>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline float get_f32_le(std::span<const std::uint8_t> in) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(in[static_cast<size_t>(i)]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_message(const StageMessage& m) {
  if (m.stage > 1) throw MalformedMessage("encode_message: stage must be 0 or 1");
  for (float f : m.theta)
    if (std::isnan(f)) throw MalformedMessage("encode_message: NaN in theta");
  for (float f : m.beta)
    if (std::isnan(f)) throw MalformedMessage("encode_message: NaN in beta");

  std::vector<std::uint8_t> out;
  out.reserve(kMessageBytes);
  detail::put_u64_le(out, static_cast<std::uint64_t>(m.frame_id));
  out.push_back(m.stage);
  out.push_back(0);
  out.push_back(0);
  out.push_back(0);
  for (float f : m.theta) detail::put_f32_le(out, f);
  for (float f : m.beta) detail::put_f32_le(out, f);
  return out;
}

inline StageMessage decode_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kMessageBytes)
    throw MalformedMessage("decode_message: expected " + std::to_string(kMessageBytes) +
                           " bytes, got " + std::to_string(bytes.size()));
  StageMessage m;
  m.frame_id = static_cast<std::int64_t>(detail::get_u64_le(bytes.subspan(0, 8)));
  m.stage = bytes[8];
  if (m.stage > 1) throw MalformedMessage("decode_message: stage must be 0 or 1");
  std::size_t off = kMessageHeaderBytes;
  for (auto& f : m.theta) {
    f = detail::get_f32_le(bytes.subspan(off, 4));
    if (std::isnan(f)) throw MalformedMessage("decode_message: NaN in theta");
    off += 4;
  }
  for (auto& f : m.beta) {
    f = detail::get_f32_le(bytes.subspan(off, 4));
    if (std::isnan(f)) throw MalformedMessage("decode_message: NaN in beta");
    off += 4;
  }
  return m;
}

inline StageMessage make_stage_message(std::int64_t frame_id, std::uint8_t stage,
                                       const ThetaVec& theta, const ShapeVec& beta) {
  StageMessage m;
  m.frame_id = frame_id;
  m.stage = stage;
  for (int i = 0; i < kThetaDim; ++i) m.theta[static_cast<size_t>(i)] = static_cast<float>(theta[i]);
  for (int i = 0; i < kShapeDim; ++i) m.beta[static_cast<size_t>(i)] = static_cast<float>(beta[i]);
  return m;
}

inline ThetaVec message_theta(const StageMessage& m) {
  ThetaVec t;
  for (int i = 0; i < kThetaDim; ++i) t[i] = static_cast<double>(m.theta[static_cast<size_t>(i)]);
  return t;
}

inline ShapeVec message_beta(const StageMessage& m) {
  ShapeVec b;
  for (int i = 0; i < kShapeDim; ++i) b[i] = static_cast<double>(m.beta[static_cast<size_t>(i)]);
  return b;
}

}  // namespace airpose
