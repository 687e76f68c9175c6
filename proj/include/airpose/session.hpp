#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "airpose/estimator.hpp"
#include "airpose/sync.hpp"
#include "airpose/synthgen.hpp"
#include "airpose/timing.hpp"

namespace airpose {

// Gatekeeper for the decentralization audit: agents read image-side data
// (keypoints, crop, intrinsics) and per-camera ground truth only through a
// per-agent view, and every access is counted by (agent, camera). A correct
// session has zero off-diagonal reads.
class ObservationStore {
 public:
  explicit ObservationStore(const std::vector<FrameRecord>& data) : data_(&data) {}

  class View {
   public:
    View(ObservationStore* store, int agent_id) : store_(store), agent_(agent_id) {}

    const FrameCameraData& camera(std::size_t frame_index, int camera_id) const {
      store_->count(agent_, camera_id);
      return (*store_->data_)[frame_index].cameras[static_cast<size_t>(camera_id)];
    }

    // Per-camera ground truth (oracle-refiner fixture).
    BodyParams gt_body(std::size_t frame_index, int camera_id) const {
      store_->count(agent_, camera_id);
      const FrameRecord& rec = (*store_->data_)[frame_index];
      BodyParams gt;
      gt.tau = rec.tau_gt[static_cast<size_t>(camera_id)];
      gt.phi = rec.phi_gt[static_cast<size_t>(camera_id)];
      gt.theta = rec.gt_world.theta;
      gt.beta = rec.gt_world.beta;
      return gt;
    }

   private:
    ObservationStore* store_;
    int agent_;
  };

  View view(int agent_id) { return View(this, agent_id); }

  std::uint64_t reads(int agent_id, int camera_id) const {
    return counts_[static_cast<size_t>(agent_id)][static_cast<size_t>(camera_id)];
  }

  std::uint64_t cross_reads() const { return counts_[0][1] + counts_[1][0]; }

 private:
  void count(int agent, int camera) {
    ++counts_[static_cast<size_t>(agent)][static_cast<size_t>(camera)];
  }

  const std::vector<FrameRecord>* data_;
  std::array<std::array<std::uint64_t, 2>, 2> counts_{};
};

enum class ExecutionPolicy { EventLoop, Threads };

struct SessionConfig {
  EstimatorMode mode = EstimatorMode::AirPose;
  RefinerKind refiner = RefinerKind::Gradient;
  RefinerConfig refiner_config;
  TimingModel timing;
  bool pipelined = false;
  ExecutionPolicy execution = ExecutionPolicy::EventLoop;
  std::uint64_t seed = 1;
};

struct FrameEstimate {
  std::int64_t frame_id = 0;
  std::int64_t shutter_timestamp_ns = 0;
  bool completed = false;
  BodyParams params;
};

struct LatencyTraceRow {
  std::int64_t frame_id = 0;
  bool completed = false;
  std::array<AgentTrace, 2> agents;
};

struct SessionReport {
  int matched = 0;
  int completed = 0;
  int dropped = 0;
  int unmatched = 0;
  double virtual_seconds = 0;
  double effective_fps = 0;
  double drop_rate = 0;
  std::array<std::uint64_t, 2> messages_sent{};
  std::array<std::uint64_t, 2> bytes_sent{};
  std::array<std::uint64_t, 2> floats_exchanged{};
  std::uint64_t cross_agent_reads = 0;
  std::vector<LatencyTraceRow> trace;
};

struct SessionResult {
  std::array<std::vector<FrameEstimate>, 2> estimates;
  SessionReport report;
};

namespace detail {

// Single-slot blocking byte channel for the threaded execution policy.
class ByteChannel {
 public:
  void send(std::vector<std::uint8_t> bytes) {
    std::unique_lock lock(m_);
    if (!cv_.wait_for(lock, std::chrono::seconds(30), [&] { return !slot_.has_value(); }))
      throw ExchangeTimeout("ByteChannel::send: peer never drained the slot");
    slot_ = std::move(bytes);
    cv_.notify_all();
  }

  std::vector<std::uint8_t> receive() {
    std::unique_lock lock(m_);
    if (!cv_.wait_for(lock, std::chrono::seconds(30), [&] { return slot_.has_value(); }))
      throw ExchangeTimeout("ByteChannel::receive: no message arrived");
    std::vector<std::uint8_t> out = std::move(*slot_);
    slot_.reset();
    cv_.notify_all();
    return out;
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::optional<std::vector<std::uint8_t>> slot_;
};

}  // namespace detail

// Drives shutter matching, per-window timing, and the two isolated agent
// estimators over a whole dataset. Every matched pair is processed in its own
// fixed-length window on the virtual clock; overruns drop the pair for both
// agents. The threaded policy must produce bit-identical results to the event
// loop for the same seed.
inline SessionResult run_session(const Model& model, const std::vector<FrameRecord>& dataset,
                                 const SessionConfig& cfg) {
  if (dataset.empty()) throw DatasetError("run_session: empty dataset");

  SessionResult result;
  ObservationStore store(dataset);
  Rng session_rng(Rng::derive_seed(cfg.seed, 0xc10c));

  // Constant per-agent clock offset residual (NTP-style).
  std::array<double, 2> offset_ms{};
  for (auto& o : offset_ms) o = session_rng.uniform(-cfg.timing.clock_offset_ms, cfg.timing.clock_offset_ms);

  std::array<std::vector<TimedFrame>, 2> streams;
  for (int a = 0; a < 2; ++a) {
    streams[static_cast<size_t>(a)].reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
      streams[static_cast<size_t>(a)].push_back(
          {a,
           dataset[i].shutter_timestamp_ns +
               static_cast<std::int64_t>(offset_ms[static_cast<size_t>(a)] * 1e6),
           i});
  }
  const MatchResult matches =
      match_frames(streams[0], streams[1], cfg.timing.match_tolerance_ms());

  // Per-agent estimator instances (isolated state machines).
  std::array<std::unique_ptr<StageRefiner>, 2> refiners;
  std::array<std::unique_ptr<OracleNoiseRefiner>, 2> oracle_handles{};
  for (int a = 0; a < 2; ++a) {
    if (cfg.refiner == RefinerKind::Gradient) {
      refiners[static_cast<size_t>(a)] = std::make_unique<GradientRefiner>(model, cfg.refiner_config);
    } else {
      auto oracle = std::make_unique<OracleNoiseRefiner>(
          cfg.refiner_config, Rng::derive_seed(cfg.seed, 0xa9e47 + static_cast<std::uint64_t>(a)));
      oracle_handles[static_cast<size_t>(a)] = std::move(oracle);
      refiners[static_cast<size_t>(a)] = nullptr;  // filled below; oracle keeps ownership handle
    }
  }

  const bool exchanging = mode_exchanges(cfg.mode);
  // Previous-frame messages for the pipelined mode, per agent and stage.
  std::array<std::array<std::optional<StageMessage>, 2>, 2> stale_messages{};

  auto record_estimate = [&](int a, std::size_t idx, bool completed, const BodyParams& p) {
    result.estimates[static_cast<size_t>(a)].push_back(
        {dataset[idx].frame_id, dataset[idx].shutter_timestamp_ns, completed, p});
  };

  for (const auto& [i0, i1] : matches.pairs) {
    const FrameRecord& rec = dataset[i0];
    const std::array<std::size_t, 2> frame_index{i0, i1};

    const WindowSchedule schedule =
        plan_frame_window(cfg.timing, exchanging, cfg.pipelined, session_rng);
    result.report.trace.push_back({rec.frame_id, schedule.completed, schedule.agents});
    if (!schedule.completed) {
      ++result.report.dropped;
      for (int a = 0; a < 2; ++a) record_estimate(a, frame_index[static_cast<size_t>(a)], false, BodyParams{});
      continue;
    }

    // Per-frame agent inputs via the audited views.
    std::array<StageInput, 2> inputs;
    std::array<StageRefiner*, 2> stage_refiners{};
    for (int a = 0; a < 2; ++a) {
      auto view = store.view(a);
      const FrameCameraData& cam = view.camera(frame_index[static_cast<size_t>(a)], a);
      inputs[static_cast<size_t>(a)].observation =
          crop_relative_observation(cam.keypoints, cam.crop, cam.intrinsics);
      inputs[static_cast<size_t>(a)].intrinsics = cam.intrinsics;
      if (mode_uses_crop(cfg.mode)) inputs[static_cast<size_t>(a)].crop = cam.crop;
      inputs[static_cast<size_t>(a)].current = init_params();
      if (cfg.refiner == RefinerKind::Oracle) {
        oracle_handles[static_cast<size_t>(a)]->set_ground_truth(
            view.gt_body(frame_index[static_cast<size_t>(a)], a));
        stage_refiners[static_cast<size_t>(a)] = oracle_handles[static_cast<size_t>(a)].get();
      } else {
        stage_refiners[static_cast<size_t>(a)] = refiners[static_cast<size_t>(a)].get();
      }
      stage_refiners[static_cast<size_t>(a)]->reset_frame();
    }

    auto account_send = [&](int a, const std::vector<std::uint8_t>& bytes) {
      ++result.report.messages_sent[static_cast<size_t>(a)];
      result.report.bytes_sent[static_cast<size_t>(a)] += bytes.size();
      result.report.floats_exchanged[static_cast<size_t>(a)] += kThetaDim + kShapeDim;
    };

    std::array<BodyParams, 2> final_state;
    if (cfg.execution == ExecutionPolicy::EventLoop) {
      std::array<BodyParams, 2> state;
      std::array<std::vector<std::uint8_t>, 2> mailbox;
      for (int stage = 0; stage < 3; ++stage) {
        for (int a = 0; a < 2; ++a) {
          inputs[static_cast<size_t>(a)].stage_index = stage;
          if (stage > 0) inputs[static_cast<size_t>(a)].current = state[static_cast<size_t>(a)];
          state[static_cast<size_t>(a)] =
              stage_refiners[static_cast<size_t>(a)]->refine(inputs[static_cast<size_t>(a)]);
        }
        if (stage < 2 && exchanging) {
          for (int a = 0; a < 2; ++a) {
            const StageMessage msg =
                make_stage_message(rec.frame_id, static_cast<std::uint8_t>(stage),
                                   state[static_cast<size_t>(a)].theta,
                                   state[static_cast<size_t>(a)].beta);
            std::vector<std::uint8_t> bytes = encode_message(msg);
            account_send(a, bytes);
            mailbox[static_cast<size_t>(1 - a)] = std::move(bytes);
          }
          for (int a = 0; a < 2; ++a) {
            std::optional<StageMessage> incoming;
            if (cfg.pipelined) {
              incoming = stale_messages[static_cast<size_t>(a)][static_cast<size_t>(stage)];
              stale_messages[static_cast<size_t>(a)][static_cast<size_t>(stage)] =
                  decode_message(mailbox[static_cast<size_t>(a)]);
            } else {
              incoming = decode_message(mailbox[static_cast<size_t>(a)]);
            }
            if (incoming) {
              inputs[static_cast<size_t>(a)].partner_theta = message_theta(*incoming);
              inputs[static_cast<size_t>(a)].partner_beta = message_beta(*incoming);
            }
          }
        }
      }
      final_state = state;
    } else {
      // Two real threads, each running the three-stage contract, exchanging
      // through ordered in-memory byte channels. Pipelined staleness is an
      // event-loop-only study knob; the threaded policy always blocks.
      std::array<detail::ByteChannel, 2> channels;  // indexed by receiving agent
      std::array<ThreeStageResult, 2> outcome;
      std::array<std::exception_ptr, 2> errors{};
      std::array<std::uint64_t, 2> sent_bytes{}, sent_msgs{};
      auto agent_main = [&](int a) {
        try {
          ExchangeFn exchange = [&, a](const StageMessage& msg) {
            std::vector<std::uint8_t> bytes = encode_message(msg);
            sent_msgs[static_cast<size_t>(a)] += 1;
            sent_bytes[static_cast<size_t>(a)] += bytes.size();
            channels[static_cast<size_t>(1 - a)].send(std::move(bytes));
            const StageMessage partner = decode_message(channels[static_cast<size_t>(a)].receive());
            return std::make_pair(message_theta(partner), message_beta(partner));
          };
          outcome[static_cast<size_t>(a)] = run_three_stages(
              rec.frame_id, inputs[static_cast<size_t>(a)].observation,
              inputs[static_cast<size_t>(a)].intrinsics,
              inputs[static_cast<size_t>(a)].crop.value_or(CropParams{0, 0, 1}), cfg.mode,
              *stage_refiners[static_cast<size_t>(a)], exchanging ? exchange : ExchangeFn{});
        } catch (...) {
          errors[static_cast<size_t>(a)] = std::current_exception();
        }
      };
      std::thread t0(agent_main, 0), t1(agent_main, 1);
      t0.join();
      t1.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
      for (int a = 0; a < 2; ++a) {
        result.report.messages_sent[static_cast<size_t>(a)] += sent_msgs[static_cast<size_t>(a)];
        result.report.bytes_sent[static_cast<size_t>(a)] += sent_bytes[static_cast<size_t>(a)];
        result.report.floats_exchanged[static_cast<size_t>(a)] +=
            sent_msgs[static_cast<size_t>(a)] * (kThetaDim + kShapeDim);
        record_estimate(a, frame_index[static_cast<size_t>(a)], true, outcome[static_cast<size_t>(a)].output);
      }
      ++result.report.completed;
      continue;
    }

    ++result.report.completed;
    for (int a = 0; a < 2; ++a)
      record_estimate(a, frame_index[static_cast<size_t>(a)], true,
                      stage_refiners[static_cast<size_t>(a)]->finalize(
                          final_state[static_cast<size_t>(a)], inputs[static_cast<size_t>(a)].crop,
                          inputs[static_cast<size_t>(a)].intrinsics));
  }

  SessionReport& rep = result.report;
  rep.matched = static_cast<int>(matches.pairs.size());
  rep.unmatched = static_cast<int>(matches.drops.size());
  rep.virtual_seconds = rep.matched * cfg.timing.window_ms / 1000.0;
  rep.effective_fps = rep.virtual_seconds > 0 ? rep.completed / rep.virtual_seconds : 0.0;
  rep.drop_rate = rep.matched > 0 ? static_cast<double>(rep.dropped) / rep.matched : 0.0;
  rep.cross_agent_reads = store.cross_reads();
  return result;
}

}  // namespace airpose
