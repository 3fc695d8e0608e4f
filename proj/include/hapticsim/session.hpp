#pragma once

#include "hapticsim/config.hpp"
#include "hapticsim/procedure.hpp"
#include "hapticsim/records.hpp"
#include "hapticsim/servo.hpp"
#include "hapticsim/wire.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace hapticsim {

Json scene_summary(const Scene &scene);
Json procedure_summary(const ProcedureEngine &engine, const ProcedureState &state);

/// Replies go to the sender; broadcasts go to every client attached to the session.
struct Outbound {
  std::vector<wire::ServerPayload> replies;
  std::vector<wire::ServerPayload> broadcasts;
};

/// One interactive session: servo state, procedure state and log, driven by client
/// messages and by tick(). Not thread-safe; owned by a single execution context.
class Session {
public:
  /// `log` may be null. Stats are broadcast every `stats_every` ticks.
  Session(std::string session_id, const Bundle &bundle, std::ostream *log,
          std::uint64_t stats_every = 1000);

  const std::string &id() const { return id_; }

  wire::Welcome welcome() const;
  /// Every procedure event so far, for a client that (re)joins.
  std::vector<wire::ServerPayload> backlog() const;

  /// Everything except Hello, which the connection layer resolves.
  Outbound handle(const wire::ClientPayload &payload);

  bool running() const { return running_; }
  /// Ticks only while started and once a pose has arrived (sample-and-hold after that).
  bool ready_to_tick() const { return running_ && device_.has_pose(); }

  /// One servo step at the session clock; empty when not ready.
  Outbound tick(double lateness = 0.0);

  std::uint64_t ticks() const { return state_.next_index; }
  double now() const { return static_cast<double>(state_.next_index) * config_.dt; }
  TickStats stats() const;
  const Scene &scene() const { return scene_; }
  const ProcedureEngine &procedure() const { return engine_; }
  const ProcedureState &procedure_state() const { return procedure_; }
  const std::string &active_tool() const { return tool_; }

private:
  void record_procedure(const std::vector<ProcedureEvent> &events, Outbound &out);

  std::string id_;
  ServoConfig config_;
  Scene scene_;
  ProcedureEngine engine_;
  ProcedureState procedure_;
  ServoState state_;
  PushedPoseDevice device_;
  SessionLog log_;
  std::ostream *log_stream_;
  std::string tool_;
  bool running_ = false;
  std::uint64_t stats_every_;
  // Percentiles come from the most recent window; counts cover the whole session.
  std::vector<double> lateness_window_;
  std::size_t window_next_ = 0;
  std::uint64_t misses_ = 0;
  double max_lateness_ = 0.0;
  std::uint64_t clamped_ = 0;
};

} // namespace hapticsim
