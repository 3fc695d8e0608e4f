#pragma once

// Wire protocol: one JSON object per message, newline-delimited on a raw socket or one
// message per text frame over WebSocket. Every message has "type" and "seq"; sequence
// numbers strictly increase per direction and connection.
//
// client -> server                          server -> client
//   hello {protocol_version, session?}        welcome {session_id, protocol_version, scene, procedure}
//   pose {t, position, orientation?}          force_sample {t, position, force, contact, event}
//   tool {tool}                               procedure_event {t, node, transition, ...}
//   world_event {action, object,              stats {ticks, deadline_misses, ...}
//                position, orientation?}      param_applied {organ_id, material}
//   param_override {organ_id, material}       error {code, message}
//   start, pause

#include "hapticsim/haptic_core.hpp"
#include "hapticsim/procedure.hpp"
#include "hapticsim/records.hpp"
#include "hapticsim/servo.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace hapticsim::wire {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxMessageBytes = 64 * 1024;

struct Hello {
  int protocol_version = kProtocolVersion;
  std::optional<std::string> session; // rejoin an existing session
};
struct PoseUpdate {
  double t = 0.0;
  Vec3 position;
  Quaternion orientation;
};
struct ToolSelect {
  std::string tool;
};
struct WorldEventMsg {
  WorldEvent event; // time is assigned by the session clock
};
struct ParamOverride {
  std::string organ_id;
  MaterialPatch patch;
};
struct Start {};
struct Pause {};

using ClientPayload =
    std::variant<Hello, PoseUpdate, ToolSelect, WorldEventMsg, ParamOverride, Start, Pause>;

struct ClientMessage {
  std::uint64_t seq = 0;
  ClientPayload payload;
};

struct Welcome {
  std::string session_id;
  Json scene;
  Json procedure;
};
struct ForceSample {
  double t = 0.0;
  Vec3 position;
  ForceBreakdown force;
  ContactState contact;
  std::optional<PhaseEvent> event;
};
struct ProcedureEventMsg {
  ProcedureEvent event;
};
struct Stats {
  TickStats stats;
  double dt = 0.001;
};
struct ParamApplied {
  std::string organ_id;
  HapticMaterial material;
};
struct Error {
  std::string code;
  std::string message;
};

using ServerPayload =
    std::variant<Welcome, ForceSample, ProcedureEventMsg, Stats, ParamApplied, Error>;

/// Never throws: any byte string yields a message or an Error describing the defect.
std::variant<ClientMessage, Error> decode_client(std::string_view bytes);

std::string encode_client(const ClientMessage &msg);
std::string encode_server(const ServerPayload &payload, std::uint64_t seq);

std::string_view type_name(const ClientPayload &p);
std::string_view type_name(const ServerPayload &p);

/// Per-connection protocol gate: sequence ordering and the Hello handshake.
class ClientLink {
public:
  struct Join {
    Hello hello;
  };
  struct Forward {
    ClientPayload payload;
  };
  using Action = std::variant<Error, Join, Forward>;

  Action accept(std::string_view bytes);
  void joined(std::string session_id) { session_ = std::move(session_id); }
  const std::optional<std::string> &session() const { return session_; }

private:
  std::optional<std::uint64_t> last_seq_;
  std::optional<std::string> session_;
};

} // namespace hapticsim::wire
