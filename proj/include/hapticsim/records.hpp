#pragma once

// Line-delimited JSON file formats:
//   trajectory input   {"t": s, "x": m, "y": m, "z": m}            one keyframe per line
//   event script       {"t": s, "type": "tool", "tool": name}
//                      {"t": s, "type": "insert", "object": id, "position": [..], "orientation": [w,x,y,z]}
//                      {"t": s, "type": "remove", "object": id, "position": [..]}
//   session log        one SessionLogEntry per line (kind tick | procedure | param_override)
//   stats summary      single TickStats record

#include "hapticsim/haptic_core.hpp"
#include "hapticsim/procedure.hpp"
#include "hapticsim/servo.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace hapticsim {

using Json = nlohmann::ordered_json;

Json to_json(const Vec3 &v);
Json to_json(const ContactState &c);
Json to_json(const ForceBreakdown &f);
Json to_json(const TickStats &s, double dt);
Json to_json(const HapticMaterial &m);
Json to_json(const Score &s);

/// Reads a JSON array of exactly three finite numbers. Throws InputError otherwise.
Vec3 vec3_from_json(const Json &j);
Quaternion quaternion_from_json(const Json &j);

/// Trajectory file: one {t, x, y, z} object per line; blank lines and lines starting
/// with '#' are skipped. Throws InputError naming the offending line.
Trajectory parse_trajectory(std::istream &in);
Trajectory load_trajectory(const std::filesystem::path &path);
void write_trajectory(std::ostream &out, const Trajectory &trajectory);

struct ToolChange {
  std::string tool;
};

struct ScriptedEvent {
  double t = 0.0;
  std::variant<ToolChange, WorldEvent> action;
};

std::vector<ScriptedEvent> parse_event_script(std::istream &in);
std::vector<ScriptedEvent> load_event_script(const std::filesystem::path &path);

/// Partial material update; absent fields keep their current value.
struct MaterialPatch {
  std::optional<double> stiffness_k;
  std::optional<double> damping_b;
  std::optional<double> friction_mu;
  std::optional<double> pop_force;
  std::optional<double> pop_depth;
  std::optional<double> post_pop_stiffness_scale;

  HapticMaterial applied_to(HapticMaterial m) const;
};

/// Throws InputError on unknown keys or non-numeric values.
MaterialPatch material_patch_from_json(const Json &j);
Json to_json(const MaterialPatch &p);

/// Append-only session log writer. Sequence numbers are gap-free from 0.
class SessionLog {
public:
  SessionLog(std::ostream *out, std::string session_id)
      : out_(out), session_(std::move(session_id)) {}

  void tick(const TickRecord &record);
  void procedure(const ProcedureEvent &event);
  void param_override(const std::string &organ_id, const HapticMaterial &material);

  std::uint64_t next_seq() const { return seq_; }
  const std::string &session_id() const { return session_; }

private:
  Json header(std::string_view kind);
  void write(const Json &line);

  std::ostream *out_;
  std::string session_;
  std::uint64_t seq_ = 0;
};

Json tick_record_json(const TickRecord &record);
Json procedure_event_json(const ProcedureEvent &event);
ProcedureEvent procedure_event_from_json(const Json &j);

/// Procedure entries of a session log, in order. Throws InputError on a malformed line
/// or a sequence gap.
std::vector<ProcedureEvent> procedure_events_from_log(std::istream &in);

} // namespace hapticsim
