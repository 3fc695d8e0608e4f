#pragma once

#include "hapticsim/config.hpp"
#include "hapticsim/procedure.hpp"
#include "hapticsim/records.hpp"
#include "hapticsim/servo.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hapticsim {

struct ReplayOutcome {
  TickStats stats;
  ProcedureState procedure;
  Score score;
  bool complete = false;
};

/// Logically clocked session: the servo runs over the recorded trajectory while scripted
/// tool changes and world events (applied before the first tick at or after their time)
/// drive the procedure. Every tick and procedure event is written to `log`.
/// Without `duration`, runs until the trajectory's last keyframe.
ReplayOutcome replay_session(const Bundle &bundle, const Trajectory &trajectory,
                             const std::vector<ScriptedEvent> &events, std::ostream &log,
                             std::optional<double> duration = std::nullopt,
                             const std::string &session_id = "replay");

/// Files written by replay_to_directory.
struct ReplayFiles {
  std::filesystem::path session_log; // session.jsonl
  std::filesystem::path stats;       // stats.json
  std::filesystem::path score;       // score.json
};

ReplayFiles replay_file_names(const std::filesystem::path &dir);

/// Throws IoError if the directory or files cannot be written.
ReplayOutcome replay_to_directory(const Bundle &bundle, const Trajectory &trajectory,
                                  const std::vector<ScriptedEvent> &events,
                                  const std::filesystem::path &out_dir,
                                  std::optional<double> duration = std::nullopt);

} // namespace hapticsim
