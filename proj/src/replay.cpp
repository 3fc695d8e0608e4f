#include "hapticsim/replay.hpp"

#include "hapticsim/errors.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <set>

namespace hapticsim {

ReplayOutcome replay_session(const Bundle &bundle, const Trajectory &trajectory,
                             const std::vector<ScriptedEvent> &events, std::ostream &log,
                             std::optional<double> duration, const std::string &session_id) {
  const ServoConfig &config = bundle.config.servo;
  validate_trajectory(trajectory);
  const double run_for = duration.value_or(trajectory.points.back().t + config.dt);

  const ProcedureEngine engine(bundle.procedure);
  ReplayOutcome outcome;
  outcome.procedure = engine.initial_state();
  SessionLog session_log(&log, session_id);
  std::string tool;
  std::size_t next_event = 0;
  std::map<std::string, std::vector<StylusSample>> windows;
  std::vector<TrajectoryScore> scores;

  const auto log_events = [&](const std::vector<ProcedureEvent> &batch) {
    for (const auto &e : batch)
      session_log.procedure(e);
  };

  SimulatedDevice device(trajectory, config.dt);
  outcome.stats = run_replay(bundle.scene, device, config, run_for, [&](const TickRecord &rec) {
    while (next_event < events.size() && events[next_event].t <= rec.sample.time) {
      const auto &scripted = events[next_event++];
      if (const auto *change = std::get_if<ToolChange>(&scripted.action))
        tool = change->tool;
      else
        log_events(engine.apply_world_event(outcome.procedure, std::get<WorldEvent>(scripted.action)));
    }
    session_log.tick(rec);
    const auto batch = engine.observe_sample(outcome.procedure, rec.sample, rec.contact, tool);
    log_events(batch);

    // Scoring window: from the sample that starts a trajectory node to the one that finishes it.
    std::set<std::string> finished;
    for (const auto &e : batch)
      if (e.transition == Transition::Done)
        finished.insert(e.node_id);
    for (const auto &[id, progress] : outcome.procedure.nodes)
      if (progress.status == NodeStatus::InProgress || finished.contains(id))
        windows[id].push_back(rec.sample);
    for (const auto &id : finished) {
      const auto &node = std::get<TrajectoryAction>(engine.graph().find(id)->kind);
      scores.push_back(score_trajectory(id, node, windows[id]));
      windows.erase(id);
    }
  });
  outcome.score = total_score(std::move(scores));
  outcome.complete = engine.is_complete(outcome.procedure);
  return outcome;
}

ReplayFiles replay_file_names(const std::filesystem::path &dir) {
  return {dir / "session.jsonl", dir / "stats.json", dir / "score.json"};
}

ReplayOutcome replay_to_directory(const Bundle &bundle, const Trajectory &trajectory,
                                  const std::vector<ScriptedEvent> &events,
                                  const std::filesystem::path &out_dir,
                                  std::optional<double> duration) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const auto files = replay_file_names(out_dir);
  std::ofstream log(files.session_log, std::ios::binary | std::ios::trunc);
  if (!log)
    throw IoError("cannot write " + files.session_log.string());

  ReplayOutcome outcome = replay_session(bundle, trajectory, events, log, duration);
  log.flush();
  if (!log)
    throw IoError("write failed: " + files.session_log.string());

  std::ofstream stats(files.stats, std::ios::binary | std::ios::trunc);
  std::ofstream score(files.score, std::ios::binary | std::ios::trunc);
  if (!stats || !score)
    throw IoError("cannot write stats/score in " + out_dir.string());
  Json stats_json = to_json(outcome.stats, bundle.config.servo.dt);
  stats_json["procedure_complete"] = outcome.complete;
  stats << stats_json.dump() << '\n';
  score << to_json(outcome.score).dump() << '\n';
  return outcome;
}

} // namespace hapticsim
