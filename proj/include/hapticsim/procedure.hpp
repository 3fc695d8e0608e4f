#pragma once

// Scenegraph procedure engine. A procedure is a DAG of actions of three kinds:
//   Trajectory - follow waypoints in order with a given tool (incision, suturing)
//   Insert     - place an object at a target pose (kidney, clamps, retractors)
//   Remove     - take an object out of a clearance region (surgical tools)
// A node becomes Available once all of its prerequisites are Done.

#include "hapticsim/haptic_core.hpp"
#include "hapticsim/vec3.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace hapticsim {

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Quaternion &, const Quaternion &) = default;
};

/// Rotation angle between two orientations, in [0, pi]. Inputs need not be normalized.
/// Throws InputError for a zero or non-finite quaternion.
double angular_distance(const Quaternion &a, const Quaternion &b);

struct TrajectoryAction {
  std::vector<Vec3> waypoints;
  double tolerance = 0.003; // m
  std::string required_tool;
  std::optional<std::string> requires_contact_with;
};

struct InsertAction {
  std::string object_id;
  Vec3 target_position;
  double pos_tolerance = 0.005; // m
  Quaternion target_orientation;
  double ang_tolerance = 0.1; // rad
};

struct RemoveAction {
  std::string object_id;
  Vec3 clearance_center;
  double clearance_radius = 0.1; // m
};

using ActionKind = std::variant<TrajectoryAction, InsertAction, RemoveAction>;

std::string_view kind_name(const ActionKind &kind);

struct ActionNode {
  std::string node_id;
  ActionKind kind;
};

struct Scenegraph {
  std::vector<ActionNode> nodes;
  std::vector<std::pair<std::string, std::string>> edges; // prerequisite -> dependent

  const ActionNode *find(std::string_view node_id) const;
};

struct GraphDiagnostic {
  enum class Kind { DuplicateId, DanglingEdge, Cycle, BadParameter };
  Kind kind;
  std::string message;
  std::vector<std::string> nodes; // offending ids; for cycles, the cycle path in order
};

/// Empty iff the graph is a well-formed DAG with valid action parameters.
std::vector<GraphDiagnostic> validate_graph(const Scenegraph &graph);

enum class NodeStatus { Locked, Available, InProgress, Done };
enum class Transition { Available, InProgress, Waypoint, Done, Warning };

std::string_view to_string(NodeStatus s);
std::string_view to_string(Transition t);
std::optional<Transition> transition_from_string(std::string_view s);

struct ProcedureEvent {
  double time = 0.0;
  std::string node_id;          // empty for warnings not tied to a node
  Transition transition = Transition::Available;
  std::size_t waypoint = 0;     // Waypoint: next waypoint index after the advance
  std::string detail;           // Warning text

  friend bool operator==(const ProcedureEvent &, const ProcedureEvent &) = default;
};

struct NodeProgress {
  NodeStatus status = NodeStatus::Locked;
  std::size_t next_waypoint = 0;

  friend bool operator==(const NodeProgress &, const NodeProgress &) = default;
};

struct ProcedureState {
  std::map<std::string, NodeProgress, std::less<>> nodes;
  std::vector<ProcedureEvent> log;

  friend bool operator==(const ProcedureState &, const ProcedureState &) = default;
};

struct WorldEvent {
  enum class Action { Insert, Remove };
  Action action = Action::Insert;
  std::string object_id;
  Vec3 position;
  Quaternion orientation; // ignored for Remove
  double time = 0.0;
};

/// A validated scenegraph with precomputed ordering. Holds no per-session state:
/// every operation takes the ProcedureState explicitly.
class ProcedureEngine {
public:
  /// Throws ConfigError carrying every diagnostic if the graph is invalid.
  explicit ProcedureEngine(Scenegraph graph);

  const Scenegraph &graph() const { return graph_; }

  /// Roots Available, everything else Locked, empty log.
  ProcedureState initial_state() const;

  /// Non-Done nodes whose prerequisites are all Done, ordered by (level, node_id).
  /// Throws InputError if the state does not describe this graph.
  std::vector<std::string> available_actions(const ProcedureState &state) const;

  /// Advances Trajectory nodes that were Available or InProgress when the sample arrived.
  std::vector<ProcedureEvent> observe_sample(ProcedureState &state, const StylusSample &sample,
                                             const ContactState &contact,
                                             std::string_view active_tool) const;

  std::vector<ProcedureEvent> apply_world_event(ProcedureState &state,
                                                const WorldEvent &event) const;

  bool is_complete(const ProcedureState &state) const;

  /// Rebuilds a state purely from an event log.
  ProcedureState reconstruct(const std::vector<ProcedureEvent> &log) const;

  /// Longest-path depth from a root; the primary sort key of available_actions.
  std::size_t level(std::string_view node_id) const;

private:
  void complete(ProcedureState &state, const std::string &node_id, double time,
                std::vector<ProcedureEvent> &events) const;
  void check_consistent(const ProcedureState &state) const;

  Scenegraph graph_;
  std::map<std::string, std::vector<std::string>, std::less<>> prerequisites_;
  std::map<std::string, std::vector<std::string>, std::less<>> dependents_;
  std::map<std::string, std::size_t, std::less<>> level_;
  std::vector<std::string> order_; // (level, node_id)
};

struct TrajectoryScore {
  std::string node_id;
  double rms_deviation = 0.0; // m, from the waypoint polyline
  double completion_time = 0.0; // s
  std::size_t samples = 0;
};

struct Score {
  std::vector<TrajectoryScore> trajectories;
  double total_time = 0.0;
  double overall_rms = 0.0; // pooled over every scored sample
};

/// Distance from p to the polyline through `waypoints`.
double polyline_distance(const std::vector<Vec3> &waypoints, const Vec3 &p);

/// Throws InputError on an empty window.
TrajectoryScore score_trajectory(const std::string &node_id, const TrajectoryAction &node,
                                 const std::vector<StylusSample> &samples);

Score total_score(std::vector<TrajectoryScore> entries);

} // namespace hapticsim
