#include "hapticsim/procedure.hpp"

#include "hapticsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace hapticsim {

namespace {

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

double quat_norm(const Quaternion &q) {
  return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

double segment_distance(const Vec3 &a, const Vec3 &b, const Vec3 &p) {
  const Vec3 ab = b - a;
  const double len2 = dot(ab, ab);
  const double t = len2 == 0.0 ? 0.0 : std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

std::vector<std::string> parameter_problems(const ActionNode &node) {
  std::vector<std::string> out;
  std::visit(overloaded{
                 [&](const TrajectoryAction &a) {
                   if (a.waypoints.size() < 2)
                     out.emplace_back("trajectory needs at least 2 waypoints");
                   for (const auto &w : a.waypoints)
                     if (!is_finite(w)) {
                       out.emplace_back("waypoints must be finite");
                       break;
                     }
                   if (!positive(a.tolerance))
                     out.emplace_back("tolerance must be > 0");
                   if (a.required_tool.empty())
                     out.emplace_back("required_tool must be set");
                 },
                 [&](const InsertAction &a) {
                   if (a.object_id.empty())
                     out.emplace_back("object_id must be set");
                   if (!is_finite(a.target_position))
                     out.emplace_back("target_position must be finite");
                   if (!positive(a.pos_tolerance))
                     out.emplace_back("pos_tolerance must be > 0");
                   if (!positive(a.ang_tolerance))
                     out.emplace_back("ang_tolerance must be > 0");
                   const double qn = quat_norm(a.target_orientation);
                   if (!std::isfinite(qn) || std::abs(qn - 1.0) > 1e-6)
                     out.emplace_back("target_orientation must be a unit quaternion");
                 },
                 [&](const RemoveAction &a) {
                   if (a.object_id.empty())
                     out.emplace_back("object_id must be set");
                   if (!is_finite(a.clearance_center))
                     out.emplace_back("clearance_region_center must be finite");
                   if (!positive(a.clearance_radius))
                     out.emplace_back("clearance_radius must be > 0");
                 },
             },
             node.kind);
  return out;
}

const std::string &object_of(const ActionKind &kind) {
  static const std::string none;
  if (const auto *i = std::get_if<InsertAction>(&kind))
    return i->object_id;
  if (const auto *r = std::get_if<RemoveAction>(&kind))
    return r->object_id;
  return none;
}

} // namespace

double angular_distance(const Quaternion &a, const Quaternion &b) {
  const double na = quat_norm(a);
  const double nb = quat_norm(b);
  if (!(na > 0.0) || !(nb > 0.0) || !std::isfinite(na) || !std::isfinite(nb))
    throw InputError("quaternion must be finite and non-zero");
  const double c = std::abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z) / (na * nb);
  return 2.0 * std::acos(std::min(1.0, c));
}

std::string_view kind_name(const ActionKind &kind) {
  return std::visit(overloaded{
                        [](const TrajectoryAction &) { return std::string_view("trajectory"); },
                        [](const InsertAction &) { return std::string_view("insert"); },
                        [](const RemoveAction &) { return std::string_view("remove"); },
                    },
                    kind);
}

const ActionNode *Scenegraph::find(std::string_view node_id) const {
  for (const auto &n : nodes)
    if (n.node_id == node_id)
      return &n;
  return nullptr;
}

std::vector<GraphDiagnostic> validate_graph(const Scenegraph &graph) {
  using Kind = GraphDiagnostic::Kind;
  std::vector<GraphDiagnostic> out;

  std::set<std::string, std::less<>> ids;
  for (const auto &node : graph.nodes) {
    if (node.node_id.empty())
      out.push_back({Kind::BadParameter, "node with empty node_id", {}});
    else if (!ids.insert(node.node_id).second)
      out.push_back({Kind::DuplicateId, "duplicate node_id '" + node.node_id + "'", {node.node_id}});
    for (auto &problem : parameter_problems(node))
      out.push_back({Kind::BadParameter, "node '" + node.node_id + "': " + problem, {node.node_id}});
  }

  std::map<std::string, std::vector<std::string>, std::less<>> adj;
  for (const auto &[from, to] : graph.edges) {
    bool ok = true;
    for (const auto *end : {&from, &to}) {
      if (!ids.contains(*end)) {
        out.push_back({Kind::DanglingEdge,
                       "edge " + from + " -> " + to + " references unknown node '" + *end + "'",
                       {from, to}});
        ok = false;
        break;
      }
    }
    if (ok)
      adj[from].push_back(to);
  }

  // Iterative DFS; each back edge reports the cycle path it closes.
  enum class Mark { White, Grey, Black };
  std::map<std::string, Mark, std::less<>> mark;
  for (const auto &id : ids)
    mark[id] = Mark::White;
  for (const auto &root : ids) {
    if (mark[root] != Mark::White)
      continue;
    std::vector<std::pair<std::string, std::size_t>> stack{{root, 0}};
    mark[root] = Mark::Grey;
    while (!stack.empty()) {
      auto &[node, next] = stack.back();
      const auto &succ = adj[node];
      if (next == succ.size()) {
        mark[node] = Mark::Black;
        stack.pop_back();
        continue;
      }
      const std::string child = succ[next++];
      if (mark[child] == Mark::White) {
        mark[child] = Mark::Grey;
        stack.emplace_back(child, 0);
      } else if (mark[child] == Mark::Grey) {
        std::vector<std::string> cycle;
        auto it = std::find_if(stack.begin(), stack.end(),
                               [&](const auto &frame) { return frame.first == child; });
        for (; it != stack.end(); ++it)
          cycle.push_back(it->first);
        std::string path;
        for (const auto &c : cycle)
          path += c + " -> ";
        path += child;
        out.push_back({Kind::Cycle, "cycle: " + path, cycle});
      }
    }
  }
  return out;
}

std::string_view to_string(NodeStatus s) {
  switch (s) {
  case NodeStatus::Locked:
    return "locked";
  case NodeStatus::Available:
    return "available";
  case NodeStatus::InProgress:
    return "in_progress";
  case NodeStatus::Done:
    return "done";
  }
  return "locked";
}

std::string_view to_string(Transition t) {
  switch (t) {
  case Transition::Available:
    return "available";
  case Transition::InProgress:
    return "in_progress";
  case Transition::Waypoint:
    return "waypoint";
  case Transition::Done:
    return "done";
  case Transition::Warning:
    return "warning";
  }
  return "warning";
}

std::optional<Transition> transition_from_string(std::string_view s) {
  for (auto t : {Transition::Available, Transition::InProgress, Transition::Waypoint,
                 Transition::Done, Transition::Warning})
    if (to_string(t) == s)
      return t;
  return std::nullopt;
}

ProcedureEngine::ProcedureEngine(Scenegraph graph) : graph_(std::move(graph)) {
  const auto diagnostics = validate_graph(graph_);
  if (!diagnostics.empty()) {
    std::string msg = "invalid scenegraph:";
    for (const auto &d : diagnostics)
      msg += "\n  " + d.message;
    throw ConfigError(msg);
  }
  for (const auto &node : graph_.nodes) {
    prerequisites_[node.node_id];
    dependents_[node.node_id];
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto &edge : graph_.edges) {
    if (!seen.insert(edge).second)
      continue;
    prerequisites_[edge.second].push_back(edge.first);
    dependents_[edge.first].push_back(edge.second);
  }

  // Kahn's algorithm; level = longest path from any root.
  std::map<std::string, std::size_t, std::less<>> indegree;
  for (const auto &[id, pre] : prerequisites_) {
    indegree[id] = pre.size();
    level_[id] = 0;
  }
  std::vector<std::string> frontier;
  for (const auto &[id, deg] : indegree)
    if (deg == 0)
      frontier.push_back(id);
  while (!frontier.empty()) {
    const std::string id = frontier.back();
    frontier.pop_back();
    for (const auto &dep : dependents_[id]) {
      level_[dep] = std::max(level_[dep], level_[id] + 1);
      if (--indegree[dep] == 0)
        frontier.push_back(dep);
    }
  }
  for (const auto &node : graph_.nodes)
    order_.push_back(node.node_id);
  std::sort(order_.begin(), order_.end(), [&](const std::string &a, const std::string &b) {
    return std::pair(level_.at(a), a) < std::pair(level_.at(b), b);
  });
}

std::size_t ProcedureEngine::level(std::string_view node_id) const {
  const auto it = level_.find(node_id);
  if (it == level_.end())
    throw InputError("unknown node '" + std::string(node_id) + "'");
  return it->second;
}

ProcedureState ProcedureEngine::initial_state() const {
  ProcedureState state;
  for (const auto &id : order_)
    state.nodes[id].status =
        prerequisites_.at(id).empty() ? NodeStatus::Available : NodeStatus::Locked;
  return state;
}

void ProcedureEngine::check_consistent(const ProcedureState &state) const {
  if (state.nodes.size() != order_.size())
    throw InputError("procedure state does not match scenegraph");
  for (const auto &[id, progress] : state.nodes)
    if (!level_.contains(id))
      throw InputError("procedure state references unknown node '" + id + "'");
}

std::vector<std::string> ProcedureEngine::available_actions(const ProcedureState &state) const {
  check_consistent(state);
  std::vector<std::string> out;
  for (const auto &id : order_) {
    if (state.nodes.at(id).status == NodeStatus::Done)
      continue;
    const auto &pre = prerequisites_.at(id);
    if (std::all_of(pre.begin(), pre.end(), [&](const std::string &p) {
          return state.nodes.at(p).status == NodeStatus::Done;
        }))
      out.push_back(id);
  }
  return out;
}

void ProcedureEngine::complete(ProcedureState &state, const std::string &node_id, double time,
                               std::vector<ProcedureEvent> &events) const {
  state.nodes.at(node_id).status = NodeStatus::Done;
  events.push_back({time, node_id, Transition::Done, 0, {}});
  for (const auto &dep : dependents_.at(node_id)) {
    auto &progress = state.nodes.at(dep);
    if (progress.status != NodeStatus::Locked)
      continue;
    const auto &pre = prerequisites_.at(dep);
    if (std::all_of(pre.begin(), pre.end(), [&](const std::string &p) {
          return state.nodes.at(p).status == NodeStatus::Done;
        })) {
      progress.status = NodeStatus::Available;
      events.push_back({time, dep, Transition::Available, 0, {}});
    }
  }
}

std::vector<ProcedureEvent> ProcedureEngine::observe_sample(ProcedureState &state,
                                                            const StylusSample &sample,
                                                            const ContactState &contact,
                                                            std::string_view active_tool) const {
  std::vector<ProcedureEvent> events;
  // Only nodes live at the start of the sample may advance on it.
  std::vector<const ActionNode *> live;
  for (const auto &id : order_) {
    const auto status = state.nodes.at(id).status;
    if (status != NodeStatus::Available && status != NodeStatus::InProgress)
      continue;
    const ActionNode *node = graph_.find(id);
    const auto *traj = std::get_if<TrajectoryAction>(&node->kind);
    if (traj && traj->required_tool == active_tool)
      live.push_back(node);
  }

  for (const ActionNode *node : live) {
    const auto &traj = std::get<TrajectoryAction>(node->kind);
    auto &progress = state.nodes.at(node->node_id);
    if (traj.requires_contact_with && contact.organ_id != traj.requires_contact_with)
      continue;
    const Vec3 &target = traj.waypoints[progress.next_waypoint];
    if (norm(sample.position - target) > traj.tolerance)
      continue;
    if (progress.status == NodeStatus::Available) {
      progress.status = NodeStatus::InProgress;
      events.push_back({sample.time, node->node_id, Transition::InProgress, 0, {}});
    }
    ++progress.next_waypoint;
    events.push_back({sample.time, node->node_id, Transition::Waypoint, progress.next_waypoint, {}});
    if (progress.next_waypoint == traj.waypoints.size())
      complete(state, node->node_id, sample.time, events);
  }
  state.log.insert(state.log.end(), events.begin(), events.end());
  return events;
}

std::vector<ProcedureEvent> ProcedureEngine::apply_world_event(ProcedureState &state,
                                                               const WorldEvent &event) const {
  std::vector<ProcedureEvent> events;
  const bool referenced = std::any_of(graph_.nodes.begin(), graph_.nodes.end(), [&](const auto &n) {
    return object_of(n.kind) == event.object_id && !event.object_id.empty();
  });
  if (!referenced) {
    events.push_back({event.time, {}, Transition::Warning, 0,
                      "no action references object '" + event.object_id + "'"});
    state.log.insert(state.log.end(), events.begin(), events.end());
    return events;
  }

  std::vector<std::string> finished;
  for (const auto &id : order_) {
    if (state.nodes.at(id).status != NodeStatus::Available)
      continue;
    const ActionNode *node = graph_.find(id);
    if (event.action == WorldEvent::Action::Insert) {
      const auto *ins = std::get_if<InsertAction>(&node->kind);
      if (!ins || ins->object_id != event.object_id)
        continue;
      if (norm(event.position - ins->target_position) <= ins->pos_tolerance &&
          angular_distance(event.orientation, ins->target_orientation) <= ins->ang_tolerance)
        finished.push_back(id);
    } else {
      const auto *rem = std::get_if<RemoveAction>(&node->kind);
      if (!rem || rem->object_id != event.object_id)
        continue;
      if (norm(event.position - rem->clearance_center) > rem->clearance_radius)
        finished.push_back(id);
    }
  }
  for (const auto &id : finished)
    complete(state, id, event.time, events);
  state.log.insert(state.log.end(), events.begin(), events.end());
  return events;
}

bool ProcedureEngine::is_complete(const ProcedureState &state) const {
  return !state.nodes.empty() &&
         std::all_of(state.nodes.begin(), state.nodes.end(),
                     [](const auto &kv) { return kv.second.status == NodeStatus::Done; });
}

ProcedureState ProcedureEngine::reconstruct(const std::vector<ProcedureEvent> &log) const {
  ProcedureState state = initial_state();
  for (const auto &e : log) {
    state.log.push_back(e);
    if (e.transition == Transition::Warning)
      continue;
    auto it = state.nodes.find(e.node_id);
    if (it == state.nodes.end())
      throw InputError("log references unknown node '" + e.node_id + "'");
    switch (e.transition) {
    case Transition::Available:
      it->second.status = NodeStatus::Available;
      break;
    case Transition::InProgress:
      it->second.status = NodeStatus::InProgress;
      break;
    case Transition::Waypoint:
      it->second.next_waypoint = e.waypoint;
      break;
    case Transition::Done:
      it->second.status = NodeStatus::Done;
      break;
    case Transition::Warning:
      break;
    }
  }
  return state;
}

double polyline_distance(const std::vector<Vec3> &waypoints, const Vec3 &p) {
  if (waypoints.empty())
    throw InputError("polyline has no points");
  if (waypoints.size() == 1)
    return norm(p - waypoints.front());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i)
    best = std::min(best, segment_distance(waypoints[i], waypoints[i + 1], p));
  return best;
}

TrajectoryScore score_trajectory(const std::string &node_id, const TrajectoryAction &node,
                                 const std::vector<StylusSample> &samples) {
  if (samples.empty())
    throw InputError("score_trajectory: empty sample window for '" + node_id + "'");
  double sum_sq = 0.0;
  for (const auto &s : samples) {
    const double d = polyline_distance(node.waypoints, s.position);
    sum_sq += d * d;
  }
  TrajectoryScore score;
  score.node_id = node_id;
  score.samples = samples.size();
  score.rms_deviation = std::sqrt(sum_sq / static_cast<double>(samples.size()));
  score.completion_time = samples.back().time - samples.front().time;
  return score;
}

Score total_score(std::vector<TrajectoryScore> entries) {
  Score s;
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto &e : entries) {
    s.total_time += e.completion_time;
    sum_sq += e.rms_deviation * e.rms_deviation * static_cast<double>(e.samples);
    n += e.samples;
  }
  s.overall_rms = n == 0 ? 0.0 : std::sqrt(sum_sq / static_cast<double>(n));
  s.trajectories = std::move(entries);
  return s;
}

} // namespace hapticsim
