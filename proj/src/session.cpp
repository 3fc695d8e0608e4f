#include "hapticsim/session.hpp"

#include <algorithm>
#include <ostream>

namespace hapticsim {

namespace {

constexpr std::size_t kLatenessWindow = 10'000;

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

Json shape_json(const Shape &shape) {
  return std::visit(overloaded{
                        [](const Sphere &s) {
                          return Json{{"type", "sphere"},
                                      {"center", to_json(s.center)},
                                      {"radius", s.radius}};
                        },
                        [](const Capsule &c) {
                          return Json{{"type", "capsule"},
                                      {"a", to_json(c.a)},
                                      {"b", to_json(c.b)},
                                      {"radius", c.radius}};
                        },
                        [](const Slab &s) {
                          return Json{{"type", "slab"},
                                      {"point", to_json(s.point)},
                                      {"normal", to_json(s.normal)},
                                      {"thickness", s.thickness}};
                        },
                    },
                    shape);
}

} // namespace

Json scene_summary(const Scene &scene) {
  Json organs = Json::array();
  for (const auto &o : scene.organs)
    organs.push_back({{"id", o.organ_id},
                      {"name", o.name},
                      {"shape", shape_json(o.shape)},
                      {"material", to_json(o.material)}});
  return Json{{"organs", organs}};
}

Json procedure_summary(const ProcedureEngine &engine, const ProcedureState &state) {
  Json nodes = Json::array();
  for (const auto &node : engine.graph().nodes) {
    const auto &progress = state.nodes.at(node.node_id);
    Json n{{"id", node.node_id},
           {"kind", kind_name(node.kind)},
           {"status", to_string(progress.status)}};
    if (const auto *t = std::get_if<TrajectoryAction>(&node.kind)) {
      n["tool"] = t->required_tool;
      n["waypoints"] = t->waypoints.size();
      n["next_waypoint"] = progress.next_waypoint;
    } else if (const auto *i = std::get_if<InsertAction>(&node.kind)) {
      n["object"] = i->object_id;
    } else if (const auto *r = std::get_if<RemoveAction>(&node.kind)) {
      n["object"] = r->object_id;
    }
    nodes.push_back(std::move(n));
  }
  Json edges = Json::array();
  for (const auto &[from, to] : engine.graph().edges)
    edges.push_back(Json::array({from, to}));
  return Json{{"nodes", nodes}, {"edges", edges}};
}

Session::Session(std::string session_id, const Bundle &bundle, std::ostream *log,
                 std::uint64_t stats_every)
    : id_(std::move(session_id)), config_(bundle.config.servo), scene_(bundle.scene),
      engine_(bundle.procedure), procedure_(engine_.initial_state()), device_(config_.dt),
      log_(log, id_), log_stream_(log), stats_every_(std::max<std::uint64_t>(stats_every, 1)) {
  validate_servo_config(config_);
}

wire::Welcome Session::welcome() const {
  return {id_, scene_summary(scene_), procedure_summary(engine_, procedure_)};
}

std::vector<wire::ServerPayload> Session::backlog() const {
  std::vector<wire::ServerPayload> out;
  out.reserve(procedure_.log.size());
  for (const auto &e : procedure_.log)
    out.emplace_back(wire::ProcedureEventMsg{e});
  return out;
}

void Session::record_procedure(const std::vector<ProcedureEvent> &events, Outbound &out) {
  for (const auto &e : events) {
    log_.procedure(e);
    out.broadcasts.emplace_back(wire::ProcedureEventMsg{e});
  }
  if (!events.empty() && log_stream_)
    log_stream_->flush();
}

Outbound Session::handle(const wire::ClientPayload &payload) {
  Outbound out;
  std::visit(overloaded{
                 [&](const wire::Hello &) {
                   out.replies.emplace_back(
                       wire::Error{"duplicate_hello", "hello already exchanged"});
                 },
                 [&](const wire::PoseUpdate &p) { device_.push(p.position); },
                 [&](const wire::ToolSelect &t) { tool_ = t.tool; },
                 [&](const wire::WorldEventMsg &w) {
                   WorldEvent e = w.event;
                   e.time = now();
                   record_procedure(engine_.apply_world_event(procedure_, e), out);
                 },
                 [&](const wire::ParamOverride &p) {
                   OrganModel *organ = scene_.find(p.organ_id);
                   if (!organ) {
                     out.replies.emplace_back(
                         wire::Error{"unknown_organ", "no organ '" + p.organ_id + "' in scene"});
                     return;
                   }
                   const HapticMaterial patched = p.patch.applied_to(organ->material);
                   const auto problems = material_violations(patched);
                   if (!problems.empty()) {
                     std::string msg;
                     for (const auto &problem : problems)
                       msg += (msg.empty() ? "" : "; ") + problem;
                     out.replies.emplace_back(wire::Error{"bad_material", msg});
                     return;
                   }
                   organ->material = patched;
                   log_.param_override(organ->organ_id, patched);
                   out.broadcasts.emplace_back(wire::ParamApplied{organ->organ_id, patched});
                 },
                 [&](const wire::Start &) { running_ = true; },
                 [&](const wire::Pause &) { running_ = false; },
             },
             payload);
  return out;
}

Outbound Session::tick(double lateness) {
  Outbound out;
  if (!ready_to_tick())
    return out;
  auto result = hapticsim::tick(scene_, state_, device_.read_pose(), config_);
  result.record.lateness = lateness;
  state_ = std::move(result.state);
  const TickRecord &rec = result.record;
  device_.write_force(rec.force.total);
  log_.tick(rec);

  if (lateness_window_.size() < kLatenessWindow)
    lateness_window_.push_back(lateness);
  else
    lateness_window_[window_next_++ % kLatenessWindow] = lateness;
  misses_ += lateness > config_.dt ? 1 : 0;
  max_lateness_ = std::max(max_lateness_, lateness);
  clamped_ += rec.force.clamped ? 1 : 0;

  out.broadcasts.emplace_back(
      wire::ForceSample{rec.sample.time, rec.sample.position, rec.force, rec.contact, rec.event});
  record_procedure(engine_.observe_sample(procedure_, rec.sample, rec.contact, tool_), out);
  if (state_.next_index % stats_every_ == 0)
    out.broadcasts.emplace_back(wire::Stats{stats(), config_.dt});
  return out;
}

TickStats Session::stats() const {
  TickStats s = summarize(lateness_window_, clamped_, config_.dt);
  s.count = state_.next_index;
  s.deadline_misses = misses_;
  s.max_lateness = max_lateness_;
  return s;
}

} // namespace hapticsim
