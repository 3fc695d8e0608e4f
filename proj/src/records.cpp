#include "hapticsim/records.hpp"

#include "hapticsim/errors.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace hapticsim {

Json to_json(const Vec3 &v) { return Json::array({v.x, v.y, v.z}); }

Json to_json(const ContactState &c) {
  Json j;
  j["organ"] = c.organ_id ? Json(*c.organ_id) : Json(nullptr);
  j["proxy"] = to_json(c.proxy_position);
  j["depth"] = c.depth;
  j["normal"] = to_json(c.normal);
  j["phase"] = to_string(c.phase);
  return j;
}

Json to_json(const ForceBreakdown &f) {
  Json j;
  j["spring"] = to_json(f.spring);
  j["damping"] = to_json(f.damping);
  j["friction"] = to_json(f.friction);
  j["pop"] = to_json(f.pop);
  j["normal_force"] = f.normal_force;
  j["unclamped"] = to_json(f.unclamped);
  j["total"] = to_json(f.total);
  j["clamped"] = f.clamped;
  return j;
}

Json to_json(const TickStats &s, double dt) {
  Json j;
  j["ticks"] = s.count;
  j["dt"] = dt;
  j["deadline_misses"] = s.deadline_misses;
  j["miss_rate"] = s.count == 0 ? 0.0 : static_cast<double>(s.deadline_misses) / s.count;
  j["p50_lateness"] = s.p50_lateness;
  j["p99_lateness"] = s.p99_lateness;
  j["max_lateness"] = s.max_lateness;
  j["forces_clamped"] = s.forces_clamped;
  return j;
}

Json to_json(const HapticMaterial &m) {
  Json j;
  j["stiffness_k"] = m.stiffness_k;
  j["damping_b"] = m.damping_b;
  j["friction_mu"] = m.friction_mu;
  j["pop_force"] = m.pop_force;
  j["pop_depth"] = m.pop_depth;
  j["post_pop_stiffness_scale"] = m.post_pop_stiffness_scale;
  return j;
}

Json to_json(const Score &s) {
  Json j;
  j["trajectories"] = Json::array();
  for (const auto &t : s.trajectories)
    j["trajectories"].push_back({{"node", t.node_id},
                                 {"rms_deviation", t.rms_deviation},
                                 {"completion_time", t.completion_time},
                                 {"samples", t.samples}});
  j["total_time"] = s.total_time;
  j["overall_rms"] = s.overall_rms;
  return j;
}

namespace {

double finite_number(const Json &j, const char *what) {
  if (!j.is_number())
    throw InputError(std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v))
    throw InputError(std::string(what) + " must be finite");
  return v;
}

const Json &field(const Json &j, const char *key) {
  if (!j.is_object())
    throw InputError("expected a JSON object");
  const auto it = j.find(key);
  if (it == j.end())
    throw InputError(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_field(const Json &j, const char *key) {
  const Json &v = field(j, key);
  if (!v.is_string() || v.get_ref<const std::string &>().empty())
    throw InputError(std::string("'") + key + "' must be a non-empty string");
  return v.get<std::string>();
}

template <class F> void for_each_record(std::istream &in, F &&f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#')
      continue;
    try {
      f(Json::parse(line));
    } catch (const Json::exception &e) {
      throw InputError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError &e) {
      throw InputError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::ifstream open_input(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  return in;
}

} // namespace

Vec3 vec3_from_json(const Json &j) {
  if (!j.is_array() || j.size() != 3)
    throw InputError("expected [x, y, z]");
  return {finite_number(j[0], "x"), finite_number(j[1], "y"), finite_number(j[2], "z")};
}

Quaternion quaternion_from_json(const Json &j) {
  if (!j.is_array() || j.size() != 4)
    throw InputError("expected [w, x, y, z]");
  Quaternion q{finite_number(j[0], "w"), finite_number(j[1], "x"), finite_number(j[2], "y"),
               finite_number(j[3], "z")};
  if (q.w == 0.0 && q.x == 0.0 && q.y == 0.0 && q.z == 0.0)
    throw InputError("orientation must be non-zero");
  return q;
}

Trajectory parse_trajectory(std::istream &in) {
  Trajectory tr;
  for_each_record(in, [&](const Json &j) {
    tr.points.push_back({finite_number(field(j, "t"), "t"),
                         {finite_number(field(j, "x"), "x"), finite_number(field(j, "y"), "y"),
                          finite_number(field(j, "z"), "z")}});
  });
  validate_trajectory(tr);
  return tr;
}

Trajectory load_trajectory(const std::filesystem::path &path) {
  auto in = open_input(path);
  return parse_trajectory(in);
}

void write_trajectory(std::ostream &out, const Trajectory &trajectory) {
  for (const auto &p : trajectory.points) {
    Json j;
    j["t"] = p.t;
    j["x"] = p.position.x;
    j["y"] = p.position.y;
    j["z"] = p.position.z;
    out << j.dump() << '\n';
  }
}

std::vector<ScriptedEvent> parse_event_script(std::istream &in) {
  std::vector<ScriptedEvent> out;
  for_each_record(in, [&](const Json &j) {
    ScriptedEvent e;
    e.t = finite_number(field(j, "t"), "t");
    if (!out.empty() && e.t < out.back().t)
      throw InputError("event times must be non-decreasing");
    const std::string type = string_field(j, "type");
    if (type == "tool") {
      e.action = ToolChange{string_field(j, "tool")};
    } else if (type == "insert" || type == "remove") {
      WorldEvent w;
      w.action = type == "insert" ? WorldEvent::Action::Insert : WorldEvent::Action::Remove;
      w.object_id = string_field(j, "object");
      w.position = vec3_from_json(field(j, "position"));
      if (j.contains("orientation"))
        w.orientation = quaternion_from_json(j["orientation"]);
      w.time = e.t;
      e.action = std::move(w);
    } else {
      throw InputError("unknown event type '" + type + "'");
    }
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<ScriptedEvent> load_event_script(const std::filesystem::path &path) {
  auto in = open_input(path);
  return parse_event_script(in);
}

HapticMaterial MaterialPatch::applied_to(HapticMaterial m) const {
  if (stiffness_k)
    m.stiffness_k = *stiffness_k;
  if (damping_b)
    m.damping_b = *damping_b;
  if (friction_mu)
    m.friction_mu = *friction_mu;
  if (pop_force)
    m.pop_force = *pop_force;
  if (pop_depth)
    m.pop_depth = *pop_depth;
  if (post_pop_stiffness_scale)
    m.post_pop_stiffness_scale = *post_pop_stiffness_scale;
  return m;
}

MaterialPatch material_patch_from_json(const Json &j) {
  if (!j.is_object())
    throw InputError("material must be an object");
  MaterialPatch p;
  for (const auto &[key, value] : j.items()) {
    const double v = finite_number(value, key.c_str());
    if (key == "stiffness_k")
      p.stiffness_k = v;
    else if (key == "damping_b")
      p.damping_b = v;
    else if (key == "friction_mu")
      p.friction_mu = v;
    else if (key == "pop_force")
      p.pop_force = v;
    else if (key == "pop_depth")
      p.pop_depth = v;
    else if (key == "post_pop_stiffness_scale")
      p.post_pop_stiffness_scale = v;
    else
      throw InputError("unknown material field '" + key + "'");
  }
  return p;
}

Json to_json(const MaterialPatch &p) {
  Json j = Json::object();
  if (p.stiffness_k)
    j["stiffness_k"] = *p.stiffness_k;
  if (p.damping_b)
    j["damping_b"] = *p.damping_b;
  if (p.friction_mu)
    j["friction_mu"] = *p.friction_mu;
  if (p.pop_force)
    j["pop_force"] = *p.pop_force;
  if (p.pop_depth)
    j["pop_depth"] = *p.pop_depth;
  if (p.post_pop_stiffness_scale)
    j["post_pop_stiffness_scale"] = *p.post_pop_stiffness_scale;
  return j;
}

Json tick_record_json(const TickRecord &r) {
  Json j;
  j["tick"] = r.index;
  j["t"] = r.sample.time;
  j["position"] = to_json(r.sample.position);
  j["velocity"] = to_json(r.sample.velocity);
  j["contact"] = to_json(r.contact);
  j["event"] = r.event ? Json(to_string(*r.event)) : Json(nullptr);
  j["force"] = to_json(r.force);
  j["lateness"] = r.lateness;
  return j;
}

Json procedure_event_json(const ProcedureEvent &e) {
  Json j;
  j["t"] = e.time;
  j["node"] = e.node_id;
  j["transition"] = to_string(e.transition);
  if (e.transition == Transition::Waypoint)
    j["waypoint"] = e.waypoint;
  if (!e.detail.empty())
    j["detail"] = e.detail;
  return j;
}

ProcedureEvent procedure_event_from_json(const Json &j) {
  ProcedureEvent e;
  e.time = finite_number(field(j, "t"), "t");
  const Json &node = field(j, "node");
  if (!node.is_string())
    throw InputError("'node' must be a string");
  e.node_id = node.get<std::string>();
  const auto t = transition_from_string(string_field(j, "transition"));
  if (!t)
    throw InputError("unknown transition");
  e.transition = *t;
  if (e.transition == Transition::Waypoint) {
    const Json &w = field(j, "waypoint");
    if (!w.is_number_unsigned())
      throw InputError("'waypoint' must be a non-negative integer");
    e.waypoint = w.get<std::size_t>();
  }
  if (j.contains("detail") && j["detail"].is_string())
    e.detail = j["detail"].get<std::string>();
  return e;
}

Json SessionLog::header(std::string_view kind) {
  Json j;
  j["session"] = session_;
  j["seq"] = seq_;
  j["kind"] = kind;
  return j;
}

void SessionLog::write(const Json &line) {
  ++seq_;
  if (out_)
    *out_ << line.dump() << '\n';
}

void SessionLog::tick(const TickRecord &record) {
  Json j = header("tick");
  j.update(tick_record_json(record));
  write(j);
}

void SessionLog::procedure(const ProcedureEvent &event) {
  Json j = header("procedure");
  j.update(procedure_event_json(event));
  write(j);
}

void SessionLog::param_override(const std::string &organ_id, const HapticMaterial &material) {
  Json j = header("param_override");
  j["organ"] = organ_id;
  j["material"] = to_json(material);
  write(j);
}

std::vector<ProcedureEvent> procedure_events_from_log(std::istream &in) {
  std::vector<ProcedureEvent> out;
  std::uint64_t expected = 0;
  for_each_record(in, [&](const Json &j) {
    const Json &seq = field(j, "seq");
    if (!seq.is_number_unsigned() || seq.get<std::uint64_t>() != expected)
      throw InputError("sequence gap: expected seq " + std::to_string(expected));
    ++expected;
    if (string_field(j, "kind") == "procedure")
      out.push_back(procedure_event_from_json(j));
  });
  return out;
}

} // namespace hapticsim
