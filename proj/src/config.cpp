#include "hapticsim/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace hapticsim {

std::string Diagnostic::str() const {
  std::string out = file;
  if (line > 0)
    out += ":" + std::to_string(line);
  return out + ": " + message;
}

std::string_view to_string(SessionMode m) {
  switch (m) {
  case SessionMode::Replay:
    return "replay";
  case SessionMode::Interactive:
    return "interactive";
  case SessionMode::Bench:
    return "bench";
  }
  return "replay";
}

namespace {

int line_of(const YAML::Node &n) {
  const auto mark = n.Mark();
  return mark.is_null() ? 0 : mark.line + 1;
}

// Typed field access that records a diagnostic instead of throwing.
class Reader {
public:
  Reader(std::string_view file, std::vector<Diagnostic> &out) : file_(file), out_(out) {}

  void error(const YAML::Node &at, std::string message) {
    out_.push_back({file_, line_of(at), std::move(message)});
  }

  void check_keys(const YAML::Node &map, std::initializer_list<std::string_view> allowed) {
    for (const auto &kv : map) {
      const auto key = kv.first.as<std::string>("");
      bool known = false;
      for (auto a : allowed)
        known = known || a == key;
      if (!known)
        error(kv.first, "unknown key '" + key + "'");
    }
  }

  std::optional<double> number(const YAML::Node &map, const std::string &key,
                               std::optional<double> fallback = std::nullopt) {
    const YAML::Node n = map[key];
    if (!n) {
      if (!fallback)
        error(map, "missing required key '" + key + "'");
      return fallback;
    }
    try {
      if (n.IsScalar())
        return n.as<double>();
    } catch (const YAML::Exception &) {
    }
    error(n, "'" + key + "' must be a number");
    return std::nullopt;
  }

  std::optional<std::string> text(const YAML::Node &map, const std::string &key, bool required) {
    const YAML::Node n = map[key];
    if (!n) {
      if (required)
        error(map, "missing required key '" + key + "'");
      return std::nullopt;
    }
    if (!n.IsScalar() || n.Scalar().empty()) {
      error(n, "'" + key + "' must be a non-empty string");
      return std::nullopt;
    }
    return n.Scalar();
  }

  std::optional<std::vector<double>> numbers(const YAML::Node &n, const std::string &what,
                                             std::size_t count) {
    if (!n.IsSequence() || n.size() != count) {
      error(n, "'" + what + "' must be a list of " + std::to_string(count) + " numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const auto &item : n) {
      try {
        out.push_back(item.as<double>());
      } catch (const YAML::Exception &) {
        error(item, "'" + what + "' must contain only numbers");
        return std::nullopt;
      }
    }
    return out;
  }

  std::optional<Vec3> vec3(const YAML::Node &map, const std::string &key) {
    const YAML::Node n = map[key];
    if (!n) {
      error(map, "missing required key '" + key + "'");
      return std::nullopt;
    }
    return vec3_node(n, key);
  }

  std::optional<Vec3> vec3_node(const YAML::Node &n, const std::string &what) {
    auto v = numbers(n, what, 3);
    if (!v)
      return std::nullopt;
    return Vec3{(*v)[0], (*v)[1], (*v)[2]};
  }

  const std::string &file() const { return file_; }

private:
  std::string file_;
  std::vector<Diagnostic> &out_;
};

std::optional<YAML::Node> load_yaml(std::string_view text, std::string_view source,
                                    std::vector<Diagnostic> &out) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::ParserException &e) {
    out.push_back({std::string(source), e.mark.line + 1, "YAML syntax error: " + e.msg});
  } catch (const YAML::Exception &e) {
    out.push_back({std::string(source), 0, std::string("YAML error: ") + e.what()});
  }
  return std::nullopt;
}

std::optional<Shape> read_shape(Reader &r, const YAML::Node &n) {
  if (!n || !n.IsMap()) {
    r.error(n, "'shape' must be a mapping");
    return std::nullopt;
  }
  const auto type = r.text(n, "type", true);
  if (!type)
    return std::nullopt;
  std::optional<Shape> shape;
  if (*type == "sphere") {
    r.check_keys(n, {"type", "center", "radius"});
    auto c = r.vec3(n, "center");
    auto rad = r.number(n, "radius");
    if (c && rad)
      shape = Sphere{*c, *rad};
  } else if (*type == "capsule") {
    r.check_keys(n, {"type", "a", "b", "radius"});
    auto a = r.vec3(n, "a");
    auto b = r.vec3(n, "b");
    auto rad = r.number(n, "radius");
    if (a && b && rad)
      shape = Capsule{*a, *b, *rad};
  } else if (*type == "slab") {
    r.check_keys(n, {"type", "point", "normal", "thickness"});
    auto p = r.vec3(n, "point");
    auto nn = r.vec3(n, "normal");
    auto t = r.number(n, "thickness");
    if (p && nn && t)
      shape = Slab{*p, *nn, *t};
  } else {
    r.error(n["type"], "unknown shape type '" + *type + "' (expected sphere, capsule or slab)");
    return std::nullopt;
  }
  if (shape)
    for (auto &problem : shape_violations(*shape))
      r.error(n, problem);
  return shape;
}

std::optional<HapticMaterial> read_material(Reader &r, const YAML::Node &n) {
  if (!n || !n.IsMap()) {
    r.error(n, "'material' must be a mapping");
    return std::nullopt;
  }
  r.check_keys(n, {"stiffness_k", "damping_b", "friction_mu", "pop_force", "pop_depth",
                   "post_pop_stiffness_scale"});
  const HapticMaterial defaults;
  HapticMaterial m;
  auto k = r.number(n, "stiffness_k");
  auto b = r.number(n, "damping_b", defaults.damping_b);
  auto mu = r.number(n, "friction_mu", defaults.friction_mu);
  auto pf = r.number(n, "pop_force", defaults.pop_force);
  auto pd = r.number(n, "pop_depth", defaults.pop_depth);
  auto sc = r.number(n, "post_pop_stiffness_scale", defaults.post_pop_stiffness_scale);
  if (!k || !b || !mu || !pf || !pd || !sc)
    return std::nullopt;
  m = {*k, *b, *mu, *pf, *pd, *sc};
  const auto problems = material_violations(m);
  for (const auto &p : problems)
    r.error(n, p);
  return m;
}

std::optional<ActionNode> read_node(Reader &r, const YAML::Node &n) {
  if (!n.IsMap()) {
    r.error(n, "procedure node must be a mapping");
    return std::nullopt;
  }
  const auto id = r.text(n, "id", true);
  const auto kind = r.text(n, "kind", true);
  if (!id || !kind)
    return std::nullopt;
  ActionNode node{*id, {}};
  if (*kind == "trajectory") {
    r.check_keys(n, {"id", "kind", "label", "tool", "tolerance", "requires_contact_with",
                     "waypoints"});
    TrajectoryAction a;
    auto tool = r.text(n, "tool", true);
    auto tol = r.number(n, "tolerance", a.tolerance);
    a.requires_contact_with = r.text(n, "requires_contact_with", false);
    const YAML::Node wps = n["waypoints"];
    bool ok = tool && tol;
    if (!wps || !wps.IsSequence()) {
      r.error(n, "'waypoints' must be a list of [x, y, z] points");
      ok = false;
    } else {
      for (const auto &w : wps) {
        auto v = r.vec3_node(w, "waypoint");
        if (v)
          a.waypoints.push_back(*v);
        else
          ok = false;
      }
    }
    if (!ok)
      return std::nullopt;
    a.required_tool = *tool;
    a.tolerance = *tol;
    node.kind = std::move(a);
  } else if (*kind == "insert") {
    r.check_keys(n, {"id", "kind", "label", "object", "target_position", "target_orientation",
                     "pos_tolerance", "ang_tolerance"});
    InsertAction a;
    auto obj = r.text(n, "object", true);
    auto pos = r.vec3(n, "target_position");
    auto pt = r.number(n, "pos_tolerance", a.pos_tolerance);
    auto at = r.number(n, "ang_tolerance", a.ang_tolerance);
    std::optional<std::vector<double>> q = std::vector<double>{1.0, 0.0, 0.0, 0.0};
    if (n["target_orientation"])
      q = r.numbers(n["target_orientation"], "target_orientation", 4);
    if (!obj || !pos || !pt || !at || !q)
      return std::nullopt;
    a.object_id = *obj;
    a.target_position = *pos;
    a.pos_tolerance = *pt;
    a.ang_tolerance = *at;
    a.target_orientation = {(*q)[0], (*q)[1], (*q)[2], (*q)[3]};
    node.kind = std::move(a);
  } else if (*kind == "remove") {
    r.check_keys(n, {"id", "kind", "label", "object", "clearance_center", "clearance_radius"});
    RemoveAction a;
    auto obj = r.text(n, "object", true);
    auto c = r.vec3(n, "clearance_center");
    auto rad = r.number(n, "clearance_radius");
    if (!obj || !c || !rad)
      return std::nullopt;
    a.object_id = *obj;
    a.clearance_center = *c;
    a.clearance_radius = *rad;
    node.kind = std::move(a);
  } else {
    r.error(n["kind"], "unknown action kind '" + *kind + "' (expected trajectory, insert or remove)");
    return std::nullopt;
  }
  return node;
}

std::optional<std::string> read_file(const std::filesystem::path &path,
                                     std::vector<Diagnostic> &out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    out.push_back({path.string(), 0, "cannot open file", true});
    return std::nullopt;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

Parsed<Scene> parse_scene(std::string_view text, std::string_view source) {
  Parsed<Scene> result;
  auto root = load_yaml(text, source, result.diagnostics);
  if (!root)
    return result;
  Reader r(source, result.diagnostics);
  if (!root->IsMap() || !(*root)["organs"] || !(*root)["organs"].IsSequence()) {
    r.error(*root, "scene must be a mapping with an 'organs' list");
    return result;
  }
  r.check_keys(*root, {"organs"});
  Scene scene;
  std::set<std::string> seen;
  bool ok = true;
  for (const auto &o : (*root)["organs"]) {
    if (!o.IsMap()) {
      r.error(o, "organ must be a mapping");
      ok = false;
      continue;
    }
    r.check_keys(o, {"id", "name", "shape", "material"});
    auto id = r.text(o, "id", true);
    auto name = r.text(o, "name", false);
    auto shape = read_shape(r, o["shape"]);
    auto material = read_material(r, o["material"]);
    if (id && !seen.insert(*id).second) {
      r.error(o, "duplicate organ id '" + *id + "'");
      ok = false;
    }
    if (!id || !shape || !material) {
      ok = false;
      continue;
    }
    scene.organs.push_back({*id, name.value_or(*id), *shape, *material});
  }
  if (ok && result.diagnostics.empty())
    result.value = std::move(scene);
  return result;
}

Parsed<Scenegraph> parse_procedure(std::string_view text, std::string_view source) {
  Parsed<Scenegraph> result;
  auto root = load_yaml(text, source, result.diagnostics);
  if (!root)
    return result;
  Reader r(source, result.diagnostics);
  if (!root->IsMap() || !(*root)["nodes"] || !(*root)["nodes"].IsSequence()) {
    r.error(*root, "procedure must be a mapping with a 'nodes' list");
    return result;
  }
  r.check_keys(*root, {"name", "nodes", "edges"});
  Scenegraph graph;
  bool ok = true;
  for (const auto &n : (*root)["nodes"]) {
    auto node = read_node(r, n);
    if (node)
      graph.nodes.push_back(std::move(*node));
    else
      ok = false;
  }
  const YAML::Node edges = (*root)["edges"];
  if (edges) {
    if (!edges.IsSequence()) {
      r.error(edges, "'edges' must be a list of [prerequisite, dependent] pairs");
      ok = false;
    } else {
      for (const auto &e : edges) {
        if (!e.IsSequence() || e.size() != 2 || !e[0].IsScalar() || !e[1].IsScalar()) {
          r.error(e, "edge must be a [prerequisite, dependent] pair");
          ok = false;
          continue;
        }
        graph.edges.emplace_back(e[0].Scalar(), e[1].Scalar());
      }
    }
  }
  if (!ok)
    return result;
  for (const auto &d : validate_graph(graph))
    result.diagnostics.push_back({std::string(source), 0, d.message});
  if (result.diagnostics.empty())
    result.value = std::move(graph);
  return result;
}

Parsed<Bundle> parse_config(std::string_view text, const std::filesystem::path &base_dir,
                            std::string_view source) {
  Parsed<Bundle> result;
  auto root = load_yaml(text, source, result.diagnostics);
  if (!root)
    return result;
  Reader r(source, result.diagnostics);
  if (!root->IsMap()) {
    r.error(*root, "config must be a mapping");
    return result;
  }
  r.check_keys(*root, {"scene", "procedure", "servo", "mode"});

  SessionConfig config;
  const auto scene = r.text(*root, "scene", true);
  const auto procedure = r.text(*root, "procedure", true);
  if (const auto mode = r.text(*root, "mode", false)) {
    if (*mode == "replay")
      config.mode = SessionMode::Replay;
    else if (*mode == "interactive")
      config.mode = SessionMode::Interactive;
    else if (*mode == "bench")
      config.mode = SessionMode::Bench;
    else
      r.error((*root)["mode"], "mode must be replay, interactive or bench");
  }

  if (const YAML::Node servo = (*root)["servo"]) {
    if (!servo.IsMap()) {
      r.error(servo, "'servo' must be a mapping");
    } else {
      r.check_keys(servo, {"dt", "alpha", "v_deadband", "f_max"});
      auto &s = config.servo;
      if (auto v = r.number(servo, "dt", s.dt); v && !(*v > 0.0))
        r.error(servo["dt"], "dt must be > 0");
      else if (v)
        s.dt = *v;
      if (auto v = r.number(servo, "alpha", s.alpha); v && !(*v > 0.0 && *v <= 1.0))
        r.error(servo["alpha"], "alpha must be in (0, 1]");
      else if (v)
        s.alpha = *v;
      if (auto v = r.number(servo, "v_deadband", s.force.v_deadband); v && !(*v >= 0.0))
        r.error(servo["v_deadband"], "v_deadband must be ≥ 0");
      else if (v)
        s.force.v_deadband = *v;
      if (auto v = r.number(servo, "f_max", s.force.f_max); v && !(*v > 0.0))
        r.error(servo["f_max"], "f_max must be > 0");
      else if (v)
        s.force.f_max = *v;
    }
  }

  Bundle bundle;
  if (scene) {
    config.scene_path = base_dir / *scene;
    if (auto text = read_file(config.scene_path, result.diagnostics)) {
      auto parsed = parse_scene(*text, config.scene_path.string());
      result.diagnostics.insert(result.diagnostics.end(), parsed.diagnostics.begin(),
                                parsed.diagnostics.end());
      if (parsed.value)
        bundle.scene = std::move(*parsed.value);
    }
  }
  if (procedure) {
    config.procedure_path = base_dir / *procedure;
    if (auto text = read_file(config.procedure_path, result.diagnostics)) {
      auto parsed = parse_procedure(*text, config.procedure_path.string());
      result.diagnostics.insert(result.diagnostics.end(), parsed.diagnostics.begin(),
                                parsed.diagnostics.end());
      if (parsed.value)
        bundle.procedure = std::move(*parsed.value);
    }
  }
  if (result.diagnostics.empty()) {
    for (const auto &node : bundle.procedure.nodes) {
      const auto *traj = std::get_if<TrajectoryAction>(&node.kind);
      if (traj && traj->requires_contact_with && !bundle.scene.find(*traj->requires_contact_with))
        result.diagnostics.push_back({config.procedure_path.string(), 0,
                                      "node '" + node.node_id + "' requires contact with organ '" +
                                          *traj->requires_contact_with +
                                          "' which is not in the scene"});
    }
  }
  if (result.diagnostics.empty()) {
    bundle.config = std::move(config);
    result.value = std::move(bundle);
  }
  return result;
}

Parsed<Bundle> load_config(const std::filesystem::path &config_file) {
  Parsed<Bundle> result;
  const auto text = read_file(config_file, result.diagnostics);
  if (!text)
    return result;
  return parse_config(*text, config_file.parent_path(), config_file.string());
}

} // namespace hapticsim
