#include "hapticsim/wire.hpp"

#include "hapticsim/errors.hpp"

#include <cmath>

namespace hapticsim::wire {

namespace {

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

const Json &require(const Json &j, const char *key) {
  const auto it = j.find(key);
  if (it == j.end())
    throw InputError(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const Json &j, const char *key) {
  const Json &v = require(j, key);
  if (!v.is_string() || v.get_ref<const std::string &>().empty())
    throw InputError(std::string("'") + key + "' must be a non-empty string");
  return v.get<std::string>();
}

double require_number(const Json &j, const char *key) {
  const Json &v = require(j, key);
  if (!v.is_number() || !std::isfinite(v.get<double>()))
    throw InputError(std::string("'") + key + "' must be a finite number");
  return v.get<double>();
}

ClientPayload decode_payload(const std::string &type, const Json &j) {
  if (type == "hello") {
    Hello h;
    const Json &v = require(j, "protocol_version");
    if (!v.is_number_integer())
      throw InputError("'protocol_version' must be an integer");
    const auto version = v.get<std::int64_t>();
    h.protocol_version = version < 0 || version > 1'000'000 ? -1 : static_cast<int>(version);
    if (j.contains("session") && !j["session"].is_null())
      h.session = require_string(j, "session");
    return h;
  }
  if (type == "pose") {
    PoseUpdate p;
    p.t = require_number(j, "t");
    p.position = vec3_from_json(require(j, "position"));
    if (j.contains("orientation"))
      p.orientation = quaternion_from_json(j["orientation"]);
    return p;
  }
  if (type == "tool")
    return ToolSelect{require_string(j, "tool")};
  if (type == "world_event") {
    WorldEventMsg w;
    const std::string action = require_string(j, "action");
    if (action == "insert")
      w.event.action = WorldEvent::Action::Insert;
    else if (action == "remove")
      w.event.action = WorldEvent::Action::Remove;
    else
      throw InputError("'action' must be insert or remove");
    w.event.object_id = require_string(j, "object");
    w.event.position = vec3_from_json(require(j, "position"));
    if (j.contains("orientation"))
      w.event.orientation = quaternion_from_json(j["orientation"]);
    return w;
  }
  if (type == "param_override")
    return ParamOverride{require_string(j, "organ_id"),
                         material_patch_from_json(require(j, "material"))};
  if (type == "start")
    return Start{};
  if (type == "pause")
    return Pause{};
  throw std::out_of_range(type);
}

} // namespace

std::variant<ClientMessage, Error> decode_client(std::string_view bytes) {
  try {
    if (bytes.size() > kMaxMessageBytes)
      return Error{"too_large", "message exceeds " + std::to_string(kMaxMessageBytes) + " bytes"};
    const Json j = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded())
      return Error{"malformed", "message is not valid JSON"};
    if (!j.is_object())
      return Error{"malformed", "message must be a JSON object"};
    const auto seq = j.find("seq");
    if (seq == j.end() || !seq->is_number_unsigned())
      return Error{"missing_seq", "message needs a non-negative integer 'seq'"};
    const auto type = j.find("type");
    if (type == j.end() || !type->is_string())
      return Error{"malformed", "message needs a string 'type'"};
    const std::string type_str = type->get<std::string>();
    try {
      return ClientMessage{seq->get<std::uint64_t>(), decode_payload(type_str, j)};
    } catch (const std::out_of_range &) {
      return Error{"unknown_type", "unknown message type '" + type_str + "'"};
    }
  } catch (const InputError &e) {
    return Error{"bad_payload", e.what()};
  } catch (const std::exception &e) {
    return Error{"malformed", e.what()};
  }
}

std::string_view type_name(const ClientPayload &p) {
  return std::visit(overloaded{
                        [](const Hello &) { return std::string_view("hello"); },
                        [](const PoseUpdate &) { return std::string_view("pose"); },
                        [](const ToolSelect &) { return std::string_view("tool"); },
                        [](const WorldEventMsg &) { return std::string_view("world_event"); },
                        [](const ParamOverride &) { return std::string_view("param_override"); },
                        [](const Start &) { return std::string_view("start"); },
                        [](const Pause &) { return std::string_view("pause"); },
                    },
                    p);
}

std::string_view type_name(const ServerPayload &p) {
  return std::visit(overloaded{
                        [](const Welcome &) { return std::string_view("welcome"); },
                        [](const ForceSample &) { return std::string_view("force_sample"); },
                        [](const ProcedureEventMsg &) { return std::string_view("procedure_event"); },
                        [](const Stats &) { return std::string_view("stats"); },
                        [](const ParamApplied &) { return std::string_view("param_applied"); },
                        [](const Error &) { return std::string_view("error"); },
                    },
                    p);
}

namespace {
Json quaternion_json(const Quaternion &q) { return Json::array({q.w, q.x, q.y, q.z}); }
} // namespace

std::string encode_client(const ClientMessage &msg) {
  Json j;
  j["type"] = type_name(msg.payload);
  j["seq"] = msg.seq;
  std::visit(overloaded{
                 [&](const Hello &h) {
                   j["protocol_version"] = h.protocol_version;
                   if (h.session)
                     j["session"] = *h.session;
                 },
                 [&](const PoseUpdate &p) {
                   j["t"] = p.t;
                   j["position"] = to_json(p.position);
                   j["orientation"] = quaternion_json(p.orientation);
                 },
                 [&](const ToolSelect &t) { j["tool"] = t.tool; },
                 [&](const WorldEventMsg &w) {
                   j["action"] = w.event.action == WorldEvent::Action::Insert ? "insert" : "remove";
                   j["object"] = w.event.object_id;
                   j["position"] = to_json(w.event.position);
                   j["orientation"] = quaternion_json(w.event.orientation);
                 },
                 [&](const ParamOverride &p) {
                   j["organ_id"] = p.organ_id;
                   j["material"] = to_json(p.patch);
                 },
                 [](const Start &) {},
                 [](const Pause &) {},
             },
             msg.payload);
  return j.dump();
}

std::string encode_server(const ServerPayload &payload, std::uint64_t seq) {
  Json j;
  j["type"] = type_name(payload);
  j["seq"] = seq;
  std::visit(overloaded{
                 [&](const Welcome &w) {
                   j["session_id"] = w.session_id;
                   j["protocol_version"] = kProtocolVersion;
                   j["scene"] = w.scene;
                   j["procedure"] = w.procedure;
                 },
                 [&](const ForceSample &f) {
                   j["t"] = f.t;
                   j["position"] = to_json(f.position);
                   j["force"] = to_json(f.force);
                   j["contact"] = to_json(f.contact);
                   j["event"] = f.event ? Json(to_string(*f.event)) : Json(nullptr);
                 },
                 [&](const ProcedureEventMsg &p) { j.update(procedure_event_json(p.event)); },
                 [&](const Stats &s) { j.update(to_json(s.stats, s.dt)); },
                 [&](const ParamApplied &p) {
                   j["organ_id"] = p.organ_id;
                   j["material"] = to_json(p.material);
                 },
                 [&](const Error &e) {
                   j["code"] = e.code;
                   j["message"] = e.message;
                 },
             },
             payload);
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

ClientLink::Action ClientLink::accept(std::string_view bytes) {
  auto decoded = decode_client(bytes);
  if (auto *err = std::get_if<Error>(&decoded))
    return *err;
  auto &msg = std::get<ClientMessage>(decoded);
  if (last_seq_ && msg.seq <= *last_seq_)
    return Error{"bad_seq", "seq " + std::to_string(msg.seq) + " is not greater than " +
                                std::to_string(*last_seq_)};
  last_seq_ = msg.seq;

  if (auto *hello = std::get_if<Hello>(&msg.payload)) {
    if (session_)
      return Error{"duplicate_hello", "hello already exchanged"};
    if (hello->protocol_version != kProtocolVersion)
      return Error{"unsupported_version",
                   "server speaks protocol version " + std::to_string(kProtocolVersion)};
    return Join{*hello};
  }
  if (!session_)
    return Error{"hello_required", "send hello before '" + std::string(type_name(msg.payload)) + "'"};
  return Forward{std::move(msg.payload)};
}

} // namespace hapticsim::wire
