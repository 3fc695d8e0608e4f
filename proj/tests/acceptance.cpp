// Acceptance checks. One PASS/FAIL line per criterion; exit status is the number of
// hard failures. Servo timing is machine-dependent and only a soft gate: its verdict is
// printed but does not fail the run. Invoked by ctest with the CLI binary path as argv[1].

#include "hapticsim/config.hpp"
#include "hapticsim/records.hpp"
#include "hapticsim/servo.hpp"
#include "hapticsim/session.hpp"
#include "hapticsim/wire.hpp"
#include "force_oracle.hpp"
#include "fuzz.hpp"
#include "procedure_oracle.hpp"
#include "support.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

using namespace hapticsim;
using testing_support::random_unit;
using testing_support::random_vec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
int soft_failures = 0;

void report(const std::string &name, const std::function<Outcome()> &check, bool soft = false) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception &e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  (soft ? soft_failures : failures) += o.pass ? 0 : 1;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << (soft ? " (soft gate)" : "") << ": "
            << o.detail << std::endl;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string cli;
std::filesystem::path scratch;

int run_cli(const std::string &args, const std::filesystem::path &stdout_file) {
  const std::string cmd = "'" + cli + "' " + args + " > '" + stdout_file.string() + "'";
  return std::system(cmd.c_str());
}

std::string replay_args(const std::filesystem::path &out) {
  const auto d = testing_support::data_dir();
  return "run --config '" + (d / "kidney_transplant.yaml").string() + "' --trajectory '" +
         (d / "kidney_transplant_trajectory.jsonl").string() + "' --events '" +
         (d / "kidney_transplant_events.jsonl").string() + "' --out '" + out.string() + "'";
}

// Randomized contact in a force-bearing phase.
struct Tuple {
  HapticMaterial m;
  ContactState c;
  Vec3 v;
  ForceParams p;
};

Tuple random_tuple(std::mt19937_64 &rng, bool in_contact) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tuple t;
  t.m = {3000 * u(rng), 10 * u(rng), 1.5 * u(rng), 2 * u(rng), 0.0005 + 0.01 * u(rng), u(rng)};
  t.c.organ_id = "organ";
  t.c.normal = random_unit(rng);
  t.c.proxy_position = random_vec(rng, -0.1, 0.1);
  const double r = u(rng);
  t.c.phase = r < 0.45 ? Phase::Contact : r < 0.9 ? Phase::Penetrated : Phase::Free;
  t.c.depth = in_contact ? 0.02 * u(rng) : (u(rng) < 0.1 ? 0.0 : -0.05 * u(rng));
  // A few sliding speeds straddle the deadband.
  t.v = u(rng) < 0.05 ? random_vec(rng, -2e-4, 2e-4) : random_vec(rng, -1, 1);
  t.p.f_max = 1.0 + 5.0 * u(rng);
  return t;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(20240601);
  std::vector<Tuple> tuples;
  for (int i = 0; i < 10000; ++i) {
    auto t = random_tuple(rng, true);
    if (t.c.phase == Phase::Free)
      t.c.phase = Phase::Contact;
    tuples.push_back(t);
  }
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const auto &t : tuples) {
    const auto f = compute_force(t.m, t.c, t.v, t.p);
    const auto o = oracle::force({t.m.stiffness_k, t.m.damping_b, t.m.friction_mu, t.m.pop_force,
                                  t.m.post_pop_stiffness_scale, t.c.phase == Phase::Penetrated,
                                  t.c.depth, {t.c.normal.x, t.c.normal.y, t.c.normal.z},
                                  {t.v.x, t.v.y, t.v.z}, t.p.v_deadband, t.p.f_max});
    const std::pair<Vec3, oracle::V> pairs[] = {{f.spring, o.spring},
                                                {f.damping, o.damping},
                                                {f.friction, o.friction},
                                                {f.pop, o.pop},
                                                {f.total, o.total}};
    for (const auto &[a, b] : pairs)
      worst = std::max({worst, std::abs(a.x - b[0]), std::abs(a.y - b[1]), std::abs(a.z - b[2])});
    worst = std::max(worst, std::abs(f.normal_force - o.normal_force));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-9 && secs < 5.0, "10000 tuples, max |diff| " + fmt(worst) + " N (tol 1e-9), " +
                                           fmt(secs) + " s (limit 5 s)"};
}

Outcome contact_gate() {
  std::mt19937_64 rng(77);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto t = random_tuple(rng, false);
    const auto f = compute_force(t.m, t.c, t.v, t.p);
    const Vec3 zero{};
    if (!(f.spring == zero && f.damping == zero && f.friction == zero && f.pop == zero &&
          f.total == zero && f.unclamped == zero && f.normal_force == 0.0))
      ++violations;
  }
  return {violations == 0, "10000 inputs with depth <= 0, " + std::to_string(violations) +
                               " with a nonzero term"};
}

Scene pop_scene() {
  Scene s;
  s.organs.push_back({"tissue", "tissue", Sphere{{0, 0, 0}, 0.04}, {600, 1.0, 0.3, 0.5, 0.003, 0.3}});
  return s;
}

Outcome pop_through() {
  const Scene scene = pop_scene();
  ServoConfig config;

  // Monotone ramp: 5 mm/s straight down through the north pole to 6 mm depth.
  SimulatedDevice ramp([](double t) { return Vec3{0, 0, 0.041 - 0.005 * t}; }, 1.4, config.dt);
  const auto r = run_replay(scene, ramp, config, 1.4);
  int pops = 0;
  bool dropped = false;
  double before = 0, after = 0;
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    if (r.records[i].event != PhaseEvent::PopThrough)
      continue;
    ++pops;
    before = norm(r.records[i - 1].force.total);
    after = norm(r.records[i].force.total);
    dropped = after < before;
  }

  // Dip and return: past pop_depth, back up to half of it (still in contact), down again.
  const double pd = scene.organs[0].material.pop_depth;
  Trajectory dip;
  dip.points = {{0.0, {0, 0, 0.041}}, {1.0, {0, 0, 0.04 - 1.5 * pd}},
                {1.5, {0, 0, 0.04 - 0.5 * pd}}, {2.0, {0, 0, 0.04 - 1.8 * pd}},
                {2.5, {0, 0, 0.04 - 0.5 * pd}}, {3.0, {0, 0, 0.04 - 1.8 * pd}}};
  SimulatedDevice dipper(dip, config.dt);
  const auto d = run_replay(scene, dipper, config, 3.0);
  int dip_pops = 0, dip_ends = 0;
  bool stayed = true;
  bool seen_contact = false;
  for (const auto &rec : d.records) {
    dip_pops += rec.event == PhaseEvent::PopThrough;
    dip_ends += rec.event == PhaseEvent::ContactEnd;
    seen_contact |= rec.contact.depth > 0;
    if (seen_contact && rec.contact.depth <= 0)
      stayed = false;
  }
  const bool pass = pops == 1 && dropped && dip_pops == 1 && dip_ends == 0 && stayed;
  return {pass, "ramp: " + std::to_string(pops) + " PopThrough, |total| " + fmt(before) + " -> " +
                    fmt(after) + " N; dip-and-return: " + std::to_string(dip_pops) +
                    " PopThrough, contact kept: " + (stayed ? "yes" : "no")};
}

// Work done on the hand over a closed approach/retract cycle: trapezoid rule on the
// sampled force against the exact position increments.
double cycle_work(const HapticMaterial &material) {
  Scene scene;
  scene.organs.push_back({"tissue", "", Sphere{{0, 0, 0}, 0.04}, material});
  ServoConfig config;
  // 1 mm above the surface, 4 mm into it, back out: 1 s each way.
  Trajectory cycle;
  cycle.points = {{0.0, {0, 0, 0.041}}, {1.0, {0, 0, 0.036}}, {2.0, {0, 0, 0.041}}};
  SimulatedDevice dev(cycle, config.dt);
  const auto r = run_replay(scene, dev, config, 2.0 + config.dt / 2);
  double work = 0.0;
  for (std::size_t i = 1; i < r.records.size(); ++i) {
    const Vec3 f = 0.5 * (r.records[i].force.total + r.records[i - 1].force.total);
    work += dot(f, r.records[i].sample.position - r.records[i - 1].sample.position);
  }
  return work;
}

Outcome passivity() {
  // pop_depth beyond the deepest point so the cycle never punctures.
  const double elastic = cycle_work({600, 0, 0, 0, 0.01, 0.3});
  const double damped = cycle_work({600, 2.0, 0, 0, 0.01, 0.3});
  const bool pass = std::abs(elastic) <= 1e-6 && damped < -1e-6;
  return {pass, "elastic cycle work " + fmt(elastic) + " J (|W| <= 1e-6), b = 2 N*s/m: " +
                    fmt(damped) + " J (< -1e-6)"};
}

Outcome geometry() {
  std::mt19937_64 rng(31337);
  const double h = 1e-6;
  double worst_grad = 0, worst_idem = 0, worst_surface = 0;
  int queries = 0;
  for (int kind = 0; kind < 3; ++kind) {
    int done = 0;
    while (done < 1000) {
      const Shape shape = testing_support::random_shape(rng, kind);
      const Vec3 q = random_vec(rng, -0.1, 0.1);
      if (std::abs(signed_distance(shape, q)) < 1e-4)
        continue; // too close to the surface for a well-posed projection test
      const auto sp = closest_surface_point(shape, q);
      worst_surface = std::max(worst_surface, std::abs(signed_distance(shape, sp.point)));
      worst_idem = std::max(worst_idem, norm(closest_surface_point(shape, sp.point).point - sp.point));
      const auto f = [&](Vec3 p) { return signed_distance(shape, p); };
      const Vec3 g{(f(sp.point + Vec3{h, 0, 0}) - f(sp.point - Vec3{h, 0, 0})) / (2 * h),
                   (f(sp.point + Vec3{0, h, 0}) - f(sp.point - Vec3{0, h, 0})) / (2 * h),
                   (f(sp.point + Vec3{0, 0, h}) - f(sp.point - Vec3{0, 0, h})) / (2 * h)};
      const Vec3 diff = g - sp.normal;
      worst_grad = std::max({worst_grad, std::abs(diff.x), std::abs(diff.y), std::abs(diff.z),
                             std::abs(norm(g) - 1.0)});
      ++done;
      ++queries;
    }
  }
  const bool pass = worst_grad <= 1e-4 && worst_idem <= 1e-9 && worst_surface <= 1e-9;
  return {pass, std::to_string(queries) + " queries (1000 per shape kind): gradient vs normal " +
                    fmt(worst_grad) + " (tol 1e-4), idempotence " + fmt(worst_idem) +
                    " m (tol 1e-9)"};
}

Outcome determinism() {
  const auto a = scratch / "det_a", b = scratch / "det_b";
  const int ra = run_cli(replay_args(a), scratch / "det_a.out");
  const int rb = run_cli(replay_args(b), scratch / "det_b.out");
  const std::string la = slurp(a / "session.jsonl"), lb = slurp(b / "session.jsonl");
  const bool same = !la.empty() && la == lb && slurp(a / "stats.json") == slurp(b / "stats.json");
  return {ra == 0 && rb == 0 && same,
          "two `run` invocations, force logs of " + std::to_string(la.size()) + " bytes " +
              (same ? "byte-identical" : "DIFFER")};
}

Outcome full_procedure() {
  const auto out = scratch / "full";
  if (run_cli(replay_args(out), scratch / "full.out") != 0)
    return {false, "`run` exited nonzero"};
  std::ifstream log(out / "session.jsonl");
  const auto events = procedure_events_from_log(log);
  const auto bundle = load_config(testing_support::shipped_config());
  const ProcedureEngine engine(bundle.value->procedure);
  const auto state = engine.reconstruct(events);
  std::vector<std::string> done;
  for (const auto &e : events)
    if (e.transition == Transition::Done)
      done.push_back(e.node_id);
  const auto stats = Json::parse(slurp(out / "stats.json"));
  const bool complete = engine.is_complete(state) && stats["procedure_complete"] == true;
  const bool bracketed = !events.empty() && events.front().node_id == "incision_abdomen" &&
                         !done.empty() && done.front() == "incision_abdomen" &&
                         done.back() == "close_abdomen" && events.back().node_id == "close_abdomen";
  return {complete && bracketed && done.size() == engine.graph().nodes.size(),
          std::to_string(done.size()) + "/" + std::to_string(engine.graph().nodes.size()) +
              " nodes done, first " + (done.empty() ? "-" : done.front()) + ", last " +
              (done.empty() ? "-" : done.back()) + ", is_complete " + (complete ? "true" : "false")};
}

Outcome scenegraph_soundness() {
  const ProcedureEngine engine(procedure_oracle::diamond());
  const auto x = procedure_oracle::check_all_orders(engine);
  return {x.permutations == 24 && x.topological == 2 && x.mismatches == 0 && x.noisy_rejections == 0,
          std::to_string(x.permutations) + " completion orders, " + std::to_string(x.topological) +
              " topological, " + std::to_string(x.mismatches) + " misjudged, " +
              std::to_string(x.noisy_rejections) + " rejected orders with side effects"};
}

Outcome servo_timing() {
  const auto out_file = scratch / "bench.out";
  const std::string args =
      "bench --config '" + testing_support::shipped_config().string() + "' --duration 10 --realtime";
  if (run_cli(args, out_file) != 0)
    return {false, "`bench` exited nonzero"};
  std::ifstream in(out_file);
  std::string line;
  std::getline(in, line);
  const auto j = Json::parse(line);
  const double rate = j["miss_rate"];
  return {rate < 0.001 && j["ticks"] == 10000,
          std::to_string(j["ticks"].get<std::uint64_t>()) + " ticks, " +
              std::to_string(j["deadline_misses"].get<std::uint64_t>()) + " misses (" +
              fmt(100 * rate) + "%, gate < 0.1%), lateness p50 " +
              fmt(1e6 * j["p50_lateness"].get<double>()) + " us, p99 " +
              fmt(1e6 * j["p99_lateness"].get<double>()) + " us, max " +
              fmt(1e6 * j["max_lateness"].get<double>()) + " us"};
}

Outcome protocol_robustness() {
  const auto bundle = load_config(testing_support::shipped_config());
  fuzz::MessageFuzzer gen(0xf00d);
  auto link = std::make_unique<wire::ClientLink>();
  Session session("fuzz", *bundle.value, nullptr);
  std::size_t errors = 0, accepted = 0, unanswered = 0, crashes = 0;
  for (std::size_t i = 0; i < 1'000'000; ++i) {
    if (i % 256 == 0)
      link = std::make_unique<wire::ClientLink>(); // reconnect
    const std::string bytes = gen.next();
    try {
      const auto action = link->accept(bytes);
      if (const auto *e = std::get_if<wire::Error>(&action)) {
        const auto reply = Json::parse(wire::encode_server(*e, i));
        if (reply["type"] == "error" && !e->code.empty())
          ++errors;
        else
          ++unanswered;
      } else if (std::holds_alternative<wire::ClientLink::Join>(action)) {
        link->joined(session.id());
        if (Json::parse(wire::encode_server(session.welcome(), i))["type"] != "welcome")
          ++unanswered;
        ++accepted;
      } else {
        const auto out = session.handle(std::get<wire::ClientLink::Forward>(action).payload);
        for (const auto &r : out.replies)
          if (!Json::parse(wire::encode_server(r, i)).contains("type"))
            ++unanswered;
        session.tick();
        ++accepted;
      }
    } catch (const std::exception &) {
      ++crashes;
    }
  }
  return {crashes == 0 && unanswered == 0 && errors + accepted == 1'000'000,
          "1000000 messages: " + std::to_string(accepted) + " accepted, " + std::to_string(errors) +
              " answered with Error, " + std::to_string(crashes) + " exceptions"};
}

} // namespace

int main(int argc, char **argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path to hapticsim binary>\n";
    return 2;
  }
  cli = argv[1];
  scratch = std::filesystem::temp_directory_path() / "hapticsim_acceptance";
  std::filesystem::remove_all(scratch);
  std::filesystem::create_directories(scratch);

  report("force oracle equivalence", oracle_equivalence);
  report("contact gate", contact_gate);
  report("pop-through", pop_through);
  report("passivity", passivity);
  report("geometry", geometry);
  report("replay determinism", determinism);
  report("full-procedure replay", full_procedure);
  report("scenegraph soundness", scenegraph_soundness);
  report("servo timing", servo_timing, true);
  report("protocol robustness", protocol_robustness);

  std::filesystem::remove_all(scratch);
  std::cout << failures << " hard failures, " << soft_failures << " soft gate failures" << std::endl;
  return failures;
}
