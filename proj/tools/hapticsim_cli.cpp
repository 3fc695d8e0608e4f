// hapticsim command-line interface.
//
//   hapticsim run      --config C --trajectory T --out DIR [--events E] [--duration S]
//   hapticsim serve    --config C --port P [--bind ADDR] [--log-dir DIR]
//   hapticsim bench    --config C --duration S [--dt S] [--trajectory T] [--realtime]
//   hapticsim validate --config C
//
// Exit codes: 0 success, 1 diagnostics / invalid input, 2 I/O errors.

#include "hapticsim/config.hpp"
#include "hapticsim/errors.hpp"
#include "hapticsim/records.hpp"
#include "hapticsim/replay.hpp"
#include "hapticsim/server.hpp"
#include "hapticsim/servo.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <sched.h>
#include <sys/mman.h>
#include <cmath>
#include <iostream>
#include <numbers>
#include <optional>

namespace {

using namespace hapticsim;

constexpr int kOk = 0;
constexpr int kDiagnostics = 1;
constexpr int kIoError = 2;

std::optional<Bundle> load_or_report(const std::string &path, int &exit_code) {
  auto parsed = load_config(path);
  for (const auto &d : parsed.diagnostics)
    std::cerr << d.str() << '\n';
  if (parsed.ok())
    return std::move(parsed.value);
  exit_code = parsed.io_failure() ? kIoError : kDiagnostics;
  return std::nullopt;
}

int cmd_validate(const std::string &config) {
  int code = kOk;
  const auto bundle = load_or_report(config, code);
  if (!bundle)
    return code;
  std::cout << "ok: " << bundle->scene.organs.size() << " organs, "
            << bundle->procedure.nodes.size() << " actions, " << bundle->procedure.edges.size()
            << " edges\n";
  return kOk;
}

int cmd_run(const std::string &config, const std::string &trajectory_file,
            const std::string &events_file, const std::string &out_dir,
            std::optional<double> duration) {
  int code = kOk;
  const auto bundle = load_or_report(config, code);
  if (!bundle)
    return code;
  try {
    const Trajectory trajectory = load_trajectory(trajectory_file);
    std::vector<ScriptedEvent> events;
    if (!events_file.empty())
      events = load_event_script(events_file);
    const auto outcome = replay_to_directory(*bundle, trajectory, events, out_dir, duration);
    Json summary = to_json(outcome.stats, bundle->config.servo.dt);
    summary["procedure_complete"] = outcome.complete;
    summary["out"] = out_dir;
    std::cout << summary.dump() << '\n';
    return kOk;
  } catch (const IoError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::invalid_argument &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDiagnostics;
  }
}

// Best effort: a 1 kHz loop on a shared box mostly loses to the scheduler.
bool enter_realtime() {
  sched_param p{};
  p.sched_priority = sched_get_priority_max(SCHED_FIFO) - 1;
  if (sched_setscheduler(0, SCHED_FIFO, &p) != 0)
    return false;
  mlockall(MCL_CURRENT | MCL_FUTURE);
  return true;
}

int cmd_bench(const std::string &config, double duration, std::optional<double> dt,
              const std::string &trajectory_file, bool realtime) {
  int code = kOk;
  auto bundle = load_or_report(config, code);
  if (!bundle)
    return code;
  if (realtime && !enter_realtime())
    std::cerr << "warning: SCHED_FIFO not permitted, running at normal priority\n";
  if (dt)
    bundle->config.servo.dt = *dt;
  try {
    const double step = bundle->config.servo.dt;
    std::optional<SimulatedDevice> device;
    if (!trajectory_file.empty()) {
      device.emplace(load_trajectory(trajectory_file), step);
    } else {
      // Slow probing sweep that dips in and out of whatever sits under the origin.
      device.emplace(
          [](double t) {
            const double w = 2.0 * std::numbers::pi * 0.25;
            return Vec3{0.02 * std::sin(w * t), 0.01 * std::sin(2.0 * w * t),
                        0.012 + 0.012 * std::cos(w * t)};
          },
          duration + step, step);
    }
    const TickStats stats = bench_loop(bundle->scene, *device, bundle->config.servo, duration);
    std::cout << to_json(stats, step).dump() << '\n';
    return kOk;
  } catch (const IoError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::invalid_argument &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDiagnostics;
  }
}

int cmd_serve(const std::string &config, std::uint16_t port, const std::string &bind,
              const std::string &log_dir) {
  int code = kOk;
  auto bundle = load_or_report(config, code);
  if (!bundle)
    return code;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ServerOptions options;
  options.port = port;
  options.bind_address = bind;
  options.log_dir = log_dir;
  Server server(std::move(*bundle), options);
  try {
    server.start();
  } catch (const IoError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  std::cout << "listening on " << bind << ":" << server.port() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Haptic surgery simulation engine"};
  app.require_subcommand(1);

  std::string config;
  std::string trajectory;
  std::string events;
  std::string out_dir;
  std::optional<double> duration;
  double bench_duration = 10.0;
  std::optional<double> dt;
  bool realtime = false;
  std::uint16_t port = 7600;
  std::string bind = "127.0.0.1";
  std::string log_dir = "sessions";

  auto *run = app.add_subcommand("run", "Replay a recorded trajectory (logically clocked)");
  run->add_option("--config", config, "Session config file")->required();
  run->add_option("--trajectory", trajectory, "Trajectory file, one {t,x,y,z} per line")
      ->required();
  run->add_option("--out", out_dir, "Output directory for logs")->required();
  run->add_option("--events", events, "Scripted tool/world events, one per line");
  run->add_option("--duration", duration, "Seconds to run (default: whole trajectory)");

  auto *serve = app.add_subcommand("serve", "Serve interactive sessions");
  serve->add_option("--config", config, "Session config file")->required();
  serve->add_option("--port", port, "TCP port (raw JSON lines and WebSocket)");
  serve->add_option("--bind", bind, "Bind address");
  serve->add_option("--log-dir", log_dir, "Directory for per-session logs");

  auto *bench = app.add_subcommand("bench", "Wall-clock paced servo timing benchmark");
  bench->add_option("--config", config, "Session config file")->required();
  bench->add_option("--duration", bench_duration, "Seconds to run")->required();
  bench->add_option("--dt", dt, "Override servo period (s)");
  bench->add_option("--trajectory", trajectory, "Drive from a trajectory instead of the probe");
  bench->add_flag("--realtime", realtime, "Run the loop under SCHED_FIFO if permitted");

  auto *validate = app.add_subcommand("validate", "Parse config and report diagnostics");
  validate->add_option("--config", config, "Session config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kDiagnostics;
  }

  if (*run)
    return cmd_run(config, trajectory, events, out_dir, duration);
  if (*serve)
    return cmd_serve(config, port, bind, log_dir);
  if (*bench)
    return cmd_bench(config, bench_duration, dt, trajectory, realtime);
  return cmd_validate(config);
}
