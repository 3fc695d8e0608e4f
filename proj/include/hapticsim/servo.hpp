#pragma once

#include "hapticsim/geometry.hpp"
#include "hapticsim/haptic_core.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hapticsim {

struct ServoConfig {
  double dt = 0.001;  // s
  double alpha = 0.2; // velocity smoothing
  ForceParams force;
};

/// Throws ConfigError on dt <= 0, alpha outside (0, 1], v_deadband < 0 or f_max <= 0.
void validate_servo_config(const ServoConfig &config);

/// Raw stylus reading: tip position at a device timestamp.
struct StylusPose {
  double time = 0.0;
  Vec3 position;
};

struct DeviceCapabilities {
  double max_force = 3.3; // N
  Vec3 workspace_min{-0.08, -0.06, -0.035};
  Vec3 workspace_max{0.08, 0.06, 0.035};
};

/// Read-pose / write-force contract of a stylus.
class DeviceAdapter {
public:
  virtual ~DeviceAdapter() = default;
  virtual StylusPose read_pose() = 0;
  /// Returns false if the device refused the command.
  virtual bool write_force(const Vec3 &force) = 0;
  virtual DeviceCapabilities capabilities() const = 0;
  /// Latest time this device can report, if bounded.
  virtual std::optional<double> available_until() const { return std::nullopt; }
};

struct TrajectoryPoint {
  double t = 0.0;
  Vec3 position;
};

/// Timed keyframes, non-decreasing in t.
struct Trajectory {
  std::vector<TrajectoryPoint> points;
};

/// Throws InputError when empty, non-finite, or not time-ordered.
void validate_trajectory(const Trajectory &trajectory);

/// Position along the keyframes at time t (linear interpolation). `hint` is a segment
/// cursor reused across monotone queries. Throws InputError outside the covered span.
Vec3 interpolate(const Trajectory &trajectory, double t, std::size_t *hint = nullptr);

/// Hardware-free stylus: emits samples at exactly i*dt from a recorded trajectory or a
/// scripted path p(t).
class SimulatedDevice final : public DeviceAdapter {
public:
  using Path = std::function<Vec3(double)>;

  SimulatedDevice(Trajectory trajectory, double dt);
  SimulatedDevice(Path path, double end_time, double dt);

  StylusPose read_pose() override;
  bool write_force(const Vec3 &force) override;
  DeviceCapabilities capabilities() const override { return {}; }
  std::optional<double> available_until() const override { return end_time_; }

  const Vec3 &last_force() const { return last_force_; }
  std::uint64_t cursor() const { return cursor_; }

private:
  Trajectory trajectory_;
  Path path_;
  double end_time_ = 0.0;
  double dt_ = 0.0;
  std::uint64_t cursor_ = 0;
  std::size_t segment_ = 0;
  Vec3 last_force_;
};

/// Sample-and-hold device fed by pushed poses (the interactive client acts as the stylus).
class PushedPoseDevice final : public DeviceAdapter {
public:
  explicit PushedPoseDevice(double dt) : dt_(dt) {}

  void push(const Vec3 &position) {
    position_ = position;
    has_pose_ = true;
  }
  bool has_pose() const { return has_pose_; }

  StylusPose read_pose() override;
  bool write_force(const Vec3 &force) override;
  DeviceCapabilities capabilities() const override { return {}; }

  const Vec3 &last_force() const { return last_force_; }

private:
  double dt_;
  std::uint64_t cursor_ = 0;
  bool has_pose_ = false;
  Vec3 position_;
  Vec3 last_force_;
};

/// Everything tick() needs from the previous tick.
struct ServoState {
  std::uint64_t next_index = 0;
  bool primed = false;
  Vec3 prev_position;
  Vec3 prev_velocity;
  std::map<std::string, Phase, std::less<>> phases; // per organ; absent means Free
  std::optional<std::string> last_organ;

  friend bool operator==(const ServoState &, const ServoState &) = default;
};

struct TickRecord {
  std::uint64_t index = 0;
  StylusSample sample;
  ContactState contact;
  ForceBreakdown force;
  std::optional<PhaseEvent> event;
  double lateness = 0.0; // s past the scheduled slot start; 0 in replay
};

struct TickOutput {
  ServoState state;
  TickRecord record;
};

/// One servo step: velocity estimate, contact, phase, force, clamp. Pure.
TickOutput tick(const Scene &scene, const ServoState &prev, const StylusPose &pose,
                const ServoConfig &config);

struct TickStats {
  std::uint64_t count = 0;
  std::uint64_t deadline_misses = 0; // lateness > dt
  double p50_lateness = 0.0;
  double p99_lateness = 0.0;
  double max_lateness = 0.0;
  std::uint64_t forces_clamped = 0;
};

/// Nearest-rank percentiles over the lateness samples.
TickStats summarize(std::vector<double> lateness, std::uint64_t forces_clamped, double dt);

using TickSink = std::function<void(const TickRecord &)>;

/// Number of ticks for `duration` at `dt`: floor(duration / dt), tolerant of rounding.
std::uint64_t tick_count(double duration, double dt);

/// Logically clocked run: ticks i = 0..n-1 at t = i*dt, each record handed to `sink`.
/// Throws InputError if duration <= 0 or the device runs out before the last tick.
TickStats run_replay(const Scene &scene, DeviceAdapter &device, const ServoConfig &config,
                     double duration, const TickSink &sink);

struct ReplayResult {
  std::vector<TickRecord> records;
  TickStats stats;
};

ReplayResult run_replay(const Scene &scene, DeviceAdapter &device, const ServoConfig &config,
                        double duration);

/// Wall-clock paced run against the absolute schedule t0 + i*dt.
TickStats bench_loop(const Scene &scene, DeviceAdapter &device, const ServoConfig &config,
                     double duration, const TickSink &sink = {});

} // namespace hapticsim
