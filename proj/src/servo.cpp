#include "hapticsim/servo.hpp"

#include "hapticsim/errors.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <thread>

namespace hapticsim {

namespace {

// Shortest round-trip decimal, always with a fractional part ("2.0", not "2").
std::string seconds_text(double t) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, t);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".en") == std::string::npos)
    s += ".0";
  return s;
}

} // namespace

void validate_servo_config(const ServoConfig &config) {
  if (!std::isfinite(config.dt) || !(config.dt > 0.0))
    throw ConfigError("dt must be > 0");
  if (!(config.alpha > 0.0 && config.alpha <= 1.0))
    throw ConfigError("alpha must be in (0, 1]");
  if (!std::isfinite(config.force.v_deadband) || config.force.v_deadband < 0.0)
    throw ConfigError("v_deadband must be ≥ 0");
  if (!std::isfinite(config.force.f_max) || !(config.force.f_max > 0.0))
    throw ConfigError("f_max must be > 0");
}

void validate_trajectory(const Trajectory &trajectory) {
  if (trajectory.points.empty())
    throw InputError("trajectory is empty");
  for (std::size_t i = 0; i < trajectory.points.size(); ++i) {
    const auto &p = trajectory.points[i];
    if (!std::isfinite(p.t) || !is_finite(p.position))
      throw InputError("trajectory point " + std::to_string(i) + " is not finite");
    if (i > 0 && p.t < trajectory.points[i - 1].t)
      throw InputError("trajectory time goes backwards at point " + std::to_string(i));
  }
}

Vec3 interpolate(const Trajectory &trajectory, double t, std::size_t *hint) {
  const auto &pts = trajectory.points;
  if (pts.empty() || t < pts.front().t || t > pts.back().t)
    throw InputError("time outside trajectory span");
  std::size_t i = hint ? *hint : 0;
  if (i >= pts.size() || pts[i].t > t)
    i = 0;
  // Advance to the last keyframe with time <= t.
  while (i + 1 < pts.size() && pts[i + 1].t <= t)
    ++i;
  if (hint)
    *hint = i;
  if (i + 1 == pts.size() || pts[i].t == t)
    return pts[i].position;
  const auto &a = pts[i];
  const auto &b = pts[i + 1];
  const double s = (t - a.t) / (b.t - a.t);
  return a.position + s * (b.position - a.position);
}

SimulatedDevice::SimulatedDevice(Trajectory trajectory, double dt)
    : trajectory_(std::move(trajectory)), dt_(dt) {
  validate_trajectory(trajectory_);
  if (!(dt > 0.0))
    throw InputError("SimulatedDevice: dt must be > 0");
  if (trajectory_.points.front().t > 0.0)
    throw InputError("trajectory must start at t <= 0");
  end_time_ = trajectory_.points.back().t;
}

SimulatedDevice::SimulatedDevice(Path path, double end_time, double dt)
    : path_(std::move(path)), end_time_(end_time), dt_(dt) {
  if (!path_)
    throw InputError("SimulatedDevice: empty path");
  if (!(dt > 0.0))
    throw InputError("SimulatedDevice: dt must be > 0");
}

StylusPose SimulatedDevice::read_pose() {
  const double t = static_cast<double>(cursor_) * dt_;
  if (t > end_time_)
    throw InputError("trajectory exhausted at t=" + seconds_text(end_time_));
  ++cursor_;
  if (path_)
    return {t, path_(t)};
  return {t, interpolate(trajectory_, t, &segment_)};
}

bool SimulatedDevice::write_force(const Vec3 &force) {
  last_force_ = force;
  return true;
}

StylusPose PushedPoseDevice::read_pose() {
  const double t = static_cast<double>(cursor_++) * dt_;
  return {t, position_};
}

bool PushedPoseDevice::write_force(const Vec3 &force) {
  last_force_ = force;
  return true;
}

TickOutput tick(const Scene &scene, const ServoState &prev, const StylusPose &pose,
                const ServoConfig &config) {
  TickOutput out;
  ServoState &next = out.state;
  TickRecord &rec = out.record;

  const Vec3 prev_position = prev.primed ? prev.prev_position : pose.position;
  const Vec3 velocity =
      estimate_velocity(prev.prev_velocity, prev_position, pose.position, config.dt, config.alpha);

  rec.index = prev.next_index;
  rec.sample = {pose.time, pose.position, velocity};
  rec.contact = resolve_contact(scene, pose.position);

  // Every organ keeps its own puncture state; only the reported organ renders force.
  std::optional<PhaseEvent> reported_end;
  for (const auto &organ : scene.organs) {
    const auto it = prev.phases.find(organ.organ_id);
    const Phase before = it == prev.phases.end() ? Phase::Free : it->second;
    const double depth = -signed_distance(organ.shape, pose.position);
    const PhaseStep step = step_phase(before, depth, organ.material);
    if (step.phase != Phase::Free)
      next.phases.emplace(organ.organ_id, step.phase);
    if (rec.contact.organ_id && *rec.contact.organ_id == organ.organ_id) {
      rec.contact.phase = step.phase;
      rec.event = step.event;
    } else if (!rec.contact.organ_id && prev.last_organ && *prev.last_organ == organ.organ_id) {
      reported_end = step.event;
    }
  }
  if (!rec.contact.organ_id)
    rec.event = reported_end;

  if (rec.contact.organ_id) {
    const OrganModel *organ = scene.find(*rec.contact.organ_id);
    rec.force = compute_force(organ->material, rec.contact, velocity, config.force);
  } else {
    rec.force = compute_force(HapticMaterial{}, rec.contact, velocity, config.force);
  }

  next.next_index = prev.next_index + 1;
  next.primed = true;
  next.prev_position = pose.position;
  next.prev_velocity = velocity;
  next.last_organ = rec.contact.organ_id;
  return out;
}

TickStats summarize(std::vector<double> lateness, std::uint64_t forces_clamped, double dt) {
  TickStats s;
  s.count = lateness.size();
  s.forces_clamped = forces_clamped;
  if (lateness.empty())
    return s;
  s.deadline_misses = static_cast<std::uint64_t>(
      std::count_if(lateness.begin(), lateness.end(), [dt](double l) { return l > dt; }));
  std::sort(lateness.begin(), lateness.end());
  const auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(lateness.size())));
    return lateness[std::clamp<std::size_t>(k, 1, lateness.size()) - 1];
  };
  s.p50_lateness = rank(0.50);
  s.p99_lateness = rank(0.99);
  s.max_lateness = lateness.back();
  return s;
}

std::uint64_t tick_count(double duration, double dt) {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw InputError("duration must be > 0");
  if (!(dt > 0.0))
    throw InputError("dt must be > 0");
  return static_cast<std::uint64_t>(std::floor(duration / dt + 1e-9));
}

namespace {

void check_coverage(const DeviceAdapter &device, std::uint64_t ticks, double dt) {
  const auto until = device.available_until();
  if (!until || ticks == 0)
    return;
  const double last = static_cast<double>(ticks - 1) * dt;
  if (*until < last) {
    throw InputError("trajectory exhausted at t=" + seconds_text(*until) +
                     " (run needs samples up to t=" + seconds_text(last) + ", short by " +
                     seconds_text(std::round((last - *until) * 1e6) / 1e6) + " s)");
  }
}

} // namespace

TickStats run_replay(const Scene &scene, DeviceAdapter &device, const ServoConfig &config,
                     double duration, const TickSink &sink) {
  validate_servo_config(config);
  const std::uint64_t n = tick_count(duration, config.dt);
  check_coverage(device, n, config.dt);

  ServoState state;
  std::uint64_t clamped = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    auto out = tick(scene, state, device.read_pose(), config);
    device.write_force(out.record.force.total);
    clamped += out.record.force.clamped ? 1 : 0;
    if (sink)
      sink(out.record);
    state = std::move(out.state);
  }
  return summarize(std::vector<double>(n, 0.0), clamped, config.dt);
}

ReplayResult run_replay(const Scene &scene, DeviceAdapter &device, const ServoConfig &config,
                        double duration) {
  ReplayResult result;
  result.stats = run_replay(scene, device, config, duration,
                            [&](const TickRecord &r) { result.records.push_back(r); });
  return result;
}

TickStats bench_loop(const Scene &scene, DeviceAdapter &device, const ServoConfig &config,
                     double duration, const TickSink &sink) {
  using clock = std::chrono::steady_clock;
  validate_servo_config(config);
  const std::uint64_t n = tick_count(duration, config.dt);
  check_coverage(device, n, config.dt);

  const auto period = std::chrono::duration<double>(config.dt);
  // Sleep coarse, then spin the last stretch before each slot.
  const auto spin_window = std::chrono::microseconds(200);
  std::vector<double> lateness;
  lateness.reserve(n);

  ServoState state;
  std::uint64_t clamped = 0;
  const auto t0 = clock::now() + std::chrono::milliseconds(1);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto slot =
        t0 + std::chrono::duration_cast<clock::duration>(period * static_cast<double>(i));
    if (clock::now() < slot - spin_window)
      std::this_thread::sleep_until(slot - spin_window);
    while (clock::now() < slot) {
    }
    auto out = tick(scene, state, device.read_pose(), config);
    device.write_force(out.record.force.total);
    const double late = std::chrono::duration<double>(clock::now() - slot).count();
    out.record.lateness = late;
    lateness.push_back(late);
    clamped += out.record.force.clamped ? 1 : 0;
    if (sink)
      sink(out.record);
    state = std::move(out.state);
  }
  return summarize(std::move(lateness), clamped, config.dt);
}

} // namespace hapticsim
