#include "pairdbn/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numbers>

#include "pairdbn/error.hpp"
#include "pairdbn/random.hpp"

namespace pairdbn {

std::string_view scenario_name(Scenario scenario) {
  return scenario == Scenario::EmergencyStop ? "emergency-stop" : "perimeter";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "perimeter") return Scenario::PerimeterMonitoring;
  if (text == "emergency-stop") return Scenario::EmergencyStop;
  throw ConfigError("unknown scenario '" + std::string(text) +
                    "' (expected perimeter or emergency-stop)");
}

void ScenarioConfig::validate() const {
  if (laps < 1) throw ConfigError("sim: laps must be >= 1");
  if (!(width_m > 0.0 && height_m > 0.0)) throw ConfigError("sim: rectangle dimensions must be > 0");
  if (!(corner_radius_m > 0.0 && 2.0 * corner_radius_m < std::min(width_m, height_m))) {
    throw ConfigError("sim: corner radius must be > 0 and fit inside the rectangle");
  }
  if (!(cruise_speed > 0.0)) throw ConfigError("sim: cruise speed must be > 0");
  if (!(corner_speed_ratio > 0.0 && corner_speed_ratio <= 1.0)) {
    throw ConfigError("sim: corner speed ratio must be in (0, 1]");
  }
  if (!(sample_rate_hz > 0.0)) throw ConfigError("sim: sample rate must be > 0");
  if (!(follower_gap_m > 0.0)) throw ConfigError("sim: follower gap must be > 0");
  if (dwell_s < 0.0) throw ConfigError("sim: dwell must be >= 0");
  if (!(start_accel > 0.0 && stop_decel > 0.0 && emergency_decel > 0.0)) {
    throw ConfigError("sim: accelerations must be > 0");
  }
  if (!(follower_max_accel > 0.0 && follower_max_decel > 0.0 && follower_max_speed > 0.0)) {
    throw ConfigError("sim: follower limits must be > 0");
  }
  if (follower_reaction_s < 0.0 || follower_gap_gain < 0.0) {
    throw ConfigError("sim: follower reaction and gain must be >= 0");
  }
  if (noise_position_m < 0.0 || noise_velocity < 0.0 || noise_steering_deg < 0.0 ||
      noise_power < 0.0 || hold_power_sigma < 0.0) {
    throw ConfigError("sim: noise sigmas must be >= 0");
  }
  if (scenario == Scenario::EmergencyStop) {
    if (!(event_time_s > dwell_s)) throw ConfigError("sim: event time must fall after the start dwell");
    if (!(stop_duration_s >= 0.0)) throw ConfigError("sim: stop duration must be >= 0");
  }
}

double ScenarioConfig::perimeter() const {
  const double r = corner_radius_m;
  return 2.0 * (width_m + height_m) - 8.0 * r + 2.0 * std::numbers::pi * r;
}

namespace {

struct Segment {
  double length;
  bool arc;
};

std::array<Segment, 8> segments(const ScenarioConfig& c) {
  const double r = c.corner_radius_m;
  const double arc = 0.5 * std::numbers::pi * r;
  return {{{c.width_m - 2.0 * r, false}, {arc, true}, {c.height_m - 2.0 * r, false}, {arc, true},
           {c.width_m - 2.0 * r, false}, {arc, true}, {c.height_m - 2.0 * r, false}, {arc, true}}};
}

double wrap(double s, double period) {
  double w = std::fmod(s, period);
  return w < 0.0 ? w + period : w;
}

// Peak straight-line speed for which the time spent on a straight equals
// length / cruise when speed rises linearly with distance from v_c to the peak
// and back.
double peak_speed(const ScenarioConfig& c) {
  const double vc = c.cruise_speed * c.corner_speed_ratio;
  if (c.corner_speed_ratio >= 1.0) return c.cruise_speed;
  // Traversal time per unit length: ln(vp/vc) / (vp - vc), decreasing in vp.
  auto pace = [vc](double vp) { return std::log(vp / vc) / (vp - vc); };
  double lo = c.cruise_speed;
  double hi = 4.0 * c.cruise_speed;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pace(mid) > 1.0 / c.cruise_speed) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double steering_deg(const ScenarioConfig& c, double curvature) {
  return std::atan(c.wheelbase_m * curvature) * 180.0 / std::numbers::pi;
}

double power_model(const ScenarioConfig& c, double v, double a) {
  return c.power_c1 * v + c.power_c2 * std::abs(a) + c.power_c3;
}

enum class Phase { Dwell, Running, Braking, Holding, Finished };

struct Vehicle {
  double s = 0.0;
  double v = 0.0;
  double a = 0.0;
  double goal = 0.0;
  bool done = false;
};

}  // namespace

PathPoint path_point(const ScenarioConfig& c, double s) {
  const double r = c.corner_radius_m;
  double remaining = wrap(s, c.perimeter());
  // Segment start poses: straight start points and headings, CCW from (r, 0).
  const double w = c.width_m;
  const double h = c.height_m;
  const std::array<std::array<double, 3>, 4> straight_start = {
      {{r, 0.0, 0.0}, {w, r, 0.5 * std::numbers::pi}, {w - r, h, std::numbers::pi},
       {0.0, h - r, 1.5 * std::numbers::pi}}};
  const auto segs = segments(c);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& seg = segs[i];
    if (remaining > seg.length && i + 1 < segs.size()) {
      remaining -= seg.length;
      continue;
    }
    const auto& start = straight_start[i / 2];
    const double heading = start[2];
    PathPoint p;
    if (!seg.arc) {
      p.x = start[0] + remaining * std::cos(heading);
      p.y = start[1] + remaining * std::sin(heading);
      p.heading = heading;
      p.curvature = 0.0;
    } else {
      // Arc after straight i/2, turning left around a centre one radius inward.
      const double length = segs[i - 1].length;
      const double ex = start[0] + length * std::cos(heading);
      const double ey = start[1] + length * std::sin(heading);
      const double cx = ex - r * std::sin(heading);
      const double cy = ey + r * std::cos(heading);
      const double phi = remaining / r;
      p.heading = heading + phi;
      p.x = cx + r * std::sin(p.heading);
      p.y = cy - r * std::cos(p.heading);
      p.curvature = 1.0 / r;
    }
    p.heading = wrap(p.heading, 2.0 * std::numbers::pi);
    return p;
  }
  return {};
}

double rectangle_cross_track(const ScenarioConfig& c, double x, double y) {
  const double dx = std::min(std::abs(x), std::abs(x - c.width_m));
  const double dy = std::min(std::abs(y), std::abs(y - c.height_m));
  return std::min(dx, dy);
}

double profile_speed(const ScenarioConfig& c, double s) {
  const double vc = c.cruise_speed * c.corner_speed_ratio;
  const double vp = peak_speed(c);
  double remaining = wrap(s, c.perimeter());
  for (const auto& seg : segments(c)) {
    if (remaining <= seg.length) {
      if (seg.arc) return vc;
      const double u = remaining / seg.length;
      return vc + (vp - vc) * (1.0 - std::abs(2.0 * u - 1.0));
    }
    remaining -= seg.length;
  }
  return vc;
}

SimulationResult simulate(const ScenarioConfig& config) {
  config.validate();
  const ScenarioConfig& c = config;
  const bool emergency = c.scenario == Scenario::EmergencyStop;

  constexpr int kSubsteps = 10;
  const double sample_dt = 1.0 / c.sample_rate_hz;
  const double dt = sample_dt / kSubsteps;
  const auto sample_ns = static_cast<Timestamp>(std::llround(sample_dt * kNanosPerSecond));
  const auto delay_steps = static_cast<std::size_t>(std::llround(c.follower_reaction_s / dt));

  Vehicle leader;
  leader.goal = c.laps * c.perimeter();
  Vehicle follower;
  follower.s = -c.follower_gap_m;
  follower.goal = leader.goal - c.follower_gap_m;

  Phase phase = c.dwell_s > 0.0 ? Phase::Dwell : Phase::Running;
  bool event_fired = false;
  double hold_until = 0.0;
  double finished_at = -1.0;
  // What the follower perceives of the leader: speed and gap, one reaction time late.
  std::deque<double> leader_history(delay_steps + 1, 0.0);
  std::deque<double> gap_history(delay_steps + 1, c.follower_gap_m);

  Rng rng(c.seed);
  SimulationResult result;
  const double max_duration = 100.0 * (c.laps * c.perimeter() / c.cruise_speed + c.stop_duration_s + 10.0);

  auto record = [&](long k, double t) {
    const Timestamp ts = c.start_time_ns + k * sample_ns;
    const bool holding = phase == Phase::Holding;
    for (int which = 0; which < 2; ++which) {
      const Vehicle& veh = which == 0 ? leader : follower;
      const PathPoint p = path_point(c, veh.s);
      TruthSample truth;
      truth.timestamp_ns = ts;
      truth.x = p.x;
      truth.y = p.y;
      truth.heading = p.heading;
      truth.path_position = veh.s;
      truth.velocity = veh.v;
      truth.acceleration = veh.a;
      truth.steering_deg = steering_deg(c, p.curvature);
      const bool hold = which == 0 && holding;
      truth.power = hold ? c.hold_power : power_model(c, veh.v, veh.a);

      TelemetryFrame frame;
      frame.timestamp_ns = ts;
      frame.vehicle_id = which == 0 ? kLeaderId : kFollowerId;
      frame.channels["x"] = truth.x + rng.normal(0.0, c.noise_position_m);
      frame.channels["y"] = truth.y + rng.normal(0.0, c.noise_position_m);
      frame.channels["steering"] = truth.steering_deg + rng.normal(0.0, c.noise_steering_deg);
      frame.channels["velocity"] = truth.velocity + rng.normal(0.0, c.noise_velocity);
      const double sigma = hold ? c.hold_power_sigma : c.noise_power;
      frame.channels["power"] = std::max(0.0, truth.power + rng.normal(0.0, sigma));

      if (which == 0) {
        result.truth.leader.push_back(truth);
        result.leader.push_back(std::move(frame));
      } else {
        result.truth.follower.push_back(truth);
        result.follower.push_back(std::move(frame));
      }
    }
    (void)t;
  };

  long sample = 0;
  double t = 0.0;
  record(sample, t);
  while (true) {
    for (int sub = 0; sub < kSubsteps; ++sub) {
      const double now = t + (sub + 1) * dt;
      // Leader.
      double v_next = leader.v;
      switch (phase) {
        case Phase::Dwell:
          v_next = 0.0;
          if (now >= c.dwell_s) phase = Phase::Running;
          break;
        case Phase::Running: {
          if (emergency && !event_fired && now >= c.event_time_s) {
            event_fired = true;
            phase = Phase::Braking;
            v_next = std::max(0.0, leader.v - c.emergency_decel * dt);
            break;
          }
          const double stopping = std::sqrt(2.0 * c.stop_decel * std::max(0.0, leader.goal - leader.s));
          const double target = std::min(profile_speed(c, leader.s), stopping);
          v_next = std::min(target, leader.v + c.start_accel * dt);
          break;
        }
        case Phase::Braking:
          v_next = std::max(0.0, leader.v - c.emergency_decel * dt);
          if (v_next == 0.0) {
            phase = Phase::Holding;
            hold_until = now + c.stop_duration_s;
          }
          break;
        case Phase::Holding:
          v_next = 0.0;
          if (now >= hold_until) phase = Phase::Running;
          break;
        case Phase::Finished:
          v_next = 0.0;
          break;
      }
      leader.a = (v_next - leader.v) / dt;
      leader.v = v_next;
      leader.s = std::min(leader.s + leader.v * dt, leader.goal);
      if (!leader.done && phase == Phase::Running && leader.goal - leader.s < 1e-9) {
        leader.done = true;
        leader.v = 0.0;
        phase = Phase::Finished;
      }

      // Follower: delayed leader speed plus a proportional gap correction.
      leader_history.push_back(leader.v);
      leader_history.pop_front();
      gap_history.push_back(leader.s - follower.s);
      gap_history.pop_front();
      if (!follower.done) {
        const double gap_error = gap_history.front() - c.follower_gap_m;
        const double stopping =
            std::sqrt(2.0 * c.stop_decel * std::max(0.0, follower.goal - follower.s));
        double target = leader_history.front() + c.follower_gap_gain * gap_error;
        target = std::clamp(std::min(target, stopping), 0.0, c.follower_max_speed);
        const double f_next = std::clamp(target, follower.v - c.follower_max_decel * dt,
                                         follower.v + c.follower_max_accel * dt);
        follower.a = (f_next - follower.v) / dt;
        follower.v = f_next;
        follower.s = std::min(follower.s + follower.v * dt, follower.goal);
        if (follower.goal - follower.s < 1e-9 && leader.done) {
          follower.done = true;
          follower.v = 0.0;
        }
      } else {
        follower.a = 0.0;
      }
    }
    t += sample_dt;
    ++sample;
    if (leader.done && follower.done && finished_at < 0.0) finished_at = t;
    record(sample, t);
    if (finished_at >= 0.0 && t >= finished_at + c.dwell_s - 1e-9) break;
    if (t > max_duration) throw DataError("sim: vehicles did not finish the course");
  }

  if (emergency && !event_fired) {
    throw ConfigError("sim: event time " + std::to_string(c.event_time_s) +
                      " s lies beyond the end of the simulation");
  }
  result.sample_count = result.leader.size();

  if (emergency) {
    const double threshold = 0.05 * c.cruise_speed;
    constexpr Timestamp kEventSearchNs = 30'000'000'000;
    const Timestamp event_ns =
        c.start_time_ns + static_cast<Timestamp>(std::llround(c.event_time_s * kNanosPerSecond));
    auto window_for = [&](const std::vector<TruthSample>& truth, const std::string& id) {
      std::size_t k = 0;
      while (k < truth.size() && !(truth[k].timestamp_ns >= event_ns && truth[k].velocity < threshold)) ++k;
      // A run that starts long after the event is the end-of-course stop.
      if (k == truth.size() || truth[k].timestamp_ns - event_ns > kEventSearchNs) return;
      std::size_t end = k;
      while (end + 1 < truth.size() && truth[end + 1].velocity < threshold) ++end;
      result.truth.windows.push_back({id, truth[k].timestamp_ns, truth[end].timestamp_ns, "emergency_stop"});
    };
    window_for(result.truth.leader, kLeaderId);
    window_for(result.truth.follower, kFollowerId);
  }
  return result;
}

}  // namespace pairdbn
