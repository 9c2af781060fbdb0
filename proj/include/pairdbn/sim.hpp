#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pairdbn/events.hpp"
#include "pairdbn/telemetry.hpp"
#include "pairdbn/types.hpp"

namespace pairdbn {

enum class Scenario { PerimeterMonitoring, EmergencyStop };

std::string_view scenario_name(Scenario scenario);
/// Accepts "perimeter" and "emergency-stop".
Scenario parse_scenario(std::string_view text);

inline const std::string kLeaderId = "leader";
inline const std::string kFollowerId = "follower";

/// Leader-follower platooning around a rectangle with rounded corners.
struct ScenarioConfig {
  Scenario scenario = Scenario::PerimeterMonitoring;
  int laps = 4;
  double width_m = 40.0;
  double height_m = 20.0;
  double corner_radius_m = 1.0;
  /// Mean speed on the straights.
  double cruise_speed = 1.5;
  /// Speed through the corners as a fraction of cruise speed.
  double corner_speed_ratio = 0.8;
  double sample_rate_hz = 10.0;
  double follower_gap_m = 6.0;
  double dwell_s = 1.0;
  double start_accel = 0.5;
  double stop_decel = 0.5;
  double wheelbase_m = 1.8;

  // Emergency stop.
  double event_time_s = 138.0;
  double stop_duration_s = 8.0;
  double emergency_decel = 1.5;
  /// Mean and spread of the drive's power draw while it holds the vehicle
  /// at standstill after an emergency stop.
  double hold_power = 25.0;
  double hold_power_sigma = 20.0;

  // Follower controller.
  double follower_reaction_s = 0.5;
  double follower_gap_gain = 0.5;
  double follower_max_accel = 1.0;
  double follower_max_decel = 1.0;
  double follower_max_speed = 2.5;

  // Power model p = c1 v + c2 |dv/dt| + c3.
  double power_c1 = 30.0;
  double power_c2 = 80.0;
  double power_c3 = 5.0;

  double noise_position_m = 0.02;
  double noise_velocity = 0.02;
  double noise_steering_deg = 0.5;
  double noise_power = 1.0;

  std::uint64_t seed = 1;
  Timestamp start_time_ns = 1'600'000'000'000'000'000;

  void validate() const;
  double perimeter() const;
};

/// Noise-free state of one vehicle at one sample instant.
struct TruthSample {
  Timestamp timestamp_ns = 0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double path_position = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
  double steering_deg = 0.0;
  double power = 0.0;
};

struct GroundTruth {
  std::vector<TruthSample> leader;
  std::vector<TruthSample> follower;
  /// Stop windows (velocity below 5% of cruise), one per vehicle.
  std::vector<EventWindow> windows;
};

struct SimulationResult {
  TelemetryStream leader;
  TelemetryStream follower;
  GroundTruth truth;
  /// Frames emitted per vehicle.
  std::size_t sample_count = 0;
};

/// Deterministic for a fixed config (including seed).
SimulationResult simulate(const ScenarioConfig& config);

/// Closed-path geometry used by the simulator.
struct PathPoint {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double curvature = 0.0;
};

/// Pose at arc length `s` (wrapped) along the rounded rectangle, starting at
/// the beginning of the bottom straight and running counter-clockwise.
PathPoint path_point(const ScenarioConfig& config, double s);

/// Distance from (x, y) to the nearest side of the (sharp-cornered) rectangle.
double rectangle_cross_track(const ScenarioConfig& config, double x, double y);

/// Leader's nominal speed at arc length `s`: constant through the corners and
/// a symmetric accelerate/decelerate profile on each straight.
double profile_speed(const ScenarioConfig& config, double s);

}  // namespace pairdbn
