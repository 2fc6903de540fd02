#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ctce/config.hpp"
#include "ctce/geometry.hpp"

namespace ctce {

constexpr double kFramePeriod = 0.1;  // 10 Hz

struct VelocityChange {
  uint32_t frame_id;
  Vec3 velocity;
};

struct ObjectTrack {
  int object_id = 0;
  int class_id = 0;
  Vec3 dims = Vec3::Ones();
  uint32_t spawn_frame = 0;
  uint32_t despawn_frame = 0;  // exclusive
  Vec3 initial_center = Vec3::Zero();
  Vec3 initial_velocity = Vec3::Zero();
  std::vector<VelocityChange> velocity_changes;  // ascending frame_id
  double initial_yaw = 0.0;                      // used while stationary
};

enum class AgentKind { ego, roadside };

struct SensingSpec {
  double max_range = 51.2;        // square half-width, metres
  double fov_half_angle = M_PI;   // radians; pi = omnidirectional
  bool occlusion_enabled = true;
};

struct AgentSpec {
  int agent_id = 0;
  AgentKind kind = AgentKind::ego;
  std::vector<Pose> pose_track;  // sensor -> world, one per frame
  SensingSpec sensing;

  const Pose& pose_at(uint32_t frame_id) const { return pose_track.at(frame_id); }
};

struct Observation {
  Box3D box;               // in the observing agent's sensor frame
  int true_object_id = -1; // diagnostics only; -1 for false positives
  double confidence = 0.0;
};

struct NoiseModel {
  double pos_sigma = 0.3;
  double dims_sigma = 0.05;
  double yaw_sigma = 0.05;
  double conf_sigma = 0.05;
  double miss_rate = 0.1;
  double fp_rate = 0.2;  // expected false positives per frame
};

struct ScenarioConfig {
  uint64_t seed = 1;
  uint32_t frames = 20;
  int num_objects = 12;
  double region = 45.0;  // spawn half-width, metres
  double vel_change_prob = 0.3;
  double spawn_late_prob = 0.15;
  NoiseModel noise;
  double ego_range = 51.2;
  double ego_speed = 5.0;
  double ego_height = 1.5;
  bool ego_occlusion = true;
  double roadside_range = 80.0;
  double roadside_height = 10.0;
  bool roadside_occlusion = false;
  int num_classes = 3;

  void validate() const;
  KeyValueFile to_kv() const;
  static ScenarioConfig from_kv(const KeyValueFile& kv);
};

struct Scenario {
  ScenarioConfig config;
  std::vector<ObjectTrack> tracks;
  std::vector<AgentSpec> agents;  // [0] = roadside, [1] = ego

  const AgentSpec& roadside() const { return agents.at(0); }
  const AgentSpec& ego() const { return agents.at(1); }
};

Scenario generate_scenario(const ScenarioConfig& cfg);

// World-frame boxes of all objects alive at frame_id (per-frame Euler integration).
std::vector<Box3D> ground_truth_at(const std::vector<ObjectTrack>& tracks, uint32_t frame_id);

// Range + field-of-view + (optionally) angular-footprint occlusion at sensor height.
std::vector<int> visible_objects(const AgentSpec& agent, const std::vector<Box3D>& boxes,
                                 uint32_t frame_id);

std::vector<Observation> oracle_detect(const AgentSpec& agent, const std::vector<Box3D>& visible,
                                       uint32_t frame_id, const NoiseModel& noise,
                                       std::mt19937_64& rng);

// Deterministic per (scenario seed, agent, frame) observation stream.
std::vector<Observation> observe(const Scenario& scenario, const AgentSpec& agent,
                                 uint32_t frame_id);

// Typical dims for a class id (car / pedestrian / cyclist cycle).
Vec3 class_dims(int class_id);

std::string observations_to_json_line(uint32_t frame_id, const std::vector<Observation>& obs);

}  // namespace ctce
