#include "ctce/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ctce {

namespace {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t stream_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return mix64(seed ^ mix64(a * 0x100000001b3ull + 0x7f4a) ^ mix64(b + 0x51ed));
}

constexpr double kMaxSpeed[3] = {12.0, 1.5, 6.0};

}  // namespace

Vec3 class_dims(int class_id) {
  switch (class_id % 3) {
    case 0: return Vec3(4.5, 1.9, 1.6);   // car
    case 1: return Vec3(0.6, 0.6, 1.7);   // pedestrian
    default: return Vec3(1.8, 0.6, 1.7);  // cyclist
  }
}

void ScenarioConfig::validate() const {
  if (frames == 0) throw std::invalid_argument("scenario: frames must be positive");
  if (num_objects < 0) throw std::invalid_argument("scenario: negative object count");
  if (region <= 0) throw std::invalid_argument("scenario: region must be positive");
  auto unit = [](double r, const char* what) {
    if (r < 0.0 || r > 1.0) throw std::invalid_argument(std::string("scenario: ") + what + " outside [0,1]");
  };
  unit(noise.miss_rate, "miss_rate");
  unit(vel_change_prob, "vel_change_prob");
  unit(spawn_late_prob, "spawn_late_prob");
  if (noise.pos_sigma < 0 || noise.dims_sigma < 0 || noise.yaw_sigma < 0 || noise.conf_sigma < 0 ||
      noise.fp_rate < 0)
    throw std::invalid_argument("scenario: negative noise parameter");
  if (ego_range <= 0 || roadside_range <= 0) throw std::invalid_argument("scenario: bad range");
  if (num_classes < 1 || num_classes > 3) throw std::invalid_argument("scenario: num_classes in 1..3");
}

KeyValueFile ScenarioConfig::to_kv() const {
  KeyValueFile kv;
  kv.set("seed", static_cast<int64_t>(seed));
  kv.set("frames", static_cast<int64_t>(frames));
  kv.set("num_objects", static_cast<int64_t>(num_objects));
  kv.set("region", region);
  kv.set("vel_change_prob", vel_change_prob);
  kv.set("spawn_late_prob", spawn_late_prob);
  kv.set("pos_sigma", noise.pos_sigma);
  kv.set("dims_sigma", noise.dims_sigma);
  kv.set("yaw_sigma", noise.yaw_sigma);
  kv.set("conf_sigma", noise.conf_sigma);
  kv.set("miss_rate", noise.miss_rate);
  kv.set("fp_rate", noise.fp_rate);
  kv.set("ego_range", ego_range);
  kv.set("ego_speed", ego_speed);
  kv.set("ego_height", ego_height);
  kv.set("ego_occlusion", ego_occlusion);
  kv.set("roadside_range", roadside_range);
  kv.set("roadside_height", roadside_height);
  kv.set("roadside_occlusion", roadside_occlusion);
  kv.set("num_classes", static_cast<int64_t>(num_classes));
  return kv;
}

ScenarioConfig ScenarioConfig::from_kv(const KeyValueFile& kv) {
  ScenarioConfig c;
  c.seed = static_cast<uint64_t>(kv.get_int("seed", 1));
  c.frames = static_cast<uint32_t>(kv.get_int("frames", 20));
  c.num_objects = static_cast<int>(kv.get_int("num_objects", 12));
  c.region = kv.get_double("region", 45.0);
  c.vel_change_prob = kv.get_double("vel_change_prob", 0.3);
  c.spawn_late_prob = kv.get_double("spawn_late_prob", 0.15);
  c.noise.pos_sigma = kv.get_double("pos_sigma", 0.3);
  c.noise.dims_sigma = kv.get_double("dims_sigma", 0.05);
  c.noise.yaw_sigma = kv.get_double("yaw_sigma", 0.05);
  c.noise.conf_sigma = kv.get_double("conf_sigma", 0.05);
  c.noise.miss_rate = kv.get_double("miss_rate", 0.1);
  c.noise.fp_rate = kv.get_double("fp_rate", 0.2);
  c.ego_range = kv.get_double("ego_range", 51.2);
  c.ego_speed = kv.get_double("ego_speed", 5.0);
  c.ego_height = kv.get_double("ego_height", 1.5);
  c.ego_occlusion = kv.get_bool("ego_occlusion", true);
  c.roadside_range = kv.get_double("roadside_range", 80.0);
  c.roadside_height = kv.get_double("roadside_height", 10.0);
  c.roadside_occlusion = kv.get_bool("roadside_occlusion", false);
  c.num_classes = static_cast<int>(kv.get_int("num_classes", 3));
  c.validate();
  return c;
}

Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(stream_seed(cfg.seed, 0xabcd, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> pos(-cfg.region, cfg.region);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);

  Scenario s;
  s.config = cfg;

  for (int i = 0; i < cfg.num_objects; ++i) {
    ObjectTrack t;
    t.object_id = i;
    t.class_id = static_cast<int>(rng() % static_cast<uint64_t>(cfg.num_classes));
    Vec3 base = class_dims(t.class_id);
    const double scale = 0.9 + 0.2 * unit(rng);
    t.dims = base * scale;
    t.spawn_frame = 0;
    t.despawn_frame = cfg.frames;
    if (unit(rng) < cfg.spawn_late_prob && cfg.frames > 4) {
      if (unit(rng) < 0.5)
        t.spawn_frame = 1 + static_cast<uint32_t>(rng() % (cfg.frames / 2));
      else
        t.despawn_frame = cfg.frames / 2 + static_cast<uint32_t>(rng() % (cfg.frames / 2));
    }
    t.initial_center = Vec3(pos(rng), pos(rng), t.dims.z() / 2.0);
    const double heading = angle(rng);
    const double speed = unit(rng) * kMaxSpeed[t.class_id % 3];
    t.initial_velocity = Vec3(speed * std::cos(heading), speed * std::sin(heading), 0.0);
    t.initial_yaw = heading;
    if (unit(rng) < cfg.vel_change_prob && cfg.frames > 4) {
      VelocityChange vc;
      vc.frame_id = 2 + static_cast<uint32_t>(rng() % (cfg.frames - 3));
      const double h2 = angle(rng);
      const double sp2 = unit(rng) * kMaxSpeed[t.class_id % 3];
      vc.velocity = Vec3(sp2 * std::cos(h2), sp2 * std::sin(h2), 0.0);
      t.velocity_changes.push_back(vc);
    }
    s.tracks.push_back(std::move(t));
  }

  AgentSpec roadside;
  roadside.agent_id = 0;
  roadside.kind = AgentKind::roadside;
  roadside.sensing = {cfg.roadside_range, M_PI, cfg.roadside_occlusion};
  const Pose rsu_pose = Pose::yaw_translation(0.0, Vec3(0.0, 0.0, cfg.roadside_height));
  roadside.pose_track.assign(cfg.frames, rsu_pose);

  AgentSpec ego;
  ego.agent_id = 1;
  ego.kind = AgentKind::ego;
  ego.sensing = {cfg.ego_range, M_PI, cfg.ego_occlusion};
  const double y_lane = -0.3 * cfg.region;
  for (uint32_t f = 0; f < cfg.frames; ++f) {
    const double x = -0.5 * cfg.region + cfg.ego_speed * kFramePeriod * f;
    ego.pose_track.push_back(Pose::yaw_translation(0.0, Vec3(x, y_lane, cfg.ego_height)));
  }

  s.agents.push_back(std::move(roadside));
  s.agents.push_back(std::move(ego));
  return s;
}

std::vector<Box3D> ground_truth_at(const std::vector<ObjectTrack>& tracks, uint32_t frame_id) {
  std::vector<Box3D> out;
  for (const auto& t : tracks) {
    if (frame_id < t.spawn_frame || frame_id >= t.despawn_frame) continue;
    Vec3 center = t.initial_center;
    Vec3 vel = t.initial_velocity;
    size_t next_change = 0;
    for (uint32_t f = t.spawn_frame; f < frame_id; ++f) {
      while (next_change < t.velocity_changes.size() &&
             t.velocity_changes[next_change].frame_id <= f) {
        vel = t.velocity_changes[next_change].velocity;
        ++next_change;
      }
      center += vel * kFramePeriod;
    }
    while (next_change < t.velocity_changes.size() &&
           t.velocity_changes[next_change].frame_id <= frame_id) {
      vel = t.velocity_changes[next_change].velocity;
      ++next_change;
    }
    const double yaw = vel.head<2>().norm() > 1e-9 ? std::atan2(vel.y(), vel.x()) : t.initial_yaw;
    Box3D box(center, t.dims, yaw, t.class_id, 1.0);
    box.score = 1.0;
    out.push_back(box);
    out.back().class_id = t.class_id;
    // carry the object id through score-free channel: callers use index mapping
  }
  return out;
}

namespace {

struct PolarFootprint {
  double azimuth;
  double half_angle;
  double range;
  double z_top;
  double z_bottom;
};

PolarFootprint footprint(const Vec3& sensor, const Box3D& box) {
  const double dx = box.center.x() - sensor.x();
  const double dy = box.center.y() - sensor.y();
  PolarFootprint f;
  f.range = std::hypot(dx, dy);
  f.azimuth = std::atan2(dy, dx);
  const double half_diag = 0.5 * std::hypot(box.dims.x(), box.dims.y());
  f.half_angle = f.range > half_diag ? std::asin(half_diag / std::max(f.range, 1e-9)) : M_PI;
  f.z_top = box.center.z() + box.dims.z() / 2.0;
  f.z_bottom = box.center.z() - box.dims.z() / 2.0;
  return f;
}

}  // namespace

std::vector<int> visible_objects(const AgentSpec& agent, const std::vector<Box3D>& boxes,
                                 uint32_t frame_id) {
  const Pose& pose = agent.pose_at(frame_id);
  const Pose inv = pose.inverse();
  const Vec3 sensor = pose.translation;
  std::vector<int> out;
  for (size_t i = 0; i < boxes.size(); ++i) {
    const Vec3 rel = inv.apply(boxes[i].center);
    if (std::fabs(rel.x()) > agent.sensing.max_range ||
        std::fabs(rel.y()) > agent.sensing.max_range)
      continue;
    if (agent.sensing.fov_half_angle < M_PI) {
      const double az = std::atan2(rel.y(), rel.x());
      if (std::fabs(az) > agent.sensing.fov_half_angle) continue;
    }
    if (agent.sensing.occlusion_enabled) {
      const PolarFootprint target = footprint(sensor, boxes[i]);
      bool blocked = false;
      for (size_t j = 0; j < boxes.size() && !blocked; ++j) {
        if (j == i) continue;
        const PolarFootprint occ = footprint(sensor, boxes[j]);
        if (occ.range >= target.range || occ.range < 1e-6) continue;
        if (std::fabs(wrap_yaw(target.azimuth - occ.azimuth)) > occ.half_angle) continue;
        // height of the sensor->target-center ray above ground at the occluder range
        const double z_ray =
            sensor.z() + (boxes[i].center.z() - sensor.z()) * (occ.range / target.range);
        blocked = z_ray <= occ.z_top && z_ray >= occ.z_bottom;
      }
      if (blocked) continue;
    }
    out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<Observation> oracle_detect(const AgentSpec& agent, const std::vector<Box3D>& visible,
                                       uint32_t frame_id, const NoiseModel& noise,
                                       std::mt19937_64& rng) {
  const Pose& pose = agent.pose_at(frame_id);
  const Pose inv = pose.inverse();
  const double agent_yaw = pose.yaw();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double max_dist = agent.sensing.max_range * M_SQRT2;

  std::vector<Observation> out;
  for (size_t i = 0; i < visible.size(); ++i) {
    if (unit(rng) < noise.miss_rate) continue;
    const Box3D& gt = visible[i];
    Vec3 local = inv.apply(gt.center);
    local += Vec3(gauss(rng), gauss(rng), gauss(rng)) * noise.pos_sigma;
    Vec3 dims = gt.dims + Vec3(gauss(rng), gauss(rng), gauss(rng)) * noise.dims_sigma;
    dims = dims.cwiseMax(0.1);
    const double yaw = wrap_yaw(gt.yaw - agent_yaw + gauss(rng) * noise.yaw_sigma);
    const double dist = local.head<2>().norm();
    const double conf =
        std::clamp(1.0 - dist / max_dist + gauss(rng) * noise.conf_sigma, 0.0, 1.0);
    Observation obs;
    obs.box = Box3D(local, dims, yaw, gt.class_id, std::clamp(gt.score, 0.0, 1.0));
    obs.true_object_id = static_cast<int>(i);
    obs.confidence = conf;
    out.push_back(std::move(obs));
  }

  std::poisson_distribution<int> fp_count(noise.fp_rate);
  const int fps = noise.fp_rate > 0.0 ? fp_count(rng) : 0;
  std::uniform_real_distribution<double> fp_pos(-agent.sensing.max_range, agent.sensing.max_range);
  std::uniform_real_distribution<double> fp_conf(0.05, 0.4);
  std::uniform_real_distribution<double> fp_yaw(-M_PI, M_PI);
  for (int k = 0; k < fps; ++k) {
    const int cls = static_cast<int>(rng() % 3);
    Vec3 dims = class_dims(cls);
    Observation obs;
    obs.box = Box3D(Vec3(fp_pos(rng), fp_pos(rng), dims.z() / 2.0), dims, fp_yaw(rng), cls, 1.0);
    obs.true_object_id = -1;
    obs.confidence = fp_conf(rng);
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<Observation> observe(const Scenario& scenario, const AgentSpec& agent,
                                 uint32_t frame_id) {
  const auto gt = ground_truth_at(scenario.tracks, frame_id);
  const auto vis_idx = visible_objects(agent, gt, frame_id);
  std::vector<Box3D> vis;
  vis.reserve(vis_idx.size());
  for (int i : vis_idx) vis.push_back(gt[i]);
  std::mt19937_64 rng(stream_seed(scenario.config.seed,
                                  static_cast<uint64_t>(agent.agent_id) + 1, frame_id));
  auto obs = oracle_detect(agent, vis, frame_id, scenario.config.noise, rng);
  // map visible-list indices back to object ids
  for (auto& o : obs)
    if (o.true_object_id >= 0) o.true_object_id = vis_idx[o.true_object_id];
  return obs;
}

std::string observations_to_json_line(uint32_t frame_id, const std::vector<Observation>& obs) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"frame_id\":" << frame_id << ",\"observations\":[";
  for (size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs[i];
    if (i) os << ",";
    os << "{\"center\":[" << o.box.center.x() << "," << o.box.center.y() << ","
       << o.box.center.z() << "],\"dims\":[" << o.box.dims.x() << "," << o.box.dims.y() << ","
       << o.box.dims.z() << "],\"yaw\":" << o.box.yaw << ",\"class_id\":" << o.box.class_id
       << ",\"confidence\":" << o.confidence << ",\"object_id\":" << o.true_object_id << "}";
  }
  os << "]}";
  return os.str();
}

}  // namespace ctce
