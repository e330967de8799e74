#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "causarm/kinematics.hpp"
#include "causarm/rng.hpp"
#include "causarm/schema.hpp"
#include "causarm/transition.hpp"

namespace causarm {

enum class BabbleMode { kKinematics, kPhysics };

// Where babble targets are centered. Midpoint-centered draws resample the
// whole range each step; current-centered draws explore locally, which
// keeps consecutive configurations correlated the way a rate-limited
// controller would.
enum class BabbleCenter { kMidpoint, kCurrent };

struct BabbleConfig {
  BabbleMode mode = BabbleMode::kKinematics;
  std::size_t steps = 0;       // kinematics mode
  std::size_t episodes = 0;    // physics mode
  std::size_t iterations = 0;  // physics mode, per episode
  std::size_t substeps = 10;
  double sigma_scale = 0.5;       // fraction of half-range
  BabbleCenter center = BabbleCenter::kMidpoint;
  std::vector<bool> joint_mask;   // true = joint babbles; empty = all true
  std::uint64_t seed = 0;

  void validate() const {
    if (substeps < 1) throw InvalidInput("BabbleConfig: substeps must be >= 1");
    if (!(sigma_scale > 0.0 && sigma_scale <= 1.0))
      throw InvalidInput("BabbleConfig: sigma_scale must be in (0, 1]");
    if (mode == BabbleMode::kKinematics && steps == 0 && episodes + iterations > 0)
      throw InvalidInput("BabbleConfig: kinematics mode uses steps");
  }

  bool joint_active(std::size_t i) const {
    return joint_mask.empty() || (i < joint_mask.size() && joint_mask[i]);
  }

  static BabbleConfig kinematics(std::size_t steps, std::uint64_t seed) {
    BabbleConfig c;
    c.mode = BabbleMode::kKinematics;
    c.steps = steps;
    c.seed = seed;
    return c;
  }

  // Physics sessions pin joint 6 by default; the last joint spins the
  // flange without moving the magnet, so leaving it idle keeps the action
  // space honest and is reported as such by the attribution stage. They
  // also babble around the current pose: each iteration is a bounded
  // exploratory move, the way a rate-limited controller behaves.
  static BabbleConfig physics(std::size_t episodes, std::size_t iterations,
                              std::uint64_t seed, std::size_t dof = 7) {
    BabbleConfig c;
    c.mode = BabbleMode::kPhysics;
    c.episodes = episodes;
    c.iterations = iterations;
    c.seed = seed;
    c.center = BabbleCenter::kCurrent;
    c.sigma_scale = 0.15;
    c.joint_mask.assign(dof, true);
    if (dof >= 7) c.joint_mask[6] = false;
    return c;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"mode", mode == BabbleMode::kKinematics ? "kinematics" : "physics"},
        {"steps", steps},
        {"episodes", episodes},
        {"iterations", iterations},
        {"substeps", substeps},
        {"sigma_scale", sigma_scale},
        {"center", center == BabbleCenter::kMidpoint ? "midpoint" : "current"},
        {"joint_mask", joint_mask},
        {"seed", seed}};
  }
};

struct ArmState {
  std::vector<double> theta;
  std::array<double, 6> effector_pose{};

  static ArmState at_midpoints(const KinematicChain& chain, const JointLimits& lim) {
    ArmState a;
    a.theta.resize(chain.dof());
    for (std::size_t i = 0; i < chain.dof(); ++i) a.theta[i] = lim.midpoint(i);
    a.effector_pose = fk_pose(chain, a.theta);
    return a;
  }

  void refresh_pose(const KinematicChain& chain) {
    effector_pose = fk_pose(chain, theta);
  }
};

struct WorldState {
  std::array<double, 6> cube_pose{};
  std::array<double, 3> cube_color{};
  bool magnet_on = false;
  bool attached = false;
  Mat4 attach_offset = Mat4::identity();  // effector -> cube, captured at attach
  WorldConstants consts;

  void drop_cube() {
    attached = false;
    cube_pose[2] = consts.table_z + consts.half_extent;
    cube_pose[3] = 0.0;  // roll/pitch zeroed, yaw kept
    cube_pose[4] = 0.0;
  }
};

enum class MagnetCmd { kOn, kOff, kHold };

// Babble target: truncated normal around the configured center for active
// joints, current value for masked ones.
inline std::vector<double> sample_babble_target(const JointLimits& limits,
                                                std::span<const double> current,
                                                const BabbleConfig& cfg, Rng& rng) {
  std::vector<double> target(current.begin(), current.end());
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!cfg.joint_active(i)) continue;
    const double mean =
        cfg.center == BabbleCenter::kMidpoint ? limits.midpoint(i) : current[i];
    target[i] = rng.truncated_normal(mean, cfg.sigma_scale * limits.half_range(i),
                                     limits.q_min[i], limits.q_max[i]);
  }
  return target;
}

// Record the achieved difference and re-derive the next angle from it so
// that next == prev + a holds bit-exactly and stays inside the limits.
inline void realize_step(double prev, double arrived, double lo, double hi,
                         double& a_out, double& next_out) {
  double target = arrived;
  for (;;) {
    const double a = target - prev;
    const double next = prev + a;
    if (next >= lo && next <= hi) {
      a_out = a;
      next_out = next;
      return;
    }
    target = next > hi ? std::nextafter(target, lo) : std::nextafter(target, hi);
  }
}

struct StepOutcome {
  std::vector<double> joint_delta;
  double magnet_delta = 0.0;  // mgt(t+1) - mgt(t), in {-1, 0, 1}
};

namespace detail {

inline double dist3(const std::array<double, 6>& pose_a,
                    const std::array<double, 6>& pose_b) {
  const double dx = pose_a[0] - pose_b[0];
  const double dy = pose_a[1] - pose_b[1];
  const double dz = pose_a[2] - pose_b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline void try_attach(const ArmState& arm, WorldState& world) {
  if (!world.magnet_on || world.attached) return;
  if (dist3(arm.effector_pose, world.cube_pose) < world.consts.grasp_radius) {
    world.attached = true;
    const Mat4 ef = transform_from_pose(std::span<const double, 6>(arm.effector_pose));
    const Mat4 cube = transform_from_pose(std::span<const double, 6>(world.cube_pose));
    world.attach_offset = ef.rigid_inverse() * cube;
  }
}

inline void follow_effector(const ArmState& arm, WorldState& world) {
  if (!world.attached) return;
  const Mat4 ef = transform_from_pose(std::span<const double, 6>(arm.effector_pose));
  const Mat4 cube = ef * world.attach_offset;
  world.cube_pose = pose_from_transform(cube);
}

}  // namespace detail

// One environment step: the magnet command applies before the motion, the
// motion interpolates linearly to the target over cfg.substeps, the cube
// attaches/follows/drops per the magnet rule.
inline StepOutcome step_environment(const KinematicChain& chain,
                                    const JointLimits& limits, ArmState& arm,
                                    WorldState* world,
                                    std::span<const double> theta_target,
                                    MagnetCmd cmd, const BabbleConfig& cfg) {
  if (theta_target.size() != chain.dof())
    throw InvalidInput("step_environment: target dim mismatch");
  if (!limits.contains(theta_target))
    throw InvalidInput("step_environment: rejected action, target outside limits");

  StepOutcome out;
  const int old_mgt = (world && world->magnet_on) ? 1 : 0;

  if (world) {
    if (cmd == MagnetCmd::kOn) {
      world->magnet_on = true;
    } else if (cmd == MagnetCmd::kOff) {
      world->magnet_on = false;
      if (world->attached) world->drop_cube();
    }
    detail::try_attach(arm, *world);  // pre-motion proximity check
  }

  const std::vector<double> theta_start = arm.theta;
  for (std::size_t k = 1; k <= cfg.substeps; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(cfg.substeps);
    for (std::size_t i = 0; i < chain.dof(); ++i)
      arm.theta[i] = theta_start[i] + (theta_target[i] - theta_start[i]) * frac;
    arm.refresh_pose(chain);
    if (world) {
      detail::try_attach(arm, *world);
      detail::follow_effector(arm, *world);
    }
  }

  // pin the emitted record to the realized-action identity
  out.joint_delta.resize(chain.dof());
  for (std::size_t i = 0; i < chain.dof(); ++i)
    realize_step(theta_start[i], arm.theta[i], limits.q_min[i], limits.q_max[i],
                 out.joint_delta[i], arm.theta[i]);
  arm.refresh_pose(chain);
  if (world) detail::follow_effector(arm, *world);

  out.magnet_delta =
      static_cast<double>(((world && world->magnet_on) ? 1 : 0) - old_mgt);
  return out;
}

namespace detail {

inline std::vector<double> kin_state(const ArmState& arm) {
  std::vector<double> s(arm.theta.begin(), arm.theta.end());
  s.push_back(arm.effector_pose[0]);
  s.push_back(arm.effector_pose[1]);
  s.push_back(arm.effector_pose[2]);
  return s;
}

inline std::vector<double> phys_state(const ArmState& arm, const WorldState& world) {
  std::vector<double> s;
  s.reserve(23);
  s.insert(s.end(), world.cube_pose.begin(), world.cube_pose.end());
  s.insert(s.end(), world.cube_color.begin(), world.cube_color.end());
  s.insert(s.end(), arm.theta.begin(), arm.theta.end());
  s.insert(s.end(), arm.effector_pose.begin(), arm.effector_pose.end());
  s.push_back(world.magnet_on ? 1.0 : 0.0);
  return s;
}

}  // namespace detail

// Motor babbling over the bare arm; emits s = [theta, effector position].
inline TransitionSet run_kinematics_session(const ChainConfig& cc,
                                            const BabbleConfig& cfg) {
  cfg.validate();
  if (cfg.mode != BabbleMode::kKinematics)
    throw InvalidInput("run_kinematics_session: config mode mismatch");
  cc.chain.validate();
  cc.limits.validate();

  TransitionSet set;
  set.manifest.schema_version = "kin-v1";
  set.manifest.state = kin_state_schema();
  set.manifest.action = kin_action_schema();
  set.manifest.state.fields[0].dims = cc.chain.dof();
  set.manifest.action.fields[0].dims = cc.chain.dof();
  set.manifest.generator = cfg.to_json();
  set.manifest.seed = cfg.seed;
  set.manifest.world = cc.world;
  if (set.manifest.world.chain_hash.empty())
    set.manifest.world.chain_hash = chain_config_hash(cc);

  Rng rng(derive_seed(cfg.seed, 0));
  ArmState arm = ArmState::at_midpoints(cc.chain, cc.limits);
  set.records.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const std::vector<double> s = detail::kin_state(arm);
    const auto target = sample_babble_target(cc.limits, arm.theta, cfg, rng);
    StepOutcome o =
        step_environment(cc.chain, cc.limits, arm, nullptr, target, MagnetCmd::kHold, cfg);
    Transition t;
    t.s = s;
    t.a = o.joint_delta;
    t.s_next = detail::kin_state(arm);
    t.episode = 0;
    t.step = step;
    set.records.push_back(std::move(t));
  }
  set.manifest.count = set.records.size();
  return set;
}

struct PhysicsSessionLog {
  std::size_t skipped_episodes = 0;
  std::size_t reach_retries = 0;
};

// Scripted magnet-cube session. Per episode: randomize cube and color,
// then cycle reach -> pickup -> carry -> release -> empty until the
// iteration budget is used up.
inline TransitionSet run_physics_session(const ChainConfig& cc, const BabbleConfig& cfg,
                                         PhysicsSessionLog* log = nullptr) {
  cfg.validate();
  if (cfg.mode != BabbleMode::kPhysics)
    throw InvalidInput("run_physics_session: config mode mismatch");
  cc.chain.validate();
  cc.limits.validate();
  const std::size_t dof = cc.chain.dof();

  TransitionSet set;
  set.manifest.schema_version = "phys-v1";
  set.manifest.state = phys_state_schema();
  set.manifest.action = phys_action_schema();
  set.manifest.state.fields[1].dims = dof;  // joints
  set.manifest.action.fields[0].dims = dof;
  set.manifest.generator = cfg.to_json();
  set.manifest.seed = cfg.seed;
  set.manifest.world = cc.world;
  if (set.manifest.world.chain_hash.empty())
    set.manifest.world.chain_hash = chain_config_hash(cc);

  const double cube_z = cc.world.table_z + cc.world.half_extent;
  const double min_carry_z = cube_z + 0.02;

  for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
    Rng rng(derive_seed(cfg.seed, 1 + episode));
    ArmState arm = ArmState::at_midpoints(cc.chain, cc.limits);
    WorldState world;
    world.consts = cc.world;
    const double radius = cc.chain.reach() * rng.uniform(0.30, 0.47);
    const double angle = rng.uniform(-M_PI, M_PI);
    world.cube_pose = {radius * std::cos(angle), radius * std::sin(angle), cube_z,
                       0.0, 0.0, rng.uniform(-M_PI, M_PI)};
    world.cube_color = {rng.uniform01(), rng.uniform01(), rng.uniform01()};

    // While the cube is carried, keep the target pose above the table so
    // the cube is never commanded through it.
    auto carry_target = [&]() {
      for (int attempt = 0; attempt < 200; ++attempt) {
        auto t = sample_babble_target(cc.limits, arm.theta, cfg, rng);
        if (fk_position(cc.chain, t)[2] >= min_carry_z) return t;
      }
      return arm.theta;  // stay put rather than dive through the table
    };

    std::size_t it = 0;
    auto emit = [&](std::span<const double> s_before, const StepOutcome& o) {
      Transition t;
      t.s.assign(s_before.begin(), s_before.end());
      t.a = o.joint_delta;
      t.a.push_back(o.magnet_delta);
      t.s_next = detail::phys_state(arm, world);
      t.episode = episode;
      t.step = it;
      set.records.push_back(std::move(t));
      ++it;
    };
    auto do_step = [&](std::span<const double> target, MagnetCmd cmd) {
      const std::vector<double> s = detail::phys_state(arm, world);
      StepOutcome o = step_environment(cc.chain, cc.limits, arm, &world, target, cmd, cfg);
      emit(s, o);
    };

    bool episode_ok = true;
    while (it < cfg.iterations && episode_ok) {
      // REACH: navigate to the cube; on failure re-seed the start pose
      // (midpoints first, then random draws) and retry
      std::optional<std::vector<double>> sol;
      for (int attempt = 0; attempt < 8; ++attempt) {
        try {
          const std::array<double, 3> tgt{world.cube_pose[0], world.cube_pose[1],
                                          world.cube_pose[2]};
          sol = ik_reach(cc.chain, cc.limits, std::span<const double, 3>(tgt),
                         arm.theta, cfg.joint_mask);
          break;
        } catch (const UnreachableTarget&) {
          if (log) ++log->reach_retries;
          for (std::size_t i = 0; i < dof; ++i)
            if (cfg.joint_active(i))
              arm.theta[i] = attempt == 0 ? cc.limits.midpoint(i)
                                          : rng.uniform(cc.limits.q_min[i],
                                                        cc.limits.q_max[i]);
          arm.refresh_pose(cc.chain);
        }
      }
      if (!sol) {
        if (log) ++log->skipped_episodes;
        episode_ok = false;
        break;
      }
      do_step(*sol, MagnetCmd::kHold);
      if (it >= cfg.iterations) break;

      // PICKUP: magnet on, then carry away within the same step
      do_step(carry_target(), MagnetCmd::kOn);

      // CARRY
      const long d1 = rng.uniform_int(20, 120);
      for (long d = 0; d < d1 && it < cfg.iterations; ++d)
        do_step(carry_target(), MagnetCmd::kHold);
      if (it >= cfg.iterations) break;

      // RELEASE: magnet off, cube drops to the table
      do_step(sample_babble_target(cc.limits, arm.theta, cfg, rng), MagnetCmd::kOff);

      // EMPTY babbling
      const long d2 = rng.uniform_int(20, 120);
      for (long d = 0; d < d2 && it < cfg.iterations; ++d)
        do_step(sample_babble_target(cc.limits, arm.theta, cfg, rng), MagnetCmd::kHold);
    }
  }
  set.manifest.count = set.records.size();
  return set;
}

inline TransitionSet run_session(const ChainConfig& cc, const BabbleConfig& cfg,
                                 PhysicsSessionLog* log = nullptr) {
  return cfg.mode == BabbleMode::kKinematics ? run_kinematics_session(cc, cfg)
                                             : run_physics_session(cc, cfg, log);
}

}  // namespace causarm
