#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "causarm/sim.hpp"

using namespace causarm;

namespace {

// Quadrature oracle for moments of a normal truncated to [lo, hi]:
// plain Simpson integration of the clipped density.
struct TruncMoments {
  double mean, stddev;
};

TruncMoments truncated_normal_moments(double mu, double sigma, double lo, double hi) {
  const int n = 20000;  // even
  const double h = (hi - lo) / n;
  auto density = [&](double x) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z);
  };
  double mass = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + h * i;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const double f = w * density(x);
    mass += f;
    m1 += f * x;
    m2 += f * x * x;
  }
  const double mean = m1 / mass;
  const double var = m2 / mass - mean * mean;
  return {mean, std::sqrt(var)};
}

}  // namespace

TEST_CASE("realize_step: exact identity inside the limits") {
  Rng rng(42);
  for (int k = 0; k < 20000; ++k) {
    const double lo = rng.uniform(-3.0, -0.5);
    const double hi = rng.uniform(0.5, 3.0);
    const double prev = rng.uniform(lo, hi);
    double arrived = rng.uniform(lo, hi);
    if (k % 5 == 0) arrived = hi;  // exercise the boundary nudges
    if (k % 7 == 0) arrived = lo;
    double a = 0.0, next = 0.0;
    realize_step(prev, arrived, lo, hi, a, next);
    CHECK(prev + a == next);  // bit-exact
    CHECK(next >= lo);
    CHECK(next <= hi);
  }
}

TEST_CASE("sample_babble_target: mask, truncation, quadrature moments") {
  JointLimits lim = JointLimits::default_limits();
  BabbleConfig cfg = BabbleConfig::kinematics(0, 3);

  Rng rng(12);
  std::vector<double> cur(7, 0.4);

  BabbleConfig masked = cfg;
  masked.joint_mask.assign(7, false);
  CHECK(sample_babble_target(lim, cur, masked, rng) == cur);

  const int draws = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int k = 0; k < draws; ++k) {
    auto t = sample_babble_target(lim, cur, cfg, rng);
    CHECK(lim.contains(t));
    sum += t[0];
    sumsq += t[0] * t[0];
  }
  const double mean = sum / draws;
  const double stddev = std::sqrt(sumsq / draws - mean * mean);

  const double sigma = cfg.sigma_scale * lim.half_range(0);
  TruncMoments oracle =
      truncated_normal_moments(lim.midpoint(0), sigma, lim.q_min[0], lim.q_max[0]);
  CHECK(std::fabs(mean - oracle.mean) < 0.02);
  CHECK(std::fabs(stddev - oracle.stddev) / oracle.stddev < 0.02);
}

TEST_CASE("step_environment: magnet rules") {
  ChainConfig cc = ChainConfig::defaults();
  BabbleConfig cfg = BabbleConfig::kinematics(0, 0);

  ArmState arm = ArmState::at_midpoints(cc.chain, cc.limits);
  WorldState world;
  world.consts = cc.world;
  world.cube_pose = {0.5, 0.0, 0.025, 0, 0, 0.3};
  world.cube_color = {0.2, 0.4, 0.6};

  SUBCASE("magnet off: any motion leaves the cube untouched") {
    auto before = world.cube_pose;
    std::vector<double> target(7, 0.3);
    step_environment(cc.chain, cc.limits, arm, &world, target, MagnetCmd::kHold, cfg);
    CHECK(world.cube_pose == before);
    CHECK_FALSE(world.attached);
  }

  SUBCASE("magnet on within grasp radius attaches; cube follows after") {
    // park the effector 3 cm from the cube center
    auto sol = ik_reach(cc.chain, cc.limits,
                        std::span<const double, 3>(std::array<double, 3>{0.5, 0.0, 0.055}),
                        arm.theta, {}, {0.05, 0.2, 1e-3, 2000});
    step_environment(cc.chain, cc.limits, arm, &world, sol, MagnetCmd::kHold, cfg);
    CHECK(detail::dist3(arm.effector_pose, world.cube_pose) < 0.05);

    std::vector<double> away(7, 0.0);
    away[1] = -0.8;
    step_environment(cc.chain, cc.limits, arm, &world, away, MagnetCmd::kOn, cfg);
    CHECK(world.attached);
    CHECK(detail::dist3(arm.effector_pose, world.cube_pose) < 0.06);
    CHECK(world.cube_pose[2] > 0.1);  // carried off the table

    SUBCASE("release drops to the table keeping x,y and yaw") {
      const double carried_x = world.cube_pose[0];
      const double carried_y = world.cube_pose[1];
      std::vector<double> hold = arm.theta;
      auto out = step_environment(cc.chain, cc.limits, arm, &world, hold,
                                  MagnetCmd::kOff, cfg);
      CHECK(out.magnet_delta == -1.0);
      CHECK_FALSE(world.attached);
      CHECK(world.cube_pose[2] == doctest::Approx(0.025));
      CHECK(world.cube_pose[0] == carried_x);
      CHECK(world.cube_pose[1] == carried_y);
      CHECK(world.cube_pose[3] == 0.0);
      CHECK(world.cube_pose[4] == 0.0);
    }
  }

  SUBCASE("targets outside the limits are rejected") {
    std::vector<double> bad(7, 0.0);
    bad[0] = 5.0;
    CHECK_THROWS_AS(
        step_environment(cc.chain, cc.limits, arm, &world, bad, MagnetCmd::kHold, cfg),
        InvalidInput);
  }
}

TEST_CASE("kinematics session: invariants over the emitted stream") {
  ChainConfig cc = ChainConfig::defaults();

  SUBCASE("zero steps yields an empty set with a valid manifest") {
    auto set = run_kinematics_session(cc, BabbleConfig::kinematics(0, 5));
    CHECK(set.records.empty());
    CHECK(set.manifest.count == 0);
    set.validate();
  }

  BabbleConfig cfg = BabbleConfig::kinematics(400, 5);
  TransitionSet set = run_kinematics_session(cc, cfg);
  CHECK(set.records.size() == 400);
  set.validate();  // joints identity is bit-exact

  for (const auto& t : set.records) {
    // limit safety
    std::vector<double> th(t.s_next.begin(), t.s_next.begin() + 7);
    CHECK(cc.limits.contains(th));
    // effector-pose consistency
    auto pos = fk_position(cc.chain, th);
    for (int i = 0; i < 3; ++i) CHECK(std::fabs(t.s_next[7 + i] - pos[i]) < 1e-12);
  }

  // determinism: identical cfg+seed gives a bit-identical stream
  TransitionSet again = run_kinematics_session(cc, cfg);
  REQUIRE(again.records.size() == set.records.size());
  for (std::size_t i = 0; i < set.records.size(); ++i)
    CHECK(again.records[i] == set.records[i]);

  TransitionSet other = run_kinematics_session(cc, BabbleConfig::kinematics(400, 6));
  CHECK(other.records[0].a != set.records[0].a);
}

TEST_CASE("physics session: episode script invariants") {
  ChainConfig cc = ChainConfig::defaults();
  BabbleConfig cfg = BabbleConfig::physics(3, 180, 11);
  PhysicsSessionLog log;
  TransitionSet set = run_physics_session(cc, cfg, &log);
  set.validate();
  CHECK(set.records.size() == 3 * 180);
  CHECK(log.skipped_episodes == 0);

  const StateSchema schema = set.manifest.state;
  const SliceDef obj = schema.slice_def("object");
  const SliceDef mgt = schema.slice_def("magnet");
  const SliceDef joints = schema.slice_def("joints");

  std::map<std::size_t, std::array<double, 3>> episode_color;
  int pickups = 0, releases = 0;
  for (const auto& t : set.records) {
    // colors constant within an episode
    std::array<double, 3> color{t.s[obj.offset + 6], t.s[obj.offset + 7],
                                t.s[obj.offset + 8]};
    auto [it, fresh] = episode_color.try_emplace(t.episode, color);
    if (!fresh) CHECK(it->second == color);
    CHECK(color == std::array<double, 3>{t.s_next[obj.offset + 6],
                                         t.s_next[obj.offset + 7],
                                         t.s_next[obj.offset + 8]});

    // magnet action encodes the state change
    const double a_mgt = t.a.back();
    CHECK((a_mgt == -1.0 || a_mgt == 0.0 || a_mgt == 1.0));
    CHECK(t.s_next[mgt.offset] - t.s[mgt.offset] == a_mgt);
    if (a_mgt == 1.0) ++pickups;
    if (a_mgt == -1.0) {
      ++releases;
      // released cube rests on the table
      CHECK(t.s_next[obj.offset + 2] == doctest::Approx(0.025));
    }

    // masked joint 6 never moves
    CHECK(t.s_next[joints.offset + 6] == t.s[joints.offset + 6]);
    CHECK(t.a[6] == 0.0);

    // cube never below the table plane
    CHECK(t.s[obj.offset + 2] >= cc.world.table_z + cc.world.half_extent - 1e-9);
    CHECK(t.s_next[obj.offset + 2] >= cc.world.table_z + cc.world.half_extent - 1e-9);
  }
  CHECK(pickups >= 3);
  CHECK(releases >= 1);

  // colors vary across episodes
  CHECK(episode_color.size() == 3);
  CHECK(episode_color[0] != episode_color[1]);

  // attachment rigidity: while carried, the effector->cube transform is fixed
  const SliceDef ef = schema.slice_def("effector");
  int checked = 0;
  for (std::size_t i = 0; i + 1 < set.records.size(); ++i) {
    const auto& a = set.records[i];
    const auto& b = set.records[i + 1];
    if (a.episode != b.episode) continue;
    // both states carried: magnet on and cube off the table
    auto carried = [&](const std::vector<double>& s) {
      return s[mgt.offset] == 1.0 && s[obj.offset + 2] > 0.06;
    };
    if (!carried(a.s_next) || !carried(b.s_next)) continue;
    auto rel = [&](const std::vector<double>& s) {
      std::array<double, 6> efp, cbp;
      for (int k = 0; k < 6; ++k) {
        efp[k] = s[ef.offset + k];
        cbp[k] = s[obj.offset + k];
      }
      return transform_from_pose(std::span<const double, 6>(efp)).rigid_inverse() *
             transform_from_pose(std::span<const double, 6>(cbp));
    };
    Mat4 ra = rel(a.s_next), rb = rel(b.s_next);
    for (int k = 0; k < 16; ++k) CHECK(std::fabs(ra.m[k] - rb.m[k]) < 1e-9);
    ++checked;
  }
  CHECK(checked > 10);

  // determinism
  TransitionSet again = run_physics_session(cc, cfg);
  REQUIRE(again.records.size() == set.records.size());
  for (std::size_t i = 0; i < set.records.size(); ++i)
    CHECK(again.records[i] == set.records[i]);
}
