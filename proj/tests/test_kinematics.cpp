#include <doctest.h>

#include <array>
#include <cmath>

#include "causarm/kinematics.hpp"
#include "causarm/rng.hpp"

using namespace causarm;

namespace {

// Independent forward-kinematics oracle: plain 4x4 arrays multiplied in a
// double loop, no shared code with the library path.
using Arr4 = std::array<std::array<double, 4>, 4>;

Arr4 arr_identity() {
  Arr4 m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
  return m;
}

Arr4 arr_mul(const Arr4& a, const Arr4& b) {
  Arr4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// RotZ(theta), TransZ(d), TransX(a), RotX(alpha) as explicit matrices.
std::array<double, 3> oracle_fk_position(const KinematicChain& chain,
                                         const std::vector<double>& theta) {
  Arr4 acc = arr_identity();
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const auto& r = chain.joints[i];
    const double th = theta[i] + r.theta_offset;
    Arr4 rotz = arr_identity();
    rotz[0][0] = std::cos(th);
    rotz[0][1] = -std::sin(th);
    rotz[1][0] = std::sin(th);
    rotz[1][1] = std::cos(th);
    Arr4 transz = arr_identity();
    transz[2][3] = r.d;
    Arr4 transx = arr_identity();
    transx[0][3] = r.a;
    Arr4 rotx = arr_identity();
    rotx[1][1] = std::cos(r.alpha);
    rotx[1][2] = -std::sin(r.alpha);
    rotx[2][1] = std::sin(r.alpha);
    rotx[2][2] = std::cos(r.alpha);
    acc = arr_mul(acc, arr_mul(arr_mul(rotz, transz), arr_mul(transx, rotx)));
  }
  return {acc[0][3], acc[1][3], acc[2][3]};
}

std::vector<double> random_theta(const JointLimits& lim, Rng& rng) {
  std::vector<double> t(lim.q_min.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = rng.uniform(lim.q_min[i], lim.q_max[i]);
  return t;
}

}  // namespace

TEST_CASE("default limits carry the published joint ranges") {
  JointLimits l = JointLimits::default_limits();
  CHECK(l.q_min[0] == -2.967);
  CHECK(l.q_max[0] == 2.967);
  CHECK(l.q_min[1] == -2.094);
  CHECK(l.q_max[6] == 3.054);
  l.validate();
}

TEST_CASE("fk at zero pose stacks the link offsets along z") {
  KinematicChain chain = KinematicChain::default_chain();
  std::vector<double> zero(7, 0.0);
  auto pose = fk_pose(chain, zero);
  CHECK(pose[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(pose[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(pose[2] == doctest::Approx(1.266).epsilon(1e-12));
}

TEST_CASE("base joint spins about the vertical axis") {
  KinematicChain chain = KinematicChain::default_chain();
  std::vector<double> zero(7, 0.0);
  auto p0 = fk_position(chain, zero);
  Rng rng(17);
  for (int k = 0; k < 5; ++k) {
    std::vector<double> t(7, 0.0);
    t[0] = rng.uniform(-2.9, 2.9);
    auto p = fk_position(chain, t);
    CHECK(p[2] == doctest::Approx(p0[2]).epsilon(1e-12));
    const double r0 = std::hypot(p0[0], p0[1]);
    CHECK(std::hypot(p[0], p[1]) == doctest::Approx(r0).epsilon(1e-9));
  }
}

TEST_CASE("fk position matches the independent transform-product oracle") {
  KinematicChain chain = KinematicChain::default_chain();
  JointLimits lim = JointLimits::default_limits();
  Rng rng(99);
  for (int k = 0; k < 20; ++k) {
    auto theta = random_theta(lim, rng);
    auto lib = fk_position(chain, theta);
    auto ora = oracle_fk_position(chain, theta);
    for (int i = 0; i < 3; ++i) CHECK(std::fabs(lib[i] - ora[i]) < 1e-9);
  }
}

TEST_CASE("euler extraction round-trips the rotation") {
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    std::array<double, 6> pose{0, 0, 0, rng.uniform(-1.5, 1.5),
                               rng.uniform(-1.5, 1.5), rng.uniform(-3.1, 3.1)};
    Mat4 t = transform_from_pose(std::span<const double, 6>(pose));
    auto e = euler_xyz_from_rotation(t);
    std::array<double, 6> pose2{0, 0, 0, e[0], e[1], e[2]};
    Mat4 t2 = transform_from_pose(std::span<const double, 6>(pose2));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(std::fabs(t.at(i, j) - t2.at(i, j)) < 1e-9);
  }
  // gimbal branch: ry = pi/2 exactly, rx pinned to zero
  std::array<double, 6> gim{0, 0, 0, 0.7, M_PI_2, 0.3};
  auto e = euler_xyz_from_rotation(transform_from_pose(std::span<const double, 6>(gim)));
  CHECK(e[0] == 0.0);
  CHECK(e[1] == doctest::Approx(M_PI_2));
}

TEST_CASE("jacobian matches finite differences of fk position") {
  KinematicChain chain = KinematicChain::default_chain();
  JointLimits lim = JointLimits::default_limits();
  Rng rng(123);
  const double h = 1e-6;
  for (int k = 0; k < 5; ++k) {
    auto theta = random_theta(lim, rng);
    Matrix j = jacobian(chain, theta);
    for (std::size_t c = 0; c < 7; ++c) {
      auto up = theta, down = theta;
      up[c] += h;
      down[c] -= h;
      auto pu = fk_position(chain, up);
      auto pd = fk_position(chain, down);
      for (int r = 0; r < 3; ++r) {
        const double fd = (pu[r] - pd[r]) / (2 * h);
        const double scale = std::max({std::fabs(fd), std::fabs(j(r, c)), 1e-3});
        CHECK(std::fabs(j(r, c) - fd) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("last joint axis passes through the effector: zero linear column") {
  KinematicChain chain = KinematicChain::default_chain();
  JointLimits lim = JointLimits::default_limits();
  Rng rng(7);
  auto theta = random_theta(lim, rng);
  Matrix j = jacobian(chain, theta);
  for (int r = 0; r < 3; ++r) CHECK(std::fabs(j(r, 6)) < 1e-12);
}

TEST_CASE("base joint column is horizontal at the zero pose") {
  KinematicChain chain = KinematicChain::default_chain();
  std::vector<double> zero(7, 0.0);
  Matrix j = jacobian(chain, zero);
  CHECK(std::fabs(j(2, 0)) < 1e-12);  // no vertical motion from base yaw
}

TEST_CASE("ik_reach: already at target, self-consistency, unreachable") {
  KinematicChain chain = KinematicChain::default_chain();
  JointLimits lim = JointLimits::default_limits();
  Rng rng(2718);

  std::vector<double> init(7, 0.1);
  auto at = fk_position(chain, init);
  auto back = ik_reach(chain, lim, std::span<const double, 3>(at), init);
  CHECK(back == init);  // error already under tolerance

  int solved = 0;
  for (int k = 0; k < 10; ++k) {
    auto theta_star = random_theta(lim, rng);
    auto target = fk_position(chain, theta_star);
    try {
      auto sol = ik_reach(chain, lim, std::span<const double, 3>(target),
                          std::vector<double>(7, 0.0));
      auto reached = fk_position(chain, sol);
      const double err = std::hypot(reached[0] - target[0], reached[1] - target[1],
                                    reached[2] - target[2]);
      CHECK(err < 5e-3);
      CHECK(lim.contains(sol));
      ++solved;
    } catch (const UnreachableTarget&) {
      // re-seed path is exercised by the physics session
    }
  }
  CHECK(solved >= 8);

  std::array<double, 3> far{10.0, 0.0, 0.0};
  CHECK_THROWS_AS(ik_reach(chain, lim, std::span<const double, 3>(far),
                           std::vector<double>(7, 0.0)),
                  UnreachableTarget);
}

TEST_CASE("ik_reach honors the joint mask") {
  KinematicChain chain = KinematicChain::default_chain();
  JointLimits lim = JointLimits::default_limits();
  std::vector<bool> mask(7, true);
  mask[2] = false;
  mask[6] = false;
  std::vector<double> init(7, 0.2);
  // target reachable with joints 2 and 6 pinned: move only active joints
  std::vector<double> goal = init;
  goal[0] = -0.6;
  goal[1] = 0.9;
  goal[3] = -1.1;
  auto target = fk_position(chain, goal);
  auto sol = ik_reach(chain, lim, std::span<const double, 3>(target), init, mask);
  CHECK(sol[2] == 0.2);
  CHECK(sol[6] == 0.2);
  auto reached = fk_position(chain, sol);
  CHECK(std::hypot(reached[0] - target[0], reached[1] - target[1],
                   reached[2] - target[2]) < 5e-3);
}

TEST_CASE("chain config round trip and hash") {
  auto dir = std::filesystem::temp_directory_path();
  auto path = dir / "causarm_chain_test.json";
  ChainConfig c = ChainConfig::defaults();
  save_chain_config(c, path);
  ChainConfig r = load_chain_config(path);
  CHECK(r.chain.dof() == 7);
  CHECK(r.limits.q_max[6] == 3.054);
  CHECK(r.chain.joints[2].d == 0.4);
  CHECK_FALSE(r.world.chain_hash.empty());
  std::filesystem::remove(path);
}
