#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "causarm/csv.hpp"
#include "causarm/matrix.hpp"
#include "causarm/transition.hpp"

namespace causarm {

// Homogeneous transform, row-major 4x4.
struct Mat4 {
  std::array<double, 16> m{};

  static Mat4 identity() {
    Mat4 t;
    t.m[0] = t.m[5] = t.m[10] = t.m[15] = 1.0;
    return t;
  }

  double at(int r, int c) const { return m[r * 4 + c]; }
  double& at(int r, int c) { return m[r * 4 + c]; }

  Mat4 operator*(const Mat4& o) const {
    Mat4 out;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += at(i, k) * o.at(k, j);
        out.at(i, j) = acc;
      }
    return out;
  }

  std::array<double, 3> translation() const { return {at(0, 3), at(1, 3), at(2, 3)}; }

  // Rigid inverse: R^T, -R^T t.
  Mat4 rigid_inverse() const {
    Mat4 inv = identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) inv.at(i, j) = at(j, i);
    for (int i = 0; i < 3; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 3; ++j) acc += inv.at(i, j) * at(j, 3);
      inv.at(i, 3) = -acc;
    }
    return inv;
  }
};

// Standard DH transform: RotZ(theta) * TransZ(d) * TransX(a) * RotX(alpha).
inline Mat4 dh_transform(double a, double alpha, double d, double theta) {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  Mat4 t = Mat4::identity();
  t.at(0, 0) = ct;
  t.at(0, 1) = -st * ca;
  t.at(0, 2) = st * sa;
  t.at(0, 3) = a * ct;
  t.at(1, 0) = st;
  t.at(1, 1) = ct * ca;
  t.at(1, 2) = -ct * sa;
  t.at(1, 3) = a * st;
  t.at(2, 1) = sa;
  t.at(2, 2) = ca;
  t.at(2, 3) = d;
  return t;
}

struct DhRow {
  double a = 0.0;            // link length [m]
  double alpha = 0.0;        // twist [rad]
  double d = 0.0;            // offset [m]
  double theta_offset = 0.0; // [rad]
};

struct KinematicChain {
  std::vector<DhRow> joints;

  std::size_t dof() const { return joints.size(); }

  void validate() const {
    if (joints.empty()) throw InvalidInput("KinematicChain: needs >= 1 joint");
    for (const auto& j : joints)
      if (!std::isfinite(j.a) || !std::isfinite(j.alpha) || !std::isfinite(j.d) ||
          !std::isfinite(j.theta_offset))
        throw InvalidInput("KinematicChain: non-finite DH entry");
  }

  // Sum of link extents; used as the reachability bound.
  double reach() const {
    double r = 0.0;
    for (const auto& j : joints) r += std::fabs(j.a) + std::fabs(j.d);
    return r;
  }

  // Default 7R chain: a=0, alternating +/- pi/2 twists,
  // d = [0.34, 0, 0.4, 0, 0.4, 0, 0.126] m.
  static KinematicChain default_chain() {
    KinematicChain c;
    const double ds[7] = {0.34, 0.0, 0.4, 0.0, 0.4, 0.0, 0.126};
    for (int i = 0; i < 7; ++i) {
      DhRow r;
      r.d = ds[i];
      r.alpha = (i % 2 == 0) ? M_PI_2 : -M_PI_2;
      c.joints.push_back(r);
    }
    return c;
  }
};

struct JointLimits {
  std::vector<double> q_min, q_max;

  void validate() const {
    if (q_min.size() != q_max.size() || q_min.empty())
      throw InvalidInput("JointLimits: min/max size mismatch");
    for (std::size_t i = 0; i < q_min.size(); ++i)
      if (!(q_min[i] < q_max[i]))
        throw InvalidInput("JointLimits: q_min must be < q_max");
  }

  double clamp(std::size_t i, double v) const {
    return std::min(std::max(v, q_min[i]), q_max[i]);
  }

  bool contains(std::span<const double> theta, double slack = 0.0) const {
    for (std::size_t i = 0; i < theta.size(); ++i)
      if (theta[i] < q_min[i] - slack || theta[i] > q_max[i] + slack) return false;
    return true;
  }

  double midpoint(std::size_t i) const { return 0.5 * (q_min[i] + q_max[i]); }
  double half_range(std::size_t i) const { return 0.5 * (q_max[i] - q_min[i]); }

  // KUKA LBR iiwa motion ranges.
  static JointLimits default_limits() {
    JointLimits l;
    l.q_min = {-2.967, -2.094, -2.967, -2.094, -2.967, -2.094, -3.054};
    l.q_max = {2.967, 2.094, 2.967, 2.094, 2.967, 2.094, 3.054};
    return l;
  }
};

namespace detail {

// Accumulated transforms: out[i] = T_0 * ... * T_{i-1} (out[0] = I).
inline std::vector<Mat4> link_frames(const KinematicChain& chain,
                                     std::span<const double> theta) {
  if (theta.size() != chain.dof())
    throw InvalidInput("fk: theta length does not match chain");
  std::vector<Mat4> frames;
  frames.reserve(chain.dof() + 1);
  frames.push_back(Mat4::identity());
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const auto& r = chain.joints[i];
    frames.push_back(frames.back() *
                     dh_transform(r.a, r.alpha, r.d, theta[i] + r.theta_offset));
  }
  return frames;
}

}  // namespace detail

inline Mat4 fk_transform(const KinematicChain& chain, std::span<const double> theta) {
  return detail::link_frames(chain, theta).back();
}

// XYZ-intrinsic Euler angles of a rotation matrix. Near the ry = +/-pi/2
// gimbal tie, rx is pinned to 0 and rz absorbs the remaining rotation.
inline std::array<double, 3> euler_xyz_from_rotation(const Mat4& t) {
  const double r02 = std::min(1.0, std::max(-1.0, t.at(0, 2)));
  const double ry = std::asin(r02);
  if (std::fabs(r02) < 1.0 - 1e-9) {
    const double rx = std::atan2(-t.at(1, 2), t.at(2, 2));
    const double rz = std::atan2(-t.at(0, 1), t.at(0, 0));
    return {rx, ry, rz};
  }
  return {0.0, ry, std::atan2(t.at(1, 0), t.at(1, 1))};
}

inline std::array<double, 6> pose_from_transform(const Mat4& t) {
  const auto p = t.translation();
  const auto e = euler_xyz_from_rotation(t);
  return {p[0], p[1], p[2], e[0], e[1], e[2]};
}

inline Mat4 transform_from_pose(std::span<const double, 6> pose) {
  const double cx = std::cos(pose[3]), sx = std::sin(pose[3]);
  const double cy = std::cos(pose[4]), sy = std::sin(pose[4]);
  const double cz = std::cos(pose[5]), sz = std::sin(pose[5]);
  Mat4 t = Mat4::identity();
  // Rx * Ry * Rz
  t.at(0, 0) = cy * cz;
  t.at(0, 1) = -cy * sz;
  t.at(0, 2) = sy;
  t.at(1, 0) = sx * sy * cz + cx * sz;
  t.at(1, 1) = -sx * sy * sz + cx * cz;
  t.at(1, 2) = -sx * cy;
  t.at(2, 0) = -cx * sy * cz + sx * sz;
  t.at(2, 1) = cx * sy * sz + sx * cz;
  t.at(2, 2) = cx * cy;
  t.at(0, 3) = pose[0];
  t.at(1, 3) = pose[1];
  t.at(2, 3) = pose[2];
  return t;
}

// Effector pose: position plus XYZ-intrinsic Euler rotation.
inline std::array<double, 6> fk_pose(const KinematicChain& chain,
                                     std::span<const double> theta) {
  return pose_from_transform(fk_transform(chain, theta));
}

inline std::array<double, 3> fk_position(const KinematicChain& chain,
                                         std::span<const double> theta) {
  const auto p = fk_transform(chain, theta).translation();
  return {p[0], p[1], p[2]};
}

// Geometric Jacobian, 6 x dof: rows 0-2 linear (z_i x (p_e - p_i)),
// rows 3-5 angular (z_i).
inline Matrix jacobian(const KinematicChain& chain, std::span<const double> theta) {
  const auto frames = detail::link_frames(chain, theta);
  const auto pe = frames.back().translation();
  Matrix j(6, chain.dof());
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const Mat4& f = frames[i];
    const std::array<double, 3> z{f.at(0, 2), f.at(1, 2), f.at(2, 2)};
    const std::array<double, 3> p = f.translation();
    const std::array<double, 3> r{pe[0] - p[0], pe[1] - p[1], pe[2] - p[2]};
    j(0, i) = z[1] * r[2] - z[2] * r[1];
    j(1, i) = z[2] * r[0] - z[0] * r[2];
    j(2, i) = z[0] * r[1] - z[1] * r[0];
    j(3, i) = z[0];
    j(4, i) = z[1];
    j(5, i) = z[2];
  }
  return j;
}

struct IkSettings {
  double damping = 0.05;       // mu
  double step_clamp = 0.2;     // rad, per-iteration cap
  double tolerance = 5e-3;     // m
  std::size_t max_iters = 500;
};

// Damped least squares reach, position only. Masked joints stay put.
// Throws UnreachableTarget when the target is outside the reach bound or
// the iteration fails to converge; callers may re-seed theta_init and retry.
inline std::vector<double> ik_reach(const KinematicChain& chain,
                                    const JointLimits& limits,
                                    std::span<const double, 3> target_pos,
                                    std::span<const double> theta_init,
                                    const std::vector<bool>& active_mask = {},
                                    const IkSettings& st = {}) {
  const double dist0 = std::sqrt(target_pos[0] * target_pos[0] +
                                 target_pos[1] * target_pos[1] +
                                 target_pos[2] * target_pos[2]);
  if (dist0 > chain.reach())
    throw UnreachableTarget("ik_reach: target beyond total link extent");
  if (!limits.contains(theta_init))
    throw InvalidInput("ik_reach: theta_init violates limits");
  if (!active_mask.empty() && active_mask.size() != chain.dof())
    throw InvalidInput("ik_reach: mask size mismatch");

  std::vector<double> theta(theta_init.begin(), theta_init.end());
  const double mu2 = st.damping * st.damping;

  for (std::size_t iter = 0; iter <= st.max_iters; ++iter) {
    const auto pos = fk_position(chain, theta);
    const std::array<double, 3> err{target_pos[0] - pos[0], target_pos[1] - pos[1],
                                    target_pos[2] - pos[2]};
    const double err_norm =
        std::sqrt(err[0] * err[0] + err[1] * err[1] + err[2] * err[2]);
    if (err_norm < st.tolerance) return theta;
    if (iter == st.max_iters) break;

    Matrix j6 = jacobian(chain, theta);
    Matrix j3(3, chain.dof());
    for (std::size_t c = 0; c < chain.dof(); ++c) {
      const bool active = active_mask.empty() || active_mask[c];
      for (std::size_t r = 0; r < 3; ++r) j3(r, c) = active ? j6(r, c) : 0.0;
    }

    // dtheta = J^T (J J^T + mu^2 I)^-1 err
    Matrix jjt = matmul(j3, transpose(j3));
    for (std::size_t d = 0; d < 3; ++d) jjt(d, d) += mu2;
    std::vector<double> lambda = solve_linear(jjt, {err[0], err[1], err[2]});
    std::vector<double> dtheta(chain.dof(), 0.0);
    for (std::size_t c = 0; c < chain.dof(); ++c)
      dtheta[c] = j3(0, c) * lambda[0] + j3(1, c) * lambda[1] + j3(2, c) * lambda[2];

    double max_step = 0.0;
    for (double v : dtheta) max_step = std::max(max_step, std::fabs(v));
    if (max_step > st.step_clamp) {
      const double scale = st.step_clamp / max_step;
      for (double& v : dtheta) v *= scale;
    }
    for (std::size_t c = 0; c < chain.dof(); ++c)
      theta[c] = limits.clamp(c, theta[c] + dtheta[c]);
  }
  throw UnreachableTarget("ik_reach: no convergence within iteration budget");
}

// Chain + limits + world constants travel together as one config document.
struct ChainConfig {
  KinematicChain chain;
  JointLimits limits;
  WorldConstants world;

  static ChainConfig defaults() {
    ChainConfig c;
    c.chain = KinematicChain::default_chain();
    c.limits = JointLimits::default_limits();
    return c;
  }
};

inline nlohmann::json chain_config_to_json(const ChainConfig& c) {
  nlohmann::json dh = nlohmann::json::array();
  for (const auto& r : c.chain.joints)
    dh.push_back({{"a", r.a}, {"alpha", r.alpha}, {"d", r.d},
                  {"theta_offset", r.theta_offset}});
  return nlohmann::json{{"dh", std::move(dh)},
                        {"q_min", c.limits.q_min},
                        {"q_max", c.limits.q_max},
                        {"table_z", c.world.table_z},
                        {"grasp_radius", c.world.grasp_radius},
                        {"half_extent", c.world.half_extent}};
}

inline ChainConfig chain_config_from_json(const nlohmann::json& j) {
  ChainConfig c;
  for (const auto& r : j.at("dh")) {
    DhRow row;
    row.a = r.at("a").get<double>();
    row.alpha = r.at("alpha").get<double>();
    row.d = r.at("d").get<double>();
    row.theta_offset = r.value("theta_offset", 0.0);
    c.chain.joints.push_back(row);
  }
  c.limits.q_min = j.at("q_min").get<std::vector<double>>();
  c.limits.q_max = j.at("q_max").get<std::vector<double>>();
  c.world.table_z = j.value("table_z", 0.0);
  c.world.grasp_radius = j.value("grasp_radius", 0.05);
  c.world.half_extent = j.value("half_extent", 0.025);
  c.chain.validate();
  c.limits.validate();
  if (c.limits.q_min.size() != c.chain.dof())
    throw MalformedFile("chain config: limits do not match joint count");
  return c;
}

inline void save_chain_config(const ChainConfig& c, const std::filesystem::path& p) {
  write_text_file(p, chain_config_to_json(c).dump(1) + "\n");
}

inline ChainConfig load_chain_config(const std::filesystem::path& p) {
  try {
    ChainConfig c = chain_config_from_json(nlohmann::json::parse(read_text_file(p)));
    c.world.chain_hash = fnv1a_hex(read_text_file(p));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile("chain config: " + std::string(e.what()));
  }
}

// Hash for configs that never touched disk.
inline std::string chain_config_hash(const ChainConfig& c) {
  return fnv1a_hex(chain_config_to_json(c).dump());
}

}  // namespace causarm
