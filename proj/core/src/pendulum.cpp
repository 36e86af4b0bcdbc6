#include "bracketdyn/pendulum.hpp"

#include <cmath>
#include <stdexcept>

namespace bracketdyn {

std::array<double, 4> pendulum_rhs(const PendulumParams& pp, const std::array<double, 4>& s) {
  const double th1 = s[0], th2 = s[1], w1 = s[2], w2 = s[3];
  const double dth = th1 - th2;
  const double sd = std::sin(dth), cd = std::cos(dth), s2d = std::sin(2.0 * dth);
  const double den = pp.m1 + pp.m2 * sd * sd;

  const double gamma1 = 2.0 * pp.k1 * w1 - 2.0 * pp.k2 * w2 * cd;
  const double gamma2 = 2.0 * pp.k1 * w1 * cd - 2.0 * (pp.m1 + pp.m2) / pp.m2 * pp.k2 * w2;

  const double num1 = pp.m2 * pp.l1 * w1 * w1 * s2d + 2.0 * pp.m2 * pp.l2 * w2 * w2 * sd +
                      2.0 * pp.g * pp.m2 * std::cos(th2) * sd + 2.0 * pp.g * pp.m1 * std::sin(th1) +
                      gamma1;
  const double num2 = pp.m2 * pp.l2 * w2 * w2 * s2d +
                      2.0 * (pp.m1 + pp.m2) * pp.l1 * w1 * w1 * sd +
                      2.0 * pp.g * (pp.m1 + pp.m2) * std::cos(th1) * sd + gamma2;

  return {w1, w2, num1 / (-2.0 * pp.l1 * den), num2 / (2.0 * pp.l2 * den)};
}

double pendulum_energy(const PendulumParams& pp, const std::array<double, 4>& s) {
  const double th1 = s[0], th2 = s[1], w1 = s[2], w2 = s[3];
  const double kin = 0.5 * (pp.m1 + pp.m2) * pp.l1 * pp.l1 * w1 * w1 +
                     0.5 * pp.m2 * pp.l2 * pp.l2 * w2 * w2 +
                     pp.m2 * pp.l1 * pp.l2 * w1 * w2 * std::cos(th1 - th2);
  const double pot = -(pp.m1 + pp.m2) * pp.g * pp.l1 * std::cos(th1) -
                     pp.m2 * pp.g * pp.l2 * std::cos(th2);
  return kin + pot;
}

std::array<double, 4> pendulum_coordinates(const PendulumParams& pp,
                                           const std::array<double, 4>& s) {
  const double x1 = pp.l1 * std::sin(s[0]);
  const double y1 = -pp.l1 * std::cos(s[0]);
  return {x1, y1, x1 + pp.l2 * std::sin(s[1]), y1 - pp.l2 * std::cos(s[1])};
}

namespace {

using Vec4 = std::array<double, 4>;

Vec4 axpy(const Vec4& x, double a, const Vec4& y) {
  return {x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2], x[3] + a * y[3]};
}

Vec4 rk4(const PendulumParams& pp, const Vec4& x, double dt) {
  const Vec4 k1 = pendulum_rhs(pp, x);
  const Vec4 k2 = pendulum_rhs(pp, axpy(x, 0.5 * dt, k1));
  const Vec4 k3 = pendulum_rhs(pp, axpy(x, 0.5 * dt, k2));
  const Vec4 k4 = pendulum_rhs(pp, axpy(x, dt, k3));
  Vec4 y = x;
  for (int i = 0; i < 4; ++i)
    y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return y;
}

// Snapshots at t_k = k * horizon / n for k = 0 .. n-1, integrating each
// interval with `steps` RK4 substeps.
std::vector<Vec4> run(const PendulumParams& pp, int steps_per_interval) {
  const double interval = pp.horizon / pp.n_snapshots;
  const double dt = interval / steps_per_interval;
  std::vector<Vec4> snaps;
  snaps.reserve(size_t(pp.n_snapshots));
  Vec4 x = pp.theta0;
  snaps.push_back(x);
  for (int k = 1; k < pp.n_snapshots; ++k) {
    for (int s = 0; s < steps_per_interval; ++s) x = rk4(pp, x, dt);
    snaps.push_back(x);
  }
  return snaps;
}

double max_snapshot_diff(const std::vector<Vec4>& a, const std::vector<Vec4>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    for (int j = 0; j < 4; ++j) m = std::max(m, std::fabs(a[i][j] - b[i][j]));
  return m;
}

} // namespace

PendulumTrajectory simulate_pendulum(const PendulumParams& pp, double dt0, double tol,
                                     int max_halvings) {
  pp.validate();
  const double interval = pp.horizon / pp.n_snapshots;
  int steps = std::max(1, int(std::ceil(interval / dt0)));
  std::vector<Vec4> prev = run(pp, steps);
  bool converged = false;
  for (int h = 0; h < max_halvings; ++h) {
    steps *= 2;
    std::vector<Vec4> next = run(pp, steps);
    const double diff = max_snapshot_diff(prev, next);
    prev = std::move(next);
    if (diff < tol) {
      converged = true;
      break;
    }
  }

  PendulumTrajectory out;
  out.dt = interval / steps;
  out.dt_converged = converged;
  out.t.resize(size_t(pp.n_snapshots));
  out.state = prev;
  out.xy = Mat(pp.n_snapshots, 4);
  for (int k = 0; k < pp.n_snapshots; ++k) {
    out.t[size_t(k)] = k * interval;
    const auto c = pendulum_coordinates(pp, prev[size_t(k)]);
    for (int j = 0; j < 4; ++j) out.xy(k, j) = c[j];
  }
  return out;
}

PendulumGraphData build_pendulum_graph(const PendulumTrajectory& traj) {
  PendulumGraphData data;
  data.cx = build_complex(3, {{0, 1}, {0, 2}, {1, 2}});
  data.t = traj.t;
  data.q.reserve(traj.t.size());
  data.p.reserve(traj.t.size());
  for (int k = 0; k < traj.xy.rows(); ++k) {
    Mat q(3, 2); // anchor node 0 stays at the origin
    q(1, 0) = traj.xy(k, 0);
    q(1, 1) = traj.xy(k, 1);
    q(2, 0) = traj.xy(k, 2);
    q(2, 1) = traj.xy(k, 3);
    data.p.push_back(d_apply(data.cx, 0, q));
    data.q.push_back(std::move(q));
  }
  return data;
}

} // namespace bracketdyn
