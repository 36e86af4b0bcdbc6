#pragma once

#include <array>
#include <vector>

#include "bracketdyn/complex.hpp"
#include "bracketdyn/mat.hpp"

namespace bracketdyn {

// Damped double pendulum in angle/angular-velocity coordinates
// (theta1, theta2, omega1, omega2).
struct PendulumParams {
  double m1 = 1.0, m2 = 1.0;
  double l1 = 1.0, l2 = 0.9;
  double g = 1.0;
  double k1 = 0.1, k2 = 0.1;
  std::array<double, 4> theta0 = {1.0, 1.5707963267948966, 0.0, 0.0};
  double horizon = 50.0;
  int n_snapshots = 500;

  void validate() const {
    if (m1 <= 0 || m2 <= 0 || l1 <= 0 || l2 <= 0)
      throw std::invalid_argument("PendulumParams: masses and lengths must be positive");
    if (k1 < 0 || k2 < 0) throw std::invalid_argument("PendulumParams: damping must be >= 0");
    if (horizon <= 0 || n_snapshots < 1)
      throw std::invalid_argument("PendulumParams: horizon > 0 and n_snapshots >= 1 required");
  }
};

std::array<double, 4> pendulum_rhs(const PendulumParams& pp, const std::array<double, 4>& s);

// Mechanical energy (kinetic + potential) of the angle-space state.
double pendulum_energy(const PendulumParams& pp, const std::array<double, 4>& s);

// Angles mapped to the planar coordinates of the two masses, pivot at the
// origin: (x1, y1, x2, y2).
std::array<double, 4> pendulum_coordinates(const PendulumParams& pp,
                                           const std::array<double, 4>& s);

struct PendulumTrajectory {
  std::vector<double> t;                     // snapshot times k * horizon / n
  Mat xy;                                    // n_snapshots x 4: x1 y1 x2 y2
  std::vector<std::array<double, 4>> state;  // angle-space states at snapshots
  double dt = 0.0;                           // final integration step
  bool dt_converged = false;                 // halving dt moved snapshots < tol
};

// RK4 integration with the step refined (halved) until consecutive
// refinements agree on every snapshot to `tol`; undamped chaotic settings may
// exhaust max_halvings, in which case the finest trajectory is returned with
// dt_converged = false.
PendulumTrajectory simulate_pendulum(const PendulumParams& pp, double dt0 = 2e-3,
                                     double tol = 1e-8, int max_halvings = 8);

// The pendulum as a complete three-node graph: anchor node 0 at the origin,
// q_i = (x_i, y_i) per snapshot, p = d0 q.
struct PendulumGraphData {
  CliqueComplex cx;
  std::vector<double> t;
  std::vector<Mat> q; // per snapshot, 3 x 2
  std::vector<Mat> p; // per snapshot, 3 x 2
};

PendulumGraphData build_pendulum_graph(const PendulumTrajectory& traj);

} // namespace bracketdyn
