#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "bracketdyn/mat.hpp"

namespace bracketdyn {

enum class Scheme { kEuler, kRk4 };

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "euler") return Scheme::kEuler;
  if (s == "rk4") return Scheme::kRk4;
  throw std::invalid_argument("unknown integration scheme '" + s + "'");
}

inline std::string to_string(Scheme s) { return s == Scheme::kEuler ? "euler" : "rk4"; }

struct IntegratorSpec {
  Scheme scheme = Scheme::kRk4;
  double dt = 0.0;
  int n_steps = 0;
  int save_every = 1;

  void validate(double horizon = -1.0) const {
    if (dt <= 0.0 || n_steps < 1 || save_every < 1)
      throw std::invalid_argument("IntegratorSpec: dt > 0, n_steps >= 1, save_every >= 1 required");
    if (horizon > 0.0 && std::fabs(dt * n_steps - horizon) > 1e-12 * std::max(1.0, horizon))
      throw std::invalid_argument("IntegratorSpec: dt * n_steps does not match the horizon");
  }
};

// State types need operator+(S, S) and operator*(double, S); doubles and the
// node-edge StateT pairs both qualify.
template <class St, class F>
St euler_step(F&& rhs, const St& x, double dt) {
  return x + dt * rhs(x);
}

template <class St, class F>
St rk4_step(F&& rhs, const St& x, double dt) {
  St k1 = rhs(x);
  St k2 = rhs(x + (0.5 * dt) * k1);
  St k3 = rhs(x + (0.5 * dt) * k2);
  St k4 = rhs(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Fixed-step integration; the returned trajectory includes x0 and every
// save_every-th state. Aborts with the step index if the state goes
// non-finite.
template <class St, class F>
std::vector<St> integrate(F&& rhs, St x0, const IntegratorSpec& spec) {
  spec.validate();
  std::vector<St> out;
  out.reserve(size_t(spec.n_steps / spec.save_every) + 2);
  out.push_back(x0);
  St x = x0;
  for (int k = 0; k < spec.n_steps; ++k) {
    x = spec.scheme == Scheme::kEuler ? euler_step(rhs, x, spec.dt) : rk4_step(rhs, x, spec.dt);
    if (!is_finite(x))
      throw std::runtime_error("integrate: non-finite state at step " + std::to_string(k + 1));
    if ((k + 1) % spec.save_every == 0) out.push_back(x);
  }
  return out;
}

} // namespace bracketdyn
