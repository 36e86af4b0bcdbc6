#include "bracketdyn/bracket.hpp"

#include <algorithm>
#include <sstream>

namespace bracketdyn {

BracketKind bracket_kind_from_string(const std::string& s) {
  if (s == "hamiltonian") return BracketKind::kHamiltonian;
  if (s == "gradient") return BracketKind::kGradient;
  if (s == "double_bracket" || s == "double-bracket") return BracketKind::kDoubleBracket;
  if (s == "metriplectic") return BracketKind::kMetriplectic;
  throw std::invalid_argument("unknown bracket kind '" + s + "'");
}

std::string to_string(BracketKind k) {
  switch (k) {
    case BracketKind::kHamiltonian: return "hamiltonian";
    case BracketKind::kGradient: return "gradient";
    case BracketKind::kDoubleBracket: return "double_bracket";
    case BracketKind::kMetriplectic: return "metriplectic";
  }
  return "?";
}

double inner_a(const Metric& m, const State& x, const State& y) {
  return dot_all(scale_rows(x.q, m.a0), y.q) + dot_all(scale_rows(x.p, m.a1), y.p);
}

namespace {

State random_state(const CliqueComplex& cx, int channels, Rng& rng) {
  return State{rng.normal_mat(cx.n, channels), rng.normal_mat(cx.count(1), channels)};
}

double state_norm(const State& x) {
  return std::sqrt(frob_norm(x.q) * frob_norm(x.q) + frob_norm(x.p) * frob_norm(x.p));
}

} // namespace

StructureReport structure_audit(const BracketSystem& sys, int trials, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("structure_audit: trials must be >= 1");
  const CliqueComplex& cx = *sys.cx;
  const int f = sys.attn.wk.empty() ? 3 : sys.attn.wk[0].cols();
  StructureReport rep;
  rep.trials = trials;

  for (int t = 0; t < trials; ++t) {
    State x = random_state(cx, f, rng);
    State y = random_state(cx, f, rng);
    Metric m = sys.metric_at(x.q);

    const double scale_xy = std::max(1.0, state_norm(x) * state_norm(y));
    State lx = op_l(cx, m, x);
    State ly = op_l(cx, m, y);
    rep.skew = std::max(rep.skew, std::fabs(inner_a(m, lx, y) + inner_a(m, x, ly)) / scale_xy);

    State gx = op_g(cx, m, x);
    State gy = op_g(cx, m, y);
    rep.g_self_adjoint = std::max(
        rep.g_self_adjoint, std::fabs(inner_a(m, gx, y) - inner_a(m, x, gy)) / scale_xy);
    rep.g_negative = std::max(rep.g_negative, -inner_a(m, gx, x) / scale_xy);

    State mx = op_m(cx, m, x);
    State my = op_m(cx, m, y);
    rep.m_self_adjoint = std::max(
        rep.m_self_adjoint, std::fabs(inner_a(m, mx, y) - inner_a(m, x, my)) / scale_xy);
    rep.m_negative = std::max(rep.m_negative, -inner_a(m, mx, x) / scale_xy);

    // Dual exactness d0* d1* = 0: probe with a random degree-2 load.
    if (!cx.triangles.empty()) {
      Mat w = rng.normal_mat(cx.count(2), f);
      Mat composed = dual_derivative(m, cx, 0, dual_derivative(m, cx, 1, w));
      rep.dual_exactness =
          std::max(rep.dual_exactness, max_abs(composed) / std::max(1.0, max_abs(w)));
    }

    // Defining adjointness of d0*.
    {
      Mat q = rng.normal_mat(cx.n, f);
      Mat p = rng.normal_mat(cx.count(1), f);
      const double lhs = dot_all(scale_rows(d_apply(cx, 0, q), m.a1), p);
      const double rhs = dot_all(scale_rows(q, m.a0), dual_derivative(m, cx, 0, p));
      rep.adjointness = std::max(rep.adjointness, rel_diff(lhs, rhs));
    }

    if (sys.kind == BracketKind::kMetriplectic) {
      auto fn = metriplectic_functionals(cx, sys.nets, m, x);
      State ls = op_l(cx, m, fn.grad_s);
      State me = op_m(cx, m, fn.grad_e);
      rep.degeneracy_ls = std::max(rep.degeneracy_ls, std::max(max_abs(ls.q), max_abs(ls.p)));
      rep.degeneracy_me = std::max(rep.degeneracy_me, std::max(max_abs(me.q), max_abs(me.p)));

      State xdot = metriplectic_rhs(cx, sys.nets, m, x);
      const double sc = std::max(1.0, state_norm(xdot) * state_norm(fn.grad_e));
      rep.first_law = std::max(rep.first_law, std::fabs(inner_a(m, xdot, fn.grad_e)) / sc);
      rep.second_law_neg = std::max(rep.second_law_neg, -inner_a(m, xdot, fn.grad_s) / sc);
    } else {
      State grad = kinetic_energy_grad(m, x);
      State xdot = sys.rhs(x);
      const double sc = std::max(1.0, state_norm(xdot) * state_norm(grad));
      const double de = inner_a(m, xdot, grad) / sc;
      if (sys.kind == BracketKind::kHamiltonian)
        rep.first_law = std::max(rep.first_law, std::fabs(de));
      else
        rep.first_law = std::max(rep.first_law, std::max(0.0, de)); // dissipative: de <= 0
    }
  }
  return rep;
}

std::string to_json(const StructureReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "{\n"
     << "  \"trials\": " << r.trials << ",\n"
     << "  \"skew\": " << r.skew << ",\n"
     << "  \"g_self_adjoint\": " << r.g_self_adjoint << ",\n"
     << "  \"g_negative\": " << r.g_negative << ",\n"
     << "  \"m_self_adjoint\": " << r.m_self_adjoint << ",\n"
     << "  \"m_negative\": " << r.m_negative << ",\n"
     << "  \"dual_exactness\": " << r.dual_exactness << ",\n"
     << "  \"adjointness\": " << r.adjointness << ",\n"
     << "  \"degeneracy_L_gradS\": " << r.degeneracy_ls << ",\n"
     << "  \"degeneracy_M_gradE\": " << r.degeneracy_me << ",\n"
     << "  \"first_law\": " << r.first_law << ",\n"
     << "  \"second_law_negative_part\": " << r.second_law_neg << "\n"
     << "}";
  return os.str();
}

} // namespace bracketdyn
