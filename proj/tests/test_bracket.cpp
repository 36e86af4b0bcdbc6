#include "doctest.h"

#include "bracketdyn/bracket.hpp"
#include "bracketdyn/graphs.hpp"
#include "bracketdyn/ode.hpp"
#include "test_util.hpp"

using namespace bracketdyn;

namespace {

BracketSystem make_system(BracketKind kind, const CliqueComplex& cx, Rng& rng, int features = 3,
                          int hidden = 4) {
  BracketSystem sys;
  sys.kind = kind;
  sys.cx = &cx;
  sys.cfg.embed_dim = 3;
  sys.attn = testutil::random_attention(rng, 3, features, 0.4);
  if (kind == BracketKind::kMetriplectic) sys.nets = testutil::random_nets(features, hidden, rng);
  return sys;
}

State random_state(const CliqueComplex& cx, int f, Rng& rng) {
  return State{rng.normal_mat(cx.n, f), rng.normal_mat(cx.count(1), f)};
}

} // namespace

TEST_CASE("kinetic energy and gradient basics") {
  CliqueComplex cx = build_complex(3, complete_graph(3).edges);
  State zero{Mat(3, 2), Mat(3, 2)};
  Metric id;
  id.a0 = Mat::ones(3, 1);
  id.a1 = Mat::ones(3, 1);
  id.a2 = Mat::ones(1, 1);
  CHECK(kinetic_energy(zero)(0, 0) == 0.0);
  State g0 = kinetic_energy_grad(id, zero);
  CHECK(max_abs(g0.q) == 0.0);
  CHECK(max_abs(g0.p) == 0.0);

  Rng rng(2);
  State x = random_state(cx, 2, rng);
  State g = kinetic_energy_grad(id, x);
  CHECK(max_abs(sub(g.q, x.q)) == 0.0); // identity metric: plain l2 gradient
  CHECK(max_abs(sub(g.p, x.p)) == 0.0);
}

TEST_CASE("kinetic energy gradient matches finite differences in the A inner product") {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    CliqueComplex cx = testutil::random_triangle_complex(rng);
    Metric m = testutil::random_diag_metric(cx, rng);
    State x = random_state(cx, 3, rng);
    State dir = random_state(cx, 3, rng);
    State grad = kinetic_energy_grad(m, x);

    const double h = 1e-6;
    auto energy_at = [&](double eps) {
      State y{add(x.q, scale(dir.q, eps)), add(x.p, scale(dir.p, eps))};
      return kinetic_energy(y)(0, 0);
    };
    const double fd = (energy_at(h) - energy_at(-h)) / (2 * h);
    const double ip = inner_a(m, grad, dir);
    CHECK(rel_diff(fd, ip) <= 1e-6);
  }
}

TEST_CASE("hamiltonian rhs block structure with p = 0") {
  Rng rng(5);
  CliqueComplex cx = testutil::random_complex(rng);
  Metric m = testutil::random_diag_metric(cx, rng);
  State x{rng.normal_mat(cx.n, 2), Mat(cx.count(1), 2)};
  State rhs = hamiltonian_rhs(cx, m, x);
  CHECK(max_abs(rhs.q) == 0.0);
  Mat expected = d_apply(cx, 0, scale_rows(x.q, map_recip(m.a0)));
  CHECK(max_abs(sub(rhs.p, expected)) == 0.0);
}

TEST_CASE("hamiltonian rhs is A-orthogonal to the energy gradient") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    CliqueComplex cx = testutil::random_complex(rng);
    BracketSystem sys = make_system(BracketKind::kHamiltonian, cx, rng);
    State x = random_state(cx, 3, rng);
    Metric m = sys.metric_at(x.q);
    State rhs = hamiltonian_rhs(cx, m, x);
    State grad = kinetic_energy_grad(m, x);
    CHECK(std::fabs(inner_a(m, rhs, grad)) <= 1e-12 * std::max(1.0, std::fabs(inner_a(m, grad, grad))));
  }
}

TEST_CASE("two-node hamiltonian flow conserves energy under rk4") {
  CliqueComplex cx = build_complex(2, {{0, 1}});
  Metric id;
  id.a0 = Mat::ones(2, 1);
  id.a1 = Mat::ones(1, 1);
  id.a2 = Mat(0, 1);
  State x0{Mat(2, 1, {1.0, 0.0}), Mat(1, 1, {0.0})};
  auto rhs = [&](const State& s) { return hamiltonian_rhs(cx, id, s); };

  const double e0 = kinetic_energy(x0)(0, 0);
  IntegratorSpec spec{Scheme::kRk4, 1e-3, 1000, 1000};
  State xT = integrate(rhs, x0, spec).back();
  const double eT = kinetic_energy(xT)(0, 0);
  CHECK(std::fabs(eT - e0) / e0 <= 1e-8);

  // Reference at a 100x finer step agrees with the coarse solution.
  IntegratorSpec fine{Scheme::kRk4, 1e-5, 100000, 100000};
  State xT_ref = integrate(rhs, x0, fine).back();
  CHECK(max_abs(sub(xT.q, xT_ref.q)) <= 1e-10);
  CHECK(max_abs(sub(xT.p, xT_ref.p)) <= 1e-10);
}

TEST_CASE("gradient rhs: constant q is stationary under a uniform node metric") {
  Rng rng(11);
  CliqueComplex cx = testutil::random_complex(rng);
  Metric m = testutil::random_diag_metric(cx, rng);
  m.a0 = Mat::full(cx.n, 1, 2.5); // A0 = c I
  State x{Mat::full(cx.n, 2, 1.7), rng.normal_mat(cx.count(1), 2)};
  State rhs = gradient_rhs(cx, m, x);
  CHECK(max_abs(rhs.q) <= 1e-14);
}

TEST_CASE("gradient rhs dissipates: <rhs, grad E>_A = -|grad E|_G^2 <= 0") {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    CliqueComplex cx = testutil::random_triangle_complex(rng);
    BracketSystem sys = make_system(BracketKind::kGradient, cx, rng);
    State x = random_state(cx, 3, rng);
    Metric m = sys.metric_at(x.q);
    State rhs = gradient_rhs(cx, m, x);
    State grad = kinetic_energy_grad(m, x);
    const double de = inner_a(m, rhs, grad);
    const double g_norm = inner_a(m, op_g(cx, m, grad), grad);
    CHECK(de <= 1e-12);
    CHECK(rel_diff(-de, g_norm) <= 1e-10);
  }
}

TEST_CASE("triangle-free edge laplacian equals its dense assembly") {
  Rng rng(17);
  CliqueComplex cx = build_complex(6, cycle_graph(6).edges); // no triangles
  Metric m = testutil::random_diag_metric(cx, rng);
  Mat p = rng.normal_mat(cx.count(1), 2);

  // Dense oracle: the p-block of the gradient rhs is -Delta_1 A1^{-1} p with
  // Delta_1 = d0 A0^{-1} d0^T A1 when there are no triangles.
  Mat d0 = cx.d0.dense();
  Mat input = scale_rows(p, map_recip(m.a1));
  Mat dense =
      matmul(d0, scale_rows(matmul(transpose(d0), scale_rows(input, m.a1)), map_recip(m.a0)));
  State rhs = gradient_rhs(cx, m, State{Mat(cx.n, 2), p});
  CHECK(max_abs(sub(rhs.p, neg(dense))) <= 1e-12);
}

TEST_CASE("double bracket equals L grad E plus L applied to it") {
  Rng rng(19);
  for (int t = 0; t < 25; ++t) {
    CliqueComplex cx = testutil::random_triangle_complex(rng);
    Metric m = testutil::random_diag_metric(cx, rng);
    State x = random_state(cx, 3, rng);
    State grad = kinetic_energy_grad(m, x);
    State l1 = op_l(cx, m, grad);
    State l2 = op_l(cx, m, l1);
    State expected = l1 + l2;
    State rhs = double_bracket_rhs(cx, m, x);
    CHECK(max_abs(sub(rhs.q, expected.q)) <= 1e-13);
    CHECK(max_abs(sub(rhs.p, expected.p)) <= 1e-13);

    const double de = inner_a(m, rhs, grad);
    const double l_norm = inner_a(m, l1, l1);
    CHECK(de <= 1e-12);
    CHECK(rel_diff(-de, l_norm) <= 1e-9);
  }
}

TEST_CASE("double bracket: constants with zero momentum are stationary") {
  Rng rng(23);
  CliqueComplex cx = testutil::random_complex(rng);
  Metric m = testutil::random_diag_metric(cx, rng);
  m.a0 = Mat::full(cx.n, 1, 3.0);
  State x{Mat::full(cx.n, 2, -0.4), Mat(cx.count(1), 2)};
  State rhs = double_bracket_rhs(cx, m, x);
  CHECK(max_abs(rhs.q) <= 1e-14);
  CHECK(max_abs(rhs.p) <= 1e-14);
}

TEST_CASE("casimirs of L are preserved by the double bracket") {
  // Kernel vector of L: constant q plus a cycle flow rescaled by A1^{-1}.
  Rng rng(29);
  CliqueComplex cx = build_complex(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  Metric m = testutil::random_diag_metric(cx, rng);
  Mat z(4, 1, {1.0, 1.0, 1.0, -1.0}); // cycle flow against canonical orientations
  State c{Mat::full(4, 1, 0.8), scale_rows(z, map_recip(m.a1))};
  State lc = op_l(cx, m, c);
  CHECK(max_abs(lc.q) <= 1e-14);
  CHECK(max_abs(lc.p) <= 1e-14);
  State llc = op_l(cx, m, lc);
  CHECK(max_abs(llc.q) <= 1e-14);
  CHECK(max_abs(llc.p) <= 1e-14);
}

TEST_CASE("metriplectic functionals on a triangle-free graph") {
  Rng rng(31);
  CliqueComplex cx = build_complex(5, cycle_graph(5).edges);
  Metric m = testutil::random_diag_metric(cx, rng);
  MetriplecticNets nets = testutil::random_nets(3, 4, rng);
  State x = random_state(cx, 3, rng);
  auto f = metriplectic_functionals(cx, nets, m, x);
  // S reduces to g_S(0) and its gradient vanishes.
  Mat zero_in(1, 3);
  CHECK(f.entropy(0, 0) == doctest::Approx(mlp_forward(nets.g_s, zero_in, nets.act)(0, 0)));
  CHECK(max_abs(f.grad_s.q) == 0.0);
  CHECK(max_abs(f.grad_s.p) == 0.0);
}

TEST_CASE("metriplectic energy and entropy gradients match finite differences") {
  Rng rng(37);
  for (int t = 0; t < 5; ++t) {
    CliqueComplex cx = testutil::random_triangle_complex(rng);
    Metric m = testutil::random_diag_metric(cx, rng);
    MetriplecticNets nets = testutil::random_nets(3, 4, rng);
    State x = random_state(cx, 3, rng);
    State dir = random_state(cx, 3, rng);
    auto f = metriplectic_functionals(cx, nets, m, x);

    const double h = 1e-5;
    auto at = [&](double eps) {
      State y{add(x.q, scale(dir.q, eps)), add(x.p, scale(dir.p, eps))};
      auto fy = metriplectic_functionals(cx, nets, m, y);
      return std::pair<double, double>{fy.energy(0, 0), fy.entropy(0, 0)};
    };
    const auto [ep, sp] = at(h);
    const auto [em, sm] = at(-h);
    const double fd_e = (ep - em) / (2 * h);
    const double fd_s = (sp - sm) / (2 * h);
    const double ip_e = inner_a(m, f.grad_e, dir);
    const double ip_s = inner_a(m, f.grad_s, dir);
    CHECK(std::fabs(fd_e - ip_e) <= 1e-5 * std::max(1.0, std::fabs(fd_e)));
    CHECK(std::fabs(fd_s - ip_s) <= 1e-5 * std::max(1.0, std::fabs(fd_s)));
    CHECK(max_abs(f.grad_s.q) == 0.0); // S never depends on q
  }
}

TEST_CASE("metriplectic degeneracy and thermodynamic laws") {
  Rng rng(41);
  for (int t = 0; t < 50; ++t) {
    CliqueComplex cx = testutil::random_triangle_complex(rng);
    BracketSystem sys = make_system(BracketKind::kMetriplectic, cx, rng);
    State x = random_state(cx, 3, rng);
    Metric m = sys.metric_at(x.q);
    auto f = metriplectic_functionals(cx, sys.nets, m, x);

    State ls = op_l(cx, m, f.grad_s);
    State me = op_m(cx, m, f.grad_e);
    CHECK(std::max(max_abs(ls.q), max_abs(ls.p)) <= 1e-12);
    CHECK(std::max(max_abs(me.q), max_abs(me.p)) <= 1e-12);

    State xdot = metriplectic_rhs(cx, sys.nets, m, x);
    CHECK(std::fabs(inner_a(m, xdot, f.grad_e)) <= 1e-11);
    const double ds = inner_a(m, xdot, f.grad_s);
    CHECK(ds >= -1e-11);
    const double m_norm = inner_a(m, op_m(cx, m, f.grad_s), f.grad_s);
    CHECK(rel_diff(ds, m_norm) <= 1e-8);
  }
}

TEST_CASE("structure audit: identity metrics on a fixed graph") {
  CliqueComplex cx = build_complex(5, triangulated_ring(5).edges);
  Rng rng(43);
  BracketSystem sys = make_system(BracketKind::kMetriplectic, cx, rng);
  // Freeze the metric at the identity.
  Metric id;
  id.a0 = Mat::ones(cx.count(0), 1);
  id.a1 = Mat::ones(cx.count(1), 1);
  id.a2 = Mat::ones(cx.count(2), 1);
  sys.frozen_metric = id;
  StructureReport r = structure_audit(sys, 20, rng);
  CHECK(r.skew <= 1e-13);
  CHECK(r.g_self_adjoint <= 1e-13);
  CHECK(r.g_negative <= 1e-13);
  CHECK(r.m_self_adjoint <= 1e-13);
  CHECK(r.m_negative <= 1e-13);
  CHECK(r.dual_exactness <= 1e-13);
  CHECK(r.adjointness <= 1e-13);
}

TEST_CASE("structure audit: random attention metrics, all brackets") {
  Rng rng(47);
  for (BracketKind kind : {BracketKind::kHamiltonian, BracketKind::kGradient,
                           BracketKind::kDoubleBracket, BracketKind::kMetriplectic}) {
    CAPTURE(to_string(kind));
    CliqueComplex cx = testutil::random_triangle_complex(rng);
    BracketSystem sys = make_system(kind, cx, rng);
    StructureReport r = structure_audit(sys, 100, rng);
    CHECK(r.skew <= 1e-11);
    CHECK(r.g_self_adjoint <= 1e-11);
    CHECK(r.g_negative <= 1e-11);
    CHECK(r.m_self_adjoint <= 1e-11);
    CHECK(r.m_negative <= 1e-11);
    CHECK(r.dual_exactness <= 1e-11);
    CHECK(r.adjointness <= 1e-11);
    CHECK(r.first_law <= 1e-11);
    if (kind == BracketKind::kMetriplectic) {
      CHECK(r.degeneracy_ls <= 1e-11);
      CHECK(r.degeneracy_me <= 1e-11);
      CHECK(r.second_law_neg <= 1e-11);
    }
    const std::string js = to_json(r);
    CHECK(js.find("\"skew\"") != std::string::npos);
  }
}

TEST_CASE("negative control: an unsymmetrized edge numerator breaks skew-adjointness") {
  Rng rng(53);
  CliqueComplex cx = testutil::random_complex(rng, 10, 0.5);
  PreAttentionConfig cfg;
  cfg.embed_dim = 3;
  AttentionWeights w = testutil::random_attention(rng, 3, 3, 1.0);
  Mat q = rng.normal_mat(cx.n, 3);

  // Direction-dependent numerators, as in softmax-style attention: the value
  // used at the source endpoint differs from the one at the target.
  Mat c_fwd = positive_map(cfg.positive_fn,
                           pre_attention_rows(cfg, w, gather_rows(q, cx.edge_src),
                                              gather_rows(q, cx.edge_tgt)));
  Mat c_bwd = positive_map(cfg.positive_fn,
                           pre_attention_rows(cfg, w, gather_rows(q, cx.edge_tgt),
                                              gather_rows(q, cx.edge_src)));
  Mat a0 = add(scatter_rows(c_fwd, cx.edge_src, cx.n), scatter_rows(c_bwd, cx.edge_tgt, cx.n));

  // Divergence-like aggregation with the asymmetric weights.
  auto div_c = [&](const Mat& p) {
    Mat out(cx.n, p.cols());
    for (int e = 0; e < cx.count(1); ++e) {
      const int i = cx.edge_src[e], j = cx.edge_tgt[e];
      for (int col = 0; col < p.cols(); ++col) {
        out(i, col) += -c_fwd(e, 0) * p(e, col) / a0(i, 0);
        out(j, col) += c_bwd(e, 0) * p(e, col) / a0(j, 0);
      }
    }
    return out;
  };
  auto broken_l = [&](const State& x) { return State{neg(div_c(x.p)), d_apply(cx, 0, x.q)}; };

  Metric m; // the A used for the inner product: a0 row sums, symmetrized a1
  m.a0 = a0;
  m.a1 = scale(add(c_fwd, c_bwd), 0.5);
  m.a2 = Mat::ones(cx.count(2), 1);

  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    State x{rng.normal_mat(cx.n, 3), rng.normal_mat(cx.count(1), 3)};
    State y{rng.normal_mat(cx.n, 3), rng.normal_mat(cx.count(1), 3)};
    worst = std::max(worst,
                     std::fabs(inner_a(m, broken_l(x), y) + inner_a(m, x, broken_l(y))));
  }
  CHECK(worst > 1e-6); // the audit quantity that the symmetrization drives to ~1e-13
}

TEST_CASE("rhs scale multiplies the reversible brackets only") {
  Rng rng(59);
  CliqueComplex cx = testutil::random_triangle_complex(rng);
  BracketSystem sys = make_system(BracketKind::kHamiltonian, cx, rng);
  State x = random_state(cx, 3, rng);
  State plain = sys.rhs(x);
  sys.alpha = Mat::scalar(0.0); // sigmoid(0) = 0.5
  State scaled = sys.rhs(x);
  CHECK(max_abs(sub(scaled.q, scale(plain.q, 0.5))) <= 1e-14);
  CHECK(max_abs(sub(scaled.p, scale(plain.p, 0.5))) <= 1e-14);
}
