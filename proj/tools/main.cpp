// Command line front end: structure verification, pendulum data generation,
// trajectory training/evaluation, node classification, and the depth study.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bracketdyn/experiment.hpp"

using namespace bracketdyn;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text << "\n";
}

std::string csv_row(const std::vector<double>& vals) {
  std::ostringstream os;
  os.precision(17);
  for (size_t i = 0; i < vals.size(); ++i) os << (i ? "," : "") << vals[i];
  return os.str();
}

int cmd_verify_structure(const std::string& graph_path, const std::string& bracket, int trials,
                         uint64_t seed, const std::string& out_path) {
  Rng rng(seed);
  BracketKind kind = bracket_kind_from_string(bracket);

  PreAttentionConfig cfg;
  cfg.kind = AttentionKind::kScaledDotProduct;
  cfg.embed_dim = 4;
  const int features = 3;

  StructureReport total;
  auto run_graph = [&](const GraphSpec& gs) {
    CliqueComplex cx = build_complex(gs.n, gs.edges);
    BracketSystem sys;
    sys.kind = kind;
    sys.cx = &cx;
    sys.cfg = cfg;
    sys.attn.wk = {rng.normal_mat(cfg.embed_dim, features, 0.5)};
    sys.attn.wq = {rng.normal_mat(cfg.embed_dim, features, 0.5)};
    if (kind == BracketKind::kMetriplectic) {
      const int h = 4;
      auto net = [&](MlpT<Mat>& n) {
        n.w = {rng.normal_mat(h, features, 0.5), rng.normal_mat(1, h, 0.5)};
        n.b = {Mat(1, h), Mat(1, 1)};
      };
      net(sys.nets.f_e);
      net(sys.nets.g_e);
      net(sys.nets.g_s);
    }
    const int per_graph = 4;
    StructureReport r = structure_audit(sys, per_graph, rng);
    total.skew = std::max(total.skew, r.skew);
    total.g_self_adjoint = std::max(total.g_self_adjoint, r.g_self_adjoint);
    total.g_negative = std::max(total.g_negative, r.g_negative);
    total.m_self_adjoint = std::max(total.m_self_adjoint, r.m_self_adjoint);
    total.m_negative = std::max(total.m_negative, r.m_negative);
    total.dual_exactness = std::max(total.dual_exactness, r.dual_exactness);
    total.adjointness = std::max(total.adjointness, r.adjointness);
    total.degeneracy_ls = std::max(total.degeneracy_ls, r.degeneracy_ls);
    total.degeneracy_me = std::max(total.degeneracy_me, r.degeneracy_me);
    total.first_law = std::max(total.first_law, r.first_law);
    total.second_law_neg = std::max(total.second_law_neg, r.second_law_neg);
    total.trials += r.trials;
  };

  if (!graph_path.empty()) {
    GraphSpec gs = load_graph(graph_path);
    while (total.trials < trials) run_graph(gs);
  } else {
    // Fresh random graphs; metriplectic audits need triangles.
    while (total.trials < trials) {
      const int n = rng.uniform_int(6, 24);
      GraphSpec gs = kind == BracketKind::kMetriplectic ? triangulated_ring(n)
                                                        : erdos_renyi(n, 0.3, rng);
      run_graph(gs);
    }
  }
  write_text(out_path, to_json(total));
  return 0;
}

int cmd_simulate_pendulum(PendulumParams pp, const std::string& out_csv,
                          const std::string& energy_csv) {
  PendulumTrajectory traj = simulate_pendulum(pp);
  std::ostringstream os;
  os << "t,x1,y1,x2,y2\n";
  for (size_t k = 0; k < traj.t.size(); ++k)
    os << csv_row({traj.t[k], traj.xy(int(k), 0), traj.xy(int(k), 1), traj.xy(int(k), 2),
                   traj.xy(int(k), 3)})
       << "\n";
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write '" + out_csv + "'");
  out << os.str();

  if (!energy_csv.empty()) {
    std::ofstream eout(energy_csv);
    if (!eout) throw std::runtime_error("cannot write '" + energy_csv + "'");
    eout << "t,E\n";
    eout.precision(17);
    for (size_t k = 0; k < traj.t.size(); ++k)
      eout << traj.t[k] << "," << pendulum_energy(pp, traj.state[k]) << "\n";
  }
  std::cerr << "wrote " << traj.t.size() << " snapshots (dt=" << traj.dt
            << ", converged=" << (traj.dt_converged ? "yes" : "no") << ")\n";
  return 0;
}

void write_trajectory_csv(const std::string& path, const EvalResult& ev) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "t";
  const int n_nodes = ev.predictions.empty() ? 0 : ev.predictions[0].q.rows();
  const int n_edges = ev.predictions.empty() ? 0 : ev.predictions[0].p.rows();
  for (int i = 0; i < n_nodes; ++i) out << ",qx" << i << ",qy" << i;
  for (int e = 0; e < n_edges; ++e) out << ",px" << e << ",py" << e;
  out << "\n";
  out.precision(17);
  for (size_t k = 0; k < ev.predictions.size(); ++k) {
    out << ev.t[k];
    for (int i = 0; i < n_nodes; ++i)
      out << "," << ev.predictions[k].q(i, 0) << "," << ev.predictions[k].q(i, 1);
    for (int e = 0; e < n_edges; ++e)
      out << "," << ev.predictions[k].p(e, 0) << "," << ev.predictions[k].p(e, 1);
    out << "\n";
  }
}

void write_energy_csv(const std::string& path, const EvalResult& ev) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const bool metriplectic = !ev.energy.empty();
  out << (metriplectic ? "t,E,S\n" : "t,E\n");
  out.precision(17);
  for (size_t k = 0; k < ev.t.size(); ++k) {
    if (metriplectic)
      out << ev.t[k] << "," << ev.energy[k] << "," << ev.entropy[k] << "\n";
    else
      out << ev.t[k] << "," << ev.latent_energy[k] << "\n";
  }
}

int cmd_train(const std::string& config_path, int64_t seed_override, const std::string& out_dir) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (seed_override >= 0) cfg.seed = uint64_t(seed_override);
  PendulumGraphData data = build_pendulum_graph(simulate_pendulum(cfg.pendulum));
  TrajectoryModel model;
  TrainResult res = train_trajectory(cfg, data, &model);
  write_text(out_dir + "/metrics.json", train_metrics_json(cfg, res));
  save_params(model.params, out_dir + "/model.json");
  EvalResult ev = eval_trajectory(model, data);
  write_trajectory_csv(out_dir + "/trajectory.csv", ev);
  write_energy_csv(out_dir + "/energy.csv", ev);
  std::cerr << "final total MAE " << res.final_mae_total << " (initial " << res.initial_mae_total
            << ", best epoch " << res.best_epoch << ")\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& model_path, int64_t seed_override,
             const std::string& out_dir) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (seed_override >= 0) cfg.seed = uint64_t(seed_override);
  PendulumGraphData data = build_pendulum_graph(simulate_pendulum(cfg.pendulum));
  TrajectoryModel model = build_trajectory_model(cfg);
  load_params(model.params, model_path);
  EvalResult ev = eval_trajectory(model, data);
  nlohmann::json j;
  j["model"] = to_string(cfg.model);
  j["mae"] = {{"q", ev.mae_q}, {"p", ev.mae_p}, {"total", ev.mae_total}};
  write_text(out_dir + "/metrics.json", j.dump(2));
  write_trajectory_csv(out_dir + "/trajectory.csv", ev);
  write_energy_csv(out_dir + "/energy.csv", ev);
  return 0;
}

int cmd_classify(const std::string& config_path, int64_t seed_override,
                 const std::string& out_path) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (seed_override >= 0) cfg.seed = uint64_t(seed_override);
  Rng rng(cfg.seed);
  const ClassifyConfig& c = cfg.classify;
  PlantedPartition data = planted_partition(c.n_per_class, c.classes, c.p_in, c.p_out,
                                            c.separation, c.noise, c.feature_dim, rng);
  ClassifyResult r = train_node_classifier(cfg, data);
  nlohmann::json j;
  j["model"] = to_string(cfg.model);
  j["seed"] = cfg.seed;
  j["train_accuracy"] = r.train_accuracy;
  j["test_accuracy"] = r.test_accuracy;
  j["final_loss"] = r.final_loss;
  j["epochs"] = r.epochs_run;
  write_text(out_path, j.dump(2));
  return 0;
}

int cmd_depth_study(const std::string& config_path, int64_t seed_override,
                    std::vector<int> steps, const std::string& out_path) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (seed_override >= 0) cfg.seed = uint64_t(seed_override);
  if (steps.empty()) steps = {1, 2, 4, 8, 16};
  auto rows = depth_study(cfg, steps);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r;
    r["model"] = to_string(row.model);
    r["steps"] = row.steps;
    r["test_accuracy"] = row.test_accuracy;
    r["spread"] = row.spread;
    j.push_back(std::move(r));
  }
  write_text(out_path, j.dump(2));
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-preserving bracket dynamics on graphs"};
  app.require_subcommand(1);

  // verify-structure
  std::string vs_graph, vs_bracket = "hamiltonian", vs_out = "-";
  int vs_trials = 100;
  uint64_t vs_seed = 0;
  auto* vs = app.add_subcommand("verify-structure",
                                "Randomized audit of the bracket identities; emits JSON");
  vs->add_option("--graph", vs_graph, "edge-list or JSON graph file (default: random graphs)");
  vs->add_option("--bracket", vs_bracket, "hamiltonian|gradient|double_bracket|metriplectic");
  vs->add_option("--trials", vs_trials, "number of random trials");
  vs->add_option("--seed", vs_seed, "random seed");
  vs->add_option("--out", vs_out, "output path ('-' for stdout)");

  // simulate-pendulum
  PendulumParams pp;
  std::vector<double> sp_theta0;
  std::string sp_out = "traj.csv", sp_energy;
  auto* sp = app.add_subcommand("simulate-pendulum",
                                "Damped double-pendulum ground truth to CSV (t,x1,y1,x2,y2)");
  sp->add_option("--T", pp.horizon, "total simulation time");
  sp->add_option("--snapshots", pp.n_snapshots, "number of evenly spaced snapshots");
  sp->add_option("--m1", pp.m1);
  sp->add_option("--m2", pp.m2);
  sp->add_option("--l1", pp.l1);
  sp->add_option("--l2", pp.l2);
  sp->add_option("--g", pp.g);
  sp->add_option("--k1", pp.k1, "damping constant 1");
  sp->add_option("--k2", pp.k2, "damping constant 2");
  sp->add_option("--theta0", sp_theta0, "initial (theta1 theta2 omega1 omega2)")->expected(4);
  sp->add_option("--out", sp_out, "output CSV path");
  sp->add_option("--energy-out", sp_energy, "optional CSV of mechanical energy over time");

  // train / eval
  std::string tr_config, tr_dir = ".";
  int64_t tr_seed = -1;
  auto* tr = app.add_subcommand("train", "Train a trajectory model from an experiment config");
  tr->add_option("--config", tr_config, "experiment config (JSON)")->required();
  tr->add_option("--seed", tr_seed, "override config seed");
  tr->add_option("--out-dir", tr_dir, "directory for metrics.json/model.json/CSVs");

  std::string ev_config, ev_model, ev_dir = ".";
  int64_t ev_seed = -1;
  auto* ev = app.add_subcommand("eval", "Evaluate a saved model on freshly generated data");
  ev->add_option("--config", ev_config, "experiment config (JSON)")->required();
  ev->add_option("--model", ev_model, "model.json produced by train")->required();
  ev->add_option("--seed", ev_seed, "override config seed");
  ev->add_option("--out-dir", ev_dir, "directory for metrics.json/CSVs");

  // classify / depth-study
  std::string cl_config, cl_out = "-";
  int64_t cl_seed = -1;
  auto* cl = app.add_subcommand("classify", "Synthetic planted-partition node classification");
  cl->add_option("--config", cl_config, "experiment config (JSON)")->required();
  cl->add_option("--seed", cl_seed, "override config seed");
  cl->add_option("--out", cl_out, "metrics output path");

  std::string ds_config, ds_out = "-";
  int64_t ds_seed = -1;
  std::vector<int> ds_steps;
  auto* ds = app.add_subcommand("depth-study",
                                "Fixed-horizon accuracy stability across step counts");
  ds->add_option("--config", ds_config, "experiment config (JSON)")->required();
  ds->add_option("--seed", ds_seed, "override config seed");
  ds->add_option("--steps", ds_steps, "step counts (default 1 2 4 8 16)");
  ds->add_option("--out", ds_out, "metrics output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (vs->parsed()) return cmd_verify_structure(vs_graph, vs_bracket, vs_trials, vs_seed, vs_out);
    if (sp->parsed()) {
      if (sp_theta0.size() == 4) std::copy(sp_theta0.begin(), sp_theta0.end(), pp.theta0.begin());
      return cmd_simulate_pendulum(pp, sp_out, sp_energy);
    }
    if (tr->parsed()) return cmd_train(tr_config, tr_seed, tr_dir);
    if (ev->parsed()) return cmd_eval(ev_config, ev_model, ev_seed, ev_dir);
    if (cl->parsed()) return cmd_classify(cl_config, cl_seed, cl_out);
    if (ds->parsed()) return cmd_depth_study(ds_config, ds_seed, ds_steps, ds_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
