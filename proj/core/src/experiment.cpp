#include "bracketdyn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace bracketdyn {

using nlohmann::json;

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "hamiltonian") return ModelKind::kHamiltonian;
  if (s == "gradient") return ModelKind::kGradient;
  if (s == "double_bracket" || s == "double-bracket") return ModelKind::kDoubleBracket;
  if (s == "metriplectic") return ModelKind::kMetriplectic;
  if (s == "node") return ModelKind::kNode;
  if (s == "node_ae" || s == "node+ae") return ModelKind::kNodeAe;
  throw std::invalid_argument("unknown model '" + s + "'");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kHamiltonian: return "hamiltonian";
    case ModelKind::kGradient: return "gradient";
    case ModelKind::kDoubleBracket: return "double_bracket";
    case ModelKind::kMetriplectic: return "metriplectic";
    case ModelKind::kNode: return "node";
    case ModelKind::kNodeAe: return "node_ae";
  }
  return "?";
}

bool is_bracket_model(ModelKind k) {
  return k != ModelKind::kNode && k != ModelKind::kNodeAe;
}

BracketKind to_bracket_kind(ModelKind k) {
  switch (k) {
    case ModelKind::kHamiltonian: return BracketKind::kHamiltonian;
    case ModelKind::kGradient: return BracketKind::kGradient;
    case ModelKind::kDoubleBracket: return BracketKind::kDoubleBracket;
    case ModelKind::kMetriplectic: return BracketKind::kMetriplectic;
    default: throw std::invalid_argument("model has no bracket kind");
  }
}

double default_lr(ModelKind k) {
  switch (k) {
    case ModelKind::kMetriplectic:
    case ModelKind::kNode:
    case ModelKind::kNodeAe: return 1e-4;
    default: return 1e-3;
  }
}

namespace {

UnaryFun act_from_string(const std::string& s) {
  if (s == "tanh") return UnaryFun::kTanh;
  if (s == "relu") return UnaryFun::kRelu;
  if (s == "leaky_relu") return UnaryFun::kLeakyRelu;
  if (s == "squareplus") return UnaryFun::kSquareplus;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

void parse_attention(const json& j, PreAttentionConfig& a) {
  for (const auto& [key, val] : j.items()) {
    if (key == "kind") a.kind = attention_kind_from_string(val.get<std::string>());
    else if (key == "heads") a.heads = val.get<int>();
    else if (key == "embed_dim") a.embed_dim = val.get<int>();
    else if (key == "positive_fn") a.positive_fn = positive_fn_from_string(val.get<std::string>());
    else if (key == "self_loops") a.self_loops = val.get<bool>();
    else if (key == "frozen") a.frozen = val.get<bool>();
    else if (key == "sigma_u") a.sigma_u = val.get<double>();
    else if (key == "sigma_x") a.sigma_x = val.get<double>();
    else if (key == "ell_u") a.ell_u = val.get<double>();
    else if (key == "ell_x") a.ell_x = val.get<double>();
    else throw std::invalid_argument("config: unknown attention key '" + key + "'");
  }
}

void parse_adam(const json& j, AdamConfig& a) {
  for (const auto& [key, val] : j.items()) {
    if (key == "beta1") a.beta1 = val.get<double>();
    else if (key == "beta2") a.beta2 = val.get<double>();
    else if (key == "eps") a.eps = val.get<double>();
    else if (key == "weight_decay") a.weight_decay = val.get<double>();
    else if (key == "decoupled_weight_decay") a.decoupled_weight_decay = val.get<bool>();
    else throw std::invalid_argument("config: unknown adam key '" + key + "'");
  }
}

void parse_pendulum(const json& j, PendulumParams& p) {
  for (const auto& [key, val] : j.items()) {
    if (key == "m1") p.m1 = val.get<double>();
    else if (key == "m2") p.m2 = val.get<double>();
    else if (key == "l1") p.l1 = val.get<double>();
    else if (key == "l2") p.l2 = val.get<double>();
    else if (key == "g") p.g = val.get<double>();
    else if (key == "k1") p.k1 = val.get<double>();
    else if (key == "k2") p.k2 = val.get<double>();
    else if (key == "theta0") {
      auto v = val.get<std::vector<double>>();
      if (v.size() != 4) throw std::invalid_argument("config: theta0 must have 4 entries");
      std::copy(v.begin(), v.end(), p.theta0.begin());
    } else if (key == "horizon") p.horizon = val.get<double>();
    else if (key == "snapshots") p.n_snapshots = val.get<int>();
    else throw std::invalid_argument("config: unknown pendulum key '" + key + "'");
  }
}

void parse_classify(const json& j, ClassifyConfig& c) {
  for (const auto& [key, val] : j.items()) {
    if (key == "classes") c.classes = val.get<int>();
    else if (key == "n_per_class") c.n_per_class = val.get<int>();
    else if (key == "p_in") c.p_in = val.get<double>();
    else if (key == "p_out") c.p_out = val.get<double>();
    else if (key == "separation") c.separation = val.get<double>();
    else if (key == "noise") c.noise = val.get<double>();
    else if (key == "feature_dim") c.feature_dim = val.get<int>();
    else if (key == "latent_dim") c.latent_dim = val.get<int>();
    else if (key == "horizon") c.horizon = val.get<double>();
    else if (key == "n_steps") c.n_steps = val.get<int>();
    else if (key == "scheme") c.scheme = scheme_from_string(val.get<std::string>());
    else if (key == "lr") c.lr = val.get<double>();
    else if (key == "epochs") c.epochs = val.get<int>();
    else if (key == "train_frac") c.train_frac = val.get<double>();
    else throw std::invalid_argument("config: unknown classify key '" + key + "'");
  }
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  json j = json::parse(text);
  for (const auto& [key, val] : j.items()) {
    if (key == "model") cfg.model = model_kind_from_string(val.get<std::string>());
    else if (key == "latent_dim") cfg.latent_dim = val.get<int>();
    else if (key == "encoder_width") cfg.encoder_width = val.get<int>();
    else if (key == "metriplectic_hidden") cfg.metriplectic_hidden = val.get<int>();
    else if (key == "mlp_act") cfg.mlp_act = act_from_string(val.get<std::string>());
    else if (key == "node_width") cfg.node_width = val.get<int>();
    else if (key == "node_layers") cfg.node_layers = val.get<int>();
    else if (key == "lr") cfg.lr = val.get<double>();
    else if (key == "epochs") cfg.epochs = val.get<int>();
    else if (key == "scheme") cfg.scheme = scheme_from_string(val.get<std::string>());
    else if (key == "steps_per_snapshot") cfg.steps_per_snapshot = val.get<int>();
    else if (key == "train_snapshots") cfg.train_snapshots = val.get<int>();
    else if (key == "seed") cfg.seed = val.get<uint64_t>();
    else if (key == "use_rhs_scale") cfg.use_rhs_scale = val.get<bool>();
    else if (key == "attention") parse_attention(val, cfg.attention);
    else if (key == "adam") parse_adam(val, cfg.adam);
    else if (key == "pendulum") parse_pendulum(val, cfg.pendulum);
    else if (key == "classify") parse_classify(val, cfg.classify);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

// ----- trajectory model -------------------------------------------------------

TrajectoryModel build_trajectory_model(const ExperimentConfig& cfg) {
  TrajectoryModel m;
  m.cfg = cfg;
  Rng rng(cfg.seed);
  const int f = cfg.latent_dim;
  const int w = cfg.encoder_width;
  const int data_dim = 2; // planar coordinates per node/edge

  if (cfg.model != ModelKind::kNode) {
    // Message-passing encoders/decoders: inputs are the features concatenated
    // with their graph derivative (d0^T d0 q on nodes, d0 d0^T p on edges).
    m.enc_node = add_mlp(m.params, "enc_node", {2 * data_dim, w, w, f}, rng);
    m.enc_edge = add_mlp(m.params, "enc_edge", {2 * data_dim, w, w, f}, rng);
    m.dec_node = add_mlp(m.params, "dec_node", {2 * f, w, w, data_dim}, rng);
    m.dec_edge = add_mlp(m.params, "dec_edge", {2 * f, w, w, data_dim}, rng);
  }
  if (is_bracket_model(cfg.model)) {
    for (int h = 0; h < cfg.attention.heads; ++h) {
      m.attn_wk.push_back(m.params.add("attn.wk" + std::to_string(h),
                                       init_linear(cfg.attention.embed_dim, f, rng)));
      m.attn_wq.push_back(m.params.add("attn.wq" + std::to_string(h),
                                       init_linear(cfg.attention.embed_dim, f, rng)));
    }
    if (cfg.model == ModelKind::kMetriplectic) {
      const int h = cfg.metriplectic_hidden > 0 ? cfg.metriplectic_hidden : f;
      m.f_e = add_mlp(m.params, "f_e", {f, h, 1}, rng);
      m.g_e = add_mlp(m.params, "g_e", {f, h, 1}, rng);
      m.g_s = add_mlp(m.params, "g_s", {f, h, 1}, rng);
    } else if (cfg.use_rhs_scale) {
      m.alpha = m.params.add("alpha", Mat(1, 1)); // sigmoid(0) = 0.5
    }
  }
  if (cfg.model == ModelKind::kNode) {
    const int io = 2 * 3 * data_dim; // flattened (q, p) on the K3 pendulum graph
    std::vector<int> dims{io};
    for (int l = 0; l < cfg.node_layers - 1; ++l) dims.push_back(cfg.node_width);
    dims.push_back(io);
    m.node_field = add_mlp(m.params, "node_field", dims, rng);
  } else if (cfg.model == ModelKind::kNodeAe) {
    const int io = 2 * 3 * f;
    std::vector<int> dims{io};
    for (int l = 0; l < cfg.node_layers - 1; ++l) dims.push_back(cfg.node_width);
    dims.push_back(io);
    m.node_field = add_mlp(m.params, "node_field", dims, rng);
  }
  return m;
}

namespace {

Var encode_nodes(Tape&, const CliqueComplex& cx, const MlpT<Var>& net, Var q, UnaryFun act) {
  Var der = dt_apply(cx, 0, d_apply(cx, 0, q));
  return mlp_forward(net, concat_cols(q, der), act);
}

Var encode_edges(Tape&, const CliqueComplex& cx, const MlpT<Var>& net, Var p, UnaryFun act) {
  Var der = d_apply(cx, 0, dt_apply(cx, 0, p));
  return mlp_forward(net, concat_cols(p, der), act);
}

struct LiftedTrajectoryModel {
  MlpT<Var> enc_node, enc_edge, dec_node, dec_edge, node_field;
  BracketSystemT<Var> sys;
};

LiftedTrajectoryModel lift_model(Tape& tape, const TrajectoryModel& m, const CliqueComplex& cx) {
  LiftedTrajectoryModel lm;
  const ExperimentConfig& cfg = m.cfg;
  if (cfg.model != ModelKind::kNode) {
    lm.enc_node = lift_mlp(tape, m.params, m.enc_node);
    lm.enc_edge = lift_mlp(tape, m.params, m.enc_edge);
    lm.dec_node = lift_mlp(tape, m.params, m.dec_node);
    lm.dec_edge = lift_mlp(tape, m.params, m.dec_edge);
  }
  if (cfg.model == ModelKind::kNode || cfg.model == ModelKind::kNodeAe)
    lm.node_field = lift_mlp(tape, m.params, m.node_field);
  if (is_bracket_model(cfg.model)) {
    lm.sys.kind = to_bracket_kind(cfg.model);
    lm.sys.cx = &cx;
    lm.sys.cfg = cfg.attention;
    for (size_t h = 0; h < m.attn_wk.size(); ++h) {
      lm.sys.attn.wk.push_back(tape.leaf(m.params.items[size_t(m.attn_wk[h])].value, m.attn_wk[h]));
      lm.sys.attn.wq.push_back(tape.leaf(m.params.items[size_t(m.attn_wq[h])].value, m.attn_wq[h]));
    }
    if (cfg.model == ModelKind::kMetriplectic) {
      lm.sys.nets.f_e = lift_mlp(tape, m.params, m.f_e);
      lm.sys.nets.g_e = lift_mlp(tape, m.params, m.g_e);
      lm.sys.nets.g_s = lift_mlp(tape, m.params, m.g_s);
      lm.sys.nets.act = cfg.mlp_act == UnaryFun::kSquareplus ? UnaryFun::kSquareplus : UnaryFun::kTanh;
    } else if (m.alpha >= 0) {
      lm.sys.alpha = tape.leaf(m.params.items[size_t(m.alpha)].value, m.alpha);
    }
  }
  return lm;
}

} // namespace

TrajectoryForward trajectory_forward(Tape& tape, const TrajectoryModel& model,
                                     const PendulumGraphData& data, bool with_outputs) {
  const ExperimentConfig& cfg = model.cfg;
  const CliqueComplex& cx = data.cx;
  const int total = int(data.q.size());
  const int K = cfg.train_snapshots > 0 ? std::min(cfg.train_snapshots, total) : total;
  if (K < 2) throw std::invalid_argument("trajectory_forward: need at least 2 snapshots");
  const double snap_dt = data.t[1] - data.t[0];
  const double dt = snap_dt / cfg.steps_per_snapshot;
  const UnaryFun act = cfg.mlp_act;

  LiftedTrajectoryModel lm = lift_model(tape, model, cx);

  StateT<Var> state;
  if (cfg.model == ModelKind::kNode) {
    state = {tape.constant(data.q[0]), tape.constant(data.p[0])};
  } else {
    Var q0 = tape.constant(data.q[0]);
    Var p0 = tape.constant(data.p[0]);
    state.q = encode_nodes(tape, cx, lm.enc_node, q0, act);
    state.p = encode_edges(tape, cx, lm.enc_edge, p0, act);
  }
  if (is_bracket_model(cfg.model) && cfg.attention.frozen) lm.sys.freeze_from(state.q);

  auto rhs = [&](const StateT<Var>& x) -> StateT<Var> {
    if (cfg.model == ModelKind::kNode || cfg.model == ModelKind::kNodeAe) {
      const int nq = rows(x.q) * cols(x.q);
      const int np = rows(x.p) * cols(x.p);
      Var flat = concat_cols(reshape(x.q, 1, nq), reshape(x.p, 1, np));
      Var out = mlp_forward(lm.node_field, flat, act);
      return {reshape(slice_cols(out, 0, nq), rows(x.q), cols(x.q)),
              reshape(slice_cols(out, nq, nq + np), rows(x.p), cols(x.p))};
    }
    return lm.sys.rhs(x);
  };

  TrajectoryForward out;
  Var acc_q = tape.constant(Mat::scalar(0.0));
  Var acc_p = tape.constant(Mat::scalar(0.0));
  const double nq_entries = double(cx.n) * 2.0;
  const double np_entries = double(cx.count(1)) * 2.0;

  for (int k = 0; k < K; ++k) {
    Var pred_q, pred_p;
    if (cfg.model == ModelKind::kNode) {
      pred_q = state.q;
      pred_p = state.p;
    } else {
      pred_q = mlp_forward(lm.dec_node, concat_cols(state.q, dt_apply(cx, 0, d_apply(cx, 0, state.q))), act);
      pred_p = mlp_forward(lm.dec_edge, concat_cols(state.p, d_apply(cx, 0, dt_apply(cx, 0, state.p))), act);
    }
    acc_q = add(acc_q, sum_all(map_abs(sub(pred_q, tape.constant(data.q[size_t(k)])))));
    acc_p = add(acc_p, sum_all(map_abs(sub(pred_p, tape.constant(data.p[size_t(k)])))));

    if (with_outputs) {
      out.predictions_q.push_back(State{tape.value(pred_q), tape.value(pred_p)});
      out.latent_energy.push_back(tape.scalar_value(kinetic_energy(state)));
      if (cfg.model == ModelKind::kMetriplectic) {
        auto m_now = lm.sys.metric_at(state.q);
        auto fn = metriplectic_functionals(cx, lm.sys.nets, m_now, state);
        out.energy.push_back(tape.scalar_value(fn.energy));
        out.entropy.push_back(tape.scalar_value(fn.entropy));
      }
    }

    if (k + 1 < K) {
      for (int s = 0; s < cfg.steps_per_snapshot; ++s)
        state = cfg.scheme == Scheme::kEuler ? euler_step(rhs, state, dt)
                                             : rk4_step(rhs, state, dt);
    }
  }

  out.mae_q = scale(acc_q, 1.0 / (K * nq_entries));
  out.mae_p = scale(acc_p, 1.0 / (K * np_entries));
  out.loss = scale(add(acc_q, acc_p), 1.0 / (K * (nq_entries + np_entries)));
  return out;
}

TrainResult train_trajectory(const ExperimentConfig& cfg, const PendulumGraphData& data,
                             TrajectoryModel* model_out) {
  const auto t_start = std::chrono::steady_clock::now();
  TrajectoryModel model = build_trajectory_model(cfg);

  AdamConfig acfg = cfg.adam;
  acfg.lr = cfg.lr > 0 ? cfg.lr : default_lr(cfg.model);
  Adam adam(acfg);

  TrainResult res;
  Tape tape;
  std::vector<Mat> best_values;
  double best_loss = std::numeric_limits<double>::infinity();
  const int log_every = std::max(1, cfg.epochs / 200);

  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    tape.reset();
    TrajectoryForward fwd = trajectory_forward(tape, model, data, false);
    const double loss = tape.scalar_value(fwd.loss);
    if (!std::isfinite(loss))
      throw std::runtime_error("train_trajectory: loss diverged (non-finite) at epoch " +
                               std::to_string(epoch));
    if (epoch == 0) {
      res.initial_mae_q = tape.scalar_value(fwd.mae_q);
      res.initial_mae_p = tape.scalar_value(fwd.mae_p);
      res.initial_mae_total = loss;
    }
    if (loss < best_loss) {
      best_loss = loss;
      res.best_epoch = epoch;
      res.final_mae_q = tape.scalar_value(fwd.mae_q);
      res.final_mae_p = tape.scalar_value(fwd.mae_p);
      res.final_mae_total = loss;
      best_values.clear();
      for (const auto& e : model.params.items) best_values.push_back(e.value);
    }
    if (epoch % log_every == 0) res.loss_history.push_back(loss);
    if (epoch == cfg.epochs) break;

    tape.backward(fwd.loss);
    model.params.zero_grads();
    std::vector<Mat> grads;
    grads.reserve(model.params.items.size());
    for (auto& e : model.params.items) grads.push_back(std::move(e.grad));
    tape.accumulate_param_grads(grads);
    for (size_t i = 0; i < grads.size(); ++i) model.params.items[i].grad = std::move(grads[i]);
    adam.step(model.params);
  }
  res.epochs_run = cfg.epochs;
  res.skipped_steps = adam.steps_skipped();

  // Leave the model holding the lowest-error weights seen during training.
  for (size_t i = 0; i < best_values.size(); ++i) model.params.items[i].value = best_values[i];

  if (is_bracket_model(cfg.model)) {
    tape.reset();
    TrajectoryForward fwd = trajectory_forward(tape, model, data, true);
    for (size_t k = 1; k < fwd.latent_energy.size(); ++k)
      res.latent_energy_drift = std::max(
          res.latent_energy_drift, std::fabs(fwd.latent_energy[k] - fwd.latent_energy[k - 1]));
  }

  res.runtime_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  if (model_out) *model_out = std::move(model);
  return res;
}

EvalResult eval_trajectory(const TrajectoryModel& model, const PendulumGraphData& data) {
  Tape tape;
  TrajectoryForward fwd = trajectory_forward(tape, model, data, true);
  EvalResult r;
  r.mae_q = tape.scalar_value(fwd.mae_q);
  r.mae_p = tape.scalar_value(fwd.mae_p);
  r.mae_total = tape.scalar_value(fwd.loss);
  const size_t K = fwd.predictions_q.size();
  r.t.assign(data.t.begin(), data.t.begin() + long(K));
  r.predictions = std::move(fwd.predictions_q);
  r.latent_energy = std::move(fwd.latent_energy);
  r.energy = std::move(fwd.energy);
  r.entropy = std::move(fwd.entropy);
  return r;
}

std::string train_metrics_json(const ExperimentConfig& cfg, const TrainResult& r) {
  json j;
  j["model"] = to_string(cfg.model);
  j["seed"] = cfg.seed;
  j["epochs"] = r.epochs_run;
  j["lr"] = cfg.lr > 0 ? cfg.lr : default_lr(cfg.model);
  j["initial_mae"] = {{"q", r.initial_mae_q}, {"p", r.initial_mae_p}, {"total", r.initial_mae_total}};
  j["final_mae"] = {{"q", r.final_mae_q}, {"p", r.final_mae_p}, {"total", r.final_mae_total}};
  j["best_epoch"] = r.best_epoch;
  j["skipped_steps"] = r.skipped_steps;
  j["latent_energy_drift"] = r.latent_energy_drift;
  j["runtime_sec"] = r.runtime_sec;
  j["loss_history"] = r.loss_history;
  return j.dump(2);
}

// ----- node classification ------------------------------------------------------

namespace {

struct ClsSplit {
  std::vector<char> train; // per node
  int n_train = 0, n_test = 0;
};

// Stratified split: per class, a seeded shuffle, first train_frac to train.
ClsSplit make_split(const PlantedPartition& data, double train_frac, uint64_t seed) {
  const int n = data.graph.n;
  ClsSplit s;
  s.train.assign(size_t(n), 0);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const int classes = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  for (int c = 0; c < classes; ++c) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (data.labels[size_t(i)] == c) idx.push_back(i);
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[size_t(rng.uniform_int(0, int(i) - 1))]);
    const int k = std::max(1, int(train_frac * double(idx.size())));
    for (int i = 0; i < int(idx.size()); ++i) s.train[size_t(idx[size_t(i)])] = i < k ? 1 : 0;
  }
  for (char c : s.train) (c ? s.n_train : s.n_test)++;
  return s;
}

struct LiftedClassifier {
  MlpT<Var> enc, dec, head;
  BracketSystemT<Var> sys;
};

struct ClsForward {
  Var loss;
  Mat logits;
};

ClsForward classifier_forward(Tape& tape, const ClassifierModel& model,
                              const PlantedPartition& data, const CliqueComplex& cx,
                              const ClsSplit& split, int steps) {
  const ClassifyConfig& c = model.cfg.classify;
  const UnaryFun act = model.cfg.mlp_act;

  LiftedClassifier lm;
  lm.enc = lift_mlp(tape, model.params, model.enc);
  lm.dec = lift_mlp(tape, model.params, model.dec);
  lm.head = lift_mlp(tape, model.params, model.head);
  lm.sys.kind = to_bracket_kind(model.cfg.model);
  lm.sys.cx = &cx;
  lm.sys.cfg = model.cfg.attention;
  for (size_t h = 0; h < model.attn_wk.size(); ++h) {
    lm.sys.attn.wk.push_back(
        tape.leaf(model.params.items[size_t(model.attn_wk[h])].value, model.attn_wk[h]));
    lm.sys.attn.wq.push_back(
        tape.leaf(model.params.items[size_t(model.attn_wq[h])].value, model.attn_wq[h]));
  }
  if (model.cfg.model == ModelKind::kMetriplectic) {
    lm.sys.nets.f_e = lift_mlp(tape, model.params, model.f_e);
    lm.sys.nets.g_e = lift_mlp(tape, model.params, model.g_e);
    lm.sys.nets.g_s = lift_mlp(tape, model.params, model.g_s);
  } else if (model.alpha >= 0) {
    lm.sys.alpha = tape.leaf(model.params.items[size_t(model.alpha)].value, model.alpha);
  }

  // q(0) = phi(q): affine nodal encoding; p(0) = d0 q(0).
  Var feat = tape.constant(data.features);
  StateT<Var> state;
  state.q = mlp_forward(lm.enc, feat, act);
  state.p = d_apply(cx, 0, state.q);
  if (model.cfg.attention.frozen) lm.sys.freeze_from(state.q);

  const double dt = c.horizon / steps;
  auto rhs = [&](const StateT<Var>& x) { return lm.sys.rhs(x); };
  for (int s = 0; s < steps; ++s)
    state = c.scheme == Scheme::kEuler ? euler_step(rhs, state, dt) : rk4_step(rhs, state, dt);

  Var decoded = mlp_forward(lm.dec, state.q, act);
  Var logits = mlp_forward(lm.head, decoded, act);

  // Cross entropy with a per-row shift for stability; the shift is an exact
  // invariance of log-softmax so it is applied as a constant.
  Mat logit_vals = tape.value(logits);
  const int n = logit_vals.rows(), k = logit_vals.cols();
  Mat shift(n, k);
  for (int i = 0; i < n; ++i) {
    double mx = logit_vals(i, 0);
    for (int j = 1; j < k; ++j) mx = std::max(mx, logit_vals(i, j));
    for (int j = 0; j < k; ++j) shift(i, j) = mx;
  }
  Var z = sub(logits, tape.constant(shift));
  Var log_norm = map_log(row_sum(map_exp(z))); // n x 1
  Mat onehot(n, k);
  for (int i = 0; i < n; ++i) onehot(i, data.labels[size_t(i)]) = 1.0;
  Var z_true = row_sum(hadamard(z, tape.constant(onehot)));
  Mat mask(n, 1);
  for (int i = 0; i < n; ++i) mask(i, 0) = split.train[size_t(i)] ? 1.0 : 0.0;
  Var per_node = sub(log_norm, z_true);
  ClsForward out;
  out.loss = scale(sum_all(hadamard(per_node, tape.constant(mask))), 1.0 / split.n_train);
  out.logits = std::move(logit_vals);
  return out;
}

double accuracy_on(const Mat& logits, const std::vector<int>& labels,
                   const std::vector<char>& mask, bool want_train) {
  int correct = 0, count = 0;
  for (int i = 0; i < logits.rows(); ++i) {
    if (bool(mask[size_t(i)]) != want_train) continue;
    int arg = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, arg)) arg = j;
    correct += arg == labels[size_t(i)] ? 1 : 0;
    ++count;
  }
  return count == 0 ? 0.0 : double(correct) / double(count);
}

ClassifierModel build_classifier_model(const ExperimentConfig& cfg, int feature_dim) {
  if (!is_bracket_model(cfg.model))
    throw std::invalid_argument("classifier: model must be one of the four brackets");
  ClassifierModel m;
  m.cfg = cfg;
  Rng rng(cfg.seed + 1);
  const ClassifyConfig& c = cfg.classify;
  const int f = c.latent_dim;
  m.enc = add_mlp(m.params, "enc", {feature_dim, f}, rng);
  m.dec = add_mlp(m.params, "dec", {f, f}, rng);
  m.head = add_mlp(m.params, "head", {f, c.classes}, rng);
  for (int h = 0; h < cfg.attention.heads; ++h) {
    m.attn_wk.push_back(
        m.params.add("attn.wk" + std::to_string(h), init_linear(cfg.attention.embed_dim, f, rng)));
    m.attn_wq.push_back(
        m.params.add("attn.wq" + std::to_string(h), init_linear(cfg.attention.embed_dim, f, rng)));
  }
  if (cfg.model == ModelKind::kMetriplectic) {
    m.f_e = add_mlp(m.params, "f_e", {f, f, 1}, rng);
    m.g_e = add_mlp(m.params, "g_e", {f, f, 1}, rng);
    m.g_s = add_mlp(m.params, "g_s", {f, f, 1}, rng);
  } else {
    m.alpha = m.params.add("alpha", Mat(1, 1)); // rhs scaled by sigmoid(alpha)
  }
  return m;
}

} // namespace

ClassifyResult train_node_classifier(const ExperimentConfig& cfg, const PlantedPartition& data,
                                     ClassifierModel* model_out, int override_steps) {
  const ClassifyConfig& c = cfg.classify;
  if (c.classes > data.graph.n)
    throw std::invalid_argument("train_node_classifier: more classes than nodes");
  CliqueComplex cx = build_complex(data.graph.n, data.graph.edges);
  ClassifierModel model = build_classifier_model(cfg, data.features.cols());
  ClsSplit split = make_split(data, c.train_frac, cfg.seed);
  const int steps = override_steps > 0 ? override_steps : c.n_steps;

  AdamConfig acfg = cfg.adam;
  acfg.lr = c.lr;
  Adam adam(acfg);

  Tape tape;
  ClassifyResult res;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    tape.reset();
    ClsForward fwd = classifier_forward(tape, model, data, cx, split, steps);
    res.final_loss = tape.scalar_value(fwd.loss);
    tape.backward(fwd.loss);
    model.params.zero_grads();
    std::vector<Mat> grads;
    grads.reserve(model.params.items.size());
    for (auto& e : model.params.items) grads.push_back(std::move(e.grad));
    tape.accumulate_param_grads(grads);
    for (size_t i = 0; i < grads.size(); ++i) model.params.items[i].grad = std::move(grads[i]);
    adam.step(model.params);
    res.epochs_run = epoch + 1;
  }
  tape.reset();
  ClsForward fwd = classifier_forward(tape, model, data, cx, split, steps);
  res.final_loss = tape.scalar_value(fwd.loss);
  res.train_accuracy = accuracy_on(fwd.logits, data.labels, split.train, true);
  res.test_accuracy = accuracy_on(fwd.logits, data.labels, split.train, false);
  if (model_out) *model_out = std::move(model);
  return res;
}

ClassifyResult eval_node_classifier(const ClassifierModel& model, const PlantedPartition& data,
                                    int override_steps) {
  const ClassifyConfig& c = model.cfg.classify;
  CliqueComplex cx = build_complex(data.graph.n, data.graph.edges);
  ClsSplit split = make_split(data, c.train_frac, model.cfg.seed);
  Tape tape;
  ClsForward fwd = classifier_forward(tape, model, data, cx, split,
                                      override_steps > 0 ? override_steps : c.n_steps);
  ClassifyResult res;
  res.final_loss = tape.scalar_value(fwd.loss);
  res.train_accuracy = accuracy_on(fwd.logits, data.labels, split.train, true);
  res.test_accuracy = accuracy_on(fwd.logits, data.labels, split.train, false);
  return res;
}

std::vector<DepthStudyRow> depth_study(const ExperimentConfig& cfg,
                                       const std::vector<int>& step_counts) {
  Rng rng(cfg.seed);
  const ClassifyConfig& c = cfg.classify;
  PlantedPartition data = planted_partition(c.n_per_class, c.classes, c.p_in, c.p_out,
                                            c.separation, c.noise, c.feature_dim, rng);
  std::vector<DepthStudyRow> rows;
  for (ModelKind mk : {ModelKind::kHamiltonian, ModelKind::kGradient, ModelKind::kDoubleBracket,
                       ModelKind::kMetriplectic}) {
    DepthStudyRow row;
    row.model = mk;
    ExperimentConfig ecfg = cfg;
    ecfg.model = mk;
    for (int steps : step_counts) {
      ClassifyResult r = train_node_classifier(ecfg, data, nullptr, steps);
      row.steps.push_back(steps);
      row.test_accuracy.push_back(r.test_accuracy);
    }
    const auto [mn, mx] = std::minmax_element(row.test_accuracy.begin(), row.test_accuracy.end());
    row.spread = *mx - *mn;
    rows.push_back(std::move(row));
  }
  return rows;
}

// ----- persistence ---------------------------------------------------------------

void save_params(const ParamSet& ps, const std::string& path) {
  json j;
  j["params"] = json::array();
  for (const auto& e : ps.items) {
    json p;
    p["name"] = e.name;
    p["rows"] = e.value.rows();
    p["cols"] = e.value.cols();
    p["data"] = std::vector<double>(e.value.data(), e.value.data() + e.value.size());
    j["params"].push_back(std::move(p));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_params: cannot write '" + path + "'");
  out << j.dump();
}

void load_params(ParamSet& ps, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_params: cannot open '" + path + "'");
  json j = json::parse(in);
  for (const auto& p : j.at("params")) {
    const std::string name = p.at("name").get<std::string>();
    auto it = std::find_if(ps.items.begin(), ps.items.end(),
                           [&](const ParamSet::Entry& e) { return e.name == name; });
    if (it == ps.items.end())
      throw std::runtime_error("load_params: unknown parameter '" + name + "'");
    const int r = p.at("rows").get<int>(), c = p.at("cols").get<int>();
    if (it->value.rows() != r || it->value.cols() != c)
      throw std::runtime_error("load_params: shape mismatch for '" + name + "'");
    auto data = p.at("data").get<std::vector<double>>();
    if (data.size() != it->value.size())
      throw std::runtime_error("load_params: data size mismatch for '" + name + "'");
    std::copy(data.begin(), data.end(), it->value.data());
  }
}

} // namespace bracketdyn
