#include "pdball/nn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace pdball {
namespace {

constexpr int kHidden1 = 256;
constexpr int kHidden2 = 128;

DenseLayer make_dense(int in, int out, std::mt19937_64& rng) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.W.resize(static_cast<std::size_t>(in) * out);
  l.b.assign(out, 0.0);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (double& w : l.W) w = u(rng);
  return l;
}

BatchNormLayer make_bn(int dim) {
  BatchNormLayer bn;
  bn.dim = dim;
  bn.gamma.assign(dim, 1.0);
  bn.beta.assign(dim, 0.0);
  bn.run_mean.assign(dim, 0.0);
  bn.run_var.assign(dim, 1.0);
  return bn;
}

// y = x·Wᵀ + b for row-major x (n×in), W (out×in).
void dense_forward(const DenseLayer& l, const Vec& x, int n, Vec& y) {
  y.assign(static_cast<std::size_t>(n) * l.out, 0.0);
  for (int r = 0; r < n; ++r) {
    const double* xr = &x[static_cast<std::size_t>(r) * l.in];
    double* yr = &y[static_cast<std::size_t>(r) * l.out];
    for (int o = 0; o < l.out; ++o) {
      const double* w = &l.W[static_cast<std::size_t>(o) * l.in];
      double s = l.b[o];
      for (int i = 0; i < l.in; ++i) s += w[i] * xr[i];
      yr[o] = s;
    }
  }
}

// Given dY (n×out), accumulates dW, db and returns dX (n×in).
void dense_backward(const DenseLayer& l, const Vec& x, const Vec& dy, int n, Vec& dW, Vec& db,
                    Vec& dx) {
  dW.assign(l.W.size(), 0.0);
  db.assign(l.b.size(), 0.0);
  dx.assign(static_cast<std::size_t>(n) * l.in, 0.0);
  for (int r = 0; r < n; ++r) {
    const double* xr = &x[static_cast<std::size_t>(r) * l.in];
    const double* dyr = &dy[static_cast<std::size_t>(r) * l.out];
    double* dxr = &dx[static_cast<std::size_t>(r) * l.in];
    for (int o = 0; o < l.out; ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      db[o] += g;
      double* dWo = &dW[static_cast<std::size_t>(o) * l.in];
      const double* Wo = &l.W[static_cast<std::size_t>(o) * l.in];
      for (int i = 0; i < l.in; ++i) {
        dWo[i] += g * xr[i];
        dxr[i] += g * Wo[i];
      }
    }
  }
}

struct HeadCache {
  Vec xhat;      // n×D
  Vec std_inv;   // D
  Vec a1;        // n×D, batch-norm output
  Vec z1, h1;    // n×256
  Vec z2, h2;    // n×128
  Vec d2;        // n×128, after dropout
  Vec probs;     // n×C
  bool batch_stats = false;
};

// Shared forward pass; `train` selects batch statistics + dropout.
double forward(const Model& model, const Vec& X, const std::vector<int>& y, int n, bool train,
               bool frozen_stats, const std::vector<char>& keep_mask, HeadCache& c,
               Vec* run_mean_out, Vec* run_var_out) {
  const int D = model.bn.dim;
  if (static_cast<int>(X.size()) != n * D) throw std::invalid_argument("feature matrix shape");

  c.batch_stats = train && !frozen_stats;
  c.std_inv.assign(D, 0.0);
  Vec mean(D, 0.0);
  if (c.batch_stats) {
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < D; ++j) mean[j] += X[static_cast<std::size_t>(r) * D + j];
    for (int j = 0; j < D; ++j) mean[j] /= n;
    Vec var(D, 0.0);
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < D; ++j) {
        const double d = X[static_cast<std::size_t>(r) * D + j] - mean[j];
        var[j] += d * d;
      }
    for (int j = 0; j < D; ++j) var[j] /= n;  // biased batch variance
    for (int j = 0; j < D; ++j) c.std_inv[j] = 1.0 / std::sqrt(var[j] + model.bn.eps);
    if (run_mean_out) {
      // Bias-corrected EMA on the stored (already corrected) stats:
      //   corrected_t = [m(1−m^{t−1})·corrected_{t−1} + (1−m)·batch] / (1−m^t)
      // so the first update copies the batch stats exactly.
      const double m = model.bn.momentum;
      const double mt = std::pow(m, static_cast<double>(model.bn.n_updates + 1));
      const double w_old = (m - mt) / (1.0 - mt);
      const double w_new = (1.0 - m) / (1.0 - mt);
      *run_mean_out = model.bn.run_mean;
      *run_var_out = model.bn.run_var;
      for (int j = 0; j < D; ++j) {
        (*run_mean_out)[j] = w_old * (*run_mean_out)[j] + w_new * mean[j];
        (*run_var_out)[j] = w_old * (*run_var_out)[j] + w_new * var[j];
      }
    }
  } else {
    mean = model.bn.run_mean;
    for (int j = 0; j < D; ++j) c.std_inv[j] = 1.0 / std::sqrt(model.bn.run_var[j] + model.bn.eps);
  }

  c.xhat.resize(static_cast<std::size_t>(n) * D);
  c.a1.resize(c.xhat.size());
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < D; ++j) {
      const std::size_t k = static_cast<std::size_t>(r) * D + j;
      c.xhat[k] = (X[k] - mean[j]) * c.std_inv[j];
      c.a1[k] = model.bn.gamma[j] * c.xhat[k] + model.bn.beta[j];
    }

  dense_forward(model.fc1, c.a1, n, c.z1);
  c.h1 = c.z1;
  for (double& v : c.h1) v = std::max(v, 0.0);
  dense_forward(model.fc2, c.h1, n, c.z2);
  c.h2 = c.z2;
  for (double& v : c.h2) v = std::max(v, 0.0);

  c.d2 = c.h2;
  if (train && model.dropout > 0.0 && !keep_mask.empty()) {
    if (keep_mask.size() != c.h2.size()) throw std::invalid_argument("dropout mask shape");
    const double scale = 1.0 / (1.0 - model.dropout);
    for (std::size_t k = 0; k < c.d2.size(); ++k) c.d2[k] = keep_mask[k] ? c.d2[k] * scale : 0.0;
  }

  Vec logits;
  dense_forward(model.fc_out, c.d2, n, logits);
  const int C = model.n_classes;
  c.probs.resize(logits.size());
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    const double* lr = &logits[static_cast<std::size_t>(r) * C];
    double* pr = &c.probs[static_cast<std::size_t>(r) * C];
    double mx = lr[0];
    for (int k = 1; k < C; ++k) mx = std::max(mx, lr[k]);
    double z = 0.0;
    for (int k = 0; k < C; ++k) z += std::exp(lr[k] - mx);
    for (int k = 0; k < C; ++k) pr[k] = std::exp(lr[k] - mx) / z;
    if (!y.empty()) loss -= std::log(std::max(pr[y[r]], 1e-300));
  }
  return y.empty() ? 0.0 : loss / n;
}

}  // namespace

int Model::feature_dim() const {
  if (repr.empty()) return fixed_feature_dim;
  int d = 0;
  for (const ReprParams& p : repr) d += p.feature_dim();
  return d;
}

Model make_model(std::vector<ReprParams> repr, int n_classes, double dropout,
                 std::mt19937_64& rng) {
  if (repr.empty()) throw std::invalid_argument("model needs at least one representation");
  if (n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0,1)");
  Model m;
  m.repr = std::move(repr);
  m.n_classes = n_classes;
  m.dropout = dropout;
  m.bn = make_bn(m.feature_dim());
  m.fc1 = make_dense(m.bn.dim, kHidden1, rng);
  m.fc2 = make_dense(kHidden1, kHidden2, rng);
  m.fc_out = make_dense(kHidden2, n_classes, rng);
  return m;
}

Model make_fixed_model(int feature_dim, int n_classes, double dropout, std::mt19937_64& rng) {
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
  if (n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
  Model m;
  m.fixed_feature_dim = feature_dim;
  m.n_classes = n_classes;
  m.dropout = dropout;
  m.bn = make_bn(feature_dim);
  m.fc1 = make_dense(feature_dim, kHidden1, rng);
  m.fc2 = make_dense(kHidden1, kHidden2, rng);
  m.fc_out = make_dense(kHidden2, n_classes, rng);
  return m;
}

Vec sample_features(const Model& model, const std::vector<PersistenceDiagram>& sample) {
  if (sample.size() != model.repr.size())
    throw std::invalid_argument("sample has wrong number of diagrams");
  Vec out;
  out.reserve(model.feature_dim());
  for (std::size_t f = 0; f < model.repr.size(); ++f) {
    ReprOutput r = represent(sample[f], model.repr[f]);
    out.insert(out.end(), r.features.begin(), r.features.end());
  }
  return out;
}

Vec head_forward_eval(const Model& model, const Vec& X, int n) {
  HeadCache c;
  forward(model, X, {}, n, false, true, {}, c, nullptr, nullptr);
  return c.probs;
}

void recalibrate_bn(Model& model, const Vec& X, int n) {
  const int D = model.bn.dim;
  if (static_cast<int>(X.size()) != n * D || n < 1)
    throw std::invalid_argument("feature matrix shape");
  Vec mean(D, 0.0), var(D, 0.0);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < D; ++j) mean[j] += X[static_cast<std::size_t>(r) * D + j];
  for (int j = 0; j < D; ++j) mean[j] /= n;
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < D; ++j) {
      const double d = X[static_cast<std::size_t>(r) * D + j] - mean[j];
      var[j] += d * d;
    }
  for (int j = 0; j < D; ++j) var[j] /= n;
  model.bn.run_mean = std::move(mean);
  model.bn.run_var = std::move(var);
}

double head_loss(const Model& model, const Vec& X, const std::vector<int>& y, int n,
                 bool frozen_stats, const std::vector<char>& keep_mask) {
  HeadCache c;
  return forward(model, X, y, n, true, frozen_stats, keep_mask, c, nullptr, nullptr);
}

double head_forward_backward(Model& model, const Vec& X, const std::vector<int>& y, int n,
                             bool frozen_stats, const std::vector<char>& keep_mask,
                             HeadGrads& g) {
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("label count");
  HeadCache c;
  Vec new_mean, new_var;
  const double loss = forward(model, X, y, n, true, frozen_stats, keep_mask, c,
                              frozen_stats ? nullptr : &new_mean, frozen_stats ? nullptr : &new_var);
  const int D = model.bn.dim;
  const int C = model.n_classes;

  // Softmax cross-entropy: dlogits = (p − onehot)/n.
  Vec dlogits = c.probs;
  for (int r = 0; r < n; ++r) dlogits[static_cast<std::size_t>(r) * C + y[r]] -= 1.0;
  for (double& v : dlogits) v /= n;

  Vec dd2;
  dense_backward(model.fc_out, c.d2, dlogits, n, g.W3, g.b3, dd2);

  Vec dh2 = dd2;
  if (!keep_mask.empty() && model.dropout > 0.0) {
    const double scale = 1.0 / (1.0 - model.dropout);
    for (std::size_t k = 0; k < dh2.size(); ++k) dh2[k] = keep_mask[k] ? dh2[k] * scale : 0.0;
  }
  for (std::size_t k = 0; k < dh2.size(); ++k)
    if (c.z2[k] <= 0.0) dh2[k] = 0.0;

  Vec dh1;
  dense_backward(model.fc2, c.h1, dh2, n, g.W2, g.b2, dh1);
  for (std::size_t k = 0; k < dh1.size(); ++k)
    if (c.z1[k] <= 0.0) dh1[k] = 0.0;

  Vec da1;
  dense_backward(model.fc1, c.a1, dh1, n, g.W1, g.b1, da1);

  g.gamma.assign(D, 0.0);
  g.beta.assign(D, 0.0);
  Vec dxhat(da1.size());
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < D; ++j) {
      const std::size_t k = static_cast<std::size_t>(r) * D + j;
      g.gamma[j] += da1[k] * c.xhat[k];
      g.beta[j] += da1[k];
      dxhat[k] = da1[k] * model.bn.gamma[j];
    }

  g.dX.assign(da1.size(), 0.0);
  if (c.batch_stats) {
    // Batch-coupled gradient through the normalization statistics.
    Vec sum_d(D, 0.0), sum_dx(D, 0.0);
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < D; ++j) {
        const std::size_t k = static_cast<std::size_t>(r) * D + j;
        sum_d[j] += dxhat[k];
        sum_dx[j] += dxhat[k] * c.xhat[k];
      }
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < D; ++j) {
        const std::size_t k = static_cast<std::size_t>(r) * D + j;
        g.dX[k] = c.std_inv[j] / n * (n * dxhat[k] - sum_d[j] - c.xhat[k] * sum_dx[j]);
      }
  } else {
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < D; ++j) {
        const std::size_t k = static_cast<std::size_t>(r) * D + j;
        g.dX[k] = dxhat[k] * c.std_inv[j];
      }
  }

  if (!frozen_stats) {
    model.bn.run_mean = new_mean;
    model.bn.run_var = new_var;
    ++model.bn.n_updates;
  }
  return loss;
}

std::vector<double*> trainable_params(Model& model) {
  std::vector<double*> p;
  for (ReprParams& r : model.repr)
    for (PhiParams& phi : r.phis)
      for (double& t : phi.theta) p.push_back(&t);
  auto push = [&p](Vec& v) {
    for (double& x : v) p.push_back(&x);
  };
  push(model.bn.gamma);
  push(model.bn.beta);
  push(model.fc1.W);
  push(model.fc1.b);
  push(model.fc2.W);
  push(model.fc2.b);
  push(model.fc_out.W);
  push(model.fc_out.b);
  return p;
}

void adam_step(const std::vector<double*>& params, const Vec& grad, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grad.size()) throw std::invalid_argument("gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("optimizer state size mismatch");
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    *params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

namespace {

using nlohmann::json;

json dense_to_json(const DenseLayer& l) {
  return json{{"in", l.in}, {"out", l.out}, {"W", l.W}, {"b", l.b}};
}

DenseLayer dense_from_json(const json& j) {
  DenseLayer l;
  l.in = j.at("in").get<int>();
  l.out = j.at("out").get<int>();
  l.W = j.at("W").get<Vec>();
  l.b = j.at("b").get<Vec>();
  if (static_cast<int>(l.W.size()) != l.in * l.out || static_cast<int>(l.b.size()) != l.out)
    throw std::runtime_error("checkpoint: dense layer shape mismatch");
  return l;
}

json repr_to_json(const ReprParams& r) {
  json means = json::array();
  for (const auto& mu : r.rho_cfg.means) means.push_back(json::array({mu[0], mu[1]}));
  json phis = json::array();
  for (const PhiParams& p : r.phis) phis.push_back(p.theta);
  return json{{"variant", to_string(r.variant)},
              {"m", r.m},
              {"K", r.K},
              {"n_hom_dims", r.n_hom_dims},
              {"essential_policy", to_string(r.essential_policy)},
              {"max_scale", r.max_scale},
              {"rho_means", means},
              {"phis", phis}};
}

ReprParams repr_from_json(const json& j) {
  ReprParams r;
  r.variant = variant_from_string(j.at("variant").get<std::string>());
  r.m = j.at("m").get<int>();
  r.K = j.at("K").get<int>();
  r.n_hom_dims = j.at("n_hom_dims").get<int>();
  r.essential_policy = essential_policy_from_string(j.at("essential_policy").get<std::string>());
  r.max_scale = j.at("max_scale").get<double>();
  for (const json& mu : j.at("rho_means"))
    r.rho_cfg.means.push_back({mu.at(0).get<double>(), mu.at(1).get<double>()});
  for (const json& p : j.at("phis")) r.phis.push_back(PhiParams{p.get<Vec>()});
  validate(r);
  return r;
}

}  // namespace

void save_checkpoint(std::ostream& os, const Model& model) {
  json j;
  j["version"] = 1;
  j["n_classes"] = model.n_classes;
  j["dropout"] = model.dropout;
  j["fixed_feature_dim"] = model.fixed_feature_dim;
  json repr = json::array();
  for (const ReprParams& r : model.repr) repr.push_back(repr_to_json(r));
  j["repr"] = std::move(repr);
  j["bn"] = json{{"dim", model.bn.dim},           {"gamma", model.bn.gamma},
                 {"beta", model.bn.beta},         {"run_mean", model.bn.run_mean},
                 {"run_var", model.bn.run_var},   {"momentum", model.bn.momentum},
                 {"eps", model.bn.eps},           {"n_updates", model.bn.n_updates}};
  j["fc1"] = dense_to_json(model.fc1);
  j["fc2"] = dense_to_json(model.fc2);
  j["fc_out"] = dense_to_json(model.fc_out);
  os << j.dump(2) << '\n';
}

Model load_checkpoint(std::istream& is) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  if (j.value("version", 0) != 1) throw std::runtime_error("checkpoint: unsupported version");
  Model m;
  m.n_classes = j.at("n_classes").get<int>();
  m.dropout = j.at("dropout").get<double>();
  m.fixed_feature_dim = j.value("fixed_feature_dim", 0);
  for (const json& r : j.at("repr")) m.repr.push_back(repr_from_json(r));
  const json& bn = j.at("bn");
  m.bn.dim = bn.at("dim").get<int>();
  m.bn.gamma = bn.at("gamma").get<Vec>();
  m.bn.beta = bn.at("beta").get<Vec>();
  m.bn.run_mean = bn.at("run_mean").get<Vec>();
  m.bn.run_var = bn.at("run_var").get<Vec>();
  m.bn.momentum = bn.at("momentum").get<double>();
  m.bn.eps = bn.at("eps").get<double>();
  m.bn.n_updates = bn.at("n_updates").get<long long>();
  m.fc1 = dense_from_json(j.at("fc1"));
  m.fc2 = dense_from_json(j.at("fc2"));
  m.fc_out = dense_from_json(j.at("fc_out"));
  if (m.bn.dim != m.feature_dim() || m.fc1.in != m.bn.dim || m.fc2.in != m.fc1.out ||
      m.fc_out.in != m.fc2.out || m.fc_out.out != m.n_classes)
    throw std::runtime_error("checkpoint: inconsistent shapes");
  return m;
}

}  // namespace pdball
