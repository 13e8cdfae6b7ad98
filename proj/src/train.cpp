#include "pdball/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pdball {

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw std::invalid_argument("adam betas must be in [0,1)");
  if (cfg.batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.lr_halve_every < 0) throw std::invalid_argument("lr_halve_every must be >= 0");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
    throw std::invalid_argument("dropout must be in [0,1)");
  if (cfg.folds < 1) throw std::invalid_argument("folds must be >= 1");
}

std::vector<ReprParams> repr_params_for(const DiagramDataset& ds, const ModelSpec& spec,
                                        std::mt19937_64& rng) {
  if (ds.stats.empty()) throw std::invalid_argument("dataset has no filtration slots");
  std::vector<ReprParams> out;
  for (const FiltrationStats& st : ds.stats) {
    RhoConfig rc = lattice_rho_config(spec.m, st.max_birth, st.p_min, st.p_max);
    const double scale = st.max_value > 0.0 ? st.max_value : 1.0;
    out.push_back(make_repr_params(spec.variant, spec.m, spec.K, spec.n_hom_dims,
                                   spec.essential_policy, std::move(rc), scale, rng));
  }
  return out;
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                  std::mt19937_64& rng) {
  if (folds < 2) throw std::invalid_argument("stratified folds need folds >= 2");
  const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<int>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
  std::vector<int> fold_of(labels.size(), -1);
  int next = 0;
  for (auto& group : by_class) {
    std::shuffle(group.begin(), group.end(), rng);
    for (int i : group) fold_of[i] = next++ % folds;
  }
  std::vector<int> count(folds, 0);
  for (int f : fold_of) ++count[f];
  for (int c : count)
    if (c == 0) throw std::invalid_argument("too few samples for the requested fold count");
  return fold_of;
}

namespace {

// Feature rows for the given samples; parallel, rows written disjointly.
Vec batch_features(const Model& model, const DiagramDataset& ds, const std::vector<int>& idx) {
  const int D = model.feature_dim();
  Vec X(idx.size() * static_cast<std::size_t>(D));
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < static_cast<int>(idx.size()); ++r) {
    try {
      Vec f = sample_features(model, ds.diagrams[idx[r]]);
      std::copy(f.begin(), f.end(), X.begin() + static_cast<std::size_t>(r) * D);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return X;
}

Vec gather_rows(const Vec& X, int D, const std::vector<int>& idx) {
  Vec out(idx.size() * static_cast<std::size_t>(D));
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy(X.begin() + static_cast<std::size_t>(idx[r]) * D,
              X.begin() + static_cast<std::size_t>(idx[r] + 1) * D,
              out.begin() + r * static_cast<std::size_t>(D));
  return out;
}

int theta_count(const Model& model) {
  int n = 0;
  for (const ReprParams& r : model.repr) n += static_cast<int>(r.phis.size()) * r.m;
  return n;
}

// Backward through the representations: per-sample gradients computed in
// parallel, then reduced in sample order so the result is deterministic.
void accumulate_theta_grads(const Model& model, const DiagramDataset& ds,
                            const std::vector<int>& idx, const Vec& dX, Vec& gtheta) {
  const int nb = static_cast<int>(idx.size());
  const int D = model.feature_dim();
  std::vector<Vec> per_sample(nb);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < nb; ++r) {
    try {
      Vec g;
      g.reserve(gtheta.size());
      const double* row = &dX[static_cast<std::size_t>(r) * D];
      int off = 0;
      for (std::size_t f = 0; f < model.repr.size(); ++f) {
        const ReprParams& rp = model.repr[f];
        Vec up(row + off, row + off + rp.feature_dim());
        off += rp.feature_dim();
        for (const Vec& gphi : represent_grad(ds.diagrams[idx[r]][f], rp, up))
          g.insert(g.end(), gphi.begin(), gphi.end());
      }
      per_sample[r] = std::move(g);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  for (int r = 0; r < nb; ++r)
    for (std::size_t k = 0; k < gtheta.size(); ++k) gtheta[k] += per_sample[r][k];
}

double run_epoch(Model& model, const std::vector<double*>& params, AdamState& st,
                 const TrainConfig& cfg, double lr, const DiagramDataset* ds, const Vec* Xfixed,
                 const std::vector<int>& labels, const std::vector<int>& order,
                 std::mt19937_64& rng) {
  const int n_theta = theta_count(model);
  std::bernoulli_distribution keep(1.0 - model.dropout);
  AdamConfig adam{lr, cfg.beta1, cfg.beta2, 1e-8};
  double total_loss = 0.0;
  int total = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
    const std::size_t stop = std::min(order.size(), start + cfg.batch);
    const std::vector<int> bidx(order.begin() + start, order.begin() + stop);
    const int nb = static_cast<int>(bidx.size());
    Vec X = ds ? batch_features(model, *ds, bidx) : gather_rows(*Xfixed, model.feature_dim(), bidx);
    std::vector<int> y(nb);
    for (int r = 0; r < nb; ++r) y[r] = labels[bidx[r]];
    std::vector<char> mask;
    if (model.dropout > 0.0) {
      mask.resize(static_cast<std::size_t>(nb) * model.fc2.out);
      for (auto& b : mask) b = keep(rng) ? 1 : 0;
    }
    HeadGrads hg;
    const double loss = head_forward_backward(model, X, y, nb, false, mask, hg);
    if (!std::isfinite(loss)) throw numerical_error("non-finite training loss");

    Vec grad;
    grad.reserve(params.size());
    if (ds) {
      Vec gtheta(n_theta, 0.0);
      accumulate_theta_grads(model, *ds, bidx, hg.dX, gtheta);
      grad.insert(grad.end(), gtheta.begin(), gtheta.end());
    }
    for (const Vec* g : {&hg.gamma, &hg.beta, &hg.W1, &hg.b1, &hg.W2, &hg.b2, &hg.W3, &hg.b3})
      grad.insert(grad.end(), g->begin(), g->end());
    adam_step(params, grad, st, adam);
    total_loss += loss * nb;
    total += nb;
  }
  return total_loss / total;
}

// Exact end-of-epoch inference statistics over the training fold (the EMA only
// tracks within an epoch; see recalibrate_bn).
void refresh_bn(Model& model, const DiagramDataset* ds, const Vec* Xfixed,
                const std::vector<int>& train_idx) {
  const Vec X = ds ? batch_features(model, *ds, train_idx)
                   : gather_rows(*Xfixed, model.feature_dim(), train_idx);
  recalibrate_bn(model, X, static_cast<int>(train_idx.size()));
}

double accuracy_on(const Model& model, const DiagramDataset* ds, const Vec* Xfixed,
                   const std::vector<int>& labels, const std::vector<int>& idx) {
  if (idx.empty()) return 0.0;
  const Vec X =
      ds ? batch_features(model, *ds, idx) : gather_rows(*Xfixed, model.feature_dim(), idx);
  const Vec probs = head_forward_eval(model, X, static_cast<int>(idx.size()));
  const int C = model.n_classes;
  int hits = 0;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const double* p = &probs[r * static_cast<std::size_t>(C)];
    const int pred = static_cast<int>(std::max_element(p, p + C) - p);
    hits += pred == labels[idx[r]];
  }
  return double(hits) / double(idx.size());
}

std::mt19937_64 fold_rng(std::uint64_t seed, int fold) {
  return std::mt19937_64(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(fold + 1)));
}

CvResult cv_impl(const DiagramDataset* ds, const Vec* Xfixed, int D,
                 const std::vector<int>& labels, int n_classes, const ModelSpec* spec,
                 const TrainConfig& cfg) {
  validate(cfg);
  if (cfg.folds < 2) throw std::invalid_argument("cross-validation needs folds >= 2");
  std::mt19937_64 split_rng(cfg.seed);
  const std::vector<int> fold_of = stratified_folds(labels, cfg.folds, split_rng);

  CvResult res;
  for (int f = 0; f < cfg.folds; ++f) {
    std::mt19937_64 rng = fold_rng(cfg.seed, f);
    Model model = ds ? make_model(repr_params_for(*ds, *spec, rng), n_classes, cfg.dropout, rng)
                     : make_fixed_model(D, n_classes, cfg.dropout, rng);
    std::vector<int> train_idx, val_idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      (fold_of[i] == f ? val_idx : train_idx).push_back(static_cast<int>(i));

    const std::vector<double*> params = trainable_params(model);
    AdamState st;
    double lr = cfg.lr;
    FoldResult fr{f, 0.0, 0};
    std::vector<int> order = train_idx;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      if (cfg.lr_halve_every > 0 && epoch > 1 && (epoch - 1) % cfg.lr_halve_every == 0) lr *= 0.5;
      std::shuffle(order.begin(), order.end(), rng);
      const double loss = run_epoch(model, params, st, cfg, lr, ds, Xfixed, labels, order, rng);
      refresh_bn(model, ds, Xfixed, train_idx);
      const double acc = accuracy_on(model, ds, Xfixed, labels, val_idx);
      res.log.push_back({f, epoch, loss, acc, lr});
      if (acc > fr.best_val_acc) {
        fr.best_val_acc = acc;
        fr.best_epoch = epoch;
      }
    }
    res.folds.push_back(fr);
  }
  for (const FoldResult& fr : res.folds) res.mean_acc += fr.best_val_acc;
  res.mean_acc /= res.folds.size();
  if (res.folds.size() > 1) {
    double s = 0.0;
    for (const FoldResult& fr : res.folds) {
      const double d = fr.best_val_acc - res.mean_acc;
      s += d * d;
    }
    res.std_acc = std::sqrt(s / (res.folds.size() - 1));
  }
  return res;
}

}  // namespace

CvResult train_cv(const DiagramDataset& ds, const ModelSpec& spec, const TrainConfig& cfg) {
  return cv_impl(&ds, nullptr, 0, ds.labels, ds.n_classes, &spec, cfg);
}

CvResult train_cv_fixed(const Vec& X, int D, const std::vector<int>& labels, int n_classes,
                        const TrainConfig& cfg) {
  if (X.size() != labels.size() * static_cast<std::size_t>(D))
    throw std::invalid_argument("feature matrix shape");
  return cv_impl(nullptr, &X, D, labels, n_classes, nullptr, cfg);
}

SingleRunResult train_single(const DiagramDataset& train, const DiagramDataset& test,
                             const ModelSpec& spec, const TrainConfig& cfg) {
  validate(cfg);
  if (train.stats.size() != test.stats.size())
    throw std::invalid_argument("train/test filtration slots differ");
  std::mt19937_64 rng(cfg.seed);
  SingleRunResult res;
  res.model = make_model(repr_params_for(train, spec, rng), train.n_classes, cfg.dropout, rng);

  const std::vector<double*> params = trainable_params(res.model);
  AdamState st;
  double lr = cfg.lr;
  std::vector<int> order(train.diagrams.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  const std::vector<int> train_all = order;
  std::vector<int> test_idx(test.diagrams.size());
  for (std::size_t i = 0; i < test_idx.size(); ++i) test_idx[i] = static_cast<int>(i);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.lr_halve_every > 0 && epoch > 1 && (epoch - 1) % cfg.lr_halve_every == 0) lr *= 0.5;
    std::shuffle(order.begin(), order.end(), rng);
    const double loss =
        run_epoch(res.model, params, st, cfg, lr, &train, nullptr, train.labels, order, rng);
    refresh_bn(res.model, &train, nullptr, train_all);
    const double acc = accuracy_on(res.model, &test, nullptr, test.labels, test_idx);
    res.log.push_back({0, epoch, loss, acc, lr});
  }
  res.test_acc = res.log.back().val_acc;
  return res;
}

double evaluate_accuracy(const Model& model, const DiagramDataset& ds) {
  std::vector<int> idx(ds.diagrams.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return accuracy_on(model, &ds, nullptr, ds.labels, idx);
}

double evaluate_accuracy_fixed(const Model& model, const Vec& X, const std::vector<int>& labels) {
  std::vector<int> idx(labels.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return accuracy_on(model, nullptr, &X, labels, idx);
}

}  // namespace pdball
