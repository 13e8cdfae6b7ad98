#pragma once

#include <cstdint>
#include <iosfwd>

#include "pdball/representation.hpp"

namespace pdball {

struct DenseLayer {
  int in = 0, out = 0;
  Vec W;  // row-major out×in
  Vec b;
};

struct BatchNormLayer {
  int dim = 0;
  Vec gamma, beta, run_mean, run_var;
  double momentum = 0.99;
  double eps = 1e-3;
  // Running stats are stored bias-corrected (Adam-style: the plain EMA started
  // at zero is divided by 1 − momentum^t). Without the correction, momentum
  // 0.99 leaves eval statistics dominated by the (0, 1) init for the first few
  // hundred batches, and eval-mode accuracy collapses on short runs.
  long long n_updates = 0;
};

/// Classifier: per-filtration representations concatenated into a feature
/// vector, then batch norm → dense 256 (ReLU) → dense 128 (ReLU) → dropout →
/// softmax. A model with empty `repr` consumes precomputed features of width
/// `fixed_feature_dim` (the histogram baselines).
struct Model {
  std::vector<ReprParams> repr;
  int fixed_feature_dim = 0;
  BatchNormLayer bn;
  DenseLayer fc1, fc2, fc_out;
  double dropout = 0.0;
  int n_classes = 2;

  int feature_dim() const;
};

Model make_model(std::vector<ReprParams> repr, int n_classes, double dropout,
                 std::mt19937_64& rng);
Model make_fixed_model(int feature_dim, int n_classes, double dropout, std::mt19937_64& rng);

/// Concatenated representation features for one sample (one diagram per
/// filtration slot, same order as model.repr).
Vec sample_features(const Model& model, const std::vector<PersistenceDiagram>& sample);

/// Eval-mode head: running batch-norm stats, dropout off. Returns n×C softmax
/// probabilities for the row-major feature matrix X.
Vec head_forward_eval(const Model& model, const Vec& X, int n);

/// Replaces the batch-norm running stats with the exact (biased) mean/variance
/// of the n×feature_dim matrix X. Called with the training features after each
/// epoch: with only a handful of batches per epoch the momentum-0.99 EMA lags
/// the drifting feature distribution badly, and the informative features have
/// variances well below eps, so even a small lag in the running mean shifts
/// the normalized inputs by whole units.
void recalibrate_bn(Model& model, const Vec& X, int n);

struct HeadGrads {
  Vec gamma, beta, W1, b1, W2, b2, W3, b3;
  Vec dX;  // n×D, routed back into the representations
};

/// Training-mode forward + backward over one batch: batch statistics (running
/// stats updated unless `frozen_stats`), inverted dropout with the given
/// keep-mask (n×128 entries; empty = no dropout), softmax cross-entropy.
/// `frozen_stats` switches batch norm to the running statistics so the loss
/// is a pure function of the parameters (gradient checks). Returns the mean
/// loss.
double head_forward_backward(Model& model, const Vec& X, const std::vector<int>& y, int n,
                             bool frozen_stats, const std::vector<char>& keep_mask,
                             HeadGrads& grads);

/// Loss only, same conventions (used by finite-difference checks).
double head_loss(const Model& model, const Vec& X, const std::vector<int>& y, int n,
                 bool frozen_stats, const std::vector<char>& keep_mask);

/// All trainable scalars in a fixed order: every φ parameter vector, then
/// batch-norm gamma/beta, then the dense layers. Gradient vectors use the
/// same layout.
std::vector<double*> trainable_params(Model& model);

struct AdamConfig {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct AdamState {
  Vec m, v;
  long long t = 0;
};

/// Standard bias-corrected Adam update, in place.
void adam_step(const std::vector<double*>& params, const Vec& grad, AdamState& state,
               const AdamConfig& cfg);

// Versioned JSON checkpoints.
void save_checkpoint(std::ostream& os, const Model& model);
Model load_checkpoint(std::istream& is);

}  // namespace pdball
