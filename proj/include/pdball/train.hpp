#pragma once

#include "pdball/data.hpp"
#include "pdball/nn.hpp"

namespace pdball {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  int batch = 64;
  int epochs = 10;
  int lr_halve_every = 0;  // 0 = constant learning rate
  double dropout = 0.0;
  std::uint64_t seed = 0;
  int folds = 10;
};

void validate(const TrainConfig& cfg);

/// Representation hyperparameters shared by every filtration slot; the ρ means
/// and essential substitute are sized per slot from dataset statistics.
struct ModelSpec {
  Variant variant = Variant::poinc;
  int m = 3;
  int K = 5;
  int n_hom_dims = 2;
  EssentialPolicy essential_policy = EssentialPolicy::max_scale;
};

std::vector<ReprParams> repr_params_for(const DiagramDataset& ds, const ModelSpec& spec,
                                        std::mt19937_64& rng);

struct EpochLog {
  int fold = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

struct FoldResult {
  int fold = 0;
  double best_val_acc = 0.0;
  int best_epoch = 0;
};

struct CvResult {
  std::vector<FoldResult> folds;
  std::vector<EpochLog> log;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // sample standard deviation over folds
};

/// Stratified fold id per sample.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                  std::mt19937_64& rng);

/// Stratified k-fold cross-validation; each fold reports its best-epoch
/// validation accuracy.
CvResult train_cv(const DiagramDataset& ds, const ModelSpec& spec, const TrainConfig& cfg);

/// Same protocol on a fixed feature matrix (row-major n×D): the histogram
/// baselines.
CvResult train_cv_fixed(const Vec& X, int D, const std::vector<int>& labels, int n_classes,
                        const TrainConfig& cfg);

struct SingleRunResult {
  Model model;
  std::vector<EpochLog> log;  // val_acc column holds test accuracy per epoch
  double test_acc = 0.0;      // final-epoch model
};

/// Train on `train`, track accuracy on `test`; representation statistics come
/// from the training split only.
SingleRunResult train_single(const DiagramDataset& train, const DiagramDataset& test,
                             const ModelSpec& spec, const TrainConfig& cfg);

double evaluate_accuracy(const Model& model, const DiagramDataset& ds);
double evaluate_accuracy_fixed(const Model& model, const Vec& X, const std::vector<int>& labels);

}  // namespace pdball
