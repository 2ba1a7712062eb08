#pragma once

#include <string>
#include <vector>

#include "sfcgan/eval.hpp"

namespace sfcgan {

enum class FeatureSource {
  real_fc,
  real_sc,
  real_both,
  translated_fc,
  translated_sc,
  translated_both,
};

const char* feature_source_name(FeatureSource s);

/// Per-subject feature rows (upper-triangle vectors, possibly concatenated
/// across domains) with integer class labels.
struct FeatureSet {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  FeatureSource source = FeatureSource::real_fc;
};

/// All percents in [0, 100].
struct ClassifierMetrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0, auc = 0;
};

/// One-vs-rest linear classifiers plus the training-set standardization.
/// Scores are computed on z-scored features using these stored statistics,
/// so test data never contributes to them.
struct SvmModel {
  std::vector<int> classes;
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
  std::vector<double> feat_mean, feat_std;
};

/// Full-batch subgradient descent on the regularized hinge objective, one
/// one-vs-rest classifier per class, zero-initialized and fully
/// deterministic. Stops at 1e-4 relative objective change or 10000
/// iterations.
SvmModel train_linear_svm(const FeatureSet& train, double c = 1.0);

struct Predictions {
  std::vector<int> labels;
  std::vector<std::vector<double>> scores;
  std::vector<int> classes;
};

/// Decision scores per class; predicted label is the argmax, ties broken by
/// the smaller class index.
Predictions predict_scores(const SvmModel& model, const FeatureSet& test);

/// Accuracy, support-weighted precision/recall/F1, and macro one-vs-rest AUC
/// from the decision scores (trapezoidal ROC, tied scores collapse to the
/// diagonal midpoint). Classes never observed in truth carry zero weight;
/// when no class has both positives and negatives the AUC falls back to the
/// chance value 50.
ClassifierMetrics classification_metrics(const Predictions& pred, const std::vector<int>& truth);

/// Builds feature rows for one split. real_* sources read the stored
/// matrices; translated_* sources run the given translators first. both
/// concatenates FC then SC features.
FeatureSet feature_set(const DatasetManifest& manifest, Split split, FeatureSource src,
                       const Translator* sc_to_fc = nullptr,
                       const Translator* fc_to_sc = nullptr);

struct ClassifyRow {
  std::string classifier;
  std::string dataset;
  FeatureSource testing_data = FeatureSource::real_fc;
  ClassifierMetrics metrics;
};

/// CSV with columns classifier, dataset, testing_data, accuracy, precision,
/// recall, f1, auc; percents carry 2 decimals.
void save_classify_report(const std::vector<ClassifyRow>& rows, const std::string& path);

}  // namespace sfcgan
