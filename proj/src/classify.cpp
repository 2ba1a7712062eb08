#include "sfcgan/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace sfcgan {

const char* feature_source_name(FeatureSource s) {
  switch (s) {
    case FeatureSource::real_fc: return "real_fc";
    case FeatureSource::real_sc: return "real_sc";
    case FeatureSource::real_both: return "real_both";
    case FeatureSource::translated_fc: return "translated_fc";
    case FeatureSource::translated_sc: return "translated_sc";
    case FeatureSource::translated_both: return "translated_both";
  }
  return "?";
}

namespace {

void check_feature_set(const FeatureSet& f) {
  if (f.rows.empty()) throw ValidationError("feature set is empty");
  if (f.labels.size() != f.rows.size())
    throw ValidationError("feature set has " + std::to_string(f.rows.size()) + " rows but " +
                          std::to_string(f.labels.size()) + " labels");
  size_t dim = f.rows.front().size();
  if (dim == 0) throw ValidationError("feature rows are empty");
  for (const auto& r : f.rows)
    if (r.size() != dim) throw ValidationError("feature rows have mixed lengths");
}

std::vector<std::vector<double>> standardize(const FeatureSet& f, const std::vector<double>& mean,
                                             const std::vector<double>& sd) {
  std::vector<std::vector<double>> z(f.rows.size(), std::vector<double>(mean.size(), 0.0));
  for (size_t i = 0; i < f.rows.size(); ++i)
    for (size_t j = 0; j < mean.size(); ++j)
      z[i][j] = (f.rows[i][j] - mean[j]) / sd[j];
  return z;
}

}  // namespace

SvmModel train_linear_svm(const FeatureSet& train, double c) {
  check_feature_set(train);
  if (!(c > 0.0)) throw ValidationError("regularization c must be positive");

  SvmModel model;
  {
    std::set<int> distinct(train.labels.begin(), train.labels.end());
    model.classes.assign(distinct.begin(), distinct.end());
  }
  if (model.classes.size() < 2)
    throw ValidationError("training labels contain a single class");

  const size_t dim = train.rows.front().size();
  const size_t count = train.rows.size();
  model.feat_mean.assign(dim, 0.0);
  model.feat_std.assign(dim, 0.0);
  for (const auto& r : train.rows)
    for (size_t j = 0; j < dim; ++j) model.feat_mean[j] += r[j] / double(count);
  for (const auto& r : train.rows)
    for (size_t j = 0; j < dim; ++j) {
      double d = r[j] - model.feat_mean[j];
      model.feat_std[j] += d * d / double(count);
    }
  for (size_t j = 0; j < dim; ++j) {
    model.feat_std[j] = std::sqrt(model.feat_std[j]);
    if (model.feat_std[j] == 0.0) model.feat_std[j] = 1.0;
  }
  auto z = standardize(train, model.feat_mean, model.feat_std);

  const double lambda = 1.0 / c;
  const int max_iters = 10000;
  for (int target : model.classes) {
    std::vector<double> y(count);
    for (size_t i = 0; i < count; ++i) y[i] = train.labels[i] == target ? 1.0 : -1.0;

    std::vector<double> w(dim, 0.0), gw(dim, 0.0);
    double b = 0.0;
    double prev = -1.0;
    for (int t = 0; t < max_iters; ++t) {
      std::fill(gw.begin(), gw.end(), 0.0);
      double gb = 0.0, hinge = 0.0;
      for (size_t i = 0; i < count; ++i) {
        double s = b;
        for (size_t j = 0; j < dim; ++j) s += w[j] * z[i][j];
        double margin = y[i] * s;
        if (margin < 1.0) {
          hinge += 1.0 - margin;
          for (size_t j = 0; j < dim; ++j) gw[j] -= y[i] * z[i][j];
          gb -= y[i];
        }
      }
      double wsq = 0.0;
      for (size_t j = 0; j < dim; ++j) wsq += w[j] * w[j];
      double obj = 0.5 * lambda * wsq + hinge / double(count);

      double eta = 1.0 / (lambda * (t + 1));
      for (size_t j = 0; j < dim; ++j)
        w[j] -= eta * (lambda * w[j] + gw[j] / double(count));
      b -= eta * gb / double(count);

      if (t > 0 && std::abs(obj - prev) <= 1e-4 * std::max(1.0, std::abs(prev))) break;
      prev = obj;
    }
    model.weights.push_back(std::move(w));
    model.bias.push_back(b);
  }
  return model;
}

Predictions predict_scores(const SvmModel& model, const FeatureSet& test) {
  check_feature_set(test);
  if (test.rows.front().size() != model.feat_mean.size())
    throw ValidationError("feature length " + std::to_string(test.rows.front().size()) +
                          " does not match the classifier's " +
                          std::to_string(model.feat_mean.size()));
  auto z = standardize(test, model.feat_mean, model.feat_std);

  Predictions out;
  out.classes = model.classes;
  for (size_t i = 0; i < z.size(); ++i) {
    std::vector<double> s(model.classes.size(), 0.0);
    for (size_t k = 0; k < model.classes.size(); ++k) {
      double v = model.bias[k];
      for (size_t j = 0; j < z[i].size(); ++j) v += model.weights[k][j] * z[i][j];
      s[k] = v;
    }
    size_t arg = 0;
    for (size_t k = 1; k < s.size(); ++k)
      if (s[k] > s[arg]) arg = k;
    out.labels.push_back(model.classes[arg]);
    out.scores.push_back(std::move(s));
  }
  return out;
}

namespace {

// Area under the ROC built by sweeping score thresholds from high to low;
// samples sharing a score advance TP and FP together, which is the
// trapezoidal midpoint convention for ties.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  size_t pos = 0;
  for (bool p : positive) pos += p ? 1 : 0;
  size_t neg = positive.size() - pos;
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  double area = 0.0;
  double tp = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    double tp_step = 0, fp_step = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (positive[order[j]])
        tp_step += 1;
      else
        fp_step += 1;
      ++j;
    }
    area += (fp_step / double(neg)) * (tp + tp_step / 2.0) / double(pos);
    tp += tp_step;
    i = j;
  }
  return area;
}

}  // namespace

ClassifierMetrics classification_metrics(const Predictions& pred,
                                         const std::vector<int>& truth) {
  if (truth.empty()) throw ValidationError("no samples to score");
  if (pred.labels.size() != truth.size() || pred.scores.size() != truth.size())
    throw ValidationError("prediction and truth lengths differ");

  ClassifierMetrics m;
  const double count = double(truth.size());
  size_t correct = 0;
  for (size_t i = 0; i < truth.size(); ++i)
    if (pred.labels[i] == truth[i]) ++correct;
  m.accuracy = 100.0 * correct / count;

  std::set<int> class_union(pred.classes.begin(), pred.classes.end());
  class_union.insert(truth.begin(), truth.end());
  for (int cls : class_union) {
    double tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
      bool is_true = truth[i] == cls, is_pred = pred.labels[i] == cls;
      if (is_true && is_pred) tp += 1;
      if (!is_true && is_pred) fp += 1;
      if (is_true && !is_pred) fn += 1;
    }
    double support = tp + fn;
    if (support == 0) continue;
    double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    double rec = tp / support;
    double f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    m.precision += 100.0 * prec * support / count;
    m.recall += 100.0 * rec * support / count;
    m.f1 += 100.0 * f1 * support / count;
  }

  double auc_sum = 0.0;
  int auc_classes = 0;
  for (size_t k = 0; k < pred.classes.size(); ++k) {
    std::vector<bool> positive(truth.size());
    size_t pos = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
      positive[i] = truth[i] == pred.classes[k];
      pos += positive[i] ? 1 : 0;
    }
    if (pos == 0 || pos == truth.size()) continue;
    std::vector<double> s(truth.size());
    for (size_t i = 0; i < truth.size(); ++i) s[i] = pred.scores[i][k];
    auc_sum += roc_auc(s, positive);
    ++auc_classes;
  }
  m.auc = auc_classes > 0 ? 100.0 * auc_sum / auc_classes : 50.0;
  return m;
}

FeatureSet feature_set(const DatasetManifest& manifest, Split split, FeatureSource src,
                       const Translator* sc_to_fc, const Translator* fc_to_sc) {
  const bool translated = src == FeatureSource::translated_fc ||
                          src == FeatureSource::translated_sc ||
                          src == FeatureSource::translated_both;
  const bool wants_fc = src == FeatureSource::real_fc || src == FeatureSource::real_both ||
                        src == FeatureSource::translated_fc ||
                        src == FeatureSource::translated_both;
  const bool wants_sc = src == FeatureSource::real_sc || src == FeatureSource::real_both ||
                        src == FeatureSource::translated_sc ||
                        src == FeatureSource::translated_both;
  if (translated && wants_fc && !sc_to_fc)
    throw ValidationError("translated FC features need an SC->FC translator");
  if (translated && wants_sc && !fc_to_sc)
    throw ValidationError("translated SC features need an FC->SC translator");

  FeatureSet out;
  out.source = src;
  for (const auto& s : manifest.subjects) {
    if (s.split != split) continue;
    std::vector<double> row;
    if (wants_fc) {
      Connectome fc = translated
                          ? (*sc_to_fc)(load_connectome(s.sc_path, Domain::SC, manifest.n))
                          : load_connectome(s.fc_path, Domain::FC, manifest.n);
      auto v = vectorize_upper(fc);
      row.insert(row.end(), v.begin(), v.end());
    }
    if (wants_sc) {
      Connectome sc = translated
                          ? (*fc_to_sc)(load_connectome(s.fc_path, Domain::FC, manifest.n))
                          : load_connectome(s.sc_path, Domain::SC, manifest.n);
      auto v = vectorize_upper(sc);
      row.insert(row.end(), v.begin(), v.end());
    }
    out.rows.push_back(std::move(row));
    out.labels.push_back(s.label);
  }
  return out;
}

void save_classify_report(const std::vector<ClassifyRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "classifier,dataset,testing_data,accuracy,precision,recall,f1,auc\n";
  for (const auto& r : rows) {
    out << r.classifier << ',' << r.dataset << ',' << feature_source_name(r.testing_data)
        << ',' << format_fixed(r.metrics.accuracy, 2) << ',' << format_fixed(r.metrics.precision, 2)
        << ',' << format_fixed(r.metrics.recall, 2) << ',' << format_fixed(r.metrics.f1, 2) << ','
        << format_fixed(r.metrics.auc, 2) << '\n';
  }
  if (!out.good()) throw IoError("write failed for " + path);
}

}  // namespace sfcgan
