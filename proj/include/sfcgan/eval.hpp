#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sfcgan/connectome.hpp"
#include "sfcgan/sfc_model.hpp"

namespace sfcgan {

/// Similarity between a predicted and a ground-truth matrix. mse/mae are raw
/// means over all n^2 entries; ssim, pearson, and cosine are scaled by 100.
/// ssim_global is set when n < 11 forced a single uniform window instead of
/// the 11x11 Gaussian sliding window.
struct SimilarityMetrics {
  double mse = 0, mae = 0;
  double ssim = 0, pearson = 0, cosine = 0;
  bool ssim_global = false;
};

SimilarityMetrics similarity_metrics(const Connectome& truth, const Connectome& pred);

double graph_density(const BinaryGraph& g);

/// Mean hop count over unordered reachable pairs. Unreachable pairs are
/// excluded; their count lands in *excluded_pairs when given. Throws when no
/// pair is reachable.
double characteristic_path_length(const BinaryGraph& g, int* excluded_pairs = nullptr);

/// Mean of 1/d(i,j) over all unordered pairs, with 1/infinity = 0.
double global_efficiency(const BinaryGraph& g);

/// Modularity maximization. Graphs of up to 8 nodes are solved exactly by
/// enumerating all partitions; larger ones use greedy agglomeration (merge
/// the pair with the largest gain, smallest index pair on ties, keep the
/// best level) followed by single-node move refinement. *partition (when
/// given) receives one community id per node, numbered by first appearance.
/// Throws on edgeless graphs.
double modularity(const BinaryGraph& g, std::vector<int>* partition = nullptr);

/// Absolute percentage difference. Empty when truth is zero; callers count
/// such skips instead of failing.
std::optional<double> apd(double translated, double truth);

/// Binarization thresholds used before graph-property comparison.
struct EvalThresholds {
  ThresholdMode fc = ThresholdMode::abs_tau(0.2);
  ThresholdMode sc = ThresholdMode::abs_tau(0.01);

  const ThresholdMode& for_domain(Domain d) const { return d == Domain::FC ? fc : sc; }
};

/// One evaluated (subject, translation direction) pair. direction is the
/// target domain of the translation. APD columns are empty when the truth
/// metric was zero or its computation failed for either graph.
struct EvalRow {
  std::string subject;
  Domain direction = Domain::FC;
  SimilarityMetrics sim;
  std::optional<double> apd_density, apd_cpl, apd_efficiency, apd_modularity;
};

struct ColumnStats {
  double mean = 0, stddev = 0;
  int count = 0;
};

/// Per-direction aggregates; count is the number of rows that contributed to
/// a column (APD columns can lose rows to zero-truth skips).
struct EvalAggregate {
  Domain direction = Domain::FC;
  ColumnStats mse, mae, ssim, pearson, cosine;
  ColumnStats apd_density, apd_cpl, apd_efficiency, apd_modularity;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalAggregate> aggregates;
  std::vector<std::string> failures;
};

/// Maps a connectome to its opposite-domain translation.
using Translator = std::function<Connectome(const Connectome&)>;

/// Evaluates every test-split subject: translate both directions, score
/// similarity against ground truth, binarize, and compare the four graph
/// properties via APD. Per-subject metric failures are recorded in
/// report.failures and the run continues. Rows are sorted by subject id with
/// the FC direction first; aggregates are mean and population standard
/// deviation per column.
EvalReport evaluate_dataset(const DatasetManifest& manifest, const Translator& sc_to_fc,
                            const Translator& fc_to_sc, const EvalThresholds& thr);

EvalReport evaluate_dataset(const DatasetManifest& manifest, Models& models,
                            const EvalThresholds& thr);

/// Recomputes aggregates from rows (used both internally and as a
/// consistency check).
std::vector<EvalAggregate> aggregate_rows(const std::vector<EvalRow>& rows);

/// CSV: header, one row per subject per direction, then mean and std rows per
/// direction. mse/mae carry 4 decimals, percent-style columns 2; skipped APD
/// cells are left empty.
void save_eval_report(const EvalReport& r, const std::string& path);

/// "m ± s" with 4 decimals for raw metrics, 2 for percent-style ones.
std::string format_mean_std(const ColumnStats& s, bool percent);

}  // namespace sfcgan
