#include "sfcgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>

#include "sfcgan/losses.hpp"

namespace sfcgan {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01, kK2 = 0.03;

const std::vector<double>& ssim_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(size_t(kWin) * kWin);
    double total = 0.0;
    for (int u = 0; u < kWin; ++u) {
      for (int t = 0; t < kWin; ++t) {
        double du = u - (kWin - 1) / 2.0;
        double dt = t - (kWin - 1) / 2.0;
        v[size_t(u) * kWin + t] = std::exp(-(du * du + dt * dt) / (2.0 * kSigma * kSigma));
        total += v[size_t(u) * kWin + t];
      }
    }
    for (auto& x : v) x /= total;
    return v;
  }();
  return w;
}

double ssim_from_moments(double mx, double my, double sxx, double syy, double sxy,
                         double c1, double c2) {
  double vx = sxx - mx * mx;
  double vy = syy - my * my;
  double cov = sxy - mx * my;
  double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
  double den = (mx * mx + my * my + c1) * (vx + vy + c2);
  return num / den;
}

double ssim_mean(const Connectome& a, const Connectome& b, bool* global_flag) {
  double range = a.domain == Domain::FC ? 2.0 : 1.0;
  double c1 = (kK1 * range) * (kK1 * range);
  double c2 = (kK2 * range) * (kK2 * range);
  int n = a.n;
  if (n < kWin) {
    *global_flag = true;
    double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
    double inv = 1.0 / (double(n) * n);
    for (size_t k = 0; k < a.values.size(); ++k) {
      double x = a.values[k], y = b.values[k];
      mx += inv * x;
      my += inv * y;
      sxx += inv * x * x;
      syy += inv * y * y;
      sxy += inv * x * y;
    }
    return ssim_from_moments(mx, my, sxx, syy, sxy, c1, c2);
  }
  *global_flag = false;
  const auto& w = ssim_window();
  double sum = 0.0;
  int windows = 0;
  for (int i0 = 0; i0 + kWin <= n; ++i0) {
    for (int j0 = 0; j0 + kWin <= n; ++j0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int u = 0; u < kWin; ++u) {
        for (int t = 0; t < kWin; ++t) {
          double wk = w[size_t(u) * kWin + t];
          double x = a.at(i0 + u, j0 + t);
          double y = b.at(i0 + u, j0 + t);
          mx += wk * x;
          my += wk * y;
          sxx += wk * x * x;
          syy += wk * y * y;
          sxy += wk * x * y;
        }
      }
      sum += ssim_from_moments(mx, my, sxx, syy, sxy, c1, c2);
      ++windows;
    }
  }
  return sum / windows;
}

double cosine(std::span<const double> x, std::span<const double> y) {
  double xy = 0, xx = 0, yy = 0;
  for (size_t k = 0; k < x.size(); ++k) {
    xy += x[k] * y[k];
    xx += x[k] * x[k];
    yy += y[k] * y[k];
  }
  if (xx == 0.0 || yy == 0.0) return 0.0;
  return xy / std::sqrt(xx * yy);
}

std::vector<int> bfs_hops(const BinaryGraph& g, int src) {
  std::vector<int> dist(size_t(g.n), -1);
  std::vector<int> queue;
  queue.reserve(size_t(g.n));
  dist[size_t(src)] = 0;
  queue.push_back(src);
  for (size_t head = 0; head < queue.size(); ++head) {
    int u = queue[head];
    for (int v = 0; v < g.n; ++v) {
      if (g.at(u, v) && dist[size_t(v)] < 0) {
        dist[size_t(v)] = dist[size_t(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

void stats_from(const std::vector<double>& vals, ColumnStats& out) {
  out.count = int(vals.size());
  if (vals.empty()) {
    out.mean = out.stddev = 0.0;
    return;
  }
  double sum = 0.0;
  for (double v : vals) sum += v;
  out.mean = sum / double(vals.size());
  double sq = 0.0;
  for (double v : vals) sq += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(sq / double(vals.size()));
}

}  // namespace

SimilarityMetrics similarity_metrics(const Connectome& truth, const Connectome& pred) {
  if (truth.n != pred.n)
    throw ValidationError("similarity: size mismatch, " + std::to_string(truth.n) + " vs " +
                          std::to_string(pred.n));
  if (truth.domain != pred.domain)
    throw ValidationError(std::string("similarity: domain mismatch, ") +
                          domain_name(truth.domain) + " vs " + domain_name(pred.domain));
  SimilarityMetrics m;
  double se = 0, ae = 0;
  for (size_t k = 0; k < truth.values.size(); ++k) {
    double d = pred.values[k] - truth.values[k];
    se += d * d;
    ae += std::abs(d);
  }
  m.mse = se / double(truth.values.size());
  m.mae = ae / double(truth.values.size());
  m.ssim = 100.0 * ssim_mean(truth, pred, &m.ssim_global);
  m.pearson = 100.0 * pearson(truth.values, pred.values);
  m.cosine = 100.0 * cosine(truth.values, pred.values);
  return m;
}

double graph_density(const BinaryGraph& g) {
  if (g.n < 2) throw ValidationError("density needs at least 2 nodes");
  return 2.0 * g.edge_count() / (double(g.n) * (g.n - 1));
}

double characteristic_path_length(const BinaryGraph& g, int* excluded_pairs) {
  int reachable = 0, excluded = 0;
  double total = 0.0;
  for (int i = 0; i < g.n; ++i) {
    auto dist = bfs_hops(g, i);
    for (int j = i + 1; j < g.n; ++j) {
      if (dist[size_t(j)] < 0) {
        ++excluded;
      } else {
        total += dist[size_t(j)];
        ++reachable;
      }
    }
  }
  if (excluded_pairs) *excluded_pairs = excluded;
  if (reachable == 0)
    throw ValidationError("characteristic path length undefined: no reachable pairs");
  return total / reachable;
}

double global_efficiency(const BinaryGraph& g) {
  if (g.n < 2) throw ValidationError("efficiency needs at least 2 nodes");
  double total = 0.0;
  for (int i = 0; i < g.n; ++i) {
    auto dist = bfs_hops(g, i);
    for (int j = i + 1; j < g.n; ++j)
      if (dist[size_t(j)] > 0) total += 1.0 / dist[size_t(j)];
  }
  return total / (double(g.n) * (g.n - 1) / 2.0);
}

namespace {

// Q for a labeling whose ids are compact (0..max). Communities are summed in
// ascending id order so recomputation is reproducible.
double q_of_labels(const BinaryGraph& g, const std::vector<int>& lab, int m) {
  int groups = 0;
  for (int c : lab) groups = std::max(groups, c + 1);
  std::vector<double> intra(size_t(groups), 0.0), deg(size_t(groups), 0.0);
  for (int i = 0; i < g.n; ++i) {
    deg[size_t(lab[size_t(i)])] += g.degree(i);
    for (int j = i + 1; j < g.n; ++j)
      if (g.at(i, j) && lab[size_t(i)] == lab[size_t(j)]) intra[size_t(lab[size_t(i)])] += 1.0;
  }
  double q = 0.0;
  for (int c = 0; c < groups; ++c) {
    double frac = deg[size_t(c)] / (2.0 * m);
    q += intra[size_t(c)] / m - frac * frac;
  }
  return q;
}

// Exact optimum by enumerating every set partition as a restricted growth
// string; the first one reaching the maximum wins, which keeps the result
// deterministic.
double modularity_exact(const BinaryGraph& g, int m, std::vector<int>* partition) {
  int n = g.n;
  std::vector<int> a(size_t(n), 0), best(size_t(n), 0);
  double best_q = -2.0;
  auto rec = [&](auto&& self, int i, int blocks) -> void {
    if (i == n) {
      double q = q_of_labels(g, a, m);
      if (q > best_q) {
        best_q = q;
        best = a;
      }
      return;
    }
    for (int c = 0; c <= blocks; ++c) {
      a[size_t(i)] = c;
      self(self, i + 1, std::max(blocks, c + 1));
    }
  };
  rec(rec, 0, 0);
  if (partition) *partition = best;
  return best_q;
}

constexpr int kExactModularityLimit = 8;

}  // namespace

double modularity(const BinaryGraph& g, std::vector<int>* partition) {
  int m = g.edge_count();
  if (m == 0) throw ValidationError("modularity undefined on an edgeless graph");
  int n = g.n;
  // Small graphs get the exact optimum: the greedy merge path can end more
  // than 0.05 below it (8 edges on 6 nodes suffice), and exhaustive search
  // at this size is cheaper than the merge bookkeeping.
  if (n <= kExactModularityLimit) return modularity_exact(g, m, partition);
  // Community state indexed by original node id; merging keeps the smaller id.
  std::vector<double> between(size_t(n) * n, 0.0);
  std::vector<double> intra(size_t(n), 0.0), deg(size_t(n), 0.0);
  std::vector<bool> active(size_t(n), true);
  std::vector<int> comm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) comm[size_t(i)] = i;
  for (int i = 0; i < n; ++i) {
    deg[size_t(i)] = g.degree(i);
    for (int j = i + 1; j < n; ++j)
      if (g.at(i, j)) between[size_t(i) * n + j] = between[size_t(j) * n + i] = 1.0;
  }

  double q = 0.0;
  for (int i = 0; i < n; ++i) {
    double frac = deg[size_t(i)] / (2.0 * m);
    q -= frac * frac;
  }
  double best_q = q;
  std::vector<int> best_comm = comm;

  // Merge the full hierarchy (gains may go negative before recovering) and
  // keep the earliest prefix with the highest running Q.
  for (int step = 0; step + 1 < n; ++step) {
    double best = 0.0;
    int ba = -1, bb = -1;
    for (int a = 0; a < n; ++a) {
      if (!active[size_t(a)]) continue;
      for (int b = a + 1; b < n; ++b) {
        if (!active[size_t(b)]) continue;
        double gain = between[size_t(a) * n + b] / m -
                      deg[size_t(a)] * deg[size_t(b)] / (2.0 * m * m);
        if (ba < 0 || gain > best) {
          best = gain;
          ba = a;
          bb = b;
        }
      }
    }
    intra[size_t(ba)] += intra[size_t(bb)] + between[size_t(ba) * n + bb];
    deg[size_t(ba)] += deg[size_t(bb)];
    for (int c = 0; c < n; ++c) {
      if (!active[size_t(c)] || c == ba || c == bb) continue;
      between[size_t(ba) * n + c] += between[size_t(bb) * n + c];
      between[size_t(c) * n + ba] = between[size_t(ba) * n + c];
    }
    active[size_t(bb)] = false;
    for (int i = 0; i < n; ++i)
      if (comm[size_t(i)] == bb) comm[size_t(i)] = ba;
    q += best;
    if (q > best_q) {
      best_q = q;
      best_comm = comm;
    }
  }

  // Refinement: sweep nodes in order and apply the best strictly-improving
  // single-node move (to any community or a fresh one). The agglomerative
  // phase alone can land more than 0.05 below the optimum on small graphs.
  std::vector<int>& lab = best_comm;
  std::vector<double> dcom(size_t(n), 0.0);
  std::vector<int> cnt(size_t(n), 0);
  for (int i = 0; i < n; ++i) {
    dcom[size_t(lab[size_t(i)])] += g.degree(i);
    cnt[size_t(lab[size_t(i)])] += 1;
  }
  std::vector<double> links(size_t(n), 0.0);
  const double m2 = 2.0 * m * m;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool moved = false;
    for (int i = 0; i < n; ++i) {
      const int a = lab[size_t(i)];
      const double ki = g.degree(i);
      std::fill(links.begin(), links.end(), 0.0);
      for (int j = 0; j < n; ++j)
        if (g.at(i, j)) links[size_t(lab[size_t(j)])] += 1.0;
      int first_empty = -1;
      for (int c = 0; c < n; ++c)
        if (cnt[size_t(c)] == 0) {
          first_empty = c;
          break;
        }
      double best_gain = 1e-12;
      int best_t = -1;
      for (int t = 0; t < n; ++t) {
        if (t == a) continue;
        if (cnt[size_t(t)] == 0 && (t != first_empty || cnt[size_t(a)] == 1)) continue;
        double gain =
            (links[size_t(t)] - links[size_t(a)]) / m + ki * (dcom[size_t(a)] - dcom[size_t(t)] - ki) / m2;
        if (gain > best_gain) {
          best_gain = gain;
          best_t = t;
        }
      }
      if (best_t >= 0) {
        dcom[size_t(a)] -= ki;
        cnt[size_t(a)] -= 1;
        dcom[size_t(best_t)] += ki;
        cnt[size_t(best_t)] += 1;
        lab[size_t(i)] = best_t;
        moved = true;
      }
    }
    if (!moved) break;
  }

  // Compact to ids by first appearance and recompute Q exactly, free of the
  // incremental accumulation.
  std::vector<int> label(size_t(n), -1);
  std::vector<int> compact(size_t(n), -1);
  int groups = 0;
  for (int i = 0; i < n; ++i) {
    int c = lab[size_t(i)];
    if (label[size_t(c)] < 0) label[size_t(c)] = groups++;
    compact[size_t(i)] = label[size_t(c)];
  }
  double q_exact = q_of_labels(g, compact, m);
  if (partition) *partition = compact;
  return q_exact;
}

std::optional<double> apd(double translated, double truth) {
  if (truth == 0.0) return std::nullopt;
  return std::abs(translated - truth) / std::abs(truth) * 100.0;
}

namespace {

// Computes one graph property on truth and prediction, converting exceptions
// into a recorded failure instead of aborting the subject.
template <typename Fn>
std::optional<double> guarded_apd(Fn&& metric, const BinaryGraph& truth_g,
                                  const BinaryGraph& pred_g, const std::string& where,
                                  const char* name, std::vector<std::string>& failures) {
  try {
    double t = metric(truth_g);
    double p = metric(pred_g);
    return apd(p, t);
  } catch (const std::exception& e) {
    failures.push_back(where + " " + name + ": " + e.what());
    return std::nullopt;
  }
}

}  // namespace

EvalReport evaluate_dataset(const DatasetManifest& manifest, const Translator& sc_to_fc,
                            const Translator& fc_to_sc, const EvalThresholds& thr) {
  std::vector<const SubjectEntry*> test;
  for (const auto& s : manifest.subjects)
    if (s.split == Split::test) test.push_back(&s);
  if (test.empty()) throw ValidationError("evaluate: test split is empty");
  std::sort(test.begin(), test.end(),
            [](const SubjectEntry* a, const SubjectEntry* b) { return a->id < b->id; });

  EvalReport rep;
  for (const SubjectEntry* s : test) {
    Connectome fc, sc;
    try {
      fc = load_connectome(s->fc_path, Domain::FC, manifest.n);
      sc = load_connectome(s->sc_path, Domain::SC, manifest.n);
    } catch (const std::exception& e) {
      rep.failures.push_back(s->id + ": " + e.what());
      continue;
    }
    for (Domain dir : {Domain::FC, Domain::SC}) {
      const Connectome& truth = dir == Domain::FC ? fc : sc;
      std::string where = s->id + " -> " + domain_name(dir);
      EvalRow row;
      row.subject = s->id;
      row.direction = dir;
      try {
        Connectome pred = dir == Domain::FC ? sc_to_fc(sc) : fc_to_sc(fc);
        row.sim = similarity_metrics(truth, pred);
        BinaryGraph truth_g = threshold_binary(truth, thr.for_domain(dir));
        BinaryGraph pred_g = threshold_binary(pred, thr.for_domain(dir));
        row.apd_density = guarded_apd(graph_density, truth_g, pred_g, where, "density",
                                      rep.failures);
        row.apd_cpl = guarded_apd([](const BinaryGraph& g) { return characteristic_path_length(g); },
                                  truth_g, pred_g, where, "cpl", rep.failures);
        row.apd_efficiency = guarded_apd(global_efficiency, truth_g, pred_g, where,
                                         "efficiency", rep.failures);
        row.apd_modularity = guarded_apd([](const BinaryGraph& g) { return modularity(g); },
                                         truth_g, pred_g, where, "modularity", rep.failures);
      } catch (const std::exception& e) {
        rep.failures.push_back(where + ": " + e.what());
        continue;
      }
      rep.rows.push_back(std::move(row));
    }
  }
  std::sort(rep.rows.begin(), rep.rows.end(), [](const EvalRow& a, const EvalRow& b) {
    if (a.subject != b.subject) return a.subject < b.subject;
    return a.direction == Domain::FC && b.direction == Domain::SC;
  });
  rep.aggregates = aggregate_rows(rep.rows);
  return rep;
}

EvalReport evaluate_dataset(const DatasetManifest& manifest, Models& models,
                            const EvalThresholds& thr) {
  return evaluate_dataset(
      manifest, [&](const Connectome& x) { return translate(models.g_fc, x); },
      [&](const Connectome& x) { return translate(models.g_sc, x); }, thr);
}

std::vector<EvalAggregate> aggregate_rows(const std::vector<EvalRow>& rows) {
  std::vector<EvalAggregate> out;
  for (Domain dir : {Domain::FC, Domain::SC}) {
    std::vector<double> mse, mae, ssim, pear, cos, d, cpl, eff, mod;
    for (const auto& r : rows) {
      if (r.direction != dir) continue;
      mse.push_back(r.sim.mse);
      mae.push_back(r.sim.mae);
      ssim.push_back(r.sim.ssim);
      pear.push_back(r.sim.pearson);
      cos.push_back(r.sim.cosine);
      if (r.apd_density) d.push_back(*r.apd_density);
      if (r.apd_cpl) cpl.push_back(*r.apd_cpl);
      if (r.apd_efficiency) eff.push_back(*r.apd_efficiency);
      if (r.apd_modularity) mod.push_back(*r.apd_modularity);
    }
    if (mse.empty()) continue;
    EvalAggregate agg;
    agg.direction = dir;
    stats_from(mse, agg.mse);
    stats_from(mae, agg.mae);
    stats_from(ssim, agg.ssim);
    stats_from(pear, agg.pearson);
    stats_from(cos, agg.cosine);
    stats_from(d, agg.apd_density);
    stats_from(cpl, agg.apd_cpl);
    stats_from(eff, agg.apd_efficiency);
    stats_from(mod, agg.apd_modularity);
    out.push_back(agg);
  }
  return out;
}

namespace {

std::string apd_cell(const std::optional<double>& v) {
  return v ? format_fixed(*v, 2) : std::string();
}

void write_row(std::ofstream& out, const std::string& subject, Domain dir,
               const std::string& mse, const std::string& mae, const std::string& ssim,
               const std::string& pearson, const std::string& cosine, const std::string& d,
               const std::string& cpl, const std::string& eff, const std::string& mod) {
  out << subject << ',' << domain_name(dir) << ',' << mse << ',' << mae << ',' << ssim << ','
      << pearson << ',' << cosine << ',' << d << ',' << cpl << ',' << eff << ',' << mod << '\n';
}

std::string agg_cell(const ColumnStats& s, double ColumnStats::*field, int decimals) {
  return s.count > 0 ? format_fixed(s.*field, decimals) : std::string();
}

}  // namespace

void save_eval_report(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "subject,direction,mse,mae,ssim,pearson,cosine,apd_density,apd_cpl,"
         "apd_efficiency,apd_modularity\n";
  for (const auto& row : r.rows) {
    write_row(out, row.subject, row.direction, format_fixed(row.sim.mse, 4),
              format_fixed(row.sim.mae, 4), format_fixed(row.sim.ssim, 2),
              format_fixed(row.sim.pearson, 2), format_fixed(row.sim.cosine, 2),
              apd_cell(row.apd_density), apd_cell(row.apd_cpl), apd_cell(row.apd_efficiency),
              apd_cell(row.apd_modularity));
  }
  for (const auto& agg : r.aggregates) {
    for (auto field : {&ColumnStats::mean, &ColumnStats::stddev}) {
      write_row(out, field == &ColumnStats::mean ? "mean" : "std", agg.direction,
                agg_cell(agg.mse, field, 4), agg_cell(agg.mae, field, 4),
                agg_cell(agg.ssim, field, 2), agg_cell(agg.pearson, field, 2),
                agg_cell(agg.cosine, field, 2), agg_cell(agg.apd_density, field, 2),
                agg_cell(agg.apd_cpl, field, 2), agg_cell(agg.apd_efficiency, field, 2),
                agg_cell(agg.apd_modularity, field, 2));
    }
  }
  if (!out.good()) throw IoError("write failed for " + path);
}

std::string format_mean_std(const ColumnStats& s, bool percent) {
  int decimals = percent ? 2 : 4;
  return format_fixed(s.mean, decimals) + " \xc2\xb1 " + format_fixed(s.stddev, decimals);
}

}  // namespace sfcgan
