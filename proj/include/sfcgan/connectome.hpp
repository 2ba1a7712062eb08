#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfcgan/common.hpp"

namespace sfcgan {

enum class Domain { FC, SC };

const char* domain_name(Domain d);

/// Symmetric n x n connectivity matrix. FC entries are correlations in
/// [-1,1] with unit diagonal; SC entries are normalized fiber counts in
/// [0,1] with zero diagonal.
struct Connectome {
  int n = 0;
  std::vector<double> values;
  Domain domain = Domain::FC;
  std::string subject_id;
  std::optional<int> label;

  double& at(int i, int j) { return values[size_t(i) * size_t(n) + size_t(j)]; }
  double at(int i, int j) const { return values[size_t(i) * size_t(n) + size_t(j)]; }
};

/// Checks every Connectome invariant (symmetry, range, diagonal, finiteness).
void validate_connectome(const Connectome& c);

struct BinaryGraph {
  int n = 0;
  std::vector<uint8_t> adjacency;

  explicit BinaryGraph(int nodes = 0) : n(nodes), adjacency(size_t(nodes) * size_t(nodes), 0) {}
  bool at(int i, int j) const { return adjacency[size_t(i) * size_t(n) + size_t(j)] != 0; }
  void set_edge(int i, int j) {
    adjacency[size_t(i) * size_t(n) + size_t(j)] = 1;
    adjacency[size_t(j) * size_t(n) + size_t(i)] = 1;
  }
  int edge_count() const;
  int degree(int i) const;
};

enum class Split { train, test };

struct SubjectEntry {
  std::string id;
  std::string fc_path;
  std::string sc_path;
  int label = 0;
  Split split = Split::train;
};

struct DatasetManifest {
  int n = 0;
  double sc_max = 1.0;
  std::vector<SubjectEntry> subjects;

  int train_count() const;
  int test_count() const;
};

Connectome load_connectome(const std::string& path, Domain domain,
                           std::optional<int> expected_n = std::nullopt);
void save_connectome(const Connectome& c, const std::string& path);

/// (M + M^T)/2 with exact output symmetry.
std::vector<double> symmetrize(const std::vector<double>& m, int rows, int cols);

/// log1p scaling of raw fiber counts into [0,1]. sc_max defaults to the
/// matrix maximum (1.0 when the matrix is all zero, keeping it positive).
std::pair<Connectome, double> normalize_sc(const std::vector<double>& raw, int n,
                                           std::optional<double> sc_max = std::nullopt);
std::vector<double> denormalize_sc(const Connectome& c, double sc_max);

struct ThresholdMode {
  enum Kind { absolute, proportional };
  Kind kind = absolute;
  double value = 0.0;

  static ThresholdMode abs_tau(double tau) { return {absolute, tau}; }
  static ThresholdMode prop_rho(double rho) { return {proportional, rho}; }
};

/// Absolute mode keeps off-diagonal |v| > tau. Proportional keeps the
/// floor(rho*n(n-1)/2) largest |v| among nonzero off-diagonals, ties broken
/// by smaller (i,j).
BinaryGraph threshold_binary(const Connectome& c, ThresholdMode mode);

/// Strict upper triangle in row-major order, length n(n-1)/2.
std::vector<double> vectorize_upper(const Connectome& c);

/// Manifest JSON I/O. On load, fc/sc paths are resolved relative to the
/// manifest file and stored absolute; on save they are re-relativized.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

}  // namespace sfcgan
