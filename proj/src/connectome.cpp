#include "sfcgan/connectome.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace sfcgan {

const char* domain_name(Domain d) { return d == Domain::FC ? "FC" : "SC"; }

int BinaryGraph::edge_count() const {
  int e = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (at(i, j)) ++e;
  return e;
}

int BinaryGraph::degree(int i) const {
  int d = 0;
  for (int j = 0; j < n; ++j)
    if (j != i && at(i, j)) ++d;
  return d;
}

int DatasetManifest::train_count() const {
  int c = 0;
  for (const auto& s : subjects) c += s.split == Split::train ? 1 : 0;
  return c;
}

int DatasetManifest::test_count() const { return int(subjects.size()) - train_count(); }

void validate_connectome(const Connectome& c) {
  if (c.n < 1 || c.values.size() != size_t(c.n) * size_t(c.n))
    throw ValidationError("connectome value buffer does not match node count");
  for (double v : c.values)
    if (!std::isfinite(v)) throw ValidationError("connectome contains NaN or Inf");
  for (int i = 0; i < c.n; ++i) {
    if (c.domain == Domain::FC && c.at(i, i) != 1.0)
      throw ValidationError("FC diagonal entry is not 1");
    if (c.domain == Domain::SC && c.at(i, i) != 0.0)
      throw ValidationError("SC diagonal entry is not 0");
    for (int j = 0; j < c.n; ++j) {
      if (c.at(i, j) != c.at(j, i)) throw ValidationError("connectome is not symmetric");
      const double v = c.at(i, j);
      if (c.domain == Domain::FC && (v < -1.0 || v > 1.0))
        throw ValidationError("FC entry outside [-1,1]");
      if (c.domain == Domain::SC && (v < 0.0 || v > 1.0))
        throw ValidationError("SC entry outside [0,1]");
    }
  }
}

namespace {

std::vector<std::vector<double>> parse_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    auto& row = rows.emplace_back();
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        // from_chars rejects forms like "nan"/"inf" only on some platforms;
        // anything unparseable is a malformed file either way.
        throw ValidationError("malformed numeric field in " + path);
      }
      row.push_back(v);
      p = next;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p < end) {
        if (*p != ',') throw ValidationError("expected comma separator in " + path);
        ++p;
      }
    }
  }
  if (rows.empty()) throw ValidationError("empty matrix file: " + path);
  return rows;
}

}  // namespace

Connectome load_connectome(const std::string& path, Domain domain,
                           std::optional<int> expected_n) {
  const auto rows = parse_csv_matrix(path);
  const int n = int(rows.size());
  for (const auto& r : rows)
    if (int(r.size()) != n)
      throw ValidationError("matrix is not square in " + path);
  if (expected_n && *expected_n != n)
    throw ValidationError("expected " + std::to_string(*expected_n) + " nodes, found " +
                          std::to_string(n) + " in " + path);

  Connectome c;
  c.n = n;
  c.domain = domain;
  c.values.resize(size_t(n) * size_t(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.at(i, j) = rows[size_t(i)][size_t(j)];

  constexpr double tol = 1e-6;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = c.at(i, j);
      if (!std::isfinite(v)) throw ValidationError("NaN or Inf entry in " + path);
      if (domain == Domain::FC && (v < -1.0 - tol || v > 1.0 + tol))
        throw ValidationError("FC entry outside [-1,1] in " + path);
      if (domain == Domain::SC && (v < -tol || v > 1.0 + tol))
        throw ValidationError("SC entry outside [0,1] in " + path);
      if (j > i && std::fabs(v - c.at(j, i)) > tol)
        throw ValidationError("asymmetry beyond 1e-6 in " + path);
    }

  c.values = symmetrize(c.values, n, n);
  const double lo = domain == Domain::FC ? -1.0 : 0.0;
  for (double& v : c.values) v = std::clamp(v, lo, 1.0);
  for (int i = 0; i < n; ++i) c.at(i, i) = domain == Domain::FC ? 1.0 : 0.0;
  return c;
}

void save_connectome(const Connectome& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  std::string line;
  for (int i = 0; i < c.n; ++i) {
    line.clear();
    for (int j = 0; j < c.n; ++j) {
      if (j > 0) line += ',';
      line += format_general(c.at(i, j), 10);
    }
    line += '\n';
    out << line;
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

std::vector<double> symmetrize(const std::vector<double>& m, int rows, int cols) {
  if (rows != cols) throw ValidationError("symmetrize requires a square matrix");
  if (m.size() != size_t(rows) * size_t(cols))
    throw ValidationError("matrix buffer does not match dimensions");
  for (double v : m)
    if (!std::isfinite(v)) throw ValidationError("symmetrize requires finite entries");
  const int n = rows;
  std::vector<double> out(m.size());
  for (int i = 0; i < n; ++i) {
    out[size_t(i) * n + i] = m[size_t(i) * n + i];
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (m[size_t(i) * n + j] + m[size_t(j) * n + i]);
      out[size_t(i) * n + j] = v;
      out[size_t(j) * n + i] = v;
    }
  }
  return out;
}

std::pair<Connectome, double> normalize_sc(const std::vector<double>& raw, int n,
                                           std::optional<double> sc_max) {
  if (raw.size() != size_t(n) * size_t(n))
    throw ValidationError("matrix buffer does not match dimensions");
  for (double v : raw)
    if (!(v >= 0.0)) throw ValidationError("normalize_sc requires nonnegative entries");
  if (sc_max && *sc_max <= 0.0) throw ValidationError("sc_max must be positive");

  std::vector<double> sym = symmetrize(raw, n, n);
  double used = 0.0;
  if (sc_max) {
    used = *sc_max;
  } else {
    for (double v : sym) used = std::max(used, v);
    if (used == 0.0) used = 1.0;
  }
  const double denom = std::log1p(used);
  Connectome c;
  c.n = n;
  c.domain = Domain::SC;
  c.values.resize(sym.size());
  for (size_t i = 0; i < sym.size(); ++i)
    c.values[i] = std::clamp(std::log1p(sym[i]) / denom, 0.0, 1.0);
  for (int i = 0; i < n; ++i) c.at(i, i) = 0.0;
  return {std::move(c), used};
}

std::vector<double> denormalize_sc(const Connectome& c, double sc_max) {
  if (c.domain != Domain::SC)
    throw ValidationError("denormalize_sc requires an SC connectome");
  if (sc_max <= 0.0) throw ValidationError("sc_max must be positive");
  const double scale = std::log1p(sc_max);
  std::vector<double> out(c.values.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::expm1(c.values[i] * scale);
  return out;
}

BinaryGraph threshold_binary(const Connectome& c, ThresholdMode mode) {
  BinaryGraph g(c.n);
  if (mode.kind == ThresholdMode::absolute) {
    if (mode.value < 0.0) throw ValidationError("absolute threshold must be >= 0");
    for (int i = 0; i < c.n; ++i)
      for (int j = i + 1; j < c.n; ++j)
        if (std::fabs(c.at(i, j)) > mode.value) g.set_edge(i, j);
    return g;
  }
  const double rho = mode.value;
  if (rho <= 0.0 || rho > 1.0) throw ValidationError("proportional threshold must be in (0,1]");
  const int64_t pairs = int64_t(c.n) * (c.n - 1) / 2;
  const auto keep = int64_t(std::floor(rho * double(pairs) + 1e-9));

  struct Entry {
    double mag;
    int i, j;
  };
  std::vector<Entry> entries;
  for (int i = 0; i < c.n; ++i)
    for (int j = i + 1; j < c.n; ++j)
      if (c.at(i, j) != 0.0) entries.push_back({std::fabs(c.at(i, j)), i, j});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.mag != b.mag) return a.mag > b.mag;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  const auto take = std::min<int64_t>(keep, int64_t(entries.size()));
  for (int64_t k = 0; k < take; ++k) g.set_edge(entries[size_t(k)].i, entries[size_t(k)].j);
  return g;
}

std::vector<double> vectorize_upper(const Connectome& c) {
  std::vector<double> out;
  out.reserve(size_t(c.n) * (c.n - 1) / 2);
  for (int i = 0; i < c.n; ++i)
    for (int j = i + 1; j < c.n; ++j) out.push_back(c.at(i, j));
  return out;
}

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& what) {
  throw ValidationError("manifest schema violation: " + what);
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) schema_error("top level must be an object");
  if (!doc.contains("n") || !doc["n"].is_number_integer()) schema_error("missing integer 'n'");
  if (!doc.contains("sc_max") || !doc["sc_max"].is_number()) schema_error("missing number 'sc_max'");
  if (!doc.contains("subjects") || !doc["subjects"].is_array()) schema_error("missing 'subjects' array");

  DatasetManifest m;
  m.n = doc["n"].get<int>();
  m.sc_max = doc["sc_max"].get<double>();
  if (m.n < 2) schema_error("'n' must be at least 2");
  if (!(m.sc_max > 0.0)) schema_error("'sc_max' must be positive");

  const fs::path base = fs::path(path).parent_path();
  for (const auto& s : doc["subjects"]) {
    if (!s.is_object()) schema_error("subject entries must be objects");
    SubjectEntry e;
    if (!s.contains("id") || !s["id"].is_string()) schema_error("subject missing 'id'");
    e.id = s["id"].get<std::string>();
    if (!s.contains("fc") || !s["fc"].is_string())
      schema_error("subject '" + e.id + "' missing 'fc' path (paired data required)");
    if (!s.contains("sc") || !s["sc"].is_string())
      schema_error("subject '" + e.id + "' missing 'sc' path (paired data required)");
    if (!s.contains("label") || !s["label"].is_number_integer())
      schema_error("subject '" + e.id + "' missing integer 'label'");
    if (!s.contains("split") || !s["split"].is_string())
      schema_error("subject '" + e.id + "' missing 'split'");
    const std::string split = s["split"].get<std::string>();
    if (split == "train")
      e.split = Split::train;
    else if (split == "test")
      e.split = Split::test;
    else
      schema_error("subject '" + e.id + "' split must be 'train' or 'test'");
    e.label = s["label"].get<int>();
    e.fc_path = (base / s["fc"].get<std::string>()).lexically_normal().string();
    e.sc_path = (base / s["sc"].get<std::string>()).lexically_normal().string();
    for (const std::string& p : {e.fc_path, e.sc_path})
      if (!fs::exists(p))
        throw ValidationError("manifest references missing file: " + p);
    m.subjects.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  const fs::path base = fs::path(path).parent_path();
  nlohmann::ordered_json doc;
  doc["n"] = m.n;
  doc["sc_max"] = m.sc_max;
  doc["subjects"] = nlohmann::ordered_json::array();
  for (const auto& s : m.subjects) {
    nlohmann::ordered_json e;
    e["id"] = s.id;
    e["fc"] = fs::proximate(s.fc_path, base).generic_string();
    e["sc"] = fs::proximate(s.sc_path, base).generic_string();
    e["label"] = s.label;
    e["split"] = s.split == Split::train ? "train" : "test";
    doc["subjects"].push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace sfcgan
