// Copyright 2026 The graphleak Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "graphleak/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace graphleak {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string Where(const fs::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

std::vector<std::string_view> SplitFields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double ParseDouble(std::string_view s, const fs::path& file, std::size_t line,
                   std::size_t field) {
  s = Trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() ||
      !std::isfinite(v)) {
    throw ParseError(Where(file, line) + ": field " + std::to_string(field) +
                     ": not a finite number '" + std::string(s) + "'");
  }
  return v;
}

long long ParseInt(std::string_view s, const fs::path& file, std::size_t line,
                   std::size_t field) {
  s = Trim(s);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(Where(file, line) + ": field " + std::to_string(field) +
                     ": not an integer '" + std::string(s) + "'");
  }
  return v;
}

std::ifstream OpenOrThrow(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": cannot open");
  return in;
}

std::string FormatDouble(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool AllBinary(const Matrix& x) {
  return ((x.array() == 0.0) || (x.array() == 1.0)).all();
}

std::vector<std::pair<Index, Index>> NormalizeEdges(
    Index n, const std::vector<std::pair<Index, Index>>& edges) {
  std::vector<std::pair<Index, Index>> out;
  out.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw ValidationError("edge (" + std::to_string(a) + "," +
                            std::to_string(b) + ") outside [0," +
                            std::to_string(n) + ")");
    }
    if (a == b) continue;
    out.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Index> SampleNodes(Index n, double fraction, RngStream& rng) {
  const Index k = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  // Partial Fisher-Yates: only the first k positions are needed.
  for (Index i = 0; i < k; ++i) {
    const Index j = i + static_cast<Index>(rng.Below(static_cast<std::uint64_t>(n - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  perm.resize(static_cast<std::size_t>(k));
  std::sort(perm.begin(), perm.end());
  return perm;
}

json SplitsToJson(const Splits& s) {
  return json{{"train", s.train}, {"val", s.val}, {"test", s.test}};
}

}  // namespace

std::string ToString(FeatureKind kind) {
  return kind == FeatureKind::kBinary ? "binary" : "continuous";
}

FeatureKind ParseFeatureKind(const std::string& s) {
  if (s == "binary") return FeatureKind::kBinary;
  if (s == "continuous") return FeatureKind::kContinuous;
  throw ParseError("unknown feature_kind '" + s + "'");
}

bool AttributedGraph::HasEdge(Index u, Index v) const {
  return adjacency.coeff(u, v) != 0.0;
}

Matrix AttributedGraph::DenseAdjacency() const { return Matrix(adjacency); }

SparseMatrix AdjacencyFromEdges(Index n,
                                const std::vector<std::pair<Index, Index>>& e) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * e.size());
  for (const auto& [u, v] : e) {
    trips.emplace_back(u, v, 1.0);
    trips.emplace_back(v, u, 1.0);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(trips.begin(), trips.end(),
                    [](double x, double) { return x; });
  a.makeCompressed();
  return a;
}

Splits DefaultSplits(const std::vector<int>& labels, int num_classes,
                     std::uint64_t seed, double train_fraction,
                     double val_fraction) {
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  }
  const RngStream root(seed, 0x5917);
  Splits s;
  for (int c = 0; c < num_classes; ++c) {
    auto& m = members[static_cast<std::size_t>(c)];
    RngStream rng = root.Derive(static_cast<std::uint64_t>(c));
    rng.Shuffle(m.begin(), m.end());
    const auto size = static_cast<double>(m.size());
    std::size_t ntr = static_cast<std::size_t>(std::llround(train_fraction * size));
    std::size_t nva = static_cast<std::size_t>(std::llround(val_fraction * size));
    if (ntr == 0 && !m.empty()) ntr = 1;
    nva = std::min(nva, m.size() - ntr);
    s.train.insert(s.train.end(), m.begin(), m.begin() + static_cast<long>(ntr));
    s.val.insert(s.val.end(), m.begin() + static_cast<long>(ntr),
                 m.begin() + static_cast<long>(ntr + nva));
    s.test.insert(s.test.end(), m.begin() + static_cast<long>(ntr + nva), m.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

AttributedGraph MakeGraph(Matrix features, std::vector<int> labels,
                          int num_classes,
                          const std::vector<std::pair<Index, Index>>& edges,
                          Splits splits, std::uint64_t split_seed) {
  AttributedGraph g;
  const Index n = features.rows();
  if (static_cast<Index>(labels.size()) != n) {
    throw ValidationError("labels: expected " + std::to_string(n) +
                          " entries, got " + std::to_string(labels.size()));
  }
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.num_classes = num_classes;
  g.edges = NormalizeEdges(n, edges);
  g.adjacency = AdjacencyFromEdges(n, g.edges);
  g.feature_kind = AllBinary(g.features) ? FeatureKind::kBinary
                                         : FeatureKind::kContinuous;
  for (int y : g.labels) {
    if (y < 0 || y >= num_classes) {
      throw ValidationError("label " + std::to_string(y) + " outside [0," +
                            std::to_string(num_classes) + ")");
    }
  }
  if (splits.train.empty() && splits.val.empty() && splits.test.empty()) {
    splits = DefaultSplits(g.labels, num_classes, split_seed);
  }
  g.splits = std::move(splits);
  Validate(g);
  return g;
}

void Validate(const AttributedGraph& g) {
  const Index n = g.num_nodes();
  if (static_cast<Index>(g.labels.size()) != n) {
    throw ValidationError("label count differs from node count");
  }
  for (int y : g.labels) {
    if (y < 0 || y >= g.num_classes) {
      throw ValidationError("label " + std::to_string(y) + " out of range");
    }
  }
  if (g.adjacency.rows() != n || g.adjacency.cols() != n) {
    throw ValidationError("adjacency shape " +
                          ShapeString(g.adjacency.rows(), g.adjacency.cols()));
  }
  for (Index u = 0; u < n; ++u) {
    for (SparseMatrix::InnerIterator it(g.adjacency, u); it; ++it) {
      if (it.col() == u) throw ValidationError("adjacency has a self-loop");
      if (it.value() != 1.0) throw ValidationError("adjacency entry not 0/1");
      if (g.adjacency.coeff(it.col(), u) != 1.0) {
        throw ValidationError("adjacency not symmetric");
      }
    }
  }
  if (!g.features.allFinite()) throw ValidationError("non-finite feature");
  if (g.feature_kind == FeatureKind::kBinary && !AllBinary(g.features)) {
    throw ValidationError("binary feature_kind with non-binary entries");
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto* part : {&g.splits.train, &g.splits.val, &g.splits.test}) {
    for (Index i : *part) {
      if (i < 0 || i >= n) throw ValidationError("split id out of range");
      if (seen[static_cast<std::size_t>(i)]++) {
        throw ValidationError("splits overlap at node " + std::to_string(i));
      }
    }
  }
}

namespace {

AttributedGraph LoadCanonical(const fs::path& dir, std::uint64_t split_seed) {
  const fs::path ef = dir / "edges.csv";
  const fs::path ff = dir / "features.csv";
  const fs::path lf = dir / "labels.csv";
  const fs::path mf = dir / "manifest.json";

  std::vector<int> labels;
  {
    auto in = OpenOrThrow(lf);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (Trim(line).empty()) continue;
      const long long y = ParseInt(line, lf, ln, 1);
      if (y < 0) throw ValidationError(Where(lf, ln) + ": negative label");
      labels.push_back(static_cast<int>(y));
    }
  }
  std::vector<std::vector<double>> rows;
  {
    auto in = OpenOrThrow(ff);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (Trim(line).empty()) continue;
      const auto fields = SplitFields(line, ',');
      std::vector<double> row;
      row.reserve(fields.size());
      for (std::size_t k = 0; k < fields.size(); ++k) {
        row.push_back(ParseDouble(fields[k], ff, ln, k + 1));
      }
      if (!rows.empty() && row.size() != rows.front().size()) {
        throw ParseError(Where(ff, ln) + ": expected " +
                         std::to_string(rows.front().size()) + " fields, got " +
                         std::to_string(row.size()));
      }
      rows.push_back(std::move(row));
    }
  }
  const Index n = static_cast<Index>(rows.size());
  const Index d = rows.empty() ? 0 : static_cast<Index>(rows.front().size());
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  std::vector<std::pair<Index, Index>> edges;
  {
    auto in = OpenOrThrow(ef);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (Trim(line).empty()) continue;
      const auto fields = SplitFields(line, ',');
      if (fields.size() != 2) {
        throw ParseError(Where(ef, ln) + ": expected 2 fields, got " +
                         std::to_string(fields.size()));
      }
      const long long u = ParseInt(fields[0], ef, ln, 1);
      const long long v = ParseInt(fields[1], ef, ln, 2);
      if (u < 0 || v < 0 || u >= n || v >= n) {
        throw ValidationError(Where(ef, ln) + ": node id out of range");
      }
      edges.emplace_back(u, v);
    }
  }
  int num_classes = 0;
  for (int y : labels) num_classes = std::max(num_classes, y + 1);
  Splits splits;
  std::string name = dir.filename().string();
  std::optional<FeatureKind> kind;
  if (fs::exists(mf)) {
    std::ifstream in(mf);
    json m;
    try {
      m = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError(mf.string() + ": " + e.what());
    }
    try {
      if (m.contains("n") && m["n"].get<Index>() != n) {
        throw ValidationError(mf.string() + ": n disagrees with features.csv");
      }
      if (m.contains("d") && m["d"].get<Index>() != d) {
        throw ValidationError(mf.string() + ": d disagrees with features.csv");
      }
      if (m.contains("num_classes")) {
        const int c = m["num_classes"].get<int>();
        if (c < num_classes) {
          throw ValidationError(mf.string() + ": label outside num_classes");
        }
        num_classes = c;
      }
      if (m.contains("feature_kind")) {
        kind = ParseFeatureKind(m["feature_kind"].get<std::string>());
      }
      if (m.contains("name")) name = m["name"].get<std::string>();
      if (m.contains("splits")) {
        const auto& s = m["splits"];
        splits.train = s.at("train").get<std::vector<Index>>();
        splits.val = s.at("val").get<std::vector<Index>>();
        splits.test = s.at("test").get<std::vector<Index>>();
      }
    } catch (const json::exception& e) {
      throw ParseError(mf.string() + ": " + e.what());
    }
  }
  AttributedGraph g = MakeGraph(std::move(x), std::move(labels), num_classes,
                                edges, std::move(splits), split_seed);
  if (kind) {
    if (*kind == FeatureKind::kBinary && g.feature_kind != FeatureKind::kBinary) {
      throw ValidationError(mf.string() +
                            ": feature_kind binary but features are not 0/1");
    }
    g.feature_kind = *kind;
  }
  g.name = name;
  return g;
}

AttributedGraph LoadPlanetoidRaw(const fs::path& dir, std::uint64_t split_seed) {
  fs::path base = dir;
  std::string name = dir.filename().string();
  if (fs::is_regular_file(dir.string() + ".content")) {
    base = dir.parent_path();
  }
  const fs::path cf = base / (name + ".content");
  const fs::path tf = base / (name + ".cites");

  std::unordered_map<std::string, Index> id_of;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> class_names;
  {
    auto in = OpenOrThrow(cf);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (Trim(line).empty()) continue;
      const auto fields = SplitFields(Trim(line), '\t');
      if (fields.size() < 3) {
        throw ParseError(Where(cf, ln) + ": expected id, features, label");
      }
      std::vector<double> row;
      row.reserve(fields.size() - 2);
      for (std::size_t k = 1; k + 1 < fields.size(); ++k) {
        row.push_back(ParseDouble(fields[k], cf, ln, k + 1));
      }
      if (!rows.empty() && row.size() != rows.front().size()) {
        throw ParseError(Where(cf, ln) + ": expected " +
                         std::to_string(rows.front().size()) +
                         " features, got " + std::to_string(row.size()));
      }
      const std::string id(fields.front());
      if (!id_of.emplace(id, static_cast<Index>(rows.size())).second) {
        throw ParseError(Where(cf, ln) + ": duplicate node id " + id);
      }
      rows.push_back(std::move(row));
      class_names.emplace_back(Trim(fields.back()));
    }
  }
  std::vector<std::string> classes = class_names;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<int> labels;
  labels.reserve(class_names.size());
  for (const auto& c : class_names) {
    labels.push_back(static_cast<int>(
        std::lower_bound(classes.begin(), classes.end(), c) - classes.begin()));
  }
  const Index n = static_cast<Index>(rows.size());
  const Index d = rows.empty() ? 0 : static_cast<Index>(rows.front().size());
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  std::vector<std::pair<Index, Index>> edges;
  {
    auto in = OpenOrThrow(tf);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (Trim(line).empty()) continue;
      auto fields = SplitFields(Trim(line), '\t');
      if (fields.size() != 2) fields = SplitFields(Trim(line), ' ');
      if (fields.size() != 2) {
        throw ParseError(Where(tf, ln) + ": expected 2 fields");
      }
      const auto a = id_of.find(std::string(Trim(fields[0])));
      const auto b = id_of.find(std::string(Trim(fields[1])));
      // Some public distributions cite papers missing from .content.
      if (a == id_of.end() || b == id_of.end()) continue;
      edges.emplace_back(a->second, b->second);
    }
  }
  AttributedGraph g = MakeGraph(std::move(x), std::move(labels),
                                static_cast<int>(classes.size()), edges, {},
                                split_seed);
  g.name = name;
  return g;
}

}  // namespace

AttributedGraph LoadGraph(const fs::path& path, GraphFormat format,
                          std::uint64_t split_seed) {
  return format == GraphFormat::kCanonical ? LoadCanonical(path, split_seed)
                                           : LoadPlanetoidRaw(path, split_seed);
}

void SaveGraph(const AttributedGraph& g, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "edges.csv", std::ios::binary);
    for (const auto& [u, v] : g.edges) out << u << ',' << v << '\n';
  }
  {
    std::ofstream out(dir / "features.csv", std::ios::binary);
    std::string line;
    for (Index i = 0; i < g.num_nodes(); ++i) {
      line.clear();
      for (Index j = 0; j < g.num_features(); ++j) {
        if (j) line.push_back(',');
        line += FormatDouble(g.features(i, j));
      }
      line.push_back('\n');
      out << line;
    }
  }
  {
    std::ofstream out(dir / "labels.csv", std::ios::binary);
    for (int y : g.labels) out << y << '\n';
  }
  json m{{"n", g.num_nodes()},
         {"d", g.num_features()},
         {"num_classes", g.num_classes},
         {"feature_kind", ToString(g.feature_kind)},
         {"name", g.name},
         {"splits", SplitsToJson(g.splits)}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << m.dump(2) << '\n';
}

AttributedGraph SynthSbm(int blocks, const SbmOptions& o, RngStream rng) {
  if (blocks <= 0 || static_cast<std::size_t>(blocks) != o.sizes.size()) {
    throw ContractError("synth_sbm: " + std::to_string(o.sizes.size()) +
                        " sizes given for " + std::to_string(blocks) + " blocks");
  }
  if (o.p_in < 0 || o.p_in > 1 || o.p_out < 0 || o.p_out > 1) {
    throw DomainError("synth_sbm: probabilities must lie in [0,1]");
  }
  if (o.num_features < blocks) {
    throw ContractError("synth_sbm: need at least one feature per block");
  }
  std::vector<int> labels;
  for (int b = 0; b < blocks; ++b) {
    labels.insert(labels.end(), static_cast<std::size_t>(o.sizes[static_cast<std::size_t>(b)]), b);
  }
  const Index n = static_cast<Index>(labels.size());
  RngStream edge_rng = rng.Derive(0);
  RngStream feat_rng = rng.Derive(1);
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double p = labels[static_cast<std::size_t>(i)] ==
                               labels[static_cast<std::size_t>(j)]
                           ? o.p_in
                           : o.p_out;
      if (edge_rng.Uniform() < p) edges.emplace_back(i, j);
    }
  }
  Matrix x(n, o.num_features);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < o.num_features; ++j) x(i, j) = feat_rng.Normal();
    x(i, labels[static_cast<std::size_t>(i)]) += o.feature_signal;
  }
  AttributedGraph g = MakeGraph(std::move(x), std::move(labels), blocks, edges,
                                {}, rng.key());
  g.feature_kind = FeatureKind::kContinuous;
  g.name = "sbm";
  return g;
}

std::size_t EdgeProbeSet::num_positive() const {
  return static_cast<std::size_t>(std::count_if(
      pairs.begin(), pairs.end(), [](const ProbePair& p) { return p.positive; }));
}

std::size_t EdgeProbeSet::num_negative() const {
  return pairs.size() - num_positive();
}

EdgeProbeSet SampleProbeSet(const AttributedGraph& g, double node_fraction,
                            RngStream rng) {
  const Index n = g.num_nodes();
  EdgeProbeSet probes;
  probes.seed = rng.seed();
  RngStream node_rng = rng.Derive(0);
  RngStream neg_rng = rng.Derive(1);
  RngStream order_rng = rng.Derive(2);
  probes.nodes = SampleNodes(n, node_fraction, node_rng);
  std::vector<char> in_set(static_cast<std::size_t>(n), 0);
  for (Index i : probes.nodes) in_set[static_cast<std::size_t>(i)] = 1;

  for (const auto& [u, v] : g.edges) {
    if (in_set[static_cast<std::size_t>(u)] || in_set[static_cast<std::size_t>(v)]) {
      probes.pairs.push_back({u, v, true});
    }
  }
  const std::size_t need = probes.pairs.size();
  if (need == 0) {
    throw EmptyProbeError("sample_probe_set: no edge is incident to the " +
                          std::to_string(probes.nodes.size()) + " sampled nodes");
  }
  const long double k = static_cast<long double>(probes.nodes.size());
  const long double candidates =
      k * static_cast<long double>(n - static_cast<Index>(probes.nodes.size())) +
      k * (k - 1) / 2;
  const long double available = candidates - static_cast<long double>(need);
  if (available < static_cast<long double>(need)) {
    throw EmptyProbeError("sample_probe_set: only " +
                          std::to_string(static_cast<long long>(available)) +
                          " non-edges touch the sample, " + std::to_string(need) +
                          " negatives needed");
  }
  std::vector<Index> outside;
  for (Index i = 0; i < n; ++i) {
    if (!in_set[static_cast<std::size_t>(i)]) outside.push_back(i);
  }
  const auto ks = static_cast<std::uint64_t>(probes.nodes.size());
  const auto no = static_cast<std::uint64_t>(outside.size());
  const std::uint64_t cross = ks * no;
  const std::uint64_t total = cross + ks * (ks - 1) / 2;
  // Uniform pair among those with at least one sampled endpoint.
  auto pair_at = [&](std::uint64_t t) -> std::pair<Index, Index> {
    Index a, b;
    if (t < cross) {
      a = probes.nodes[t / no];
      b = outside[t % no];
    } else {
      t -= cross;
      std::uint64_t i = 1;
      while (i * (i - 1) / 2 + i <= t) ++i;
      const std::uint64_t j = t - i * (i - 1) / 2;
      a = probes.nodes[i];
      b = probes.nodes[j];
    }
    return {std::min(a, b), std::max(a, b)};
  };
  std::vector<ProbePair> negatives;
  if (available < 4.0L * static_cast<long double>(need)) {
    std::vector<std::pair<Index, Index>> pool;
    for (std::uint64_t t = 0; t < total; ++t) {
      const auto p = pair_at(t);
      if (!g.HasEdge(p.first, p.second)) pool.push_back(p);
    }
    for (std::size_t i = 0; i < need; ++i) {
      const std::size_t j = i + neg_rng.Below(pool.size() - i);
      std::swap(pool[i], pool[j]);
      negatives.push_back({pool[i].first, pool[i].second, false});
    }
  } else {
    std::unordered_set<std::uint64_t> chosen;
    while (negatives.size() < need) {
      const auto p = pair_at(neg_rng.Below(total));
      if (g.HasEdge(p.first, p.second)) continue;
      const auto key = static_cast<std::uint64_t>(p.first) *
                           static_cast<std::uint64_t>(n) +
                       static_cast<std::uint64_t>(p.second);
      if (!chosen.insert(key).second) continue;
      negatives.push_back({p.first, p.second, false});
    }
  }
  probes.pairs.insert(probes.pairs.end(), negatives.begin(), negatives.end());
  order_rng.Shuffle(probes.pairs.begin(), probes.pairs.end());
  return probes;
}

Index CorruptCount(double ratio, Index count) {
  if (ratio < 0.0 || ratio > 1.0) {
    throw DomainError("corrupt: ratio must lie in [0,1]");
  }
  // The epsilon keeps products such as 0.2 * 10 from rounding up to 3.
  const double raw = ratio * static_cast<double>(count);
  return std::min<Index>(count, static_cast<Index>(std::ceil(raw - 1e-9 * std::max(1.0, raw))));
}

Corruption CorruptWithPositions(const Matrix& x, const NoiseSpec& spec,
                                RngStream& rng) {
  Corruption out{x, {}};
  const Index total = x.size();
  const double* data = x.data();
  Index eligible = total;
  if (spec.mode == NoiseMode::kBinaryFlipOnes) {
    eligible = 0;
    for (Index t = 0; t < total; ++t) {
      if (data[t] == 1.0) {
        ++eligible;
      } else if (data[t] != 0.0) {
        throw DomainError("corrupt: binary mode needs 0/1 input");
      }
    }
  }
  Index remaining = CorruptCount(spec.ratio, eligible);
  out.positions.reserve(static_cast<std::size_t>(remaining));
  double* o = out.values.data();
  // Selection sampling: each eligible entry is picked with probability
  // remaining / left, which yields an exact-size uniform subset.
  Index left = eligible;
  for (Index t = 0; t < total && remaining > 0; ++t) {
    if (spec.mode == NoiseMode::kBinaryFlipOnes && data[t] != 1.0) continue;
    if (static_cast<double>(left) * rng.Uniform() < static_cast<double>(remaining)) {
      out.positions.push_back(t);
      if (spec.mode == NoiseMode::kBinaryFlipOnes) {
        o[t] = 0.0;
      } else {
        o[t] += rng.Normal();
      }
      --remaining;
    }
    --left;
  }
  return out;
}

Matrix Corrupt(const Matrix& x, const NoiseSpec& spec, RngStream& rng) {
  return CorruptWithPositions(x, spec, rng).values;
}

AttributedGraph RestrictToNodes(const AttributedGraph& g,
                                const std::vector<Index>& nodes) {
  const Index n = g.num_nodes();
  std::vector<Index> new_id(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    new_id[static_cast<std::size_t>(nodes[k])] = static_cast<Index>(k);
  }
  const Index m = static_cast<Index>(nodes.size());
  AttributedGraph out;
  out.features.resize(m, g.num_features());
  out.labels.resize(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k) {
    out.features.row(k) = g.features.row(nodes[static_cast<std::size_t>(k)]);
    out.labels[static_cast<std::size_t>(k)] =
        g.labels[static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)])];
  }
  out.num_classes = g.num_classes;
  for (const auto& [u, v] : g.edges) {
    const Index a = new_id[static_cast<std::size_t>(u)];
    const Index b = new_id[static_cast<std::size_t>(v)];
    if (a >= 0 && b >= 0) out.edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(out.edges.begin(), out.edges.end());
  out.adjacency = AdjacencyFromEdges(m, out.edges);
  auto remap = [&](const std::vector<Index>& ids) {
    std::vector<Index> r;
    for (Index i : ids) {
      if (new_id[static_cast<std::size_t>(i)] >= 0) {
        r.push_back(new_id[static_cast<std::size_t>(i)]);
      }
    }
    return r;
  };
  out.splits = {remap(g.splits.train), remap(g.splits.val), remap(g.splits.test)};
  out.feature_kind = g.feature_kind;
  out.name = g.name;
  return out;
}

AttributedGraph InducedSubgraph(const AttributedGraph& g, double node_fraction,
                                RngStream rng, std::vector<Index>* original_ids) {
  if (!(node_fraction > 0.0) || node_fraction > 1.0) {
    throw ContractError("induced_subgraph: fraction must lie in (0,1]");
  }
  std::vector<Index> nodes = SampleNodes(g.num_nodes(), node_fraction, rng);
  if (nodes.empty()) {
    throw ContractError("induced_subgraph: fraction selects no nodes");
  }
  if (original_ids != nullptr) *original_ids = nodes;
  return RestrictToNodes(g, nodes);
}

}  // namespace graphleak
