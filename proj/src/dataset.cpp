#include "pgcn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>

#include <json.hpp>

namespace pgcn {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* to_string(BundleError::Kind kind) {
  switch (kind) {
    case BundleError::Kind::MissingFile:
      return "missing-file";
    case BundleError::Kind::Parse:
      return "parse";
    case BundleError::Kind::ShapeMismatch:
      return "shape-mismatch";
    case BundleError::Kind::IndexOutOfRange:
      return "index-out-of-range";
    case BundleError::Kind::LabelOutOfRange:
      return "label-out-of-range";
    case BundleError::Kind::SplitOverlap:
      return "split-overlap";
  }
  return "?";
}

namespace {

using Kind = BundleError::Kind;

std::ifstream open_input(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw BundleError(Kind::MissingFile, "cannot open " + file.string());
  return in;
}

json read_json(const fs::path& file) {
  std::ifstream in = open_input(file);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw BundleError(Kind::Parse, file.string() + ": " + e.what());
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view text, const fs::path& file, std::size_t line) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw BundleError(Kind::Parse, file.string() + ":" + std::to_string(line) + ": bad number '" +
                                       std::string(text) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

IndexList read_index_array(const json& j, const char* key, const fs::path& file) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw BundleError(Kind::Parse, file.string() + ": missing array '" + key + "'");
  }
  IndexList out;
  out.reserve(j[key].size());
  for (const auto& v : j[key]) {
    if (!v.is_number_integer()) throw BundleError(Kind::Parse, file.string() + ": non-integer index");
    out.push_back(v.get<Index>());
  }
  return out;
}

template <typename T>
T read_field(const json& j, const char* key, const fs::path& file) {
  if (!j.contains(key)) throw BundleError(Kind::Parse, file.string() + ": missing field '" + key + "'");
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw BundleError(Kind::Parse, file.string() + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

BundleManifest load_manifest(const fs::path& dir) {
  const fs::path file = dir / "meta.json";
  const json j = read_json(file);
  BundleManifest m;
  m.name = read_field<std::string>(j, "name", file);
  m.version = read_field<int>(j, "version", file);
  if (m.version != 1) throw BundleError(Kind::Parse, file.string() + ": unsupported version");
  m.n = read_field<Index>(j, "n", file);
  m.d = read_field<Index>(j, "d", file);
  m.c = read_field<Index>(j, "c", file);
  m.n_train = read_field<Index>(j, "n_train", file);
  m.n_val = read_field<Index>(j, "n_val", file);
  m.n_test = read_field<Index>(j, "n_test", file);
  if (m.n < 1 || m.d < 1 || m.c < 1) throw BundleError(Kind::Parse, file.string() + ": n, d, c must be positive");
  return m;
}

GraphDataset load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw BundleError(Kind::MissingFile, "bundle directory not found: " + dir.string());
  const BundleManifest m = load_manifest(dir);
  GraphDataset ds;
  ds.name = m.name;
  ds.n = m.n;
  ds.d = m.d;
  ds.c = m.c;

  {
    const fs::path file = dir / "labels.txt";
    std::ifstream in = open_input(file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = trim(line);
      if (t.empty()) continue;
      const int label = parse_number<int>(t, file, lineno);
      if (label < 0 || label >= m.c) {
        throw BundleError(Kind::LabelOutOfRange,
                          file.string() + ":" + std::to_string(lineno) + ": label " + std::to_string(label) +
                              " not in [0, " + std::to_string(m.c) + ")");
      }
      ds.labels.push_back(label);
    }
    if (static_cast<Index>(ds.labels.size()) != m.n) {
      throw BundleError(Kind::ShapeMismatch, file.string() + ": expected " + std::to_string(m.n) + " labels, found " +
                                                 std::to_string(ds.labels.size()));
    }
  }

  {
    const fs::path file = dir / "features.tsv";
    std::ifstream in = open_input(file);
    std::vector<Eigen::Triplet<double, int>> triplets;
    std::string line;
    Index row = 0;
    while (std::getline(in, line)) {
      const auto t = trim(line);
      if (row >= m.n) {
        if (t.empty()) continue;
        throw BundleError(Kind::ShapeMismatch, file.string() + ": more than n = " + std::to_string(m.n) + " rows");
      }
      const auto lineno = static_cast<std::size_t>(row + 1);
      if (t != "-") {
        std::string_view rest = t;
        while (!rest.empty()) {
          const auto sp = rest.find(' ');
          const std::string_view pair = rest.substr(0, sp);
          rest = sp == std::string_view::npos ? std::string_view{} : trim(rest.substr(sp + 1));
          if (pair.empty()) continue;
          const auto tab = pair.find('\t');
          if (tab == std::string_view::npos) {
            throw BundleError(Kind::Parse, file.string() + ":" + std::to_string(lineno) + ": expected idx<TAB>value");
          }
          const auto col = parse_number<Index>(pair.substr(0, tab), file, lineno);
          const auto val = parse_number<double>(pair.substr(tab + 1), file, lineno);
          if (col < 0 || col >= m.d) {
            throw BundleError(Kind::IndexOutOfRange, file.string() + ":" + std::to_string(lineno) +
                                                         ": feature index " + std::to_string(col) + " >= d");
          }
          triplets.emplace_back(static_cast<int>(row), static_cast<int>(col), val);
        }
      }
      ++row;
    }
    if (row != m.n) {
      throw BundleError(Kind::ShapeMismatch, file.string() + ": expected " + std::to_string(m.n) +
                                                 " feature rows, found " + std::to_string(row));
    }
    ds.features.resize(m.n, m.d);
    ds.features.setFromTriplets(triplets.begin(), triplets.end());
    ds.features.makeCompressed();
  }

  {
    const fs::path file = dir / "edges.tsv";
    std::ifstream in = open_input(file);
    ds.edges.n = m.n;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = trim(line);
      if (t.empty()) continue;
      const auto tab = t.find('\t');
      if (tab == std::string_view::npos) {
        throw BundleError(Kind::Parse, file.string() + ":" + std::to_string(lineno) + ": expected u<TAB>v");
      }
      const auto u = parse_number<Index>(t.substr(0, tab), file, lineno);
      const auto v = parse_number<Index>(trim(t.substr(tab + 1)), file, lineno);
      if (u < 0 || v < 0 || u >= m.n || v >= m.n) {
        throw BundleError(Kind::IndexOutOfRange,
                          file.string() + ":" + std::to_string(lineno) + ": node index out of range");
      }
      ds.edges.edges.emplace_back(u, v);
    }
  }

  {
    const fs::path file = dir / "split.json";
    const json j = read_json(file);
    ds.train_idx = read_index_array(j, "train", file);
    ds.val_idx = read_index_array(j, "val", file);
    ds.test_idx = read_index_array(j, "test", file);
    const auto check_size = [&](const IndexList& idx, Index expected, const char* what) {
      if (static_cast<Index>(idx.size()) != expected) {
        throw BundleError(Kind::ShapeMismatch, file.string() + ": " + what + " has " + std::to_string(idx.size()) +
                                                   " entries, manifest says " + std::to_string(expected));
      }
    };
    check_size(ds.train_idx, m.n_train, "train");
    check_size(ds.val_idx, m.n_val, "val");
    check_size(ds.test_idx, m.n_test, "test");
    std::vector<char> seen(static_cast<std::size_t>(m.n), 0);
    for (const IndexList* list : {&ds.train_idx, &ds.val_idx, &ds.test_idx}) {
      for (Index i : *list) {
        if (i < 0 || i >= m.n) throw BundleError(Kind::IndexOutOfRange, file.string() + ": split index out of range");
        if (seen[static_cast<std::size_t>(i)]++) {
          throw BundleError(Kind::SplitOverlap, file.string() + ": node " + std::to_string(i) + " appears twice");
        }
      }
    }
  }
  return ds;
}

void write_bundle(const GraphDataset& ds, const fs::path& dir) {
  require_shape(ds.features.rows() == ds.n && ds.features.cols() == ds.d, "write_bundle: feature shape");
  require_shape(static_cast<Index>(ds.labels.size()) == ds.n, "write_bundle: one label per node");
  fs::create_directories(dir);

  const auto open_output = [](const fs::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw BundleError(Kind::MissingFile, "cannot write " + file.string());
    return out;
  };

  {
    json j = {{"name", ds.name},
              {"version", 1},
              {"n", ds.n},
              {"d", ds.d},
              {"c", ds.c},
              {"n_train", ds.train_idx.size()},
              {"n_val", ds.val_idx.size()},
              {"n_test", ds.test_idx.size()}};
    auto out = open_output(dir / "meta.json");
    out << j.dump(2) << '\n';
  }
  {
    std::vector<std::pair<Index, Index>> edges;
    edges.reserve(ds.edges.edges.size());
    for (auto [u, v] : ds.edges.edges) {
      if (u == v) continue;
      edges.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    auto out = open_output(dir / "edges.tsv");
    for (auto [u, v] : edges) out << u << '\t' << v << '\n';
  }
  {
    auto out = open_output(dir / "features.tsv");
    SparseMat x = ds.features;
    x.makeCompressed();
    for (Index r = 0; r < x.outerSize(); ++r) {
      bool any = false;
      for (SparseMat::InnerIterator it(x, r); it; ++it) {
        if (it.value() == 0.0) continue;
        if (any) out << ' ';
        out << it.col() << '\t' << format_double(it.value());
        any = true;
      }
      if (!any) out << '-';
      out << '\n';
    }
  }
  {
    auto out = open_output(dir / "labels.txt");
    for (int label : ds.labels) out << label << '\n';
  }
  {
    json j = {{"train", ds.train_idx}, {"val", ds.val_idx}, {"test", ds.test_idx}};
    auto out = open_output(dir / "split.json");
    out << j.dump() << '\n';
  }
}

SparseMat row_normalize(const SparseMat& x) {
  SparseMat out = x;
  for (Index r = 0; r < out.outerSize(); ++r) {
    double sum = 0.0;
    for (SparseMat::InnerIterator it(out, r); it; ++it) sum += std::abs(it.value());
    if (sum == 0.0) continue;
    for (SparseMat::InnerIterator it(out, r); it; ++it) it.valueRef() /= sum;
  }
  return out;
}

DenseMat row_normalize(const DenseMat& x) {
  DenseMat out = x;
  for (Index r = 0; r < out.rows(); ++r) {
    const double sum = out.row(r).cwiseAbs().sum();
    if (sum != 0.0) out.row(r) /= sum;
  }
  return out;
}

DenseMat one_hot_targets(const std::vector<int>& labels, const IndexList& idx, Index c) {
  DenseMat t = DenseMat::Zero(static_cast<Index>(idx.size()), c);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Index i = idx[k];
    if (i < 0 || static_cast<std::size_t>(i) >= labels.size()) throw InputError("one_hot_targets: index out of range");
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= c) throw InputError("one_hot_targets: label out of range");
    t(static_cast<Index>(k), label) = 1.0;
  }
  return t;
}

Eigen::VectorXd sketch_column(Index d, Index j, std::uint64_t seed) {
  SeededRng rng(SeededRng::mix_seed(seed, static_cast<std::uint64_t>(j)));
  Eigen::VectorXd col(d);
  for (Index i = 0; i < d; ++i) col(i) = rng.normal();
  return col;
}

DenseMat sketch_product(const SparseMat& x, Index d_prime, std::uint64_t seed) {
  if (d_prime < 1 || d_prime > x.cols()) {
    throw InputError("random projection: d' must lie in [1, " + std::to_string(x.cols()) + "]");
  }
  DenseMat out(x.rows(), d_prime);
  for (Index j = 0; j < d_prime; ++j) {
    const Eigen::VectorXd m = sketch_column(x.cols(), j, seed);
    for (Index r = 0; r < x.outerSize(); ++r) {
      double acc = 0.0;
      for (SparseMat::InnerIterator it(x, r); it; ++it) acc += it.value() * m(it.col());
      out(r, j) = acc;
    }
  }
  return out;
}

DenseMat random_projection(const SparseMat& x, Index d_prime, std::uint64_t seed) {
  DenseMat out = sketch_product(x, d_prime, seed);
  out /= std::sqrt(static_cast<double>(d_prime));
  return out;
}

DenseMat random_projection(const DenseMat& x, Index d_prime, std::uint64_t seed) {
  return random_projection(SparseMat(x.sparseView()), d_prime, seed);
}

Split label_fraction_split(const std::vector<int>& labels, Index c, double fraction, std::uint64_t seed,
                           Index val_cap) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InputError("label fraction must lie in (0, 1)");
  const auto n = static_cast<Index>(labels.size());
  std::vector<IndexList> by_class(static_cast<std::size_t>(c));
  for (Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= c) throw InputError("label_fraction_split: label out of range");
    by_class[static_cast<std::size_t>(label)].push_back(i);
  }

  const auto total = static_cast<Index>(std::floor(fraction * static_cast<double>(n)));
  std::vector<Index> quota(static_cast<std::size_t>(c));
  std::vector<std::pair<double, Index>> remainders;
  Index assigned = 0;
  for (Index k = 0; k < c; ++k) {
    const double exact = fraction * static_cast<double>(by_class[static_cast<std::size_t>(k)].size());
    quota[static_cast<std::size_t>(k)] = static_cast<Index>(std::floor(exact));
    assigned += quota[static_cast<std::size_t>(k)];
    remainders.emplace_back(exact - std::floor(exact), k);
  }
  // Largest remainder first; ties go to the lower class index.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r, ++assigned) {
    ++quota[static_cast<std::size_t>(remainders[r].second)];
  }

  SeededRng rng(seed);
  Split split;
  IndexList rest;
  for (Index k = 0; k < c; ++k) {
    auto members = by_class[static_cast<std::size_t>(k)];
    if (members.empty()) continue;
    const Index q = quota[static_cast<std::size_t>(k)];
    if (q == 0) {
      throw InputError("label fraction leaves class " + std::to_string(k) + " without training nodes");
    }
    shuffle(members, rng);
    split.train.insert(split.train.end(), members.begin(), members.begin() + q);
    rest.insert(rest.end(), members.begin() + q, members.end());
  }
  std::sort(rest.begin(), rest.end());
  shuffle(rest, rng);
  const auto n_val = std::min<Index>(val_cap, static_cast<Index>(rest.size()));
  split.val.assign(rest.begin(), rest.begin() + n_val);
  split.test.assign(rest.begin() + n_val, rest.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

GraphDataset with_features(const GraphDataset& ds, SparseMat features) {
  require_shape(features.rows() == ds.n, "with_features: one row per node");
  GraphDataset out = ds;
  out.d = features.cols();
  out.features = std::move(features);
  return out;
}

GraphDataset with_split(const GraphDataset& ds, const Split& split) {
  GraphDataset out = ds;
  out.train_idx = split.train;
  out.val_idx = split.val;
  out.test_idx = split.test;
  return out;
}

}  // namespace pgcn
