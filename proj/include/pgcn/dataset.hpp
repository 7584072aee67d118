#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "pgcn/graph.hpp"
#include "pgcn/rng.hpp"

namespace pgcn {

/// Node-classification dataset: features, undirected edges, labels and a
/// transductive train/val/test split.
struct GraphDataset {
  std::string name;
  Index n = 0;
  Index d = 0;
  Index c = 0;
  SparseMat features;  // N × D
  EdgeList edges;
  std::vector<int> labels;
  IndexList train_idx;
  IndexList val_idx;
  IndexList test_idx;

  double label_rate() const { return n == 0 ? 0.0 : static_cast<double>(train_idx.size()) / static_cast<double>(n); }
};

/// Contents of meta.json.
struct BundleManifest {
  std::string name;
  int version = 1;
  Index n = 0;
  Index d = 0;
  Index c = 0;
  Index n_train = 0;
  Index n_val = 0;
  Index n_test = 0;
};

class BundleError : public std::runtime_error {
 public:
  enum class Kind { MissingFile, Parse, ShapeMismatch, IndexOutOfRange, LabelOutOfRange, SplitOverlap };

  BundleError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(BundleError::Kind kind);

/// Reads a version-1 bundle directory:
///   meta.json    {"name", "version", "n", "d", "c", "n_train", "n_val", "n_test"}
///   edges.tsv    "u\tv" per line, 0-based
///   features.tsv one line per node: space-separated "idx\tvalue" pairs, or "-"
///   labels.txt   one class per line
///   split.json   {"train": [...], "val": [...], "test": [...]}
/// Features are returned as stored (not normalized).
GraphDataset load_bundle(const std::filesystem::path& dir);

BundleManifest load_manifest(const std::filesystem::path& dir);

/// Writes `ds` in the bundle format. Edges are written once each as u < v,
/// sorted, without self-loops; values use shortest round-trip decimal text.
void write_bundle(const GraphDataset& ds, const std::filesystem::path& dir);

/// Divides each nonzero row by its L1 sum; zero rows pass through unchanged.
SparseMat row_normalize(const SparseMat& x);
DenseMat row_normalize(const DenseMat& x);

/// |idx| × c one-hot rows.
DenseMat one_hot_targets(const std::vector<int>& labels, const IndexList& idx, Index c);

/// Column j of the D × D Gaussian sketch for `seed`. Each column has its own
/// stream, so every D' sees the same leading columns.
Eigen::VectorXd sketch_column(Index d, Index j, std::uint64_t seed);

/// X·M_r with M_r the first d_prime sketch columns (no scaling). Computed one
/// column at a time, so column j is bitwise independent of d_prime.
DenseMat sketch_product(const SparseMat& x, Index d_prime, std::uint64_t seed);

/// X' = X·M_r / sqrt(d_prime).
DenseMat random_projection(const SparseMat& x, Index d_prime, std::uint64_t seed);
DenseMat random_projection(const DenseMat& x, Index d_prime, std::uint64_t seed);

struct Split {
  IndexList train;
  IndexList val;
  IndexList test;
};

/// Class-stratified split with floor(fraction·N) training nodes apportioned by
/// largest remainder; of the rest, up to `val_cap` go to validation and the
/// others to test. Index lists are sorted.
Split label_fraction_split(const std::vector<int>& labels, Index c, double fraction, std::uint64_t seed,
                           Index val_cap = 500);

/// Same dataset with features replaced and split overridden.
GraphDataset with_features(const GraphDataset& ds, SparseMat features);
GraphDataset with_split(const GraphDataset& ds, const Split& split);

}  // namespace pgcn
