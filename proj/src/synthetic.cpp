#include "pgcn/synthetic.hpp"

#include <algorithm>
#include <string>

namespace pgcn {

void SbmSpec::validate() const {
  if (n < 1 || c < 1 || d < 1) throw InputError("sbm: n, c, d must be positive");
  if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0)) {
    throw InputError("sbm: edge probabilities must lie in [0, 1]");
  }
  if (topic_words < 1 || topic_words * c > d) throw InputError("sbm: topic blocks must fit in d");
  if (words_per_node < 0) throw InputError("sbm: words per node must be non-negative");
  if (!(topic_purity >= 0.0 && topic_purity <= 1.0)) throw InputError("sbm: topic purity must lie in [0, 1]");
  if (train_per_class < 1 || n_val < 0) throw InputError("sbm: bad split sizes");
  if (train_per_class * c + n_val > n) throw InputError("sbm: split larger than graph");
  if (n / c < train_per_class) throw InputError("sbm: class smaller than its training quota");
}

GraphDataset make_sbm_dataset(const SbmSpec& spec) {
  spec.validate();
  SeededRng rng(spec.seed);
  GraphDataset ds;
  ds.name = "sbm";
  ds.n = spec.n;
  ds.d = spec.d;
  ds.c = spec.c;
  ds.labels.resize(static_cast<std::size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) ds.labels[static_cast<std::size_t>(i)] = static_cast<int>(i % spec.c);

  ds.edges.n = spec.n;
  for (Index u = 0; u < spec.n; ++u) {
    for (Index v = u + 1; v < spec.n; ++v) {
      const bool same = ds.labels[static_cast<std::size_t>(u)] == ds.labels[static_cast<std::size_t>(v)];
      if (rng.uniform01() < (same ? spec.p_in : spec.p_out)) ds.edges.edges.emplace_back(u, v);
    }
  }

  std::vector<Eigen::Triplet<double, int>> triplets;
  for (Index i = 0; i < spec.n; ++i) {
    const Index label = ds.labels[static_cast<std::size_t>(i)];
    for (Index w = 0; w < spec.words_per_node; ++w) {
      const Index col = rng.uniform01() < spec.topic_purity
                            ? label * spec.topic_words + static_cast<Index>(rng.below(spec.topic_words))
                            : static_cast<Index>(rng.below(spec.d));
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(col), 1.0);
    }
  }
  ds.features.resize(spec.n, spec.d);
  ds.features.setFromTriplets(triplets.begin(), triplets.end());
  ds.features.makeCompressed();

  IndexList rest;
  for (Index k = 0; k < spec.c; ++k) {
    IndexList members;
    for (Index i = k; i < spec.n; i += spec.c) members.push_back(i);
    shuffle(members, rng);
    ds.train_idx.insert(ds.train_idx.end(), members.begin(), members.begin() + spec.train_per_class);
    rest.insert(rest.end(), members.begin() + spec.train_per_class, members.end());
  }
  std::sort(rest.begin(), rest.end());
  shuffle(rest, rng);
  ds.val_idx.assign(rest.begin(), rest.begin() + spec.n_val);
  ds.test_idx.assign(rest.begin() + spec.n_val, rest.end());
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.val_idx.begin(), ds.val_idx.end());
  std::sort(ds.test_idx.begin(), ds.test_idx.end());
  return ds;
}

}  // namespace pgcn
