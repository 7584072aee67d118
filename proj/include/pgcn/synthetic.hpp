#pragma once

#include <cstdint>

#include "pgcn/dataset.hpp"

namespace pgcn {

/// Planted-partition graph with bag-of-words features. Each class owns a block
/// of `topic_words` feature columns; a node draws `words_per_node` words, each
/// from its class topic with probability `topic_purity` and uniformly otherwise.
struct SbmSpec {
  Index n = 100;
  Index c = 3;
  double p_in = 0.1;
  double p_out = 0.01;
  Index d = 30;
  Index topic_words = 10;
  Index words_per_node = 5;
  double topic_purity = 0.6;
  Index train_per_class = 5;
  Index n_val = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Labels are assigned round-robin so every class has floor(n/c) or ceil(n/c)
/// members. The split takes `train_per_class` random nodes per class, then
/// `n_val` validation nodes, and the remainder as test. Features are raw counts.
GraphDataset make_sbm_dataset(const SbmSpec& spec);

}  // namespace pgcn
