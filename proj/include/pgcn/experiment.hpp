#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pgcn/dataset.hpp"
#include "pgcn/growth.hpp"
#include "pgcn/report.hpp"

namespace pgcn {

/// Â, L̃ and supervision for a dataset. Features are row-normalized first when
/// `normalize` is set.
GrowthProblem prepare_problem(const GraphDataset& ds, bool normalize = true);
GrowthProblem prepare_problem(const GraphDataset& ds, const DenseMat& features);

/// Hyperparameter grid searched by `train --grid`.
struct HyperGrid {
  std::vector<double> dropout{0.1, 0.3, 0.5};
  std::vector<double> lambda1{0.1, 1.0, 10.0};
  std::vector<Index> block_size{1, 5, 10, 15, 20};
};

struct TrainOptions {
  GrowthConfig growth;
  int seeds = 20;
  std::uint64_t seed = 0;  // runs use seed, seed + 1, ...
  bool grid = false;
  HyperGrid hyper;
  unsigned threads = 0;  // 0: PGCN_THREADS or hardware concurrency
};

struct BaselineOptions {
  Index hidden = 16;
  int epochs = 200;
  double lr = 0.01;
  double dropout = 0.5;
  double l2_coeff = 5e-4;
  int patience = 10;
  LossKind loss = LossKind::CrossEntropy;
  int seeds = 1;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate() const;
};

struct SweepOptions {
  std::vector<Index> d_primes{50, 250};
  int runs = 3;
  double label_fraction = 0.5;
  std::uint64_t seed = 0;             // split and run seeds
  std::uint64_t projection_seed = 0;  // shared by every D'
  GrowthConfig growth;
  BaselineOptions baseline;
  unsigned threads = 0;
};

/// Worker count: explicit value, else PGCN_THREADS, else hardware concurrency.
unsigned resolve_threads(unsigned requested);

/// Runs job(0..count-1) on up to `threads` workers. Results are written by
/// index, so the outcome does not depend on scheduling. The first exception
/// thrown by any job is rethrown after all workers finish.
void run_jobs(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job);

/// Train/val/test accuracy of a finished model in eval mode.
RunResult evaluate_run(const PgcnModel& model, const GrowthProblem& problem, const GraphDataset& ds);

/// Progressive growth over seeds (and the grid when enabled); keeps the run with
/// the best validation accuracy, ties to the earliest (grid point, seed).
RunReport cmd_train(const GraphDataset& ds, const TrainOptions& opts);
RunReport cmd_train(const GraphDataset& ds, const GrowthProblem& problem, const TrainOptions& opts);

/// Fixed [D, hidden, C] GCN with early stopping on validation loss.
RunReport cmd_baseline(const GraphDataset& ds, const BaselineOptions& opts);
RunReport cmd_baseline(const GraphDataset& ds, const GrowthProblem& problem, const BaselineOptions& opts);

/// Projects row-normalized features to each D', relabels with a stratified
/// fraction split, and reports best-of-runs PGCN and GCN per D'.
SweepReport cmd_sweep_dim(const GraphDataset& ds, const SweepOptions& opts);

nlohmann::json config_json(const GrowthConfig& cfg);
nlohmann::json config_json(const BaselineOptions& opts);

}  // namespace pgcn
