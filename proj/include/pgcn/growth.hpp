#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pgcn/closed_form.hpp"
#include "pgcn/model.hpp"

namespace pgcn {

enum class ProgressMetric { LabeledAccuracy, ValidationAccuracy, NegativeLoss };

const char* to_string(ProgressMetric metric);
ProgressMetric parse_progress_metric(const std::string& text);

/// Hyperparameters of progressive growth. Defaults: Adam at lr 0.01 for 300
/// epochs per step, L2 5e-4, thresholds 1e-4, at most 10 layers of at most
/// 100 neurons.
struct GrowthConfig {
  Index block_size = 10;
  double eps_block = 1e-4;
  double eps_layer = 1e-4;
  Index max_layers = 10;
  Index max_blocks_per_layer = 0;  // 0: floor(max_layer_width / block_size)
  Index max_layer_width = 100;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lr = 0.01;
  int epochs_per_step = 300;
  LossKind loss = LossKind::CrossEntropy;
  double dropout = 0.5;
  double l2_coeff = 5e-4;
  std::optional<double> init_lo;  // unset: -sqrt(6 / (fan_in + B))
  std::optional<double> init_hi;  // unset: +sqrt(6 / (fan_in + B))
  std::uint64_t seed = 0;
  ProgressMetric progress_metric = ProgressMetric::LabeledAccuracy;

  Index blocks_per_layer() const;
  void validate() const;
};

/// Everything growth reads from the dataset: Â and X, L̃, and the labels.
struct GrowthProblem {
  GraphContext graph;
  SparseMat laplacian;
  Supervision supervision;

  Index num_nodes() const { return graph.num_nodes(); }
};

struct TrainingState {
  PgcnModel model;
  AdamState adam;
};

/// Deep copy of model, Adam moments and the metric recorded with them.
struct Snapshot {
  TrainingState state;
  double metric = 0.0;
};

Snapshot snapshot(const TrainingState& state, double metric);
TrainingState restore(const Snapshot& snap);

enum class Decision { Keep, RollbackBlock, RollbackLayer };
enum class Scope { Block, Layer };

const char* to_string(Decision decision);
const char* to_string(Scope scope);
Decision parse_decision(const std::string& text);
Scope parse_scope(const std::string& text);

/// One growth step. Block-scope records describe one added block; layer-scope
/// records describe the depth test after a layer stops widening.
struct TraceRecord {
  Scope scope = Scope::Block;
  Index layer = 0;  // 1-based
  Index block = 0;  // 1-based block index for block scope; block count for layer scope
  double accuracy_before = 0.0;  // progress metric before the change
  double accuracy_after = 0.0;   // progress metric after finetuning
  double rate = 0.0;
  Decision decision = Decision::Keep;
  /// min_O J2 on the finetuned representation of the growing layer.
  double regularized_loss = 0.0;
  /// J2 at the closed-form O right after the block was added, before finetuning.
  double init_regularized_loss = 0.0;
  Index parameter_count = 0;
  std::vector<Index> widths;  // topology that was evaluated
};

using GrowthTrace = std::vector<TraceRecord>;

/// (a_new − a_old) / a_old; +inf when a_old <= 0.
double improvement_rate(double a_new, double a_old);

/// Rate for a progress metric. Loss-based metrics are negative, so the
/// relative change is taken against |old|.
double metric_rate(ProgressMetric metric, double a_new, double a_old);

/// Empty model shaped for the problem (depth 0).
TrainingState initial_state(const GrowthProblem& problem, const GrowthConfig& cfg);

/// Appends one block of B neurons to the last layer (U(α, β) weights) and
/// re-solves O in closed form on the widened representation.
void add_block(TrainingState& state, const GrowthProblem& problem, const GrowthConfig& cfg, Index layer_idx,
               SeededRng& rng);

/// Opens a new layer fed by the current last layer and adds its first block.
void add_layer(TrainingState& state, const GrowthProblem& problem, const GrowthConfig& cfg, SeededRng& rng);

/// Closed-form O for the model's current last-layer representation.
DenseMat closed_form_output(const PgcnModel& model, const GrowthProblem& problem, const GrowthConfig& cfg);

/// min_O J2 evaluated on the model's current last-layer representation.
double regularized_loss(const PgcnModel& model, const GrowthProblem& problem, const GrowthConfig& cfg);

/// Progress metric in eval mode.
double measure_progress(const PgcnModel& model, const GrowthProblem& problem, const GrowthConfig& cfg);

/// Widens layer layer_idx (0-based, must be the last layer) block by block until
/// the rate drops below eps_block or the block cap binds. Returns the metric of
/// the kept topology.
double grow_layer(TrainingState& state, const GrowthProblem& problem, const GrowthConfig& cfg, Index layer_idx,
                  double incoming_metric, SeededRng& rng, GrowthTrace& trace);

struct GrowthResult {
  TrainingState state;
  GrowthTrace trace;
  double metric = 0.0;
};

/// Progressive growth in width and depth; the returned model is the last
/// topology that passed both rate tests.
GrowthResult run_pgcn(const GrowthProblem& problem, const GrowthConfig& cfg);

}  // namespace pgcn
