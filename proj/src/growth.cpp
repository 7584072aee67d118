#include "pgcn/growth.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pgcn {

const char* to_string(ProgressMetric metric) {
  switch (metric) {
    case ProgressMetric::LabeledAccuracy:
      return "labeled_accuracy";
    case ProgressMetric::ValidationAccuracy:
      return "validation_accuracy";
    case ProgressMetric::NegativeLoss:
      return "negative_loss";
  }
  return "?";
}

ProgressMetric parse_progress_metric(const std::string& text) {
  if (text == "labeled_accuracy") return ProgressMetric::LabeledAccuracy;
  if (text == "validation_accuracy") return ProgressMetric::ValidationAccuracy;
  if (text == "negative_loss") return ProgressMetric::NegativeLoss;
  throw InputError("unknown progress metric '" + text + "'");
}

const char* to_string(Decision decision) {
  switch (decision) {
    case Decision::Keep:
      return "keep";
    case Decision::RollbackBlock:
      return "rollback-block";
    case Decision::RollbackLayer:
      return "rollback-layer";
  }
  return "?";
}

const char* to_string(Scope scope) { return scope == Scope::Block ? "block" : "layer"; }

Decision parse_decision(const std::string& text) {
  if (text == "keep") return Decision::Keep;
  if (text == "rollback-block") return Decision::RollbackBlock;
  if (text == "rollback-layer") return Decision::RollbackLayer;
  throw InputError("unknown decision '" + text + "'");
}

Scope parse_scope(const std::string& text) {
  if (text == "block") return Scope::Block;
  if (text == "layer") return Scope::Layer;
  throw InputError("unknown scope '" + text + "'");
}

Index GrowthConfig::blocks_per_layer() const {
  if (max_blocks_per_layer > 0) return max_blocks_per_layer;
  return std::max<Index>(1, max_layer_width / block_size);
}

void GrowthConfig::validate() const {
  if (block_size < 1) throw InputError("block size must be >= 1");
  if (max_layers < 1) throw InputError("max layers must be >= 1");
  if (max_blocks_per_layer < 0) throw InputError("max blocks per layer must be >= 0");
  if (!std::isfinite(eps_block) || !std::isfinite(eps_layer)) throw InputError("growth thresholds must be finite");
  if (!(lr > 0.0)) throw InputError("learning rate must be positive");
  if (epochs_per_step < 0) throw InputError("epochs per step must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("dropout must lie in [0, 1)");
  if (!(l2_coeff >= 0.0)) throw InputError("L2 coefficient must be non-negative");
  if (init_lo.has_value() != init_hi.has_value()) throw InputError("init bounds must be given together");
  if (init_lo && *init_lo > *init_hi) throw InputError("init lower bound exceeds upper bound");
  RegressionConfig{lambda1, lambda2, 0}.validate();
}

Snapshot snapshot(const TrainingState& state, double metric) { return Snapshot{state, metric}; }

TrainingState restore(const Snapshot& snap) { return snap.state; }

double improvement_rate(double a_new, double a_old) {
  if (!(a_old > 0.0)) return std::numeric_limits<double>::infinity();
  return (a_new - a_old) / a_old;
}

double metric_rate(ProgressMetric metric, double a_new, double a_old) {
  if (metric != ProgressMetric::NegativeLoss) return improvement_rate(a_new, a_old);
  if (!std::isfinite(a_old)) return std::numeric_limits<double>::infinity();
  if (a_old == 0.0) return a_new >= 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return (a_new - a_old) / std::abs(a_old);
}

TrainingState initial_state(const GrowthProblem& problem, const GrowthConfig& cfg) {
  TrainingState state;
  state.model.input_dim = problem.graph.input_dim();
  state.model.num_classes = problem.supervision.num_classes;
  state.model.block_size = cfg.block_size;
  state.model.head = head_for(cfg.loss);
  return state;
}

namespace {

RegressionConfig regression_config(const GrowthConfig& cfg, const GrowthProblem& problem) {
  return RegressionConfig{cfg.lambda1, cfg.lambda2, problem.num_nodes()};
}

}  // namespace

DenseMat closed_form_output(const PgcnModel& model, const GrowthProblem& problem, const GrowthConfig& cfg) {
  const DenseMat h = last_hidden(model, problem.graph);
  const auto& sup = problem.supervision;
  return solve_output_weights(h, sup.train_idx, sup.train_targets, problem.laplacian,
                              regression_config(cfg, problem));
}

double regularized_loss(const PgcnModel& model, const GrowthProblem& problem, const GrowthConfig& cfg) {
  const DenseMat h = last_hidden(model, problem.graph);
  const auto& sup = problem.supervision;
  const RegressionConfig rc = regression_config(cfg, problem);
  const DenseMat o = solve_output_weights(h, sup.train_idx, sup.train_targets, problem.laplacian, rc);
  return objective_j2(h, o, sup.train_targets, sup.train_idx, problem.laplacian, rc);
}

double measure_progress(const PgcnModel& model, const GrowthProblem& problem, const GrowthConfig& cfg) {
  const DenseMat y = predict(model, problem.graph);
  const auto& sup = problem.supervision;
  switch (cfg.progress_metric) {
    case ProgressMetric::LabeledAccuracy:
      return accuracy(y, sup.labels, sup.train_idx);
    case ProgressMetric::ValidationAccuracy:
      return accuracy(y, sup.labels, sup.val_idx);
    case ProgressMetric::NegativeLoss:
      return -loss(y, sup.train_targets, sup.train_idx, cfg.loss, cfg.l2_coeff, model);
  }
  throw std::logic_error("unhandled progress metric");
}

void add_block(TrainingState& state, const GrowthProblem& problem, const GrowthConfig& cfg, Index layer_idx,
               SeededRng& rng) {
  PgcnModel& model = state.model;
  if (model.depth() == 0 || layer_idx != model.depth() - 1) {
    throw std::logic_error("add_block: only the last layer can grow");
  }
  const Index fan = model.fan_in(layer_idx);
  const double lim = glorot_limit(fan, cfg.block_size);
  const double lo = cfg.init_lo.value_or(-lim);
  const double hi = cfg.init_hi.value_or(lim);
  model.layers[static_cast<std::size_t>(layer_idx)].push_back(uniform_init(fan, cfg.block_size, lo, hi, rng));
  model.output = closed_form_output(model, problem, cfg);
  state.adam.reset_output();
  state.adam.sync(model);
}

void add_layer(TrainingState& state, const GrowthProblem& problem, const GrowthConfig& cfg, SeededRng& rng) {
  if (state.model.depth() >= cfg.max_layers) {
    throw InputError("add_layer: model already has the maximum number of layers");
  }
  state.model.layers.emplace_back();
  add_block(state, problem, cfg, state.model.depth() - 1, rng);
}

namespace {

FinetuneOptions finetune_options(const GrowthConfig& cfg) {
  FinetuneOptions opts;
  opts.epochs = cfg.epochs_per_step;
  opts.lr = cfg.lr;
  opts.dropout = cfg.dropout;
  opts.loss = cfg.loss;
  opts.l2_coeff = cfg.l2_coeff;
  return opts;
}

}  // namespace

double grow_layer(TrainingState& state, const GrowthProblem& problem, const GrowthConfig& cfg, Index layer_idx,
                  double incoming_metric, SeededRng& rng, GrowthTrace& trace) {
  const Index max_blocks = cfg.blocks_per_layer();
  double metric_old = incoming_metric;
  for (Index b = static_cast<Index>(state.model.layers.at(static_cast<std::size_t>(layer_idx)).size());
       b < max_blocks; ++b) {
    const Snapshot before = snapshot(state, metric_old);
    const bool first_block = state.model.layers[static_cast<std::size_t>(layer_idx)].empty();
    add_block(state, problem, cfg, layer_idx, rng);

    TraceRecord rec;
    rec.scope = Scope::Block;
    rec.layer = layer_idx + 1;
    rec.block = b + 1;
    rec.init_regularized_loss = regularized_loss(state.model, problem, cfg);

    finetune(state.model, state.adam, problem.graph, problem.supervision, finetune_options(cfg), rng);

    const double metric_new = measure_progress(state.model, problem, cfg);
    rec.accuracy_before = metric_old;
    rec.accuracy_after = metric_new;
    rec.rate = metric_rate(cfg.progress_metric, metric_new, metric_old);
    rec.regularized_loss = regularized_loss(state.model, problem, cfg);
    rec.parameter_count = count_parameters(state.model);
    rec.widths = state.model.widths();

    if (rec.rate < cfg.eps_block) {
      if (first_block) {
        // A layer's first block stays; the depth test decides whether the layer survives.
        rec.decision = Decision::Keep;
        trace.push_back(rec);
        return metric_new;
      }
      rec.decision = Decision::RollbackBlock;
      trace.push_back(rec);
      state = restore(before);
      return metric_old;
    }
    rec.decision = Decision::Keep;
    trace.push_back(rec);
    metric_old = metric_new;
  }
  return metric_old;
}

GrowthResult run_pgcn(const GrowthProblem& problem, const GrowthConfig& cfg) {
  cfg.validate();
  SeededRng rng(cfg.seed);
  GrowthResult result;
  result.state = initial_state(problem, cfg);
  double layer_metric = cfg.progress_metric == ProgressMetric::NegativeLoss
                            ? -std::numeric_limits<double>::infinity()
                            : 0.0;
  for (Index l = 0; l < cfg.max_layers; ++l) {
    const Snapshot before = snapshot(result.state, layer_metric);
    result.state.model.layers.emplace_back();
    const double metric_new = grow_layer(result.state, problem, cfg, l, layer_metric, rng, result.trace);

    TraceRecord rec;
    rec.scope = Scope::Layer;
    rec.layer = l + 1;
    rec.block = static_cast<Index>(result.state.model.layers.back().size());
    rec.accuracy_before = layer_metric;
    rec.accuracy_after = metric_new;
    rec.rate = metric_rate(cfg.progress_metric, metric_new, layer_metric);
    rec.regularized_loss = regularized_loss(result.state.model, problem, cfg);
    rec.init_regularized_loss = rec.regularized_loss;
    rec.parameter_count = count_parameters(result.state.model);
    rec.widths = result.state.model.widths();
    if (rec.rate < cfg.eps_layer) {
      rec.decision = Decision::RollbackLayer;
      result.trace.push_back(rec);
      result.state = restore(before);
      break;
    }
    rec.decision = Decision::Keep;
    result.trace.push_back(rec);
    layer_metric = metric_new;
  }
  result.metric = layer_metric;
  return result;
}

}  // namespace pgcn
