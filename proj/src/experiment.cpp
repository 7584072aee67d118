#include "pgcn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace pgcn {

using json = nlohmann::json;

namespace {

GrowthProblem make_problem(const GraphDataset& ds, GraphContext graph, SparseMat laplacian) {
  return GrowthProblem{std::move(graph), std::move(laplacian),
                       make_supervision(ds.labels, ds.train_idx, ds.val_idx, ds.c)};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void check_finite(const RunResult& run) {
  if (!std::isfinite(run.train_accuracy) || !std::isfinite(run.val_accuracy) || !std::isfinite(run.test_accuracy)) {
    throw SingularityError("non-finite accuracy in seed " + std::to_string(run.seed));
  }
}

double accuracy_or_zero(const DenseMat& y, const std::vector<int>& labels, const IndexList& idx) {
  return idx.empty() ? 0.0 : accuracy(y, labels, idx);
}

// Picks the best validation run (ties to the lowest index) and fills mean/std
// over the runs sharing its grid point.
void select_best(RunReport& report) {
  if (report.runs.empty()) throw std::logic_error("select_best: no runs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < report.runs.size(); ++i) {
    if (report.runs[i].val_accuracy > report.runs[best].val_accuracy) best = i;
  }
  report.selected = best;
  const std::size_t g = report.runs[best].grid_point;
  double sum = 0.0;
  double sq = 0.0;
  int count = 0;
  for (const auto& run : report.runs) {
    if (run.grid_point != g) continue;
    sum += run.test_accuracy;
    sq += run.test_accuracy * run.test_accuracy;
    ++count;
  }
  report.test_accuracy_mean = sum / count;
  report.test_accuracy_std = std::sqrt(std::max(0.0, sq / count - report.test_accuracy_mean * report.test_accuracy_mean));
}

}  // namespace

GrowthProblem prepare_problem(const GraphDataset& ds, bool normalize) {
  const SparseMat a = build_adjacency(ds.edges);
  GraphContext graph(normalize_adjacency(a), normalize ? row_normalize(ds.features) : ds.features);
  return make_problem(ds, std::move(graph), normalized_laplacian(a));
}

GrowthProblem prepare_problem(const GraphDataset& ds, const DenseMat& features) {
  require_shape(features.rows() == ds.n, "prepare_problem: one feature row per node");
  const SparseMat a = build_adjacency(ds.edges);
  GraphContext graph(normalize_adjacency(a), features);
  return make_problem(ds, std::move(graph), normalized_laplacian(a));
}

void BaselineOptions::validate() const {
  if (hidden < 1) throw InputError("baseline: hidden width must be >= 1");
  if (epochs < 0) throw InputError("baseline: epochs must be non-negative");
  if (!(lr > 0.0)) throw InputError("baseline: learning rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("baseline: dropout must lie in [0, 1)");
  if (!(l2_coeff >= 0.0)) throw InputError("baseline: L2 coefficient must be non-negative");
  if (patience < 0) throw InputError("baseline: patience must be non-negative");
  if (seeds < 1) throw InputError("baseline: seeds must be >= 1");
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PGCN_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void run_jobs(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

RunResult evaluate_run(const PgcnModel& model, const GrowthProblem& problem, const GraphDataset& ds) {
  RunResult run;
  run.widths = model.widths();
  run.parameter_count = count_parameters(model);
  run.weights_digest = weights_digest(model);
  if (model.depth() == 0) return run;
  const DenseMat y = predict(model, problem.graph);
  run.train_accuracy = accuracy_or_zero(y, ds.labels, ds.train_idx);
  run.val_accuracy = accuracy_or_zero(y, ds.labels, ds.val_idx);
  run.test_accuracy = accuracy_or_zero(y, ds.labels, ds.test_idx);
  return run;
}

json config_json(const GrowthConfig& cfg) {
  json j{{"block_size", cfg.block_size},
         {"eps_block", cfg.eps_block},
         {"eps_layer", cfg.eps_layer},
         {"max_layers", cfg.max_layers},
         {"max_blocks_per_layer", cfg.blocks_per_layer()},
         {"lambda1", cfg.lambda1},
         {"lambda2", cfg.lambda2},
         {"lr", cfg.lr},
         {"epochs_per_step", cfg.epochs_per_step},
         {"loss", to_string(cfg.loss)},
         {"dropout", cfg.dropout},
         {"l2", cfg.l2_coeff},
         {"progress_metric", to_string(cfg.progress_metric)}};
  if (cfg.init_lo) {
    j["init_lo"] = *cfg.init_lo;
    j["init_hi"] = *cfg.init_hi;
  }
  return j;
}

json config_json(const BaselineOptions& opts) {
  return json{{"hidden", opts.hidden},     {"epochs", opts.epochs}, {"lr", opts.lr},
              {"dropout", opts.dropout},   {"l2", opts.l2_coeff},   {"patience", opts.patience},
              {"loss", to_string(opts.loss)}, {"seeds", opts.seeds},   {"seed", opts.seed}};
}

RunReport cmd_train(const GraphDataset& ds, const TrainOptions& opts) {
  return cmd_train(ds, prepare_problem(ds), opts);
}

RunReport cmd_train(const GraphDataset& ds, const GrowthProblem& problem, const TrainOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (opts.seeds < 1) throw InputError("train: seeds must be >= 1");
  opts.growth.validate();

  std::vector<GrowthConfig> points;
  if (opts.grid) {
    for (double p : opts.hyper.dropout) {
      for (double l1 : opts.hyper.lambda1) {
        for (Index b : opts.hyper.block_size) {
          GrowthConfig cfg = opts.growth;
          cfg.dropout = p;
          cfg.lambda1 = l1;
          cfg.block_size = b;
          cfg.validate();
          points.push_back(cfg);
        }
      }
    }
    if (points.empty()) throw InputError("train: empty hyperparameter grid");
  } else {
    points.push_back(opts.growth);
  }

  RunReport report;
  report.command = "train";
  report.dataset = ds.name;
  report.config = config_json(opts.growth);
  report.config["seeds"] = opts.seeds;
  report.config["seed"] = opts.seed;
  report.config["grid"] = opts.grid;
  for (const auto& cfg : points) {
    report.grid.push_back(json{{"dropout", cfg.dropout}, {"lambda1", cfg.lambda1}, {"block_size", cfg.block_size}});
  }

  const auto k = static_cast<std::size_t>(opts.seeds);
  report.runs.resize(points.size() * k);
  run_jobs(report.runs.size(), resolve_threads(opts.threads), [&](std::size_t i) {
    GrowthConfig cfg = points[i / k];
    cfg.seed = opts.seed + i % k;
    const GrowthResult result = run_pgcn(problem, cfg);
    RunResult run = evaluate_run(result.state.model, problem, ds);
    run.grid_point = i / k;
    run.seed = cfg.seed;
    run.trace = result.trace;
    const auto steps = std::count_if(result.trace.begin(), result.trace.end(),
                                     [](const TraceRecord& r) { return r.scope == Scope::Block; });
    run.epochs_run = static_cast<int>(steps) * cfg.epochs_per_step;
    check_finite(run);
    report.runs[i] = std::move(run);
  });
  select_best(report);
  report.wall_clock_seconds = seconds_since(start);
  return report;
}

RunReport cmd_baseline(const GraphDataset& ds, const BaselineOptions& opts) {
  return cmd_baseline(ds, prepare_problem(ds), opts);
}

RunReport cmd_baseline(const GraphDataset& ds, const GrowthProblem& problem, const BaselineOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  opts.validate();
  RunReport report;
  report.command = "baseline";
  report.dataset = ds.name;
  report.config = config_json(opts);
  report.grid.push_back(json{{"dropout", opts.dropout}, {"hidden", opts.hidden}});

  FinetuneOptions ft;
  ft.epochs = opts.epochs;
  ft.lr = opts.lr;
  ft.dropout = opts.dropout;
  ft.loss = opts.loss;
  ft.l2_coeff = opts.l2_coeff;
  ft.early_stopping_patience = opts.patience;

  report.runs.resize(static_cast<std::size_t>(opts.seeds));
  run_jobs(report.runs.size(), resolve_threads(opts.threads), [&](std::size_t i) {
    const std::uint64_t seed = opts.seed + i;
    SeededRng rng(seed);
    PgcnModel model = make_fixed_model(problem.graph.input_dim(), {opts.hidden}, ds.c, head_for(opts.loss), rng);
    AdamState adam;
    const FinetuneTrace trace = finetune(model, adam, problem.graph, problem.supervision, ft, rng);
    RunResult run = evaluate_run(model, problem, ds);
    run.seed = seed;
    run.epochs_run = trace.epochs_run;
    check_finite(run);
    report.runs[i] = std::move(run);
  });
  select_best(report);
  report.wall_clock_seconds = seconds_since(start);
  return report;
}

SweepReport cmd_sweep_dim(const GraphDataset& ds, const SweepOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (opts.runs < 1) throw InputError("sweep-dim: runs must be >= 1");
  if (opts.d_primes.empty()) throw InputError("sweep-dim: empty D' grid");
  for (Index dp : opts.d_primes) {
    if (dp < 1 || dp > ds.d) throw InputError("sweep-dim: D' = " + std::to_string(dp) + " outside [1, D]");
  }
  opts.growth.validate();
  opts.baseline.validate();

  const Split split = label_fraction_split(ds.labels, ds.c, opts.label_fraction, opts.seed);
  const GraphDataset relabeled = with_split(ds, split);
  const SparseMat normalized = row_normalize(ds.features);

  SweepReport report;
  report.dataset = ds.name;
  report.config = json{{"d_primes", opts.d_primes},
                       {"runs", opts.runs},
                       {"label_fraction", opts.label_fraction},
                       {"seed", opts.seed},
                       {"projection_seed", opts.projection_seed},
                       {"pgcn", config_json(opts.growth)},
                       {"gcn", config_json(opts.baseline)},
                       {"n_train", split.train.size()},
                       {"n_val", split.val.size()},
                       {"n_test", split.test.size()}};

  for (Index dp : opts.d_primes) {
    const DenseMat projected = random_projection(normalized, dp, opts.projection_seed);
    const GrowthProblem problem = prepare_problem(relabeled, projected);

    TrainOptions topts;
    topts.growth = opts.growth;
    topts.seeds = opts.runs;
    topts.seed = opts.seed;
    topts.threads = opts.threads;
    const RunReport pgcn = cmd_train(relabeled, problem, topts);

    BaselineOptions bopts = opts.baseline;
    bopts.seeds = opts.runs;
    bopts.seed = opts.seed;
    bopts.threads = opts.threads;
    const RunReport gcn = cmd_baseline(relabeled, problem, bopts);

    for (const auto* r : {&pgcn, &gcn}) {
      SweepRow row;
      row.d_prime = dp;
      row.method = r == &pgcn ? "pgcn" : "gcn";
      row.test_acc = r->best().test_accuracy;
      row.val_acc = r->best().val_accuracy;
      row.params = r->best().parameter_count;
      row.seed = r->best().seed;
      row.test_acc_mean = r->test_accuracy_mean;
      report.rows.push_back(row);
    }
  }
  report.wall_clock_seconds = seconds_since(start);
  return report;
}

}  // namespace pgcn
