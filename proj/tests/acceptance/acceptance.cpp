// Acceptance checks: one PASS/FAIL/SKIP line per criterion.
//   acceptance              data-independent criteria
//   acceptance --datasets   criteria that need citation bundles under
//                           $PGCN_DATA_DIR/{cora,citeseer,pubmed}; exits 77
//                           (skipped) when they are absent.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "pgcn/experiment.hpp"

namespace {

using namespace pgcn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const Outcome& o) {
  std::printf("%s  %-34s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void skip(const std::string& name, const std::string& why) {
  std::printf("SKIP  %-34s %s\n", name.c_str(), why.c_str());
  std::fflush(stdout);
}

double seconds(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

Outcome closed_form_correctness() {
  const auto start = Clock::now();
  SeededRng rng(2024);
  const double lambda1s[] = {0.1, 1.0, 10.0};
  double worst_gd = 0.0;
  double worst_fd = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const Index n = 5 + static_cast<Index>(rng.below(26));
    const Index d = 1 + static_cast<Index>(rng.below(10));
    const Index c = 2 + static_cast<Index>(rng.below(3));
    const double lambda1 = lambda1s[inst % 3];
    const double lambda2 = (inst / 3) % 2 == 0 ? 0.0 : 1.0;
    const EdgeList g = oracle::random_graph(n, 0.2, rng);
    DenseMat h(n, d);
    for (Index i = 0; i < h.size(); ++i) h.data()[i] = std::max(0.0, rng.normal());
    IndexList idx;
    for (Index i = 0; i < n; ++i) {
      if (rng.uniform01() < 0.4 || i == 0) idx.push_back(i);
    }
    DenseMat t = DenseMat::Zero(static_cast<Index>(idx.size()), c);
    for (Index k = 0; k < t.rows(); ++k) t(k, static_cast<Index>(rng.below(c))) = 1.0;

    const SparseMat lap = normalized_laplacian(build_adjacency(g));
    const RegressionConfig cfg{lambda1, lambda2, n};
    const DenseMat o = solve_output_weights(h, idx, t, lap, cfg);
    const DenseMat lap_ref = oracle::laplacian(oracle::dense_adjacency(g));
    const DenseMat o_gd = oracle::j2_gradient_descent(h, t, idx, lap_ref, lambda1, lambda2);
    worst_gd = std::max(worst_gd, (o - o_gd).cwiseAbs().maxCoeff());
    worst_fd = std::max(worst_fd, oracle::j2_fd_gradient_inf(h, o, t, idx, lap_ref, lambda1, lambda2));
  }
  const double elapsed = seconds(start);
  Outcome out;
  out.pass = worst_gd <= 1e-6 && worst_fd <= 1e-8 && elapsed < 10.0;
  out.detail = "max|O-O_gd|=" + fmt("%.2e", worst_gd) + " max|grad_fd|=" + fmt("%.2e", worst_fd) +
               " time=" + fmt("%.2fs", elapsed);
  return out;
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  SeededRng rng(77);
  double worst = 0.0;
  int cases = 0;
  for (int gi = 0; gi < 20; ++gi) {
    const Index n = 6 + static_cast<Index>(rng.below(3));
    const Index d = 3 + static_cast<Index>(rng.below(3));
    const Index c = 2 + static_cast<Index>(rng.below(2));
    const EdgeList g = oracle::random_graph(n, 0.3, rng);
    DenseMat x(n, d);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform01();
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) l = static_cast<int>(rng.below(c));
    IndexList idx;
    for (Index i = 0; i < n; i += 2) idx.push_back(i);
    const DenseMat t = one_hot_targets(labels, idx, c);

    const SparseMat a_hat = normalize_adjacency(build_adjacency(g));
    const GraphContext ctx(a_hat, x);
    const DenseMat a_ref = oracle::normalized_adjacency(oracle::dense_adjacency(g));
    const Index depth = 1 + gi % 3;

    for (LossKind kind : {LossKind::CrossEntropy, LossKind::MeanSquared}) {
      PgcnModel model;
      model.input_dim = d;
      model.num_classes = c;
      model.block_size = 2;
      model.head = head_for(kind);
      Index fan = d;
      for (Index l = 0; l < depth; ++l) {
        const Index blocks = 1 + static_cast<Index>(rng.below(2));
        model.layers.emplace_back();
        for (Index b = 0; b < blocks; ++b) model.layers.back().push_back(uniform_init(fan, 2, -1.0, 1.0, rng));
        fan = model.layer_width(l);
      }
      model.output = uniform_init(fan, c, -1.0, 1.0, rng);

      const double dropout = gi % 2 == 0 ? 0.0 : 0.3;
      const double l2 = 5e-4;
      SeededRng drop_rng(1000 + gi);
      const ForwardResult fr = forward(model, ctx, Mode::Train, dropout, drop_rng);
      const ModelGradients grads = backward(fr.cache, model, ctx, t, idx, kind, l2);
      std::vector<DenseMat> masks;
      for (const auto& lc : fr.cache.layers) masks.push_back(lc.mask);

      std::vector<const DenseMat*> analytic;
      for (const auto& layer : grads.layers) {
        for (const auto& gw : layer) analytic.push_back(&gw);
      }
      analytic.push_back(&grads.output);

      const auto params = oracle::parameters(model);
      const double h = 1e-5;
      for (std::size_t p = 0; p < params.size(); ++p) {
        DenseMat& w = *params[p];
        for (Index e = 0; e < w.size(); ++e) {
          const double keep = w.data()[e];
          w.data()[e] = keep + h;
          const double up = oracle::loss(model, oracle::forward(model, a_ref, x, masks), t, idx, kind, l2);
          w.data()[e] = keep - h;
          const double down = oracle::loss(model, oracle::forward(model, a_ref, x, masks), t, idx, kind, l2);
          w.data()[e] = keep;
          const double fd = (up - down) / (2.0 * h);
          worst = std::max(worst, oracle::relative_error(fd, analytic[p]->data()[e], 1e-5));
        }
      }
      ++cases;
    }
  }
  const double elapsed = seconds(start);
  Outcome out;
  out.pass = worst <= 1e-4 && elapsed < 30.0;
  out.detail = std::to_string(cases) + " cases, max rel err=" + fmt("%.2e", worst) + " time=" + fmt("%.2fs", elapsed);
  return out;
}

Outcome laplacian_identities() {
  SeededRng rng(5);
  int graphs = 0;
  bool exact = true;
  double lo = 1e300;
  double hi = -1e300;
  for (Index n = 1; n <= 20; ++n) {
    for (double p : {0.0, 0.1, 0.3, 0.6, 1.0}) {
      for (int rep = 0; rep < 3; ++rep) {
        EdgeList g{n, {}};
        for (Index u = 0; u < n; ++u) {
          for (Index v = u + 1; v < n; ++v) {
            if (rng.uniform01() < p) g.edges.emplace_back(u, v);
          }
        }
        const SparseMat a = build_adjacency(g);
        const DenseMat sum = to_dense(SparseMat(normalize_adjacency(a) + normalized_laplacian(a)));
        if (sum != DenseMat::Identity(n, n)) exact = false;
        const Eigen::MatrixXd lap = to_dense(normalized_laplacian(a));
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(lap).eigenvalues();
        lo = std::min(lo, ev.minCoeff());
        hi = std::max(hi, ev.maxCoeff());
        ++graphs;
      }
    }
  }
  Outcome out;
  out.pass = exact && lo >= -1e-9 && hi <= 2.0 + 1e-9;
  out.detail = std::to_string(graphs) + " graphs, exact=" + (exact ? "yes" : "no") + " eig in [" + fmt("%.3e", lo) +
               ", " + fmt("%.6f", hi) + "]";
  return out;
}

// E_k (min_O J2 after finetuning) along the blocks that make up each layer
// must not rise by more than slack·E_1. Rolled-back candidates are not part of
// the layer's block sequence; their rise is tracked separately for the report.
struct MonotonicityCheck {
  double worst_kept = 0.0;       // max (E_k - E_{k-1}) / E_1 over kept blocks
  double worst_candidate = 0.0;  // same, including rolled-back candidates
  int sequences = 0;
  int steps = 0;

  void add(const GrowthTrace& trace) {
    std::map<Index, double> first;
    std::map<Index, double> kept;
    for (const auto& r : trace) {
      if (r.scope != Scope::Block) continue;
      ++steps;
      if (!kept.count(r.layer)) {
        first[r.layer] = r.regularized_loss;
        kept[r.layer] = r.regularized_loss;
        ++sequences;
        continue;
      }
      const double rise = (r.regularized_loss - kept[r.layer]) / first[r.layer];
      worst_candidate = std::max(worst_candidate, rise);
      if (r.decision == Decision::Keep) {
        worst_kept = std::max(worst_kept, rise);
        kept[r.layer] = r.regularized_loss;
      }
    }
  }

  std::string detail() const {
    return std::to_string(sequences) + " layer sequences, " + std::to_string(steps) +
           " block steps, max rise kept=" + fmt("%.2e", worst_kept) +
           " (incl. rolled-back candidates " + fmt("%.2e", worst_candidate) + ")";
  }
};

Outcome monotonicity_sbm() {
  const auto start = Clock::now();
  MonotonicityCheck check;
  int runs = 0;
  for (int i = 0; i < 24; ++i) {
    SbmSpec spec;
    spec.n = 40 + (i * 37) % 161;
    spec.c = 2 + i % 4;
    spec.p_in = 8.0 / static_cast<double>(spec.n);
    spec.p_out = 1.5 / static_cast<double>(spec.n);
    spec.d = 60;
    spec.topic_words = 8;
    spec.topic_purity = 0.3;
    spec.train_per_class = 3;
    spec.n_val = 10;
    spec.seed = 500 + static_cast<std::uint64_t>(i);
    const GraphDataset ds = make_sbm_dataset(spec);
    const GrowthProblem problem = prepare_problem(ds);
    for (LossKind kind : {LossKind::CrossEntropy, LossKind::MeanSquared}) {
      GrowthConfig cfg;
      cfg.loss = kind;
      cfg.block_size = 1 + (i % 4) * 3;
      cfg.seed = static_cast<std::uint64_t>(i);
      check.add(run_pgcn(problem, cfg).trace);
      ++runs;
    }
  }
  Outcome out;
  out.pass = check.worst_kept <= 1e-3;
  out.detail = std::to_string(runs) + " runs, " + check.detail() + " time=" + fmt("%.1fs", seconds(start));
  return out;
}

PgcnModel topology(Index d, const std::vector<Index>& hidden, Index c) {
  SeededRng rng(0);
  return make_fixed_model(d, hidden, c, Head::Softmax, rng);
}

Outcome parameter_arithmetic() {
  const Index citeseer = count_parameters(topology(3703, {15, 20}, 6));
  const Index cora = count_parameters(topology(1433, {10, 20}, 7));
  const Index pubmed = count_parameters(topology(500, {10}, 3));
  const Index baseline = count_parameters(topology(1433, {16}, 7));
  Outcome out;
  out.pass = citeseer == 55965 && cora == 14670 && pubmed == 5030 && baseline == 23040;
  out.detail = std::to_string(citeseer) + " / " + std::to_string(cora) + " / " + std::to_string(pubmed) + " / " +
               std::to_string(baseline);
  return out;
}

Outcome projection_prefix() {
  SeededRng rng(9);
  int triples = 0;
  bool bitwise = true;
  double scaled_gap = 0.0;
  for (int rep = 0; rep < 12; ++rep) {
    const Index n = 20 + static_cast<Index>(rng.below(30));
    const Index d = 10 + static_cast<Index>(rng.below(60));
    std::vector<Eigen::Triplet<double, int>> trip;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) {
        if (rng.uniform01() < 0.2) trip.emplace_back(static_cast<int>(i), static_cast<int>(j), rng.uniform01());
      }
    }
    SparseMat x(n, d);
    x.setFromTriplets(trip.begin(), trip.end());
    const std::uint64_t seed = rng.next_u64();
    const Index d2 = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(d)));
    const Index d1 = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(d2)));
    const DenseMat p1 = sketch_product(x, d1, seed);
    const DenseMat p2 = sketch_product(x, d2, seed);
    if (std::memcmp(DenseMat(p2.leftCols(d1)).data(), p1.data(), sizeof(double) * p1.size()) != 0) bitwise = false;
    const DenseMat s1 = std::sqrt(static_cast<double>(d1)) * random_projection(x, d1, seed);
    const DenseMat s2 = std::sqrt(static_cast<double>(d2)) * random_projection(x, d2, seed);
    const double scale = std::max(1.0, p2.cwiseAbs().maxCoeff());
    scaled_gap = std::max(scaled_gap, (s2.leftCols(d1) - s1).cwiseAbs().maxCoeff() / scale);
    ++triples;
  }
  Outcome out;
  out.pass = bitwise;
  out.detail = std::to_string(triples) + " (d1, d2, seed) triples, X*M_r prefix bitwise=" + (bitwise ? "yes" : "no") +
               ", scaled prefix gap=" + fmt("%.1e", scaled_gap);
  return out;
}

nlohmann::json without_clock(nlohmann::json j) {
  j.erase("wall_clock_seconds");
  return j;
}

Outcome determinism() {
  SbmSpec spec;
  spec.n = 90;
  spec.c = 3;
  spec.seed = 4;
  const GraphDataset ds = make_sbm_dataset(spec);
  TrainOptions opts;
  opts.seeds = 3;
  opts.seed = 7;
  opts.growth.block_size = 4;
  opts.growth.epochs_per_step = 60;
  opts.threads = 1;
  const auto a = without_clock(to_json(cmd_train(ds, opts))).dump();
  const auto b = without_clock(to_json(cmd_train(ds, opts))).dump();
  opts.threads = 3;
  const auto c = without_clock(to_json(cmd_train(ds, opts))).dump();

  BaselineOptions bopts;
  bopts.seeds = 2;
  bopts.seed = 7;
  const auto ba = without_clock(to_json(cmd_baseline(ds, bopts))).dump();
  const auto bb = without_clock(to_json(cmd_baseline(ds, bopts))).dump();

  Outcome out;
  out.pass = a == b && a == c && ba == bb;
  out.detail = std::string("train repeat=") + (a == b ? "same" : "DIFF") + " train 1 vs 3 threads=" +
               (a == c ? "same" : "DIFF") + " baseline repeat=" + (ba == bb ? "same" : "DIFF");
  return out;
}

// Dataset-gated criteria.

std::string data_root() {
  const char* env = std::getenv("PGCN_DATA_DIR");
  return env ? env : "";
}

bool has_bundle(const std::string& name) {
  const std::string root = data_root();
  return !root.empty() && fs::exists(fs::path(root) / name / "meta.json");
}

int run_datasets() {
  if (!has_bundle("cora") && !has_bundle("citeseer") && !has_bundle("pubmed")) {
    const std::string why = "no bundles under $PGCN_DATA_DIR";
    for (const char* name : {"accuracy reproduction", "baseline reproduction", "topology plausibility",
                             "monotonicity (cora)", "dimension sweep direction"}) {
      skip(name, why);
    }
    return 77;
  }

  struct Target {
    const char* name;
    double floor;
    double limit_s;
  };
  std::map<std::string, RunReport> trained;
  for (const Target& tgt : {Target{"cora", 0.80, 600.0}, Target{"citeseer", 0.71, 600.0},
                            Target{"pubmed", 0.77, 2700.0}}) {
    const std::string label = std::string("accuracy reproduction (") + tgt.name + ")";
    if (!has_bundle(tgt.name)) {
      skip(label, "bundle missing");
      continue;
    }
    const GraphDataset ds = load_bundle(fs::path(data_root()) / tgt.name);
    TrainOptions opts;
    opts.seeds = 20;
    const auto start = Clock::now();
    RunReport rep = cmd_train(ds, opts);
    const double elapsed = seconds(start);
    Outcome out;
    out.pass = rep.best().test_accuracy >= tgt.floor && elapsed <= tgt.limit_s;
    out.detail = "test=" + fmt("%.4f", rep.best().test_accuracy) + " floor=" + fmt("%.2f", tgt.floor) +
                 " mean=" + fmt("%.4f", rep.test_accuracy_mean) + " time=" + fmt("%.0fs", elapsed);
    report(label, out);
    trained[tgt.name] = std::move(rep);
  }

  if (has_bundle("cora")) {
    const GraphDataset cora = load_bundle(fs::path(data_root()) / "cora");
    {
      BaselineOptions opts;
      const auto start = Clock::now();
      const RunReport rep = cmd_baseline(cora, opts);
      const double elapsed = seconds(start);
      Outcome out;
      out.pass = rep.best().test_accuracy >= 0.79 && elapsed <= 120.0;
      out.detail = "test=" + fmt("%.4f", rep.best().test_accuracy) + " params=" +
                   std::to_string(rep.best().parameter_count) + " time=" + fmt("%.1fs", elapsed);
      report("baseline reproduction", out);
    }
    const RunReport& rep = trained.at("cora");
    {
      const RunResult& best = rep.best();
      Index total = 0;
      for (Index w : best.widths) total += w;
      Outcome out;
      out.pass = best.widths.size() == 2 && total <= 100 && best.parameter_count <= 2 * 14670 &&
                 2 * best.parameter_count >= 14670;
      std::ostringstream ws;
      for (Index w : best.widths) ws << w << ' ';
      out.detail = "widths=[ " + ws.str() + "] params=" + std::to_string(best.parameter_count);
      report("topology plausibility", out);
    }
    {
      MonotonicityCheck check;
      for (const auto& run : rep.runs) check.add(run.trace);
      Outcome out;
      out.pass = check.worst_kept <= 1e-3;
      out.detail = check.detail();
      report("monotonicity (cora)", out);
    }
    {
      SweepOptions opts;
      opts.d_primes = {50, 250};
      const auto start = Clock::now();
      const SweepReport sw = cmd_sweep_dim(cora, opts);
      const double elapsed = seconds(start);
      double pgcn = 0.0;
      double gcn = 0.0;
      for (const auto& row : sw.rows) {
        if (row.d_prime != 50) continue;
        (row.method == "pgcn" ? pgcn : gcn) = row.test_acc;
      }
      Outcome out;
      out.pass = pgcn >= gcn && elapsed <= 900.0;
      out.detail = "D'=50: pgcn=" + fmt("%.4f", pgcn) + " gcn=" + fmt("%.4f", gcn) + " time=" + fmt("%.0fs", elapsed);
      report("dimension sweep direction", out);
    }
  } else {
    for (const char* name : {"baseline reproduction", "topology plausibility", "monotonicity (cora)",
                             "dimension sweep direction"}) {
      skip(name, "cora bundle missing");
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    if (argc > 1 && std::string(argv[1]) == "--datasets") return run_datasets();
    report("closed-form correctness", closed_form_correctness());
    report("gradient correctness", gradient_correctness());
    report("Laplacian identities", laplacian_identities());
    report("monotonicity (sbm)", monotonicity_sbm());
    report("parameter arithmetic", parameter_arithmetic());
    report("projection prefix property", projection_prefix());
    report("determinism", determinism());
  } catch (const std::exception& e) {
    std::printf("FAIL  uncaught exception: %s\n", e.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
