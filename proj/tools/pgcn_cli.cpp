#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pgcn/experiment.hpp"
#include "pgcn/synthetic.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct GrowthFlags {
  pgcn::GrowthConfig cfg;
  std::string loss = "ce";
  std::string metric = "labeled_accuracy";
  std::vector<double> init;

  void attach(CLI::App* app) {
    app->add_option("--loss", loss, "ce or mse")->check(CLI::IsMember({"ce", "mse"}));
    app->add_option("--block-size", cfg.block_size, "neurons per block")->capture_default_str();
    app->add_option("--lambda1", cfg.lambda1, "fit weight of the closed-form output solve")->capture_default_str();
    app->add_option("--lambda2", cfg.lambda2, "Laplacian weight (scaled by 1/N^2)")->capture_default_str();
    app->add_option("--dropout", cfg.dropout)->capture_default_str();
    app->add_option("--lr", cfg.lr)->capture_default_str();
    app->add_option("--l2", cfg.l2_coeff)->capture_default_str();
    app->add_option("--epochs", cfg.epochs_per_step, "finetuning epochs per growth step")->capture_default_str();
    app->add_option("--eps-block", cfg.eps_block)->capture_default_str();
    app->add_option("--eps-layer", cfg.eps_layer)->capture_default_str();
    app->add_option("--max-layers", cfg.max_layers)->capture_default_str();
    app->add_option("--max-width", cfg.max_layer_width)->capture_default_str();
    app->add_option("--max-blocks", cfg.max_blocks_per_layer, "0: max-width / block-size")->capture_default_str();
    app->add_option("--init", init, "uniform init bounds LO HI")->expected(2);
    app->add_option("--metric", metric, "labeled_accuracy, validation_accuracy or negative_loss")
        ->capture_default_str();
  }

  pgcn::GrowthConfig resolve() {
    try {
      cfg.loss = pgcn::parse_loss_kind(loss);
      cfg.progress_metric = pgcn::parse_progress_metric(metric);
      if (init.size() == 2) {
        cfg.init_lo = init[0];
        cfg.init_hi = init[1];
      }
      cfg.validate();
    } catch (const pgcn::InputError& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

struct BaselineFlags {
  pgcn::BaselineOptions opts;
  std::string loss = "ce";

  void attach(CLI::App* app, const std::string& prefix) {
    app->add_option("--" + prefix + "hidden", opts.hidden)->capture_default_str();
    app->add_option("--" + prefix + "epochs", opts.epochs)->capture_default_str();
    app->add_option("--" + prefix + "lr", opts.lr)->capture_default_str();
    app->add_option("--" + prefix + "dropout", opts.dropout)->capture_default_str();
    app->add_option("--" + prefix + "l2", opts.l2_coeff)->capture_default_str();
    app->add_option("--" + prefix + "patience", opts.patience, "0 disables early stopping")->capture_default_str();
    app->add_option("--" + prefix + "loss", loss)->check(CLI::IsMember({"ce", "mse"}));
  }

  pgcn::BaselineOptions resolve() {
    try {
      opts.loss = pgcn::parse_loss_kind(loss);
      opts.validate();
    } catch (const pgcn::InputError& e) {
      throw UsageError(e.what());
    }
    return opts;
  }
};

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void emit_json(const nlohmann::json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    pgcn::write_json_file(j, path);
  }
}

void print_summary(const pgcn::RunReport& report) {
  const auto& best = report.best();
  std::cerr << report.command << " " << report.dataset << ": seed " << best.seed << ", widths [";
  for (std::size_t i = 0; i < best.widths.size(); ++i) std::cerr << (i ? ", " : "") << best.widths[i];
  std::cerr << "], params " << best.parameter_count << ", val " << best.val_accuracy << ", test "
            << best.test_accuracy << " (mean " << report.test_accuracy_mean << " +/- " << report.test_accuracy_std
            << ", " << report.wall_clock_seconds << " s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive graph convolutional network trainer"};
  app.require_subcommand(1);

  std::string bundle;
  std::string out;
  int seeds = 20;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  auto* train = app.add_subcommand("train", "grow a GCN per seed and report the best-validation run");
  GrowthFlags train_flags;
  bool grid = false;
  train->add_option("--bundle", bundle, "dataset bundle directory")->required();
  train->add_option("--out", out, "report path (default stdout)");
  train->add_option("--seeds", seeds)->capture_default_str();
  train->add_option("--seed", seed, "first seed")->capture_default_str();
  train->add_option("--threads", threads, "worker count (default PGCN_THREADS or all cores)");
  train->add_flag("--grid", grid, "search dropout x lambda1 x block size");
  train_flags.attach(train);

  auto* baseline = app.add_subcommand("baseline", "fixed two-layer GCN with early stopping");
  BaselineFlags baseline_flags;
  int baseline_seeds = 1;
  baseline->add_option("--bundle", bundle)->required();
  baseline->add_option("--out", out);
  baseline->add_option("--seeds", baseline_seeds)->capture_default_str();
  baseline->add_option("--seed", seed)->capture_default_str();
  baseline->add_option("--threads", threads);
  baseline_flags.attach(baseline, "");

  auto* sweep = app.add_subcommand("sweep-dim", "random-projection dimensionality sweep");
  GrowthFlags sweep_flags;
  BaselineFlags sweep_baseline;
  pgcn::SweepOptions sweep_opts;
  sweep->add_option("--bundle", bundle)->required();
  sweep->add_option("--out", out);
  sweep->add_option("--d-prime", sweep_opts.d_primes, "projected dimensions")->capture_default_str();
  sweep->add_option("--runs", sweep_opts.runs, "runs per method and D'")->capture_default_str();
  sweep->add_option("--label-fraction", sweep_opts.label_fraction)->capture_default_str();
  sweep->add_option("--seed", sweep_opts.seed)->capture_default_str();
  sweep->add_option("--projection-seed", sweep_opts.projection_seed)->capture_default_str();
  sweep->add_option("--threads", threads);
  sweep_flags.attach(sweep);
  sweep_baseline.attach(sweep, "gcn-");

  auto* dump = app.add_subcommand("dump-figdata", "export a report's growth trace or sweep rows as TSV");
  std::string report_path;
  int run_index = -1;
  dump->add_option("--report", report_path, "report JSON")->required();
  dump->add_option("--run", run_index, "run index (default: the selected run)");
  dump->add_option("--out", out, "TSV path (default stdout)");

  auto* validate = app.add_subcommand("validate-bundle", "load a bundle and print its statistics");
  validate->add_option("--bundle", bundle)->required();

  auto* synth = app.add_subcommand("synth-bundle", "write a planted-partition toy bundle");
  pgcn::SbmSpec spec;
  std::string synth_name = "sbm";
  synth->add_option("--out", out, "bundle directory")->required();
  synth->add_option("--name", synth_name)->capture_default_str();
  synth->add_option("--n", spec.n)->capture_default_str();
  synth->add_option("--classes", spec.c)->capture_default_str();
  synth->add_option("--features", spec.d)->capture_default_str();
  synth->add_option("--topic-words", spec.topic_words)->capture_default_str();
  synth->add_option("--words", spec.words_per_node)->capture_default_str();
  synth->add_option("--purity", spec.topic_purity)->capture_default_str();
  synth->add_option("--p-in", spec.p_in)->capture_default_str();
  synth->add_option("--p-out", spec.p_out)->capture_default_str();
  synth->add_option("--train-per-class", spec.train_per_class)->capture_default_str();
  synth->add_option("--val", spec.n_val)->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) {
      pgcn::TrainOptions opts;
      opts.growth = train_flags.resolve();
      opts.seeds = seeds;
      opts.seed = seed;
      opts.grid = grid;
      opts.threads = threads;
      if (seeds < 1) throw UsageError("--seeds must be >= 1");
      const pgcn::GraphDataset ds = pgcn::load_bundle(bundle);
      const pgcn::RunReport report = pgcn::cmd_train(ds, opts);
      print_summary(report);
      emit_json(pgcn::to_json(report), out);
    } else if (*baseline) {
      pgcn::BaselineOptions opts = baseline_flags.resolve();
      opts.seeds = baseline_seeds;
      opts.seed = seed;
      opts.threads = threads;
      if (baseline_seeds < 1) throw UsageError("--seeds must be >= 1");
      const pgcn::GraphDataset ds = pgcn::load_bundle(bundle);
      const pgcn::RunReport report = pgcn::cmd_baseline(ds, opts);
      print_summary(report);
      emit_json(pgcn::to_json(report), out);
    } else if (*sweep) {
      sweep_opts.growth = sweep_flags.resolve();
      sweep_opts.baseline = sweep_baseline.resolve();
      sweep_opts.threads = threads;
      if (sweep_opts.runs < 1) throw UsageError("--runs must be >= 1");
      if (!(sweep_opts.label_fraction > 0.0 && sweep_opts.label_fraction < 1.0)) {
        throw UsageError("--label-fraction must lie in (0, 1)");
      }
      const pgcn::GraphDataset ds = pgcn::load_bundle(bundle);
      const pgcn::SweepReport report = pgcn::cmd_sweep_dim(ds, sweep_opts);
      for (const auto& row : report.rows) {
        std::cerr << "D'=" << row.d_prime << " " << row.method << ": test " << row.test_acc << ", params "
                  << row.params << "\n";
      }
      emit_json(pgcn::to_json(report), out);
    } else if (*dump) {
      const nlohmann::json j = pgcn::read_json_file(report_path);
      if (j.value("command", "") == "sweep-dim") {
        write_text(pgcn::sweep_to_tsv(pgcn::sweep_report_from_json(j).rows), out);
      } else {
        const pgcn::RunReport report = pgcn::run_report_from_json(j);
        const std::size_t idx = run_index < 0 ? report.selected : static_cast<std::size_t>(run_index);
        if (idx >= report.runs.size()) throw UsageError("--run out of range");
        write_text(pgcn::trace_to_tsv(report.runs[idx].trace), out);
      }
    } else if (*validate) {
      const pgcn::GraphDataset ds = pgcn::load_bundle(bundle);
      const auto edges = pgcn::build_adjacency(ds.edges).nonZeros() / 2;
      const nlohmann::json j{{"name", ds.name},
                             {"n", ds.n},
                             {"d", ds.d},
                             {"c", ds.c},
                             {"edges", edges},
                             {"n_train", ds.train_idx.size()},
                             {"n_val", ds.val_idx.size()},
                             {"n_test", ds.test_idx.size()},
                             {"label_rate", ds.label_rate()}};
      std::cout << j.dump(2) << '\n';
    } else if (*synth) {
      try {
        spec.validate();
      } catch (const pgcn::InputError& e) {
        throw UsageError(e.what());
      }
      pgcn::GraphDataset ds = pgcn::make_sbm_dataset(spec);
      ds.name = synth_name;
      pgcn::write_bundle(ds, out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const pgcn::BundleError& e) {
    std::cerr << "bundle error (" << pgcn::to_string(e.kind()) << "): " << e.what() << "\n";
    return kData;
  } catch (const pgcn::SingularityError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
