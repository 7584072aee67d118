#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pgcn/closed_form.hpp"
#include "pgcn/dataset.hpp"
#include "pgcn/model.hpp"

using namespace pgcn;

namespace {

PgcnModel one_layer(Index d, Index width, Index c, Head head, double lo, double hi, SeededRng& rng) {
  PgcnModel m;
  m.input_dim = d;
  m.num_classes = c;
  m.block_size = width;
  m.head = head;
  m.layers.push_back({uniform_init(d, width, lo, hi, rng)});
  m.output = uniform_init(width, c, lo, hi, rng);
  return m;
}

struct Toy {
  EdgeList g{6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}, {1, 4}}};
  DenseMat x;
  std::vector<int> labels{0, 1, 0, 1, 0, 1};
  IndexList idx{0, 1, 2, 3};
  Toy() {
    SeededRng rng(11);
    x = uniform_init(6, 4, 0.0, 1.0, rng);
  }
  GraphContext ctx() const { return GraphContext(normalize_adjacency(build_adjacency(g)), x); }
};

}  // namespace

TEST(CountParameters, Examples) {
  PgcnModel m;
  m.input_dim = 1433;
  m.num_classes = 7;
  m.layers = {{DenseMat(1433, 16)}};
  m.output = DenseMat(16, 7);
  EXPECT_EQ(count_parameters(m), 1433 * 16 + 16 * 7);

  m.input_dim = 10;
  m.num_classes = 3;
  m.layers = {{DenseMat(10, 2), DenseMat(10, 2)}, {DenseMat(4, 2)}};
  m.output = DenseMat(2, 3);
  EXPECT_EQ(count_parameters(m), 40 + 8 + 6);
}

TEST(Forward, EdgelessGraphSkipsPropagation) {
  SeededRng rng(1);
  const DenseMat x = uniform_init(4, 3, -1.0, 1.0, rng);
  const PgcnModel m = one_layer(3, 5, 2, Head::Linear, -1.0, 1.0, rng);
  const GraphContext ctx(normalize_adjacency(build_adjacency(EdgeList{4, {}})), x);
  const DenseMat expected = (x * m.layers[0][0]).cwiseMax(0.0) * m.output;
  EXPECT_LE((predict(m, ctx) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, PathGraphMatchesLoopOracle) {
  SeededRng rng(2);
  const EdgeList g{3, {{0, 1}, {1, 2}}};
  const DenseMat x = uniform_init(3, 2, -1.0, 1.0, rng);
  for (Head head : {Head::Linear, Head::Softmax}) {
    const PgcnModel m = one_layer(2, 3, 2, head, -1.0, 1.0, rng);
    const GraphContext ctx(normalize_adjacency(build_adjacency(g)), x);
    const DenseMat ref = oracle::forward(m, oracle::normalized_adjacency(oracle::dense_adjacency(g)), x, {});
    EXPECT_LE((predict(m, ctx) - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, FixedModelClosedExpression) {
  const Toy toy;
  SeededRng rng(3);
  const PgcnModel m = make_fixed_model(4, {5}, 2, Head::Softmax, rng);
  const DenseMat a = oracle::normalized_adjacency(oracle::dense_adjacency(toy.g));
  const DenseMat logits = (a * toy.x * m.layers[0][0]).cwiseMax(0.0) * m.output;
  DenseMat expected = logits;
  for (Index i = 0; i < expected.rows(); ++i) {
    const Eigen::RowVectorXd e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
    expected.row(i) = e / e.sum();
  }
  EXPECT_LE((predict(m, toy.ctx()) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, SoftmaxRowsSumToOne) {
  const Toy toy;
  SeededRng rng(4);
  const PgcnModel m = one_layer(4, 6, 3, Head::Softmax, -3.0, 3.0, rng);
  const DenseMat y = predict(m, toy.ctx());
  for (Index i = 0; i < y.rows(); ++i) {
    EXPECT_NEAR(y.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(y.row(i).minCoeff(), 0.0);
  }
}

TEST(Forward, EvalIgnoresDropoutAndRng) {
  const Toy toy;
  SeededRng rng(5);
  const PgcnModel m = one_layer(4, 6, 2, Head::Linear, -1.0, 1.0, rng);
  const GraphContext ctx = toy.ctx();
  SeededRng r1(1), r2(999);
  const DenseMat a = forward(m, ctx, Mode::Eval, 0.5, r1).y;
  const DenseMat b = forward(m, ctx, Mode::Eval, 0.9, r2).y;
  EXPECT_EQ(a, b);
  EXPECT_FALSE(forward(m, ctx, Mode::Eval, 0.5, r1).cache.valid);
}

TEST(Forward, InvertedDropoutPreservesExpectation) {
  const Toy toy;
  SeededRng rng(6);
  const PgcnModel m = one_layer(4, 3, 2, Head::Linear, 0.1, 1.0, rng);
  const GraphContext ctx = toy.ctx();
  const DenseMat clean = last_hidden(m, ctx);
  DenseMat sum = DenseMat::Zero(clean.rows(), clean.cols());
  SeededRng drop(7);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) sum += forward(m, ctx, Mode::Train, 0.5, drop).cache.layers[0].out;
  const DenseMat mean = sum / trials;
  for (Index i = 0; i < clean.size(); ++i) {
    if (clean.data()[i] > 1e-3) EXPECT_LE(std::fabs(mean.data()[i] / clean.data()[i] - 1.0), 0.02);
  }
}

TEST(Forward, RejectsBadDropoutAndShapes) {
  const Toy toy;
  SeededRng rng(8);
  PgcnModel m = one_layer(4, 3, 2, Head::Linear, -1.0, 1.0, rng);
  const GraphContext ctx = toy.ctx();
  EXPECT_THROW(forward(m, ctx, Mode::Train, 1.0, rng), InputError);
  EXPECT_THROW(forward(m, ctx, Mode::Train, -0.1, rng), InputError);
  m.output = DenseMat::Zero(4, 2);
  EXPECT_THROW(predict(m, ctx), ShapeError);
}

TEST(Loss, ExactMseFitIsZero) {
  const DenseMat y = (DenseMat(2, 2) << 1, 0, 0, 1).finished();
  PgcnModel m;
  EXPECT_DOUBLE_EQ(loss(y, y, {0, 1}, LossKind::MeanSquared, 0.0, m), 0.0);
}

TEST(Loss, UniformCrossEntropyIsLogC) {
  const DenseMat y = DenseMat::Constant(3, 4, 0.25);
  const DenseMat t = one_hot_targets({0, 2, 3}, {0, 1, 2}, 4);
  PgcnModel m;
  EXPECT_NEAR(loss(y, t, {0, 1, 2}, LossKind::CrossEntropy, 0.0, m), std::log(4.0), 1e-12);
}

TEST(Loss, MatchesOracleWithWeightDecay) {
  const Toy toy;
  SeededRng rng(9);
  for (LossKind kind : {LossKind::CrossEntropy, LossKind::MeanSquared}) {
    const PgcnModel m = one_layer(4, 5, 2, head_for(kind), -1.0, 1.0, rng);
    const DenseMat y = predict(m, toy.ctx());
    const DenseMat t = one_hot_targets(toy.labels, toy.idx, 2);
    EXPECT_NEAR(loss(y, t, toy.idx, kind, 5e-4, m), oracle::loss(m, y, t, toy.idx, kind, 5e-4), 1e-12);
  }
}

TEST(Loss, RejectsEmptySetAndHeadMismatch) {
  const DenseMat y = DenseMat::Constant(2, 2, 0.5);
  const DenseMat t0(0, 2);
  PgcnModel m;
  m.head = Head::Softmax;
  EXPECT_THROW(loss(y, t0, {}, LossKind::CrossEntropy, 0.0, m), InputError);
  m.head = Head::Linear;
  const DenseMat t = one_hot_targets({0, 1}, {0, 1}, 2);
  EXPECT_THROW(loss(y, t, {0, 1}, LossKind::CrossEntropy, 0.0, m), InputError);
}

TEST(Backward, MatchesFiniteDifferences) {
  const Toy toy;
  const GraphContext ctx = toy.ctx();
  const DenseMat a_ref = oracle::normalized_adjacency(oracle::dense_adjacency(toy.g));
  const DenseMat t = one_hot_targets(toy.labels, toy.idx, 2);
  SeededRng rng(10);
  for (LossKind kind : {LossKind::CrossEntropy, LossKind::MeanSquared}) {
    PgcnModel m;
    m.input_dim = 4;
    m.num_classes = 2;
    m.block_size = 2;
    m.head = head_for(kind);
    m.layers = {{uniform_init(4, 2, -1, 1, rng), uniform_init(4, 2, -1, 1, rng)}, {uniform_init(4, 2, -1, 1, rng)}};
    m.output = uniform_init(2, 2, -1, 1, rng);
    SeededRng drop(12);
    const ForwardResult fr = forward(m, ctx, Mode::Train, 0.2, drop);
    const ModelGradients g = backward(fr.cache, m, ctx, t, toy.idx, kind, 1e-3);
    std::vector<DenseMat> masks;
    for (const auto& lc : fr.cache.layers) masks.push_back(lc.mask);
    std::vector<const DenseMat*> analytic{&g.layers[0][0], &g.layers[0][1], &g.layers[1][0], &g.output};
    const auto params = oracle::parameters(m);
    for (std::size_t p = 0; p < params.size(); ++p) {
      DenseMat& w = *params[p];
      for (Index e = 0; e < w.size(); ++e) {
        const double keep = w.data()[e];
        w.data()[e] = keep + 1e-5;
        const double up = oracle::loss(m, oracle::forward(m, a_ref, toy.x, masks), t, toy.idx, kind, 1e-3);
        w.data()[e] = keep - 1e-5;
        const double down = oracle::loss(m, oracle::forward(m, a_ref, toy.x, masks), t, toy.idx, kind, 1e-3);
        w.data()[e] = keep;
        EXPECT_LE(oracle::relative_error((up - down) / 2e-5, analytic[p]->data()[e], 1e-5), 1e-4);
      }
    }
  }
}

TEST(Backward, DeadNetworkHasZeroGradient) {
  const Toy toy;
  const GraphContext ctx = toy.ctx();
  SeededRng rng(13);
  PgcnModel m = one_layer(4, 3, 2, Head::Softmax, -1.0, 1.0, rng);
  m.layers[0][0] = -m.layers[0][0].cwiseAbs();  // X ≥ 0, so every pre-activation is ≤ 0
  m.layers[0][0].array() -= 0.1;
  SeededRng drop(0);
  const ForwardResult fr = forward(m, ctx, Mode::Train, 0.0, drop);
  const ModelGradients g = backward(fr.cache, m, ctx, one_hot_targets(toy.labels, toy.idx, 2), toy.idx,
                                    LossKind::CrossEntropy, 0.0);
  EXPECT_EQ(g.layers[0][0].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.output.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, RejectsMissingOrStaleCache) {
  const Toy toy;
  const GraphContext ctx = toy.ctx();
  const DenseMat t = one_hot_targets(toy.labels, toy.idx, 2);
  SeededRng rng(14);
  PgcnModel m = one_layer(4, 3, 2, Head::Softmax, -1.0, 1.0, rng);
  const ForwardResult eval = forward(m, ctx, Mode::Eval, 0.0, rng);
  EXPECT_THROW(backward(eval.cache, m, ctx, t, toy.idx, LossKind::CrossEntropy, 0.0), InputError);
  const ForwardResult train = forward(m, ctx, Mode::Train, 0.0, rng);
  m.layers[0].push_back(uniform_init(4, 3, -1, 1, rng));
  m.output = uniform_init(6, 2, -1, 1, rng);
  EXPECT_THROW(backward(train.cache, m, ctx, t, toy.idx, LossKind::CrossEntropy, 0.0), InputError);
}

TEST(Backward, ClosedFormOutputIsStationaryForMatchingMse) {
  // Mean MSE with l2 = 1/(λ1·|L|·C) is J2 (λ2 = 0) scaled by 2/(λ1·|L|·C), so the
  // exact ridge solution must zero the O gradient.
  const Toy toy;
  const GraphContext ctx = toy.ctx();
  SeededRng rng(15);
  PgcnModel m = one_layer(4, 5, 2, Head::Linear, -1.0, 1.0, rng);
  const DenseMat t = one_hot_targets(toy.labels, toy.idx, 2);
  const double lambda1 = 2.0;
  const DenseMat h = last_hidden(m, ctx);
  m.output = solve_output_weights(h, toy.idx, t, normalized_laplacian(build_adjacency(toy.g)),
                                  RegressionConfig{lambda1, 0.0, 6});
  SeededRng drop(0);
  const ForwardResult fr = forward(m, ctx, Mode::Train, 0.0, drop);
  const double l2 = 1.0 / (lambda1 * 4.0 * 2.0);
  const ModelGradients g = backward(fr.cache, m, ctx, t, toy.idx, LossKind::MeanSquared, l2);
  EXPECT_LE(g.output.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  SeededRng rng(16);
  PgcnModel m = one_layer(4, 3, 2, Head::Linear, -1.0, 1.0, rng);
  const PgcnModel before = m;
  ModelGradients g{{{DenseMat::Zero(4, 3)}}, DenseMat::Zero(3, 2)};
  AdamState state;
  for (int i = 0; i < 3; ++i) adam_step(m, g, state, 0.01);
  EXPECT_EQ(m.layers[0][0], before.layers[0][0]);
  EXPECT_EQ(m.output, before.output);
}

TEST(Adam, FirstStepMovesEachEntryByLr) {
  SeededRng rng(17);
  PgcnModel m = one_layer(4, 3, 2, Head::Linear, -1.0, 1.0, rng);
  const PgcnModel before = m;
  ModelGradients g{{{DenseMat::Constant(4, 3, 0.7)}}, DenseMat::Constant(3, 2, -2.5)};
  AdamState state;
  adam_step(m, g, state, 0.01, AdamConfig{0.9, 0.999, 0.0});
  EXPECT_LE(((before.layers[0][0] - m.layers[0][0]).array() - 0.01).abs().maxCoeff(), 1e-15);
  EXPECT_LE(((m.output - before.output).array() - 0.01).abs().maxCoeff(), 1e-15);
}

TEST(Adam, UpdatesExactlyCountParametersScalars) {
  SeededRng rng(18);
  PgcnModel m;
  m.input_dim = 5;
  m.num_classes = 3;
  m.layers = {{uniform_init(5, 2, -1, 1, rng), uniform_init(5, 2, -1, 1, rng)}, {uniform_init(4, 2, -1, 1, rng)}};
  m.output = uniform_init(2, 3, -1, 1, rng);
  const PgcnModel before = m;
  ModelGradients g{{{DenseMat::Ones(5, 2), DenseMat::Ones(5, 2)}, {DenseMat::Ones(4, 2)}}, DenseMat::Ones(2, 3)};
  AdamState state;
  adam_step(m, g, state, 0.01);
  Index changed = 0;
  auto mine = oracle::parameters(m);
  PgcnModel copy = before;
  auto theirs = oracle::parameters(copy);
  for (std::size_t p = 0; p < mine.size(); ++p) {
    changed += (mine[p]->array() != theirs[p]->array()).count();
  }
  EXPECT_EQ(changed, count_parameters(m));
}

TEST(Adam, StepCountIsPerTensor) {
  SeededRng rng(19);
  PgcnModel m = one_layer(4, 3, 2, Head::Linear, -1.0, 1.0, rng);
  AdamState state;
  ModelGradients g{{{DenseMat::Ones(4, 3)}}, DenseMat::Ones(3, 2)};
  adam_step(m, g, state, 0.01);
  adam_step(m, g, state, 0.01);
  m.layers[0].push_back(uniform_init(4, 3, -1, 1, rng));
  m.output = uniform_init(6, 2, -1, 1, rng);
  g.layers[0].push_back(DenseMat::Ones(4, 3));
  g.output = DenseMat::Ones(6, 2);
  const DenseMat fresh = m.layers[0][1];
  adam_step(m, g, state, 0.01, AdamConfig{0.9, 0.999, 0.0});
  EXPECT_EQ(state.layers[0][0].t, 3);
  EXPECT_EQ(state.layers[0][1].t, 1);
  EXPECT_LE(((fresh - m.layers[0][1]).array() - 0.01).abs().maxCoeff(), 1e-15);
}

TEST(Finetune, ZeroEpochsIsNoOp) {
  const Toy toy;
  SeededRng rng(20);
  PgcnModel m = one_layer(4, 3, 2, Head::Softmax, -1.0, 1.0, rng);
  const PgcnModel before = m;
  AdamState state;
  FinetuneOptions opts;
  opts.epochs = 0;
  const auto sup = make_supervision(toy.labels, toy.idx, {4, 5}, 2);
  const FinetuneTrace tr = finetune(m, state, toy.ctx(), sup, opts, rng);
  EXPECT_EQ(tr.epochs_run, 0);
  EXPECT_EQ(m.layers[0][0], before.layers[0][0]);
  EXPECT_EQ(m.output, before.output);
}

TEST(Finetune, SmallStepMseLossDoesNotIncrease) {
  const Toy toy;
  SeededRng rng(21);
  PgcnModel m = one_layer(4, 4, 2, Head::Linear, -1.0, 1.0, rng);
  AdamState state;
  FinetuneOptions opts;
  opts.epochs = 50;
  opts.lr = 1e-3;
  opts.dropout = 0.0;
  opts.loss = LossKind::MeanSquared;
  const auto sup = make_supervision(toy.labels, toy.idx, {4, 5}, 2);
  const FinetuneTrace tr = finetune(m, state, toy.ctx(), sup, opts, rng);
  ASSERT_EQ(tr.loss.size(), 50u);
  for (std::size_t e = 1; e < tr.loss.size(); ++e) EXPECT_LE(tr.loss[e], tr.loss[e - 1] + 1e-6) << "epoch " << e;
  EXPECT_LT(tr.loss.back(), tr.loss.front());
}

TEST(Finetune, EarlyStoppingOnContradictingValidation) {
  // Validation nodes copy the training features with swapped labels, so
  // validation loss rises as soon as training makes progress.
  DenseMat x(4, 2);
  x << 1, 0, 0, 1, 1, 0, 0, 1;
  const GraphContext ctx(normalize_adjacency(build_adjacency(EdgeList{4, {}})), x);
  SeededRng rng(22);
  PgcnModel m = one_layer(2, 4, 2, Head::Softmax, 0.0, 0.5, rng);
  AdamState state;
  FinetuneOptions opts;
  opts.epochs = 200;
  opts.dropout = 0.0;
  opts.early_stopping_patience = 10;
  const auto sup = make_supervision({0, 1, 1, 0}, {0, 1}, {2, 3}, 2);
  const FinetuneTrace tr = finetune(m, state, ctx, sup, opts, rng);
  EXPECT_TRUE(tr.stopped_early);
  EXPECT_LT(tr.epochs_run, 200);
  EXPECT_GE(tr.epochs_run, 11);
}

TEST(Finetune, SameSeedSameWeights) {
  const Toy toy;
  const auto sup = make_supervision(toy.labels, toy.idx, {4, 5}, 2);
  FinetuneOptions opts;
  opts.epochs = 20;
  PgcnModel a, b;
  for (PgcnModel* m : {&a, &b}) {
    SeededRng rng(23);
    *m = one_layer(4, 4, 2, Head::Softmax, -1.0, 1.0, rng);
    AdamState state;
    finetune(*m, state, toy.ctx(), sup, opts, rng);
  }
  EXPECT_EQ(a.layers[0][0], b.layers[0][0]);
  EXPECT_EQ(a.output, b.output);
}

TEST(Accuracy, Examples) {
  const DenseMat y = (DenseMat(3, 2) << 0.9, 0.1, 0.2, 0.8, 0.6, 0.4).finished();
  EXPECT_DOUBLE_EQ(accuracy(y, {0, 1, 0}, {0, 1, 2}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(y, {1, 0, 1}, {0, 1, 2}), 0.0);
  EXPECT_DOUBLE_EQ(accuracy(y, {0, 1, 1}, {0, 1, 2}), 2.0 / 3.0);
  EXPECT_THROW(accuracy(y, {0, 1, 0}, {}), InputError);
}

TEST(Accuracy, TiesGoToLowestClass) {
  const DenseMat y = DenseMat::Constant(1, 3, 0.5);
  EXPECT_DOUBLE_EQ(accuracy(y, {0}, {0}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(y, {2}, {0}), 0.0);
}
