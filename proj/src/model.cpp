#include "pgcn/model.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

namespace pgcn {

const char* to_string(Head head) { return head == Head::Softmax ? "softmax" : "linear"; }

const char* to_string(LossKind kind) { return kind == LossKind::CrossEntropy ? "ce" : "mse"; }

LossKind parse_loss_kind(const std::string& text) {
  if (text == "ce") return LossKind::CrossEntropy;
  if (text == "mse") return LossKind::MeanSquared;
  throw InputError("unknown loss kind '" + text + "' (expected ce or mse)");
}

Index PgcnModel::layer_width(Index l) const {
  Index w = 0;
  for (const auto& block : layers.at(static_cast<std::size_t>(l))) w += block.cols();
  return w;
}

std::vector<Index> PgcnModel::widths() const {
  std::vector<Index> out;
  out.reserve(layers.size());
  for (Index l = 0; l < depth(); ++l) out.push_back(layer_width(l));
  return out;
}

void PgcnModel::validate_hidden() const {
  for (Index l = 0; l < depth(); ++l) {
    const Index fan = fan_in(l);
    for (const auto& block : layers[static_cast<std::size_t>(l)]) {
      require_shape(block.rows() == fan, "model: block fan_in does not match the previous layer width");
      require_shape(block.cols() > 0, "model: empty block");
    }
  }
}

void PgcnModel::validate() const {
  validate_hidden();
  if (depth() > 0) {
    require_shape(output.rows() == last_width(), "model: rows(O) must equal the last layer width");
    require_shape(output.cols() == num_classes, "model: cols(O) must equal the class count");
  }
}

Index count_parameters(const PgcnModel& model) {
  Index total = 0;
  for (const auto& layer : model.layers) {
    for (const auto& block : layer) total += block.size();
  }
  return total + model.output.size();
}

PgcnModel make_fixed_model(Index input_dim, const std::vector<Index>& hidden, Index num_classes, Head head,
                           SeededRng& rng) {
  if (hidden.empty()) throw InputError("fixed model needs at least one hidden layer");
  PgcnModel model;
  model.input_dim = input_dim;
  model.num_classes = num_classes;
  model.block_size = hidden.front();
  model.head = head;
  Index fan = input_dim;
  for (Index width : hidden) {
    const double lim = glorot_limit(fan, width);
    model.layers.push_back({uniform_init(fan, width, -lim, lim, rng)});
    fan = width;
  }
  const double lim = glorot_limit(fan, num_classes);
  model.output = uniform_init(fan, num_classes, -lim, lim, rng);
  return model;
}

GraphContext::GraphContext(SparseMat a_hat, SparseMat features)
    : a_hat_(std::move(a_hat)), features_(std::move(features)) {
  require_shape(a_hat_.rows() == a_hat_.cols(), "graph context: Â must be square");
  require_shape(features_.rows() == a_hat_.rows(), "graph context: one feature row per node");
  a_hat_.makeCompressed();
  features_.makeCompressed();
  propagated_ = (a_hat_ * features_).pruned();
  propagated_.makeCompressed();
}

GraphContext::GraphContext(SparseMat a_hat, const DenseMat& features)
    : GraphContext(std::move(a_hat), SparseMat(features.sparseView())) {}

namespace {

void softmax_rows(DenseMat& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    row /= row.sum();
  }
}

void check_dropout(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw InputError("dropout rate must lie in [0, 1)");
}

}  // namespace

ForwardResult forward(const PgcnModel& model, const GraphContext& ctx, Mode mode, double dropout_rate,
                      SeededRng& rng) {
  check_dropout(dropout_rate);
  model.validate();
  if (model.depth() == 0) throw ShapeError("forward: model has no hidden layers");
  require_shape(ctx.input_dim() == model.input_dim, "forward: feature width must equal D");

  const bool train = mode == Mode::Train;
  const bool drop = train && dropout_rate > 0.0;
  const double keep_scale = 1.0 / (1.0 - dropout_rate);
  const Index n = ctx.num_nodes();

  ForwardResult result;
  if (train) result.cache.layers.reserve(model.layers.size());
  DenseMat h;
  for (Index l = 0; l < model.depth(); ++l) {
    const auto& blocks = model.layers[static_cast<std::size_t>(l)];
    LayerCache lc;
    DenseMat pre(n, model.layer_width(l));
    Index col = 0;
    if (l == 0) {
      for (const auto& w : blocks) {
        pre.middleCols(col, w.cols()) = ctx.propagated_features() * w;
        col += w.cols();
      }
    } else {
      DenseMat prop = ctx.a_hat() * h;
      for (const auto& w : blocks) {
        pre.middleCols(col, w.cols()) = prop * w;
        col += w.cols();
      }
      if (train) lc.propagated = std::move(prop);
    }
    h = pre.cwiseMax(0.0);
    if (drop) {
      lc.mask.resize(n, h.cols());
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < h.cols(); ++j) lc.mask(i, j) = rng.uniform01() < dropout_rate ? 0.0 : keep_scale;
      }
      h = h.cwiseProduct(lc.mask);
    }
    if (train) {
      lc.pre = std::move(pre);
      lc.out = h;
      result.cache.layers.push_back(std::move(lc));
    }
  }
  result.y = h * model.output;
  if (model.head == Head::Softmax) softmax_rows(result.y);
  if (train) {
    result.cache.y = result.y;
    result.cache.widths = model.widths();
    result.cache.num_classes = model.num_classes;
    result.cache.valid = true;
  }
  return result;
}

DenseMat predict(const PgcnModel& model, const GraphContext& ctx) {
  SeededRng unused(0);
  return forward(model, ctx, Mode::Eval, 0.0, unused).y;
}

DenseMat last_hidden(const PgcnModel& model, const GraphContext& ctx) {
  model.validate_hidden();
  if (model.depth() == 0) throw ShapeError("last_hidden: model has no hidden layers");
  DenseMat h;
  for (Index l = 0; l < model.depth(); ++l) {
    const auto& blocks = model.layers[static_cast<std::size_t>(l)];
    DenseMat pre(ctx.num_nodes(), model.layer_width(l));
    Index col = 0;
    if (l == 0) {
      for (const auto& w : blocks) {
        pre.middleCols(col, w.cols()) = ctx.propagated_features() * w;
        col += w.cols();
      }
    } else {
      const DenseMat prop = ctx.a_hat() * h;
      for (const auto& w : blocks) {
        pre.middleCols(col, w.cols()) = prop * w;
        col += w.cols();
      }
    }
    h = pre.cwiseMax(0.0);
  }
  return h;
}

double weight_norm_sq(const PgcnModel& model) {
  double total = 0.0;
  for (const auto& layer : model.layers) {
    for (const auto& w : layer) total += w.squaredNorm();
  }
  return total + model.output.squaredNorm();
}

namespace {

void check_loss_inputs(const DenseMat& y, const DenseMat& t_labeled, const IndexList& labeled_idx, LossKind kind,
                       Head head) {
  if (labeled_idx.empty()) throw InputError("loss: labeled set is empty");
  if (kind == LossKind::CrossEntropy && head != Head::Softmax) {
    throw InputError("loss: cross-entropy requires the softmax head");
  }
  require_shape(t_labeled.rows() == static_cast<Index>(labeled_idx.size()), "loss: one target row per label");
  require_shape(t_labeled.cols() == y.cols(), "loss: target width must equal output width");
  for (Index i : labeled_idx) {
    if (i < 0 || i >= y.rows()) throw InputError("loss: labeled index out of range");
  }
}

}  // namespace

double loss(const DenseMat& y, const DenseMat& t_labeled, const IndexList& labeled_idx, LossKind kind,
            double l2_coeff, const PgcnModel& model) {
  check_loss_inputs(y, t_labeled, labeled_idx, kind, model.head);
  const auto count = static_cast<double>(labeled_idx.size());
  double data = 0.0;
  if (kind == LossKind::CrossEntropy) {
    for (std::size_t k = 0; k < labeled_idx.size(); ++k) {
      const Index i = labeled_idx[k];
      for (Index c = 0; c < y.cols(); ++c) {
        const double t = t_labeled(static_cast<Index>(k), c);
        if (t != 0.0) data -= t * std::log(std::max(y(i, c), DBL_MIN));
      }
    }
    data /= count;
  } else {
    for (std::size_t k = 0; k < labeled_idx.size(); ++k) {
      data += (y.row(labeled_idx[k]) - t_labeled.row(static_cast<Index>(k))).squaredNorm();
    }
    data /= count * static_cast<double>(y.cols());
  }
  return data + l2_coeff * weight_norm_sq(model);
}

ModelGradients backward(const ForwardCache& cache, const PgcnModel& model, const GraphContext& ctx,
                        const DenseMat& t_labeled, const IndexList& labeled_idx, LossKind kind, double l2_coeff) {
  if (!cache.valid) throw InputError("backward: missing forward cache (run a train-mode forward first)");
  if (cache.widths != model.widths() || cache.num_classes != model.num_classes ||
      cache.layers.size() != model.layers.size()) {
    throw InputError("backward: stale forward cache (topology changed)");
  }
  const DenseMat& y = cache.y;
  check_loss_inputs(y, t_labeled, labeled_idx, kind, model.head);

  const Index n = ctx.num_nodes();
  const Index classes = model.num_classes;
  const auto count = static_cast<double>(labeled_idx.size());

  // Gradient with respect to the logits H_last·O.
  DenseMat dlogits = DenseMat::Zero(n, classes);
  for (std::size_t k = 0; k < labeled_idx.size(); ++k) {
    const Index i = labeled_idx[k];
    const auto t = t_labeled.row(static_cast<Index>(k));
    if (kind == LossKind::CrossEntropy) {
      dlogits.row(i) += (y.row(i) - t) / count;
    } else {
      const Eigen::RowVectorXd g = 2.0 * (y.row(i) - t) / (count * static_cast<double>(classes));
      if (model.head == Head::Linear) {
        dlogits.row(i) += g;
      } else {
        const double gy = g.dot(y.row(i));
        dlogits.row(i) += (y.row(i).array() * (g.array() - gy)).matrix();
      }
    }
  }

  ModelGradients grads;
  grads.layers.resize(model.layers.size());
  const DenseMat& h_last = cache.layers.back().out;
  grads.output = h_last.transpose() * dlogits + 2.0 * l2_coeff * model.output;

  DenseMat dh = dlogits * model.output.transpose();
  for (Index l = model.depth() - 1; l >= 0; --l) {
    const auto& lc = cache.layers[static_cast<std::size_t>(l)];
    const auto& blocks = model.layers[static_cast<std::size_t>(l)];
    DenseMat dpre = lc.mask.size() > 0 ? DenseMat(dh.cwiseProduct(lc.mask)) : std::move(dh);
    dpre = (lc.pre.array() > 0.0).select(dpre.array(), 0.0).matrix();

    auto& gl = grads.layers[static_cast<std::size_t>(l)];
    gl.reserve(blocks.size());
    Index col = 0;
    for (const auto& w : blocks) {
      const auto dz = dpre.middleCols(col, w.cols());
      if (l == 0) {
        gl.push_back(ctx.propagated_features().transpose() * dz + 2.0 * l2_coeff * w);
      } else {
        gl.push_back(lc.propagated.transpose() * dz + 2.0 * l2_coeff * w);
      }
      col += w.cols();
    }
    if (l > 0) {
      DenseMat dprop = DenseMat::Zero(n, model.fan_in(l));
      col = 0;
      for (const auto& w : blocks) {
        dprop.noalias() += dpre.middleCols(col, w.cols()) * w.transpose();
        col += w.cols();
      }
      // Â is symmetric, so Âᵀ·dprop = Â·dprop.
      dh = ctx.a_hat() * dprop;
    }
  }
  return grads;
}

namespace {

bool same_shape(const DenseMat& a, const DenseMat& b) { return a.rows() == b.rows() && a.cols() == b.cols(); }

void fresh_if_needed(AdamState::Moments& mom, const DenseMat& param) {
  if (!same_shape(mom.m, param) || !same_shape(mom.v, param)) {
    mom.m = DenseMat::Zero(param.rows(), param.cols());
    mom.v = DenseMat::Zero(param.rows(), param.cols());
    mom.t = 0;
  }
}

void adam_update(DenseMat& param, const DenseMat& grad, AdamState::Moments& mom, double lr, const AdamConfig& cfg) {
  require_shape(same_shape(param, grad), "adam_step: gradient shape differs from parameter");
  mom.t += 1;
  mom.m = cfg.beta1 * mom.m + (1.0 - cfg.beta1) * grad;
  mom.v = cfg.beta2 * mom.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(mom.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(mom.t));
  param.array() -= lr * (mom.m.array() / bc1) / ((mom.v.array() / bc2).sqrt() + cfg.epsilon);
}

}  // namespace

void AdamState::sync(const PgcnModel& model) {
  layers.resize(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    layers[l].resize(model.layers[l].size());
    for (std::size_t b = 0; b < model.layers[l].size(); ++b) fresh_if_needed(layers[l][b], model.layers[l][b]);
  }
  fresh_if_needed(output, model.output);
}

void adam_step(PgcnModel& model, const ModelGradients& grads, AdamState& state, double lr, const AdamConfig& cfg) {
  require_shape(grads.layers.size() == model.layers.size(), "adam_step: gradient depth differs from model");
  state.sync(model);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    require_shape(grads.layers[l].size() == model.layers[l].size(), "adam_step: gradient block count differs");
    for (std::size_t b = 0; b < model.layers[l].size(); ++b) {
      adam_update(model.layers[l][b], grads.layers[l][b], state.layers[l][b], lr, cfg);
    }
  }
  adam_update(model.output, grads.output, state.output, lr, cfg);
}

double accuracy(const DenseMat& y, const std::vector<int>& labels, const IndexList& idx) {
  if (idx.empty()) throw InputError("accuracy: index set is empty");
  std::size_t hits = 0;
  for (Index i : idx) {
    if (i < 0 || i >= y.rows() || static_cast<std::size_t>(i) >= labels.size()) {
      throw InputError("accuracy: index out of range");
    }
    Index best = 0;
    for (Index c = 1; c < y.cols(); ++c) {
      if (y(i, c) > y(i, best)) best = c;
    }
    if (best == labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

namespace {

DenseMat one_hot(const std::vector<int>& labels, const IndexList& idx, Index classes) {
  DenseMat t = DenseMat::Zero(static_cast<Index>(idx.size()), classes);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Index i = idx[k];
    if (i < 0 || static_cast<std::size_t>(i) >= labels.size()) throw InputError("supervision: index out of range");
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= classes) throw InputError("supervision: label out of range");
    t(static_cast<Index>(k), c) = 1.0;
  }
  return t;
}

}  // namespace

Supervision make_supervision(std::vector<int> labels, IndexList train_idx, IndexList val_idx, Index num_classes) {
  Supervision sup;
  sup.num_classes = num_classes;
  sup.train_targets = one_hot(labels, train_idx, num_classes);
  sup.val_targets = one_hot(labels, val_idx, num_classes);
  sup.labels = std::move(labels);
  sup.train_idx = std::move(train_idx);
  sup.val_idx = std::move(val_idx);
  return sup;
}

FinetuneTrace finetune(PgcnModel& model, AdamState& state, const GraphContext& ctx, const Supervision& sup,
                       const FinetuneOptions& opts, SeededRng& rng) {
  if (opts.epochs < 0) throw InputError("finetune: epochs must be non-negative");
  check_dropout(opts.dropout);
  if (opts.early_stopping_patience > 0 && sup.val_idx.empty()) {
    throw InputError("finetune: early stopping needs a validation set");
  }
  FinetuneTrace trace;
  state.sync(model);
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    ForwardResult fr = forward(model, ctx, Mode::Train, opts.dropout, rng);
    trace.loss.push_back(loss(fr.y, sup.train_targets, sup.train_idx, opts.loss, opts.l2_coeff, model));
    trace.accuracy.push_back(accuracy(fr.y, sup.labels, sup.train_idx));
    const ModelGradients grads =
        backward(fr.cache, model, ctx, sup.train_targets, sup.train_idx, opts.loss, opts.l2_coeff);
    adam_step(model, grads, state, opts.lr);
    trace.epochs_run = epoch + 1;

    if (opts.early_stopping_patience > 0) {
      const DenseMat y = predict(model, ctx);
      const double v = loss(y, sup.val_targets, sup.val_idx, opts.loss, opts.l2_coeff, model);
      trace.val_loss.push_back(v);
      if (v < best_val) {
        best_val = v;
        since_best = 0;
      } else if (++since_best >= opts.early_stopping_patience) {
        trace.stopped_early = true;
        break;
      }
    }
  }
  return trace;
}

}  // namespace pgcn
