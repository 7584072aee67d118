#pragma once

#include <cstdint>
#include <vector>

#include "pgcn/dense.hpp"
#include "pgcn/graph.hpp"

namespace pgcn {

enum class Head { Linear, Softmax };
enum class LossKind { CrossEntropy, MeanSquared };
enum class Mode { Train, Eval };

const char* to_string(Head head);
const char* to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

/// Head that pairs with a loss: softmax for cross-entropy, linear for MSE.
inline Head head_for(LossKind kind) { return kind == LossKind::CrossEntropy ? Head::Softmax : Head::Linear; }

/// Block-structured GCN. Layer l holds blocks W_b (fan_in × block_size) that all
/// read the previous layer's output; their activations are concatenated
/// column-wise. `output` maps the last layer's width to the classes.
struct PgcnModel {
  Index input_dim = 0;
  Index num_classes = 0;
  Index block_size = 0;
  Head head = Head::Softmax;
  std::vector<std::vector<DenseMat>> layers;
  DenseMat output;

  Index depth() const { return static_cast<Index>(layers.size()); }
  Index layer_width(Index l) const;
  /// Input width of layer l: D for the first layer, previous width otherwise.
  Index fan_in(Index l) const { return l == 0 ? input_dim : layer_width(l - 1); }
  Index last_width() const { return layers.empty() ? 0 : layer_width(depth() - 1); }
  std::vector<Index> widths() const;
  /// Throws ShapeError when block or output shapes violate the topology.
  void validate() const;
  /// Block shapes only; O may lag behind during growth.
  void validate_hidden() const;
};

/// Σ fan_in·width over hidden blocks plus rows(O)·C.
Index count_parameters(const PgcnModel& model);

/// Fixed-topology model (e.g. the 2-layer [D, 16, C] baseline): one block per
/// hidden layer, Glorot-uniform weights for hidden layers and the output.
PgcnModel make_fixed_model(Index input_dim, const std::vector<Index>& hidden, Index num_classes, Head head,
                           SeededRng& rng);

/// Graph operator and features shared by every forward pass. Â·X is formed
/// once, since the first layer always consumes it.
class GraphContext {
 public:
  GraphContext(SparseMat a_hat, SparseMat features);
  GraphContext(SparseMat a_hat, const DenseMat& features);

  const SparseMat& a_hat() const { return a_hat_; }
  const SparseMat& features() const { return features_; }
  const SparseMat& propagated_features() const { return propagated_; }
  Index num_nodes() const { return a_hat_.rows(); }
  Index input_dim() const { return features_.cols(); }

 private:
  SparseMat a_hat_;
  SparseMat features_;
  SparseMat propagated_;
};

struct LayerCache {
  DenseMat propagated;  // Â·H_{l-1}; empty for the first layer (lives in GraphContext)
  DenseMat pre;         // Â·H_{l-1}·W, before ReLU
  DenseMat mask;        // inverted-dropout scale per entry; empty when dropout is off
  DenseMat out;         // layer output after ReLU and dropout
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  DenseMat y;
  std::vector<Index> widths;  // topology the cache was built for
  Index num_classes = 0;
  bool valid = false;
};

struct ForwardResult {
  DenseMat y;
  ForwardCache cache;  // populated in train mode only
};

/// H_l = ReLU(Â·H_{l-1}·[W_1 … W_b]); inverted dropout on every hidden output
/// in train mode (never on X); Y = H_last·O, row-softmaxed for the softmax head.
ForwardResult forward(const PgcnModel& model, const GraphContext& ctx, Mode mode, double dropout_rate,
                      SeededRng& rng);

/// Eval-mode forward.
DenseMat predict(const PgcnModel& model, const GraphContext& ctx);

/// Hidden representation of the last layer in eval mode.
DenseMat last_hidden(const PgcnModel& model, const GraphContext& ctx);

/// Σ ‖W‖² over hidden blocks plus ‖O‖².
double weight_norm_sq(const PgcnModel& model);

/// Mean cross-entropy (softmax head) or mean squared error over labeled rows and
/// classes, plus l2_coeff·Σ‖W‖² including O.
double loss(const DenseMat& y, const DenseMat& t_labeled, const IndexList& labeled_idx, LossKind kind,
            double l2_coeff, const PgcnModel& model);

struct ModelGradients {
  std::vector<std::vector<DenseMat>> layers;
  DenseMat output;
};

ModelGradients backward(const ForwardCache& cache, const PgcnModel& model, const GraphContext& ctx,
                        const DenseMat& t_labeled, const IndexList& labeled_idx, LossKind kind, double l2_coeff);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments per parameter tensor. Each tensor carries its own step count so
/// that blocks added mid-training start with correct bias correction.
struct AdamState {
  struct Moments {
    DenseMat m;
    DenseMat v;
    std::int64_t t = 0;
  };
  std::vector<std::vector<Moments>> layers;
  Moments output;

  /// Fresh moments for tensors that are new or changed shape; others are kept.
  void sync(const PgcnModel& model);
  void reset_output() { output = Moments{}; }
};

void adam_step(PgcnModel& model, const ModelGradients& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

/// Fraction of rows in idx whose argmax (ties to the lowest class) equals the label.
double accuracy(const DenseMat& y, const std::vector<int>& labels, const IndexList& idx);

/// Labels and index sets visible to training.
struct Supervision {
  std::vector<int> labels;  // all N; only train (and val for selection) are read
  IndexList train_idx;
  IndexList val_idx;
  Index num_classes = 0;
  DenseMat train_targets;  // one-hot, |train| × C
  DenseMat val_targets;
};

Supervision make_supervision(std::vector<int> labels, IndexList train_idx, IndexList val_idx, Index num_classes);

struct FinetuneOptions {
  int epochs = 300;
  double lr = 0.01;
  double dropout = 0.5;
  LossKind loss = LossKind::CrossEntropy;
  double l2_coeff = 5e-4;
  /// Stop once validation loss has not improved for this many epochs; 0 disables.
  int early_stopping_patience = 0;
};

struct FinetuneTrace {
  std::vector<double> loss;      // train-mode loss at each epoch, before the update
  std::vector<double> accuracy;  // labeled-set accuracy of the same forward pass
  std::vector<double> val_loss;  // filled when early stopping is on
  int epochs_run = 0;
  bool stopped_early = false;
};

/// Full-batch Adam on every hidden block and O.
FinetuneTrace finetune(PgcnModel& model, AdamState& state, const GraphContext& ctx, const Supervision& sup,
                       const FinetuneOptions& opts, SeededRng& rng);

}  // namespace pgcn
