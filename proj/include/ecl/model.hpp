#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecl/matrix.hpp"
#include "ecl/paradigm.hpp"
#include "ecl/rng.hpp"
#include "ecl/tape.hpp"

namespace ecl::model {

// Three-layer MLP (d -> h -> h -> K logits, tanh activations) plus an
// auxiliary posterior head on the second hidden layer: K logits with softmax
// for canonical/class-wise, one logit with sigmoid for top-label.
struct MlpParameters {
  int input_dim = 0;
  int hidden = 0;
  int classes = 0;
  Paradigm paradigm = Paradigm::kCanonical;

  Matrix w1, b1;  // [d,h], [1,h]
  Matrix w2, b2;  // [h,h], [1,h]
  Matrix w3, b3;  // [h,K], [1,K]
  Matrix wa, ba;  // [h,A], [1,A] with A = K or 1

  int aux_width() const { return paradigm == Paradigm::kTopLabel ? 1 : classes; }

  static MlpParameters init(int input_dim, int hidden, int classes, Paradigm p, Rng& rng);

  std::vector<Matrix*> all();
  std::vector<const Matrix*> all() const;
  std::vector<Matrix*> backbone();          // w1,b1,w2,b2
  std::vector<Matrix*> aux_head_params();   // wa,ba
  static std::vector<std::string> names();  // parallel to all()
};

struct TrainingDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parameter leaves planted on a tape plus the model's forward pieces.
struct ModelGraph {
  ad::Tape* tape = nullptr;
  int classes = 0;
  Paradigm paradigm = Paradigm::kCanonical;
  ad::NodeRef w1, b1, w2, b2, w3, b3, wa, ba;

  static ModelGraph plant(ad::Tape& tape, const MlpParameters& params);

  struct Forward {
    ad::NodeRef features;  // [n,h]
    ad::NodeRef logits;    // [n,K]
    ad::NodeRef scores;    // row-softmax [n,K]
  };
  Forward classifier(const Matrix& batch_x) const;

  // Posterior estimate from features: [n,K] simplex rows or [n,1] in (0,1).
  // freeze_backbone detaches the features so no gradient reaches w1..b2.
  ad::NodeRef aux_head(ad::NodeRef features, bool freeze_backbone) const;

  std::vector<ad::NodeRef> param_refs() const;       // order of MlpParameters::all()
  std::vector<Matrix> parameter_grads() const;       // after tape->backward
};

// Forward without a tape, for evaluation.
struct EvalOut {
  Matrix features;
  Matrix logits;
  Matrix scores;
};
EvalOut eval_classifier(const MlpParameters& params, const Matrix& batch_x);
Matrix eval_aux_head(const MlpParameters& params, const Matrix& features);

// Bias-corrected Adam.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  static AdamState init(const std::vector<Matrix*>& params, double learning_rate);
  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads);
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool aux_holdout = false;       // hold out part of the source set for head calibration
  double holdout_fraction = 0.2;
  // Head-only supervision steps per classifier step. The head sees far fewer
  // useful gradients than the classifier at the shared learning rate, so it
  // needs a step multiplier to reach its own convergence on small data.
  int head_steps = 8;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

// Trains the classifier with cross-entropy on source labels; the auxiliary
// head is trained alongside with its own cross-entropy on detached features
// (the backbone never sees head gradients). Throws TrainingDivergence on
// non-finite loss.
MlpParameters train_source_classifier(const Matrix& source_x,
                                      const std::vector<int>& source_labels,
                                      int classes, int hidden, Paradigm paradigm,
                                      const TrainConfig& config,
                                      TrainLog* log = nullptr);

// Post-hoc aux-head calibration with the softened ECE loss; only wa/ba move.
MlpParameters calibrate_aux_head(const MlpParameters& params, const Matrix& source_x,
                                 const std::vector<int>& source_labels,
                                 const TrainConfig& config, int soft_ece_bins = 15,
                                 TrainLog* log = nullptr);

// Head-only supervision on fixed feature values: cross-entropy against labels
// (or binary cross-entropy against classifier correctness for top-label),
// optionally plus the softened ECE. Only wa/ba move.
void head_supervision_steps(MlpParameters& params, AdamState& head_opt,
                            const Matrix& features, const Matrix& scores,
                            const std::vector<int>& labels, int steps,
                            bool include_soft_ece, int soft_ece_bins);

// Deterministic epoch shuffling used by every training loop.
std::vector<int> shuffled_indices(int n, Rng& rng);

Matrix one_hot(const std::vector<int>& labels, int classes);

}  // namespace ecl::model
