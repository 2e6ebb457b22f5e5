#include "ecl/model.hpp"

#include <cmath>

#include "ecl/losses.hpp"

namespace ecl::model {

using ad::NodeRef;
using ad::Tape;

namespace {

Matrix random_weights(int rows, int cols, Rng& rng) {
  Matrix w(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (double& v : w.data) v = rng.normal(0.0, scale);
  return w;
}

}  // namespace

MlpParameters MlpParameters::init(int input_dim, int hidden, int classes, Paradigm p,
                                  Rng& rng) {
  MlpParameters m;
  m.input_dim = input_dim;
  m.hidden = hidden;
  m.classes = classes;
  m.paradigm = p;
  m.w1 = random_weights(input_dim, hidden, rng);
  m.b1 = Matrix::zeros(1, hidden);
  m.w2 = random_weights(hidden, hidden, rng);
  m.b2 = Matrix::zeros(1, hidden);
  m.w3 = random_weights(hidden, classes, rng);
  m.b3 = Matrix::zeros(1, classes);
  m.wa = random_weights(hidden, m.aux_width(), rng);
  m.ba = Matrix::zeros(1, m.aux_width());
  return m;
}

std::vector<Matrix*> MlpParameters::all() {
  return {&w1, &b1, &w2, &b2, &w3, &b3, &wa, &ba};
}

std::vector<const Matrix*> MlpParameters::all() const {
  return {&w1, &b1, &w2, &b2, &w3, &b3, &wa, &ba};
}

std::vector<Matrix*> MlpParameters::backbone() { return {&w1, &b1, &w2, &b2}; }

std::vector<Matrix*> MlpParameters::aux_head_params() { return {&wa, &ba}; }

std::vector<std::string> MlpParameters::names() {
  return {"w1", "b1", "w2", "b2", "w3", "b3", "wa", "ba"};
}

ModelGraph ModelGraph::plant(Tape& tape, const MlpParameters& params) {
  ModelGraph g;
  g.tape = &tape;
  g.classes = params.classes;
  g.paradigm = params.paradigm;
  g.w1 = tape.leaf(params.w1);
  g.b1 = tape.leaf(params.b1);
  g.w2 = tape.leaf(params.w2);
  g.b2 = tape.leaf(params.b2);
  g.w3 = tape.leaf(params.w3);
  g.b3 = tape.leaf(params.b3);
  g.wa = tape.leaf(params.wa);
  g.ba = tape.leaf(params.ba);
  return g;
}

ModelGraph::Forward ModelGraph::classifier(const Matrix& batch_x) const {
  Tape& t = *tape;
  NodeRef x = t.leaf(batch_x);
  NodeRef h1 = t.relu(t.bias_add_row(t.matmul(x, w1), b1));
  NodeRef h2 = t.relu(t.bias_add_row(t.matmul(h1, w2), b2));
  Forward f;
  f.features = h2;
  f.logits = t.bias_add_row(t.matmul(h2, w3), b3);
  f.scores = t.row_softmax(f.logits);
  return f;
}

NodeRef ModelGraph::aux_head(NodeRef features, bool freeze_backbone) const {
  Tape& t = *tape;
  NodeRef f = freeze_backbone ? t.detach(features) : features;
  NodeRef z = t.bias_add_row(t.matmul(f, wa), ba);
  return paradigm == Paradigm::kTopLabel ? t.sigmoid(z) : t.row_softmax(z);
}

std::vector<NodeRef> ModelGraph::param_refs() const {
  return {w1, b1, w2, b2, w3, b3, wa, ba};
}

std::vector<Matrix> ModelGraph::parameter_grads() const {
  std::vector<Matrix> out;
  for (NodeRef r : param_refs()) out.push_back(tape->grad(r));
  return out;
}

EvalOut eval_classifier(const MlpParameters& params, const Matrix& batch_x) {
  Tape tape;
  ModelGraph g = ModelGraph::plant(tape, params);
  ModelGraph::Forward f = g.classifier(batch_x);
  return {tape.value(f.features), tape.value(f.logits), tape.value(f.scores)};
}

Matrix eval_aux_head(const MlpParameters& params, const Matrix& features) {
  Tape tape;
  ModelGraph g = ModelGraph::plant(tape, params);
  NodeRef f = tape.leaf(features);
  NodeRef z = tape.bias_add_row(tape.matmul(f, g.wa), g.ba);
  NodeRef out = params.paradigm == Paradigm::kTopLabel ? tape.sigmoid(z)
                                                       : tape.row_softmax(z);
  return tape.value(out);
}

AdamState AdamState::init(const std::vector<Matrix*>& params, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (const Matrix* p : params) {
    s.m.push_back(Matrix::zeros(p->rows, p->cols));
    s.v.push_back(Matrix::zeros(p->rows, p->cols));
  }
  return s;
}

void AdamState::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
  if (params.size() != grads.size() || params.size() != m.size())
    throw std::invalid_argument("adam: parameter/gradient count mismatch");
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Matrix& p = *params[t];
    const Matrix& g = grads[t];
    if (!p.same_shape(g)) throw std::invalid_argument("adam: gradient shape mismatch");
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      m[t].data[i] = beta1 * m[t].data[i] + (1.0 - beta1) * g.data[i];
      v[t].data[i] = beta2 * v[t].data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
      const double mhat = m[t].data[i] / bc1;
      const double vhat = v[t].data[i] / bc2;
      p.data[i] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
    }
  }
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

Matrix one_hot(const std::vector<int>& labels, int classes) {
  Matrix y(static_cast<int>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) y.at(static_cast<int>(i), labels[i]) = 1.0;
  return y;
}

namespace {

Matrix gather_rows(const Matrix& x, const std::vector<int>& idx, int begin, int end) {
  Matrix out(end - begin, x.cols);
  for (int r = begin; r < end; ++r)
    for (int c = 0; c < x.cols; ++c) out.at(r - begin, c) = x.at(idx[r], c);
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& idx,
                               int begin, int end) {
  std::vector<int> out(end - begin);
  for (int r = begin; r < end; ++r) out[r - begin] = labels[idx[r]];
  return out;
}

}  // namespace

void head_supervision_steps(MlpParameters& params, AdamState& head_opt,
                            const Matrix& features, const Matrix& scores,
                            const std::vector<int>& labels, int steps,
                            bool include_soft_ece, int soft_ece_bins) {
  Matrix correct(features.rows, 1);
  for (int i = 0; i < features.rows; ++i)
    correct.data[i] = argmax_row(scores, i) == labels[i] ? 1.0 : 0.0;
  const loss::AnchorGrid ece_grid =
      loss::AnchorGrid::scalar_grid(Paradigm::kTopLabel, soft_ece_bins);

  for (int s = 0; s < steps; ++s) {
    Tape tape;
    NodeRef f = tape.leaf(features);
    NodeRef wa = tape.leaf(params.wa);
    NodeRef ba = tape.leaf(params.ba);
    NodeRef z = tape.bias_add_row(tape.matmul(f, wa), ba);
    NodeRef total;
    if (params.paradigm == Paradigm::kTopLabel) {
      NodeRef q = tape.sigmoid(z);
      total = loss::binary_cross_entropy(tape, q, correct);
      if (include_soft_ece)
        total = tape.add(total, loss::soft_ece(tape, q, correct, ece_grid));
    } else {
      NodeRef p = tape.row_softmax(z);
      total = loss::cross_entropy(
          tape, p, one_hot(labels, static_cast<int>(tape.value(p).cols)));
      if (include_soft_ece) {
        const Matrix& pv = tape.value(p);
        std::vector<int> pred(pv.rows);
        Matrix own_correct(pv.rows, 1);
        for (int i = 0; i < pv.rows; ++i) {
          pred[i] = argmax_row(pv, i);
          own_correct.data[i] = pred[i] == labels[i] ? 1.0 : 0.0;
        }
        NodeRef conf = tape.take_cols(p, pred);
        total = tape.add(total, loss::soft_ece(tape, conf, own_correct, ece_grid));
      }
    }
    if (!std::isfinite(tape.value(total).data[0]))
      throw TrainingDivergence("head_supervision_steps: non-finite loss");
    tape.backward(total);
    head_opt.step({&params.wa, &params.ba}, {tape.grad(wa), tape.grad(ba)});
  }
}

MlpParameters train_source_classifier(const Matrix& source_x,
                                      const std::vector<int>& source_labels,
                                      int classes, int hidden, Paradigm paradigm,
                                      const TrainConfig& config, TrainLog* log) {
  Rng base(config.seed);
  Rng init_rng = base.substream(0);
  Rng order_rng = base.substream(1);
  MlpParameters params =
      MlpParameters::init(source_x.cols, hidden, classes, paradigm, init_rng);
  std::vector<Matrix*> classifier_params = {&params.w1, &params.b1, &params.w2,
                                            &params.b2, &params.w3, &params.b3};
  AdamState opt = AdamState::init(classifier_params, config.learning_rate);
  AdamState head_opt = AdamState::init(params.aux_head_params(), config.learning_rate);
  const int n = source_x.rows;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<int> order = shuffled_indices(n, order_rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int stop = std::min(n, start + config.batch_size);
      const Matrix xb = gather_rows(source_x, order, start, stop);
      const std::vector<int> yb = gather_labels(source_labels, order, start, stop);

      Tape tape;
      ModelGraph g = ModelGraph::plant(tape, params);
      ModelGraph::Forward fwd = g.classifier(xb);
      NodeRef ce = loss::cross_entropy(tape, fwd.scores, one_hot(yb, classes));

      const double loss_value = tape.value(ce).data[0];
      if (!std::isfinite(loss_value))
        throw TrainingDivergence("train_source_classifier: non-finite loss");
      epoch_loss += loss_value;
      ++batches;

      tape.backward(ce);
      opt.step(classifier_params,
               {tape.grad(g.w1), tape.grad(g.b1), tape.grad(g.w2), tape.grad(g.b2),
                tape.grad(g.w3), tape.grad(g.b3)});
      head_supervision_steps(params, head_opt, tape.value(fwd.features),
                             tape.value(fwd.scores), yb, config.head_steps,
                             /*include_soft_ece=*/false, 15);
    }
    if (log != nullptr) log->epoch_loss.push_back(epoch_loss / batches);
  }
  return params;
}

MlpParameters calibrate_aux_head(const MlpParameters& params, const Matrix& source_x,
                                 const std::vector<int>& source_labels,
                                 const TrainConfig& config, int soft_ece_bins,
                                 TrainLog* log) {
  MlpParameters out = params;
  Rng order_rng = Rng(config.seed).substream(2);
  AdamState opt = AdamState::init(out.aux_head_params(), config.learning_rate);
  const loss::AnchorGrid grid =
      loss::AnchorGrid::scalar_grid(Paradigm::kTopLabel, soft_ece_bins);
  const int n = source_x.rows;

  // The head's Soft-ECE on a batch: binary heads score against classifier
  // correctness, K-class heads against their own top-label correctness.
  auto head_soft_ece = [&](Tape& tape, const MlpParameters& params, const Matrix& xb,
                           const std::vector<int>& yb) {
    ModelGraph g = ModelGraph::plant(tape, params);
    ModelGraph::Forward fwd = g.classifier(xb);
    NodeRef aux = g.aux_head(fwd.features, /*freeze_backbone=*/true);
    NodeRef confidence;
    Matrix correct(static_cast<int>(yb.size()), 1);
    if (params.paradigm == Paradigm::kTopLabel) {
      confidence = aux;
      const Matrix& s = tape.value(fwd.scores);
      for (int i = 0; i < s.rows; ++i)
        correct.data[i] = argmax_row(s, i) == yb[i] ? 1.0 : 0.0;
    } else {
      const Matrix& p = tape.value(aux);
      std::vector<int> pred(p.rows);
      for (int i = 0; i < p.rows; ++i) {
        pred[i] = argmax_row(p, i);
        correct.data[i] = pred[i] == yb[i] ? 1.0 : 0.0;
      }
      confidence = tape.take_cols(aux, pred);
    }
    struct Out {
      NodeRef loss;
      ModelGraph graph;
    };
    return Out{loss::soft_ece(tape, confidence, correct, grid), g};
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<int> order = shuffled_indices(n, order_rng);
    for (int start = 0; start < n; start += config.batch_size) {
      const int stop = std::min(n, start + config.batch_size);
      const Matrix xb = gather_rows(source_x, order, start, stop);
      const std::vector<int> yb = gather_labels(source_labels, order, start, stop);

      Tape tape;
      auto step = head_soft_ece(tape, out, xb, yb);
      const double loss_value = tape.value(step.loss).data[0];
      if (!std::isfinite(loss_value))
        throw TrainingDivergence("calibrate_aux_head: non-finite loss");
      tape.backward(step.loss);
      opt.step(out.aux_head_params(), {tape.grad(step.graph.wa), tape.grad(step.graph.ba)});
    }
    if (log != nullptr) {
      // Full source-set value: the per-batch estimates are too noisy to log.
      Tape tape;
      auto whole = head_soft_ece(tape, out, source_x, source_labels);
      log->epoch_loss.push_back(tape.value(whole.loss).data[0]);
    }
  }
  return out;
}

}  // namespace ecl::model
