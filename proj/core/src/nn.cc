// Copyright 2026 The ldpdl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ldpdl/nn.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <iostream>
#include <istream>
#include <ostream>

#include "absl/strings/str_format.h"

namespace ldpdl {
namespace {

absl::Status CheckWidths(absl::Span<const int> widths) {
  if (widths.size() < 2) {
    return absl::InvalidArgumentError(
        "an MLP needs at least an input and an output width");
  }
  for (int w : widths) {
    if (w <= 0) {
      return absl::InvalidArgumentError(
          absl::StrFormat("layer widths must be positive, got %d", w));
    }
  }
  return absl::OkStatus();
}

DenseLayer ZeroLayer(int in, int out) {
  return DenseLayer{in, out, std::vector<double>(static_cast<size_t>(in) * out),
                    std::vector<double>(out)};
}

std::vector<DenseLayer> ZeroLayersLike(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> zeros;
  zeros.reserve(layers.size());
  for (const DenseLayer& l : layers) zeros.push_back(ZeroLayer(l.in, l.out));
  return zeros;
}

size_t FlatCount(const std::vector<DenseLayer>& layers) {
  size_t n = 0;
  for (const DenseLayer& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

template <typename Layers>
auto& FlatAt(Layers& layers, size_t index) {
  for (auto& l : layers) {
    if (index < l.weights.size()) return l.weights[index];
    index -= l.weights.size();
    if (index < l.bias.size()) return l.bias[index];
    index -= l.bias.size();
  }
  return layers.back().bias.back();
}

absl::Status CheckFinite(absl::Span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("%s contains a non-finite value", what));
    }
  }
  return absl::OkStatus();
}

void SoftmaxInto(absl::Span<const double> z, double temperature,
                 std::vector<double>& out) {
  out.resize(z.size());
  const double max_z = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (size_t j = 0; j < z.size(); ++j) {
    out[j] = std::exp((z[j] - max_z) / temperature);
    total += out[j];
  }
  for (double& p : out) p /= total;
}

double CrossEntropyUnchecked(absl::Span<const double> target,
                             absl::Span<const double> pred) {
  double loss = 0.0;
  for (size_t j = 0; j < target.size(); ++j) {
    if (target[j] == 0.0) continue;
    loss -= target[j] * std::log(std::max(pred[j], kLogFloor));
  }
  return loss;
}

// Adds d H(target, softmax(z / T)) / dz to `grad`, scaled by `weight`.
// Classes whose predicted probability sits below the log floor contribute a
// constant to the loss and are excluded, so this is the exact gradient of the
// floored cross-entropy.
void AddCrossEntropyGrad(absl::Span<const double> target,
                         absl::Span<const double> pred, double temperature,
                         double weight, std::vector<double>& grad) {
  double active_mass = 0.0;
  for (size_t j = 0; j < target.size(); ++j) {
    if (pred[j] >= kLogFloor) active_mass += target[j];
  }
  const double scale = weight / temperature;
  for (size_t j = 0; j < target.size(); ++j) {
    const double own = pred[j] >= kLogFloor ? target[j] : 0.0;
    grad[j] += scale * (pred[j] * active_mass - own);
  }
}

// Buffers reused across examples during back-propagation.
struct Workspace {
  // inputs[l] is the input to layer l; pre[l] is its affine output.
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
  std::vector<double> delta;
  std::vector<double> delta_prev;
  std::vector<double> scratch_a;
  std::vector<double> scratch_b;
  std::vector<double> scratch_c;
  std::vector<double> scratch_d;
};

void ForwardInto(const std::vector<DenseLayer>& layers,
                 absl::Span<const double> x, Workspace& ws) {
  ws.inputs.resize(layers.size());
  ws.pre.resize(layers.size());
  ws.inputs[0].assign(x.begin(), x.end());
  for (size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    std::vector<double>& a = ws.pre[l];
    a.assign(layer.bias.begin(), layer.bias.end());
    const std::vector<double>& h = ws.inputs[l];
    for (int o = 0; o < layer.out; ++o) {
      const double* w = layer.weights.data() + static_cast<size_t>(o) * layer.in;
      double acc = a[o];
      for (int i = 0; i < layer.in; ++i) acc += w[i] * h[i];
      a[o] = acc;
    }
    if (l + 1 < layers.size()) {
      std::vector<double>& next = ws.inputs[l + 1];
      next.resize(layer.out);
      for (int o = 0; o < layer.out; ++o) next[o] = std::max(0.0, a[o]);
    }
  }
}

// Back-propagates dL/dlogits (already in ws.delta) and accumulates into grad.
void BackwardInto(const std::vector<DenseLayer>& layers, Workspace& ws,
                  std::vector<DenseLayer>& grad) {
  for (size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    DenseLayer& g = grad[l];
    const std::vector<double>& h = ws.inputs[l];
    for (int o = 0; o < layer.out; ++o) {
      const double d = ws.delta[o];
      if (d == 0.0) continue;
      g.bias[o] += d;
      double* gw = g.weights.data() + static_cast<size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) gw[i] += d * h[i];
    }
    if (l == 0) break;
    ws.delta_prev.assign(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = ws.delta[o];
      if (d == 0.0) continue;
      const double* w = layer.weights.data() + static_cast<size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) ws.delta_prev[i] += w[i] * d;
    }
    const std::vector<double>& pre = ws.pre[l - 1];
    for (int i = 0; i < layer.in; ++i) {
      if (pre[i] <= 0.0) ws.delta_prev[i] = 0.0;
    }
    std::swap(ws.delta, ws.delta_prev);
  }
}

void ScaleLayers(std::vector<DenseLayer>& layers, double factor) {
  for (DenseLayer& l : layers) {
    for (double& w : l.weights) w *= factor;
    for (double& b : l.bias) b *= factor;
  }
}

// Sets ws.delta to the gradient of the distillation loss w.r.t. the student
// logits held in ws.pre.back().
void KdLogitGrad(absl::Span<const double> teacher, const DistillationConfig& cfg,
                 Workspace& ws) {
  const std::vector<double>& student = ws.pre.back();
  ws.delta.assign(student.size(), 0.0);
  if (cfg.alpha != 0.0) {
    SoftmaxInto(teacher, 1.0, ws.scratch_a);
    SoftmaxInto(student, 1.0, ws.scratch_b);
    AddCrossEntropyGrad(ws.scratch_a, ws.scratch_b, 1.0, cfg.alpha, ws.delta);
  }
  if (cfg.beta != 0.0) {
    SoftmaxInto(teacher, cfg.tau, ws.scratch_c);
    SoftmaxInto(student, cfg.tau, ws.scratch_d);
    AddCrossEntropyGrad(ws.scratch_c, ws.scratch_d, cfg.tau, cfg.beta,
                        ws.delta);
  }
}

absl::Status CheckExampleShape(const MlpModel& model, size_t width,
                               size_t teacher_k, size_t i) {
  if (width != static_cast<size_t>(model.input_width())) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "example %d has %d features, model expects %d", i, width,
        model.input_width()));
  }
  if (teacher_k != static_cast<size_t>(model.class_count())) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "example %d has %d target classes, model has %d", i, teacher_k,
        model.class_count()));
  }
  return absl::OkStatus();
}

void WriteU32(std::ostream& out, uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

void WriteF64(std::ostream& out, double value) {
  const uint64_t bits = std::bit_cast<uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>(bits >> (56 - 8 * i));
  out.write(bytes, 8);
}

bool ReadU32(std::istream& in, uint32_t& v) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
  v = (uint32_t{bytes[0]} << 24) | (uint32_t{bytes[1]} << 16) |
      (uint32_t{bytes[2]} << 8) | uint32_t{bytes[3]};
  return true;
}

bool ReadF64(std::istream& in, double& v) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) return false;
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits = (bits << 8) | bytes[i];
  v = std::bit_cast<double>(bits);
  return true;
}

constexpr char kCheckpointMagic[4] = {'L', 'D', 'P', 'M'};
constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

absl::StatusOr<MlpModel> MlpModel::Create(absl::Span<const int> widths,
                                          Rng& rng) {
  if (absl::Status s = CheckWidths(widths); !s.ok()) return s;
  std::vector<DenseLayer> layers;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer = ZeroLayer(widths[l], widths[l + 1]);
    const double limit = std::sqrt(6.0 / widths[l]);
    for (double& w : layer.weights) w = (2.0 * rng.Uniform() - 1.0) * limit;
    layers.push_back(std::move(layer));
  }
  return MlpModel(std::move(layers));
}

absl::StatusOr<MlpModel> MlpModel::Zeros(absl::Span<const int> widths) {
  if (absl::Status s = CheckWidths(widths); !s.ok()) return s;
  std::vector<DenseLayer> layers;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    layers.push_back(ZeroLayer(widths[l], widths[l + 1]));
  }
  return MlpModel(std::move(layers));
}

absl::StatusOr<MlpModel> MlpModel::FromLayers(std::vector<DenseLayer> layers) {
  if (layers.empty()) return absl::InvalidArgumentError("model has no layers");
  for (size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    if (layer.in <= 0 || layer.out <= 0 ||
        layer.weights.size() != static_cast<size_t>(layer.in) * layer.out ||
        layer.bias.size() != static_cast<size_t>(layer.out)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("layer %d has inconsistent shapes", l));
    }
    if (l > 0 && layers[l - 1].out != layer.in) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "layer %d expects %d inputs but layer %d produces %d", l, layer.in,
          l - 1, layers[l - 1].out));
    }
    if (absl::Status s = CheckFinite(layer.weights, "weights"); !s.ok()) return s;
    if (absl::Status s = CheckFinite(layer.bias, "bias"); !s.ok()) return s;
  }
  return MlpModel(std::move(layers));
}

size_t MlpModel::parameter_count() const { return FlatCount(layers_); }
double MlpModel::parameter(size_t index) const { return FlatAt(layers_, index); }
void MlpModel::set_parameter(size_t index, double value) {
  FlatAt(layers_, index) = value;
}

void MlpModel::ApplyGradient(const MlpGradient& gradient,
                             double learning_rate) {
  for (size_t l = 0; l < layers_.size(); ++l) {
    DenseLayer& layer = layers_[l];
    const DenseLayer& g = gradient.layers[l];
    for (size_t i = 0; i < layer.weights.size(); ++i) {
      layer.weights[i] -= learning_rate * g.weights[i];
    }
    for (size_t i = 0; i < layer.bias.size(); ++i) {
      layer.bias[i] -= learning_rate * g.bias[i];
    }
  }
}

size_t MlpGradient::parameter_count() const { return FlatCount(layers); }
double MlpGradient::parameter(size_t index) const {
  return FlatAt(layers, index);
}

absl::Status DistillationConfig::Validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta > 0.0)) {
    return absl::InvalidArgumentError(
        "distillation weights need alpha >= 0, beta >= 0, alpha + beta > 0");
  }
  if (!(tau > 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("distillation temperature must exceed 1, got %g", tau));
  }
  if (!(learning_rate > 0.0) || batch_size <= 0 || epochs <= 0) {
    return absl::InvalidArgumentError(
        "distillation learning rate, batch size and epochs must be positive");
  }
  return absl::OkStatus();
}

absl::Status TrainConfig::Validate() const {
  if (!(learning_rate > 0.0) || batch_size <= 0 || epochs < 0) {
    return absl::InvalidArgumentError(
        "training needs a positive learning rate and batch size, and "
        "nonnegative epochs");
  }
  return absl::OkStatus();
}

absl::StatusOr<SoftLabel> SoftmaxT(const Logits& z, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("temperature must be positive, got %g", temperature));
  }
  if (z.values.empty()) return absl::InvalidArgumentError("empty logits");
  if (absl::Status s = CheckFinite(z.values, "logits"); !s.ok()) {
    return absl::OutOfRangeError(s.message());
  }
  SoftLabel out;
  SoftmaxInto(z.values, temperature, out.probs);
  return out;
}

absl::StatusOr<double> CrossEntropy(const SoftLabel& target,
                                    const SoftLabel& pred) {
  if (target.k() != pred.k()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "cross-entropy of %d-class target against %d-class prediction",
        target.k(), pred.k()));
  }
  return CrossEntropyUnchecked(target.probs, pred.probs);
}

double Entropy(const SoftLabel& p) {
  double h = 0.0;
  for (double q : p.probs) {
    if (q > 0.0) h -= q * std::log(q);
  }
  return h;
}

absl::StatusOr<double> KdLoss(const Logits& teacher, const Logits& student,
                              const DistillationConfig& cfg) {
  if (teacher.k() != student.k()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "teacher has %d classes, student has %d", teacher.k(), student.k()));
  }
  absl::StatusOr<SoftLabel> t1 = SoftmaxT(teacher, 1.0);
  absl::StatusOr<SoftLabel> s1 = SoftmaxT(student, 1.0);
  absl::StatusOr<SoftLabel> tt = SoftmaxT(teacher, cfg.tau);
  absl::StatusOr<SoftLabel> st = SoftmaxT(student, cfg.tau);
  for (const auto* r : {&t1, &s1, &tt, &st}) {
    if (!r->ok()) return r->status();
  }
  return cfg.alpha * CrossEntropyUnchecked(t1->probs, s1->probs) +
         cfg.beta * CrossEntropyUnchecked(tt->probs, st->probs);
}

absl::StatusOr<double> KdLossSupervised(const SoftLabel& hard_label,
                                        const Logits& teacher,
                                        const Logits& student,
                                        const DistillationConfig& cfg) {
  if (hard_label.k() != student.k() || teacher.k() != student.k()) {
    return absl::InvalidArgumentError(
        "label, teacher and student must share the class count");
  }
  int ones = 0;
  for (double y : hard_label.probs) {
    if (std::abs(y - 1.0) <= 1e-9) {
      ++ones;
    } else if (std::abs(y) > 1e-9) {
      return absl::InvalidArgumentError("hard label is not one-hot");
    }
  }
  if (ones != 1) return absl::InvalidArgumentError("hard label is not one-hot");
  absl::StatusOr<SoftLabel> s1 = SoftmaxT(student, 1.0);
  absl::StatusOr<SoftLabel> tt = SoftmaxT(teacher, cfg.tau);
  absl::StatusOr<SoftLabel> st = SoftmaxT(student, cfg.tau);
  for (const auto* r : {&s1, &tt, &st}) {
    if (!r->ok()) return r->status();
  }
  return cfg.alpha * CrossEntropyUnchecked(hard_label.probs, s1->probs) +
         cfg.beta * CrossEntropyUnchecked(tt->probs, st->probs);
}

absl::StatusOr<Logits> Forward(const MlpModel& model,
                               absl::Span<const double> x) {
  if (x.size() != static_cast<size_t>(model.input_width())) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "input has %d features, model expects %d", x.size(),
        model.input_width()));
  }
  Workspace ws;
  ForwardInto(model.layers(), x, ws);
  return Logits{std::move(ws.pre.back())};
}

int Predict(const MlpModel& model, absl::Span<const double> x) {
  Workspace ws;
  ForwardInto(model.layers(), x, ws);
  const std::vector<double>& z = ws.pre.back();
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double Accuracy(const MlpModel& model, const Matrix& features,
                absl::Span<const int> labels) {
  if (features.rows() == 0) return 0.0;
  Workspace ws;
  size_t correct = 0;
  for (size_t r = 0; r < features.rows(); ++r) {
    ForwardInto(model.layers(), features.row(r), ws);
    const std::vector<double>& z = ws.pre.back();
    const int predicted =
        static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (predicted == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(features.rows());
}

absl::StatusOr<MlpGradient> GradKd(const MlpModel& model,
                                   absl::Span<const DistillExample> batch,
                                   const DistillationConfig& cfg) {
  if (batch.empty()) return absl::InvalidArgumentError("empty batch");
  MlpGradient grad{ZeroLayersLike(model.layers())};
  Workspace ws;
  for (size_t i = 0; i < batch.size(); ++i) {
    const DistillExample& ex = batch[i];
    if (absl::Status s = CheckExampleShape(model, ex.features.size(),
                                           ex.teacher_logits.values.size(), i);
        !s.ok()) {
      return s;
    }
    ForwardInto(model.layers(), ex.features, ws);
    KdLogitGrad(ex.teacher_logits.values, cfg, ws);
    BackwardInto(model.layers(), ws, grad.layers);
  }
  ScaleLayers(grad.layers, 1.0 / static_cast<double>(batch.size()));
  return grad;
}

absl::StatusOr<MlpGradient> GradKdSupervised(
    const MlpModel& model, absl::Span<const SupervisedDistillExample> batch,
    const DistillationConfig& cfg) {
  if (batch.empty()) return absl::InvalidArgumentError("empty batch");
  MlpGradient grad{ZeroLayersLike(model.layers())};
  Workspace ws;
  for (size_t i = 0; i < batch.size(); ++i) {
    const SupervisedDistillExample& ex = batch[i];
    if (absl::Status s = CheckExampleShape(model, ex.features.size(),
                                           ex.teacher_logits.values.size(), i);
        !s.ok()) {
      return s;
    }
    if (ex.hard_label.probs.size() != ex.teacher_logits.values.size()) {
      return absl::InvalidArgumentError(
          absl::StrFormat("example %d: label width mismatch", i));
    }
    ForwardInto(model.layers(), ex.features, ws);
    const std::vector<double>& student = ws.pre.back();
    ws.delta.assign(student.size(), 0.0);
    SoftmaxInto(student, 1.0, ws.scratch_b);
    AddCrossEntropyGrad(ex.hard_label.probs, ws.scratch_b, 1.0, cfg.alpha,
                        ws.delta);
    SoftmaxInto(ex.teacher_logits.values, cfg.tau, ws.scratch_c);
    SoftmaxInto(student, cfg.tau, ws.scratch_d);
    AddCrossEntropyGrad(ws.scratch_c, ws.scratch_d, cfg.tau, cfg.beta,
                        ws.delta);
    BackwardInto(model.layers(), ws, grad.layers);
  }
  ScaleLayers(grad.layers, 1.0 / static_cast<double>(batch.size()));
  return grad;
}

absl::StatusOr<MlpModel> TrainSupervised(MlpModel model, const Matrix& features,
                                         absl::Span<const int> labels,
                                         const TrainConfig& cfg, Rng& rng) {
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  if (features.rows() == 0) {
    return absl::InvalidArgumentError("cannot train on an empty dataset");
  }
  if (features.rows() != labels.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%d feature rows but %d labels", features.rows(), labels.size()));
  }
  if (features.cols() != static_cast<size_t>(model.input_width())) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "dataset has %d features, model expects %d", features.cols(),
        model.input_width()));
  }
  const int k = model.class_count();
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "label %d at row %d is outside [0, %d)", labels[i], i, k));
    }
  }

  std::vector<size_t> order(features.rows());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  MlpGradient grad{ZeroLayersLike(model.layers())};
  Workspace ws;
  std::vector<double> one_hot(k, 0.0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.Shuffle(order);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      grad.layers = ZeroLayersLike(model.layers());
      for (size_t b = start; b < end; ++b) {
        const size_t row = order[b];
        ForwardInto(model.layers(), features.row(row), ws);
        ws.delta.assign(k, 0.0);
        SoftmaxInto(ws.pre.back(), 1.0, ws.scratch_b);
        one_hot[labels[row]] = 1.0;
        AddCrossEntropyGrad(one_hot, ws.scratch_b, 1.0, 1.0, ws.delta);
        one_hot[labels[row]] = 0.0;
        BackwardInto(model.layers(), ws, grad.layers);
      }
      ScaleLayers(grad.layers, 1.0 / static_cast<double>(end - start));
      model.ApplyGradient(grad, cfg.learning_rate);
    }
  }
  return model;
}

absl::StatusOr<MlpModel> TrainDistill(MlpModel model,
                                      absl::Span<const DistillExample> examples,
                                      const DistillationConfig& cfg, Rng& rng) {
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  if (examples.empty()) {
    std::cerr << "warning: distillation called with no query examples; "
                 "student left unchanged\n";
    return model;
  }
  for (size_t i = 0; i < examples.size(); ++i) {
    if (absl::Status s = CheckExampleShape(
            model, examples[i].features.size(),
            examples[i].teacher_logits.values.size(), i);
        !s.ok()) {
      return s;
    }
  }
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  MlpGradient grad;
  Workspace ws;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.Shuffle(order);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      grad.layers = ZeroLayersLike(model.layers());
      for (size_t b = start; b < end; ++b) {
        const DistillExample& ex = examples[order[b]];
        ForwardInto(model.layers(), ex.features, ws);
        KdLogitGrad(ex.teacher_logits.values, cfg, ws);
        BackwardInto(model.layers(), ws, grad.layers);
      }
      ScaleLayers(grad.layers, 1.0 / static_cast<double>(end - start));
      model.ApplyGradient(grad, cfg.learning_rate);
    }
  }
  return model;
}

void WriteCheckpoint(std::ostream& out, const MlpModel& model) {
  out.write(kCheckpointMagic, 4);
  WriteU32(out, kCheckpointVersion);
  WriteU32(out, static_cast<uint32_t>(model.layers().size()));
  for (const DenseLayer& layer : model.layers()) {
    WriteU32(out, static_cast<uint32_t>(layer.out));
    WriteU32(out, static_cast<uint32_t>(layer.in));
    for (double w : layer.weights) WriteF64(out, w);
    for (double b : layer.bias) WriteF64(out, b);
  }
}

absl::StatusOr<MlpModel> ReadCheckpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    return absl::InvalidArgumentError("checkpoint: bad magic");
  }
  uint32_t version = 0;
  uint32_t count = 0;
  if (!ReadU32(in, version) || version != kCheckpointVersion) {
    return absl::InvalidArgumentError("checkpoint: unsupported version");
  }
  if (!ReadU32(in, count) || count == 0 || count > 1024) {
    return absl::InvalidArgumentError("checkpoint: bad layer count");
  }
  std::vector<DenseLayer> layers;
  for (uint32_t l = 0; l < count; ++l) {
    uint32_t out = 0;
    uint32_t width = 0;
    if (!ReadU32(in, out) || !ReadU32(in, width) || out == 0 || width == 0 ||
        static_cast<uint64_t>(out) * width > (uint64_t{1} << 28)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("checkpoint: bad shape for layer %d", l));
    }
    DenseLayer layer = ZeroLayer(static_cast<int>(width), static_cast<int>(out));
    for (double& w : layer.weights) {
      if (!ReadF64(in, w)) return absl::InvalidArgumentError("checkpoint: truncated");
    }
    for (double& b : layer.bias) {
      if (!ReadF64(in, b)) return absl::InvalidArgumentError("checkpoint: truncated");
    }
    layers.push_back(std::move(layer));
  }
  return MlpModel::FromLayers(std::move(layers));
}

}  // namespace ldpdl
