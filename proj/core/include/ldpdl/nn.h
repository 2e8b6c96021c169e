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

#ifndef LDPDL_NN_H_
#define LDPDL_NN_H_

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "ldpdl/matrix.h"
#include "ldpdl/random.h"

namespace ldpdl {

// Floor applied to predicted probabilities before taking logarithms.
inline constexpr double kLogFloor = 1e-12;

// Affine layer; `weights` is out x in, row-major.
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpGradient;

// Feed-forward classifier: affine layers with a rectifier between hidden
// layers and a final affine layer producing k logits. Used for both teachers
// and students.
class MlpModel {
 public:
  // `widths` = {input, hidden..., k}. Weights use He-uniform initialization,
  // biases start at zero.
  static absl::StatusOr<MlpModel> Create(absl::Span<const int> widths,
                                         Rng& rng);
  // All-zero parameters with the given widths.
  static absl::StatusOr<MlpModel> Zeros(absl::Span<const int> widths);
  static absl::StatusOr<MlpModel> FromLayers(std::vector<DenseLayer> layers);

  int input_width() const { return layers_.front().in; }
  int class_count() const { return layers_.back().out; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Flat parameter view, ordered layer by layer (weights, then bias).
  size_t parameter_count() const;
  double parameter(size_t index) const;
  void set_parameter(size_t index, double value);

  // One SGD step: every parameter p becomes p - learning_rate * g.
  // `gradient` must have this model's shapes.
  void ApplyGradient(const MlpGradient& gradient, double learning_rate);

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  explicit MlpModel(std::vector<DenseLayer> layers)
      : layers_(std::move(layers)) {}
  std::vector<DenseLayer> layers_;
};

// Gradient with the same shapes as the model it was computed for.
struct MlpGradient {
  std::vector<DenseLayer> layers;

  size_t parameter_count() const;
  double parameter(size_t index) const;
};

// Pre-softmax scores.
struct Logits {
  std::vector<double> values;
  int k() const { return static_cast<int>(values.size()); }
  friend bool operator==(const Logits&, const Logits&) = default;
};

// Probability vector over k classes.
struct SoftLabel {
  std::vector<double> probs;
  int k() const { return static_cast<int>(probs.size()); }
  friend bool operator==(const SoftLabel&, const SoftLabel&) = default;
};

struct DistillationConfig {
  double alpha = 0.5;
  double beta = 0.5;
  double tau = 3.0;
  double learning_rate = 0.05;
  int batch_size = 32;
  int epochs = 20;

  absl::Status Validate() const;
};

struct TrainConfig {
  double learning_rate = 0.05;
  int batch_size = 32;
  int epochs = 20;

  absl::Status Validate() const;
};

// softmax(z / T), max-shifted.
absl::StatusOr<SoftLabel> SoftmaxT(const Logits& z, double temperature);

// -sum_j target_j * ln(max(pred_j, kLogFloor)).
absl::StatusOr<double> CrossEntropy(const SoftLabel& target,
                                    const SoftLabel& pred);

// Shannon entropy in nats (0 ln 0 = 0).
double Entropy(const SoftLabel& p);

// Distillation loss against aggregated teacher pseudo-logits:
//   alpha * H(s(z_t; 1), s(z_s; 1)) + beta * H(s(z_t; tau), s(z_s; tau)).
absl::StatusOr<double> KdLoss(const Logits& teacher, const Logits& student,
                              const DistillationConfig& cfg);

// Classic supervised distillation loss with a hard label:
//   alpha * H(y, s(z_s; 1)) + beta * H(s(z_t; tau), s(z_s; tau)).
absl::StatusOr<double> KdLossSupervised(const SoftLabel& hard_label,
                                        const Logits& teacher,
                                        const Logits& student,
                                        const DistillationConfig& cfg);

absl::StatusOr<Logits> Forward(const MlpModel& model,
                               absl::Span<const double> x);

// Index of the largest logit (first on ties).
int Predict(const MlpModel& model, absl::Span<const double> x);

// Fraction of rows of `features` whose prediction equals the label.
double Accuracy(const MlpModel& model, const Matrix& features,
                absl::Span<const int> labels);

struct DistillExample {
  std::vector<double> features;
  Logits teacher_logits;
};

struct SupervisedDistillExample {
  std::vector<double> features;
  SoftLabel hard_label;
  Logits teacher_logits;
};

// Exact gradient of the batch-mean KdLoss with respect to every parameter.
absl::StatusOr<MlpGradient> GradKd(const MlpModel& model,
                                   absl::Span<const DistillExample> batch,
                                   const DistillationConfig& cfg);

// Exact gradient of the batch-mean KdLossSupervised.
absl::StatusOr<MlpGradient> GradKdSupervised(
    const MlpModel& model, absl::Span<const SupervisedDistillExample> batch,
    const DistillationConfig& cfg);

// Mini-batch SGD on hard-label cross-entropy. Labels are class indices in
// [0, k).
absl::StatusOr<MlpModel> TrainSupervised(MlpModel model, const Matrix& features,
                                         absl::Span<const int> labels,
                                         const TrainConfig& cfg, Rng& rng);

// Mini-batch SGD on KdLoss. An empty example set returns the model unchanged
// and writes a warning to stderr.
absl::StatusOr<MlpModel> TrainDistill(MlpModel model,
                                      absl::Span<const DistillExample> examples,
                                      const DistillationConfig& cfg, Rng& rng);

// Binary checkpoint: "LDPM", u32 version, u32 layer count, then per layer
// u32 out, u32 in, out*in weights and out biases as IEEE-754 binary64. All
// integers and floats are big-endian.
void WriteCheckpoint(std::ostream& out, const MlpModel& model);
absl::StatusOr<MlpModel> ReadCheckpoint(std::istream& in);

}  // namespace ldpdl

#endif  // LDPDL_NN_H_
