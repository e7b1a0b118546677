// Copyright 2026 The HierDex Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HIERDEX_NET_H_
#define HIERDEX_NET_H_

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hierdex/json_io.h"
#include "hierdex/rng.h"

namespace hierdex {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Fills v with U(-a, a), a = sqrt(6 / (fan_in + fan_out)), times scale.
void GlorotUniform(Eigen::Ref<Matrix> w, Rng& rng, double scale = 1.0);

// Intermediate activations kept by Mlp::Forward for the backward pass.
struct MlpCache {
  std::vector<Matrix> activations;  // input, then each layer's output
};

// Fully connected network, tanh hidden layers and a linear output. All
// weights and biases live in one flat vector; samples are matrix columns.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes);

  // Glorot-uniform weights, zero biases; the last layer is scaled.
  void Init(Rng& rng, double output_scale = 1.0);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& sizes() const { return sizes_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  int param_count() const { return static_cast<int>(params_.size()); }

  Eigen::Map<Matrix> weight(int l);
  Eigen::Map<const Matrix> weight(int l) const;
  Eigen::Map<Vector> bias(int l);
  Eigen::Map<const Vector> bias(int l) const;

  // x is input_size x batch. Throws std::invalid_argument on shape mismatch.
  Matrix Forward(const Matrix& x, MlpCache* cache = nullptr) const;
  Vector Forward(const Vector& x) const;

  // Adds d(sum of dy . y)/d(params) to grad and returns the input gradient.
  // The cache must come from Forward on the current parameters.
  Matrix Backward(const MlpCache& cache, const Matrix& dy,
                  Eigen::Ref<Vector> grad) const;

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;  // start of each layer's weights
  Vector params_;
};

struct AttentionCache {
  std::vector<Matrix> tokens, q, k, v, attn;
};

// Single-head self-attention over the columns of a dim x T token matrix.
// Output column i is sum_j softmax_j(q_i . k_j / sqrt(d)) v_j.
class Attention {
 public:
  Attention() = default;
  Attention(int token_dim, int model_dim);

  void Init(Rng& rng);

  int token_dim() const { return token_dim_; }
  int model_dim() const { return model_dim_; }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  int param_count() const { return static_cast<int>(params_.size()); }

  // One matrix per sample; returns model_dim x T per sample.
  std::vector<Matrix> Forward(const std::vector<Matrix>& tokens,
                              AttentionCache* cache = nullptr) const;
  // Accumulates parameter gradients, returns token gradients.
  std::vector<Matrix> Backward(const AttentionCache& cache,
                               const std::vector<Matrix>& dout,
                               Eigen::Ref<Vector> grad) const;

 private:
  Eigen::Map<const Matrix> W(int which) const;
  int token_dim_ = 0;
  int model_dim_ = 0;
  Vector params_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

Json AdamConfigToJson(const AdamConfig& c);
AdamConfig AdamConfigFromJson(const Json& j);

class Adam {
 public:
  Adam() = default;
  explicit Adam(int size) : m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

  // Bias-corrected update. A non-finite gradient leaves everything
  // untouched and returns false.
  bool Step(Eigen::Ref<Vector> params, const Vector& grad,
            const AdamConfig& c);
  int steps() const { return t_; }

 private:
  Vector m_, v_;
  int t_ = 0;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Diagonal Gaussian with a state-independent learnable log std.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(std::vector<int> sizes, double init_log_std = 0.0);

  void Init(Rng& rng, double output_scale = 0.01);
  int action_dim() const { return mean.output_size(); }
  int obs_dim() const { return mean.input_size(); }
  void ClampLogStd();

  Vector Mean(const Vector& obs) const { return mean.Forward(obs); }
  // Samples an action; returns its log-probability through log_prob.
  Vector Sample(const Vector& obs, Rng& rng, double* log_prob) const;
  double LogProb(const Vector& mean_action, const Vector& action) const;
  double Entropy() const;

  Mlp mean;
  Vector log_std;
};

// Running mean and variance with clipped normalization.
class RunningNorm {
 public:
  RunningNorm() = default;
  explicit RunningNorm(int dim);

  void Update(const Matrix& batch);  // dim x batch
  Vector Normalize(const Vector& x) const;
  Matrix Normalize(const Matrix& x) const;
  int dim() const { return static_cast<int>(mean_.size()); }
  double count() const { return count_; }

  Vector Pack() const;  // mean, var, count
  static RunningNorm Unpack(const Vector& packed);

 private:
  Vector mean_, var_;
  double count_ = 0.0;
};

// Named blocks of doubles saved as raw little-endian float64 plus a JSON
// sidecar (path + ".json") describing block names, sizes and metadata.
struct Checkpoint {
  Json meta = Json::object();
  std::vector<std::pair<std::string, Vector>> blocks;

  void Add(const std::string& name, const Vector& v) {
    blocks.emplace_back(name, v);
  }
  const Vector& Get(const std::string& name) const;
  void Save(const std::string& path) const;
  static Checkpoint Load(const std::string& path);
};

}  // namespace hierdex

#endif  // HIERDEX_NET_H_
