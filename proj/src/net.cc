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

#include "hierdex/net.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace hierdex {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void GlorotUniform(Eigen::Ref<Matrix> w, Rng& rng, double scale) {
  double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      w(i, j) = scale * rng.Uniform(-a, a);
    }
  }
}

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs >= 2 sizes");
  int total = 0;
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) {
      throw std::invalid_argument("Mlp layer sizes must be positive");
    }
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_ = Vector::Zero(total);
}

void Mlp::Init(Rng& rng, double output_scale) {
  for (int l = 0; l < layers(); ++l) {
    GlorotUniform(weight(l), rng, l + 1 == layers() ? output_scale : 1.0);
    bias(l).setZero();
  }
}

Eigen::Map<Matrix> Mlp::weight(int l) {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Matrix> Mlp::weight(int l) const {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Vector> Mlp::bias(int l) {
  return {params_.data() + offsets_[l] + sizes_[l] * sizes_[l + 1],
          sizes_[l + 1]};
}
Eigen::Map<const Vector> Mlp::bias(int l) const {
  return {params_.data() + offsets_[l] + sizes_[l] * sizes_[l + 1],
          sizes_[l + 1]};
}

Matrix Mlp::Forward(const Matrix& x, MlpCache* cache) const {
  if (x.rows() != input_size()) {
    throw std::invalid_argument("Mlp::Forward: input has " +
                                std::to_string(x.rows()) + " rows, expected " +
                                std::to_string(input_size()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  Matrix h = x;
  for (int l = 0; l < layers(); ++l) {
    Matrix z = weight(l) * h;
    z.colwise() += bias(l);
    if (l + 1 < layers()) z = z.array().tanh().matrix();
    h = std::move(z);
    if (cache) cache->activations.push_back(h);
  }
  return h;
}

Vector Mlp::Forward(const Vector& x) const {
  return Forward(Matrix(x)).col(0);
}

Matrix Mlp::Backward(const MlpCache& cache, const Matrix& dy,
                     Eigen::Ref<Vector> grad) const {
  if (static_cast<int>(cache.activations.size()) != layers() + 1 ||
      dy.rows() != output_size() ||
      dy.cols() != cache.activations.back().cols()) {
    throw std::invalid_argument("Mlp::Backward: cache/gradient mismatch");
  }
  Matrix delta = dy;
  for (int l = layers() - 1; l >= 0; --l) {
    if (l + 1 < layers()) {
      const Matrix& out = cache.activations[l + 1];
      delta = (delta.array() * (1.0 - out.array().square())).matrix();
    }
    const Matrix& in = cache.activations[l];
    Eigen::Map<Matrix> gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
    Eigen::Map<Vector> gb(grad.data() + offsets_[l] + sizes_[l] * sizes_[l + 1],
                          sizes_[l + 1]);
    gw.noalias() += delta * in.transpose();
    gb += delta.rowwise().sum();
    delta = weight(l).transpose() * delta;
  }
  return delta;
}

Attention::Attention(int token_dim, int model_dim)
    : token_dim_(token_dim), model_dim_(model_dim) {
  if (token_dim < 1 || model_dim < 1) {
    throw std::invalid_argument("Attention dims must be positive");
  }
  params_ = Vector::Zero(3 * token_dim * model_dim);
}

void Attention::Init(Rng& rng) {
  for (int i = 0; i < 3; ++i) {
    Eigen::Map<Matrix> w(params_.data() + i * token_dim_ * model_dim_,
                         model_dim_, token_dim_);
    GlorotUniform(w, rng);
  }
}

Eigen::Map<const Matrix> Attention::W(int which) const {
  return {params_.data() + which * token_dim_ * model_dim_, model_dim_,
          token_dim_};
}

std::vector<Matrix> Attention::Forward(const std::vector<Matrix>& tokens,
                                       AttentionCache* cache) const {
  const double scale = 1.0 / std::sqrt(static_cast<double>(model_dim_));
  std::vector<Matrix> out;
  out.reserve(tokens.size());
  if (cache) *cache = AttentionCache{};
  for (const Matrix& x : tokens) {
    if (x.rows() != token_dim_) {
      throw std::invalid_argument("Attention::Forward: token size mismatch");
    }
    Matrix q = W(0) * x, k = W(1) * x, v = W(2) * x;
    Matrix s = scale * (q.transpose() * k);  // T x T, row i attends from i
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      double m = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - m).exp().matrix();
      s.row(i) /= s.row(i).sum();
    }
    out.push_back(v * s.transpose());
    if (cache) {
      cache->tokens.push_back(x);
      cache->q.push_back(std::move(q));
      cache->k.push_back(std::move(k));
      cache->v.push_back(std::move(v));
      cache->attn.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Matrix> Attention::Backward(const AttentionCache& cache,
                                        const std::vector<Matrix>& dout,
                                        Eigen::Ref<Vector> grad) const {
  if (dout.size() != cache.tokens.size()) {
    throw std::invalid_argument("Attention::Backward: batch mismatch");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(model_dim_));
  const int block = token_dim_ * model_dim_;
  Eigen::Map<Matrix> gq(grad.data(), model_dim_, token_dim_);
  Eigen::Map<Matrix> gk(grad.data() + block, model_dim_, token_dim_);
  Eigen::Map<Matrix> gv(grad.data() + 2 * block, model_dim_, token_dim_);
  std::vector<Matrix> dx;
  dx.reserve(dout.size());
  for (size_t n = 0; n < dout.size(); ++n) {
    const Matrix& a = cache.attn[n];
    const Matrix& x = cache.tokens[n];
    Matrix dv = dout[n] * a;                      // d x T
    Matrix da = dout[n].transpose() * cache.v[n];  // T x T
    Vector row = (da.array() * a.array()).rowwise().sum();
    Matrix ds = (a.array() * (da.colwise() - row).array()).matrix();
    Matrix dq = scale * (cache.k[n] * ds.transpose());
    Matrix dk = scale * (cache.q[n] * ds);
    gq.noalias() += dq * x.transpose();
    gk.noalias() += dk * x.transpose();
    gv.noalias() += dv * x.transpose();
    dx.push_back(W(0).transpose() * dq + W(1).transpose() * dk +
                 W(2).transpose() * dv);
  }
  return dx;
}

Json AdamConfigToJson(const AdamConfig& c) {
  return {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

AdamConfig AdamConfigFromJson(const Json& j) {
  AdamConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "lr") c.lr = value.get<double>();
    else if (key == "beta1") c.beta1 = value.get<double>();
    else if (key == "beta2") c.beta2 = value.get<double>();
    else if (key == "eps") c.eps = value.get<double>();
    else throw std::invalid_argument("unknown adam key: " + key);
  }
  return c;
}

bool Adam::Step(Eigen::Ref<Vector> params, const Vector& grad,
                const AdamConfig& c) {
  if (params.size() != grad.size() || m_.size() != grad.size()) {
    throw std::invalid_argument("Adam::Step: size mismatch");
  }
  if (!grad.allFinite()) return false;
  ++t_;
  m_ = c.beta1 * m_ + (1.0 - c.beta1) * grad;
  v_ = c.beta2 * v_ + (1.0 - c.beta2) * grad.cwiseAbs2();
  double b1 = 1.0 - std::pow(c.beta1, t_);
  double b2 = 1.0 - std::pow(c.beta2, t_);
  params.array() -=
      c.lr * (m_.array() / b1) / ((v_.array() / b2).sqrt() + c.eps);
  if (!params.allFinite()) {
    throw std::runtime_error("Adam::Step produced non-finite parameters");
  }
  return true;
}

GaussianPolicy::GaussianPolicy(std::vector<int> sizes, double init_log_std)
    : mean(std::move(sizes)) {
  log_std = Vector::Constant(mean.output_size(), init_log_std);
  ClampLogStd();
}

void GaussianPolicy::Init(Rng& rng, double output_scale) {
  mean.Init(rng, output_scale);
}

void GaussianPolicy::ClampLogStd() {
  log_std = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

Vector GaussianPolicy::Sample(const Vector& obs, Rng& rng,
                              double* log_prob) const {
  Vector mu = Mean(obs);
  Vector a(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    a[i] = mu[i] + std::exp(log_std[i]) * rng.Normal();
  }
  if (log_prob) *log_prob = LogProb(mu, a);
  return a;
}

double GaussianPolicy::LogProb(const Vector& mean_action,
                               const Vector& action) const {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < action.size(); ++i) {
    double z = (action[i] - mean_action[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - 0.5 * std::log(2.0 * M_PI);
  }
  return lp;
}

double GaussianPolicy::Entropy() const {
  return (log_std.array() + 0.5 * std::log(2.0 * M_PI * M_E)).sum();
}

RunningNorm::RunningNorm(int dim)
    : mean_(Vector::Zero(dim)), var_(Vector::Ones(dim)) {}

void RunningNorm::Update(const Matrix& batch) {
  if (batch.cols() == 0) return;
  if (batch.rows() != mean_.size()) {
    throw std::invalid_argument("RunningNorm::Update: size mismatch");
  }
  double n = static_cast<double>(batch.cols());
  Vector bm = batch.rowwise().mean();
  Vector bv = (batch.colwise() - bm).array().square().rowwise().mean();
  if (count_ == 0.0) {
    mean_ = bm;
    var_ = bv;
    count_ = n;
    return;
  }
  double total = count_ + n;
  Vector delta = bm - mean_;
  mean_ += delta * (n / total);
  var_ = (var_ * count_ + bv * n +
          delta.cwiseAbs2() * (count_ * n / total)) / total;
  count_ = total;
}

Vector RunningNorm::Normalize(const Vector& x) const {
  return ((x - mean_).array() / (var_.array() + 1e-8).sqrt())
      .cwiseMax(-10.0)
      .cwiseMin(10.0);
}

Matrix RunningNorm::Normalize(const Matrix& x) const {
  Matrix out = x.colwise() - mean_;
  out = out.array().colwise() / (var_.array() + 1e-8).sqrt();
  return out.cwiseMax(-10.0).cwiseMin(10.0);
}

Vector RunningNorm::Pack() const {
  Vector p(2 * mean_.size() + 1);
  p << mean_, var_, count_;
  return p;
}

RunningNorm RunningNorm::Unpack(const Vector& packed) {
  if (packed.size() % 2 != 1) {
    throw std::invalid_argument("RunningNorm::Unpack: bad size");
  }
  int dim = static_cast<int>(packed.size() / 2);
  RunningNorm r(dim);
  r.mean_ = packed.head(dim);
  r.var_ = packed.segment(dim, dim);
  r.count_ = packed[2 * dim];
  return r;
}

const Vector& Checkpoint::Get(const std::string& name) const {
  for (const auto& [n, v] : blocks) {
    if (n == name) return v;
  }
  throw std::out_of_range("checkpoint has no block " + name);
}

void Checkpoint::Save(const std::string& path) const {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write checkpoint " + path);
  Json index = Json::array();
  size_t offset = 0;
  for (const auto& [name, v] : blocks) {
    bin.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
    index.push_back({{"name", name}, {"offset", offset}, {"size", v.size()}});
    offset += v.size();
  }
  if (!bin) throw std::runtime_error("failed writing checkpoint " + path);
  std::ofstream side(path + ".json");
  side << Json{{"format", "float64-le"},
               {"blocks", index},
               {"total", offset},
               {"meta", meta}}
              .dump(2)
       << '\n';
  if (!side) throw std::runtime_error("cannot write sidecar " + path + ".json");
}

Checkpoint Checkpoint::Load(const std::string& path) {
  std::ifstream side(path + ".json");
  std::ifstream bin(path, std::ios::binary);
  if (!side || !bin) throw std::runtime_error("missing checkpoint " + path);
  Json j = Json::parse(side);
  Checkpoint c;
  c.meta = j.at("meta");
  Json index = j.at("blocks");
  for (const Json& b : index) {
    Vector v(b.at("size").get<Eigen::Index>());
    bin.read(reinterpret_cast<char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!bin) throw std::runtime_error("truncated checkpoint " + path);
    c.blocks.emplace_back(b.at("name").get<std::string>(), std::move(v));
  }
  if (bin.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("checkpoint " + path + " has trailing data");
  }
  return c;
}

}  // namespace hierdex
