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

#include "hierdex/deploy.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hierdex/parallel.h"

namespace hierdex {

Json FusionConfigToJson(const FusionConfig& c) {
  return {{"translation_gate", c.translation_gate},
          {"rotation_gate", c.rotation_gate},
          {"cameras", c.cameras}};
}

FusionConfig FusionConfigFromJson(const Json& j) {
  Json m = OverlayKeys(FusionConfigToJson(FusionConfig{}), j, "fusion");
  FusionConfig c;
  c.translation_gate = m["translation_gate"];
  c.rotation_gate = m["rotation_gate"];
  c.cameras = m["cameras"];
  if (!(c.translation_gate > 0 && c.rotation_gate > 0) || c.cameras < 1) {
    throw std::invalid_argument("fusion gates must be positive, cameras >= 1");
  }
  return c;
}

ObjectState FusePoses(std::span<const ObjectState> estimates,
                      const ObjectState& reference, const FusionConfig& c,
                      const ObjectState& previous) {
  if (estimates.empty()) throw std::invalid_argument("no pose estimates");
  Vec3 t = Vec3::Zero();
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  double joint = 0.0;
  int joints = 0, kept = 0;
  std::optional<Rot> anchor;
  for (const ObjectState& e : estimates) {
    if ((e.translation - reference.translation).norm() >= c.translation_gate ||
        QuatAngle(e.rotation, reference.rotation) >= c.rotation_gate) {
      continue;
    }
    if (!anchor) anchor = e.rotation;
    // q and -q are the same rotation; average on one hemisphere
    const double sign = anchor->Dot(e.rotation) < 0 ? -1.0 : 1.0;
    q += sign * Eigen::Vector4d(e.rotation.w(), e.rotation.x(),
                                e.rotation.y(), e.rotation.z());
    t += e.translation;
    if (e.joint_angle) {
      joint += *e.joint_angle;
      ++joints;
    }
    ++kept;
  }
  if (kept == 0) return previous;
  ObjectState out;
  out.translation = t / kept;
  out.rotation = Rot(q[0], q[1], q[2], q[3]);
  if (joints > 0) out.joint_angle = joint / joints;
  return out;
}

Json CameraNoiseToJson(const CameraNoise& c) {
  return {{"translation_sigma", c.translation_sigma},
          {"rotation_sigma", c.rotation_sigma},
          {"outlier_prob", c.outlier_prob},
          {"outlier_offset", c.outlier_offset}};
}

CameraNoise CameraNoiseFromJson(const Json& j) {
  Json m = OverlayKeys(CameraNoiseToJson(CameraNoise{}), j, "camera");
  CameraNoise c;
  c.translation_sigma = m["translation_sigma"];
  c.rotation_sigma = m["rotation_sigma"];
  c.outlier_prob = m["outlier_prob"];
  c.outlier_offset = m["outlier_offset"];
  if (c.translation_sigma < 0 || c.rotation_sigma < 0 || c.outlier_offset < 0 ||
      c.outlier_prob < 0 || c.outlier_prob > 1) {
    throw std::invalid_argument("camera noise out of range");
  }
  return c;
}

std::vector<ObjectState> SimulateCameras(const ObjectState& truth, int cameras,
                                         const CameraNoise& noise, Rng& rng) {
  std::vector<ObjectState> out;
  out.reserve(cameras);
  for (int k = 0; k < cameras; ++k) {
    ObjectState e = truth;
    Vec3 dt(rng.Normal(0, noise.translation_sigma),
            rng.Normal(0, noise.translation_sigma),
            rng.Normal(0, noise.translation_sigma));
    Vec3 dr(rng.Normal(0, noise.rotation_sigma),
            rng.Normal(0, noise.rotation_sigma),
            rng.Normal(0, noise.rotation_sigma));
    if (rng.Uniform(0, 1) < noise.outlier_prob) {
      Vec3 dir(rng.Normal(), rng.Normal(), rng.Normal());
      dt += noise.outlier_offset * dir.normalized();
    }
    e.translation += dt;
    e.rotation = Rot::FromRotationVector(dr) * e.rotation;
    out.push_back(e);
  }
  return out;
}

Vector EmaFilter(EmaState& state, const Vector& raw) {
  if (!(state.alpha > 0 && state.alpha <= 1)) {
    throw std::invalid_argument("ema alpha must lie in (0, 1]");
  }
  if (!state.previous || state.previous->size() != raw.size()) {
    state.previous = raw;
  } else {
    state.previous = state.alpha * raw + (1 - state.alpha) * *state.previous;
  }
  return *state.previous;
}

bool CheckReset(const ObjectState& pose, const ObjectState& goal_init) {
  return (pose.translation - goal_init.translation).norm() <= 0.03 &&
         QuatAngle(pose.rotation, goal_init.rotation) <= 0.5;
}

Json DistillConfigToJson(const DistillConfig& c) {
  return {{"iterations", c.iterations},
          {"labels_per_iteration", c.labels_per_iteration},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr}};
}

DistillConfig DistillConfigFromJson(const Json& j) {
  Json m = OverlayKeys(DistillConfigToJson(DistillConfig{}), j, "distill");
  DistillConfig c;
  c.iterations = m["iterations"];
  c.labels_per_iteration = m["labels_per_iteration"];
  c.epochs = m["epochs"];
  c.batch_size = m["batch_size"];
  c.lr = m["lr"];
  if (c.iterations < 1 || c.labels_per_iteration < 1 || c.epochs < 0 ||
      c.batch_size < 1 || !(c.lr > 0)) {
    throw std::invalid_argument("distill config out of range");
  }
  return c;
}

RolloutContext StudentContext(const RolloutContext& teacher_ctx) {
  RolloutContext s = teacher_ctx;
  s.obs_mode = ObsMode::kStudent;
  return s;
}

std::vector<double> StudentView(const RolloutContext& teacher_ctx,
                                std::span<const double> teacher_obs) {
  const ObsLayout l =
      MakeObsLayout(teacher_ctx.env.fingers, teacher_ctx.action_dim(),
                    teacher_ctx.window, ObsMode::kTeacher);
  if (static_cast<int>(teacher_obs.size()) != l.size) {
    throw std::invalid_argument("teacher observation has the wrong length");
  }
  // velocity is the trailing block
  return {teacher_obs.begin(), teacher_obs.begin() + l.velocity};
}

namespace {

struct Labels {
  std::vector<std::vector<double>> obs;
  std::vector<Vector> actions;
  double completion = 0.0;
};

double Mse(const Mlp& net, const Matrix& x, const Matrix& y) {
  if (x.cols() == 0) return 0.0;
  return (net.Forward(x) - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

Controller DaggerDistill(const RolloutContext& teacher_ctx,
                         const Controller& teacher, const TaskSampler& sampler,
                         const DistillConfig& config, Rng& rng,
                         std::vector<DistillStats>* log) {
  if (teacher_ctx.obs_mode != ObsMode::kTeacher ||
      teacher.obs_dim() != teacher_ctx.obs_dim()) {
    throw std::invalid_argument("teacher does not match its context");
  }
  const RolloutContext student_ctx = StudentContext(teacher_ctx);
  const int sdim = student_ctx.obs_dim();
  const int adim = teacher.action_dim();
  Controller student(teacher_ctx.ppo, sdim, adim);
  student.Init(rng);
  student.policy.log_std = teacher.policy.log_std;

  std::vector<std::vector<double>> all_obs;
  std::vector<Vector> all_actions;
  const int lanes = std::max(1, teacher_ctx.ppo.lanes);
  const int workers = WorkerCount(teacher_ctx.ppo.workers);

  for (int it = 0; it < config.iterations; ++it) {
    const double beta =
        config.iterations == 1
            ? 1.0
            : 1.0 - static_cast<double>(it) / (config.iterations - 1);
    const Rng round_rng = rng.Derive(it);
    int labeled = 0, episodes = 0;
    double completion = 0.0;
    while (labeled < config.labels_per_iteration) {
      std::vector<Labels> batch(lanes);
      ParallelFor(lanes, workers, [&](int k) {
        Rng erng = round_rng.Derive(episodes + k);
        EpisodeRunner run(teacher_ctx, sampler(erng));
        Labels& out = batch[k];
        while (!run.done()) {
          Vector target = teacher.MeanAction(run.obs());
          std::vector<double> view = StudentView(teacher_ctx, run.obs());
          if (static_cast<int>(view.size()) != sdim) {
            throw std::logic_error("student observation carries velocity");
          }
          Decision d;
          d.action = erng.Uniform(0, 1) < beta ? target
                                              : student.MeanAction(view);
          out.obs.push_back(std::move(view));
          out.actions.push_back(std::move(target));
          run.Apply(d);
        }
        out.completion = run.result().completion;
      });
      for (Labels& b : batch) {
        completion += b.completion;
        ++episodes;
        for (size_t i = 0; i < b.obs.size() &&
                           labeled < config.labels_per_iteration;
             ++i, ++labeled) {
          all_obs.push_back(std::move(b.obs[i]));
          all_actions.push_back(std::move(b.actions[i]));
        }
      }
    }

    const int n = static_cast<int>(all_obs.size());
    Matrix raw(sdim, n), y(adim, n);
    for (int i = 0; i < n; ++i) {
      raw.col(i) = Eigen::Map<const Vector>(all_obs[i].data(), sdim);
      y.col(i) = all_actions[i];
    }
    student.norm = RunningNorm(sdim);
    student.norm.Update(raw);
    const Matrix x = student.norm.Normalize(raw);

    DistillStats stats;
    stats.iteration = it;
    stats.beta = beta;
    stats.dataset_size = n;
    stats.mean_completion = completion / episodes;
    stats.mse_before = Mse(student.policy.mean, x, y);

    Mlp& net = student.policy.mean;
    Adam adam(net.param_count());
    AdamConfig ac;
    ac.lr = config.lr;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int e = 0; e < config.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng.engine());
      for (int start = 0; start < n; start += config.batch_size) {
        const int b = std::min(config.batch_size, n - start);
        Matrix xb(sdim, b), yb(adim, b);
        for (int j = 0; j < b; ++j) {
          xb.col(j) = x.col(order[start + j]);
          yb.col(j) = y.col(order[start + j]);
        }
        MlpCache cache;
        Matrix out = net.Forward(xb, &cache);
        Matrix dy = 2.0 * (out - yb) / static_cast<double>(yb.size());
        Vector grad = Vector::Zero(net.param_count());
        net.Backward(cache, dy, grad);
        adam.Step(net.params(), grad, ac);
      }
    }
    stats.mse_after = Mse(net, x, y);
    if (log) log->push_back(stats);
  }
  return student;
}

}  // namespace hierdex
