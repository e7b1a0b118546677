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

// hierdex: data generation, training, evaluation and deployment tooling.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <tuple>

#include <CLI11.hpp>

#include "hierdex/config.h"

namespace fs = std::filesystem;
using namespace hierdex;

namespace {

struct Globals {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out = ".";
};

RunConfig Load(const Globals& g, bool workers = true) {
  RunConfig c = g.config.empty() ? RunConfig{} : LoadRunConfig(g.config);
  if (g.seed) c.seed = *g.seed;
  if (workers) ApplyWorkers(c);
  return c;
}

struct Layout {
  fs::path data, checkpoints, reports;
};

Layout Dirs(const Globals& g, const RunConfig& c) {
  const fs::path root(g.out);
  return {root / c.dataset_dir, root / c.checkpoint_dir, root / c.report_dir};
}

std::string Stamp(const RunConfig& c) {
  return "config_hash=" + RunConfigHash(c) + " seed=" + std::to_string(c.seed);
}

void Require(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) {
    throw std::runtime_error("missing " + what + ": " + p.string());
  }
}

DemoSet LoadData(const fs::path& dir) {
  Require(dir / "splits.json", "dataset");
  return LoadDemoSet(dir.string());
}

Planner LoadPlanner(const fs::path& p) {
  Require(p, "planner checkpoint");
  return Planner::FromCheckpoint(Checkpoint::Load(p.string()));
}

Controller LoadController(const fs::path& p) {
  Require(p, "controller checkpoint");
  return Controller::FromCheckpoint(Checkpoint::Load(p.string()));
}

void Save(Checkpoint ck, const RunConfig& c, const fs::path& p) {
  ck.meta["config_hash"] = RunConfigHash(c);
  ck.meta["seed"] = c.seed;
  fs::create_directories(p.parent_path());
  ck.Save(p.string());
  std::cout << "wrote " << p.string() << '\n';
}

double DeterministicCompletion(const RolloutContext& ctx, const Controller& c,
                               const TaskItem& item) {
  Rng rng(0);
  std::vector<EpisodeSetup> setups = {
      MakeSampler({item}, AugmentConfig{})(rng)};
  return RunEpisodes(ctx, setups, PolicyActor(c, false), 0)[0].completion;
}

// mode flag -> (control mode, fingertip reward coefficient)
std::pair<ControlMode, double> ParseMode(const std::string& mode,
                                         const PpoConfig& ppo) {
  if (mode == "ours") return {ControlMode::kHierarchical, 0.0};
  if (mode == "vanilla") return {ControlMode::kVanilla, 0.0};
  if (mode == "no_residual") return {ControlMode::kNoResidual, 0.0};
  if (mode == "fingertip") {
    return {ControlMode::kHierarchical,
            ppo.fingertip_reward_coef > 0 ? ppo.fingertip_reward_coef : 0.5};
  }
  throw std::invalid_argument("unknown mode: " + mode);
}

int GenData(const Globals& g) {
  RunConfig c = Load(g);
  Layout d = Dirs(g, c);
  Rng rng(c.seed);
  DemoSet set = GenDataset(DefaultCategories(), c.dataset, rng, c.env);
  SaveDemoSet(set, d.data.string(),
              {{"config_hash", RunConfigHash(c)}, {"seed", c.seed}});
  std::cout << "wrote " << set.size() << " demos to " << d.data.string()
            << '\n';
  return 0;
}

int TrainPlanner(const Globals& g, const std::string& data) {
  RunConfig c = Load(g);
  Layout d = Dirs(g, c);
  DemoSet set = LoadData(data.empty() ? d.data : fs::path(data));
  Rng rng(c.seed);
  TrainCurve curve;
  Planner p = TrainBc(set.Subset(Split::kTrained), c.planner, rng, &curve);
  Save(p.ToCheckpoint(), c, d.checkpoints / "planner.bin");
  fs::create_directories(d.reports);
  std::ofstream csv(d.reports / "planner_curve.csv");
  csv << "# " << Stamp(c) << "\nepoch,loss\n";
  csv.precision(17);
  csv << 0 << ',' << curve.initial_loss << '\n';
  for (size_t e = 0; e < curve.epoch_loss.size(); ++e) {
    csv << e + 1 << ',' << curve.epoch_loss[e] << '\n';
  }
  std::printf("loss %.5f -> %.5f\n", curve.initial_loss,
              curve.epoch_loss.empty() ? curve.initial_loss
                                       : curve.epoch_loss.back());
  return 0;
}

int EvalPlannerCmd(const Globals& g, const std::string& data,
                   const std::string& planner, const std::string& metric) {
  RunConfig c = Load(g);
  Layout d = Dirs(g, c);
  const OeMetric m = OeMetricFromName(metric);
  DemoSet set = LoadData(data.empty() ? d.data : fs::path(data));
  Planner p =
      LoadPlanner(planner.empty() ? d.checkpoints / "planner.bin" : fs::path(planner));
  std::vector<PlannerReport> reports;
  for (Split s : {Split::kTrained, Split::kUnseenTraj, Split::kUnseenObj}) {
    if (set.Indices(s).empty()) continue;
    reports.push_back(EvalPlanner(p, set, s, m));
    std::printf("%-12s TE/step %.3f cm  TE_cum %.2f cm  OE_cum %.3f\n",
                reports.back().split.c_str(), reports.back().te_per_step_cm,
                reports.back().te_cum_cm, reports.back().oe_cum);
  }
  fs::create_directories(d.reports);
  WritePlannerReportCsv(reports, (d.reports / "planner_eval.csv").string(),
                        Stamp(c));
  return 0;
}

int TrainControllerCmd(const Globals& g, const std::string& mode_name,
                       const std::string& data, const std::string& planner) {
  RunConfig c = Load(g);
  Layout d = Dirs(g, c);
  auto [mode, coef] = ParseMode(mode_name, c.ppo);
  DemoSet set = LoadData(data.empty() ? d.data : fs::path(data));
  std::optional<Planner> p;
  if (mode != ControlMode::kVanilla) {
    p = LoadPlanner(planner.empty() ? d.checkpoints / "planner.bin" : fs::path(planner));
  }
  RolloutContext ctx = MakeRolloutContext(c, p ? &*p : nullptr);
  ctx.ppo.mode = mode;
  ctx.ppo.fingertip_reward_coef = coef;
  const TaskItem item = ReferenceItem(set);
  std::vector<TrainLogRow> rows;
  Controller ctrl = TrainController(ctx, {item}, c.augment, c.seed,
                                    [&](const TrainLogRow& r) {
                                      rows.push_back(r);
                                      if (r.update % 10 == 0) {
                                        std::printf(
                                            "update %4d completion %.3f "
                                            "return %.2f\n",
                                            r.update, r.mean_completion,
                                            r.mean_return);
                                        std::fflush(stdout);
                                      }
                                    });
  Save(ctrl.ToCheckpoint(), c, d.checkpoints / ("controller_" + mode_name + ".bin"));
  fs::create_directories(d.reports);
  WriteTrainLogCsv(rows, (d.reports / ("train_" + mode_name + ".csv")).string(),
                   Stamp(c));
  std::printf("deterministic completion %.3f\n",
              DeterministicCompletion(ctx, ctrl, item));
  return 0;
}

int DalCmd(const Globals& g, const std::string& data,
           const std::string& planner, const std::string& controller) {
  RunConfig c = Load(g);
  Layout d = Dirs(g, c);
  DemoSet set = LoadData(data.empty() ? d.data : fs::path(data));
  DalState state{
      LoadPlanner(planner.empty() ? d.checkpoints / "planner.bin" : fs::path(planner)),
      LoadController(controller.empty() ? d.checkpoints / "controller_ours.bin"
                                        : fs::path(controller)),
      set.Subset(Split::kTrained)};
  RolloutContext ctx = MakeRolloutContext(c, &state.planner);
  Rng rng(c.seed);
  auto rows = DalRun(state, ctx, {ReferenceItem(set)}, c.dal, rng,
                     [](const DalIterationStats& s) {
                       std::printf("iter %d harvested %d/%d completion %.3f\n",
                                   s.iter, s.harvested, s.episodes,
                                   s.completion_mean);
                       std::fflush(stdout);
                     });
  Save(state.planner.ToCheckpoint(), c, d.checkpoints / "planner_dal.bin");
  Save(state.controller.ToCheckpoint(), c, d.checkpoints / "controller_dal.bin");
  fs::create_directories(d.reports);
  WriteDalReportCsv(rows, (d.reports / "dal_report.csv").string(), Stamp(c));
  return 0;
}

int DistillCmd(const Globals& g, const std::string& data,
               const std::string& planner, const std::string& controller) {
  RunConfig c = Load(g);
  Layout d = Dirs(g, c);
  DemoSet set = LoadData(data.empty() ? d.data : fs::path(data));
  Planner p =
      LoadPlanner(planner.empty() ? d.checkpoints / "planner_dal.bin" : fs::path(planner));
  Controller teacher = LoadController(
      controller.empty() ? d.checkpoints / "controller_dal.bin" : fs::path(controller));
  RolloutContext ctx = MakeRolloutContext(c, &p);
  const TaskItem item = ReferenceItem(set);
  Rng rng(c.seed);
  std::vector<DistillStats> log;
  Controller student = DaggerDistill(ctx, teacher,
                                     MakeSampler({item}, AugmentConfig{}),
                                     c.distill, rng, &log);
  Checkpoint ck = student.ToCheckpoint();
  ck.meta["obs_mode"] = "student";
  Save(ck, c, d.checkpoints / "student.bin");
  fs::create_directories(d.reports);
  std::ofstream csv(d.reports / "distill.csv");
  csv << "# " << Stamp(c)
      << "\niteration,beta,dataset_size,mse_before,mse_after,mean_completion\n";
  csv.precision(17);
  for (const DistillStats& s : log) {
    csv << s.iteration << ',' << s.beta << ',' << s.dataset_size << ','
        << s.mse_before << ',' << s.mse_after << ',' << s.mean_completion
        << '\n';
  }
  std::printf("teacher %.3f student %.3f\n",
              DeterministicCompletion(ctx, teacher, item),
              DeterministicCompletion(StudentContext(ctx), student, item));
  return 0;
}

int EvalCmd(const Globals& g, const std::string& data) {
  RunConfig c = Load(g);
  Layout d = Dirs(g, c);
  // method -> (planner file, controller file, mode)
  const std::map<std::string, std::tuple<std::string, std::string, ControlMode>>
      files = {
          {"ours", {"planner_dal.bin", "controller_dal.bin",
                    ControlMode::kHierarchical}},
          {"ours_no_dal", {"planner.bin", "controller_ours.bin",
                           ControlMode::kHierarchical}},
          {"ours_fr", {"planner.bin", "controller_fingertip.bin",
                       ControlMode::kHierarchical}},
          {"vanilla_rl", {"", "controller_vanilla.bin", ControlMode::kVanilla}},
      };
  // check every artifact before loading anything
  for (const std::string& m : c.eval.methods) {
    auto it = files.find(m);
    if (it == files.end()) continue;
    const auto& [pf, cf, mode] = it->second;
    if (!pf.empty()) {
      Require(d.checkpoints / pf, "planner checkpoint for method " + m);
    }
    Require(d.checkpoints / cf, "controller checkpoint for method " + m);
  }
  DemoSet set = LoadData(data.empty() ? d.data : fs::path(data));
  std::map<std::string, Planner> planners;
  std::map<std::string, Controller> controllers;
  std::map<std::string, MethodArtifacts> art;
  for (const std::string& m : c.eval.methods) {
    auto it = files.find(m);
    if (it == files.end()) continue;
    const auto& [pf, cf, mode] = it->second;
    MethodArtifacts a;
    a.mode = mode;
    if (!pf.empty()) {
      if (!planners.count(pf)) {
        planners.emplace(pf, LoadPlanner(d.checkpoints / pf));
      }
      a.planner = &planners.at(pf);
    }
    if (!controllers.count(cf)) {
      controllers.emplace(cf, LoadController(d.checkpoints / cf));
    }
    a.controllers = {&controllers.at(cf)};
    art[m] = a;
  }
  RolloutContext ctx = MakeRolloutContext(c, nullptr);
  EvalReport r = RunTaskSuite(c.eval, ctx, set, art, c.seed, RunConfigHash(c));
  fs::create_directories(d.reports);
  WriteEvalCsv(r, (d.reports / "eval.csv").string());
  Json j = EvalReportJson(r);
  j["seed"] = c.seed;
  std::ofstream(d.reports / "eval.json") << j.dump(2) << '\n';
  for (const EvalAggregate& a : Aggregate(r)) {
    std::printf("%-24s %-14s %.3f", a.task.c_str(), a.method.c_str(), a.mean);
    if (a.std) std::printf(" +- %.3f", *a.std);
    std::printf("\n");
  }
  return 0;
}

int FuseDemo(const Globals& g, int frames, std::optional<double> sigma,
             std::optional<double> outlier_prob) {
  RunConfig c = Load(g);
  if (sigma) c.camera.translation_sigma = *sigma;
  if (outlier_prob) c.camera.outlier_prob = *outlier_prob;
  CameraNoiseFromJson(CameraNoiseToJson(c.camera));  // validates overrides
  if (frames < 1) throw std::invalid_argument("--frames must be >= 1");
  Layout d = Dirs(g, c);
  Rng rng(c.seed);
  fs::create_directories(d.reports);
  std::ofstream csv(d.reports / "fusion.csv");
  csv << "# " << Stamp(c) << "\nframe,camera_mean_error,fused_error,fallback\n";
  csv.precision(17);
  ObjectState previous;
  previous.translation = Vec3(0.2, 0.0, 0.1);
  double cam_sum = 0.0, fused_sum = 0.0;
  int fallbacks = 0;
  for (int k = 0; k < frames; ++k) {
    // slow circle with a turning yaw as the desired object motion
    const double phase = 0.01 * k;
    ObjectState truth;
    truth.translation =
        Vec3(0.2 * std::cos(phase), 0.2 * std::sin(phase), 0.1);
    truth.rotation = Rot::FromAxisAngle(Vec3::UnitZ(), phase);
    auto est = SimulateCameras(truth, c.fusion.cameras, c.camera, rng);
    ObjectState fused = FusePoses(est, truth, c.fusion, previous);
    double cam = 0.0;
    for (const ObjectState& e : est) {
      cam += (e.translation - truth.translation).norm() / est.size();
    }
    const bool fallback = fused.translation == previous.translation &&
                          fused.rotation.Wxyz() == previous.rotation.Wxyz();
    const double err = (fused.translation - truth.translation).norm();
    csv << k << ',' << cam << ',' << err << ',' << fallback << '\n';
    cam_sum += cam;
    fused_sum += err;
    fallbacks += fallback;
    previous = fused;
  }
  std::printf("frames %d camera mean error %.4f m fused error %.4f m "
              "fallbacks %d\n",
              frames, cam_sum / frames, fused_sum / frames, fallbacks);
  return 0;
}

int Replay(const Globals& g, const std::string& data, int index) {
  RunConfig c = Load(g);
  Layout d = Dirs(g, c);
  DemoSet set = LoadData(data.empty() ? d.data : fs::path(data));
  if (index < 0) index = ReferenceDemo(set);
  if (index >= set.size()) {
    throw std::out_of_range("demo index " + std::to_string(index) +
                            " out of range (" + std::to_string(set.size()) +
                            " demos)");
  }
  const Demo& demo = set.demos[index];
  const double comp =
      ReplayCompletion(demo, set.SpecFor(demo), c.env, c.thresholds);
  std::printf("demo %d %s %s completion %.3f\n", index, demo.task.c_str(),
              SplitName(set.splits[index]).c_str(), comp);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierdex: hierarchical bimanual dexterous manipulation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run config")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "overrides the config seed");
  app.add_option("--out", g.out, "output root directory");

  std::string data, planner, controller, mode = "ours", metric = "angle";
  int frames = 1000, demo = -1;
  std::optional<double> sigma, outlier;

  auto* print = app.add_subcommand("print-config", "print the full config");
  auto* gen = app.add_subcommand("gen-data", "generate the demo dataset");
  auto* tp = app.add_subcommand("train-planner", "behavior-clone the planner");
  auto* ep = app.add_subcommand("eval-planner", "planner wrist errors");
  auto* tc = app.add_subcommand("train-controller", "PPO controller training");
  auto* dal = app.add_subcommand("dal", "data augmentation loop");
  auto* dis = app.add_subcommand("distill", "DAgger student distillation");
  auto* ev = app.add_subcommand("eval", "task suite evaluation");
  auto* fuse = app.add_subcommand("fuse-demo", "multi-camera fusion demo");
  auto* rep = app.add_subcommand("replay", "open-loop demo replay");

  for (auto* s : {tp, ep, tc, dal, dis, ev, rep}) {
    s->add_option("--data", data, "dataset directory");
  }
  for (auto* s : {ep, tc, dal, dis}) {
    s->add_option("--planner", planner, "planner checkpoint");
  }
  for (auto* s : {dal, dis}) {
    s->add_option("--controller", controller, "controller checkpoint");
  }
  ep->add_option("--metric", metric, "angle | frobenius")
      ->check(CLI::IsMember({"angle", "frobenius"}));
  tc->add_option("--mode", mode, "ours | vanilla | no_residual | fingertip")
      ->check(CLI::IsMember({"ours", "vanilla", "no_residual", "fingertip"}));
  fuse->add_option("--frames", frames, "frames to simulate");
  fuse->add_option("--sigma", sigma, "camera translation noise, meters");
  fuse->add_option("--outlier-prob", outlier, "outlier injection probability");
  rep->add_option("--demo", demo, "demo index (default: reference demo)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*print) {
      std::cout << RunConfigToJson(Load(g, false)).dump(2) << '\n';
      return 0;
    }
    if (*gen) return GenData(g);
    if (*tp) return TrainPlanner(g, data);
    if (*ep) return EvalPlannerCmd(g, data, planner, metric);
    if (*tc) return TrainControllerCmd(g, mode, data, planner);
    if (*dal) return DalCmd(g, data, planner, controller);
    if (*dis) return DistillCmd(g, data, planner, controller);
    if (*ev) return EvalCmd(g, data);
    if (*fuse) return FuseDemo(g, frames, sigma, outlier);
    if (*rep) return Replay(g, data, demo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
