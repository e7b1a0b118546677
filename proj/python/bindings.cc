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

#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hierdex/config.h"

namespace py = pybind11;

namespace hierdex {
namespace {

GoalTrajectory Goal(const std::vector<ObjectState>& states) {
  GoalTrajectory g;
  g.states = states;
  return g;
}

// Dataset summary rows: (index, category, task, split, length).
py::list Summary(const DemoSet& set) {
  py::list rows;
  for (int i = 0; i < set.size(); ++i) {
    const Demo& d = set.demos[i];
    rows.append(py::make_tuple(i, d.category_id, d.task,
                               SplitName(set.splits[i]), d.length()));
  }
  return rows;
}

}  // namespace
}  // namespace hierdex

PYBIND11_MODULE(_core, m) {
  using namespace hierdex;
  m.doc() = "Core bindings for the hierdex manipulation stack.";

  py::class_<Rot>(m, "Rot")
      .def(py::init<>())
      .def(py::init<double, double, double, double>(), py::arg("w"),
           py::arg("x"), py::arg("y"), py::arg("z"))
      .def_static("from_axis_angle", &Rot::FromAxisAngle, py::arg("axis"),
                  py::arg("angle"))
      .def_static("from_rotation_vector", &Rot::FromRotationVector)
      .def_static("from_matrix", &Rot::FromMatrix)
      .def("wxyz", &Rot::Wxyz)
      .def("matrix", &Rot::Matrix)
      .def("rotation_vector", &Rot::RotationVector)
      .def("rotate", &Rot::Rotate)
      .def("inverse", &Rot::Inverse)
      .def(py::self * py::self)
      .def(py::self == py::self)
      .def("__repr__", [](const Rot& r) {
        auto q = r.Wxyz();
        return "Rot(w=" + std::to_string(q[0]) + ", x=" + std::to_string(q[1]) +
               ", y=" + std::to_string(q[2]) + ", z=" + std::to_string(q[3]) +
               ")";
      });

  py::class_<ObjectState>(m, "ObjectState")
      .def(py::init([](const Vec3& t, const Rot& r, std::optional<double> j) {
             return ObjectState{r, t, j};
           }),
           py::arg("translation") = Vec3::Zero(), py::arg("rotation") = Rot(),
           py::arg("joint_angle") = std::nullopt)
      .def_readwrite("translation", &ObjectState::translation)
      .def_readwrite("rotation", &ObjectState::rotation)
      .def_readwrite("joint_angle", &ObjectState::joint_angle);

  m.def("quat_angle", &QuatAngle);
  m.def("rot_frobenius_error", &RotFrobeniusError);
  m.def("slerp", &Slerp, py::arg("a"), py::arg("b"), py::arg("u"));

  py::class_<RewardWeights>(m, "RewardWeights")
      .def(py::init<>())
      .def_readwrite("rotation", &RewardWeights::rotation)
      .def_readwrite("translation", &RewardWeights::translation)
      .def_readwrite("joint", &RewardWeights::joint);
  m.def("reward", &Reward, py::arg("goal"), py::arg("current"),
        py::arg("weights") = RewardWeights{});

  py::enum_<RotationRule>(m, "RotationRule")
      .value("DIM_SCALED", RotationRule::kDimScaled)
      .value("PLAIN", RotationRule::kPlain);
  py::class_<CompletionThresholds>(m, "CompletionThresholds")
      .def(py::init<>())
      .def_readwrite("translation", &CompletionThresholds::translation)
      .def_readwrite("rotation_rule", &CompletionThresholds::rotation_rule)
      .def_readwrite("dimscaled", &CompletionThresholds::dimscaled)
      .def_readwrite("plain", &CompletionThresholds::plain)
      .def_readwrite("joint", &CompletionThresholds::joint);
  m.def(
      "completion_rate",
      [](const std::vector<ObjectState>& actual,
         const std::vector<ObjectState>& goal, const CompletionThresholds& th,
         double longest_dim) {
        return CompletionRate(actual, Goal(goal), th, longest_dim);
      },
      py::arg("actual"), py::arg("goal"), py::arg("thresholds"),
      py::arg("longest_dim"));

  m.def("resample_skip", [](const std::vector<ObjectState>& g, int k) {
    return ResampleSkip(Goal(g), k).states;
  });
  m.def("resample_interp", [](const std::vector<ObjectState>& g, int k) {
    return ResampleInterp(Goal(g), k).states;
  });

  py::class_<FusionConfig>(m, "FusionConfig")
      .def(py::init<>())
      .def_readwrite("translation_gate", &FusionConfig::translation_gate)
      .def_readwrite("rotation_gate", &FusionConfig::rotation_gate)
      .def_readwrite("cameras", &FusionConfig::cameras);
  m.def(
      "fuse_poses",
      [](const std::vector<ObjectState>& estimates,
         const ObjectState& reference, const FusionConfig& c,
         const ObjectState& previous) {
        return FusePoses(estimates, reference, c, previous);
      },
      py::arg("estimates"), py::arg("reference"), py::arg("config"),
      py::arg("previous"));
  m.def("check_reset", &CheckReset, py::arg("pose"), py::arg("goal_init"));

  py::class_<EmaState>(m, "EmaFilter")
      .def(py::init([](double alpha) { return EmaState{alpha, std::nullopt}; }),
           py::arg("alpha") = 0.3)
      .def("__call__", [](EmaState& s, const Vector& raw) {
        return EmaFilter(s, raw);
      });

  m.def("_default_config", [] { return RunConfigToJson(RunConfig{}).dump(); });
  m.def("_normalize_config", [](const std::string& text) {
    return RunConfigToJson(RunConfigFromJson(Json::parse(text))).dump();
  });
  m.def("_config_hash", [](const std::string& text) {
    return RunConfigHash(RunConfigFromJson(Json::parse(text)));
  });

  py::class_<DemoSet>(m, "DemoSet")
      .def("__len__", &DemoSet::size)
      .def("summary", &Summary)
      .def(
          "replay_completion",
          [](const DemoSet& set, int i) {
            if (i < 0 || i >= set.size()) throw py::index_error();
            const Demo& d = set.demos[i];
            return ReplayCompletion(d, set.SpecFor(d), EnvConfig{});
          },
          py::arg("index"))
      .def(
          "goal",
          [](const DemoSet& set, int i) {
            if (i < 0 || i >= set.size()) throw py::index_error();
            return set.demos[i].object_states;
          },
          py::arg("index"))
      .def("reference_index", [](const DemoSet& set) { return ReferenceDemo(set); });
  m.def(
      "_gen_dataset",
      [](const std::string& text, uint64_t seed) {
        RunConfig c = RunConfigFromJson(Json::parse(text));
        Rng rng(seed);
        py::gil_scoped_release release;
        return GenDataset(DefaultCategories(), c.dataset, rng, c.env);
      },
      py::arg("config"), py::arg("seed"));
  m.def("load_dataset", &LoadDemoSet, py::arg("directory"));
  m.def(
      "save_dataset",
      [](const DemoSet& set, const std::string& dir) { SaveDemoSet(set, dir); },
      py::arg("dataset"), py::arg("directory"));

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });
}
