/*
 * Copyright 2026 The StaleFL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "stalefl/aggregate.hpp"
#include "stalefl/baselines.hpp"
#include "stalefl/checkpoint.hpp"
#include "stalefl/config.hpp"
#include "stalefl/data.hpp"
#include "stalefl/detector.hpp"
#include "stalefl/errors.hpp"
#include "stalefl/harness.hpp"
#include "stalefl/inversion.hpp"
#include "stalefl/nn.hpp"
#include "stalefl/sim.hpp"
#include "stalefl/switch.hpp"

namespace py = pybind11;
using namespace stalefl;

namespace {

py::array_t<double> to_numpy(const ParamVector& p) {
  return py::array_t<double>(static_cast<py::ssize_t>(p.size()), p.data().data());
}

ParamVector from_numpy(const ModelArch& arch, py::array_t<double, py::array::c_style> a) {
  return ParamVector(arch, std::vector<double>(a.data(), a.data() + a.size()));
}

py::dict record_dict(const MetricsRecord& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["method"] = std::string(to_string(r.method));
  d["seed"] = r.seed;
  d["overall_acc"] = r.overall_acc;
  d["target_class_acc"] = r.target_class_acc;
  d["e1"] = r.e1;
  d["e2"] = r.e2;
  d["switch_state"] = r.switch_state ? py::cast(std::string(to_string(*r.switch_state)))
                                     : py::none();
  d["gi_iters"] = r.gi_iters;
  return d;
}

}  // namespace

PYBIND11_MODULE(_stalefl, m) {
  m.doc() = "Federated-learning simulator with gradient-inversion staleness compensation";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::enum_<Activation>(m, "Activation")
      .value("relu", Activation::kRelu)
      .value("tanh", Activation::kTanh);
  py::enum_<OptimizerKind>(m, "OptimizerKind")
      .value("sgd", OptimizerKind::kSgd)
      .value("sgd_momentum", OptimizerKind::kSgdMomentum)
      .value("fedprox", OptimizerKind::kFedProx);

  py::class_<ModelArch>(m, "ModelArch")
      .def(py::init([](std::vector<std::size_t> dims, Activation act) {
             ModelArch a{std::move(dims), act};
             a.validate();
             return a;
           }),
           py::arg("layer_dims"), py::arg("activation") = Activation::kRelu)
      .def_readonly("layer_dims", &ModelArch::layer_dims)
      .def_readonly("activation", &ModelArch::activation)
      .def_property_readonly("num_params", &ModelArch::num_params);

  py::class_<ParamVector>(m, "ParamVector")
      .def(py::init<ModelArch>())
      .def(py::init(&from_numpy), py::arg("arch"), py::arg("values"))
      .def_static("random_init", &ParamVector::random_init, py::arg("arch"), py::arg("seed"))
      .def_property_readonly("arch", &ParamVector::arch)
      .def_property_readonly("values", &to_numpy)
      .def("__len__", &ParamVector::size)
      .def(py::self + py::self)
      .def(py::self - py::self)
      .def(py::self * double())
      .def(py::self == py::self);

  py::class_<Dataset>(m, "Dataset")
      .def_static("with_hard_labels", &Dataset::with_hard_labels, py::arg("features"),
                  py::arg("labels"), py::arg("num_classes"))
      .def_static("with_soft_labels", &Dataset::with_soft_labels, py::arg("features"),
                  py::arg("distribution"))
      .def_property_readonly("features", &Dataset::features)
      .def_property_readonly("targets", &Dataset::targets)
      .def_property_readonly("num_classes", &Dataset::num_classes)
      .def("labels", &Dataset::argmax_labels)
      .def("class_counts", &Dataset::class_counts)
      .def("__len__", &Dataset::size);

  py::class_<OptConfig>(m, "OptConfig")
      .def(py::init<>())
      .def_readwrite("kind", &OptConfig::kind)
      .def_readwrite("learning_rate", &OptConfig::learning_rate)
      .def_readwrite("momentum", &OptConfig::momentum)
      .def_readwrite("prox_mu", &OptConfig::prox_mu)
      .def_readwrite("local_steps", &OptConfig::local_steps)
      .def_readwrite("batch_size", &OptConfig::batch_size);

  m.def("forward", &forward, py::arg("params"), py::arg("features"));
  m.def("loss_and_grad",
        [](const ParamVector& p, const Dataset& d) {
          auto lg = loss_and_grad(p, d);
          return py::make_tuple(lg.loss, lg.grad);
        },
        py::arg("params"), py::arg("data"));
  m.def("finite_diff_grad", &finite_diff_grad, py::arg("params"), py::arg("data"),
        py::arg("step") = 1e-5);
  m.def("local_update", &local_update, py::arg("base"), py::arg("data"), py::arg("opt"),
        py::arg("global_ref") = nullptr, py::arg("shuffle_seed") = 0);
  m.def("save_checkpoint",
        py::overload_cast<const ParamVector&, const std::filesystem::path&>(&save_checkpoint));
  m.def("load_checkpoint",
        py::overload_cast<const std::filesystem::path&, Activation>(&load_checkpoint),
        py::arg("path"), py::arg("activation") = Activation::kRelu);

  m.def("make_blobs", &make_blobs, py::arg("num_classes"), py::arg("dim"),
        py::arg("samples_per_class"), py::arg("spread"), py::arg("seed"));
  m.def("dirichlet_partition",
        [](const Dataset& d, int clients, double alpha, std::uint64_t seed) {
          return dirichlet_partition(d, PartitionSpec{clients, alpha, seed});
        },
        py::arg("data"), py::arg("num_clients"), py::arg("alpha"), py::arg("seed"));
  m.def("select_stale_clients",
        [](const std::vector<Dataset>& parts, int target, int k) {
          return select_stale_clients(parts, StalenessPlan{target, k, 0});
        },
        py::arg("partitions"), py::arg("target_class"), py::arg("num_stale_clients"));

  py::class_<ModelUpdate>(m, "ModelUpdate")
      .def(py::init([](int client, int base, int arrival, ParamVector delta, std::size_t n) {
             return ModelUpdate{client, base, arrival, std::move(delta), n};
           }),
           py::arg("client_id"), py::arg("base_epoch"), py::arg("arrival_epoch"),
           py::arg("delta"), py::arg("num_samples") = 1)
      .def_readonly("client_id", &ModelUpdate::client_id)
      .def_readonly("base_epoch", &ModelUpdate::base_epoch)
      .def_readonly("arrival_epoch", &ModelUpdate::arrival_epoch)
      .def_readonly("delta", &ModelUpdate::delta)
      .def_readonly("num_samples", &ModelUpdate::num_samples)
      .def_property_readonly("staleness", &ModelUpdate::staleness);

  m.def("aggregate_fedavg",
        [](const std::vector<ModelUpdate>& u, const std::vector<double>& w) {
          return aggregate_fedavg(u, w);
        },
        py::arg("updates"), py::arg("extra_weights") = std::vector<double>{});
  m.def("add_gaussian_noise", &add_gaussian_noise, py::arg("update"), py::arg("variance"),
        py::arg("seed"));
  m.def("evaluate",
        [](const ParamVector& w, const Dataset& test) {
          auto e = evaluate(w, test);
          return py::make_tuple(e.overall, e.per_class);
        },
        py::arg("weights"), py::arg("test"));

  py::class_<WeightingParams>(m, "WeightingParams")
      .def(py::init<>())
      .def_readwrite("a", &WeightingParams::a)
      .def_readwrite("b", &WeightingParams::b);
  py::class_<FirstOrderParams>(m, "FirstOrderParams")
      .def(py::init<>())
      .def_readwrite("lambda_", &FirstOrderParams::lambda);
  m.def("staleness_weight", &staleness_weight, py::arg("tau"),
        py::arg("params") = WeightingParams{});
  m.def("first_order_compensate", &first_order_compensate, py::arg("stale_grad"),
        py::arg("w_now"), py::arg("w_base"), py::arg("params") = FirstOrderParams{});

  m.def("cosine_distance", &cosine_distance);
  m.def("adaptive_threshold", [](const std::vector<ParamVector>& deltas) {
    return adaptive_threshold(CohortSnapshot{0, deltas});
  });
  m.def("is_unique", [](const ParamVector& stale, const std::vector<ParamVector>& deltas) {
    return is_unique(stale, CohortSnapshot{0, deltas});
  });

  m.def("top_k_mask",
        [](const ParamVector& p, double rate) { return top_k_mask(p, rate).indices; },
        py::arg("values"), py::arg("rate"));
  m.def("disparity",
        [](const ParamVector& a, const ParamVector& b, std::optional<double> rate) {
          const SparsityMask mask = rate ? top_k_mask(b, *rate) : SparsityMask::all(b.size());
          return disparity(a, b, mask);
        },
        py::arg("candidate"), py::arg("target"), py::arg("sparsification_rate") = py::none());
  m.def("l1_distance", &l1_distance);

  py::class_<GIConfig>(m, "GIConfig")
      .def(py::init<>())
      .def_readwrite("d_rec_fraction", &GIConfig::d_rec_fraction)
      .def_readwrite("reference_size", &GIConfig::reference_size)
      .def_readwrite("max_iters", &GIConfig::max_iters)
      .def_readwrite("inner_lr", &GIConfig::inner_lr)
      .def_readwrite("stop_tol", &GIConfig::stop_tol)
      .def_readwrite("sparsification_rate", &GIConfig::sparsification_rate)
      .def_readwrite("unroll_steps", &GIConfig::unroll_steps)
      .def_readwrite("seed", &GIConfig::seed);
  py::class_<GIResult>(m, "GIResult")
      .def_readonly("d_rec", &GIResult::d_rec)
      .def_readonly("initial_disparity", &GIResult::initial_disparity)
      .def_readonly("final_disparity", &GIResult::final_disparity)
      .def_readonly("iters_used", &GIResult::iters_used)
      .def_readonly("converged", &GIResult::converged)
      .def_property_readonly("mask", [](const GIResult& r) { return r.mask.indices; });
  m.def("invert", &invert, py::arg("stale"), py::arg("base_snapshot"), py::arg("client_opt"),
        py::arg("cfg"), py::arg("warm") = nullptr);
  m.def("estimate_unstale", &estimate_unstale, py::arg("w_now"), py::arg("d_rec"),
        py::arg("client_opt"));
  m.def("recovery_quality",
        [](const Dataset& rec, const Dataset& truth) {
          auto q = recovery_quality(rec, truth);
          return py::dict(py::arg("mse") = q.mse, py::arg("psnr") = q.psnr,
                          py::arg("label_recovery_acc") = q.label_recovery_acc);
        });

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def("set", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
        set_config_value(c, k, v);
      })
      .def("validate", &ExperimentConfig::validate)
      .def("serialize", &serialize_config)
      .def(py::self == py::self);
  m.def("parse_config", [](const std::string& text) { return parse_config(text); });
  m.def("load_config", [](const std::filesystem::path& p) { return load_config(p); });
  m.def("preset_config", [](const std::string& name) { return find_preset(name).base_config(); });
  m.def("preset_names", [] {
    std::vector<std::string> names;
    for (const auto& p : presets()) names.push_back(p.name);
    return names;
  });

  m.def("run_training",
        [](const ExperimentConfig& c, const std::string& method, std::uint64_t seed) {
          RunResult r;
          {
            py::gil_scoped_release release;
            r = run_training(c, parse_method(method), seed);
          }
          py::list rows;
          for (const auto& rec : r.metrics) rows.append(record_dict(rec));
          py::dict out;
          out["metrics"] = rows;
          out["aborted"] = r.aborted;
          out["abort_reason"] = r.abort_reason;
          return out;
        },
        py::arg("config"), py::arg("method"), py::arg("seed"));
  m.def("run_suite",
        [](const ExperimentConfig& c, const std::filesystem::path& out) {
          py::gil_scoped_release release;
          return run_suite(c, out).exit_code;
        },
        py::arg("config"), py::arg("out_dir"));
  m.def("summarize_dir", &summarize_dir);
}
