// Python bindings for the fedmr core: model arithmetic, recombination,
// partitioning, local training and the round loop.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedmr/data.hpp"
#include "fedmr/error.hpp"
#include "fedmr/model.hpp"
#include "fedmr/net.hpp"
#include "fedmr/orchestrator.hpp"
#include "fedmr/recombine.hpp"
#include "fedmr/secure.hpp"
#include "fedmr/serialize.hpp"

namespace py = pybind11;
using namespace fedmr;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

py::array_t<double> block_array(const LayerBlock& block) {
    std::vector<ssize_t> shape(block.shape.begin(), block.shape.end());
    py::array_t<double> out(shape);
    std::copy(block.values.begin(), block.values.end(), out.mutable_data());
    return out;
}

// Borrow (features, labels) arrays as a DataView; caller keeps them alive.
DataView view_of(const DoubleArray& x, const IntArray& y) {
    if (x.ndim() != 2) throw Error(ErrorKind::ShapeMismatch, "features must be 2-D");
    if (y.ndim() != 1 || y.shape(0) != x.shape(0)) {
        throw Error(ErrorKind::ShapeMismatch, "labels must be 1-D and match features");
    }
    return {x.data(), y.data(), static_cast<int>(x.shape(0)),
            static_cast<int>(x.shape(1))};
}

ClientShard shard_of(int client_id, const DoubleArray& x, const IntArray& y,
                     int num_classes) {
    const auto view = view_of(x, y);
    ClientShard shard;
    shard.client_id = client_id;
    shard.feature_dim = view.dim;
    shard.features.assign(view.x, view.x + static_cast<size_t>(view.count) * view.dim);
    shard.labels.assign(view.y, view.y + view.count);
    shard.class_histogram.assign(static_cast<size_t>(num_classes), 0);
    for (int label : shard.labels) {
        if (label < 0 || label >= num_classes) {
            throw Error(ErrorKind::InvalidLabel, "label outside [0, num_classes)");
        }
        shard.class_histogram[static_cast<size_t>(label)]++;
    }
    return shard;
}

py::dict record_dict(const RoundRecord& r) {
    py::dict d;
    d["round"] = r.round;
    d["selected_clients"] = r.selected_clients;
    d["local_iterations"] = r.local_iterations;
    d["global_loss"] = r.global_loss;
    d["global_acc"] = r.global_acc;
    d["cosine_mean"] = r.cosine_mean;
    d["lemma1_sum_gap"] = r.lemma1_sum_gap;
    d["bytes_up"] = r.bytes_up;
    d["bytes_down"] = r.bytes_down;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Federated model-recombination simulator core";

    py::register_exception<Error>(m, "FedmrError");

    py::class_<LayerBlock>(m, "LayerBlock")
        .def_readonly("layer_index", &LayerBlock::layer_index)
        .def_readonly("shape", &LayerBlock::shape)
        .def_property_readonly("values", &block_array);

    py::class_<LayeredModel>(m, "LayeredModel")
        .def_property_readonly("arch_id", [](const LayeredModel& m_) { return m_.arch_id; })
        .def_property_readonly("layer_count", &LayeredModel::layer_count)
        .def("layer", [](const LayeredModel& m_, int i) { return m_.layers.at(i); },
             py::arg("index"))
        .def("flatten",
             [](const LayeredModel& m_) {
                 const auto flat = m_.flatten();
                 py::array_t<double> out(static_cast<ssize_t>(flat.size()));
                 std::copy(flat.begin(), flat.end(), out.mutable_data());
                 return out;
             })
        .def("set_layer_values",
             [](LayeredModel& m_, int i, const DoubleArray& values) {
                 auto& block = m_.layers.at(i);
                 if (static_cast<size_t>(values.size()) != block.size()) {
                     throw Error(ErrorKind::ShapeMismatch, "value count mismatch");
                 }
                 std::copy(values.data(), values.data() + values.size(),
                           block.values.begin());
             },
             py::arg("index"), py::arg("values"));

    py::class_<ArchitectureSpec>(m, "ArchitectureSpec")
        .def_static("mlp", &ArchitectureSpec::mlp, py::arg("input_dim"),
                    py::arg("hidden"), py::arg("num_classes"))
        .def_property_readonly("block_count", &ArchitectureSpec::block_count)
        .def("fingerprint", &ArchitectureSpec::fingerprint);

    m.def("init_model", &init_model, py::arg("arch"), py::arg("seed"));
    m.def("aggregate_mean", &aggregate_mean, py::arg("models"));
    m.def("sum_models", &sum_models, py::arg("models"));
    m.def("sq_distance_sum", &sq_distance_sum, py::arg("models"), py::arg("x"));
    m.def("pairwise_cosine_mean", &pairwise_cosine_mean, py::arg("models"));
    m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
    m.def("load_model", &load_model, py::arg("path"));
    m.def("model_debug_json", &model_debug_json, py::arg("model"));

    py::class_<LayerRange>(m, "LayerRange")
        .def_readonly("begin", &LayerRange::begin)
        .def_readonly("end", &LayerRange::end);

    py::class_<RecombinationPlan>(m, "RecombinationPlan")
        .def_readonly("groups", &RecombinationPlan::groups)
        .def_readonly("permutations", &RecombinationPlan::permutations)
        .def("to_json", &plan_to_json);

    m.def("plan_from_json", &plan_from_json, py::arg("text"));
    m.def("per_layer_groups", &per_layer_groups, py::arg("n_layers"));
    m.def("segment_groups", &segment_groups, py::arg("n_layers"), py::arg("x"));
    m.def("sample_plan",
          py::overload_cast<int, const std::vector<LayerRange>&, uint64_t>(&sample_plan),
          py::arg("population"), py::arg("groups"), py::arg("seed"));
    m.def("recombine", &recombine, py::arg("models"), py::arg("plan"));

    py::class_<Lemma1Report>(m, "Lemma1Report")
        .def_readonly("sum_gap", &Lemma1Report::sum_gap)
        .def_readonly("sqdist_gap", &Lemma1Report::sqdist_gap);
    m.def("check_lemma1", &check_lemma1, py::arg("before"), py::arg("after"),
          py::arg("x"));

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("feature_dim", &Dataset::feature_dim)
        .def_readonly("num_classes", &Dataset::num_classes)
        .def_property_readonly("train_x",
                               [](const Dataset& ds) {
                                   py::array_t<double> out(
                                       {static_cast<ssize_t>(ds.train_size()),
                                        static_cast<ssize_t>(ds.feature_dim)});
                                   std::copy(ds.train_x.begin(), ds.train_x.end(),
                                             out.mutable_data());
                                   return out;
                               })
        .def_property_readonly("train_y", [](const Dataset& ds) { return ds.train_y; })
        .def_property_readonly("test_x",
                               [](const Dataset& ds) {
                                   py::array_t<double> out(
                                       {static_cast<ssize_t>(ds.test_size()),
                                        static_cast<ssize_t>(ds.feature_dim)});
                                   std::copy(ds.test_x.begin(), ds.test_x.end(),
                                             out.mutable_data());
                                   return out;
                               })
        .def_property_readonly("test_y", [](const Dataset& ds) { return ds.test_y; })
        .def("fingerprint", &Dataset::fingerprint);

    m.def("make_blobs", &make_blobs, py::arg("num_classes"), py::arg("dim"),
          py::arg("per_class"), py::arg("spread"), py::arg("seed"));

    py::class_<ClientShard>(m, "ClientShard")
        .def(py::init(&shard_of), py::arg("client_id"), py::arg("features"),
             py::arg("labels"), py::arg("num_classes"))
        .def_readonly("client_id", &ClientShard::client_id)
        .def_readonly("class_histogram", &ClientShard::class_histogram)
        .def_readonly("sample_indices", &ClientShard::sample_indices)
        .def_property_readonly("size", &ClientShard::size);

    py::enum_<PartitionMode>(m, "PartitionMode")
        .value("IID", PartitionMode::Iid)
        .value("DIRICHLET", PartitionMode::Dirichlet);

    py::class_<PartitionSpec>(m, "PartitionSpec")
        .def(py::init([](int clients, PartitionMode mode, double alpha,
                         int min_shard_size, uint64_t seed) {
                 return PartitionSpec{clients, mode, alpha, min_shard_size, seed};
             }),
             py::arg("num_clients"), py::arg("mode") = PartitionMode::Iid,
             py::arg("alpha") = 1.0, py::arg("min_shard_size") = 1,
             py::arg("seed") = 0);

    m.def("partition", &partition, py::arg("dataset"), py::arg("spec"));

    py::class_<HeterogeneityReport>(m, "HeterogeneityReport")
        .def_readonly("entropy", &HeterogeneityReport::entropy)
        .def_readonly("emd", &HeterogeneityReport::emd)
        .def_readonly("mean_entropy", &HeterogeneityReport::mean_entropy)
        .def_readonly("mean_emd", &HeterogeneityReport::mean_emd);
    m.def("heterogeneity_report", &heterogeneity_report, py::arg("shards"));

    py::class_<LocalTrainConfig>(m, "LocalTrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &LocalTrainConfig::epochs)
        .def_readwrite("batch_size", &LocalTrainConfig::batch_size)
        .def_readwrite("lr", &LocalTrainConfig::lr)
        .def_readwrite("momentum", &LocalTrainConfig::momentum)
        .def_readwrite("prox_mu", &LocalTrainConfig::prox_mu)
        .def_readwrite("seed", &LocalTrainConfig::seed);

    m.def(
        "forward",
        [](const LayeredModel& model, const DoubleArray& x, const IntArray& y) {
            const auto result = forward(model, view_of(x, y));
            return py::make_tuple(result.logits, result.loss);
        },
        py::arg("model"), py::arg("features"), py::arg("labels"));
    m.def(
        "evaluate",
        [](const LayeredModel& model, const DoubleArray& x, const IntArray& y) {
            const auto result = evaluate(model, view_of(x, y));
            py::dict d;
            d["loss"] = result.loss;
            d["accuracy"] = result.accuracy;
            return d;
        },
        py::arg("model"), py::arg("features"), py::arg("labels"));
    m.def(
        "client_update",
        [](const LayeredModel& model, const ClientShard& shard,
           const LocalTrainConfig& cfg, const LayeredModel* ref) {
            return client_update(model, shard, cfg, ref);
        },
        py::arg("model"), py::arg("shard"), py::arg("cfg"),
        py::arg("global_ref") = nullptr,
        py::call_guard<py::gil_scoped_release>());

    py::enum_<Strategy>(m, "Strategy")
        .value("FEDMR", Strategy::FedMr)
        .value("FEDAVG", Strategy::FedAvg)
        .value("FEDPROX", Strategy::FedProx)
        .value("INDEP", Strategy::Indep);

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("rounds", &RunConfig::rounds)
        .def_readwrite("population", &RunConfig::population)
        .def_readwrite("active", &RunConfig::active)
        .def_readwrite("strategy", &RunConfig::strategy)
        .def_readwrite("granularity", &RunConfig::granularity)
        .def_readwrite("stage_switch", &RunConfig::stage_switch)
        .def_readwrite("local", &RunConfig::local)
        .def_readwrite("eval_every", &RunConfig::eval_every)
        .def_readwrite("seed", &RunConfig::seed);

    m.def(
        "run",
        [](const RunConfig& cfg, const ArchitectureSpec& arch,
           const std::vector<ClientShard>& shards, const DoubleArray& test_x,
           const IntArray& test_y, int threads) {
            RunResult result;
            {
                py::gil_scoped_release release;
                result = run(cfg, arch, shards, view_of(test_x, test_y), threads);
            }
            py::list records;
            for (const auto& r : result.records) records.append(record_dict(r));
            return py::make_tuple(records, result.final_global);
        },
        py::arg("cfg"), py::arg("arch"), py::arg("shards"), py::arg("test_x"),
        py::arg("test_y"), py::arg("threads") = 1);

    m.def("sample_clients", &sample_clients, py::arg("population"), py::arg("active"),
          py::arg("seed"), py::arg("round"));
    m.def("final_global", &final_global, py::arg("models"));

    py::class_<SecureConfig>(m, "SecureConfig")
        .def(py::init([](int repeats, int n_low, int n_high, uint64_t seed) {
                 return SecureConfig{repeats, n_low, n_high, seed};
             }),
             py::arg("repeats") = 1, py::arg("n_low") = 0, py::arg("n_high") = 0,
             py::arg("seed") = 0);

    m.def(
        "secure_round",
        [](const ModelList& models, const SecureConfig& cfg, bool fuzz_delivery) {
            const auto session = secure_round(models, cfg,
                                              fuzz_delivery
                                                  ? DeliveryPolicy::RandomInterleave
                                                  : DeliveryPolicy::Fifo);
            py::dict traffic;
            traffic["send_messages"] = session.traffic.send_messages;
            traffic["return_messages"] = session.traffic.return_messages;
            traffic["bytes"] = session.traffic.bytes;
            traffic["bytes_per_repetition"] = session.traffic.bytes_per_repetition;
            return py::make_tuple(session.models, traffic);
        },
        py::arg("models"), py::arg("cfg"), py::arg("fuzz_delivery") = false);
    m.def("expected_overhead", &expected_overhead, py::arg("cfg"),
          py::arg("population"), py::arg("model"));
}
