#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cardiospike/data/record.hpp"
#include "cardiospike/data/synth.hpp"
#include "cardiospike/data/windowing.hpp"
#include "cardiospike/model/checkpoint.hpp"
#include "cardiospike/model/config.hpp"
#include "cardiospike/model/detector.hpp"
#include "cardiospike/stream/online.hpp"
#include "cardiospike/stream/packet.hpp"
#include "cardiospike/stream/replay.hpp"
#include "cardiospike/training/evaluation.hpp"
#include "cardiospike/training/inference.hpp"
#include "cardiospike/training/loss.hpp"
#include "cardiospike/training/trainer.hpp"

namespace py = pybind11;
using namespace cardiospike;

namespace {

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
    return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
    const std::string s = b;
    return {s.begin(), s.end()};
}

// {name: (shape, flat values)} snapshot of every parameter tensor.
py::dict params_to_dict(const model::DetectorParams& params) {
    py::dict out;
    for (const auto& nv : params.named()) {
        const auto data = nv.value.data();
        out[py::str(nv.name)] =
            py::make_tuple(nv.value.shape(), std::vector<double>(data.begin(), data.end()));
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cardiospike detector core";

    py::enum_<tensor::Padding>(m, "Padding")
        .value("replicate", tensor::Padding::replicate)
        .value("zero", tensor::Padding::zero);

    py::class_<model::DetectorConfig>(m, "DetectorConfig")
        .def(py::init<>())
        .def_readwrite("kernel_size", &model::DetectorConfig::kernel_size)
        .def_readwrite("channels", &model::DetectorConfig::channels)
        .def_readwrite("hidden", &model::DetectorConfig::hidden)
        .def_readwrite("side", &model::DetectorConfig::side)
        .def_readwrite("layers", &model::DetectorConfig::layers)
        .def_readwrite("filters", &model::DetectorConfig::filters)
        .def_readwrite("length", &model::DetectorConfig::length)
        .def_readwrite("pad", &model::DetectorConfig::pad)
        .def_readwrite("classes", &model::DetectorConfig::classes)
        .def_readwrite("se_reduction", &model::DetectorConfig::se_reduction)
        .def_readwrite("padding", &model::DetectorConfig::padding)
        .def_property_readonly("target_length", &model::DetectorConfig::target_length)
        .def("validate", &model::DetectorConfig::validate)
        .def("to_json", [](const model::DetectorConfig& c) { return model::detector_config_to_json(c); })
        .def_static("from_json", &model::detector_config_from_json)
        .def("__eq__", [](const model::DetectorConfig& a, const model::DetectorConfig& b) { return a == b; })
        .def("__repr__", [](const model::DetectorConfig& c) { return "DetectorConfig(" + c.describe() + ")"; });

    py::class_<training::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("focal_alpha", &training::TrainConfig::focal_alpha)
        .def_readwrite("focal_gamma", &training::TrainConfig::focal_gamma)
        .def_readwrite("learning_rate", &training::TrainConfig::learning_rate)
        .def_readwrite("weight_decay", &training::TrainConfig::weight_decay)
        .def_readwrite("beta1", &training::TrainConfig::beta1)
        .def_readwrite("beta2", &training::TrainConfig::beta2)
        .def_readwrite("epsilon", &training::TrainConfig::epsilon)
        .def_readwrite("epochs", &training::TrainConfig::epochs)
        .def_readwrite("batch_size", &training::TrainConfig::batch_size)
        .def_readwrite("seed", &training::TrainConfig::seed)
        .def_readwrite("threshold", &training::TrainConfig::threshold)
        .def_readwrite("holdout_fraction", &training::TrainConfig::holdout_fraction)
        .def_readwrite("jobs", &training::TrainConfig::jobs)
        .def("validate", &training::TrainConfig::validate)
        .def("to_json", [](const training::TrainConfig& c) { return training::train_config_to_json(c); })
        .def_static("from_json", &training::train_config_from_json);

    py::class_<data::SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("records", &data::SynthConfig::records)
        .def_readwrite("samples_per_record", &data::SynthConfig::samples_per_record)
        .def_readwrite("baseline_mean_ms", &data::SynthConfig::baseline_mean_ms)
        .def_readwrite("baseline_jitter_ms", &data::SynthConfig::baseline_jitter_ms)
        .def_readwrite("spike_rate", &data::SynthConfig::spike_rate)
        .def_readwrite("amplitude_min_ms", &data::SynthConfig::amplitude_min_ms)
        .def_readwrite("amplitude_max_ms", &data::SynthConfig::amplitude_max_ms)
        .def_readwrite("relaxation", &data::SynthConfig::relaxation)
        .def_readwrite("undershoot", &data::SynthConfig::undershoot)
        .def_readwrite("decay", &data::SynthConfig::decay)
        .def_readwrite("seed", &data::SynthConfig::seed)
        .def("validate", &data::SynthConfig::validate)
        .def("to_json", [](const data::SynthConfig& c) { return data::synth_config_to_json(c); })
        .def_static("from_json", &data::synth_config_from_json);

    py::class_<data::RhythmRecord>(m, "RhythmRecord")
        .def(py::init<>())
        .def(py::init([](std::string id, std::vector<double> rr, std::vector<std::uint8_t> labels,
                         std::vector<double> times) {
                 data::RhythmRecord r{std::move(id), std::move(rr), std::move(labels), std::move(times)};
                 r.validate();
                 return r;
             }),
             py::arg("id"), py::arg("rr"), py::arg("labels"), py::arg("times"))
        .def_readwrite("id", &data::RhythmRecord::id)
        .def_readwrite("rr", &data::RhythmRecord::rr)
        .def_readwrite("labels", &data::RhythmRecord::labels)
        .def_readwrite("times", &data::RhythmRecord::times)
        .def("__len__", &data::RhythmRecord::size)
        .def("__eq__", [](const data::RhythmRecord& a, const data::RhythmRecord& b) { return a == b; });

    py::class_<data::CorpusStats>(m, "CorpusStats")
        .def_readonly("records", &data::CorpusStats::records)
        .def_readonly("samples", &data::CorpusStats::samples)
        .def_readonly("positives", &data::CorpusStats::positives)
        .def_readonly("positive_rate", &data::CorpusStats::positive_rate);

    m.def("parse_csv_text", &data::parse_csv_text, py::arg("text"));
    m.def("format_csv", &data::format_csv, py::arg("records"));
    m.def("corpus_stats", &data::corpus_stats, py::arg("records"));
    m.def("synth_record", &data::synth_record, py::arg("config"), py::arg("seed"), py::arg("id") = "1");
    m.def("synth_corpus", &data::synth_corpus, py::arg("config"));
    m.def(
        "normalize",
        [](const std::vector<double>& rr) {
            auto n = data::normalize(rr);
            return py::make_tuple(n.values, n.median);
        },
        py::arg("rr"), "Returns (values, median).");
    m.def("segment_count", &data::segment_count, py::arg("samples"), py::arg("length"), py::arg("pad"));

    m.def("receptive_field", &model::receptive_field, py::arg("kernel_size"), py::arg("layers"));
    m.def("dilation_for_layer", &model::dilation_for_layer, py::arg("layer"), py::arg("kernel_size"));
    m.def("param_count", &model::param_count, py::arg("config"));

    py::class_<model::DetectorParams>(m, "DetectorParams")
        .def_property_readonly("scalar_count", &model::DetectorParams::scalar_count)
        .def("tensors", &params_to_dict, "{name: (shape, flat row-major values)}")
        .def("clone", &model::DetectorParams::clone);

    m.def("init_params", &model::init_params, py::arg("config"), py::arg("seed"));
    m.def(
        "forward",
        [](const model::DetectorParams& params, const model::DetectorConfig& config,
           const std::vector<double>& segment) {
            tensor::NoGradGuard no_grad;
            tensor::Graph graph;
            auto out = model::detector_forward(graph, tensor::Value::from({segment.size(), 1}, segment), params,
                                               config);
            const auto d = out.data();
            return py::make_tuple(out.shape(), std::vector<double>(d.begin(), d.end()));
        },
        py::arg("params"), py::arg("config"), py::arg("segment"),
        "Logits of one normalized segment: (shape, flat values).");
    m.def(
        "detect_probabilities",
        [](const std::vector<double>& rr, const model::DetectorParams& params, const model::DetectorConfig& config) {
            return training::detect_probabilities(std::span<const double>(rr), params, config);
        },
        py::arg("rr"), py::arg("params"), py::arg("config"));
    m.def(
        "apply_threshold",
        [](const std::vector<double>& probs, double threshold) { return training::apply_threshold(probs, threshold); },
        py::arg("probabilities"), py::arg("threshold"));

    m.def("focal_loss", &training::focal_loss_scalar, py::arg("logit"), py::arg("target"), py::arg("alpha"),
          py::arg("gamma"), "Focal loss of one logit.");

    py::class_<training::Confusion>(m, "Confusion")
        .def_readonly("tp", &training::Confusion::tp)
        .def_readonly("fp", &training::Confusion::fp)
        .def_readonly("fn", &training::Confusion::fn)
        .def_readonly("tn", &training::Confusion::tn)
        .def_property_readonly("precision", &training::Confusion::precision)
        .def_property_readonly("recall", &training::Confusion::recall)
        .def_property_readonly("f_score", &training::Confusion::f_score);
    m.def(
        "f_score",
        [](const std::vector<std::uint8_t>& predicted, const std::vector<std::uint8_t>& truth) {
            return training::f_score(predicted, truth);
        },
        py::arg("predicted"), py::arg("truth"));
    m.def("kfold_split", &training::kfold_split, py::arg("records"), py::arg("k"), py::arg("seed"));

    py::class_<training::EpochStats>(m, "EpochStats")
        .def_readonly("epoch", &training::EpochStats::epoch)
        .def_readonly("train_loss", &training::EpochStats::train_loss)
        .def_readonly("eval_loss", &training::EpochStats::eval_loss)
        .def_readonly("f_score", &training::EpochStats::f_score);
    py::class_<training::TrainResult>(m, "TrainResult")
        .def_readonly("params", &training::TrainResult::params)
        .def_readonly("initial_loss", &training::TrainResult::initial_loss)
        .def_readonly("history", &training::TrainResult::history)
        .def_readonly("eval_confusion", &training::TrainResult::eval_confusion);
    py::class_<training::FoldReport>(m, "FoldReport")
        .def_readonly("fold", &training::FoldReport::fold)
        .def_readonly("test_records", &training::FoldReport::test_records)
        .def_readonly("confusion", &training::FoldReport::confusion)
        .def_readonly("history", &training::FoldReport::history)
        .def_property_readonly("f_score", &training::FoldReport::f_score);
    py::class_<training::CrossValidation>(m, "CrossValidation")
        .def_readonly("folds", &training::CrossValidation::folds)
        .def_readonly("params", &training::CrossValidation::params)
        .def_property_readonly("mean_f_score", &training::CrossValidation::mean_f_score);

    m.def("train", &training::train, py::arg("corpus"), py::arg("model_config"), py::arg("train_config"),
          py::arg("log") = training::LogFn{}, py::call_guard<py::gil_scoped_release>());
    m.def("cross_validate", &training::cross_validate, py::arg("corpus"), py::arg("model_config"),
          py::arg("train_config"), py::arg("k"), py::arg("log") = training::LogFn{},
          py::call_guard<py::gil_scoped_release>());

    m.def(
        "save_checkpoint",
        [](const std::vector<std::tuple<std::string, model::DetectorConfig, model::DetectorParams>>& entries,
           const std::filesystem::path& path) {
            model::Checkpoint c;
            for (const auto& [key, config, params] : entries) {
                c.entries.push_back({key, config, params.clone()});
            }
            model::save_checkpoint(c, path);
        },
        py::arg("entries"), py::arg("path"), "entries: [(key, config, params)]");
    m.def(
        "load_checkpoint",
        [](const std::filesystem::path& path) {
            auto c = model::load_checkpoint(path);
            py::list out;
            for (auto& e : c.entries) {
                out.append(py::make_tuple(e.key, e.config, std::move(e.params)));
            }
            return out;
        },
        py::arg("path"));

    py::class_<stream::SensorPacket>(m, "SensorPacket")
        .def(py::init<>())
        .def(py::init([](std::string id, std::uint16_t seq, std::uint32_t time, std::vector<std::uint16_t> rr) {
                 return stream::SensorPacket{std::move(id), seq, time, std::move(rr)};
             }),
             py::arg("sensor_id"), py::arg("sequence"), py::arg("time_ms"), py::arg("rr"))
        .def_readwrite("sensor_id", &stream::SensorPacket::sensor_id)
        .def_readwrite("sequence", &stream::SensorPacket::sequence)
        .def_readwrite("time_ms", &stream::SensorPacket::time_ms)
        .def_readwrite("rr", &stream::SensorPacket::rr)
        .def("__eq__", [](const stream::SensorPacket& a, const stream::SensorPacket& b) { return a == b; });

    py::register_exception<stream::PacketError>(m, "PacketError", PyExc_ValueError);
    m.def("encode_packet", [](const stream::SensorPacket& p) { return to_bytes(stream::encode_packet(p)); });
    m.def("decode_packet", [](const py::bytes& b) { return stream::decode_packet(from_bytes(b)); });
    m.def("sensor_packets", &stream::sensor_packets, py::arg("record"), py::arg("sensor_id"));

    py::class_<training::SpikeEvent>(m, "SpikeEvent")
        .def_readonly("index", &training::SpikeEvent::index)
        .def_readonly("probability", &training::SpikeEvent::probability)
        .def("__repr__", [](const training::SpikeEvent& e) {
            return "SpikeEvent(index=" + std::to_string(e.index) + ", probability=" + std::to_string(e.probability) +
                   ")";
        });

    // Holds a copy of the parameters so the Python object may go away.
    struct PySession {
        model::DetectorParams params;
        stream::Session session;
        PySession(const model::DetectorParams& p, const model::DetectorConfig& c, double threshold)
            : params(p.clone()), session(params, c, threshold) {}
    };
    py::class_<PySession>(m, "Session")
        .def(py::init<const model::DetectorParams&, const model::DetectorConfig&, double>(), py::arg("params"),
             py::arg("config"), py::arg("threshold") = 0.5)
        .def("on_packet", [](PySession& s, const stream::SensorPacket& p) { return s.session.on_packet(p); })
        .def("finish", [](PySession& s) { return s.session.finish(); })
        .def_property_readonly("rr", [](const PySession& s) { return s.session.state().rr; })
        .def_property_readonly("discontinuities",
                               [](const PySession& s) { return s.session.state().discontinuities; });
}
