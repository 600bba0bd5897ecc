// cardiospike: synthetic data, training, offline detection and the
// streaming receiver/replayer on the command line.

#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cardiospike/data/record.hpp"
#include "cardiospike/data/synth.hpp"
#include "cardiospike/model/checkpoint.hpp"
#include "cardiospike/stream/replay.hpp"
#include "cardiospike/stream/server.hpp"
#include "cardiospike/training/inference.hpp"
#include "cardiospike/training/trainer.hpp"
#include "cardiospike/util/files.hpp"

namespace fs = std::filesystem;
using namespace cardiospike;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

// Sections of a --config file. Each is optional; flags override them.
struct FileConfig {
    std::optional<std::string> model;
    std::optional<std::string> train;
    std::optional<std::string> synth;
};

FileConfig read_config_file(const std::string& path) {
    FileConfig fc;
    if (path.empty()) {
        return fc;
    }
    const auto j = nlohmann::json::parse(util::read_file(path));
    if (!j.is_object()) {
        throw std::invalid_argument(path + ": expected a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "model") {
            fc.model = value.dump();
        } else if (key == "train") {
            fc.train = value.dump();
        } else if (key == "synth") {
            fc.synth = value.dump();
        } else {
            throw std::invalid_argument(path + ": unknown section '" + key + "'");
        }
    }
    // Every section is checked, including ones this subcommand ignores.
    if (fc.model) {
        model::detector_config_from_json(*fc.model);
    }
    if (fc.train) {
        training::train_config_from_json(*fc.train);
    }
    if (fc.synth) {
        data::synth_config_from_json(*fc.synth);
    }
    return fc;
}

template <typename T>
void override_if(const CLI::Option* opt, T& field, const T& value) {
    if (opt->count() > 0) {
        field = value;
    }
}

// Flags shared by every subcommand.
struct Common {
    std::uint64_t seed = 0;
    std::string config_path;
    std::string out = ".";
    bool quiet = false;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;

    void attach(CLI::App* app) {
        seed_opt = app->add_option("--seed", seed, "Base random seed");
        app->add_option("--config", config_path, "JSON file with model/train/synth sections")
            ->check(CLI::ExistingFile);
        out_opt = app->add_option("--out", out, "Output directory")->capture_default_str();
        app->add_flag("-q,--quiet", quiet, "Suppress progress lines; the config banner is always printed");
    }
};

struct ModelFlags {
    model::DetectorConfig values;
    std::string padding = "replicate";
    std::vector<std::pair<CLI::Option*, std::size_t model::DetectorConfig::*>> sizes;
    CLI::Option* padding_opt = nullptr;

    void attach(CLI::App* app) {
        auto add = [&](const char* name, std::size_t model::DetectorConfig::*field, const char* help) {
            sizes.emplace_back(app->add_option(name, values.*field, help), field);
        };
        add("--kernel", &model::DetectorConfig::kernel_size, "Convolution kernel size k");
        add("--channels", &model::DetectorConfig::channels, "Base channels C");
        add("--hidden", &model::DetectorConfig::hidden, "Hidden channels H");
        add("--side", &model::DetectorConfig::side, "Skip channels S");
        add("--layers", &model::DetectorConfig::layers, "Blocks per stack L");
        add("--filters", &model::DetectorConfig::filters, "Parallel stacks F");
        add("--length", &model::DetectorConfig::length, "Segment length T");
        add("--pad", &model::DetectorConfig::pad, "Segment margin P");
        add("--classes", &model::DetectorConfig::classes, "Output classes M");
        add("--se-reduction", &model::DetectorConfig::se_reduction, "Squeeze-excite reduction");
        padding_opt = app->add_option("--padding", padding, "Convolution padding")
                          ->check(CLI::IsMember({"replicate", "zero"}));
    }

    bool any() const {
        for (const auto& [opt, field] : sizes) {
            if (opt->count() > 0) {
                return true;
            }
        }
        return padding_opt->count() > 0;
    }

    void apply(model::DetectorConfig& c) const {
        for (const auto& [opt, field] : sizes) {
            if (opt->count() > 0) {
                c.*field = values.*field;
            }
        }
        if (padding_opt->count() > 0) {
            c.padding = padding == "zero" ? tensor::Padding::zero : tensor::Padding::replicate;
        }
    }
};

struct TrainFlags {
    training::TrainConfig values;
    CLI::Option *epochs, *lr, *batch, *wd, *alpha, *gamma, *threshold, *holdout, *jobs;

    void attach(CLI::App* app) {
        epochs = app->add_option("--epochs", values.epochs, "Training epochs");
        lr = app->add_option("--lr", values.learning_rate, "AdamW learning rate");
        batch = app->add_option("--batch-size", values.batch_size, "Segments per update");
        wd = app->add_option("--weight-decay", values.weight_decay, "Decoupled weight decay");
        alpha = app->add_option("--alpha", values.focal_alpha, "Focal loss alpha");
        gamma = app->add_option("--gamma", values.focal_gamma, "Focal loss gamma");
        threshold = app->add_option("--threshold", values.threshold, "Spike probability threshold");
        holdout = app->add_option("--holdout", values.holdout_fraction, "Held-out record fraction without --cv");
        jobs = app->add_option("--jobs", values.jobs, "Folds trained concurrently, 0 = all cores");
    }

    void apply(training::TrainConfig& c) const {
        override_if(epochs, c.epochs, values.epochs);
        override_if(lr, c.learning_rate, values.learning_rate);
        override_if(batch, c.batch_size, values.batch_size);
        override_if(wd, c.weight_decay, values.weight_decay);
        override_if(alpha, c.focal_alpha, values.focal_alpha);
        override_if(gamma, c.focal_gamma, values.focal_gamma);
        override_if(threshold, c.threshold, values.threshold);
        override_if(holdout, c.holdout_fraction, values.holdout_fraction);
        override_if(jobs, c.jobs, values.jobs);
    }
};

struct SynthFlags {
    data::SynthConfig values;
    CLI::Option *records, *samples, *rate, *mean, *jitter, *amin, *amax, *relax, *under, *decay;

    void attach(CLI::App* app) {
        records = app->add_option("--records", values.records, "Records to generate");
        samples = app->add_option("--samples", values.samples_per_record, "Samples per record");
        rate = app->add_option("--spike-rate", values.spike_rate, "Expected spikes per 100 samples");
        mean = app->add_option("--baseline", values.baseline_mean_ms, "Baseline RR mean, ms");
        jitter = app->add_option("--jitter", values.baseline_jitter_ms, "Baseline RR standard deviation, ms");
        amin = app->add_option("--amp-min", values.amplitude_min_ms, "Smallest spike amplitude, ms");
        amax = app->add_option("--amp-max", values.amplitude_max_ms, "Largest spike amplitude, ms");
        relax = app->add_option("--relaxation", values.relaxation, "Relaxation samples after the undershoot");
        under = app->add_option("--undershoot", values.undershoot, "Undershoot factor");
        decay = app->add_option("--decay", values.decay, "Relaxation decay factor");
    }

    void apply(data::SynthConfig& c) const {
        override_if(records, c.records, values.records);
        override_if(samples, c.samples_per_record, values.samples_per_record);
        override_if(rate, c.spike_rate, values.spike_rate);
        override_if(mean, c.baseline_mean_ms, values.baseline_mean_ms);
        override_if(jitter, c.baseline_jitter_ms, values.baseline_jitter_ms);
        override_if(amin, c.amplitude_min_ms, values.amplitude_min_ms);
        override_if(amax, c.amplitude_max_ms, values.amplitude_max_ms);
        override_if(relax, c.relaxation, values.relaxation);
        override_if(under, c.undershoot, values.undershoot);
        override_if(decay, c.decay, values.decay);
    }
};

model::DetectorConfig resolve_model(const FileConfig& fc, const ModelFlags& flags) {
    auto c = fc.model ? model::detector_config_from_json(*fc.model) : model::DetectorConfig{};
    flags.apply(c);
    c.validate();
    return c;
}

training::TrainConfig resolve_train(const FileConfig& fc, const TrainFlags& flags, const Common& common) {
    auto c = fc.train ? training::train_config_from_json(*fc.train) : training::TrainConfig{};
    flags.apply(c);
    override_if(common.seed_opt, c.seed, common.seed);
    c.validate();
    return c;
}

data::SynthConfig resolve_synth(const FileConfig& fc, const SynthFlags& flags, const Common& common) {
    auto c = fc.synth ? data::synth_config_from_json(*fc.synth) : data::SynthConfig{};
    flags.apply(c);
    override_if(common.seed_opt, c.seed, common.seed);
    c.validate();
    return c;
}

void banner(const std::string& command, std::uint64_t seed, const nlohmann::ordered_json& resolved) {
    std::cerr << "cardiospike " << command << " seed=" << seed << "\n" << resolved.dump(2) << "\n";
}

fs::path prepare_out(const std::string& dir) {
    fs::path out(dir);
    fs::create_directories(out);
    return out;
}

std::vector<data::RhythmRecord> read_corpus(const std::string& path) {
    auto corpus = data::parse_csv(path);
    if (corpus.empty()) {
        throw std::invalid_argument(path + ": no records");
    }
    return corpus;
}

int run_gen_data(const Common& common, const SynthFlags& flags) {
    const auto fc = read_config_file(common.config_path);
    const auto cfg = resolve_synth(fc, flags, common);
    banner("gen-data", cfg.seed, {{"synth", nlohmann::ordered_json::parse(data::synth_config_to_json(cfg))}});

    const auto corpus = data::synth_corpus(cfg);
    const auto stats = data::corpus_stats(corpus);
    const auto out = prepare_out(common.out);

    nlohmann::ordered_json manifest;
    manifest["generator"] = "cardiospike synth";
    manifest["synth"] = nlohmann::ordered_json::parse(data::synth_config_to_json(cfg));
    manifest["records"] = stats.records;
    manifest["samples"] = stats.samples;
    manifest["positives"] = stats.positives;
    manifest["positive_rate"] = stats.positive_rate;
    manifest["csv"] = "corpus.csv";

    util::write_file_atomic(out / "corpus.csv", data::format_csv(corpus));
    util::write_file_atomic(out / "manifest.json", manifest.dump(2) + "\n");
    std::printf("%zu records, %zu samples, %zu spikes (rate %.4f) -> %s\n", stats.records, stats.samples,
                stats.positives, stats.positive_rate, (out / "corpus.csv").c_str());
    return 0;
}

std::string format_folds(const std::vector<training::FoldReport>& folds) {
    std::string out = "fold,test_records,tp,fp,fn,precision,recall,f_score\n";
    char line[160];
    for (const auto& f : folds) {
        std::snprintf(line, sizeof line, "%zu,%zu,%zu,%zu,%zu,%.6f,%.6f,%.6f\n", f.fold, f.test_records.size(),
                      f.confusion.tp, f.confusion.fp, f.confusion.fn, f.precision(), f.recall(), f.f_score());
        out += line;
    }
    return out;
}

int run_train(const Common& common, const std::string& input, std::size_t cv, const ModelFlags& mflags,
              const TrainFlags& tflags) {
    const auto fc = read_config_file(common.config_path);
    const auto dcfg = resolve_model(fc, mflags);
    const auto tcfg = resolve_train(fc, tflags, common);
    banner("train", tcfg.seed,
           {{"input", input},
            {"cv", cv},
            {"model", nlohmann::ordered_json::parse(model::detector_config_to_json(dcfg))},
            {"train", nlohmann::ordered_json::parse(training::train_config_to_json(tcfg))}});

    const auto corpus = read_corpus(input);
    if (cv == 1) {
        throw std::invalid_argument("--cv needs at least 2 folds");
    }
    if (cv > corpus.size()) {
        throw std::invalid_argument("--cv " + std::to_string(cv) + " exceeds the " + std::to_string(corpus.size()) +
                                    " records in " + input);
    }
    const auto out = prepare_out(common.out);
    training::LogFn log;
    if (!common.quiet) {
        log = log_line;
    }

    model::Checkpoint ckpt;
    std::vector<training::FoldReport> reports;
    try {
        if (cv >= 2) {
            auto result = training::cross_validate(corpus, dcfg, tcfg, cv, log);
            for (std::size_t f = 0; f < cv; ++f) {
                ckpt.entries.push_back({model::checkpoint_key(f, tcfg.epochs), dcfg, std::move(result.params[f])});
            }
            reports = std::move(result.folds);
            util::write_file_atomic(out / "folds.csv", format_folds(reports));
            for (const auto& r : reports) {
                std::printf("fold %zu: precision %.4f recall %.4f F-score %.4f\n", r.fold, r.precision(),
                            r.recall(), r.f_score());
            }
            double mean = 0.0;
            for (const auto& r : reports) {
                mean += r.f_score();
            }
            std::printf("mean F-score: %.6f\n", mean / static_cast<double>(reports.size()));
        } else {
            auto result = training::train(corpus, dcfg, tcfg, log);
            ckpt.entries.push_back({model::checkpoint_key(0, tcfg.epochs), dcfg, std::move(result.params)});
            training::FoldReport r;
            r.history = std::move(result.history);
            r.confusion = result.eval_confusion;
            reports.push_back(std::move(r));
            std::printf("held-out F-score: %.6f\n", reports.back().f_score());
        }
    } catch (const training::TrainingDiverged& e) {
        model::Checkpoint last;
        last.entries.push_back({"last_good_epoch" + std::to_string(e.completed_epochs()), dcfg, e.last_good().clone()});
        model::save_checkpoint(last, out / "last_good.ckpt");
        throw std::runtime_error(std::string(e.what()) + "; last good parameters in " +
                                 (out / "last_good.ckpt").string());
    }
    model::save_checkpoint(ckpt, out / "checkpoint.ckpt");
    util::write_file_atomic(out / "report.csv", training::format_report(reports));
    std::printf("wrote %s and %s\n", (out / "checkpoint.ckpt").c_str(), (out / "report.csv").c_str());
    return 0;
}

// Checkpoint entry selected by --key, or the last one.
const model::CheckpointEntry& pick_entry(const model::Checkpoint& ckpt, const std::string& key) {
    return key.empty() ? ckpt.last() : ckpt.find(key);
}

void check_model_flags(const model::DetectorConfig& stored, const ModelFlags& flags) {
    if (!flags.any()) {
        return;
    }
    auto requested = stored;
    flags.apply(requested);
    if (!(requested == stored)) {
        throw std::invalid_argument("model flags (" + requested.describe() + ") do not match the checkpoint (" +
                                    stored.describe() + ")");
    }
}

int run_detect(const Common& common, const std::string& checkpoint, const std::string& key, const std::string& input,
               double threshold, bool plot, const ModelFlags& mflags) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("--threshold must lie in (0, 1)");
    }
    const auto ckpt = model::load_checkpoint(checkpoint);
    const auto& entry = pick_entry(ckpt, key);
    check_model_flags(entry.config, mflags);
    banner("detect", common.seed,
           {{"checkpoint", checkpoint},
            {"key", entry.key},
            {"input", input},
            {"threshold", threshold},
            {"model", nlohmann::ordered_json::parse(model::detector_config_to_json(entry.config))}});

    const auto corpus = read_corpus(input);
    const auto out = prepare_out(common.out);

    std::string detections = "id,rr_ms,markup,time_ms,prediction\n";
    std::string plot_data = "id,index,time_ms,rr_ms,probability\n";
    training::Confusion total;
    std::size_t positives = 0;
    char prob[32];
    for (const auto& rec : corpus) {
        const auto probs = training::detect_probabilities(rec, entry.params, entry.config);
        const auto predicted = training::apply_threshold(probs, threshold);
        total += training::f_score(predicted, rec.labels);
        for (std::size_t i = 0; i < rec.size(); ++i) {
            positives += predicted[i];
            const auto time = data::format_number(rec.times[i]);
            const auto rr = data::format_number(rec.rr[i]);
            detections += rec.id + "," + rr + "," + std::to_string(rec.labels[i]) + "," + time + "," +
                          std::to_string(predicted[i]) + "\n";
            if (plot) {
                std::snprintf(prob, sizeof prob, "%.6f", probs[i]);
                plot_data += rec.id + "," + std::to_string(i) + "," + time + "," + rr + "," + prob + "\n";
            }
        }
    }
    util::write_file_atomic(out / "detections.csv", detections);
    if (plot) {
        util::write_file_atomic(out / "plot_data.csv", plot_data);
    }
    std::printf("%zu predicted spikes; against markup: precision %.4f recall %.4f F-score %.6f\n", positives,
                total.precision(), total.recall(), total.f_score());
    return 0;
}

int run_serve(const Common& common, const std::string& checkpoint, const std::string& key, const std::string& host,
              std::uint16_t port, double threshold, std::size_t max_sessions) {
    const auto ckpt = model::load_checkpoint(checkpoint);
    const auto& entry = pick_entry(ckpt, key);
    stream::ServeOptions options;
    options.endpoint = {host, port};
    options.threshold = threshold;
    options.max_sessions = max_sessions;

    stream::Server server(entry.params, entry.config, options);
    banner("serve", common.seed,
           {{"checkpoint", checkpoint},
            {"key", entry.key},
            {"endpoint", host + ":" + std::to_string(server.port())},
            {"threshold", threshold},
            {"max_sessions", max_sessions},
            {"model", nlohmann::ordered_json::parse(model::detector_config_to_json(entry.config))}});
    std::cerr << "listening on " << host << ":" << server.port() << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    std::string events = "id,index,probability\n";
    const auto sessions = server.run(
        g_stop,
        [&](const std::string& line) {
            std::cout << line << std::endl;
            events += line + "\n";
        },
        common.quiet ? stream::Server::LineFn{} : stream::Server::LineFn(log_line));
    if (common.out_opt->count() > 0) {
        util::write_file_atomic(prepare_out(common.out) / "events.csv", events);
    }
    std::cerr << "served " << sessions.size() << " session(s)" << (g_stop.load() ? ", interrupted" : "") << "\n";
    return 0;
}

int run_replay(const Common& common, const std::string& input, const std::string& record_id,
               const std::string& endpoint, const std::string& speed_text, const stream::ReplayOptions& base) {
    auto options = base;
    options.seed = common.seed;
    if (speed_text == "inf" || speed_text == "max") {
        options.speed = std::numeric_limits<double>::infinity();
    } else {
        std::size_t used = 0;
        options.speed = std::stod(speed_text, &used);
        if (used != speed_text.size() || !(options.speed > 0.0)) {
            throw std::invalid_argument("--speed must be a positive number or 'inf'");
        }
    }
    const auto ep = stream::parse_endpoint(endpoint);
    const auto corpus = read_corpus(input);
    const data::RhythmRecord* record = &corpus.front();
    if (!record_id.empty()) {
        record = nullptr;
        for (const auto& r : corpus) {
            if (r.id == record_id) {
                record = &r;
                break;
            }
        }
        if (record == nullptr) {
            throw std::invalid_argument("record '" + record_id + "' not in " + input);
        }
    }
    banner("replay", options.seed,
           {{"input", input},
            {"record", record->id},
            {"endpoint", ep.str()},
            {"speed", speed_text},
            {"drop", options.drop},
            {"drop_burst", options.drop_burst},
            {"sensor_id", options.sensor_id.empty() ? record->id : options.sensor_id}});

    const auto stats = stream::replay_sensor(*record, ep, options);
    std::printf("replayed record %s: %zu packets, %zu sent, %zu dropped\n", record->id.c_str(), stats.packets,
                stats.sent, stats.dropped);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cardiospike detection in RR-interval rhythmograms"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic labelled corpus");
    Common gen_common;
    SynthFlags synth_flags;
    gen_common.attach(gen);
    synth_flags.attach(gen);

    auto* train = app.add_subcommand("train", "Train the detector, optionally with k-fold cross-validation");
    Common train_common;
    ModelFlags train_model;
    TrainFlags train_flags;
    std::string train_input;
    std::size_t cv = 0;
    train_common.attach(train);
    train->add_option("--input", train_input, "Corpus CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--cv", cv, "Number of folds; 0 trains once with a held-out split");
    train_model.attach(train);
    train_flags.attach(train);

    auto* detect = app.add_subcommand("detect", "Label a CSV with a trained checkpoint");
    Common detect_common;
    ModelFlags detect_model;
    std::string detect_ckpt, detect_key, detect_input;
    double detect_threshold = 0.5;
    bool plot = false;
    detect_common.attach(detect);
    detect->add_option("--checkpoint", detect_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    detect->add_option("--key", detect_key, "Checkpoint entry, default the last one");
    detect->add_option("--input", detect_input, "Input CSV")->required()->check(CLI::ExistingFile);
    detect->add_option("--threshold", detect_threshold, "Spike probability threshold")->capture_default_str();
    detect->add_flag("--plot-data", plot, "Also write per-sample time, rr, probability series");
    detect_model.attach(detect);

    auto* serve = app.add_subcommand("serve", "Receive sensor packets and report spikes online");
    Common serve_common;
    std::string serve_ckpt, serve_key, host = "127.0.0.1";
    std::uint16_t port = 7878;
    double serve_threshold = 0.5;
    std::size_t max_sessions = 0;
    serve_common.attach(serve);
    serve->add_option("--checkpoint", serve_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    serve->add_option("--key", serve_key, "Checkpoint entry, default the last one");
    serve->add_option("--host", host, "Listen address")->capture_default_str();
    serve->add_option("--port", port, "Listen port, 0 picks one")->capture_default_str();
    serve->add_option("--threshold", serve_threshold, "Spike probability threshold")->capture_default_str();
    serve->add_option("--max-sessions", max_sessions, "Exit after this many sessions, 0 = run until interrupted");

    auto* replay = app.add_subcommand("replay", "Stream a record to a receiver as sensor packets");
    Common replay_common;
    std::string replay_input, replay_record, endpoint, speed = "1";
    stream::ReplayOptions replay_options;
    replay_common.attach(replay);
    replay->add_option("--input", replay_input, "Corpus CSV")->required()->check(CLI::ExistingFile);
    replay->add_option("--record", replay_record, "Record id, default the first record");
    replay->add_option("--endpoint", endpoint, "Receiver host:port")->required();
    replay->add_option("--speed", speed, "Cadence multiplier, 'inf' for no pauses")->capture_default_str();
    replay->add_option("--drop", replay_options.drop, "Fraction of packets lost")->check(CLI::Range(0.0, 1.0));
    replay->add_option("--drop-burst", replay_options.drop_burst, "Consecutive packets per loss burst")
        ->capture_default_str();
    replay->add_option("--sensor-id", replay_options.sensor_id, "Sensor id on the wire, default the record id");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) {
            return run_gen_data(gen_common, synth_flags);
        }
        if (train->parsed()) {
            return run_train(train_common, train_input, cv, train_model, train_flags);
        }
        if (detect->parsed()) {
            return run_detect(detect_common, detect_ckpt, detect_key, detect_input, detect_threshold, plot,
                              detect_model);
        }
        if (serve->parsed()) {
            return run_serve(serve_common, serve_ckpt, serve_key, host, port, serve_threshold, max_sessions);
        }
        if (replay->parsed()) {
            return run_replay(replay_common, replay_input, replay_record, endpoint, speed, replay_options);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
