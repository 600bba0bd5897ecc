#include "cardiospike/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace cardiospike::data {

namespace {

constexpr std::uint64_t kBaselineStream = 0x62617365ULL;
constexpr std::uint64_t kSpikeStream = 0x7370696bULL;

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    // splitmix64 finaliser over the combined key
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void SynthConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("SynthConfig: " + what); };
    if (samples_per_record == 0) {
        fail("samples_per_record must be positive");
    }
    if (!(amplitude_min_ms > 0.0 && amplitude_min_ms <= amplitude_max_ms && amplitude_max_ms <= 100.0)) {
        fail("amplitude range must satisfy 0 < min <= max <= 100 ms");
    }
    if (std::ceil(amplitude_min_ms) > std::floor(amplitude_max_ms)) {
        fail("amplitude range contains no whole millisecond");
    }
    if (!(spike_rate >= 0.0)) {
        fail("spike_rate must be >= 0");
    }
    if (!(baseline_jitter_ms >= 0.0)) {
        fail("baseline_jitter_ms must be >= 0");
    }
    if (!(baseline_mean_ms > kMinRrMs && baseline_mean_ms < kMaxRrMs)) {
        fail("baseline_mean_ms must lie in (200, 3000)");
    }
    if (!(undershoot >= 0.0) || !(decay >= 0.0 && decay < 1.0)) {
        fail("undershoot must be >= 0 and decay in [0, 1)");
    }
}

SynthRecord synth_record_detailed(const SynthConfig& config, std::uint64_t seed, std::string id) {
    config.validate();
    const std::size_t n = config.samples_per_record;

    SynthRecord out;
    out.baseline.resize(n);
    {
        std::mt19937_64 rng(derive_seed(seed, kBaselineStream));
        std::normal_distribution<double> jitter(0.0, 1.0);
        for (auto& b : out.baseline) {
            const double v = std::round(config.baseline_mean_ms + config.baseline_jitter_ms * jitter(rng));
            b = std::clamp(v, kMinRrMs + 1.0, kMaxRrMs - 1.0);
        }
    }

    std::vector<double> deviation(n, 0.0);
    auto& rec = out.record;
    rec.id = std::move(id);
    rec.labels.assign(n, 0);

    if (config.spike_rate > 0.0) {
        std::mt19937_64 rng(derive_seed(seed, kSpikeStream));
        const double spacing = 100.0 / config.spike_rate;
        const double mean_gap = std::max(spacing - static_cast<double>(config.footprint()), 1e-9);
        std::exponential_distribution<double> gap(1.0 / mean_gap);
        std::uniform_int_distribution<int> amplitude(static_cast<int>(std::ceil(config.amplitude_min_ms)),
                                                     static_cast<int>(std::floor(config.amplitude_max_ms)));
        std::size_t next_free = 0;
        while (true) {
            const auto p = next_free + static_cast<std::size_t>(std::floor(gap(rng)));
            if (p + config.footprint() > n) {
                break;
            }
            const double a = amplitude(rng);
            deviation[p] = a;
            deviation[p + 1] = -config.undershoot * a;
            double tail = config.undershoot * a;
            for (std::size_t i = 0; i < config.relaxation; ++i) {
                tail *= config.decay;
                deviation[p + 2 + i] = tail;
            }
            rec.labels[p] = 1;
            out.spike_starts.push_back(p);
            out.amplitudes.push_back(a);
            next_free = p + config.footprint();
        }
    }

    rec.rr.resize(n);
    rec.times.resize(n);
    double clock = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rec.rr[i] = std::clamp(std::round(out.baseline[i] + deviation[i]), kMinRrMs + 1.0, kMaxRrMs - 1.0);
        clock += rec.rr[i];
        rec.times[i] = clock;
    }
    return out;
}

RhythmRecord synth_record(const SynthConfig& config, std::uint64_t seed, std::string id) {
    return synth_record_detailed(config, seed, std::move(id)).record;
}

std::vector<RhythmRecord> synth_corpus(const SynthConfig& config) {
    std::vector<RhythmRecord> corpus;
    corpus.reserve(config.records);
    for (std::size_t r = 0; r < config.records; ++r) {
        corpus.push_back(synth_record(config, derive_seed(config.seed, r), std::to_string(r + 1)));
    }
    return corpus;
}

std::string synth_config_to_json(const SynthConfig& c) {
    nlohmann::ordered_json j;
    j["records"] = c.records;
    j["samples_per_record"] = c.samples_per_record;
    j["baseline_mean_ms"] = c.baseline_mean_ms;
    j["baseline_jitter_ms"] = c.baseline_jitter_ms;
    j["spike_rate"] = c.spike_rate;
    j["amplitude_min_ms"] = c.amplitude_min_ms;
    j["amplitude_max_ms"] = c.amplitude_max_ms;
    j["relaxation"] = c.relaxation;
    j["undershoot"] = c.undershoot;
    j["decay"] = c.decay;
    j["seed"] = c.seed;
    return j.dump(2) + "\n";
}

SynthConfig synth_config_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) {
        throw std::invalid_argument("SynthConfig: expected a JSON object");
    }
    const auto known = nlohmann::json::parse(synth_config_to_json(SynthConfig{}));
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw std::invalid_argument("SynthConfig: unknown key '" + key + "'");
        }
    }
    SynthConfig c;
    c.records = j.value("records", c.records);
    c.samples_per_record = j.value("samples_per_record", c.samples_per_record);
    c.baseline_mean_ms = j.value("baseline_mean_ms", c.baseline_mean_ms);
    c.baseline_jitter_ms = j.value("baseline_jitter_ms", c.baseline_jitter_ms);
    c.spike_rate = j.value("spike_rate", c.spike_rate);
    c.amplitude_min_ms = j.value("amplitude_min_ms", c.amplitude_min_ms);
    c.amplitude_max_ms = j.value("amplitude_max_ms", c.amplitude_max_ms);
    c.relaxation = j.value("relaxation", c.relaxation);
    c.undershoot = j.value("undershoot", c.undershoot);
    c.decay = j.value("decay", c.decay);
    c.seed = j.value("seed", c.seed);
    return c;
}

}  // namespace cardiospike::data
