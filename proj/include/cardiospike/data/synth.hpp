#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cardiospike/data/record.hpp"

namespace cardiospike::data {

/// Parameters of the synthetic rhythmogram generator.
///
/// A spike of amplitude a at sample p deviates the baseline by
///   +a, -u*a, then u*a*r^(i+1) for i = 0 .. relaxation-1
/// with u = undershoot and r = decay. Only sample p is labelled.
/// Defaults size the corpus at 74 records of 1491 samples.
struct SynthConfig {
    std::size_t records = 74;
    std::size_t samples_per_record = 1491;
    double baseline_mean_ms = 800.0;
    double baseline_jitter_ms = 12.0;  // Gaussian standard deviation
    double spike_rate = 3.0;           // expected spikes per 100 samples
    double amplitude_min_ms = 25.0;
    double amplitude_max_ms = 100.0;
    std::size_t relaxation = 3;
    double undershoot = 0.8;
    double decay = 0.5;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;

    std::size_t footprint() const { return 2 + relaxation; }

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Generated record plus the ground truth the generator used.
struct SynthRecord {
    RhythmRecord record;
    std::vector<double> baseline;           // rr before spikes were added
    std::vector<std::size_t> spike_starts;  // labelled sample of each spike
    std::vector<double> amplitudes;
};

/// Rounded-to-ms rhythmogram with spikes at Poisson-spaced, non-overlapping
/// positions. Baseline and spike placement draw from independent streams, so
/// changing spike settings leaves the baseline of a seed untouched.
SynthRecord synth_record_detailed(const SynthConfig& config, std::uint64_t seed, std::string id);
RhythmRecord synth_record(const SynthConfig& config, std::uint64_t seed, std::string id = "1");

/// config.records records with ids "1".."N"; record r uses a seed derived from
/// (config.seed, r).
std::vector<RhythmRecord> synth_corpus(const SynthConfig& config);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

std::string synth_config_to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const std::string& text);

}  // namespace cardiospike::data
