#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardiospike/data/record.hpp"

namespace cardiospike::data {

/// Fixed scale dividing median-centred RR values; +-100 ms maps to +-1.
inline constexpr double kNormalizationScaleMs = 100.0;

struct Normalized {
    std::vector<double> values;
    double median = 0.0;
};

double median(std::span<const double> values);

/// (x - median) / 100 ms per sample. Invert with denormalize.
Normalized normalize(std::span<const double> rr);
std::vector<double> denormalize(const Normalized& n);

/// A length-T window over a record. Target j belongs to source sample
/// start + P + j; samples outside the record are replicated boundary values.
struct Segment {
    std::string record_id;
    std::ptrdiff_t start = 0;           // source index of input[0], may be negative
    std::size_t pad = 0;                // P
    std::vector<double> input;          // T normalized values
    double median = 0.0;                // removed by normalization
    std::vector<std::uint8_t> target;   // Ts labels, 0 past the record end
    std::size_t valid = 0;              // targets that map to real samples

    std::ptrdiff_t target_start() const { return start + static_cast<std::ptrdiff_t>(pad); }
};

/// Normalized input window of `length` samples beginning at `start`, reading
/// rr with indices clamped to [0, rr.size()).
Normalized segment_input(std::span<const double> rr, std::ptrdiff_t start, std::size_t length);

/// Segments at stride Ts = T - 2P covering every sample in exactly one target
/// slice; neighbours share 2P input samples.
std::vector<Segment> window(const RhythmRecord& record, std::size_t length, std::size_t pad);

/// Number of segments window() yields for a record of n samples.
std::size_t segment_count(std::size_t samples, std::size_t length, std::size_t pad);

template <typename T>
struct SegmentSlice {
    std::ptrdiff_t target_start = 0;
    std::size_t valid = 0;
    std::vector<T> values;  // at least `valid` entries; the rest is ignored
};

/// Concatenates target slices in start order into one value per sample.
/// Throws std::invalid_argument naming the first gap or overlap.
template <typename T>
std::vector<T> stitch(std::vector<SegmentSlice<T>> slices) {
    std::sort(slices.begin(), slices.end(),
              [](const SegmentSlice<T>& a, const SegmentSlice<T>& b) { return a.target_start < b.target_start; });
    std::vector<T> out;
    std::ptrdiff_t expected = 0;
    for (const auto& s : slices) {
        if (s.target_start != expected) {
            throw std::invalid_argument(
                (s.target_start > expected ? "stitch: missing segment for samples starting at "
                                           : "stitch: overlapping segment at sample ") +
                std::to_string(expected));
        }
        if (s.values.size() < s.valid) {
            throw std::invalid_argument("stitch: slice at " + std::to_string(s.target_start) + " is short");
        }
        out.insert(out.end(), s.values.begin(), s.values.begin() + static_cast<std::ptrdiff_t>(s.valid));
        expected += static_cast<std::ptrdiff_t>(s.valid);
    }
    return out;
}

std::vector<SegmentSlice<std::uint8_t>> label_slices(const std::vector<Segment>& segments);

}  // namespace cardiospike::data
