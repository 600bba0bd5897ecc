#include "cardiospike/data/windowing.hpp"

namespace cardiospike::data {

double median(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("median of an empty sequence");
    }
    std::vector<double> v(values.begin(), values.end());
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

Normalized normalize(std::span<const double> rr) {
    Normalized out;
    out.median = median(rr);
    out.values.reserve(rr.size());
    for (double x : rr) {
        out.values.push_back((x - out.median) / kNormalizationScaleMs);
    }
    return out;
}

std::vector<double> denormalize(const Normalized& n) {
    std::vector<double> out;
    out.reserve(n.values.size());
    for (double v : n.values) {
        out.push_back(v * kNormalizationScaleMs + n.median);
    }
    return out;
}

Normalized segment_input(std::span<const double> rr, std::ptrdiff_t start, std::size_t length) {
    if (rr.empty()) {
        throw std::invalid_argument("segment_input: empty sequence");
    }
    const auto last = static_cast<std::ptrdiff_t>(rr.size()) - 1;
    std::vector<double> raw(length);
    for (std::size_t i = 0; i < length; ++i) {
        const auto src = std::clamp<std::ptrdiff_t>(start + static_cast<std::ptrdiff_t>(i), 0, last);
        raw[i] = rr[static_cast<std::size_t>(src)];
    }
    return normalize(raw);
}

std::size_t segment_count(std::size_t samples, std::size_t length, std::size_t pad) {
    if (length <= 2 * pad) {
        throw std::invalid_argument("window: need T > 2P");
    }
    const std::size_t ts = length - 2 * pad;
    return (samples + ts - 1) / ts;
}

std::vector<Segment> window(const RhythmRecord& record, std::size_t length, std::size_t pad) {
    if (record.rr.empty()) {
        throw std::invalid_argument("window: record '" + record.id + "' is empty");
    }
    if (record.labels.size() != record.rr.size()) {
        throw std::invalid_argument("window: record '" + record.id + "' has mismatched labels");
    }
    const std::size_t count = segment_count(record.size(), length, pad);
    const std::size_t ts = length - 2 * pad;

    std::vector<Segment> segments;
    segments.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        Segment seg;
        seg.record_id = record.id;
        seg.pad = pad;
        const std::size_t first_target = s * ts;
        seg.start = static_cast<std::ptrdiff_t>(first_target) - static_cast<std::ptrdiff_t>(pad);
        auto norm = segment_input(record.rr, seg.start, length);
        seg.input = std::move(norm.values);
        seg.median = norm.median;
        seg.valid = std::min(ts, record.size() - first_target);
        seg.target.assign(ts, 0);
        std::copy_n(record.labels.begin() + static_cast<std::ptrdiff_t>(first_target), seg.valid, seg.target.begin());
        segments.push_back(std::move(seg));
    }
    return segments;
}

std::vector<SegmentSlice<std::uint8_t>> label_slices(const std::vector<Segment>& segments) {
    std::vector<SegmentSlice<std::uint8_t>> out;
    out.reserve(segments.size());
    for (const auto& s : segments) {
        out.push_back({s.target_start(), s.valid, s.target});
    }
    return out;
}

}  // namespace cardiospike::data
