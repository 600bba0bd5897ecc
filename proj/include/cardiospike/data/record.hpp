#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cardiospike::data {

/// Physiological plausibility gate for RR intervals, exclusive bounds in ms.
inline constexpr double kMinRrMs = 200.0;
inline constexpr double kMaxRrMs = 3000.0;

/// One subject's rhythmogram: RR intervals with per-sample spike-maximum
/// labels and measurement times.
struct RhythmRecord {
    std::string id;
    std::vector<double> rr;              // ms
    std::vector<std::uint8_t> labels;    // 1 marks a spike maximum
    std::vector<double> times;           // ms

    std::size_t size() const { return rr.size(); }

    /// Throws std::invalid_argument on unequal lengths, an empty record,
    /// implausible RR values or labels outside {0, 1}.
    void validate() const;

    friend bool operator==(const RhythmRecord&, const RhythmRecord&) = default;
};

struct CsvIssue {
    std::size_t line;  // 1-based; 0 for record-level problems
    std::string message;
};

class CsvError : public std::runtime_error {
public:
    explicit CsvError(std::vector<CsvIssue> issues);
    const std::vector<CsvIssue>& issues() const noexcept { return issues_; }

private:
    std::vector<CsvIssue> issues_;
};

/// Columns: identifier, rr_ms, markup (0/1), time_ms, [ignored extra column].
/// A first line whose first field is not numeric is treated as a header.
/// Rows are grouped by identifier in order of first appearance; times must
/// strictly increase within each record.
std::vector<RhythmRecord> parse_csv_text(std::string_view text);
std::vector<RhythmRecord> parse_csv(const std::filesystem::path& path);

/// Inverse of parse_csv_text: no header, no trailing separator, '\n' line ends,
/// shortest round-trip formatting for numbers.
std::string format_csv(const std::vector<RhythmRecord>& records);
void write_csv(const std::vector<RhythmRecord>& records, const std::filesystem::path& path);

/// Shortest text that parses back to exactly `v`.
std::string format_number(double v);

struct CorpusStats {
    std::size_t records = 0;
    std::size_t samples = 0;
    std::size_t positives = 0;
    double positive_rate = 0.0;
};

CorpusStats corpus_stats(const std::vector<RhythmRecord>& records);

}  // namespace cardiospike::data
