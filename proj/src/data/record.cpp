#include "cardiospike/data/record.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <unordered_map>

#include "cardiospike/util/files.hpp"

namespace cardiospike::data {

namespace {

std::string describe_issues(const std::vector<CsvIssue>& issues) {
    std::string msg = "csv: " + std::to_string(issues.size()) + " problem(s)";
    constexpr std::size_t kShown = 10;
    for (std::size_t i = 0; i < issues.size() && i < kShown; ++i) {
        msg += "\n  ";
        if (issues[i].line > 0) {
            msg += "line " + std::to_string(issues[i].line) + ": ";
        }
        msg += issues[i].message;
    }
    if (issues.size() > kShown) {
        msg += "\n  ...";
    }
    return msg;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) {
        return false;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

CsvError::CsvError(std::vector<CsvIssue> issues)
    : std::runtime_error(describe_issues(issues)), issues_(std::move(issues)) {}

void RhythmRecord::validate() const {
    auto fail = [this](const std::string& what) {
        throw std::invalid_argument("record '" + id + "': " + what);
    };
    if (rr.empty()) {
        fail("no samples");
    }
    if (labels.size() != rr.size() || times.size() != rr.size()) {
        fail("rr, labels and times differ in length");
    }
    for (std::size_t i = 0; i < rr.size(); ++i) {
        if (!(rr[i] > kMinRrMs && rr[i] < kMaxRrMs)) {
            fail("rr[" + std::to_string(i) + "] = " + format_number(rr[i]) + " ms is outside (200, 3000)");
        }
        if (labels[i] > 1) {
            fail("label[" + std::to_string(i) + "] is not 0 or 1");
        }
    }
}

std::vector<RhythmRecord> parse_csv_text(std::string_view text) {
    std::vector<RhythmRecord> records;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<CsvIssue> issues;
    std::vector<bool> rejected;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        const auto line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty()) {
            continue;
        }

        std::array<std::string_view, 5> fields{};
        std::size_t count = 0;
        std::size_t start = 0;
        bool too_many = false;
        while (true) {
            const auto comma = line.find(',', start);
            const auto field = trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
            if (count == fields.size()) {
                too_many = true;
                break;
            }
            fields[count++] = field;
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }

        double probe = 0.0;
        if (line_no == 1 && !parse_double(fields[0], probe)) {
            continue;  // header
        }
        if (too_many || count < 4) {
            issues.push_back({line_no, "expected 4 or 5 columns, got " + (too_many ? std::string("more than 5")
                                                                                   : std::to_string(count))});
            continue;
        }
        const std::string id(fields[0]);
        if (id.empty()) {
            issues.push_back({line_no, "empty identifier"});
            continue;
        }
        double rr = 0.0;
        if (!parse_double(fields[1], rr)) {
            issues.push_back({line_no, "rr value '" + std::string(fields[1]) + "' is not numeric"});
            continue;
        }
        if (!(rr > kMinRrMs && rr < kMaxRrMs)) {
            issues.push_back({line_no, "rr value " + std::string(fields[1]) + " ms is outside (200, 3000)"});
            continue;
        }
        if (fields[2] != "0" && fields[2] != "1") {
            issues.push_back({line_no, "markup '" + std::string(fields[2]) + "' is not 0 or 1"});
            continue;
        }
        double time = 0.0;
        if (!parse_double(fields[3], time)) {
            issues.push_back({line_no, "time '" + std::string(fields[3]) + "' is not numeric"});
            continue;
        }

        auto [it, inserted] = index.try_emplace(id, records.size());
        if (inserted) {
            records.push_back(RhythmRecord{id, {}, {}, {}});
            rejected.push_back(false);
        }
        auto& rec = records[it->second];
        if (rejected[it->second]) {
            continue;
        }
        if (!rec.times.empty() && !(time > rec.times.back())) {
            issues.push_back({line_no, "record '" + id + "': time " + std::string(fields[3]) +
                                           " does not increase; record rejected"});
            rejected[it->second] = true;
            continue;
        }
        rec.rr.push_back(rr);
        rec.labels.push_back(fields[2] == "1" ? 1 : 0);
        rec.times.push_back(time);
    }

    if (!issues.empty()) {
        throw CsvError(std::move(issues));
    }
    return records;
}

std::vector<RhythmRecord> parse_csv(const std::filesystem::path& path) {
    return parse_csv_text(util::read_file(path));
}

std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::string format_csv(const std::vector<RhythmRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        if (rec.id.empty() || rec.id.find_first_of(",\n\r") != std::string::npos || trim(rec.id) != rec.id) {
            throw std::invalid_argument("csv: identifier '" + rec.id + "' cannot be written");
        }
    }
    // A non-numeric first identifier would be read back as a header line.
    double probe = 0.0;
    if (!records.empty() && !records.front().rr.empty() && !parse_double(records.front().id, probe)) {
        out += "id,rr_ms,markup,time_ms\n";
    }
    for (const auto& rec : records) {
        for (std::size_t i = 0; i < rec.size(); ++i) {
            out += rec.id;
            out += ',';
            out += format_number(rec.rr[i]);
            out += ',';
            out += rec.labels[i] ? '1' : '0';
            out += ',';
            out += format_number(rec.times[i]);
            out += '\n';
        }
    }
    return out;
}

void write_csv(const std::vector<RhythmRecord>& records, const std::filesystem::path& path) {
    util::write_file_atomic(path, format_csv(records));
}

CorpusStats corpus_stats(const std::vector<RhythmRecord>& records) {
    CorpusStats stats;
    stats.records = records.size();
    for (const auto& rec : records) {
        stats.samples += rec.size();
        for (auto l : rec.labels) {
            stats.positives += l;
        }
    }
    stats.positive_rate =
        stats.samples == 0 ? 0.0 : static_cast<double>(stats.positives) / static_cast<double>(stats.samples);
    return stats;
}

}  // namespace cardiospike::data
