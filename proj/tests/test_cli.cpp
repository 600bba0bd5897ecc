#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"

#include "cardiospike/data/record.hpp"
#include "cardiospike/model/checkpoint.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string output;  // stdout and stderr interleaved
};

Run run(const std::string& args) {
    const std::string cmd = std::string(CARDIOSPIKE_CLI) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        r.output.append(buf.data(), n);
    }
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

const std::string kTinyModel = "--channels 4 --hidden 6 --side 6 --layers 2 --filters 1 --length 16 --pad 2";
const std::string kTiny = kTinyModel + " --epochs 1 --batch-size 16";

}  // namespace

TEST_CASE("cli pipeline") {
    TempDir dir("cardiospike_cli_test");
    const auto d = dir.path.string();

    auto gen = run("gen-data --records 4 --samples 150 --seed 3 -q --out " + d);
    REQUIRE_MESSAGE(gen.status == 0, gen.output);
    const auto corpus = cardiospike::data::parse_csv(dir.path / "corpus.csv");
    CHECK(corpus.size() == 4);
    CHECK(corpus[0].size() == 150);
    CHECK(fs::exists(dir.path / "manifest.json"));

    auto train = run("train --input " + d + "/corpus.csv --cv 2 --seed 1 -q --out " + d + " " + kTiny);
    REQUIRE_MESSAGE(train.status == 0, train.output);
    CHECK(train.output.find("mean F-score:") != std::string::npos);
    CHECK(slurp(dir.path / "folds.csv").rfind("fold,test_records,tp,fp,fn,precision,recall,f_score\n", 0) == 0);
    const auto ckpt = cardiospike::model::load_checkpoint(dir.path / "checkpoint.ckpt");
    REQUIRE(ckpt.entries.size() == 2);
    CHECK(ckpt.entries[1].key == "fold1_epoch1");
    CHECK(ckpt.entries[1].config.channels == 4);

    auto detect = run("detect --checkpoint " + d + "/checkpoint.ckpt --input " + d + "/corpus.csv --plot-data -q --out " +
                      d + " " + kTinyModel);
    REQUIRE_MESSAGE(detect.status == 0, detect.output);
    const auto detections = slurp(dir.path / "detections.csv");
    CHECK(detections.rfind("id,rr_ms,markup,time_ms,prediction\n", 0) == 0);
    CHECK(std::count(detections.begin(), detections.end(), '\n') == 1 + 4 * 150);
    CHECK(fs::exists(dir.path / "plot_data.csv"));

    // without model flags the checkpoint's config is used
    const auto first = detections;
    REQUIRE(run("detect --checkpoint " + d + "/checkpoint.ckpt --input " + d + "/corpus.csv -q --out " + d).status == 0);
    CHECK(slurp(dir.path / "detections.csv") == first);

    // flags that contradict the checkpoint are an error
    auto mismatch = run("detect --checkpoint " + d + "/checkpoint.ckpt --input " + d +
                        "/corpus.csv --channels 8 -q --out " + d);
    CHECK(mismatch.status == 1);
    CHECK(mismatch.output.find("error:") != std::string::npos);
    CHECK(run("detect --checkpoint " + d + "/checkpoint.ckpt --key fold7_epoch1 --input " + d + "/corpus.csv -q --out " +
              d).status == 1);
}

TEST_CASE("cli errors") {
    TempDir dir("cardiospike_cli_errors");
    const auto d = dir.path.string();
    {
        std::ofstream bad(dir.path / "bad.csv");
        bad << "1,800,0,0\n1,900,2,900\n";
    }
    auto r = run("train --input " + d + "/bad.csv -q --out " + d);
    CHECK(r.status == 1);
    CHECK(r.output.find("line 2") != std::string::npos);

    CHECK(run("train --input " + d + "/missing.csv").status != 0);
    CHECK(run("no-such-command").status != 0);
    CHECK(run("gen-data --records 2 --samples 30 --amp-max 500 -q --out " + d).status == 1);
    {
        std::ofstream cfg(dir.path / "cfg.json");
        cfg << R"({"model": {"chanels": 3}})";
    }
    auto c = run("gen-data --config " + d + "/cfg.json -q --out " + d);
    CHECK(c.status == 1);
    CHECK(c.output.find("chanels") != std::string::npos);
    auto cv1 = run("gen-data --records 2 --samples 40 -q --out " + d);
    REQUIRE(cv1.status == 0);
    CHECK(run("train --input " + d + "/corpus.csv --cv 1 -q --out " + d).status == 1);
    CHECK(run("train --input " + d + "/corpus.csv --cv 3 -q --out " + d).status == 1);
}

TEST_CASE("cli config precedence") {
    TempDir dir("cardiospike_cli_config");
    const auto d = dir.path.string();
    {
        std::ofstream cfg(dir.path / "cfg.json");
        cfg << R"({"synth": {"records": 3, "samples_per_record": 50}})";
    }
    REQUIRE(run("gen-data --config " + d + "/cfg.json --samples 60 -q --out " + d).status == 0);
    const auto corpus = cardiospike::data::parse_csv(dir.path / "corpus.csv");
    CHECK(corpus.size() == 3);
    CHECK(corpus[0].size() == 60);
}
