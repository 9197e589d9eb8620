#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "sialign/cli.hpp"
#include "sialign/corpus.hpp"

using namespace sialign;
using namespace test_helpers;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
    std::vector<const char*> argv{"sialign"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("synth is idempotent: same seed, byte-identical trees") {
    TempDir tmp;
    const std::string a = tmp.file("a");
    const std::string b = tmp.file("b");
    CHECK(run({"synth", "--out", a, "--pieces", "2", "--seed", "7",
               "--notes-min", "4", "--notes-max", "6"}) == 0);
    CHECK(run({"synth", "--out", b, "--pieces", "2", "--seed", "7",
               "--notes-min", "4", "--notes-max", "6"}) == 0);

    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), a).string();
        if (rel == "run.json") continue; // echoes the differing --out path
        CHECK(slurp(entry.path().string()) == slurp((fs::path(b) / rel).string()));
    }
    CHECK(fs::exists(fs::path(a) / "run.json"));
}

TEST_CASE("features subcommand writes csv and png") {
    TempDir tmp;
    REQUIRE(run({"synth", "--out", tmp.file("c"), "--pieces", "1", "--seed", "3",
                 "--notes-min", "4", "--notes-max", "5"}) == 0);
    const std::string wav = tmp.file("c/piece-000/perf.wav");
    CHECK(run({"features", "--input", wav, "--kind", "chroma", "--out",
               tmp.file("f.csv"), "--png", tmp.file("f.png")}) == 0);
    CHECK(fs::exists(tmp.file("f.csv")));
    CHECK(fs::exists(tmp.file("f.png")));
    CHECK(fs::exists(tmp.file("f.csv.run.json")));
}

TEST_CASE("align on a piece against itself stays near the diagonal") {
    TempDir tmp;
    REQUIRE(run({"synth", "--out", tmp.file("c"), "--pieces", "1", "--seed", "5",
                 "--notes-min", "5", "--notes-max", "6"}) == 0);
    const std::string wav = tmp.file("c/piece-000/score.wav");
    CHECK(run({"align", "--perf", wav, "--score", wav, "--baseline-chroma",
               "--out", tmp.file("out")}) == 0);
    REQUIRE(fs::exists(tmp.file("out/map.csv")));
    REQUIRE(fs::exists(tmp.file("out/path.csv")));

    std::ifstream map(tmp.file("out/map.csv"));
    std::string line;
    std::getline(map, line); // header
    double max_dev = 0.0;
    while (std::getline(map, line)) {
        const auto comma = line.find(',');
        const double x = std::stod(line.substr(0, comma));
        const double y = std::stod(line.substr(comma + 1));
        max_dev = std::max(max_dev, std::abs(x - y));
    }
    CHECK(max_dev < 0.024); // one hop
}

TEST_CASE("align with a midi score synthesizes the score side") {
    TempDir tmp;
    REQUIRE(run({"synth", "--out", tmp.file("c"), "--pieces", "1", "--seed", "11",
                 "--notes-min", "4", "--notes-max", "5"}) == 0);
    CHECK(run({"align", "--perf", tmp.file("c/piece-000/perf.wav"), "--score",
               tmp.file("c/piece-000/score.mid"), "--baseline-chroma", "--out",
               tmp.file("m")}) == 0);
    CHECK(fs::exists(tmp.file("m/map.csv")));
}

TEST_CASE("invalid flag combinations exit nonzero with no work done") {
    TempDir tmp;
    CHECK(run({"align", "--perf", "x.wav", "--score", "y.wav", "--out",
               tmp.file("o")}) == 1); // needs checkpoint or baseline
    CHECK(run({"train", "--out", tmp.file("m.ckpt")}) == 1); // needs input
    CHECK(run({"definitely-not-a-subcommand"}) != 0);
}

TEST_CASE("missing files exit 1") {
    TempDir tmp;
    CHECK(run({"features", "--input", tmp.file("missing.wav"), "--out",
               tmp.file("f.csv")}) == 1);
    CHECK(run({"evaluate", "--corpus", tmp.file("nowhere"), "--system", "chroma",
               "--out", tmp.file("e")}) == 1);
}

TEST_CASE("end-to-end: pairs, train, evaluate on a tiny corpus") {
    TempDir tmp;
    REQUIRE(run({"synth", "--out", tmp.file("c"), "--pieces", "4",
                 "--test-pieces", "1", "--seed", "9", "--notes-min", "5",
                 "--notes-max", "7"}) == 0);

    CHECK(run({"make-pairs", "--corpus", tmp.file("c"), "--out", tmp.file("p.bin"),
               "--pairs-per-piece", "6", "--patch-frames", "16", "--patch-bins",
               "16", "--seed", "1"}) == 0);
    CHECK(fs::exists(tmp.file("p.bin")));

    CHECK(run({"train", "--pairs", tmp.file("p.bin"), "--out", tmp.file("m.ckpt"),
               "--patch-frames", "16", "--patch-bins", "16", "--embed-dim", "16",
               "--epochs", "2", "--batch", "8", "--seed", "2", "--loss-csv",
               tmp.file("loss.csv")}) == 0);
    CHECK(fs::exists(tmp.file("m.ckpt")));
    CHECK(fs::exists(tmp.file("loss.csv")));

    CHECK(run({"evaluate", "--corpus", tmp.file("c"), "--system", "chroma",
               "--system", "siamese:" + tmp.file("m.ckpt") + ":distance", "--out",
               tmp.file("e")}) == 0);
    CHECK(fs::exists(tmp.file("e/report.csv")));
    CHECK(fs::exists(tmp.file("e/run.json")));
}
