// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <set>
#include <sstream>

#include "nextloc/cli.hpp"
#include "nextloc/fileio.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using nextloc::read_file;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome nextloc_run(std::vector<std::string> args) {
    args.insert(args.begin(), "nextloc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = nextloc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Every file under `root` except the manifest log, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().filename() == "manifests.jsonl") continue;
        files[fs::relative(e.path(), root).string()] = read_file(e.path());
    }
    return files;
}

void pipeline(const fs::path& data, const fs::path& out) {
    const auto d = data.string(), o = out.string();
    REQUIRE(nextloc_run({"prepare", "--dataset", d, "--out", o}).code == 0);
    REQUIRE(nextloc_run({"predict", "--out", o, "--backend", "frequency-oracle", "--runs", "2"}).code == 0);
    REQUIRE(nextloc_run({"predict", "--out", o, "--backend", "recency-oracle", "--shots", "few"}).code == 0);
    REQUIRE(nextloc_run({"evaluate", "--out", o}).code == 0);
    REQUIRE(nextloc_run({"report", "--out", o}).code == 0);
}

}  // namespace

TEST_CASE("prepare, predict, evaluate and report are byte-stable across reruns") {
    testsupport::TempDir dir("cli");
    nextloc::write_file_atomic(dir / "checkins.txt", testsupport::synthetic_checkins());
    pipeline(dir / "checkins.txt", dir / "a");
    pipeline(dir / "checkins.txt", dir / "b");
    const auto a = snapshot(dir / "a");
    const auto b = snapshot(dir / "b");
    CHECK(a.size() == b.size());
    for (const auto& [name, bytes] : a) {
        CAPTURE(name);
        REQUIRE(b.count(name));
        CHECK(bytes == b.at(name));
    }
    CHECK(a.count("instances.jsonl"));
    CHECK(a.count("report/summary.csv"));
    CHECK(a.count("report/acc_at_5.svg"));

    // One manifest per command, each naming the tool version.
    const auto manifests = nextloc::read_jsonl(dir / "a" / "manifests.jsonl");
    CHECK(manifests.size() == 4);  // report writes none
    CHECK(manifests.front().dump().find(nextloc::cli::kToolVersion) != std::string::npos);
}

TEST_CASE("gps traces prepare into stops") {
    testsupport::TempDir dir("cli");
    const nextloc::stops::LatLon home{40.75, -73.99};
    std::vector<testsupport::PlantedStop> plan;
    const auto work = testsupport::offset_east(home, 900);
    const auto gym = testsupport::offset_north(home, 700);
    for (int day = 0; day < 3; ++day) {
        plan.push_back({home, 20});
        plan.push_back({work, 30});
        plan.push_back({gym, 15});
    }
    nextloc::write_file_atomic(dir / "gps.csv", testsupport::gps_trace_csv("walker", plan));
    const auto r = nextloc_run({"prepare", "--dataset", (dir / "gps.csv").string(), "--kind", "gps", "--out",
                                (dir / "out").string(), "--min-records", "1", "--min-trajectories", "1"});
    CHECK(r.code == 0);
    const auto stops = nextloc::read_jsonl(dir / "out" / "stops.jsonl");
    REQUIRE(stops.size() == 9);  // one line per visit
    std::set<std::string> ids;
    for (const auto& s : stops) ids.insert(s["stop_id"].get<std::string>());
    CHECK(ids.size() == 3);
    CHECK(fs::exists(dir / "out" / "prepared.json"));
}

TEST_CASE("quiz command writes items and a key") {
    testsupport::TempDir dir("cli");
    nextloc::write_file_atomic(dir / "checkins.txt", testsupport::synthetic_checkins());
    const auto r = nextloc_run({"quiz", "--dataset", (dir / "checkins.txt").string(), "--out", (dir / "o").string(),
                                "--quiz-items", "40"});
    REQUIRE(r.code == 0);
    CHECK(nextloc::read_jsonl(dir / "o" / "quiz" / "quiz.jsonl").size() == 40);
    CHECK(nextloc::read_jsonl(dir / "o" / "quiz" / "answer_key.jsonl").size() == 40);
}

TEST_CASE("exit codes") {
    testsupport::TempDir dir("cli");
    CHECK(nextloc_run({"prepare", "--no-such-flag"}).code == 2);
    CHECK(nextloc_run({}).code == 2);
    CHECK(nextloc_run({"prepare"}).code == 2);
    CHECK(nextloc_run({"predict", "--out", (dir / "x").string(), "--runs", "0"}).code == 2);
    CHECK(nextloc_run({"predict", "--out", (dir / "x").string(), "--backend", "telepathy"}).code == 2);

    nextloc::write_file_atomic(dir / "empty.txt", "");
    const auto empty = nextloc_run({"prepare", "--dataset", (dir / "empty.txt").string(), "--out", (dir / "e").string()});
    CHECK(empty.code == 3);
    CHECK(empty.err.find("data error") != std::string::npos);
    CHECK(nextloc_run({"prepare", "--dataset", (dir / "missing.txt").string(), "--out", (dir / "m").string()}).code == 3);
    CHECK(nextloc_run({"evaluate", "--out", (dir / "nothing").string()}).code == 3);
}

TEST_CASE("remote backend without a key fails before any request") {
    testsupport::TempDir dir("cli");
    nextloc::write_file_atomic(dir / "checkins.txt", testsupport::synthetic_checkins());
    const auto o = (dir / "o").string();
    REQUIRE(nextloc_run({"prepare", "--dataset", (dir / "checkins.txt").string(), "--out", o}).code == 0);
    ::unsetenv("NEXTLOC_CLI_NO_KEY");
    const auto r = nextloc_run({"predict", "--out", o, "--backend", "remote-chat", "--model", "gpt-4o",
                                "--api-key-env", "NEXTLOC_CLI_NO_KEY", "--endpoint", "http://127.0.0.1:9"});
    CHECK(r.code == 2);
    CHECK(r.err.find("NEXTLOC_CLI_NO_KEY") != std::string::npos);
}

TEST_CASE("config file and the real binary") {
    testsupport::TempDir dir("cli");
    nextloc::write_file_atomic(dir / "checkins.txt", testsupport::synthetic_checkins());
    nextloc::write_file_atomic(dir / "run.ini", "dataset=" + (dir / "checkins.txt").string() + "\nout=" +
                                                    (dir / "o").string() + "\nhistory=10\n");
    const std::string cmd = std::string(NEXTLOC_CLI_PATH) + " prepare --config " + (dir / "run.ini").string() +
                            " > " + (dir / "log.txt").string() + " 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    const auto prepared = nlohmann::json::parse(read_file(dir / "o" / "prepared.json"));
    CHECK(prepared["history"] == 10);
    CHECK(read_file(dir / "log.txt").find("prepared checkins") != std::string::npos);
    CHECK(std::system((std::string(NEXTLOC_CLI_PATH) + " --version > /dev/null").c_str()) == 0);
}
