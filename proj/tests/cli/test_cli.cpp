// End-to-end checks against the built binary (path via FEDMR_BIN).

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* path = std::getenv("FEDMR_BIN");
    REQUIRE_MESSAGE(path != nullptr, "FEDMR_BIN must point at the fedmr binary");
    return path;
}

int run_cli(const std::string& args, const fs::path& capture = {}) {
    std::string cmd = binary() + " " + args;
    if (!capture.empty()) {
        cmd += " > " + capture.string() + " 2>&1";
    } else {
        cmd += " > /dev/null 2>&1";
    }
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("fedmr_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_manifest(const fs::path& path, int rounds, int clients, int active,
                    int eval_every = 1) {
    nlohmann::json j = {
        {"name", "cli"},
        {"seed", 9},
        {"dataset", {{"classes", 3}, {"dim", 4}, {"per_class", 30}, {"spread", 1.0}}},
        {"partition", {{"clients", clients}, {"mode", "iid"}, {"min_shard_size", 2}}},
        {"arch", {{"hidden", {6}}}},
        {"runs",
         {{{"name", "main"},
           {"strategy", "fedavg"},
           {"rounds", rounds},
           {"active_clients", active},
           {"eval_every", eval_every},
           {"local", {{"epochs", 1}, {"batch_size", 8}}}}}}};
    std::ofstream out(path);
    out << j.dump(2);
}

}  // namespace

TEST_CASE("run is deterministic at the byte level") {
    const auto dir = scratch("determinism");
    write_manifest(dir / "m.json", 4, 4, 2);
    CHECK(run_cli("run --manifest " + (dir / "m.json").string() + " --out " +
                  (dir / "a").string()) == 0);
    CHECK(run_cli("run --manifest " + (dir / "m.json").string() + " --out " +
                  (dir / "b").string()) == 0);
    CHECK(slurp(dir / "a" / "main" / "metrics.csv") ==
          slurp(dir / "b" / "main" / "metrics.csv"));
    fs::remove_all(dir);
}

TEST_CASE("invalid manifest exits nonzero and names the field") {
    const auto dir = scratch("invalid");
    write_manifest(dir / "m.json", 4, 3, 5);  // K > N
    const auto log = dir / "out.txt";
    CHECK(run_cli("run --manifest " + (dir / "m.json").string() + " --out " +
                      (dir / "x").string(),
                  log) != 0);
    const auto text = slurp(log);
    CHECK(text.find("active_clients") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("metrics rows follow the eval cadence") {
    const auto dir = scratch("cadence");
    write_manifest(dir / "m.json", 5, 4, 2, 2);
    CHECK(run_cli("run --manifest " + (dir / "m.json").string() + " --out " +
                  (dir / "out").string()) == 0);
    const auto csv = slurp(dir / "out" / "main" / "metrics.csv");
    // Schema comment + column header + rounds {2, 4, 5}.
    int lines = 0;
    for (char ch : csv) lines += ch == '\n' ? 1 : 0;
    CHECK(lines == 2 + 3);
    fs::remove_all(dir);
}

TEST_CASE("compare runs and verify suites through the binary") {
    const auto dir = scratch("compare");
    write_manifest(dir / "m.json", 3, 4, 2);
    REQUIRE(run_cli("run --manifest " + (dir / "m.json").string() + " --out " +
                    (dir / "out").string()) == 0);
    const auto table = dir / "table.txt";
    CHECK(run_cli("compare " + (dir / "out" / "main").string() + " " +
                      (dir / "out" / "main").string() + " --target 0.5",
                  table) == 0);
    const auto text = slurp(table);
    CHECK(text.find("main") != std::string::npos);

    const auto report = dir / "verify.json";
    CHECK(run_cli("verify --suite lemma1", report) == 0);
    const auto parsed = nlohmann::json::parse(slurp(report));
    CHECK(parsed.at("passed") == true);

    CHECK(run_cli("verify --suite bogus") != 0);
    fs::remove_all(dir);
}
