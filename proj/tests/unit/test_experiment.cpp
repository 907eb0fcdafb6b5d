#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fedmr/error.hpp"
#include "fedmr/experiment.hpp"

using namespace fedmr;

namespace {

std::string minimal_manifest(const std::string& extra_run_fields = "") {
    return R"({
      "name": "t",
      "seed": 5,
      "dataset": {"classes": 3, "dim": 4, "per_class": 30, "spread": 1.0},
      "partition": {"clients": 4, "mode": "iid", "min_shard_size": 2},
      "arch": {"hidden": [6]},
      "runs": [{"name": "r0", "strategy": "fedavg", "rounds": 3,
                "active_clients": 2,
                "local": {"epochs": 1, "batch_size": 8})" +
           extra_run_fields + R"(}]
    })";
}

std::filesystem::path fresh_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("fedmr_test_" + tag);
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("manifest parses with derived seeds") {
    const auto m = ExperimentManifest::from_json_text(minimal_manifest());
    CHECK(m.runs.size() == 1);
    CHECK(m.runs[0].cfg.population == 4);
    CHECK(m.runs[0].cfg.active == 2);
    // Seeds are expanded deterministically from the top-level seed.
    const auto again = ExperimentManifest::from_json_text(minimal_manifest());
    CHECK(m.dataset.seed == again.dataset.seed);
    CHECK(m.runs[0].cfg.seed == again.runs[0].cfg.seed);
}

TEST_CASE("manifest errors name the offending field") {
    auto bad = nlohmann::json::parse(minimal_manifest());
    bad["runs"][0]["active_clients"] = 9;  // > clients
    try {
        ExperimentManifest::from_json_text(bad.dump());
        FAIL("expected invalid-manifest");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidManifest);
        CHECK(std::string(e.what()).find("runs[0].active_clients") != std::string::npos);
    }

    auto missing = nlohmann::json::parse(minimal_manifest());
    missing.erase("dataset");
    CHECK_THROWS_AS(ExperimentManifest::from_json_text(missing.dump()), Error);

    auto bad_strategy = nlohmann::json::parse(minimal_manifest());
    bad_strategy["runs"][0]["strategy"] = "sgd";
    CHECK_THROWS_AS(ExperimentManifest::from_json_text(bad_strategy.dump()), Error);
}

TEST_CASE("metrics CSV round-trips records") {
    std::vector<RoundRecord> records(2);
    records[0] = {1, {3, 1}, {4, 6}, 1.5, 0.25, 0.75, 1e-12, 100, 200};
    records[1] = {2, {0, 2}, {2, 2}, 1.25, 0.5, 0.5, 0.0, 200, 400};
    const auto path = fresh_dir("csv");
    std::filesystem::create_directories(path);
    write_metrics_csv(path / "m.csv", records);
    const auto back = read_metrics_csv(path / "m.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].selected_clients == std::vector<int>{3, 1});
    CHECK(back[0].global_loss == 1.5);
    CHECK(back[0].lemma1_sum_gap == 1e-12);
    CHECK(back[1].bytes_down == 400);
    std::filesystem::remove_all(path);
}

TEST_CASE("cmd_run writes reproducible artifacts") {
    const auto m = ExperimentManifest::from_json_text(minimal_manifest());
    const auto dir_a = fresh_dir("run_a");
    const auto dir_b = fresh_dir("run_b");
    CHECK(cmd_run(m, dir_a, std::nullopt, 1) == 0);
    CHECK(cmd_run(m, dir_b, std::nullopt, 2) == 0);

    // Same manifest -> byte-identical metrics, regardless of threads.
    CHECK(slurp(dir_a / "r0" / "metrics.csv") == slurp(dir_b / "r0" / "metrics.csv"));
    CHECK(slurp(dir_a / "r0" / "metrics.jsonl") == slurp(dir_b / "r0" / "metrics.jsonl"));
    CHECK(std::filesystem::exists(dir_a / "r0" / "config.resolved.json"));
    CHECK(std::filesystem::exists(dir_a / "partition_map.json"));

    // The snapshot replays to the same bytes, checkpoints included.
    const auto snapshot =
        ExperimentManifest::from_json_text(slurp(dir_a / "r0" / "config.resolved.json"));
    const auto dir_c = fresh_dir("run_c");
    CHECK(cmd_run(snapshot, dir_c, std::nullopt, 1) == 0);
    CHECK(slurp(dir_a / "r0" / "metrics.csv") == slurp(dir_c / "r0" / "metrics.csv"));
    CHECK(slurp(dir_a / "r0" / "final_model.bin") ==
          slurp(dir_c / "r0" / "final_model.bin"));
    for (const auto& entry :
         std::filesystem::directory_iterator(dir_a / "r0" / "checkpoints")) {
        CHECK(slurp(entry.path()) ==
              slurp(dir_c / "r0" / "checkpoints" / entry.path().filename()));
    }

    // One checkpoint per eval record.
    const auto records = read_metrics_csv(dir_a / "r0" / "metrics.csv");
    size_t checkpoints = 0;
    for (const auto& entry :
         std::filesystem::directory_iterator(dir_a / "r0" / "checkpoints")) {
        checkpoints += entry.is_regular_file() ? 1 : 0;
    }
    CHECK(checkpoints == records.size());

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    std::filesystem::remove_all(dir_c);
}

TEST_CASE("eval cadence controls the CSV row count") {
    auto j = nlohmann::json::parse(minimal_manifest());
    j["runs"][0]["rounds"] = 5;
    j["runs"][0]["eval_every"] = 2;
    const auto m = ExperimentManifest::from_json_text(j.dump());
    const auto dir = fresh_dir("cadence");
    cmd_run(m, dir, std::nullopt, 1);
    const auto records = read_metrics_csv(dir / "r0" / "metrics.csv");
    // Oracle: rounds with r % 2 == 0 plus the final round.
    int expected = 0;
    for (int r = 1; r <= 5; ++r) expected += (r % 2 == 0 || r == 5) ? 1 : 0;
    CHECK(static_cast<int>(records.size()) == expected);
    std::filesystem::remove_all(dir);
}

TEST_CASE("all strategies run from a manifest and replay from snapshots") {
    auto j = nlohmann::json::parse(minimal_manifest());
    j["runs"] = nlohmann::json::array();
    j["runs"].push_back({{"name", "mr"},
                         {"strategy", "fedmr"},
                         {"rounds", 4},
                         {"active_clients", 2},
                         {"stage_switch", 1},
                         {"granularity", 0.5},
                         {"local", {{"epochs", 1}, {"batch_size", 8}}}});
    j["runs"].push_back({{"name", "prox"},
                         {"strategy", "fedprox"},
                         {"rounds", 3},
                         {"active_clients", 2},
                         {"prox_mu", 0.1},
                         {"local", {{"epochs", 1}, {"batch_size", 8}}}});
    j["runs"].push_back({{"name", "ind"},
                         {"strategy", "indep"},
                         {"rounds", 3},
                         {"active_clients", 2},
                         {"local", {{"epochs", 1}, {"batch_size", 8}}}});
    const auto m = ExperimentManifest::from_json_text(j.dump());
    CHECK(m.runs[0].cfg.granularity == 0.5);
    CHECK(m.runs[1].cfg.local.prox_mu == 0.1);

    const auto dir = fresh_dir("strategies");
    CHECK(cmd_run(m, dir, std::nullopt, 1) == 0);
    for (const auto name : {"mr", "prox", "ind"}) {
        // Each snapshot must replay its run byte-for-byte.
        const auto snapshot = ExperimentManifest::from_json_text(
            slurp(dir / name / "config.resolved.json"));
        const auto replay_dir = fresh_dir(std::string("strategies_replay_") + name);
        CHECK(cmd_run(snapshot, replay_dir, std::nullopt, 1) == 0);
        CHECK(slurp(dir / name / "metrics.csv") ==
              slurp(replay_dir / name / "metrics.csv"));
        std::filesystem::remove_all(replay_dir);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("export_dataset writes one JSON line per sample") {
    auto j = nlohmann::json::parse(minimal_manifest());
    j["export_dataset"] = true;
    const auto m = ExperimentManifest::from_json_text(j.dump());
    const auto dir = fresh_dir("export");
    cmd_run(m, dir, std::nullopt, 1);
    const auto text = slurp(dir / "dataset.jsonl");
    int lines = 0;
    int train_lines = 0;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const auto row = nlohmann::json::parse(line);
        CHECK(row.at("x").size() == 4);
        CHECK(row.at("y").get<int>() >= 0);
        train_lines += row.at("split") == "train" ? 1 : 0;
        ++lines;
    }
    // 3 classes x 30 per class, split 24/6.
    CHECK(lines == 90);
    CHECK(train_lines == 72);
    std::filesystem::remove_all(dir);
}

TEST_CASE("seed override moves every stream") {
    const auto m = ExperimentManifest::from_json_text(minimal_manifest());
    const auto dir_a = fresh_dir("seed_a");
    const auto dir_b = fresh_dir("seed_b");
    cmd_run(m, dir_a, 111, 1);
    cmd_run(m, dir_b, 222, 1);
    CHECK(slurp(dir_a / "r0" / "metrics.csv") != slurp(dir_b / "r0" / "metrics.csv"));
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("compare: self-comparison, config hashes, and the target scan") {
    auto j = nlohmann::json::parse(minimal_manifest());
    j["runs"][0]["rounds"] = 4;
    const auto m = ExperimentManifest::from_json_text(j.dump());
    const auto dir = fresh_dir("cmp");
    cmd_run(m, dir, std::nullopt, 1);

    const auto self = cmd_compare({dir / "r0", dir / "r0"}, 0.5);
    REQUIRE(self.rows.size() == 2);
    CHECK(self.rows[0].final_accuracy == self.rows[1].final_accuracy);
    CHECK(self.rows[0].best_accuracy == self.rows[1].best_accuracy);
    CHECK(self.rows[0].rounds_to_target == self.rows[1].rounds_to_target);

    // Same config, different run seed: same config hash, same fingerprint.
    auto j2 = j;
    j2["runs"][0]["seed"] = 987654;
    const auto m2 = ExperimentManifest::from_json_text(j2.dump());
    const auto dir2 = fresh_dir("cmp2");
    cmd_run(m2, dir2, std::nullopt, 1);
    const auto a = nlohmann::json::parse(slurp(dir / "r0" / "config.resolved.json"));
    const auto b = nlohmann::json::parse(slurp(dir2 / "r0" / "config.resolved.json"));
    CHECK(a.at("config_hash") == b.at("config_hash"));
    CHECK(a.at("dataset_fingerprint") == b.at("dataset_fingerprint"));
    CHECK(slurp(dir / "r0" / "metrics.csv") != slurp(dir2 / "r0" / "metrics.csv"));

    // rounds-to-target against a scan oracle.
    const auto records = read_metrics_csv(dir / "r0" / "metrics.csv");
    for (double target : {0.0, 0.3, 0.9, 1.1}) {
        const auto result = cmd_compare({dir / "r0"}, target);
        int oracle = -1;
        for (const auto& r : records) {
            if (r.global_acc >= target) {
                oracle = r.round;
                break;
            }
        }
        CHECK(result.rows[0].rounds_to_target == oracle);
    }
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("compare refuses mismatched datasets") {
    auto j = nlohmann::json::parse(minimal_manifest());
    const auto m1 = ExperimentManifest::from_json_text(j.dump());
    j["dataset"]["seed"] = 999;  // different data
    const auto m2 = ExperimentManifest::from_json_text(j.dump());
    const auto dir1 = fresh_dir("fp1");
    const auto dir2 = fresh_dir("fp2");
    cmd_run(m1, dir1, std::nullopt, 1);
    cmd_run(m2, dir2, std::nullopt, 1);
    CHECK_THROWS_AS(cmd_compare({dir1 / "r0", dir2 / "r0"}, 0.5), Error);
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("verify suites pass on a fresh build") {
    for (const std::string suite : {"lemma1", "gradcheck", "secure", "partition"}) {
        const auto report = cmd_verify(suite);
        CHECK(report.passed);
        for (const auto& check : report.checks) {
            INFO(suite, "/", check.name, ": ", check.detail);
            CHECK(check.passed);
        }
        // Machine-readable output parses back.
        const auto parsed = nlohmann::json::parse(report.to_json_text());
        CHECK(parsed.at("suite") == suite);
        CHECK(parsed.at("passed") == true);
    }
    CHECK_THROWS_AS(cmd_verify("nonsense"), Error);
}
