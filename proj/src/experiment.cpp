#include "fedmr/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedmr/error.hpp"
#include "fedmr/rng.hpp"
#include "fedmr/secure.hpp"
#include "fedmr/serialize.hpp"

namespace fedmr {

using nlohmann::json;

namespace {

constexpr uint64_t kStreamDataset = 21;
constexpr uint64_t kStreamPartition = 22;
constexpr uint64_t kStreamRun = 23;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

[[noreturn]] void manifest_error(const std::string& field, const std::string& what) {
    throw Error(ErrorKind::InvalidManifest, field + ": " + what);
}

template <typename T>
T require(const json& j, const std::string& context, const std::string& key) {
    if (!j.contains(key)) manifest_error(context + "." + key, "missing field");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        manifest_error(context + "." + key, "wrong type");
    }
}

template <typename T>
T optional_field(const json& j, const std::string& context, const std::string& key,
                 T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        manifest_error(context + "." + key, "wrong type");
    }
}

uint64_t fnv1a_str(const std::string& text) {
    uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

json run_config_json(const NamedRun& run) {
    json j{{"name", run.name},
           {"strategy", strategy_name(run.cfg.strategy)},
           {"rounds", run.cfg.rounds},
           {"active_clients", run.cfg.active},
           {"stage_switch", run.cfg.stage_switch},
           {"eval_every", run.cfg.eval_every},
           {"seed", run.cfg.seed},
           {"local",
            {{"epochs", run.cfg.local.epochs},
             {"batch_size", run.cfg.local.batch_size},
             {"lr", run.cfg.local.lr},
             {"momentum", run.cfg.local.momentum}}}};
    if (run.cfg.granularity) {
        j["granularity"] = *run.cfg.granularity;
    }
    if (run.cfg.strategy == Strategy::FedProx) {
        j["prox_mu"] = run.cfg.local.prox_mu;
    }
    return j;
}

json manifest_json(const ExperimentManifest& m) {
    json j;
    j["name"] = m.name;
    j["seed"] = m.seed;
    j["dataset"] = {{"classes", m.dataset.classes},
                    {"dim", m.dataset.dim},
                    {"per_class", m.dataset.per_class},
                    {"spread", m.dataset.spread},
                    {"seed", m.dataset.seed}};
    j["partition"] = {
        {"clients", m.partition.num_clients},
        {"mode", m.partition.mode == PartitionMode::Iid ? "iid" : "dirichlet"},
        {"alpha", m.partition.alpha},
        {"min_shard_size", m.partition.min_shard_size},
        {"seed", m.partition.seed}};
    j["arch"] = {{"hidden", m.hidden}};
    j["export_dataset"] = m.export_dataset;
    j["runs"] = json::array();
    for (const auto& run : m.runs) j["runs"].push_back(run_config_json(run));
    return j;
}

// Hash of the resolved config with every seed zeroed: runs that differ only
// in seeds share a hash.
uint64_t config_hash(const ExperimentManifest& m, const NamedRun& run) {
    ExperimentManifest scrubbed = m;
    scrubbed.seed = 0;
    scrubbed.dataset.seed = 0;
    scrubbed.partition.seed = 0;
    scrubbed.runs = {run};
    scrubbed.runs.front().cfg.seed = 0;
    scrubbed.runs.front().name.clear();
    return fnv1a_str(manifest_json(scrubbed).dump());
}

}  // namespace

ExperimentManifest ExperimentManifest::from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidManifest, std::string("not valid JSON: ") + e.what());
    }
    if (root.contains("manifest")) root = root.at("manifest");  // resolved snapshot

    ExperimentManifest m;
    m.name = optional_field<std::string>(root, "", "name", "experiment");
    m.seed = optional_field<uint64_t>(root, "", "seed", 0);

    if (!root.contains("dataset")) manifest_error("dataset", "missing field");
    const auto& ds = root.at("dataset");
    m.dataset.classes = require<int>(ds, "dataset", "classes");
    m.dataset.dim = require<int>(ds, "dataset", "dim");
    m.dataset.per_class = require<int>(ds, "dataset", "per_class");
    m.dataset.spread = optional_field<double>(ds, "dataset", "spread", 1.0);
    m.dataset.seed =
        optional_field<uint64_t>(ds, "dataset", "seed", derive_seed(m.seed, kStreamDataset));
    if (m.dataset.classes < 1) manifest_error("dataset.classes", "must be >= 1");
    if (m.dataset.dim < m.dataset.classes - 1) {
        manifest_error("dataset.dim", "must be >= classes - 1 for simplex centers");
    }
    if (m.dataset.per_class < 1) manifest_error("dataset.per_class", "must be >= 1");
    if (!(m.dataset.spread > 0.0)) manifest_error("dataset.spread", "must be > 0");

    if (!root.contains("partition")) manifest_error("partition", "missing field");
    const auto& part = root.at("partition");
    m.partition.num_clients = require<int>(part, "partition", "clients");
    const auto mode = optional_field<std::string>(part, "partition", "mode", "iid");
    if (mode == "iid") {
        m.partition.mode = PartitionMode::Iid;
    } else if (mode == "dirichlet") {
        m.partition.mode = PartitionMode::Dirichlet;
        m.partition.alpha = require<double>(part, "partition", "alpha");
        if (!(m.partition.alpha > 0.0)) manifest_error("partition.alpha", "must be > 0");
    } else {
        manifest_error("partition.mode", "expected iid or dirichlet");
    }
    m.partition.seed = optional_field<uint64_t>(part, "partition", "seed",
                                                derive_seed(m.seed, kStreamPartition));
    if (m.partition.num_clients < 1) manifest_error("partition.clients", "must be >= 1");

    if (root.contains("arch")) {
        m.hidden = optional_field<std::vector<int>>(root.at("arch"), "arch", "hidden",
                                                    std::vector<int>{32});
    } else {
        m.hidden = {32};
    }
    for (int width : m.hidden) {
        if (width < 1) manifest_error("arch.hidden", "widths must be >= 1");
    }
    m.export_dataset = optional_field<bool>(root, "", "export_dataset", false);

    if (!root.contains("runs") || !root.at("runs").is_array() || root.at("runs").empty()) {
        manifest_error("runs", "need at least one run");
    }
    int index = 0;
    for (const auto& rj : root.at("runs")) {
        const std::string context = "runs[" + std::to_string(index) + "]";
        NamedRun run;
        run.name = optional_field<std::string>(rj, context, "name",
                                               "run" + std::to_string(index));
        const auto strategy =
            strategy_from_name(require<std::string>(rj, context, "strategy"));
        if (!strategy) manifest_error(context + ".strategy", "unknown strategy");
        run.cfg.strategy = *strategy;
        run.cfg.rounds = require<int>(rj, context, "rounds");
        run.cfg.population = m.partition.num_clients;
        run.cfg.active = require<int>(rj, context, "active_clients");
        if (run.cfg.active > m.partition.num_clients) {
            manifest_error(context + ".active_clients",
                           "exceeds partition.clients (" +
                               std::to_string(m.partition.num_clients) + ")");
        }
        run.cfg.stage_switch = optional_field<int>(rj, context, "stage_switch", 0);
        if (rj.contains("granularity") && !rj.at("granularity").is_null()) {
            run.cfg.granularity = require<double>(rj, context, "granularity");
        }
        run.cfg.eval_every = optional_field<int>(rj, context, "eval_every", 1);
        run.cfg.seed = optional_field<uint64_t>(
            rj, context, "seed", derive_seed(m.seed, kStreamRun, static_cast<uint64_t>(index)));
        if (rj.contains("local")) {
            const auto& lj = rj.at("local");
            const std::string lctx = context + ".local";
            run.cfg.local.epochs = optional_field<int>(lj, lctx, "epochs", 5);
            run.cfg.local.batch_size = optional_field<int>(lj, lctx, "batch_size", 50);
            run.cfg.local.lr = optional_field<double>(lj, lctx, "lr", 0.01);
            run.cfg.local.momentum = optional_field<double>(lj, lctx, "momentum", 0.9);
        }
        run.cfg.local.prox_mu = optional_field<double>(rj, context, "prox_mu", 0.0);
        try {
            run.cfg.validate();
        } catch (const Error& e) {
            manifest_error(context, e.what());
        }
        for (const auto& existing : m.runs) {
            if (existing.name == run.name) {
                manifest_error(context + ".name", "duplicate run name " + run.name);
            }
        }
        m.runs.push_back(std::move(run));
        ++index;
    }

    const int default_floor = 2 * m.runs.front().cfg.local.batch_size;
    m.partition.min_shard_size =
        optional_field<int>(part, "partition", "min_shard_size", default_floor);
    if (m.partition.min_shard_size < 1) {
        manifest_error("partition.min_shard_size", "must be >= 1");
    }
    return m;
}

ExperimentManifest ExperimentManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open manifest " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

std::string ExperimentManifest::to_json_text() const {
    return manifest_json(*this).dump(2);
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<RoundRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << "# " << kMetricsSchema << "\n";
    out << "round,selected_clients,global_loss,global_acc,cosine_mean,"
           "lemma1_sum_gap,bytes_up,bytes_down\n";
    for (const auto& r : records) {
        out << r.round << ',';
        for (size_t i = 0; i < r.selected_clients.size(); ++i) {
            if (i > 0) out << ';';
            out << r.selected_clients[i];
        }
        out << ',' << format_double(r.global_loss) << ',' << format_double(r.global_acc)
            << ',' << format_double(r.cosine_mean) << ','
            << format_double(r.lemma1_sum_gap) << ',' << r.bytes_up << ','
            << r.bytes_down << '\n';
    }
}

std::vector<RoundRecord> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("# fedmr-metrics", 0) != 0) {
        throw Error(ErrorKind::Io, path.string() + " lacks the metrics schema header");
    }
    std::getline(in, line);  // column header
    std::vector<RoundRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        RoundRecord r;
        std::getline(ss, field, ',');
        r.round = std::stoi(field);
        std::getline(ss, field, ',');
        if (!field.empty()) {
            std::stringstream ids(field);
            std::string id;
            while (std::getline(ids, id, ';')) r.selected_clients.push_back(std::stoi(id));
        }
        std::getline(ss, field, ',');
        r.global_loss = std::strtod(field.c_str(), nullptr);
        std::getline(ss, field, ',');
        r.global_acc = std::strtod(field.c_str(), nullptr);
        std::getline(ss, field, ',');
        r.cosine_mean = std::strtod(field.c_str(), nullptr);
        std::getline(ss, field, ',');
        r.lemma1_sum_gap = std::strtod(field.c_str(), nullptr);
        std::getline(ss, field, ',');
        r.bytes_up = std::stoull(field);
        std::getline(ss, field, ',');
        r.bytes_down = std::stoull(field);
        records.push_back(std::move(r));
    }
    return records;
}

void write_metrics_jsonl(const std::filesystem::path& path,
                         const std::vector<RoundRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    for (const auto& r : records) {
        json j{{"round", r.round},
               {"selected_clients", r.selected_clients},
               {"local_iterations", r.local_iterations},
               {"global_loss", r.global_loss},
               {"global_acc", r.global_acc},
               {"cosine_mean", r.cosine_mean},
               {"lemma1_sum_gap", r.lemma1_sum_gap},
               {"bytes_up", r.bytes_up},
               {"bytes_down", r.bytes_down}};
        out << j.dump() << '\n';
    }
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text;
}

void export_dataset_jsonl(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    auto dump_split = [&](const DataView& view, const char* split) {
        for (int i = 0; i < view.count; ++i) {
            json j;
            j["split"] = split;
            j["y"] = view.y[i];
            j["x"] = std::vector<double>(view.x + static_cast<size_t>(i) * view.dim,
                                         view.x + static_cast<size_t>(i + 1) * view.dim);
            out << j.dump() << '\n';
        }
    };
    dump_split(ds.train_view(), "train");
    dump_split(ds.test_view(), "test");
}

}  // namespace

int cmd_run(const ExperimentManifest& manifest_in, const std::filesystem::path& out_dir,
            std::optional<uint64_t> seed_override, int threads) {
    ExperimentManifest manifest = manifest_in;
    if (seed_override) {
        // Re-derive every seed from the override so one flag moves the run.
        manifest.seed = *seed_override;
        manifest.dataset.seed = derive_seed(manifest.seed, kStreamDataset);
        manifest.partition.seed = derive_seed(manifest.seed, kStreamPartition);
        for (size_t i = 0; i < manifest.runs.size(); ++i) {
            manifest.runs[i].cfg.seed =
                derive_seed(manifest.seed, kStreamRun, static_cast<uint64_t>(i));
        }
    }

    std::filesystem::create_directories(out_dir);
    const Dataset dataset =
        make_blobs(manifest.dataset.classes, manifest.dataset.dim,
                   manifest.dataset.per_class, manifest.dataset.spread,
                   manifest.dataset.seed);
    const auto shards = partition(dataset, manifest.partition);
    const auto arch =
        ArchitectureSpec::mlp(dataset.feature_dim, manifest.hidden, dataset.num_classes);

    json partition_map = json::object();
    for (const auto& shard : shards) {
        partition_map[std::to_string(shard.client_id)] = shard.sample_indices;
    }
    write_text(out_dir / "partition_map.json", partition_map.dump());
    write_text(out_dir / "manifest.resolved.json", manifest.to_json_text());
    if (manifest.export_dataset) {
        export_dataset_jsonl(out_dir / "dataset.jsonl", dataset);
    }

    for (const auto& named : manifest.runs) {
        const auto run_dir = out_dir / named.name;
        std::filesystem::create_directories(run_dir / "checkpoints");

        std::vector<std::pair<int, LayeredModel>> checkpoints;
        RoundObserver observer;
        observer.on_round = [&](int round, const ModelList&, const ModelList&,
                                const ModelList& next) {
            if (round % named.cfg.eval_every == 0 || round == named.cfg.rounds) {
                checkpoints.emplace_back(round, aggregate_mean(next));
            }
        };
        const auto result =
            run(named.cfg, arch, shards, dataset.test_view(), threads, &observer);

        write_metrics_csv(run_dir / "metrics.csv", result.records);
        write_metrics_jsonl(run_dir / "metrics.jsonl", result.records);
        for (const auto& [round, model] : checkpoints) {
            char name[32];
            std::snprintf(name, sizeof(name), "round_%06d.bin", round);
            save_model(model, run_dir / "checkpoints" / name);
        }
        save_model(result.final_global, run_dir / "final_model.bin");

        ExperimentManifest single = manifest;
        single.runs = {named};
        json snapshot;
        snapshot["schema"] = "fedmr-run v1";
        snapshot["manifest"] = json::parse(single.to_json_text());
        snapshot["dataset_fingerprint"] = dataset.fingerprint();
        snapshot["config_hash"] = config_hash(manifest, named);
        write_text(run_dir / "config.resolved.json", snapshot.dump(2));
    }
    return 0;
}

CompareResult cmd_compare(const std::vector<std::filesystem::path>& run_dirs,
                          double target_accuracy) {
    if (run_dirs.empty()) {
        throw Error(ErrorKind::IncompatibleRuns, "no run directories given");
    }
    CompareResult result;
    result.target = target_accuracy;
    for (const auto& dir : run_dirs) {
        std::ifstream in(dir / "config.resolved.json");
        if (!in) {
            throw Error(ErrorKind::Io, "missing config.resolved.json under " + dir.string());
        }
        json snapshot;
        try {
            snapshot = json::parse(in);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Io, dir.string() + ": bad snapshot: " + e.what());
        }
        CompareRow row;
        row.name = snapshot.at("manifest").at("runs").at(0).value("name", dir.string());
        row.dataset_fingerprint = snapshot.at("dataset_fingerprint").get<uint64_t>();
        const auto records = read_metrics_csv(dir / "metrics.csv");
        if (records.empty()) {
            throw Error(ErrorKind::IncompatibleRuns, dir.string() + " has no metrics rows");
        }
        row.final_accuracy = records.back().global_acc;
        for (const auto& r : records) {
            row.best_accuracy = std::max(row.best_accuracy, r.global_acc);
            if (row.rounds_to_target < 0 && r.global_acc >= target_accuracy) {
                row.rounds_to_target = r.round;
            }
        }
        result.rows.push_back(std::move(row));
    }
    for (const auto& row : result.rows) {
        if (row.dataset_fingerprint != result.rows.front().dataset_fingerprint) {
            throw Error(ErrorKind::IncompatibleRuns,
                        "dataset fingerprints differ between runs (" + row.name + ")");
        }
    }
    return result;
}

std::string compare_table(const CompareResult& result) {
    std::ostringstream out;
    out << "run,final_acc,best_acc,rounds_to_target(acc>=" << format_double(result.target)
        << ")\n";
    for (const auto& row : result.rows) {
        out << row.name << ',' << format_double(row.final_accuracy) << ','
            << format_double(row.best_accuracy) << ',' << row.rounds_to_target << '\n';
    }
    return out.str();
}

std::string VerifyReport::to_json_text() const {
    json j;
    j["suite"] = suite;
    j["passed"] = passed;
    j["checks"] = json::array();
    for (const auto& check : checks) {
        j["checks"].push_back(
            {{"name", check.name}, {"passed", check.passed}, {"detail", check.detail}});
    }
    return j.dump(2);
}

namespace {

LayeredModel random_model(Rng& rng, int n_layers, int max_dim) {
    LayeredModel model;
    model.layers.reserve(static_cast<size_t>(n_layers));
    for (int li = 0; li < n_layers; ++li) {
        LayerBlock block;
        block.layer_index = li;
        const int rows = 1 + static_cast<int>(rng.uniform_index(max_dim));
        const int cols = 1 + static_cast<int>(rng.uniform_index(max_dim));
        block.shape = {rows, cols};
        block.values.resize(static_cast<size_t>(rows) * cols);
        for (auto& v : block.values) v = rng.normal();
        model.layers.push_back(std::move(block));
    }
    model.arch_id = compute_arch_id(model);
    return model;
}

ModelList random_model_list(Rng& rng, int k, int n_layers, int max_dim) {
    ModelList models;
    const auto shape_ref = random_model(rng, n_layers, max_dim);
    for (int i = 0; i < k; ++i) {
        LayeredModel m = shape_ref;
        for (auto& layer : m.layers) {
            for (auto& v : layer.values) v = rng.normal();
        }
        models.push_back(std::move(m));
    }
    return models;
}

VerifyReport verify_lemma1() {
    VerifyReport report;
    report.suite = "lemma1";
    Rng rng(0x1e77a1);
    double max_sum_gap = 0.0;
    double max_sqdist_gap = 0.0;
    double max_mean_gap = 0.0;
    const int cases = 100;
    for (int i = 0; i < cases; ++i) {
        const int k = 2 + static_cast<int>(rng.uniform_index(19));
        const int n_layers = 2 + static_cast<int>(rng.uniform_index(11));
        auto models = random_model_list(rng, k, n_layers, 5);
        const bool segmented = rng.uniform() < 0.5;
        const auto groups = segmented
                                ? segment_groups(n_layers, 0.1 + 0.9 * rng.uniform())
                                : per_layer_groups(n_layers);
        const auto plan = sample_plan(k, groups, rng.next_u64());
        const auto mixed = recombine(models, plan);
        LayeredModel x = models.front();
        for (auto& layer : x.layers) {
            for (auto& v : layer.values) v = rng.normal();
        }
        const auto lemma = check_lemma1(models, mixed, x);
        max_sum_gap = std::max(max_sum_gap, lemma.sum_gap);
        max_sqdist_gap = std::max(max_sqdist_gap, lemma.sqdist_gap);
        max_mean_gap = std::max(
            max_mean_gap, max_abs_difference(aggregate_mean(models), aggregate_mean(mixed)));
    }
    report.checks.push_back({"sum-conservation",
                             max_sum_gap <= 1e-9,
                             "max sum gap " + format_double(max_sum_gap) + " over " +
                                 std::to_string(cases) + " cases"});
    report.checks.push_back({"sqdist-conservation",
                             max_sqdist_gap <= 1e-12,
                             "max relative gap " + format_double(max_sqdist_gap)});
    report.checks.push_back({"aggregate-invariance",
                             max_mean_gap <= 1e-9,
                             "max mean gap " + format_double(max_mean_gap)});
    return report;
}

// Central differences break across a ReLU kink; cases whose hidden
// pre-activations come too close to zero are resampled.
double min_hidden_preactivation(const LayeredModel& model, const DataView& batch) {
    double smallest = 1e300;
    std::vector<double> h(batch.x, batch.x + static_cast<size_t>(batch.count) * batch.dim);
    const size_t dense_layers = model.layers.size() / 2;
    for (size_t l = 0; l + 1 < dense_layers; ++l) {
        const auto& w = model.layers[2 * l];
        const auto& b = model.layers[2 * l + 1];
        const int out = w.shape[0];
        const int in = w.shape[1];
        std::vector<double> z(static_cast<size_t>(batch.count) * out);
        for (int i = 0; i < batch.count; ++i) {
            for (int o = 0; o < out; ++o) {
                double acc = b.values[static_cast<size_t>(o)];
                for (int j = 0; j < in; ++j) {
                    acc += w.values[static_cast<size_t>(o) * in + j] *
                           h[static_cast<size_t>(i) * in + j];
                }
                z[static_cast<size_t>(i) * out + o] = acc;
                smallest = std::min(smallest, std::abs(acc));
            }
        }
        for (auto& v : z) v = v > 0 ? v : 0.0;
        h = std::move(z);
    }
    return smallest;
}

VerifyReport verify_gradcheck() {
    VerifyReport report;
    report.suite = "gradcheck";
    Rng rng(0x96adc);
    double worst = 0.0;
    const int cases = 10;
    for (int i = 0; i < cases; ++i) {
        const int input_dim = 2 + static_cast<int>(rng.uniform_index(3));
        const int classes = 2 + static_cast<int>(rng.uniform_index(3));
        std::vector<int> hidden;
        const int depth = static_cast<int>(rng.uniform_index(4));  // up to 3 hidden
        for (int h = 0; h < depth; ++h) {
            hidden.push_back(2 + static_cast<int>(rng.uniform_index(4)));
        }
        const auto arch = ArchitectureSpec::mlp(input_dim, hidden, classes);
        LayeredModel model;
        const int count = 3 + static_cast<int>(rng.uniform_index(4));
        std::vector<double> x(static_cast<size_t>(count) * input_dim);
        std::vector<int> y(static_cast<size_t>(count));
        for (auto& label : y) {
            label = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(classes)));
        }
        do {
            model = init_model(arch, rng.next_u64());
            for (auto& v : x) v = rng.normal();
        } while (min_hidden_preactivation(model, {x.data(), y.data(), count, input_dim}) <
                 1e-3);
        const DataView batch{x.data(), y.data(), count, input_dim};
        const auto grad = backward(model, batch);
        const double h = 1e-5;
        for (size_t li = 0; li < model.layers.size(); ++li) {
            for (size_t e = 0; e < model.layers[li].values.size(); ++e) {
                auto probe = model;
                probe.layers[li].values[e] += h;
                const double up = forward(probe, batch).loss;
                probe.layers[li].values[e] -= 2 * h;
                const double down = forward(probe, batch).loss;
                const double numeric = (up - down) / (2 * h);
                const double analytic = grad.layers[li].values[e];
                const double scale =
                    std::max({std::abs(numeric), std::abs(analytic), 1e-8});
                worst = std::max(worst, std::abs(numeric - analytic) / scale);
            }
        }
    }
    report.checks.push_back({"central-differences",
                             worst <= 1e-5,
                             "max relative error " + format_double(worst) + " over " +
                                 std::to_string(cases) + " nets"});
    return report;
}

VerifyReport verify_secure() {
    VerifyReport report;
    report.suite = "secure";
    Rng rng(0x5ec);
    bool conserved = true;
    bool balanced = true;
    bool complete = true;
    const int cases = 100;
    for (int i = 0; i < cases; ++i) {
        const int k = 2 + static_cast<int>(rng.uniform_index(9));
        const int n_layers = 1 + static_cast<int>(rng.uniform_index(8));
        auto models = random_model_list(rng, k, n_layers, 4);
        SecureConfig cfg;
        cfg.repeats = 1 + static_cast<int>(rng.uniform_index(3));
        cfg.n_low = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n_layers) + 1));
        cfg.n_high = cfg.n_low + static_cast<int>(rng.uniform_index(
                                     static_cast<uint64_t>(n_layers - cfg.n_low) + 1));
        cfg.seed = rng.next_u64();
        const auto policy = rng.uniform() < 0.5 ? DeliveryPolicy::Fifo
                                                : DeliveryPolicy::RandomInterleave;
        const auto session = secure_round(models, cfg, policy);
        balanced = balanced &&
                   session.traffic.send_messages == session.traffic.return_messages;
        for (const auto& state : session.final_states) {
            for (const auto& buffer : state.layer_buffers) {
                complete = complete && buffer.size() == 1;
            }
        }
        // Nonce multisets per layer index must be conserved exactly.
        std::vector<std::vector<uint64_t>> expected(static_cast<size_t>(n_layers));
        for (int c = 0; c < k; ++c) {
            for (int li = 0; li < n_layers; ++li) {
                expected[static_cast<size_t>(li)].push_back(
                    static_cast<uint64_t>(c) * n_layers + li + 1);
            }
        }
        std::vector<std::vector<uint64_t>> got(static_cast<size_t>(n_layers));
        for (const auto& state : session.final_states) {
            for (int li = 0; li < n_layers; ++li) {
                for (const auto& layer : state.layer_buffers[static_cast<size_t>(li)]) {
                    got[static_cast<size_t>(li)].push_back(layer.nonce);
                }
            }
        }
        for (int li = 0; li < n_layers; ++li) {
            auto& e = expected[static_cast<size_t>(li)];
            auto& g = got[static_cast<size_t>(li)];
            std::sort(e.begin(), e.end());
            std::sort(g.begin(), g.end());
            conserved = conserved && e == g;
        }
    }
    report.checks.push_back({"nonce-conservation", conserved,
                             std::to_string(cases) + " randomized sessions"});
    report.checks.push_back({"message-balance", balanced, "#send == #return"});
    report.checks.push_back({"buffer-completeness", complete,
                             "one layer per buffer at session end"});
    return report;
}

VerifyReport verify_partition() {
    VerifyReport report;
    report.suite = "partition";
    const auto dataset = make_blobs(6, 8, 120, 1.0, 0xda7a);
    bool exact = true;
    double mean_gap = 0.0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        PartitionSpec spec{12, PartitionMode::Dirichlet, 0.5, 1, seed};
        const auto shards = partition(dataset, spec);
        std::vector<char> used(static_cast<size_t>(dataset.train_size()), 0);
        int total = 0;
        for (const auto& shard : shards) {
            total += shard.size();
            for (int idx : shard.sample_indices) {
                if (used[static_cast<size_t>(idx)]) exact = false;
                used[static_cast<size_t>(idx)] = 1;
            }
        }
        exact = exact && total == dataset.train_size();
    }
    // Dirichlet proportions should average 1/N per client.
    {
        Rng rng(0xd112);
        const int n = 8;
        std::vector<double> mean(static_cast<size_t>(n), 0.0);
        const int draws = 10000;
        for (int d = 0; d < draws; ++d) {
            const auto p = rng.dirichlet(0.5, n);
            for (int i = 0; i < n; ++i) mean[static_cast<size_t>(i)] += p[static_cast<size_t>(i)];
        }
        for (int i = 0; i < n; ++i) {
            mean_gap = std::max(mean_gap,
                                std::abs(mean[static_cast<size_t>(i)] / draws - 1.0 / n));
        }
    }
    // Heterogeneity must rise as alpha falls.
    double skewed = 0.0;
    double mild = 0.0;
    double iid = 0.0;
    constexpr int kSeeds = 25;
    for (uint64_t seed = 0; seed < kSeeds; ++seed) {
        PartitionSpec s1{10, PartitionMode::Dirichlet, 0.1, 1, seed};
        PartitionSpec s2{10, PartitionMode::Dirichlet, 1.0, 1, seed};
        PartitionSpec s3{10, PartitionMode::Iid, 1.0, 1, seed};
        skewed += heterogeneity_report(partition(dataset, s1)).mean_entropy;
        mild += heterogeneity_report(partition(dataset, s2)).mean_entropy;
        iid += heterogeneity_report(partition(dataset, s3)).mean_entropy;
    }
    skewed /= kSeeds;
    mild /= kSeeds;
    iid /= kSeeds;

    report.checks.push_back({"exact-cover", exact, "shards tile the train split"});
    report.checks.push_back({"dirichlet-mean", mean_gap <= 0.01,
                             "max |E[p] - 1/N| = " + format_double(mean_gap)});
    report.checks.push_back(
        {"entropy-ordering", skewed < mild && mild < iid,
         "alpha=0.1: " + format_double(skewed) + ", alpha=1.0: " + format_double(mild) +
             ", iid: " + format_double(iid)});
    return report;
}

}  // namespace

VerifyReport cmd_verify(const std::string& suite) {
    VerifyReport report;
    if (suite == "lemma1") {
        report = verify_lemma1();
    } else if (suite == "gradcheck") {
        report = verify_gradcheck();
    } else if (suite == "secure") {
        report = verify_secure();
    } else if (suite == "partition") {
        report = verify_partition();
    } else {
        throw Error(ErrorKind::UnknownSuite,
                    suite + " (expected lemma1 | gradcheck | secure | partition)");
    }
    report.passed = !report.checks.empty() &&
                    std::all_of(report.checks.begin(), report.checks.end(),
                                [](const VerifyCheck& c) { return c.passed; });
    return report;
}

}  // namespace fedmr
