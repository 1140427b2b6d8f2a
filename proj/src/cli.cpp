// SPDX-License-Identifier: Apache-2.0
#include "nextloc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iostream>
#include <map>
#include <regex>
#include <sstream>

#include "nextloc/contamination.hpp"
#include "nextloc/error.hpp"
#include "nextloc/eval.hpp"
#include "nextloc/hash.hpp"
#include "nextloc/ingest.hpp"
#include "nextloc/instances.hpp"
#include "nextloc/parse.hpp"
#include "nextloc/predictors.hpp"
#include "nextloc/prompts.hpp"
#include "nextloc/report.hpp"
#include "nextloc/stops.hpp"

namespace fs = std::filesystem;

namespace nextloc::cli {
namespace {

constexpr const char* kStopIdPattern = "s[0-9]+";
constexpr const char* kCellIdPattern = "c-?[0-9]+_-?[0-9]+";

std::string now_iso() {
    return format_iso(std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()));
}

fs::path require_file(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw DataError("missing " + what + ": expected " + p.string());
    return p;
}

Json stats_json(const DatasetStats& s) {
    return {{"users", s.users}, {"unique_locations", s.unique_locations}, {"trajectories", s.trajectories}};
}

IdShape shape_from(const std::string& pattern) { return pattern.empty() ? IdShape{} : IdShape(pattern); }

std::string manifest_id_for(const RunConfig& cfg, const std::string& dataset_hash) {
    // Paths are left out: the same experiment written elsewhere keeps its id.
    auto config = cfg.to_json();
    for (const char* path_key : {"dataset", "out", "cache", "templates", "answers"}) config.erase(path_key);
    const Json key = {{"config", config}, {"dataset_hash", dataset_hash}};
    return short_hash(key.dump());
}

Json with_manifest(Json j, const std::string& manifest_id) {
    j["manifest_id"] = manifest_id;
    return j;
}

// Raw input -> filtered, segmented dataset, shared by prepare and ablate.
struct Prepared {
    std::string name;
    std::string dataset_hash;
    std::string id_pattern;
    std::size_t rows_in_file = 0;
    std::size_t parsed_rows = 0;
    std::vector<RejectedRow> rejects;
    std::vector<stops::StopLocation> stops;
    SegmentedDataset dataset;
    Json stats;
};

Prepared prepare_dataset(const RunConfig& cfg) {
    if (cfg.dataset.empty()) throw ConfigError("--dataset is required");
    const fs::path raw = require_file(cfg.dataset, "dataset file");

    Prepared p;
    p.name = cfg.dataset_name.empty() ? raw.stem().string() : cfg.dataset_name;
    p.dataset_hash = sha256_file(raw.string());

    Dataset ds;
    if (cfg.kind == "checkin") {
        auto parsed = parse_checkin_file(raw, p.name);
        p.rows_in_file = parsed.rows_in_file;
        p.parsed_rows = parsed.records.size();
        p.rejects = std::move(parsed.rejects);
        ds = std::move(parsed.dataset);
    } else if (cfg.kind == "gps") {
        auto parsed = stops::parse_gps_file(raw);
        p.rows_in_file = parsed.rows_in_file;
        p.parsed_rows = parsed.points.size();
        p.rejects = std::move(parsed.rejects);
        const auto kind = stops::parse_location_id_kind(cfg.location_id);
        stops::StayParams stay{cfg.stay_radius_m,
                               std::chrono::seconds(static_cast<long long>(cfg.min_dwell_min * 60))};
        stops::ClusterParams cluster{cfg.cluster_eps_m, cfg.cluster_min_pts};
        auto result = stops::run_stop_pipeline(parsed.points, p.name, stay, cluster, cfg.cell_size_m, kind);
        p.stops = std::move(result.stops);
        p.id_pattern = kind == stops::LocationIdKind::Stop ? kStopIdPattern : kCellIdPattern;
        ds = std::move(result.dataset);
    } else {
        throw ConfigError("--kind must be checkin or gps, got '" + cfg.kind + "'");
    }

    const auto gap = std::chrono::seconds(static_cast<long long>(cfg.gap_hours * 3600));
    const auto by_records = filter_users(ds, cfg.min_records);
    const auto segmented = segment_dataset(by_records, gap);
    p.dataset = filter_trajectory_users(segmented, cfg.min_trajectories);
    p.stats = {{"rows_in_file", p.rows_in_file},
               {"parsed_rows", p.parsed_rows},
               {"rejected_rows", p.rejects.size()},
               {"raw", {{"users", ds.users.size()}, {"unique_locations", ds.vocabulary.size()}}},
               {"before_trajectory_filter", stats_json(dataset_stats(segmented))},
               {"after_trajectory_filter", stats_json(dataset_stats(p.dataset))},
               {"filter_order",
                "users with fewer than " + std::to_string(cfg.min_records) + " records dropped; visits split at gaps of " +
                    std::to_string(static_cast<long long>(cfg.gap_hours)) + "h or more; users with fewer than " +
                    std::to_string(cfg.min_trajectories) +
                    " trajectories dropped; location counts taken over the surviving users"}};
    return p;
}

struct InstanceSets {
    std::vector<PredictionInstance> test;
    std::vector<PredictionInstance> train;
    InstanceBuild test_build;
};

InstanceSets build_sets(const RunConfig& cfg, const SegmentedDataset& ds) {
    InstanceSets s;
    const WindowSpec window{cfg.history, cfg.context};
    s.test_build = build_instances(ds, window, SplitPart::Test);
    s.test = cfg.sample_size > 0 ? sample_instances(s.test_build.instances, cfg.sample_size, cfg.seed)
                                 : s.test_build.instances;
    s.train = build_instances(ds, window, SplitPart::Train).instances;
    return s;
}

BackendConfig backend_config(const RunConfig& cfg) {
    BackendConfig b;
    b.kind = parse_backend_kind(cfg.backend);
    b.model = cfg.model.empty() ? (b.is_oracle() ? to_string(b.kind) : "") : cfg.model;
    if (!b.is_oracle()) {
        if (b.model.empty()) throw ConfigError("--model is required for the remote-chat backend");
        if (auto profile = profile_for_model(b.model)) b.sampling = profile->sampling;
        if (cfg.temperature) b.sampling.temperature = *cfg.temperature;
        if (cfg.max_new_tokens) b.sampling.max_new_tokens = *cfg.max_new_tokens;
        b.endpoint = cfg.endpoint;
        b.path = cfg.endpoint_path;
        b.api_key_env = cfg.api_key_env;
        b.requests_per_minute = cfg.rpm;
        b.max_retries = cfg.max_retries;
        b.timeout = std::chrono::milliseconds(cfg.timeout_ms);
    }
    return b;
}

const TemplateSet& templates_for(const RunConfig& cfg, std::optional<TemplateSet>& storage) {
    if (cfg.templates.empty()) return TemplateSet::builtin();
    storage = TemplateSet::from_directory(cfg.templates);
    return *storage;
}

struct Predictions {
    std::vector<RenderedPrompt> prompts;
    std::vector<std::vector<RawResponse>> responses;    // per run
    std::vector<std::vector<PredictionResult>> results;  // per run
};

Predictions predict_all(const RunConfig& cfg, const std::vector<PredictionInstance>& instances,
                        const std::vector<PredictionInstance>& train, Backend& backend, const TemplateSet& templates,
                        const IdShape& shape, const Vocabulary& vocab) {
    const Shots shots = parse_shots(cfg.shots);
    const std::size_t need = required_exemplars(shots);
    std::map<std::string, std::vector<PredictionInstance>> by_user;
    if (need > 0) {
        for (const auto& t : train) by_user[t.user_id].push_back(t);
    }

    Predictions p;
    std::vector<BatchJob> jobs;
    p.prompts.reserve(instances.size());
    for (const auto& inst : instances) {
        const auto exemplars = pick_exemplars(inst, by_user, train, need, cfg.seed);
        p.prompts.push_back(render(inst, shots, exemplars, {}, templates));
        jobs.push_back({&inst, p.prompts.back()});
    }

    const std::string& model = backend.config().model;
    for (int run = 1; run <= cfg.runs; ++run) {
        auto responses = run_batch(backend, jobs, run, cfg.concurrency);
        std::vector<PredictionResult> results;
        results.reserve(responses.size());
        for (std::size_t i = 0; i < responses.size(); ++i) {
            if (responses[i].failed) {
                PredictionResult r;
                r.instance_id = instances[i].instance_id;
                r.model = model;
                r.run_index = run;
                r.failed = true;
                results.push_back(std::move(r));
                continue;
            }
            results.push_back(classify(extract(responses[i].text, shape), vocab, instances[i], model, run));
        }
        p.responses.push_back(std::move(responses));
        p.results.push_back(std::move(results));
    }
    return p;
}

std::string dump_line(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

void write_predictions(const fs::path& dir, const Predictions& p, const std::string& manifest_id) {
    fs::create_directories(dir);
    std::string prompts;
    for (const auto& pr : p.prompts) {
        prompts += dump_line({{"instance_id", pr.instance_id},
                              {"shots", to_string(pr.shots)},
                              {"h_count", pr.h_count},
                              {"c_count", pr.c_count},
                              {"content_hash", pr.content_hash},
                              {"text", pr.text}}) +
                   '\n';
    }
    write_file_atomic(dir / "prompts.jsonl", prompts);
    for (std::size_t r = 0; r < p.results.size(); ++r) {
        std::string responses, results;
        for (const auto& x : p.responses[r]) responses += dump_line(with_manifest(response_to_json(x), manifest_id)) + '\n';
        for (const auto& x : p.results[r]) results += dump_line(with_manifest(result_to_json(x), manifest_id)) + '\n';
        const auto idx = std::to_string(r + 1);
        write_file_atomic(dir / ("responses_run" + idx + ".jsonl"), responses);
        write_file_atomic(dir / ("results_run" + idx + ".jsonl"), results);
    }
}

std::size_t count_failures(const Predictions& p) {
    std::size_t n = 0;
    for (const auto& run : p.results) n += static_cast<std::size_t>(std::count_if(run.begin(), run.end(), [](const auto& r) { return r.failed; }));
    return n;
}

ScoreOptions score_options(const RunConfig& cfg) {
    ScoreOptions o;
    o.ks = cfg.ks();
    o.denominator = parse_denominator(cfg.denominator);
    o.drop_hallucinated = cfg.drop_hallucinated;
    return o;
}

void check_monotone(const EvalReport& report) {
    for (const auto& run : report.runs) {
        std::optional<double> prev;
        for (const auto& [k, v] : run.acc) {
            if (prev && v && *v + 1e-12 < *prev) {
                throw Error("ACC@k is not monotone in k for run " + std::to_string(run.run_index));
            }
            if (v) prev = v;
        }
    }
}

struct Evaluated {
    EvalReport report;
    AttributionReport attribution;
};

Evaluated evaluate_runs(const RunConfig& cfg, const std::vector<PredictionInstance>& instances,
                        const std::vector<std::vector<PredictionResult>>& runs, EvalReport base) {
    const auto opts = score_options(cfg);
    Evaluated e;
    e.report = std::move(base);
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto scored = score_run(instances, runs[r], opts.drop_hallucinated);
        e.report.runs.push_back(summarise_run(scored, static_cast<int>(r + 1), opts));
        const auto a = attribute_sources(instances, scored, opts.ks.empty() ? 5 : opts.ks.back());
        e.attribution.both += a.both;
        e.attribution.history_only += a.history_only;
        e.attribution.context_only += a.context_only;
        e.attribution.neither += a.neither;
    }
    e.report.aggregate();
    check_monotone(e.report);
    return e;
}

std::vector<fs::path> run_files(const fs::path& dir, const std::string& prefix) {
    std::vector<std::pair<int, fs::path>> found;
    const std::regex re(prefix + "_run([0-9]+)\\.jsonl");
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const auto name = entry.path().filename().string();
        if (std::regex_match(name, m, re)) found.emplace_back(std::stoi(m[1].str()), entry.path());
    }
    std::sort(found.begin(), found.end());
    std::vector<fs::path> out;
    for (auto& [i, p] : found) out.push_back(p);
    return out;
}

AblationReport ablation_from_csv(const fs::path& csv, const std::vector<std::size_t>& ks) {
    AblationReport rep;
    for (auto& r : reports_from_csv(read_file(csv))) {
        r.aggregate();
        rep.arms.push_back({AblationArm{r.context, r.history}, r, {}});
    }
    attach_relative_changes(rep, ks);
    return rep;
}

std::string sanitise(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ? c : '_');
    return out;
}

}  // namespace

std::vector<std::size_t> RunConfig::ks() const {
    std::vector<std::size_t> out;
    std::stringstream in(k);
    std::string part;
    while (std::getline(in, part, ',')) {
        part.erase(0, part.find_first_not_of(" \t"));
        part.erase(part.find_last_not_of(" \t") + 1);
        if (part.empty()) continue;
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != part.size() || v < 1) throw ConfigError("--k expects positive integers, got '" + k + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ConfigError("--k is empty");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Json RunConfig::to_json() const {
    Json j = {{"command", command},
              {"dataset", dataset},
              {"dataset_name", dataset_name},
              {"kind", kind},
              {"location_id", location_id},
              {"out", out},
              {"backend", backend},
              {"model", model},
              {"endpoint", endpoint},
              {"endpoint_path", endpoint_path},
              {"api_key_env", api_key_env},
              {"temperature", temperature ? Json(*temperature) : Json(nullptr)},
              {"max_new_tokens", max_new_tokens ? Json(*max_new_tokens) : Json(nullptr)},
              {"rpm", rpm},
              {"max_retries", max_retries},
              {"timeout_ms", timeout_ms},
              {"concurrency", concurrency},
              {"cache", cache},
              {"shots", shots},
              {"history", history},
              {"context", context},
              {"runs", runs},
              {"sample_size", sample_size},
              {"seed", seed},
              {"k", k},
              {"templates", templates},
              {"denominator", denominator},
              {"drop_hallucinated", drop_hallucinated},
              {"min_records", min_records},
              {"min_trajectories", min_trajectories},
              {"gap_hours", gap_hours},
              {"stay_radius_m", stay_radius_m},
              {"min_dwell_min", min_dwell_min},
              {"cluster_eps_m", cluster_eps_m},
              {"cluster_min_pts", cluster_min_pts},
              {"cell_size_m", cell_size_m},
              {"quiz_items", quiz_items},
              {"quiz_label", quiz_label},
              {"answers", answers}};
    return j;
}

void RunConfig::validate() const {
    if (runs < 1) throw ConfigError("--runs must be at least 1");
    if (concurrency < 1) throw ConfigError("--concurrency must be at least 1");
    if (gap_hours <= 0) throw ConfigError("--gap-hours must be positive");
    if (rpm < 0) throw ConfigError("--rpm must be >= 0");
    if (max_retries < 0) throw ConfigError("--max-retries must be >= 0");
    if (temperature && *temperature < 0) throw ConfigError("--temperature must be >= 0");
    parse_shots(shots);
    parse_backend_kind(backend);
    parse_denominator(denominator);
    stops::parse_location_id_kind(location_id);
    ks();
}

std::string run_tag(const std::string& model, const std::string& shots, std::size_t context, std::size_t history) {
    return sanitise(model) + "_" + shots + "_C" + std::to_string(context) + "_H" + std::to_string(history);
}

std::string write_manifest(const fs::path& out_dir, const RunConfig& cfg, const std::string& dataset_hash,
                           Json details) {
    const auto id = manifest_id_for(cfg, dataset_hash);
    Json m = {{"manifest_id", id},
              {"command", cfg.command},
              {"config", cfg.to_json()},
              {"dataset_hash", dataset_hash},
              {"seed", cfg.seed},
              {"tool_version", kToolVersion},
              {"written_at", now_iso()}};
    for (auto& [key, value] : details.items()) m[key] = value;
    fs::create_directories(out_dir);
    append_line(out_dir / "manifests.jsonl", dump_line(m));
    return id;
}

void cmd_prepare(const RunConfig& cfg, std::ostream& log) {
    const auto started = now_iso();
    auto p = prepare_dataset(cfg);
    auto sets = build_sets(cfg, p.dataset);
    const fs::path out = cfg.out;
    fs::create_directories(out);
    const auto manifest_id = manifest_id_for(cfg, p.dataset_hash);

    p.stats["instances"] = {{"test_total", sets.test_build.instances.size()},
                            {"test_written", sets.test.size()},
                            {"train", sets.train.size()},
                            {"skipped_short_trajectory", sets.test_build.skipped_short_trajectory},
                            {"skipped_empty_history", sets.test_build.skipped_empty_history},
                            {"skipped_empty_context", sets.test_build.skipped_empty_context}};

    write_file_atomic(out / "instances.jsonl", instances_to_jsonl(sets.test));
    write_file_atomic(out / "exemplars.jsonl", instances_to_jsonl(sets.train));
    write_file_atomic(out / "vocabulary.txt", Vocabulary::from_ids(p.dataset.vocabulary).to_text());
    write_file_atomic(out / "stats.json", p.stats.dump(2) + '\n');
    write_file_atomic(out / "rejects.jsonl", rejects_to_jsonl(p.rejects));
    if (cfg.kind == "gps") write_file_atomic(out / "stops.jsonl", stops::stops_to_jsonl(p.stops));
    const Json prepared = {{"dataset_name", p.name},         {"kind", cfg.kind},
                           {"location_id", cfg.location_id}, {"id_pattern", p.id_pattern},
                           {"dataset_hash", p.dataset_hash}, {"manifest_id", manifest_id},
                           {"history", cfg.history},         {"context", cfg.context}};
    write_file_atomic(out / "prepared.json", prepared.dump(2) + '\n');

    write_manifest(out, cfg, p.dataset_hash,
                   {{"instance_count", sets.test.size()},
                    {"stats", p.stats},
                    {"notes", p.stats["filter_order"]},
                    {"started_at", started}});

    const auto& after = p.stats["after_trajectory_filter"];
    log << "prepared " << p.name << ": " << after["users"] << " users, " << after["unique_locations"]
        << " locations, " << after["trajectories"] << " trajectories, " << sets.test.size() << " test instances ("
        << p.rejects.size() << " rejected rows)\n";
}

void cmd_predict(const RunConfig& cfg, std::ostream& log) {
    const auto started = now_iso();
    const fs::path dir = cfg.out;
    const auto prepared = Json::parse(read_file(require_file(dir / "prepared.json", "prepared dataset (run prepare)")));
    const auto instances = read_instances(require_file(dir / "instances.jsonl", "instances file"));
    const auto train = parse_shots(cfg.shots) == Shots::Zero
                           ? std::vector<PredictionInstance>{}
                           : read_instances(require_file(dir / "exemplars.jsonl", "exemplars file"));
    const auto vocab = Vocabulary::from_file(require_file(dir / "vocabulary.txt", "vocabulary file"));
    const auto shape = shape_from(prepared.value("id_pattern", ""));
    const auto dataset_hash = prepared.at("dataset_hash").get<std::string>();

    const auto bcfg = backend_config(cfg);
    std::optional<ResponseCache> cache;
    if (!bcfg.is_oracle()) cache.emplace(cfg.cache.empty() ? dir / "cache.jsonl" : fs::path(cfg.cache));
    Backend backend(bcfg, cache ? &*cache : nullptr);

    std::optional<TemplateSet> tpl_storage;
    const auto& templates = templates_for(cfg, tpl_storage);

    const auto preds = predict_all(cfg, instances, train, backend, templates, shape, vocab);
    const auto manifest_id = manifest_id_for(cfg, dataset_hash);
    const auto tag = run_tag(bcfg.model, cfg.shots, cfg.context, cfg.history);
    const auto run_dir = dir / "runs" / tag;
    write_predictions(run_dir, preds, manifest_id);
    const Json meta = {{"model", bcfg.model},      {"backend", to_string(bcfg.kind)},
                       {"shots", cfg.shots},       {"C", cfg.context},
                       {"H", cfg.history},         {"dataset", prepared.at("dataset_name")},
                       {"runs", cfg.runs},         {"manifest_id", manifest_id}};
    write_file_atomic(run_dir / "run.json", meta.dump(2) + '\n');

    const auto stats = backend.stats();
    write_manifest(dir, cfg, dataset_hash,
                   {{"instance_count", instances.size()},
                    {"backend", bcfg.to_json()},
                    {"stats", stats.to_json()},
                    {"failures", count_failures(preds)},
                    {"run_dir", run_dir.string()},
                    {"started_at", started}});
    log << "predicted " << instances.size() << " instances x " << cfg.runs << " run(s) with " << bcfg.model
        << " -> " << run_dir.string() << " (network calls " << stats.network_calls << ", cache hits "
        << stats.cache_hits << ", failures " << count_failures(preds) << ")\n";
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
    const fs::path dir = cfg.out;
    const auto prepared = Json::parse(read_file(require_file(dir / "prepared.json", "prepared dataset (run prepare)")));
    const auto instances = read_instances(require_file(dir / "instances.jsonl", "instances file"));
    const auto dataset_hash = prepared.at("dataset_hash").get<std::string>();
    const auto manifest_id = manifest_id_for(cfg, dataset_hash);

    std::vector<fs::path> run_dirs;
    if (!cfg.model.empty()) {
        run_dirs.push_back(
            require_file(dir / "runs" / run_tag(cfg.model, cfg.shots, cfg.context, cfg.history), "run directory"));
    } else if (fs::exists(dir / "runs")) {
        for (const auto& e : fs::directory_iterator(dir / "runs")) {
            if (e.is_directory()) run_dirs.push_back(e.path());
        }
        std::sort(run_dirs.begin(), run_dirs.end());
    }
    if (run_dirs.empty()) throw DataError("no run directories under " + (dir / "runs").string() + " (run predict first)");

    for (const auto& rd : run_dirs) {
        const auto meta = Json::parse(read_file(require_file(rd / "run.json", "run metadata")));
        std::vector<std::vector<PredictionResult>> runs;
        for (const auto& f : run_files(rd, "results")) runs.push_back(read_results(f));
        if (runs.empty()) throw DataError("no results_run*.jsonl files in " + rd.string());

        EvalReport base;
        base.model = meta.at("model").get<std::string>();
        base.dataset = meta.at("dataset").get<std::string>();
        base.shots = meta.at("shots").get<std::string>();
        base.context = meta.at("C").get<std::size_t>();
        base.history = meta.at("H").get<std::size_t>();
        const auto e = evaluate_runs(cfg, instances, runs, base);

        write_file_atomic(rd / "eval.csv", reports_to_csv({e.report}, cfg.ks()));
        const Json summary = {{"report", report_to_json(e.report)},
                              {"attribution", attribution_to_json(e.attribution)},
                              {"denominator", cfg.denominator},
                              {"drop_hallucinated", cfg.drop_hallucinated},
                              {"manifest_id", manifest_id}};
        write_file_atomic(rd / "eval.json", summary.dump(2) + '\n');
        log << report_summary_text(e.report);
    }
    write_manifest(dir, cfg, dataset_hash, {{"instance_count", instances.size()}, {"evaluated", run_dirs.size()}});
}

void cmd_ablate(const RunConfig& cfg, std::ostream& log) {
    const auto started = now_iso();
    const auto p = prepare_dataset(cfg);
    const auto vocab = Vocabulary::from_ids(p.dataset.vocabulary);
    const auto shape = shape_from(p.id_pattern);
    const auto bcfg = backend_config(cfg);
    const fs::path out = cfg.out;
    const auto manifest_id = manifest_id_for(cfg, p.dataset_hash);

    std::optional<ResponseCache> cache;
    if (!bcfg.is_oracle()) cache.emplace(cfg.cache.empty() ? out / "cache.jsonl" : fs::path(cfg.cache));
    Backend backend(bcfg, cache ? &*cache : nullptr);
    std::optional<TemplateSet> tpl_storage;
    const auto& templates = templates_for(cfg, tpl_storage);

    // The default arm fixes the target set; other arms only change windows.
    RunConfig default_window = cfg;
    default_window.context = 6;
    default_window.history = 15;
    const auto defaults = build_sets(default_window, p.dataset).test;

    const auto ablation_dir = out / "ablation" / run_tag(bcfg.model, cfg.shots, 6, 15);
    auto evaluate_arm = [&](const AblationArm& arm, const std::vector<PredictionInstance>& instances) {
        RunConfig arm_cfg = cfg;
        arm_cfg.context = arm.context;
        arm_cfg.history = arm.history;
        const auto train = build_instances(p.dataset, WindowSpec{arm.history, arm.context}, SplitPart::Train).instances;
        const auto preds = predict_all(arm_cfg, instances, train, backend, templates, shape, vocab);
        write_predictions(ablation_dir / ("C" + std::to_string(arm.context) + "_H" + std::to_string(arm.history)), preds, manifest_id);
        EvalReport base;
        base.model = bcfg.model;
        base.dataset = p.name;
        base.shots = cfg.shots;
        return evaluate_runs(arm_cfg, instances, preds.results, base).report;
    };
    const auto report = run_ablation(p.dataset, defaults, default_arms(), evaluate_arm, cfg.ks());

    std::vector<EvalReport> reports;
    for (const auto& a : report.arms) reports.push_back(a.report);
    write_file_atomic(ablation_dir / "ablation.csv", reports_to_csv(reports, cfg.ks()));
    write_file_atomic(ablation_dir / "ablation.json", with_manifest(ablation_to_json(report), manifest_id).dump(2) + '\n');
    const auto k = cfg.ks().back();
    write_file_atomic(ablation_dir / "relative_change.svg", relative_change_svg({{bcfg.model + " / " + p.name, report}}, k));

    write_manifest(out, cfg, p.dataset_hash,
                   {{"instance_count", defaults.size()},
                    {"arms", report.arms.size()},
                    {"backend", bcfg.to_json()},
                    {"stats", backend.stats().to_json()},
                    {"ablation_dir", ablation_dir.string()},
                    {"started_at", started}});
    for (const auto& a : report.arms) {
        const auto rel = a.relative.find(k);
        const auto mean = a.report.mean(k);
        log << a.arm.label() << ": ACC@" << k << " = " << (mean ? format_metric(*mean) : "n/a") << ", relative change "
            << (rel != a.relative.end() && rel->second ? format_metric(*rel->second) : "n/a") << '\n';
    }
}

void cmd_quiz(const RunConfig& cfg, std::ostream& log) {
    if (cfg.dataset.empty()) throw ConfigError("--dataset is required");
    const fs::path raw = require_file(cfg.dataset, "dataset file");
    const auto parsed = parse_checkin_file(raw);
    const auto dataset_hash = sha256_file(raw.string());
    const auto manifest_id = manifest_id_for(cfg, dataset_hash);
    const auto items = generate_quiz(parsed.records, cfg.quiz_items, cfg.seed);
    const QuizOptions qopts{cfg.quiz_label, raw.filename().string()};

    const fs::path out = fs::path(cfg.out) / "quiz";
    fs::create_directories(out);
    write_file_atomic(out / "quiz.jsonl", quiz_to_jsonl(items, qopts));
    write_file_atomic(out / "answer_key.jsonl", answer_key_to_jsonl(items));
    const auto uni = letter_uniformity(items);
    const Json stats = {{"items", items.size()},
                        {"letter_counts", {{"A", uni.counts[0]}, {"B", uni.counts[1]}, {"C", uni.counts[2]}, {"D", uni.counts[3]}}},
                        {"chi_square", uni.chi_square},
                        {"p_value", uni.p_value},
                        {"manifest_id", manifest_id}};
    write_file_atomic(out / "quiz_stats.json", stats.dump(2) + '\n');

    Json details = {{"items", items.size()}};
    std::map<std::string, std::string> answers;
    std::string model = "answers";
    if (!cfg.answers.empty()) {
        for (const auto& j : read_jsonl(require_file(cfg.answers, "answers file"))) {
            answers[j.at("item_id").get<std::string>()] = j.at("answer").get<std::string>();
        }
        if (!cfg.model.empty()) model = cfg.model;
    } else if (parse_backend_kind(cfg.backend) == BackendKind::RemoteChat) {
        const auto bcfg = backend_config(cfg);
        model = bcfg.model;
        ResponseCache cache(cfg.cache.empty() ? fs::path(cfg.out) / "cache.jsonl" : fs::path(cfg.cache));
        Backend backend(bcfg, &cache);
        std::vector<PredictionInstance> stubs(items.size());
        std::vector<BatchJob> jobs;
        for (std::size_t i = 0; i < items.size(); ++i) {
            stubs[i].instance_id = items[i].item_id;
            RenderedPrompt pr;
            pr.text = items[i].prompt(qopts.dataset_label, qopts.file_name);
            pr.instance_id = items[i].item_id;
            pr.content_hash = sha256_hex(pr.text);
            jobs.push_back({&stubs[i], std::move(pr)});
        }
        std::string lines;
        for (const auto& r : run_batch(backend, jobs, 1, cfg.concurrency)) {
            answers[r.instance_id] = r.text;
            lines += dump_line({{"item_id", r.instance_id}, {"answer", r.text}, {"failed", r.failed},
                                {"manifest_id", manifest_id}}) + '\n';
        }
        write_file_atomic(out / "answers.jsonl", lines);
        details["stats"] = backend.stats().to_json();
    }
    if (!answers.empty()) {
        std::vector<AnswerKey> key;
        for (const auto& item : items) key.push_back({item.item_id, item.correct_letter});
        const auto result = score_quiz(key, answers, model);
        write_file_atomic(out / "quiz_result.json", with_manifest(result.to_json(), manifest_id).dump(2) + '\n');
        details["result"] = result.to_json();
        log << model << ": " << result.correct << "/" << result.items << " correct, " << result.abstentions
            << " abstentions (" << result.unparseable << " unparseable); chance 0.25 over A-D, 0.20 with E\n";
    }
    write_manifest(cfg.out, cfg, dataset_hash, details);
    log << "quiz: " << items.size() << " items, letter counts A=" << uni.counts[0] << " B=" << uni.counts[1]
        << " C=" << uni.counts[2] << " D=" << uni.counts[3] << ", chi-square p=" << uni.p_value << '\n';
}

void cmd_report(const RunConfig& cfg, std::ostream& log) {
    const fs::path dir = cfg.out;
    const auto ks = cfg.ks();
    const auto k = ks.back();
    std::vector<EvalReport> reports;
    if (fs::exists(dir / "runs")) {
        std::vector<fs::path> csvs;
        for (const auto& e : fs::directory_iterator(dir / "runs")) {
            if (fs::exists(e.path() / "eval.csv")) csvs.push_back(e.path() / "eval.csv");
        }
        std::sort(csvs.begin(), csvs.end());
        for (const auto& c : csvs) {
            for (auto& r : reports_from_csv(read_file(c))) {
                r.aggregate();
                reports.push_back(std::move(r));
            }
        }
    }
    std::vector<std::pair<std::string, AblationReport>> series;
    if (fs::exists(dir / "ablation")) {
        std::vector<fs::path> csvs;
        for (const auto& e : fs::directory_iterator(dir / "ablation")) {
            if (fs::exists(e.path() / "ablation.csv")) csvs.push_back(e.path() / "ablation.csv");
        }
        std::sort(csvs.begin(), csvs.end());
        for (const auto& c : csvs) series.emplace_back(c.parent_path().filename().string(), ablation_from_csv(c, ks));
    }
    if (reports.empty() && series.empty()) {
        throw DataError("nothing to report: expected " + (dir / "runs/*/eval.csv").string() + " or " +
                        (dir / "ablation/*/ablation.csv").string());
    }

    const fs::path out = dir / "report";
    fs::create_directories(out);
    Json summary = {{"reports", Json::array()}, {"ablations", Json::array()}};
    if (!reports.empty()) {
        write_file_atomic(out / "summary.csv", reports_to_csv(reports, ks));
        std::vector<EvalReport> defaults;
        for (const auto& r : reports) {
            summary["reports"].push_back(report_to_json(r));
            if (r.context == 6 && r.history == 15) defaults.push_back(r);
        }
        write_file_atomic(out / ("acc_at_" + std::to_string(k) + ".svg"), grouped_bar_svg(defaults.empty() ? reports : defaults, k));
    }
    if (!series.empty()) {
        for (const auto& [name, rep] : series) summary["ablations"].push_back({{"name", name}, {"ablation", ablation_to_json(rep)}});
        write_file_atomic(out / "relative_change.svg", relative_change_svg(series, k));
    }
    write_file_atomic(out / "summary.json", summary.dump(2) + '\n');
    log << "report: " << reports.size() << " configuration(s), " << series.size() << " ablation(s) -> " << out.string()
        << '\n';
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"nextloc: next-location prediction harness"};
    app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kToolVersion);

    double temperature = 0;
    int max_new_tokens = 0;
    app.add_option("--dataset", cfg.dataset, "raw input file (check-ins or GPS CSV)");
    app.add_option("--dataset-name", cfg.dataset_name, "dataset label (default: file stem)");
    app.add_option("--kind", cfg.kind, "input kind: checkin or gps")->check(CLI::IsMember({"checkin", "gps"}));
    app.add_option("--location-id", cfg.location_id, "gps only: stop or cell ids")->check(CLI::IsMember({"stop", "cell"}));
    app.add_option("--out", cfg.out, "working directory for every output");
    app.add_option("--backend", cfg.backend, "remote-chat, frequency-oracle, recency-oracle or markov1-oracle");
    app.add_option("--model", cfg.model, "model name sent to the endpoint");
    app.add_option("--endpoint", cfg.endpoint, "base URL of the chat-completion service");
    app.add_option("--endpoint-path", cfg.endpoint_path, "request path");
    app.add_option("--api-key-env", cfg.api_key_env, "environment variable holding the API key");
    auto* temp_opt = app.add_option("--temperature", temperature, "override the model profile temperature");
    auto* tokens_opt = app.add_option("--max-new-tokens", max_new_tokens, "override the model profile token cap");
    app.add_option("--rpm", cfg.rpm, "requests per minute cap (0 = none)");
    app.add_option("--max-retries", cfg.max_retries, "retries after rate limits and transient errors");
    app.add_option("--timeout-ms", cfg.timeout_ms, "per-request timeout");
    app.add_option("--concurrency", cfg.concurrency, "requests in flight");
    app.add_option("--cache", cfg.cache, "response cache file (default <out>/cache.jsonl)");
    app.add_option("--shots", cfg.shots, "zero, one or few")->check(CLI::IsMember({"zero", "one", "few"}));
    app.add_option("--history", cfg.history, "historical visits per prompt (H)");
    app.add_option("--context", cfg.context, "contextual visits per prompt (C)");
    app.add_option("--runs", cfg.runs, "independent runs per configuration");
    app.add_option("--sample-size", cfg.sample_size, "test instances to keep (0 = all)");
    app.add_option("--seed", cfg.seed, "seed for every random choice");
    app.add_option("--k", cfg.k, "comma-separated cut-offs for ACC@k");
    app.add_option("--templates", cfg.templates, "directory with replacement prompt templates");
    app.add_option("--denominator", cfg.denominator, "all or parseable")->check(CLI::IsMember({"all", "parseable"}));
    app.add_flag("--drop-hallucinated", cfg.drop_hallucinated, "remove unknown ids before scoring");
    app.add_option("--min-records", cfg.min_records, "minimum check-ins per user");
    app.add_option("--min-trajectories", cfg.min_trajectories, "minimum trajectories per user");
    app.add_option("--gap-hours", cfg.gap_hours, "trajectory split gap");
    app.add_option("--stay-radius", cfg.stay_radius_m, "gps: stay radius in metres");
    app.add_option("--min-dwell", cfg.min_dwell_min, "gps: minimum dwell in minutes");
    app.add_option("--cluster-eps", cfg.cluster_eps_m, "gps: DBSCAN epsilon in metres");
    app.add_option("--cluster-min-pts", cfg.cluster_min_pts, "gps: DBSCAN min points");
    app.add_option("--cell-size", cfg.cell_size_m, "gps: grid cell size in metres");
    app.add_option("--quiz-items", cfg.quiz_items, "quiz: number of items");
    app.add_option("--quiz-label", cfg.quiz_label, "quiz: dataset name shown in the instruction");
    app.add_option("--answers", cfg.answers, "quiz: JSON-lines {item_id, answer} to score");

    const std::vector<std::pair<const char*, const char*>> commands = {
        {"prepare", "parse, filter and segment a dataset and write prediction instances"},
        {"predict", "query a backend for every prepared instance"},
        {"evaluate", "score prediction runs (ACC@k, attribution)"},
        {"ablate", "run the seven C/H arms from the raw dataset"},
        {"quiz", "generate (and optionally score) the contamination quiz"},
        {"report", "collect evaluations into CSV, JSON and SVG charts"}};
    for (const auto& [name, desc] : commands) app.add_subcommand(name, desc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    if (temp_opt->count()) cfg.temperature = temperature;
    if (tokens_opt->count()) cfg.max_new_tokens = max_new_tokens;
    cfg.command = app.get_subcommands().front()->get_name();

    try {
        cfg.validate();
        if (cfg.command == "prepare") cmd_prepare(cfg, out);
        else if (cfg.command == "predict") cmd_predict(cfg, out);
        else if (cfg.command == "evaluate") cmd_evaluate(cfg, out);
        else if (cfg.command == "ablate") cmd_ablate(cfg, out);
        else if (cfg.command == "quiz") cmd_quiz(cfg, out);
        else cmd_report(cfg, out);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return 3;
    } catch (const AuthError& e) {
        err << "authentication error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace nextloc::cli
