#include "sdr/harness.hpp"

#include "sdr/error.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

namespace sdr {

namespace {

constexpr ErrorCode kSpec = ErrorCode::SpecInvalid;

template <typename T>
void read(const Json& j, const char* key, T& out, const char* what) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        fail(kSpec, std::string(what) + "." + key + ": wrong type");
    }
}

Json generator_to_json(const taskgen::GeneratorParams& g) {
    return {{"class_spread", g.class_spread}, {"source_spread", g.source_spread}, {"noise_rank", g.noise_rank},
            {"noise_scale", g.noise_scale},   {"noise_floor", g.noise_floor},     {"blobs_per_class", g.blobs_per_class},
            {"blob_spread", g.blob_spread}};
}

Json sequence_to_json(const taskgen::SequenceSpec& s) {
    return {{"unique_sources", s.unique_sources},
            {"replicas", s.replicas},
            {"classes", s.classes},
            {"mode", s.mode == taskgen::InputMode::Vector ? "vector" : "image"},
            {"dim", s.dim},
            {"train", s.train_per_task},
            {"validation", s.validation_per_task},
            {"test", s.test_per_task},
            {"label_permuted_twins", s.label_permuted_twins},
            {"generator", generator_to_json(s.generator)}};
}

taskgen::SequenceSpec sequence_from_json(const Json& j) {
    check_keys(j, {"unique_sources", "replicas", "classes", "mode", "dim", "train", "validation", "test",
                   "label_permuted_twins", "generator"},
               "sequence", kSpec);
    taskgen::SequenceSpec s;
    read(j, "unique_sources", s.unique_sources, "sequence");
    read(j, "replicas", s.replicas, "sequence");
    read(j, "classes", s.classes, "sequence");
    read(j, "dim", s.dim, "sequence");
    read(j, "train", s.train_per_task, "sequence");
    read(j, "validation", s.validation_per_task, "sequence");
    read(j, "test", s.test_per_task, "sequence");
    read(j, "label_permuted_twins", s.label_permuted_twins, "sequence");
    std::string mode = "vector";
    read(j, "mode", mode, "sequence");
    require(mode == "vector" || mode == "image", kSpec, "sequence.mode must be 'vector' or 'image'");
    s.mode = mode == "vector" ? taskgen::InputMode::Vector : taskgen::InputMode::Image;
    if (j.contains("generator")) {
        const Json& g = j.at("generator");
        check_keys(g, {"class_spread", "source_spread", "noise_rank", "noise_scale", "noise_floor", "blobs_per_class",
                       "blob_spread"},
                   "generator", kSpec);
        auto& p = s.generator;
        read(g, "class_spread", p.class_spread, "generator");
        read(g, "source_spread", p.source_spread, "generator");
        read(g, "noise_rank", p.noise_rank, "generator");
        read(g, "noise_scale", p.noise_scale, "generator");
        read(g, "noise_floor", p.noise_floor, "generator");
        read(g, "blobs_per_class", p.blobs_per_class, "generator");
        read(g, "blob_spread", p.blob_spread, "generator");
    }
    return s;
}

std::string metric_name(similarity::MetricVariant m) {
    return m == similarity::MetricVariant::GramOfAssociation ? "gram_of_association" : "association";
}

Json ledger_to_json(const MemoryLedger& l) {
    return {{"backbone", l.backbone}, {"adapters", l.adapters}, {"vaes", l.vaes},
            {"heads", l.heads},       {"total", l.total()},     {"megabytes", l.megabytes()}};
}

}  // namespace

// --- config --------------------------------------------------------------

void ExperimentConfig::validate() const {
    require(sequence.has_value() != manifest.has_value(), kSpec, "config: set exactly one of 'sequence' and 'manifest'");
    if (sequence) sequence->validate();
    require(!permutation_seeds.empty(), kSpec, "config: permutation_seeds must not be empty");
    require(!policies.empty(), kSpec, "config: policies must not be empty");
    std::set<Policy> unique(policies.begin(), policies.end());
    require(unique.size() == policies.size(), kSpec, "config: duplicate policy");
    try {
        engine.validate();
    } catch (const Error& e) {
        fail(kSpec, e.what());
    }
}

ExperimentConfig ExperimentConfig::from_json(const Json& j, const std::filesystem::path& base_dir) {
    check_keys(j, {"sequence", "manifest", "seed", "permutation_seeds", "policies", "architecture", "training", "detector",
                   "output_dir"},
               "config", kSpec);
    ExperimentConfig c;
    if (j.contains("sequence")) c.sequence = sequence_from_json(j.at("sequence"));
    if (j.contains("manifest")) {
        std::string m;
        read(j, "manifest", m, "config");
        std::filesystem::path p(m);
        c.manifest = p.is_relative() ? base_dir / p : p;
    }
    if (!c.sequence && !c.manifest) c.sequence = taskgen::SequenceSpec{};
    read(j, "seed", c.seed, "config");
    read(j, "permutation_seeds", c.permutation_seeds, "config");
    if (j.contains("policies")) {
        std::vector<std::string> names;
        read(j, "policies", names, "config");
        c.policies.clear();
        for (const auto& n : names) c.policies.push_back(policy_from_string(n));
    }
    if (j.contains("architecture")) sdr::from_json(j.at("architecture"), c.engine.arch, kSpec);
    if (j.contains("training")) {
        const Json& t = j.at("training");
        check_keys(t, {"pretrain", "adapter", "head", "vae"}, "training", kSpec);
        if (t.contains("pretrain")) sdr::from_json(t.at("pretrain"), c.engine.pretrain, kSpec);
        if (t.contains("adapter")) sdr::from_json(t.at("adapter"), c.engine.adapter, kSpec);
        if (t.contains("head")) sdr::from_json(t.at("head"), c.engine.head, kSpec);
        if (t.contains("vae")) sdr::from_json(t.at("vae"), c.engine.vae, kSpec);
    }
    if (j.contains("detector")) {
        const Json& d = j.at("detector");
        check_keys(d, {"sample_cap", "ridge_scale", "metric", "priors"}, "detector", kSpec);
        auto& det = c.engine.detector;
        read(d, "sample_cap", det.sample_cap, "detector");
        read(d, "ridge_scale", det.ridge_scale, "detector");
        std::string metric = metric_name(det.metric);
        read(d, "metric", metric, "detector");
        if (metric == "gram_of_association") {
            det.metric = similarity::MetricVariant::GramOfAssociation;
        } else if (metric == "association") {
            det.metric = similarity::MetricVariant::Association;
        } else {
            fail(kSpec, "detector.metric must be 'gram_of_association' or 'association'");
        }
        if (d.contains("priors") && !d.at("priors").is_null()) read(d, "priors", det.mixture.priors, "detector");
    }
    if (j.contains("output_dir")) {
        std::string out;
        read(j, "output_dir", out, "config");
        c.output_dir = out;
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        fail(kSpec, std::string("config parse error: ") + e.what());
    }
    return from_json(j, path.parent_path());
}

Json ExperimentConfig::to_json() const {
    Json policy_names = Json::array();
    for (const auto p : policies) policy_names.push_back(std::string(to_string(p)));
    Json arch = sdr::to_json(engine.arch);
    arch.erase("input");  // taken from the tasks
    Json j = {
        {"seed", seed},
        {"permutation_seeds", permutation_seeds},
        {"policies", policy_names},
        {"architecture", arch},
        {"training",
         {{"pretrain", sdr::to_json(engine.pretrain)},
          {"adapter", sdr::to_json(engine.adapter)},
          {"head", sdr::to_json(engine.head)},
          {"vae", sdr::to_json(engine.vae)}}},
        {"detector",
         {{"sample_cap", engine.detector.sample_cap},
          {"ridge_scale", engine.detector.ridge_scale},
          {"metric", metric_name(engine.detector.metric)},
          {"priors", engine.detector.mixture.priors.empty() ? Json(nullptr) : Json(engine.detector.mixture.priors)}}},
        {"output_dir", output_dir.string()},
    };
    if (sequence) j["sequence"] = sequence_to_json(*sequence);
    if (manifest) j["manifest"] = manifest->string();
    return j;
}

// --- running -------------------------------------------------------------

std::vector<taskgen::TaskDataset> build_sequence(const ExperimentConfig& config) {
    if (config.manifest) return taskgen::load_file_sequence(*config.manifest);
    Rng rng = Rng(config.seed).fork(0x5e9);
    return taskgen::generate_synthetic_sequence(*config.sequence, rng);
}

std::vector<double> task_accuracies(const KnowledgeRepository& repo, std::span<const taskgen::TaskDataset> tasks) {
    std::vector<double> acc;
    for (const auto& t : tasks) {
        const RepositoryEntry& e = repo.entry_for_task(t.id);
        acc.push_back(nets::evaluate_accuracy(repo.backbone(), &e.adapter, repo.head_for_task(t.id), t.test));
    }
    return acc;
}

double compute_average_accuracy(const KnowledgeRepository& repo, std::span<const taskgen::TaskDataset> tasks) {
    require(!tasks.empty(), ErrorCode::InvalidArgument, "compute_average_accuracy: no tasks");
    const auto acc = task_accuracies(repo, tasks);
    double sum = 0.0;
    for (const double a : acc) sum += a;
    return sum / static_cast<double>(acc.size());
}

namespace {

PermutationResult run_permutation(const std::vector<taskgen::TaskDataset>& canonical, std::uint64_t perm_seed,
                                  Policy policy, const ExperimentConfig& config, ModelCache& cache,
                                  std::optional<KnowledgeRepository>* keep_repo) {
    const auto start = std::chrono::steady_clock::now();
    PermutationResult result;
    result.seed = perm_seed;
    const auto tasks = taskgen::permute_sequence(canonical, perm_seed);
    for (const auto& t : tasks) result.order.push_back(t.id);

    const Rng root(config.seed);
    const std::span<const taskgen::TaskDataset> warm(tasks.data(), taskgen::kWarmStartTasks);
    WarmStart ws = warm_start(warm, config.engine, root, &cache);
    KnowledgeRepository repo = std::move(ws.repo);
    result.after_training = ws.accuracy;
    result.ledger.push_back({-1, memory_report(repo)});

    const bool has_truth = std::all_of(tasks.begin(), tasks.end(), [](const auto& t) { return t.provenance.has_value(); });
    for (std::size_t i = taskgen::kWarmStartTasks; i < tasks.size(); ++i) {
        const auto& task = tasks[i];
        std::optional<GroundTruth> truth;
        if (has_truth) truth = ground_truth_for(repo, task, std::span(tasks.data(), i));
        DecisionRecord rec = process_task(repo, task, policy, config.engine, root, truth, &cache);
        result.after_training.push_back({task.id, rec.train_accuracy, rec.test_accuracy});
        result.decisions.push_back(std::move(rec));
        result.ledger.push_back({task.id, memory_report(repo)});
    }

    result.final_accuracy = task_accuracies(repo, tasks);
    double sum = 0.0;
    for (const double a : result.final_accuracy) sum += a;
    result.average_accuracy = sum / static_cast<double>(result.final_accuracy.size());
    if (has_truth) result.score = score_decisions(result.decisions);
    result.unique_entries = repo.unique_count();
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (keep_repo) *keep_repo = std::move(repo);
    return result;
}

void average(PolicyResult& p) {
    const double n = static_cast<double>(p.permutations.size());
    if (p.permutations.empty()) return;
    for (const auto& r : p.permutations) {
        p.accuracy += r.average_accuracy;
        p.correct += r.score.correct;
        p.miss += r.score.miss;
        p.incorrect += r.score.incorrect;
        p.unique_entries += static_cast<double>(r.unique_entries);
        p.parameters += static_cast<double>(r.ledger.back().ledger.total());
        p.megabytes += r.ledger.back().ledger.megabytes();
    }
    p.accuracy /= n;
    p.correct /= n;
    p.miss /= n;
    p.incorrect /= n;
    p.unique_entries /= n;
    p.parameters /= n;
    p.megabytes /= n;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    ExperimentReport report;
    report.config = config.to_json();
    const auto canonical = build_sequence(config);
    require(canonical.size() > taskgen::kWarmStartTasks, kSpec, "sequence needs at least one streamed task");

    ModelCache cache;
    for (const Policy policy : config.policies) {
        PolicyResult pr;
        pr.policy = policy;
        for (std::size_t k = 0; k < config.permutation_seeds.size(); ++k) {
            std::optional<KnowledgeRepository> keep;
            try {
                pr.permutations.push_back(run_permutation(canonical, config.permutation_seeds[k], policy, config, cache,
                                                          k == 0 ? &keep : nullptr));
            } catch (const Error& e) {
                report.failure = std::string(to_string(policy)) + " permutation " +
                                 std::to_string(config.permutation_seeds[k]) + ": " + e.what();
                report.failure_code = e.code();
                break;
            }
            if (keep) report.repositories.emplace(policy, std::move(*keep));
        }
        average(pr);
        report.policies.push_back(std::move(pr));
        if (report.failure) break;
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// --- reports -------------------------------------------------------------

Json to_json(const DecisionRecord& r) {
    Json j = {
        {"task", r.task_id},
        {"name", r.task_name},
        {"a", r.a},
        {"b", r.b},
        {"verdict", r.verdict == Verdict::Reuse ? "reuse" : "new"},
        {"entry", r.entry},
        {"s_values", r.s_values},
        {"consistency", r.consistency},
        {"uniformity", r.uniformity},
        {"aborted", r.aborted},
        {"parameters_added", r.parameters_added},
        {"parameters_total", r.parameters_total},
        {"train_accuracy", r.train_accuracy},
        {"test_accuracy", r.test_accuracy},
    };
    if (r.aborted) j["abort_reason"] = r.abort_reason;
    if (r.ground_truth) {
        j["ground_truth"] = {{"similar", r.ground_truth->similar()}, {"entries", r.ground_truth->similar_entries}};
        j["outcome"] = std::string(to_string(classify(r)));
    }
    return j;
}

Json report_to_json(const ExperimentReport& report) {
    Json policies = Json::array();
    for (const auto& p : report.policies) {
        Json perms = Json::array();
        for (const auto& r : p.permutations) {
            Json tasks = Json::array();
            for (std::size_t i = 0; i < r.after_training.size(); ++i) {
                tasks.push_back({{"task", r.after_training[i].task_id},
                                 {"train_accuracy", r.after_training[i].train},
                                 {"accuracy_after_training", r.after_training[i].test},
                                 {"accuracy_final", r.final_accuracy.at(i)}});
            }
            Json trajectory = Json::array();
            for (const auto& s : r.ledger) trajectory.push_back(s.ledger.megabytes());
            Json decisions = Json::array();
            for (const auto& d : r.decisions) decisions.push_back(to_json(d));
            perms.push_back({{"seed", r.seed},
                             {"order", r.order},
                             {"average_accuracy", r.average_accuracy},
                             {"score",
                              {{"correct", r.score.correct},
                               {"miss", r.score.miss},
                               {"incorrect", r.score.incorrect},
                               {"count", r.score.count}}},
                             {"unique_entries", r.unique_entries},
                             {"ledger", ledger_to_json(r.ledger.back().ledger)},
                             {"memory_trajectory_mb", trajectory},
                             {"tasks", tasks},
                             {"decisions", decisions}});
        }
        policies.push_back({{"policy", std::string(to_string(p.policy))},
                            {"average",
                             {{"accuracy", p.accuracy},
                              {"correct", p.correct},
                              {"miss", p.miss},
                              {"incorrect", p.incorrect},
                              {"unique_entries", p.unique_entries},
                              {"parameters", p.parameters},
                              {"megabytes", p.megabytes}}},
                            {"permutations", perms}});
    }
    Json j = {{"engine_version", kEngineVersion}, {"config", report.config}, {"policies", policies}};
    j["status"] = report.failure ? "failed" : "ok";
    if (report.failure) {
        j["failure"] = *report.failure;
        j["failure_code"] = std::string(to_string(*report.failure_code));
    }
    return j;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::string format_double(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

/// One row per streamed task: policy, permutation, task, then one column per
/// repository entry (blank where the entry did not exist yet).
std::string per_entry_csv(const ExperimentReport& report, bool s_values) {
    std::size_t width = 0;
    for (const auto& p : report.policies)
        for (const auto& r : p.permutations)
            for (const auto& d : r.decisions) width = std::max(width, s_values ? d.s_values.size() : d.consistency.size());
    std::ostringstream out;
    out << "policy,permutation,task";
    for (std::size_t e = 0; e < width; ++e) out << ",entry_" << e;
    out << '\n';
    for (const auto& p : report.policies)
        for (const auto& r : p.permutations)
            for (const auto& d : r.decisions) {
                const auto& values = s_values ? d.s_values : d.consistency;
                out << to_string(p.policy) << ',' << r.seed << ',' << d.task_id;
                for (std::size_t e = 0; e < width; ++e) {
                    out << ',';
                    if (e < values.size()) out << format_double(values[e]);
                }
                out << '\n';
            }
    return out.str();
}

}  // namespace

void emit_reports(const ExperimentReport& report, const std::filesystem::path& outdir) {
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + outdir.string() + ": " + ec.message());

    write_text(outdir / "report.json", report_to_json(report).dump(2) + "\n");

    Json timing = {{"total_seconds", report.seconds}, {"policies", Json::array()}};
    std::ostringstream decisions;
    std::ostringstream ledger;
    ledger << "policy,permutation,step,task,backbone,adapters,vaes,heads,total,megabytes\n";
    for (const auto& p : report.policies) {
        Json perms = Json::array();
        for (const auto& r : p.permutations) {
            Json per_task = Json::array();
            for (const auto& d : r.decisions) per_task.push_back({{"task", d.task_id}, {"seconds", d.seconds}});
            perms.push_back({{"seed", r.seed}, {"seconds", r.seconds}, {"decisions", per_task}});
            for (const auto& d : r.decisions) {
                Json line = to_json(d);
                line["policy"] = std::string(to_string(p.policy));
                line["permutation"] = r.seed;
                decisions << line.dump() << '\n';
            }
            for (std::size_t step = 0; step < r.ledger.size(); ++step) {
                const auto& s = r.ledger[step];
                ledger << to_string(p.policy) << ',' << r.seed << ',' << step << ',' << s.task_id << ','
                       << s.ledger.backbone << ',' << s.ledger.adapters << ',' << s.ledger.vaes << ','
                       << s.ledger.heads << ',' << s.ledger.total() << ',' << format_double(s.ledger.megabytes())
                       << '\n';
            }
        }
        timing["policies"].push_back({{"policy", std::string(to_string(p.policy))}, {"permutations", perms}});
    }
    write_text(outdir / "timing.json", timing.dump(2) + "\n");
    write_text(outdir / "decisions.jsonl", decisions.str());
    write_text(outdir / "ledger.csv", ledger.str());
    write_text(outdir / "s_matrix.csv", per_entry_csv(report, true));
    write_text(outdir / "consistency.csv", per_entry_csv(report, false));
    for (const auto& [policy, repo] : report.repositories) {
        save_repository(repo, outdir / "repositories" / std::string(to_string(policy)));
    }
}

}  // namespace sdr
