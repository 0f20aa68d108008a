#include "sdr/engine.hpp"

#include "sdr/error.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

namespace sdr {

std::string_view to_string(Policy p) noexcept {
    switch (p) {
        case Policy::Sdr: return "sdr";
        case Policy::Optimal: return "optimal";
        case Policy::SinglePerTask: return "single";
    }
    return "unknown";
}

Policy policy_from_string(std::string_view name) {
    if (name == "sdr") return Policy::Sdr;
    if (name == "optimal") return Policy::Optimal;
    if (name == "single") return Policy::SinglePerTask;
    fail(ErrorCode::SpecInvalid, "unknown policy '" + std::string(name) + "'");
}

std::string_view to_string(Outcome o) noexcept {
    switch (o) {
        case Outcome::Correct: return "correct";
        case Outcome::Miss: return "miss";
        case Outcome::Incorrect: return "incorrect";
    }
    return "unknown";
}

void EngineConfig::validate() const {
    pretrain.validate("pretrain");
    adapter.validate("adapter");
    head.validate("head");
    vae.validate("vae");
    require(detector.sample_cap >= 2, ErrorCode::InvalidArgument, "detector: sample_cap must be >= 2");
    require(detector.ridge_scale >= 0.0, ErrorCode::InvalidArgument, "detector: ridge_scale must be >= 0");
}

// --- detection -----------------------------------------------------------

Detection detect(const KnowledgeRepository& repo, const LabeledSet& data, int classes,
                 const DetectorConfig& config, Rng& rng, ModelCache* cache, int task_id) {
    require(repo.unique_count() >= 1, ErrorCode::EmptyCandidates, "detect: repository has no entries");
    require(data.x.cols() == repo.architecture().input.flat_size(), ErrorCode::ShapeMismatch,
            "detect: predictor width does not match the repository");
    const auto idx = similarity::stratified_subsample(data.y, classes, config.sample_cap, rng);
    Matrix x(static_cast<Eigen::Index>(idx.size()), data.x.cols());
    std::vector<int> y(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = data.x.row(static_cast<Eigen::Index>(idx[i]));
        y[i] = data.y[idx[i]];
    }
    const Matrix labels = similarity::one_hot(y, classes);

    Detection det;
    std::vector<similarity::Candidate> candidates;
    Matrix elbos(x.rows(), static_cast<Eigen::Index>(repo.unique_count()));
    for (const auto& e : repo.entries()) {
        const bool cached = cache && task_id >= 0;
        auto column = cached ? cache->detection(task_id, e.created_by) : nullptr;
        if (!column) {
            ModelCache::DetectionColumn c;
            const auto emb = similarity::EmbeddingMatrix::from_raw(repo.backbone().embed(x, &e.adapter), e.id);
            const Matrix h = similarity::build_gram(emb, config.sample_cap);
            c.s = similarity::similarity_metric(h, labels, config.ridge_scale, config.metric);
            c.elbo = e.vae.elbo(x);
            if (cached) cache->put_detection(task_id, e.created_by, c);
            column = std::make_shared<const ModelCache::DetectionColumn>(std::move(c));
        }
        det.entry_ids.push_back(e.id);
        det.s_values.push_back(column->s);
        candidates.push_back({e.id, column->s});
        elbos.col(e.id) = column->elbo;
    }
    det.a = similarity::rank_candidates(candidates);
    det.consistency = consistency::aggregate_from_elbos(elbos, det.entry_ids, config.mixture);
    det.b = det.consistency.selected;
    if (det.entry_ids.size() >= 2) det.uniformity = consistency::uniformity_score(det.consistency);
    return det;
}

GroundTruth ground_truth_for(const KnowledgeRepository& repo, const taskgen::TaskDataset& task,
                             std::span<const taskgen::TaskDataset> known) {
    require(task.provenance.has_value(), ErrorCode::MissingGroundTruth, "task " + task.name + " has no provenance");
    GroundTruth truth;
    for (const auto& e : repo.entries()) {
        const auto it = std::find_if(known.begin(), known.end(),
                                     [&](const taskgen::TaskDataset& t) { return t.id == e.created_by; });
        require(it != known.end(), ErrorCode::MissingGroundTruth,
                "no dataset for the creator of entry " + std::to_string(e.id));
        require(it->provenance.has_value(), ErrorCode::MissingGroundTruth, "task " + it->name + " has no provenance");
        if (taskgen::is_similar(task, *it)) truth.similar_entries.push_back(e.id);
    }
    return truth;
}

// --- scoring -------------------------------------------------------------

Outcome classify(const DecisionRecord& record) {
    require(record.ground_truth.has_value(), ErrorCode::MissingGroundTruth,
            "decision for task " + std::to_string(record.task_id) + " has no ground truth");
    const auto& similar = record.ground_truth->similar_entries;
    if (record.verdict == Verdict::New) return similar.empty() ? Outcome::Correct : Outcome::Miss;
    const bool hit = std::find(similar.begin(), similar.end(), record.entry) != similar.end();
    return hit ? Outcome::Correct : Outcome::Incorrect;
}

Score score_decisions(std::span<const DecisionRecord> records) {
    Score s;
    for (const auto& r : records) {
        switch (classify(r)) {
            case Outcome::Correct: ++s.correct_count; break;
            case Outcome::Miss: ++s.miss_count; break;
            case Outcome::Incorrect: ++s.incorrect_count; break;
        }
    }
    s.count = records.size();
    if (s.count == 0) return s;
    const double n = static_cast<double>(s.count);
    s.correct = 100.0 * static_cast<double>(s.correct_count) / n;
    s.miss = 100.0 * static_cast<double>(s.miss_count) / n;
    s.incorrect = 100.0 * static_cast<double>(s.incorrect_count) / n;
    return s;
}

// --- cache ---------------------------------------------------------------

std::shared_ptr<const nets::TaskModel> ModelCache::task_model(int task) {
    const auto it = models_.find(task);
    return it == models_.end() ? nullptr : it->second;
}
void ModelCache::put_task_model(int task, nets::TaskModel m) {
    models_[task] = std::make_shared<const nets::TaskModel>(std::move(m));
}
std::shared_ptr<const nets::VaeModel> ModelCache::vae(int task) {
    const auto it = vaes_.find(task);
    return it == vaes_.end() ? nullptr : it->second;
}
void ModelCache::put_vae(int task, nets::VaeModel m) { vaes_[task] = std::make_shared<const nets::VaeModel>(std::move(m)); }
std::shared_ptr<const nets::HeadModel> ModelCache::head(int task, int creator) {
    const auto it = heads_.find({task, creator});
    return it == heads_.end() ? nullptr : it->second;
}
void ModelCache::put_head(int task, int creator, nets::HeadModel m) {
    heads_[{task, creator}] = std::make_shared<const nets::HeadModel>(std::move(m));
}
std::shared_ptr<const nets::Backbone> ModelCache::backbone() { return backbone_; }
void ModelCache::put_backbone(nets::Backbone b) { backbone_ = std::make_shared<const nets::Backbone>(std::move(b)); }
std::shared_ptr<const ModelCache::DetectionColumn> ModelCache::detection(int task, int creator) {
    const auto it = detections_.find({task, creator});
    return it == detections_.end() ? nullptr : it->second;
}
void ModelCache::put_detection(int task, int creator, DetectionColumn c) {
    detections_[{task, creator}] = std::make_shared<const DetectionColumn>(std::move(c));
}

// --- training ------------------------------------------------------------

namespace {

enum Stream : std::uint64_t { kAdapter = 1, kVae = 2, kHead = 3, kDetect = 4, kPretrain = 5 };

Rng stream_rng(const Rng& root, int task, Stream stream, int extra = 0) {
    const auto t = static_cast<std::uint64_t>(static_cast<std::int64_t>(task));
    return root.fork(mix_seed(mix_seed(t, stream), static_cast<std::uint64_t>(static_cast<std::int64_t>(extra))));
}

nets::TrainingTask training_task(const taskgen::TaskDataset& task) { return {&task.train, task.class_count}; }

struct NewModels {
    nets::TaskModel model;
    nets::VaeModel vae;
};

NewModels train_new(const nets::Backbone& backbone, const taskgen::TaskDataset& task, const EngineConfig& config,
                    const Rng& rng, ModelCache* cache) {
    NewModels out;
    auto model = cache ? cache->task_model(task.id) : nullptr;
    if (model) {
        out.model = *model;
    } else {
        Rng r = stream_rng(rng, task.id, kAdapter);
        out.model = nets::train_task_model(backbone, training_task(task), config.arch.eft, config.arch.head,
                                           config.adapter, r);
        if (cache) cache->put_task_model(task.id, out.model);
    }
    auto vae = cache ? cache->vae(task.id) : nullptr;
    if (vae) {
        out.vae = *vae;
    } else {
        Rng r = stream_rng(rng, task.id, kVae);
        out.vae = nets::train_vae(task.train.x, task.validation.x, config.arch.vae, config.vae, r);
        if (cache) cache->put_vae(task.id, out.vae);
    }
    return out;
}

void check_task(const KnowledgeRepository& repo, const taskgen::TaskDataset& task) {
    require(task.geometry == repo.architecture().input, ErrorCode::ShapeMismatch,
            "task " + task.name + " does not match the repository input geometry");
    require(task.class_count >= 1, ErrorCode::InvalidArgument, "task " + task.name + " has no classes");
    require(task.test.size() >= 1, ErrorCode::InvalidArgument, "task " + task.name + " has no test split");
}

}  // namespace

WarmStart warm_start(std::span<const taskgen::TaskDataset> tasks, const EngineConfig& config, const Rng& rng,
                     ModelCache* cache) {
    require(tasks.size() == taskgen::kWarmStartTasks, ErrorCode::InvalidArgument, "warm start needs exactly 3 tasks");
    config.validate();
    Architecture arch = config.arch;
    arch.input = tasks.front().geometry;
    for (const auto& t : tasks) {
        require(t.geometry == arch.input, ErrorCode::ShapeMismatch, "warm start tasks differ in geometry");
    }
    EngineConfig cfg = config;
    cfg.arch = arch;

    nets::Backbone backbone;
    auto cached = cache ? cache->backbone() : nullptr;
    if (cached) {
        backbone = *cached;
    } else {
        std::vector<nets::TrainingTask> joint;
        for (const auto& t : tasks) joint.push_back(training_task(t));
        Rng r = stream_rng(rng, -1, kPretrain);
        backbone = nets::pretrain_backbone(arch.input, arch.backbone, arch.head, joint, cfg.pretrain, r).backbone;
        if (cache) cache->put_backbone(backbone);
    }

    WarmStart ws{KnowledgeRepository(arch, std::move(backbone)), {}};
    for (const auto& t : tasks) {
        check_task(ws.repo, t);
        auto models = train_new(ws.repo.backbone(), t, cfg, rng, cache);
        const double test = nets::evaluate_accuracy(ws.repo.backbone(), &models.model.adapter, models.model.head, t.test);
        ws.accuracy.push_back({t.id, models.model.train_accuracy, test});
        ws.repo.add_entry(t.id, std::move(models.model.adapter), std::move(models.vae.vae), std::move(models.model.head));
    }
    return ws;
}

DecisionRecord process_task(KnowledgeRepository& repo, const taskgen::TaskDataset& task, Policy policy,
                            const EngineConfig& config, const Rng& rng, const std::optional<GroundTruth>& truth,
                            ModelCache* cache) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    require(!repo.contains_task(task.id), ErrorCode::InvalidArgument, "task " + task.name + " already processed");
    require(repo.unique_count() >= 1, ErrorCode::EmptyCandidates, "repository has no entries");
    check_task(repo, task);
    EngineConfig cfg = config;
    cfg.arch = repo.architecture();

    DecisionRecord rec;
    rec.task_id = task.id;
    rec.task_name = task.name;
    rec.ground_truth = truth;

    try {
        Rng r = stream_rng(rng, task.id, kDetect);
        const Detection det = detect(repo, task.train, task.class_count, cfg.detector, r, cache, task.id);
        rec.a = det.a;
        rec.b = det.b;
        rec.s_values = det.s_values;
        rec.consistency.assign(det.consistency.aggregate.data(),
                               det.consistency.aggregate.data() + det.consistency.aggregate.size());
        rec.uniformity = det.uniformity;
    } catch (const Error& e) {
        rec.a = rec.b = -1;
        rec.s_values.clear();
        rec.consistency.clear();
        rec.aborted = true;
        rec.abort_reason = std::string(to_string(ErrorCode::DecisionAborted)) + ": " +
                           std::string(to_string(e.code())) + ": " + e.what();
    }

    int reuse_entry = -1;
    switch (policy) {
        case Policy::Sdr:
            if (!rec.aborted && rec.a == rec.b) reuse_entry = rec.a;
            break;
        case Policy::Optimal:
            require(truth.has_value(), ErrorCode::MissingGroundTruth, "optimal policy needs ground truth");
            if (truth->similar()) reuse_entry = *std::min_element(truth->similar_entries.begin(), truth->similar_entries.end());
            break;
        case Policy::SinglePerTask:
            break;
    }

    const std::size_t before = memory_report(repo).total();
    if (reuse_entry >= 0) {
        const RepositoryEntry& entry = repo.entry(reuse_entry);
        nets::HeadModel head;
        auto cached = cache ? cache->head(task.id, entry.created_by) : nullptr;
        if (cached) {
            head = *cached;
        } else {
            Rng r = stream_rng(rng, task.id, kHead, entry.created_by);
            head = nets::train_head_only(repo.backbone(), &entry.adapter, training_task(task), cfg.arch.head, cfg.head, r);
            if (cache) cache->put_head(task.id, entry.created_by, head);
        }
        rec.verdict = Verdict::Reuse;
        rec.entry = reuse_entry;
        rec.train_accuracy = head.train_accuracy;
        rec.test_accuracy = nets::evaluate_accuracy(repo.backbone(), &entry.adapter, head.head, task.test);
        repo.add_head(reuse_entry, task.id, std::move(head.head));
    } else {
        auto models = train_new(repo.backbone(), task, cfg, rng, cache);
        rec.verdict = Verdict::New;
        rec.train_accuracy = models.model.train_accuracy;
        rec.test_accuracy = nets::evaluate_accuracy(repo.backbone(), &models.model.adapter, models.model.head, task.test);
        rec.entry = repo.add_entry(task.id, std::move(models.model.adapter), std::move(models.vae.vae),
                                   std::move(models.model.head));
    }
    rec.parameters_total = memory_report(repo).total();
    rec.parameters_added = rec.parameters_total - before;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

}  // namespace sdr
