#pragma once

#include "sdr/consistency.hpp"
#include "sdr/nets/train.hpp"
#include "sdr/repository.hpp"
#include "sdr/similarity.hpp"
#include "sdr/taskgen.hpp"

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace sdr {

enum class Policy {
    Sdr,            // dual-test detector
    Optimal,        // ground truth decides
    SinglePerTask,  // always expand
};

std::string_view to_string(Policy p) noexcept;
/// "sdr", "optimal" or "single"; SpecInvalid otherwise.
Policy policy_from_string(std::string_view name);

struct DetectorConfig {
    std::size_t sample_cap = similarity::kDefaultSampleCap;
    double ridge_scale = kDefaultRidgeScale;
    similarity::MetricVariant metric = similarity::MetricVariant::GramOfAssociation;
    consistency::MixtureConfig mixture;
};

struct EngineConfig {
    /// `arch.input` is overwritten with the geometry of the tasks.
    Architecture arch;
    nets::TrainConfig pretrain{.epochs = 8, .batch_size = 64, .learning_rate = 1e-3};
    nets::TrainConfig adapter{.epochs = 6, .batch_size = 64, .learning_rate = 1e-2, .head_learning_rate = 1e-3,
                              .decay_epoch = 4};
    nets::TrainConfig head{.epochs = 30, .batch_size = 64, .learning_rate = 1e-3};
    nets::TrainConfig vae{.epochs = 40, .batch_size = 64, .learning_rate = 1e-3, .patience = 5};
    DetectorConfig detector;

    void validate() const;
};

/// Both detector outputs for one dataset against every repository entry.
struct Detection {
    std::vector<int> entry_ids;
    std::vector<double> s_values;
    consistency::ConsistencyReport consistency;
    int a = -1;  // argmin S
    int b = -1;  // argmax consistency
    double uniformity = 0.0;
};

class ModelCache;

/// Subsamples `data` (class-balanced, at most sample_cap rows), then scores it
/// under every stored encoder (S) and every stored VAE (consistency). With a
/// cache, per-entry scores are keyed by (task_id, entry creator).
Detection detect(const KnowledgeRepository& repo, const LabeledSet& data, int classes,
                 const DetectorConfig& config, Rng& rng, ModelCache* cache = nullptr, int task_id = -1);

/// Entries created by tasks of the same concept; empty means Dissimilar.
struct GroundTruth {
    std::vector<int> similar_entries;
    bool similar() const { return !similar_entries.empty(); }
};

/// Ground truth of `task` against `repo`. `known` must contain every task
/// that created an entry. MissingGroundTruth when provenance is absent.
GroundTruth ground_truth_for(const KnowledgeRepository& repo, const taskgen::TaskDataset& task,
                             std::span<const taskgen::TaskDataset> known);

enum class Verdict { Reuse, New };

struct DecisionRecord {
    int task_id = 0;
    std::string task_name;
    int a = -1;
    int b = -1;
    Verdict verdict = Verdict::New;
    /// Entry the task ends up aliased to (reused or newly created).
    int entry = -1;
    std::optional<GroundTruth> ground_truth;
    std::vector<double> s_values;     // indexed by entry id at decision time
    std::vector<double> consistency;  // indexed by entry id at decision time
    double uniformity = 0.0;
    bool aborted = false;
    std::string abort_reason;
    std::size_t parameters_added = 0;
    std::size_t parameters_total = 0;
    double train_accuracy = 0.0;
    /// Test accuracy measured right after the task's models were trained.
    double test_accuracy = 0.0;
    double seconds = 0.0;
};

enum class Outcome { Correct, Miss, Incorrect };

std::string_view to_string(Outcome o) noexcept;
/// MissingGroundTruth when the record has none.
Outcome classify(const DecisionRecord& record);

struct Score {
    std::size_t count = 0;
    std::size_t correct_count = 0;
    std::size_t miss_count = 0;
    std::size_t incorrect_count = 0;
    double correct = 0.0;
    double miss = 0.0;
    double incorrect = 0.0;
};

/// Percentages of correct / miss / incorrect identifications.
Score score_decisions(std::span<const DecisionRecord> records);

/// Trained models keyed by task (and, for reused heads, by the entry's
/// creator). Training is a pure function of (seed, task, creator), so one
/// cache can serve every permutation and policy of a single experiment; it
/// must not be shared between experiments with different configs or seeds.
class ModelCache {
public:
    std::shared_ptr<const nets::TaskModel> task_model(int task);
    void put_task_model(int task, nets::TaskModel m);
    std::shared_ptr<const nets::VaeModel> vae(int task);
    void put_vae(int task, nets::VaeModel m);
    std::shared_ptr<const nets::HeadModel> head(int task, int creator);
    void put_head(int task, int creator, nets::HeadModel m);
    std::shared_ptr<const nets::Backbone> backbone();
    void put_backbone(nets::Backbone b);

    struct DetectionColumn {
        double s = 0.0;
        Vector elbo;
    };
    std::shared_ptr<const DetectionColumn> detection(int task, int creator);
    void put_detection(int task, int creator, DetectionColumn c);

private:
    std::map<int, std::shared_ptr<const nets::TaskModel>> models_;
    std::map<int, std::shared_ptr<const nets::VaeModel>> vaes_;
    std::map<std::pair<int, int>, std::shared_ptr<const nets::HeadModel>> heads_;
    std::map<std::pair<int, int>, std::shared_ptr<const DetectionColumn>> detections_;
    std::shared_ptr<const nets::Backbone> backbone_;
};

struct TaskAccuracy {
    int task_id = 0;
    double train = 0.0;
    double test = 0.0;
};

struct WarmStart {
    KnowledgeRepository repo;
    std::vector<TaskAccuracy> accuracy;
};

/// Pretrains the backbone on exactly three tasks, then trains an adapter,
/// head and VAE for each. Training streams derive from `rng`'s seed and the
/// task ids.
WarmStart warm_start(std::span<const taskgen::TaskDataset> tasks, const EngineConfig& config, const Rng& rng,
                     ModelCache* cache = nullptr);

/// Decides reuse vs new for `task` under `policy`, trains what the verdict
/// requires and stores it. Detector errors under the Sdr policy become a New
/// verdict flagged as aborted. Optimal requires `truth`.
DecisionRecord process_task(KnowledgeRepository& repo, const taskgen::TaskDataset& task, Policy policy,
                            const EngineConfig& config, const Rng& rng, const std::optional<GroundTruth>& truth,
                            ModelCache* cache = nullptr);

}  // namespace sdr
