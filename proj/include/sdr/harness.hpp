#pragma once

#include "sdr/engine.hpp"
#include "sdr/json_io.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sdr {

inline constexpr const char* kEngineVersion = "1.0.0";

struct ExperimentConfig {
    /// Exactly one of `sequence` (synthetic) and `manifest` (file) is set.
    std::optional<taskgen::SequenceSpec> sequence;
    std::optional<std::filesystem::path> manifest;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> permutation_seeds{1, 2, 3, 4, 5};
    std::vector<Policy> policies{Policy::Sdr};
    EngineConfig engine;
    std::filesystem::path output_dir = "sdr_output";

    /// SpecInvalid on an unusable configuration.
    void validate() const;
    /// Relative manifest paths resolve against `base_dir`. Missing keys take
    /// defaults; unknown keys are rejected with SpecInvalid.
    static ExperimentConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
    static ExperimentConfig from_file(const std::filesystem::path& path);
    Json to_json() const;
};

struct LedgerSnapshot {
    int task_id = 0;
    MemoryLedger ledger;
};

struct PermutationResult {
    std::uint64_t seed = 0;
    std::vector<int> order;  // task ids in arrival order
    /// Per task in arrival order: accuracy right after training and at the end.
    std::vector<TaskAccuracy> after_training;
    std::vector<double> final_accuracy;
    double average_accuracy = 0.0;
    Score score;
    std::size_t unique_entries = 0;
    std::vector<LedgerSnapshot> ledger;  // after the warm start, then after every task
    std::vector<DecisionRecord> decisions;
    double seconds = 0.0;
};

struct PolicyResult {
    Policy policy = Policy::Sdr;
    std::vector<PermutationResult> permutations;
    double accuracy = 0.0;
    double correct = 0.0;
    double miss = 0.0;
    double incorrect = 0.0;
    double unique_entries = 0.0;
    double parameters = 0.0;
    double megabytes = 0.0;
};

struct ExperimentReport {
    Json config;
    std::vector<PolicyResult> policies;
    /// Final repository of the first permutation of each policy.
    std::map<Policy, KnowledgeRepository> repositories;
    /// Set when a permutation failed; results up to that point are kept.
    std::optional<std::string> failure;
    std::optional<ErrorCode> failure_code;
    double seconds = 0.0;
};

/// Builds the task list of a configuration (generated or loaded).
std::vector<taskgen::TaskDataset> build_sequence(const ExperimentConfig& config);

/// For each policy and permutation seed: warm start, stream the remaining
/// tasks, evaluate every head at the end, score and average. Models are
/// trained once per task and shared across permutations and policies.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Test accuracy of each task's stored head, in the order given.
/// MissingHead when a task is not in the repository.
std::vector<double> task_accuracies(const KnowledgeRepository& repo, std::span<const taskgen::TaskDataset> tasks);
/// Unweighted mean of task_accuracies.
double compute_average_accuracy(const KnowledgeRepository& repo, std::span<const taskgen::TaskDataset> tasks);

Json to_json(const DecisionRecord& r);
/// Deterministic report: no wall-clock fields.
Json report_to_json(const ExperimentReport& report);

/// Writes report.json, timing.json, decisions.jsonl, s_matrix.csv,
/// consistency.csv, ledger.csv and repositories/<policy>/ into `outdir`,
/// creating it if needed.
void emit_reports(const ExperimentReport& report, const std::filesystem::path& outdir);

}  // namespace sdr
