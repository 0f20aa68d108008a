#pragma once

#include "sdr/data.hpp"
#include "sdr/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sdr::taskgen {

/// Where a task came from. Tasks are similar exactly when they share a
/// `concept_id`: same source predictors and same labelling. A label-permuted
/// twin of source k gets its own concept.
struct Provenance {
    int source = 0;   // k, 1-based
    int replica = 0;  // r, 1-based; 0 for a label-permuted twin
    int concept_id = 0;
    bool label_permuted = false;
};

struct TaskDataset {
    int id = 0;
    std::string name;
    int class_count = 0;
    Geometry geometry;
    LabeledSet train;
    LabeledSet validation;
    LabeledSet test;
    std::optional<Provenance> provenance;
    std::vector<std::string> class_names;
};

/// Ground truth: same concept. False when either side lacks provenance.
bool is_similar(const TaskDataset& a, const TaskDataset& b);

enum class InputMode { Vector, Image };

/// Shape of the per-source generators.
struct GeneratorParams {
    /// Spread of class centres around the source centre.
    double class_spread = 0.9;
    /// Spread of source centres; 0 puts every source at the same location so
    /// sources differ only in their class structure.
    double source_spread = 0.0;
    /// Rank and scale of the source-specific correlated noise.
    int noise_rank = 6;
    double noise_scale = 1.5;
    /// Isotropic noise.
    double noise_floor = 1.0;
    /// Gaussian blobs per class (more than one makes classes non-convex).
    int blobs_per_class = 2;
    double blob_spread = 0.6;
};

struct SequenceSpec {
    int unique_sources = 5;
    int replicas = 2;
    int classes = 5;
    InputMode mode = InputMode::Vector;
    /// Vector mode predictor dimension; must be a perfect square (laid out
    /// as a sqrt(d) x sqrt(d) x 1 grid for the conv backbone).
    int dim = 64;
    int train_per_task = 1000;
    int validation_per_task = 125;
    int test_per_task = 125;
    /// 1-based sources that also get a label-permuted twin appended.
    std::vector<int> label_permuted_twins;
    std::uint64_t permutation_seed = 0;
    GeneratorParams generator;

    Geometry geometry() const;
    std::size_t sequence_length() const;
    /// SpecInvalid on an impossible spec.
    void validate() const;
};

inline constexpr std::size_t kWarmStartTasks = 3;

/// Canonical order: (1,1), (2,1), (3,1) reserved for the warm start, then the
/// remaining (k, r) pairs source-major, then any label-permuted twins.
/// Replicas are disjoint draws from one generator; predictors are
/// standardized with the pooled training statistics of the whole sequence.
std::vector<TaskDataset> generate_synthetic_sequence(const SequenceSpec& spec, Rng& rng);

/// Keeps the warm-start prefix and Fisher-Yates shuffles the rest with a
/// generator seeded by `seed`. Returns positions into the input.
std::vector<std::size_t> permutation_order(std::size_t count, std::uint64_t seed);
std::vector<TaskDataset> permute_sequence(const std::vector<TaskDataset>& tasks, std::uint64_t seed);

/// Standardizes every split in place with the mean / standard deviation of
/// the pooled training predictors.
void standardize(std::vector<TaskDataset>& tasks);

// --- file datasets -------------------------------------------------------

/// Native dataset file, little-endian:
///   "SDRD" | u32 version | u32 n | u32 height | u32 width | u32 channels |
///   u32 class_count | f32 predictors[n * h * w * c] | i32 labels[n]
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

struct Dataset {
    Geometry geometry;
    int class_count = 0;
    Matrix x;
    std::vector<int> y;
};

void write_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

/// CSV rows "label,v1,...,vd" with an optional non-numeric header line.
/// Geometry defaults to a square single-channel grid when d is a square.
Dataset read_csv_dataset(const std::filesystem::path& path, std::optional<Geometry> geometry = std::nullopt);

/// Reads a file sequence manifest (JSON):
///   data           dataset path (.sdrd or .csv), relative to the manifest
///   class_names    optional label names, index = stored label
///   tasks          class-to-task table: one list of names or labels per k
///   replicas       R (default 2)
///   split          {train, validation, test} fractions (default 0.75 / 1/12 / 1/6)
///   seed           shuffling seed (default 0)
/// Each class is split evenly into R replicas (remainder to r = 1) and each
/// replica per class into train / validation / test.
std::vector<TaskDataset> load_file_sequence(const std::filesystem::path& manifest_path);

}  // namespace sdr::taskgen
