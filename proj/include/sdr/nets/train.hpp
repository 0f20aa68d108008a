#pragma once

#include "sdr/data.hpp"
#include "sdr/nets/adam.hpp"
#include "sdr/nets/models.hpp"

#include <span>
#include <string_view>

namespace sdr::nets {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 64;
    double learning_rate = 1e-3;
    /// Head learning rate when a head trains jointly with an adapter.
    double head_learning_rate = 1e-3;
    /// From this epoch on (when > 0) learning_rate is multiplied by decay_factor.
    int decay_epoch = 0;
    double decay_factor = 0.1;
    /// Early-stopping patience on validation ELBO; negative disables it.
    int patience = -1;

    /// Throws InvalidArgument on a non-trainable setting.
    void validate(std::string_view what) const;
};

struct TrainingTask {
    const LabeledSet* data = nullptr;
    int classes = 0;
};

struct PretrainResult {
    Backbone backbone;
    std::vector<double> train_accuracy;  // one per task, from its pretraining head
};

/// Trains a fresh backbone jointly on all tasks (one head per task), then
/// rounds it to storage precision. The heads are discarded.
PretrainResult pretrain_backbone(const Geometry& input, const BackboneConfig& backbone_config,
                                 const HeadConfig& head_config, std::span<const TrainingTask> tasks,
                                 const TrainConfig& config, Rng& rng);

struct TaskModel {
    EftAdapter adapter;
    Head head;
    double train_accuracy = 0.0;
    std::vector<double> loss_trace;
};

/// Learns an EFT adapter and head end to end with cross-entropy; the
/// backbone is only read. Adapter uses learning_rate (with decay), the head
/// uses head_learning_rate.
TaskModel train_task_model(const Backbone& backbone, const TrainingTask& task, const EftConfig& eft,
                           const HeadConfig& head_config, const TrainConfig& config, Rng& rng);

struct HeadModel {
    Head head;
    double train_accuracy = 0.0;
};

/// Trains only a new head on top of a frozen encoder (backbone + adapter).
HeadModel train_head_only(const Backbone& backbone, const EftAdapter* adapter, const TrainingTask& task,
                          const HeadConfig& head_config, const TrainConfig& config, Rng& rng);

struct VaeModel {
    Vae vae;
    std::vector<double> train_elbo;       // mean sampled ELBO per epoch
    std::vector<double> validation_elbo;  // mean deterministic ELBO per epoch
    int epochs_run = 0;
    int best_epoch = 0;
};

/// Maximizes the per-sample ELBO with Adam. With a non-empty validation set
/// and patience >= 0 training stops once validation ELBO has not improved
/// for `patience` epochs, and the best weights are returned.
VaeModel train_vae(const Matrix& train_x, const Matrix& validation_x, const VaeConfig& vae_config,
                   const TrainConfig& config, Rng& rng);

double accuracy(const Matrix& logits, const std::vector<int>& labels);

/// Test-style accuracy of `head` on `set` encoded by backbone + adapter.
double evaluate_accuracy(const Backbone& backbone, const EftAdapter* adapter, const Head& head,
                         const LabeledSet& set);

}  // namespace sdr::nets
