#include "sdr/nets/train.hpp"

#include "sdr/error.hpp"

#include <cmath>
#include <numeric>

namespace sdr::nets {

void TrainConfig::validate(std::string_view what) const {
    const std::string name(what);
    require(epochs >= 1, ErrorCode::InvalidArgument, name + ": epochs must be >= 1");
    require(batch_size >= 1, ErrorCode::InvalidArgument, name + ": batch_size must be >= 1");
    require(std::isfinite(learning_rate) && learning_rate >= 0.0, ErrorCode::InvalidArgument,
            name + ": learning_rate must be >= 0");
    require(std::isfinite(head_learning_rate) && head_learning_rate >= 0.0, ErrorCode::InvalidArgument,
            name + ": head_learning_rate must be >= 0");
    require(decay_factor > 0.0, ErrorCode::InvalidArgument, name + ": decay_factor must be > 0");
}

namespace {

void check_task(const TrainingTask& task, std::string_view what) {
    const std::string name(what);
    require(task.data != nullptr, ErrorCode::InvalidArgument, name + ": missing data");
    require(task.classes >= 1, ErrorCode::InvalidArgument, name + ": class count must be >= 1");
    require(task.data->size() >= 1, ErrorCode::InvalidArgument, name + ": empty dataset");
    require(static_cast<std::size_t>(task.data->x.rows()) == task.data->size(), ErrorCode::ShapeMismatch,
            name + ": predictor/label count mismatch");
    for (const int y : task.data->y) {
        require(y >= 0 && y < task.classes, ErrorCode::InvalidArgument, name + ": label out of range");
    }
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& y, const std::vector<std::size_t>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[idx[i]];
    return out;
}

void check_loss(double loss, std::string_view what) {
    if (!std::isfinite(loss)) fail(ErrorCode::DivergedLoss, std::string(what) + ": loss became non-finite");
}

double lr_at(const TrainConfig& config, int epoch) {
    return (config.decay_epoch > 0 && epoch >= config.decay_epoch) ? config.learning_rate * config.decay_factor
                                                                    : config.learning_rate;
}

}  // namespace

double accuracy(const Matrix& logits, const std::vector<int>& labels) {
    if (labels.empty()) return 0.0;
    const auto pred = argmax_rows(logits);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double evaluate_accuracy(const Backbone& backbone, const EftAdapter* adapter, const Head& head,
                         const LabeledSet& set) {
    return accuracy(head.forward(backbone.embed(set.x, adapter), nullptr), set.y);
}

PretrainResult pretrain_backbone(const Geometry& input, const BackboneConfig& backbone_config,
                                 const HeadConfig& head_config, std::span<const TrainingTask> tasks,
                                 const TrainConfig& config, Rng& rng) {
    config.validate("pretrain_backbone");
    require(!tasks.empty(), ErrorCode::InvalidArgument, "pretrain_backbone: no tasks");
    for (const auto& task : tasks) check_task(task, "pretrain_backbone");

    Backbone backbone(input, backbone_config);
    backbone.init(rng);
    std::vector<Head> heads;
    std::vector<Adam> head_opts;
    heads.reserve(tasks.size());
    for (const auto& task : tasks) {
        heads.emplace_back(backbone_config.embedding_dim, task.classes, head_config);
        heads.back().init(rng);
    }
    for (auto& head : heads) head_opts.emplace_back(head.parameters(), AdamConfig{config.learning_rate});
    Adam backbone_opt(backbone.parameters(), AdamConfig{config.learning_rate});

    Backbone::Tape tape;
    Head::Tape head_tape;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_at(config, epoch);
        backbone_opt.set_learning_rate(lr);
        for (auto& opt : head_opts) opt.set_learning_rate(lr);

        // Interleave batches of all tasks in a shuffled order.
        std::vector<std::pair<std::size_t, std::vector<std::size_t>>> schedule;
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            for (auto& batch : make_batches(tasks[t].data->size(), config.batch_size, rng)) {
                schedule.emplace_back(t, std::move(batch));
            }
        }
        rng.shuffle(schedule);

        for (const auto& [t, batch] : schedule) {
            const Matrix x = gather_rows(tasks[t].data->x, batch);
            const std::vector<int> y = gather_labels(tasks[t].data->y, batch);
            backbone_opt.zero_grad();
            head_opts[t].zero_grad();
            const Matrix e = backbone.forward(x, nullptr, &tape);
            const Matrix logits = heads[t].forward(e, &head_tape);
            Matrix dlogits;
            check_loss(softmax_cross_entropy(logits, y, &dlogits), "pretrain_backbone");
            const Matrix de = heads[t].backward(head_tape, dlogits, true);
            backbone.backward(tape, de, nullptr, true);
            backbone_opt.step();
            head_opts[t].step();
        }
    }

    round_to_storage(backbone.parameters());
    PretrainResult result{std::move(backbone), {}};
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        result.train_accuracy.push_back(evaluate_accuracy(result.backbone, nullptr, heads[t], *tasks[t].data));
    }
    return result;
}

TaskModel train_task_model(const Backbone& backbone, const TrainingTask& task, const EftConfig& eft,
                           const HeadConfig& head_config, const TrainConfig& config, Rng& rng) {
    config.validate("train_task_model");
    check_task(task, "train_task_model");

    Backbone work = backbone;  // gradient plumbing only; its parameters never change
    TaskModel model{work.make_adapter(eft, rng), Head(work.embedding_dim(), task.classes, head_config), 0.0, {}};
    model.head.init(rng);

    Adam adapter_opt(model.adapter.parameters(), AdamConfig{config.learning_rate});
    Adam head_opt(model.head.parameters(), AdamConfig{config.head_learning_rate});

    Backbone::Tape tape;
    Head::Tape head_tape;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        adapter_opt.set_learning_rate(lr_at(config, epoch));
        double epoch_loss = 0.0;
        const auto batches = make_batches(task.data->size(), config.batch_size, rng);
        for (const auto& batch : batches) {
            const Matrix x = gather_rows(task.data->x, batch);
            const std::vector<int> y = gather_labels(task.data->y, batch);
            adapter_opt.zero_grad();
            head_opt.zero_grad();
            const Matrix e = work.forward(x, &model.adapter, &tape);
            const Matrix logits = model.head.forward(e, &head_tape);
            Matrix dlogits;
            const double loss = softmax_cross_entropy(logits, y, &dlogits);
            check_loss(loss, "train_task_model");
            epoch_loss += loss;
            const Matrix de = model.head.backward(head_tape, dlogits, true);
            work.backward(tape, de, &model.adapter, false);
            adapter_opt.step();
            head_opt.step();
        }
        model.loss_trace.push_back(epoch_loss / static_cast<double>(batches.size()));
    }

    round_to_storage(model.adapter.parameters());
    round_to_storage(model.head.parameters());
    model.train_accuracy = evaluate_accuracy(backbone, &model.adapter, model.head, *task.data);
    return model;
}

HeadModel train_head_only(const Backbone& backbone, const EftAdapter* adapter, const TrainingTask& task,
                          const HeadConfig& head_config, const TrainConfig& config, Rng& rng) {
    config.validate("train_head_only");
    check_task(task, "train_head_only");

    const Matrix embedding = backbone.embed(task.data->x, adapter);
    HeadModel model{Head(backbone.embedding_dim(), task.classes, head_config), 0.0};
    model.head.init(rng);
    Adam opt(model.head.parameters(), AdamConfig{config.learning_rate});

    Head::Tape tape;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        opt.set_learning_rate(lr_at(config, epoch));
        for (const auto& batch : make_batches(task.data->size(), config.batch_size, rng)) {
            const Matrix e = gather_rows(embedding, batch);
            const std::vector<int> y = gather_labels(task.data->y, batch);
            opt.zero_grad();
            Matrix dlogits;
            check_loss(softmax_cross_entropy(model.head.forward(e, &tape), y, &dlogits), "train_head_only");
            model.head.backward(tape, dlogits, false);
            opt.step();
        }
    }
    round_to_storage(model.head.parameters());
    model.train_accuracy = accuracy(model.head.forward(embedding, nullptr), task.data->y);
    return model;
}

VaeModel train_vae(const Matrix& train_x, const Matrix& validation_x, const VaeConfig& vae_config,
                   const TrainConfig& config, Rng& rng) {
    config.validate("train_vae");
    require(train_x.rows() >= 1, ErrorCode::InvalidArgument, "train_vae: empty training set");
    require_finite(train_x, "train_vae: predictors");
    require(validation_x.rows() == 0 || validation_x.cols() == train_x.cols(), ErrorCode::ShapeMismatch,
            "train_vae: validation dimension mismatch");

    VaeModel result{Vae(static_cast<int>(train_x.cols()), vae_config), {}, {}, 0, 0};
    result.vae.init(rng);
    Adam opt(result.vae.parameters(), AdamConfig{config.learning_rate});

    const bool early_stopping = config.patience >= 0 && validation_x.rows() > 0;
    Vae best = result.vae;
    double best_elbo = -std::numeric_limits<double>::infinity();
    int waited = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        opt.set_learning_rate(lr_at(config, epoch));
        double total = 0.0;
        for (const auto& batch : make_batches(static_cast<std::size_t>(train_x.rows()), config.batch_size, rng)) {
            const Matrix x = gather_rows(train_x, batch);
            Matrix eps(x.rows(), vae_config.latent);
            for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
            opt.zero_grad();
            const double loss = result.vae.loss_and_grad(x, eps);
            check_loss(loss, "train_vae");
            total -= loss * static_cast<double>(batch.size());
            opt.step();
        }
        result.train_elbo.push_back(total / static_cast<double>(train_x.rows()));
        result.epochs_run = epoch + 1;

        if (validation_x.rows() > 0) {
            const double val = result.vae.elbo(validation_x).mean();
            check_loss(val, "train_vae");
            result.validation_elbo.push_back(val);
            if (val > best_elbo) {
                best_elbo = val;
                best = result.vae;
                result.best_epoch = epoch + 1;
                waited = 0;
            } else {
                ++waited;
            }
            if (early_stopping && waited >= config.patience && waited > 0) break;
        } else {
            result.best_epoch = epoch + 1;
        }
    }
    if (early_stopping) result.vae = std::move(best);
    round_to_storage(result.vae.parameters());
    return result;
}

}  // namespace sdr::nets
