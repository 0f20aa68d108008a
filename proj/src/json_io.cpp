#include "sdr/json_io.hpp"

#include "sdr/error.hpp"

#include <string>

namespace sdr {

void check_keys(const Json& object, std::initializer_list<std::string_view> allowed, std::string_view what,
                ErrorCode code) {
    require(object.is_object(), code, std::string(what) + ": expected a JSON object");
    for (const auto& item : object.items()) {
        bool known = false;
        for (const auto key : allowed) known = known || item.key() == key;
        require(known, code, std::string(what) + ": unknown key '" + item.key() + "'");
    }
}

namespace {

template <typename T>
void read(const Json& j, const char* key, T& out, std::string_view what, ErrorCode code) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        fail(code, std::string(what) + "." + key + ": wrong type");
    }
}

}  // namespace

Json to_json(const Geometry& g) { return {{"height", g.height}, {"width", g.width}, {"channels", g.channels}}; }

Json to_json(const nets::BackboneConfig& c) {
    return {{"channels", c.channels}, {"pooled_size", c.pooled_size}, {"embedding_dim", c.embedding_dim}};
}

Json to_json(const nets::EftConfig& c) {
    return {{"spatial_group", c.spatial_group}, {"pointwise_group", c.pointwise_group}, {"use_pointwise", c.use_pointwise}};
}

Json to_json(const nets::HeadConfig& c) { return {{"hidden", c.hidden}}; }

Json to_json(const nets::VaeConfig& c) {
    return {{"hidden", c.hidden}, {"latent", c.latent}, {"observation_variance", c.observation_variance}};
}

Json to_json(const nets::TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"head_learning_rate", c.head_learning_rate},
            {"decay_epoch", c.decay_epoch},
            {"decay_factor", c.decay_factor},
            {"patience", c.patience}};
}

Json to_json(const Architecture& a) {
    return {{"input", to_json(a.input)},
            {"backbone", to_json(a.backbone)},
            {"eft", to_json(a.eft)},
            {"head", to_json(a.head)},
            {"vae", to_json(a.vae)}};
}

void from_json(const Json& j, Geometry& out, ErrorCode code) {
    check_keys(j, {"height", "width", "channels"}, "geometry", code);
    read(j, "height", out.height, "geometry", code);
    read(j, "width", out.width, "geometry", code);
    read(j, "channels", out.channels, "geometry", code);
    require(out.height >= 1 && out.width >= 1 && out.channels >= 1, code, "geometry: dimensions must be >= 1");
}

void from_json(const Json& j, nets::BackboneConfig& out, ErrorCode code) {
    check_keys(j, {"channels", "pooled_size", "embedding_dim"}, "backbone", code);
    read(j, "channels", out.channels, "backbone", code);
    read(j, "pooled_size", out.pooled_size, "backbone", code);
    read(j, "embedding_dim", out.embedding_dim, "backbone", code);
    require(!out.channels.empty() && out.pooled_size >= 1 && out.embedding_dim >= 1, code,
            "backbone: invalid configuration");
    for (const int k : out.channels) require(k >= 1, code, "backbone: channel counts must be >= 1");
}

void from_json(const Json& j, nets::EftConfig& out, ErrorCode code) {
    check_keys(j, {"spatial_group", "pointwise_group", "use_pointwise"}, "eft", code);
    read(j, "spatial_group", out.spatial_group, "eft", code);
    read(j, "pointwise_group", out.pointwise_group, "eft", code);
    read(j, "use_pointwise", out.use_pointwise, "eft", code);
    require(out.spatial_group >= 1 && out.pointwise_group >= 1, code, "eft: group sizes must be >= 1");
}

void from_json(const Json& j, nets::HeadConfig& out, ErrorCode code) {
    check_keys(j, {"hidden"}, "head", code);
    read(j, "hidden", out.hidden, "head", code);
    require(out.hidden >= 1, code, "head: hidden must be >= 1");
}

void from_json(const Json& j, nets::VaeConfig& out, ErrorCode code) {
    check_keys(j, {"hidden", "latent", "observation_variance"}, "vae", code);
    read(j, "hidden", out.hidden, "vae", code);
    read(j, "latent", out.latent, "vae", code);
    read(j, "observation_variance", out.observation_variance, "vae", code);
    require(out.hidden >= 1 && out.latent >= 1 && out.observation_variance > 0.0, code, "vae: invalid configuration");
}

void from_json(const Json& j, nets::TrainConfig& out, ErrorCode code) {
    check_keys(j, {"epochs", "batch_size", "learning_rate", "head_learning_rate", "decay_epoch", "decay_factor", "patience"},
               "training", code);
    read(j, "epochs", out.epochs, "training", code);
    read(j, "batch_size", out.batch_size, "training", code);
    read(j, "learning_rate", out.learning_rate, "training", code);
    read(j, "head_learning_rate", out.head_learning_rate, "training", code);
    read(j, "decay_epoch", out.decay_epoch, "training", code);
    read(j, "decay_factor", out.decay_factor, "training", code);
    read(j, "patience", out.patience, "training", code);
    try {
        out.validate("training");
    } catch (const Error& e) {
        fail(code, e.what());
    }
}

void from_json(const Json& j, Architecture& out, ErrorCode code) {
    check_keys(j, {"input", "backbone", "eft", "head", "vae"}, "architecture", code);
    if (j.contains("input")) from_json(j.at("input"), out.input, code);
    if (j.contains("backbone")) from_json(j.at("backbone"), out.backbone, code);
    if (j.contains("eft")) from_json(j.at("eft"), out.eft, code);
    if (j.contains("head")) from_json(j.at("head"), out.head, code);
    if (j.contains("vae")) from_json(j.at("vae"), out.vae, code);
}

}  // namespace sdr
