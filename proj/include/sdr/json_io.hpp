#pragma once

#include "sdr/error.hpp"
#include "sdr/nets/train.hpp"
#include "sdr/repository.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string_view>

namespace sdr {

using Json = nlohmann::json;

/// Throws `code` when `object` is not an object or has a key outside `allowed`.
void check_keys(const Json& object, std::initializer_list<std::string_view> allowed, std::string_view what,
                ErrorCode code);

Json to_json(const Geometry& g);
Json to_json(const nets::BackboneConfig& c);
Json to_json(const nets::EftConfig& c);
Json to_json(const nets::HeadConfig& c);
Json to_json(const nets::VaeConfig& c);
Json to_json(const nets::TrainConfig& c);
Json to_json(const Architecture& a);

// Missing keys keep the values already in `out`. Wrong types, unknown keys
// and invalid values throw `code`.
void from_json(const Json& j, Geometry& out, ErrorCode code);
void from_json(const Json& j, nets::BackboneConfig& out, ErrorCode code);
void from_json(const Json& j, nets::EftConfig& out, ErrorCode code);
void from_json(const Json& j, nets::HeadConfig& out, ErrorCode code);
void from_json(const Json& j, nets::VaeConfig& out, ErrorCode code);
void from_json(const Json& j, nets::TrainConfig& out, ErrorCode code);
void from_json(const Json& j, Architecture& out, ErrorCode code);

}  // namespace sdr
