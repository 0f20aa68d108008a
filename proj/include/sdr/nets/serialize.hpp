#pragma once

#include "sdr/nets/layers.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sdr::nets {

/// Tensor container layout (all integers little-endian u32):
///   "SDR1" | version | tensor count |
///   per tensor: name length | name bytes | rank | dims[rank] | f32 payload
inline constexpr std::uint32_t kTensorFormatVersion = 1;

struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

class TensorArchive {
public:
    void add(NamedTensor tensor);
    void add(const Parameter& p, const std::string& prefix);
    void add_all(const std::vector<const Parameter*>& params, const std::string& prefix);

    bool contains(std::string_view name) const;
    /// CorruptFile when absent.
    const NamedTensor& at(std::string_view name) const;

    /// Copies the stored tensor into `p`; CorruptFile on a missing tensor or
    /// a shape disagreement.
    void restore(Parameter& p, const std::string& prefix) const;
    void restore_all(const ParameterRefs& params, const std::string& prefix) const;

    const std::vector<NamedTensor>& tensors() const { return tensors_; }

    std::string to_bytes() const;
    /// CorruptFile on malformed input, VersionMismatch on an unknown version.
    static TensorArchive from_bytes(std::string_view bytes);

    void write_file(const std::filesystem::path& path) const;
    static TensorArchive read_file(const std::filesystem::path& path);

private:
    std::vector<NamedTensor> tensors_;
};

/// FNV-1a over the serialized bytes of `params`.
std::uint64_t fingerprint(const std::vector<const Parameter*>& params);

}  // namespace sdr::nets
