#include "sdr/nets/serialize.hpp"

#include "sdr/error.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace sdr::nets {

namespace {

constexpr std::string_view kMagic = "SDR1";

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) fail(ErrorCode::CorruptFile, "tensor archive truncated");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void TensorArchive::add(NamedTensor tensor) {
    require(!contains(tensor.name), ErrorCode::InvalidArgument, "duplicate tensor name " + tensor.name);
    tensors_.push_back(std::move(tensor));
}

void TensorArchive::add(const Parameter& p, const std::string& prefix) {
    NamedTensor t{prefix + p.name, {}, {}};
    for (auto d : p.shape) t.dims.push_back(static_cast<std::uint32_t>(d));
    t.data.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) t.data[i] = static_cast<float>(p.value[static_cast<Eigen::Index>(i)]);
    add(std::move(t));
}

void TensorArchive::add_all(const std::vector<const Parameter*>& params, const std::string& prefix) {
    for (const auto* p : params) add(*p, prefix);
}

bool TensorArchive::contains(std::string_view name) const {
    for (const auto& t : tensors_) {
        if (t.name == name) return true;
    }
    return false;
}

const NamedTensor& TensorArchive::at(std::string_view name) const {
    for (const auto& t : tensors_) {
        if (t.name == name) return t;
    }
    fail(ErrorCode::CorruptFile, "missing tensor " + std::string(name));
}

void TensorArchive::restore(Parameter& p, const std::string& prefix) const {
    const NamedTensor& t = at(prefix + p.name);
    bool same = t.dims.size() == p.shape.size();
    for (std::size_t i = 0; same && i < t.dims.size(); ++i) same = t.dims[i] == p.shape[i];
    require(same && t.data.size() == p.size(), ErrorCode::CorruptFile, "shape mismatch for tensor " + t.name);
    for (std::size_t i = 0; i < t.data.size(); ++i) p.value[static_cast<Eigen::Index>(i)] = static_cast<double>(t.data[i]);
    p.grad.setZero();
}

void TensorArchive::restore_all(const ParameterRefs& params, const std::string& prefix) const {
    for (auto* p : params) restore(*p, prefix);
}

std::string TensorArchive::to_bytes() const {
    std::string out(kMagic);
    put_u32(out, kTensorFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& t : tensors_) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out += t.name;
        put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) put_u32(out, d);
        for (float v : t.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

TensorArchive TensorArchive::from_bytes(std::string_view bytes) {
    Reader in(bytes);
    if (in.take(kMagic.size()) != kMagic) fail(ErrorCode::CorruptFile, "bad tensor archive magic");
    const std::uint32_t version = in.u32();
    if (version != kTensorFormatVersion) {
        fail(ErrorCode::VersionMismatch, "tensor archive version " + std::to_string(version) + " (expected " +
                                             std::to_string(kTensorFormatVersion) + ")");
    }
    TensorArchive archive;
    const std::uint32_t count = in.u32();
    for (std::uint32_t k = 0; k < count; ++k) {
        NamedTensor t;
        t.name = std::string(in.take(in.u32()));
        const std::uint32_t rank = in.u32();
        if (rank > 8) fail(ErrorCode::CorruptFile, "implausible tensor rank in " + t.name);
        std::size_t n = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            t.dims.push_back(in.u32());
            n *= t.dims.back();
        }
        if (n > bytes.size()) fail(ErrorCode::CorruptFile, "tensor " + t.name + " larger than archive");
        t.data.resize(n);
        for (auto& v : t.data) v = std::bit_cast<float>(in.u32());
        if (archive.contains(t.name)) fail(ErrorCode::CorruptFile, "duplicate tensor " + t.name);
        archive.tensors_.push_back(std::move(t));
    }
    if (!in.done()) fail(ErrorCode::CorruptFile, "trailing bytes in tensor archive");
    return archive;
}

void TensorArchive::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    const std::string bytes = to_bytes();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

TensorArchive TensorArchive::read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_bytes(buffer.str());
}

std::uint64_t fingerprint(const std::vector<const Parameter*>& params) {
    TensorArchive archive;
    archive.add_all(params, "");
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const char c : archive.to_bytes()) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

}  // namespace sdr::nets
