#pragma once

#include "sdr/data.hpp"
#include "sdr/nets/eft.hpp"
#include "sdr/nets/models.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace sdr {

inline constexpr std::uint32_t kRepositoryFormatVersion = 1;

/// Everything needed to rebuild empty models of the right shapes.
struct Architecture {
    Geometry input;
    nets::BackboneConfig backbone;
    nets::EftConfig eft;
    nets::HeadConfig head;
    nets::VaeConfig vae;
};

struct HeadSlot {
    int task_id = 0;
    nets::Head head;
};

/// One unique task: its encoder adapter, its VAE, and the heads of every
/// sequence task aliased to it.
struct RepositoryEntry {
    int id = 0;
    int created_by = 0;
    nets::EftAdapter adapter;
    nets::Vae vae;
    std::vector<HeadSlot> heads;
};

class KnowledgeRepository {
public:
    KnowledgeRepository() = default;
    KnowledgeRepository(Architecture arch, nets::Backbone backbone);

    const Architecture& architecture() const { return arch_; }
    const nets::Backbone& backbone() const { return backbone_; }
    const std::vector<RepositoryEntry>& entries() const { return entries_; }
    const std::map<int, int>& aliases() const { return alias_; }
    std::size_t unique_count() const { return entries_.size(); }

    /// Adds a unique entry owned by `task_id`; returns its id.
    /// InvalidArgument if the task is already stored.
    int add_entry(int task_id, nets::EftAdapter adapter, nets::Vae vae, nets::Head head);
    /// Aliases `task_id` to an existing entry and stores its head.
    void add_head(int entry_id, int task_id, nets::Head head);

    const RepositoryEntry& entry(int entry_id) const;
    bool contains_task(int task_id) const { return alias_.count(task_id) != 0; }
    /// Entry a sequence task is aliased to; MissingHead when unknown.
    const RepositoryEntry& entry_for_task(int task_id) const;
    const nets::Head& head_for_task(int task_id) const;

private:
    Architecture arch_;
    nets::Backbone backbone_;
    std::vector<RepositoryEntry> entries_;
    std::map<int, int> alias_;
};

/// Stored parameter counts; MB at 4 bytes per parameter.
struct MemoryLedger {
    static constexpr std::size_t kBytesPerParameter = 4;

    std::size_t backbone = 0;
    std::size_t adapters = 0;
    std::size_t vaes = 0;
    std::size_t heads = 0;

    std::size_t total() const { return backbone + adapters + vaes + heads; }
    double megabytes() const;
};

double parameters_to_megabytes(std::size_t parameters);

MemoryLedger memory_report(const KnowledgeRepository& repo);

/// Independent recount: number of floats in the repository's serialized tensors.
std::size_t recount_parameters(const KnowledgeRepository& repo);

/// Writes `dir`/manifest.json and `dir`/tensors.sdr, creating `dir`.
void save_repository(const KnowledgeRepository& repo, const std::filesystem::path& dir);
/// CorruptFile on malformed content, VersionMismatch on an unknown version.
KnowledgeRepository load_repository(const std::filesystem::path& dir);

}  // namespace sdr
