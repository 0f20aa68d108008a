#include "sdr/repository.hpp"

#include "sdr/error.hpp"
#include "sdr/json_io.hpp"
#include "sdr/nets/serialize.hpp"

#include <fstream>
#include <string>

namespace sdr {

KnowledgeRepository::KnowledgeRepository(Architecture arch, nets::Backbone backbone)
    : arch_(std::move(arch)), backbone_(std::move(backbone)) {}

int KnowledgeRepository::add_entry(int task_id, nets::EftAdapter adapter, nets::Vae vae, nets::Head head) {
    require(!contains_task(task_id), ErrorCode::InvalidArgument,
            "repository: task " + std::to_string(task_id) + " already stored");
    RepositoryEntry e;
    e.id = static_cast<int>(entries_.size());
    e.created_by = task_id;
    e.adapter = std::move(adapter);
    e.vae = std::move(vae);
    e.heads.push_back(HeadSlot{task_id, std::move(head)});
    entries_.push_back(std::move(e));
    alias_[task_id] = entries_.back().id;
    return entries_.back().id;
}

void KnowledgeRepository::add_head(int entry_id, int task_id, nets::Head head) {
    require(!contains_task(task_id), ErrorCode::InvalidArgument,
            "repository: task " + std::to_string(task_id) + " already stored");
    require(entry_id >= 0 && entry_id < static_cast<int>(entries_.size()), ErrorCode::InvalidArgument,
            "repository: no entry " + std::to_string(entry_id));
    entries_[static_cast<std::size_t>(entry_id)].heads.push_back(HeadSlot{task_id, std::move(head)});
    alias_[task_id] = entry_id;
}

const RepositoryEntry& KnowledgeRepository::entry(int entry_id) const {
    require(entry_id >= 0 && entry_id < static_cast<int>(entries_.size()), ErrorCode::InvalidArgument,
            "repository: no entry " + std::to_string(entry_id));
    return entries_[static_cast<std::size_t>(entry_id)];
}

const RepositoryEntry& KnowledgeRepository::entry_for_task(int task_id) const {
    const auto it = alias_.find(task_id);
    require(it != alias_.end(), ErrorCode::MissingHead, "repository: task " + std::to_string(task_id) + " not stored");
    return entries_[static_cast<std::size_t>(it->second)];
}

const nets::Head& KnowledgeRepository::head_for_task(int task_id) const {
    for (const auto& slot : entry_for_task(task_id).heads) {
        if (slot.task_id == task_id) return slot.head;
    }
    fail(ErrorCode::MissingHead, "repository: no head for task " + std::to_string(task_id));
}

double parameters_to_megabytes(std::size_t parameters) {
    return static_cast<double>(parameters * MemoryLedger::kBytesPerParameter) / (1024.0 * 1024.0);
}

double MemoryLedger::megabytes() const { return parameters_to_megabytes(total()); }

MemoryLedger memory_report(const KnowledgeRepository& repo) {
    MemoryLedger ledger;
    ledger.backbone = repo.backbone().parameter_count();
    for (const auto& e : repo.entries()) {
        ledger.adapters += e.adapter.parameter_count();
        ledger.vaes += e.vae.parameter_count();
        for (const auto& slot : e.heads) ledger.heads += slot.head.parameter_count();
    }
    return ledger;
}

namespace {

std::string entry_prefix(int id) { return "entry" + std::to_string(id) + "/"; }
std::string head_prefix(int entry, int task) { return entry_prefix(entry) + "head" + std::to_string(task) + "/"; }

nets::TensorArchive to_archive(const KnowledgeRepository& repo) {
    nets::TensorArchive archive;
    archive.add_all(repo.backbone().parameters(), "backbone/");
    for (const auto& e : repo.entries()) {
        archive.add_all(e.adapter.parameters(), entry_prefix(e.id) + "adapter/");
        archive.add_all(e.vae.parameters(), entry_prefix(e.id) + "vae/");
        for (const auto& slot : e.heads) archive.add_all(slot.head.parameters(), head_prefix(e.id, slot.task_id));
    }
    return archive;
}

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kTensorsName = "tensors.sdr";

}  // namespace

std::size_t recount_parameters(const KnowledgeRepository& repo) {
    std::size_t n = 0;
    for (const auto& t : to_archive(repo).tensors()) n += t.data.size();
    return n;
}

void save_repository(const KnowledgeRepository& repo, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

    Json entries = Json::array();
    for (const auto& e : repo.entries()) {
        Json heads = Json::array();
        for (const auto& slot : e.heads) heads.push_back({{"task", slot.task_id}, {"classes", slot.head.classes()}});
        entries.push_back({{"id", e.id}, {"created_by", e.created_by}, {"heads", heads}});
    }
    Json aliases = Json::array();
    for (const auto& [task, entry] : repo.aliases()) aliases.push_back({task, entry});
    const MemoryLedger ledger = memory_report(repo);
    const Json manifest = {
        {"format_version", kRepositoryFormatVersion},
        {"architecture", to_json(repo.architecture())},
        {"tensors", kTensorsName},
        {"entries", entries},
        {"aliases", aliases},
        {"ledger",
         {{"backbone", ledger.backbone},
          {"adapters", ledger.adapters},
          {"vaes", ledger.vaes},
          {"heads", ledger.heads},
          {"total", ledger.total()},
          {"megabytes", ledger.megabytes()}}},
    };

    to_archive(repo).write_file(dir / kTensorsName);
    std::ofstream out(dir / kManifestName, std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + (dir / kManifestName).string());
    out << manifest.dump(2) << '\n';
    if (!out) fail(ErrorCode::IoError, "write failed for " + (dir / kManifestName).string());
}

KnowledgeRepository load_repository(const std::filesystem::path& dir) {
    Json manifest;
    {
        std::ifstream in(dir / kManifestName);
        if (!in) fail(ErrorCode::IoError, "cannot read " + (dir / kManifestName).string());
        try {
            manifest = Json::parse(in);
        } catch (const Json::exception& e) {
            fail(ErrorCode::CorruptFile, std::string("repository manifest: ") + e.what());
        }
    }
    require(manifest.is_object() && manifest.contains("format_version") && manifest.at("format_version").is_number_unsigned(),
            ErrorCode::CorruptFile, "repository manifest: missing format_version");
    const auto version = manifest.at("format_version").get<std::uint32_t>();
    if (version != kRepositoryFormatVersion) {
        fail(ErrorCode::VersionMismatch, "repository format version " + std::to_string(version));
    }

    Architecture arch;
    struct EntrySpec {
        int id, created_by;
        std::vector<std::pair<int, int>> heads;  // task, classes
    };
    std::vector<EntrySpec> specs;
    std::vector<std::pair<int, int>> aliases;
    try {
        from_json(manifest.at("architecture"), arch, ErrorCode::CorruptFile);
        for (const auto& e : manifest.at("entries")) {
            EntrySpec s{e.at("id").get<int>(), e.at("created_by").get<int>(), {}};
            for (const auto& h : e.at("heads")) s.heads.emplace_back(h.at("task").get<int>(), h.at("classes").get<int>());
            specs.push_back(std::move(s));
        }
        for (const auto& a : manifest.at("aliases")) aliases.emplace_back(a.at(0).get<int>(), a.at(1).get<int>());
    } catch (const Json::exception& e) {
        fail(ErrorCode::CorruptFile, std::string("repository manifest: ") + e.what());
    }

    const auto archive = nets::TensorArchive::read_file(dir / kTensorsName);
    nets::Backbone backbone;
    try {
        backbone = nets::Backbone(arch.input, arch.backbone);
    } catch (const Error& e) {
        fail(ErrorCode::CorruptFile, std::string("repository architecture: ") + e.what());
    }
    archive.restore_all(backbone.parameters(), "backbone/");
    KnowledgeRepository repo(arch, std::move(backbone));

    Rng scratch(0);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        require(s.id == static_cast<int>(i) && !s.heads.empty() && s.heads.front().first == s.created_by,
                ErrorCode::CorruptFile, "repository manifest: malformed entry " + std::to_string(i));
        auto adapter = repo.backbone().make_adapter(arch.eft, scratch);
        archive.restore_all(adapter.parameters(), entry_prefix(s.id) + "adapter/");
        nets::Vae vae(arch.input.flat_size(), arch.vae);
        archive.restore_all(vae.parameters(), entry_prefix(s.id) + "vae/");
        for (std::size_t h = 0; h < s.heads.size(); ++h) {
            const auto [task, classes] = s.heads[h];
            require(classes >= 1, ErrorCode::CorruptFile, "repository manifest: bad class count");
            nets::Head head(repo.backbone().embedding_dim(), classes, arch.head);
            archive.restore_all(head.parameters(), head_prefix(s.id, task));
            if (h == 0) {
                repo.add_entry(task, std::move(adapter), std::move(vae), std::move(head));
            } else {
                repo.add_head(s.id, task, std::move(head));
            }
        }
    }
    require(aliases.size() == repo.aliases().size(), ErrorCode::CorruptFile, "repository manifest: alias map mismatch");
    for (const auto& [task, entry] : aliases) {
        const auto it = repo.aliases().find(task);
        require(it != repo.aliases().end() && it->second == entry, ErrorCode::CorruptFile,
                "repository manifest: alias map mismatch");
    }
    std::size_t stored = 0;
    for (const auto& t : archive.tensors()) stored += t.data.size();
    require(stored == recount_parameters(repo), ErrorCode::CorruptFile, "repository: unreferenced tensors in archive");
    return repo;
}

}  // namespace sdr
