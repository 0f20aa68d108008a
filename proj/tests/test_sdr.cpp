#include "helpers.hpp"

#include "sdr/engine.hpp"
#include "sdr/error.hpp"
#include "sdr/json_io.hpp"
#include "sdr/nets/serialize.hpp"

#include <doctest.h>

#include <fstream>

using namespace sdr;

namespace {

DecisionRecord record(Verdict v, int entry, std::vector<int> truth) {
    DecisionRecord r;
    r.verdict = v;
    r.entry = entry;
    r.a = r.b = v == Verdict::Reuse ? entry : -1;
    r.ground_truth = GroundTruth{std::move(truth)};
    return r;
}

struct Fixture {
    std::vector<taskgen::TaskDataset> tasks;
    EngineConfig config = test::small_engine();
    Rng root{17};
    WarmStart ws;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture x;
        Rng rng(3);
        x.tasks = taskgen::generate_synthetic_sequence(test::small_spec(), rng);
        x.ws = warm_start(std::span(x.tasks.data(), 3), x.config, x.root);
        return x;
    }();
    return f;
}

KnowledgeRepository random_repository(Rng& rng) {
    const EngineConfig cfg = test::small_engine();
    Architecture arch = cfg.arch;
    arch.input = Geometry{4, 4, 1};
    nets::Backbone bb(arch.input, arch.backbone);
    bb.init(rng);
    nets::round_to_storage(bb.parameters());
    KnowledgeRepository repo(arch, bb);
    for (int t = 0; t < 2; ++t) {
        nets::Vae vae(16, arch.vae);
        vae.init(rng);
        nets::round_to_storage(vae.parameters());
        nets::Head head(arch.backbone.embedding_dim, 3, arch.head);
        head.init(rng);
        nets::round_to_storage(head.parameters());
        nets::EftAdapter adapter = bb.make_adapter(arch.eft, rng);
        nets::round_to_storage(adapter.parameters());
        repo.add_entry(t, adapter, vae, head);
    }
    nets::Head extra(arch.backbone.embedding_dim, 3, arch.head);
    extra.init(rng);
    nets::round_to_storage(extra.parameters());
    repo.add_head(1, 5, extra);
    return repo;
}

}  // namespace

TEST_SUITE("sdr") {
    TEST_CASE("policy names") {
        for (const auto p : {Policy::Sdr, Policy::Optimal, Policy::SinglePerTask}) CHECK(policy_from_string(to_string(p)) == p);
        CHECK(to_string(Policy::SinglePerTask) == "single");
        CHECK_THROWS_AS(policy_from_string("greedy"), Error);
    }

    TEST_CASE("classification of decisions") {
        CHECK(classify(record(Verdict::Reuse, 2, {2})) == Outcome::Correct);
        CHECK(classify(record(Verdict::Reuse, 4, {2, 4})) == Outcome::Correct);
        CHECK(classify(record(Verdict::Reuse, 1, {2})) == Outcome::Incorrect);
        CHECK(classify(record(Verdict::Reuse, 1, {})) == Outcome::Incorrect);
        CHECK(classify(record(Verdict::New, 5, {2})) == Outcome::Miss);
        CHECK(classify(record(Verdict::New, 5, {})) == Outcome::Correct);
        DecisionRecord bare;
        try {
            classify(bare);
            FAIL("expected MissingGroundTruth");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MissingGroundTruth);
        }
    }

    TEST_CASE("scores") {
        std::vector<DecisionRecord> recs;
        for (int i = 0; i < 8; ++i) recs.push_back(record(Verdict::Reuse, 0, {0}));
        recs.push_back(record(Verdict::New, 3, {0}));
        recs.push_back(record(Verdict::Reuse, 0, {}));
        const Score s = score_decisions(recs);
        CHECK(s.count == 10);
        CHECK(s.correct == 80.0);
        CHECK(s.miss == 10.0);
        CHECK(s.incorrect == 10.0);
        CHECK(s.correct_count + s.miss_count + s.incorrect_count == s.count);

        recs.resize(8);
        const Score all = score_decisions(recs);
        CHECK(all.correct == 100.0);
        CHECK(all.miss == 0.0);
        CHECK(all.incorrect == 0.0);
    }

    TEST_CASE("memory accounting") {
        CHECK(parameters_to_megabytes(449000) == doctest::Approx(449000.0 * 4 / 1048576.0).epsilon(1e-15));
        CHECK(std::abs(parameters_to_megabytes(449000) - 1.71) < 0.01);

        Rng rng(1);
        const EngineConfig cfg = test::small_engine();
        Architecture arch = cfg.arch;
        arch.input = Geometry{4, 4, 1};
        nets::Backbone bb(arch.input, arch.backbone);
        bb.init(rng);
        KnowledgeRepository empty(arch, bb);
        const MemoryLedger l0 = memory_report(empty);
        CHECK(l0.total() == bb.parameter_count());
        CHECK(l0.megabytes() == parameters_to_megabytes(bb.parameter_count()));
        CHECK(recount_parameters(empty) == l0.total());

        const KnowledgeRepository repo = random_repository(rng);
        const MemoryLedger l = memory_report(repo);
        const auto& e = repo.entry(0);
        CHECK(l.adapters == 2 * e.adapter.parameter_count());
        CHECK(l.vaes == 2 * e.vae.parameter_count());
        CHECK(l.heads == 3 * e.heads.front().head.parameter_count());
        CHECK(recount_parameters(repo) == l.total());
    }

    TEST_CASE("repository bookkeeping") {
        Rng rng(2);
        KnowledgeRepository repo = random_repository(rng);
        CHECK(repo.unique_count() == 2);
        CHECK(repo.aliases().size() == 3);
        CHECK(repo.entry_for_task(5).id == 1);
        CHECK(repo.contains_task(0));
        CHECK_FALSE(repo.contains_task(9));
        try {
            repo.head_for_task(9);
            FAIL("expected MissingHead");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MissingHead);
        }
        const auto& e0 = repo.entry(0);
        CHECK_THROWS_AS(repo.add_entry(0, e0.adapter, e0.vae, e0.heads.front().head), Error);
        CHECK_THROWS_AS(repo.add_head(7, 8, e0.heads.front().head), Error);
    }

    TEST_CASE("repository round trip and file errors") {
        Rng rng(3);
        const KnowledgeRepository repo = random_repository(rng);
        const auto dir = test::temp_dir("repo_io");
        save_repository(repo, dir / "r");
        const KnowledgeRepository back = load_repository(dir / "r");
        CHECK(back.aliases() == repo.aliases());
        CHECK(memory_report(back).total() == memory_report(repo).total());
        const auto fa = nets::fingerprint(repo.entry(1).adapter.parameters());
        CHECK(fa == nets::fingerprint(back.entry(1).adapter.parameters()));
        CHECK(nets::fingerprint(repo.backbone().parameters()) == nets::fingerprint(back.backbone().parameters()));

        const auto spec = test::small_spec(60);
        Rng g(4);
        const auto tasks = taskgen::generate_synthetic_sequence(spec, g);
        DetectorConfig dc;
        Rng r1(5), r2(5);
        const Detection d1 = detect(repo, tasks[4].train, 3, dc, r1);
        const Detection d2 = detect(back, tasks[4].train, 3, dc, r2);
        CHECK(d1.s_values == d2.s_values);
        CHECK(d1.consistency.aggregate == d2.consistency.aggregate);
        CHECK(d1.a == d2.a);
        CHECK(d1.b == d2.b);

        // Truncated tensor file.
        std::filesystem::copy(dir / "r", dir / "short");
        std::filesystem::resize_file(dir / "short" / "tensors.sdr", std::filesystem::file_size(dir / "r" / "tensors.sdr") - 10);
        try {
            load_repository(dir / "short");
            FAIL("expected CorruptFile");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::CorruptFile);
        }

        // Future format version.
        std::filesystem::copy(dir / "r", dir / "future");
        {
            std::ifstream in(dir / "r" / "manifest.json");
            auto j = nlohmann::json::parse(in);
            j["format_version"] = kRepositoryFormatVersion + 1;
            std::ofstream(dir / "future" / "manifest.json") << j.dump();
        }
        try {
            load_repository(dir / "future");
            FAIL("expected VersionMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::VersionMismatch);
        }
        std::ofstream(dir / "future" / "manifest.json") << "{not json";
        CHECK_THROWS_AS(load_repository(dir / "future"), Error);
        CHECK_THROWS_AS(load_repository(dir / "absent"), Error);
    }

    TEST_CASE("warm start") {
        const Fixture& f = fixture();
        const KnowledgeRepository& repo = f.ws.repo;
        CHECK(repo.unique_count() == 3);
        CHECK(repo.aliases().size() == 3);
        const MemoryLedger l = memory_report(repo);
        const auto& e = repo.entry(0);
        CHECK(l.total() == repo.backbone().parameter_count() +
                               3 * (e.adapter.parameter_count() + e.vae.parameter_count() +
                                    e.heads.front().head.parameter_count()));
        CHECK(f.ws.accuracy.size() == 3);
        for (const auto& a : f.ws.accuracy) CHECK(a.test > 0.5);

        CHECK_THROWS_AS(warm_start(std::span(f.tasks.data(), 2), f.config, f.root), Error);

        // A repeated task is stored as given.
        std::vector<taskgen::TaskDataset> dup{f.tasks[0], f.tasks[0], f.tasks[1]};
        dup[1].id = 1;
        dup[2].id = 2;
        const WarmStart again = warm_start(dup, f.config, f.root);
        CHECK(again.repo.unique_count() == 3);
    }

    TEST_CASE("optimal and single policies") {
        const Fixture& f = fixture();
        KnowledgeRepository opt = f.ws.repo, single = f.ws.repo;
        ModelCache cache;
        for (std::size_t i = 3; i < f.tasks.size(); ++i) {
            const auto& t = f.tasks[i];
            const auto g1 = ground_truth_for(opt, t, f.tasks);
            const DecisionRecord r = process_task(opt, t, Policy::Optimal, f.config, f.root, g1, &cache);
            CHECK(classify(r) == Outcome::Correct);
            if (r.verdict == Verdict::Reuse) CHECK(r.parameters_added == opt.head_for_task(t.id).parameter_count());
            const auto g2 = ground_truth_for(single, t, f.tasks);
            const DecisionRecord s = process_task(single, t, Policy::SinglePerTask, f.config, f.root, g2, &cache);
            CHECK(s.verdict == Verdict::New);
        }
        CHECK(opt.unique_count() == 4);
        CHECK(single.unique_count() == f.tasks.size());
        CHECK(memory_report(opt).total() < memory_report(single).total());
        CHECK(recount_parameters(opt) == memory_report(opt).total());

        KnowledgeRepository again = f.ws.repo;
        CHECK_THROWS_AS(process_task(again, f.tasks[3], Policy::Optimal, f.config, f.root, std::nullopt), Error);
        CHECK_THROWS_AS(process_task(again, f.tasks[0], Policy::Sdr, f.config, f.root, std::nullopt), Error);
    }

    TEST_CASE("sdr decisions follow the dual test") {
        const Fixture& f = fixture();
        KnowledgeRepository repo = f.ws.repo;
        std::vector<DecisionRecord> recs;
        std::size_t before = memory_report(repo).total();
        for (std::size_t i = 3; i < f.tasks.size(); ++i) {
            const auto gt = ground_truth_for(repo, f.tasks[i], f.tasks);
            const DecisionRecord r = process_task(repo, f.tasks[i], Policy::Sdr, f.config, f.root, gt);
            CHECK_FALSE(r.aborted);
            CHECK((r.verdict == Verdict::Reuse) == (r.a == r.b));
            if (r.verdict == Verdict::Reuse) CHECK(r.entry == r.a);
            CHECK(r.s_values.size() == r.consistency.size());
            CHECK(r.parameters_total >= before);
            before = r.parameters_total;
            recs.push_back(r);
        }
        const Score s = score_decisions(recs);
        CHECK(s.correct_count + s.miss_count + s.incorrect_count == recs.size());

        KnowledgeRepository rerun = f.ws.repo;
        for (std::size_t i = 3; i < f.tasks.size(); ++i) {
            const auto gt = ground_truth_for(rerun, f.tasks[i], f.tasks);
            const DecisionRecord r = process_task(rerun, f.tasks[i], Policy::Sdr, f.config, f.root, gt);
            CHECK(r.s_values == recs[i - 3].s_values);
            CHECK(r.consistency == recs[i - 3].consistency);
            CHECK(r.verdict == recs[i - 3].verdict);
        }
    }

    TEST_CASE("detector failure expands") {
        const Fixture& f = fixture();
        KnowledgeRepository repo = f.ws.repo;
        EngineConfig bad = f.config;
        bad.detector.mixture.priors = {0.5, 0.5};
        const auto gt = ground_truth_for(repo, f.tasks[3], f.tasks);
        const DecisionRecord r = process_task(repo, f.tasks[3], Policy::Sdr, bad, f.root, gt);
        CHECK(r.aborted);
        CHECK(r.abort_reason.rfind("DecisionAborted", 0) == 0);
        CHECK(r.verdict == Verdict::New);
        CHECK(repo.unique_count() == 4);
    }

    TEST_CASE("ground truth") {
        const Fixture& f = fixture();
        const auto g = ground_truth_for(f.ws.repo, f.tasks[3], f.tasks);
        CHECK(g.similar());
        CHECK(g.similar_entries == std::vector<int>{f.tasks[3].provenance->source - 1});
        taskgen::TaskDataset bare = f.tasks[3];
        bare.provenance.reset();
        CHECK_THROWS_AS(ground_truth_for(f.ws.repo, bare, f.tasks), Error);
    }
}
