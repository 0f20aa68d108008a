// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fail.
#include "helpers.hpp"

#include "sdr/consistency.hpp"
#include "sdr/harness.hpp"
#include "sdr/nets/eft.hpp"
#include "sdr/nets/models.hpp"
#include "sdr/nets/train.hpp"
#include "sdr/similarity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>
#include <string>

using namespace sdr;

namespace {

std::map<int, std::string> results;
int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail, double seconds) {
    if (!pass) ++failures;
    char head[64];
    std::snprintf(head, sizeof head, "criterion %2d: %s  ", id, pass ? "PASS" : "FAIL");
    char tail[32];
    std::snprintf(tail, sizeof tail, " (%.1fs)", seconds);
    results[id] = head + what + "  [" + detail + "]" + tail;
    std::cerr << results[id] << std::endl;
}

class Timer {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

void gram_oracle() {
    Timer t;
    Rng rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto u = test::random_unit(8, rng);
        const auto v = test::random_unit(8, rng);
        Rng mc = rng.fork(static_cast<std::uint64_t>(i));
        worst = std::max(worst, std::abs(similarity::gram_entry(u, v) - similarity::gram_entry_mc(u, v, 1000000, mc)));
    }
    report(1, worst < 5e-3 && t.seconds() < 30.0, "Gram closed form vs Monte-Carlo expectation, 50 pairs",
           fmt("max |diff| = %.2e, bound 5e-3", worst), t.seconds());
}

void gram_spot_values() {
    Timer t;
    const std::vector<double> e0{1, 0, 0}, e1{0, 1, 0}, h{0.5, std::sqrt(0.75), 0};
    const double self = similarity::gram_entry(e0, e0);
    const double orth = similarity::gram_entry(e0, e1);
    const double sixth = similarity::gram_entry(e0, h);
    const bool pass = std::abs(self - 0.5) < 1e-12 && std::abs(orth) < 1e-12 && std::abs(sixth - 1.0 / 6.0) < 1e-12;
    report(2, pass, "Gram spot values", fmt("k(u,u)=%.15f k(orth)=%.1e k(0.5)-1/6=%.1e", self, orth, sixth - 1.0 / 6.0),
           t.seconds());
}

void metric_discrimination() {
    Timer t;
    int wins = 0;
    for (int trial = 0; trial < 20; ++trial) {
        taskgen::SequenceSpec spec;
        spec.train_per_task = 500;
        Rng rng(1000 + static_cast<std::uint64_t>(trial));
        const auto tasks = taskgen::generate_synthetic_sequence(spec, rng);
        const auto& task = tasks[static_cast<std::size_t>(trial) % tasks.size()];
        Rng sub = rng.fork(1);
        const auto idx = similarity::stratified_subsample(task.train.y, task.class_count, 256, sub);
        Matrix x(static_cast<Eigen::Index>(idx.size()), task.train.x.cols());
        std::vector<int> y;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = task.train.x.row(static_cast<Eigen::Index>(idx[i]));
            y.push_back(task.train.y[idx[i]]);
        }
        const Matrix h = similarity::build_gram(similarity::EmbeddingMatrix::from_raw(x));
        std::vector<int> permuted = y;
        sub.shuffle(permuted);
        const double s_true = similarity::similarity_metric(h, similarity::one_hot(y, task.class_count));
        const double s_perm = similarity::similarity_metric(h, similarity::one_hot(permuted, task.class_count));
        if (s_true < s_perm) ++wins;
    }
    report(3, wins >= 19 && t.seconds() < 120.0, "S(true labels) < S(permuted labels)",
           fmt("%.0f/20 trials, need 19", wins), t.seconds());
}

void consistency_estimator() {
    Timer t;
    // Normalization and shift invariance on random ELBOs spanning many scales.
    Rng rng(77);
    const consistency::MixtureConfig uniform;
    double worst_norm = 0.0;
    bool shift_exact = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 1 + rng.uniform_index(10);
        const double scale = std::pow(10.0, static_cast<double>(rng.uniform_index(7)));
        std::vector<double> elbo(k), shifted(k);
        // Dyadic values with a power-of-two shift keep every sum exact.
        const double shift = std::ldexp(static_cast<double>(static_cast<int>(rng.uniform_index(2001)) - 1000), 10);
        for (std::size_t j = 0; j < k; ++j) {
            elbo[j] = std::ldexp(std::round(std::ldexp(scale * rng.normal(), 16)), -16);
            shifted[j] = elbo[j] + shift;
        }
        const auto lp = uniform.log_priors(k);
        const Vector p = consistency::posterior_from_elbos(elbo, lp);
        const Vector q = consistency::posterior_from_elbos(shifted, lp);
        worst_norm = std::max(worst_norm, std::abs(p.sum() - 1.0));
        if (p != q) shift_exact = false;
    }

    // In-task mass: VAEs for the three warm-start tasks scored on each task's held-out split.
    double mass = 0.0;
    int count = 0;
    for (int seed = 0; seed < 10; ++seed) {
        taskgen::SequenceSpec spec;
        Rng rng_seq(500 + static_cast<std::uint64_t>(seed));
        const auto tasks = taskgen::generate_synthetic_sequence(spec, rng_seq);
        const EngineConfig ec;
        std::vector<nets::Vae> vaes;
        for (int j = 0; j < 3; ++j) {
            Rng r = rng_seq.fork(static_cast<std::uint64_t>(j));
            const auto& tj = tasks[static_cast<std::size_t>(j)];
            vaes.push_back(nets::train_vae(tj.train.x, tj.validation.x, ec.arch.vae, ec.vae, r).vae);
        }
        const std::vector<const nets::Vae*> models{&vaes[0], &vaes[1], &vaes[2]};
        const std::vector<int> ids{0, 1, 2};
        for (int j = 0; j < 3; ++j) {
            const auto rep = consistency::aggregate_consistency(tasks[static_cast<std::size_t>(j)].test.x, models, ids, uniform);
            mass += rep.aggregate[j];
            ++count;
        }
    }
    mass /= count;
    const bool pass = worst_norm <= 1e-9 && shift_exact && mass > 1.0 / 3.0 + 0.2;
    report(5, pass, "consistency posterior",
           fmt("max |sum-1| = %.1e, shift exact = ", worst_norm) + (shift_exact ? "yes" : "no") +
               fmt(", in-task mass %.3f, need > 1/C + 0.2 = %.3f", mass, 1.0 / 3.0 + 0.2),
           t.seconds());
}

void adapter_economy() {
    Timer t;
    const EngineConfig ec;
    nets::Backbone bb(Geometry{8, 8, 1}, ec.arch.backbone);
    Rng rng(1);
    bb.init(rng);
    const nets::EftAdapter adapter = bb.make_adapter(ec.arch.eft, rng);
    const double ratio = static_cast<double>(adapter.parameter_count()) / static_cast<double>(bb.parameter_count());
    report(8, ratio < 0.10, "adapter / backbone parameters",
           fmt("%.0f / %.0f = %.4f, bound 0.10", static_cast<double>(adapter.parameter_count()),
               static_cast<double>(bb.parameter_count()), ratio),
           t.seconds());
}

double weighted_sum(const Matrix& out, const Matrix& r) { return (out.array() * r.array()).sum(); }

void gradients() {
    Timer t;
    Rng rng(99);
    double worst_dense = 0, worst_conv = 0, worst_eft = 0, worst_vae = 0;
    for (int trial = 0; trial < 5; ++trial) {
        nets::Dense d("d", 7, 5);
        d.init_he(rng);
        const Matrix x = test::random_matrix(6, 7, rng);
        const Matrix r = test::random_matrix(6, 5, rng);
        d.weight.zero_grad();
        d.bias.zero_grad();
        d.backward(x, r, true, false);
        auto ld = [&] { return weighted_sum(d.forward(x), r); };
        worst_dense = std::max({worst_dense, test::max_gradient_error(d.weight, d.weight.grad, ld, 30, rng),
                                test::max_gradient_error(d.bias, d.bias.grad, ld, 5, rng)});

        nets::Conv3x3 c("c", 3, 4);
        c.init_he(rng);
        const nets::FeatureMap f{test::random_matrix(2 * 5 * 5, 3, rng), 2, 5, 5};
        const Matrix rc = test::random_matrix(f.data.rows(), 4, rng);
        c.weight.zero_grad();
        c.bias.zero_grad();
        c.backward(f, rc, true, false);
        auto lc = [&] { return weighted_sum(c.forward(f).data, rc); };
        worst_conv = std::max({worst_conv, test::max_gradient_error(c.weight, c.weight.grad, lc, 30, rng),
                               test::max_gradient_error(c.bias, c.bias.grad, lc, 4, rng)});

        nets::EftLayer e("e", 8, nets::EftConfig{4, 8, true});
        for (auto* p : {&e.spatial, &e.pointwise})
            for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value[i] = 0.5 * rng.normal();
        const nets::FeatureMap fe{test::random_matrix(2 * 4 * 4, 8, rng), 2, 4, 4};
        const Matrix re = test::random_matrix(fe.data.rows(), 8, rng);
        e.spatial.zero_grad();
        e.pointwise.zero_grad();
        e.backward(fe, re, false);
        auto le = [&] { return weighted_sum(e.forward(fe).data, re); };
        worst_eft = std::max({worst_eft, test::max_gradient_error(e.spatial, e.spatial.grad, le, 30, rng),
                              test::max_gradient_error(e.pointwise, e.pointwise.grad, le, 30, rng)});

        nets::Vae vae(6, nets::VaeConfig{10, 3, 1.0});
        vae.init(rng);
        const Matrix xv = test::random_matrix(5, 6, rng);
        const Matrix eps = test::random_matrix(5, 3, rng);
        for (auto* p : vae.parameters()) p->zero_grad();
        vae.loss_and_grad(xv, eps);
        for (auto* p : vae.parameters())
            worst_vae = std::max(worst_vae, test::max_gradient_error(*p, p->grad, [&] { return vae.loss(xv, eps); }, 20, rng));
    }
    const double worst = std::max({worst_dense, worst_conv, worst_eft, worst_vae});
    report(9, worst < 1e-4, "analytic vs finite-difference gradients",
           fmt("dense %.1e conv %.1e eft %.1e", worst_dense, worst_conv, worst_eft) + fmt(" vae %.1e, bound 1e-4", worst_vae),
           t.seconds());
}

const PolicyResult* find(const ExperimentReport& r, Policy p) {
    for (const auto& x : r.policies)
        if (x.policy == p) return &x;
    return nullptr;
}

void default_run() {
    ExperimentConfig cfg;
    cfg.sequence = taskgen::SequenceSpec{};
    cfg.policies = {Policy::Sdr, Policy::Optimal, Policy::SinglePerTask};
    Timer t;
    const ExperimentReport first = run_experiment(cfg);
    const double run_seconds = t.seconds();
    if (first.failure) {
        for (int id : {4, 6, 7, 10, 11}) report(id, false, "default experiment", "run failed: " + *first.failure, run_seconds);
        return;
    }
    const PolicyResult& sdr = *find(first, Policy::Sdr);
    const PolicyResult& opt = *find(first, Policy::Optimal);
    const PolicyResult& single = *find(first, Policy::SinglePerTask);
    const int unique = cfg.sequence->unique_sources;

    // Diagonal heatmap: argmin S against ground truth, tasks that have a similar entry.
    double hit_rate = 0.0;
    for (const auto& perm : sdr.permutations) {
        int hits = 0, total = 0;
        for (const auto& d : perm.decisions) {
            if (!d.ground_truth || !d.ground_truth->similar() || d.aborted) continue;
            ++total;
            const auto& s = d.ground_truth->similar_entries;
            if (std::find(s.begin(), s.end(), d.a) != s.end()) ++hits;
        }
        hit_rate += total ? static_cast<double>(hits) / total : 0.0;
    }
    hit_rate = 100.0 * hit_rate / static_cast<double>(sdr.permutations.size());
    report(4, hit_rate >= 80.0 && run_seconds < 900.0, "argmin S hits the similar task",
           fmt("%.1f%% averaged over %.0f permutations, need 80%%", hit_rate, static_cast<double>(sdr.permutations.size())),
           run_seconds);

    bool counts_exact = true;
    for (const auto& perm : sdr.permutations) {
        const Score& s = perm.score;
        if (s.correct_count + s.miss_count + s.incorrect_count != s.count) counts_exact = false;
        if (std::abs(s.correct + s.miss + s.incorrect - 100.0) > 1e-9) counts_exact = false;
    }
    report(6, sdr.correct >= 80.0 && counts_exact, "end-to-end identification",
           fmt("correct %.2f%% miss %.2f%% incorrect %.2f%%", sdr.correct, sdr.miss, sdr.incorrect) +
               (counts_exact ? ", counts sum exactly" : ", counts do not sum") + ", need correct >= 80%",
           0.0);

    const double ratio = sdr.parameters / single.parameters;
    const bool c_exact = opt.unique_entries == static_cast<double>(unique);
    report(7, ratio <= 0.60 && c_exact, "memory sublinearity",
           fmt("sdr/single parameters = %.3f (bound 0.60, %.2f MB vs %.2f MB)", ratio, sdr.megabytes, single.megabytes) +
               fmt(", optimal C = %.1f, U = %.0f", opt.unique_entries, unique),
           0.0);

    bool bit_exact = true;
    std::size_t tasks_checked = 0;
    for (const auto& p : first.policies)
        for (const auto& perm : p.permutations)
            for (std::size_t i = 0; i < perm.final_accuracy.size(); ++i, ++tasks_checked)
                if (perm.after_training[i].test != perm.final_accuracy[i]) bit_exact = false;
    report(10, bit_exact && tasks_checked > 0, "no negative backward transfer",
           fmt("%.0f task evaluations compared bit-exactly", static_cast<double>(tasks_checked)), 0.0);

    Timer t2;
    const ExperimentReport second = run_experiment(cfg);
    const bool same = report_to_json(first).dump(2) == report_to_json(second).dump(2);
    report(11, same, "two runs of one config give identical report.json", same ? "identical" : "reports differ",
           t2.seconds());
}

}  // namespace

int main() {
    gram_oracle();
    gram_spot_values();
    metric_discrimination();
    consistency_estimator();
    adapter_economy();
    gradients();
    default_run();
    for (const auto& [id, line] : results) std::printf("%s\n", line.c_str());
    std::printf("%s: %d of %zu criteria failed\n", failures ? "FAIL" : "PASS", failures, results.size());
    return failures ? 1 : 0;
}
