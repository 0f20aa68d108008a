#include "helpers.hpp"

#include "sdr/error.hpp"
#include "sdr/taskgen.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

using namespace sdr;
using namespace sdr::taskgen;

namespace {

const TaskDataset& find_task(const std::vector<TaskDataset>& tasks, int k, int r, bool twin = false) {
    for (const auto& t : tasks)
        if (t.provenance && t.provenance->source == k && t.provenance->replica == r && t.provenance->label_permuted == twin)
            return t;
    FAIL("task not found");
    return tasks.front();
}

std::vector<std::vector<double>> rows_of(const Matrix& m) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r;
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        out.push_back(std::move(r));
    }
    return out;
}

/// Two-sample energy distance permutation test; returns the p-value.
double energy_test(const Matrix& a, const Matrix& b, int permutations, Rng& rng) {
    const Eigen::Index n = a.rows() + b.rows();
    Matrix pooled(n, a.cols());
    pooled << a, b;
    const Vector sq = pooled.rowwise().squaredNorm();
    Matrix d = (sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * pooled * pooled.transpose());
    d = d.cwiseMax(0.0).cwiseSqrt();

    auto statistic = [&](const std::vector<Eigen::Index>& idx) {
        const Eigen::Index m = a.rows();
        double ab = 0, aa = 0, bb = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double v = d(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
                if ((i < m) != (j < m)) ab += v;
                else if (i < m) aa += v;
                else bb += v;
            }
        }
        const double na = static_cast<double>(m), nb = static_cast<double>(n - m);
        return ab / (na * nb) - aa / (na * na) - bb / (nb * nb);
    };

    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    const double observed = statistic(idx);
    int exceed = 0;
    for (int p = 0; p < permutations; ++p) {
        rng.shuffle(idx);
        if (statistic(idx) >= observed) ++exceed;
    }
    return (exceed + 1.0) / (permutations + 1.0);
}

}  // namespace

TEST_SUITE("taskgen") {
    TEST_CASE("default spec structure") {
        SequenceSpec spec;
        spec.train_per_task = 200;
        spec.validation_per_task = 25;
        spec.test_per_task = 25;
        Rng rng(1);
        const auto tasks = generate_synthetic_sequence(spec, rng);
        REQUIRE(tasks.size() == 10);
        CHECK(spec.sequence_length() == 10);
        for (int i = 0; i < 3; ++i) {
            CHECK(tasks[static_cast<std::size_t>(i)].provenance->source == i + 1);
            CHECK(tasks[static_cast<std::size_t>(i)].provenance->replica == 1);
        }
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            CHECK(tasks[i].id == static_cast<int>(i));
            CHECK(tasks[i].train.x.cols() == 64);
            CHECK(tasks[i].train.size() == 200);
            std::vector<int> counts(5, 0);
            for (const int y : tasks[i].train.y) ++counts[static_cast<std::size_t>(y)];
            CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);
        }
        for (int k = 1; k <= 5; ++k) {
            CHECK(is_similar(find_task(tasks, k, 1), find_task(tasks, k, 2)));
            CHECK(is_similar(find_task(tasks, k, 2), find_task(tasks, k, 1)));
            for (int k2 = k + 1; k2 <= 5; ++k2) CHECK_FALSE(is_similar(find_task(tasks, k, 1), find_task(tasks, k2, 2)));
        }
        TaskDataset bare;
        CHECK_FALSE(is_similar(bare, bare));
    }

    TEST_CASE("invalid specs") {
        Rng rng(1);
        auto expect = [&](SequenceSpec s) {
            try {
                generate_synthetic_sequence(s, rng);
                FAIL("expected SpecInvalid");
            } catch (const Error& e) {
                CHECK(e.code() == ErrorCode::SpecInvalid);
            }
        };
        SequenceSpec s = test::small_spec();
        s.unique_sources = 3;
        expect(s);
        s = test::small_spec();
        s.replicas = 0;
        expect(s);
        s = test::small_spec();
        s.dim = 15;
        expect(s);
        s = test::small_spec();
        s.label_permuted_twins = {9};
        expect(s);
    }

    TEST_CASE("determinism") {
        const auto spec = test::small_spec();
        Rng a(5), b(5), c(6);
        const auto x = generate_synthetic_sequence(spec, a);
        const auto y = generate_synthetic_sequence(spec, b);
        const auto z = generate_synthetic_sequence(spec, c);
        REQUIRE(x.size() == y.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(x[i].train.x == y[i].train.x);
            CHECK(x[i].train.y == y[i].train.y);
            CHECK(x[i].test.x == y[i].test.x);
        }
        CHECK(x[4].train.x != z[4].train.x);
    }

    TEST_CASE("standardization and split hygiene") {
        auto spec = test::small_spec(400);
        spec.label_permuted_twins = {2};
        Rng rng(7);
        const auto tasks = generate_synthetic_sequence(spec, rng);
        Eigen::Index total = 0;
        for (const auto& t : tasks) total += t.train.x.rows();
        Matrix pooled(total, tasks.front().train.x.cols());
        Eigen::Index at = 0;
        for (const auto& t : tasks) {
            pooled.middleRows(at, t.train.x.rows()) = t.train.x;
            at += t.train.x.rows();
        }
        const Vector mean = pooled.colwise().mean().transpose();
        const Vector var = (pooled.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
        CHECK(mean.cwiseAbs().maxCoeff() < 0.01);
        CHECK((var.array() - 1.0).abs().maxCoeff() < 0.05);

        for (int k = 1; k <= spec.unique_sources; ++k) {
            std::set<std::vector<double>> seen;
            std::size_t rows = 0;
            for (int r = 1; r <= spec.replicas; ++r) {
                const auto& t = find_task(tasks, k, r);
                for (const auto* s : {&t.train, &t.validation, &t.test}) {
                    for (auto& row : rows_of(s->x)) seen.insert(std::move(row));
                    rows += s->size();
                }
            }
            CHECK(seen.size() == rows);
        }
    }

    TEST_CASE("label-permuted twin") {
        auto spec = test::small_spec(1000);
        spec.label_permuted_twins = {2};
        Rng rng(11);
        const auto tasks = generate_synthetic_sequence(spec, rng);
        REQUIRE(tasks.size() == 9);
        const auto& twin = find_task(tasks, 2, 0, true);
        const auto& source = find_task(tasks, 2, 1);
        CHECK_FALSE(is_similar(twin, source));
        CHECK_FALSE(is_similar(twin, find_task(tasks, 2, 2)));
        CHECK(twin.name == "T2.perm");

        Rng perm(12);
        const double p_same = energy_test(twin.train.x, source.train.x, 99, perm);
        CHECK(p_same > 0.05);
        // The same test rejects a genuinely different source.
        const double p_other = energy_test(find_task(tasks, 3, 1).train.x, source.train.x, 99, perm);
        CHECK(p_other <= 0.05);
    }

    TEST_CASE("image mode") {
        auto spec = test::small_spec(60);
        spec.mode = InputMode::Image;
        spec.validation_per_task = 10;
        spec.test_per_task = 10;
        Rng rng(2);
        const auto tasks = generate_synthetic_sequence(spec, rng);
        CHECK(tasks.front().geometry == Geometry{16, 16, 3});
        CHECK(tasks.front().train.x.cols() == 768);
        CHECK(tasks.front().train.x.allFinite());
    }

    TEST_CASE("permutations") {
        const auto a = permutation_order(10, 3);
        CHECK(a == permutation_order(10, 3));
        CHECK(a != permutation_order(10, 4));
        for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == i);
        auto sorted = a;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
        CHECK(permutation_order(3, 9) == std::vector<std::size_t>{0, 1, 2});

        Rng rng(1);
        const auto tasks = generate_synthetic_sequence(test::small_spec(30), rng);
        const auto p = permute_sequence(tasks, 3);
        std::multiset<int> before, after;
        for (const auto& t : tasks) before.insert(t.id);
        for (const auto& t : p) after.insert(t.id);
        CHECK(before == after);
    }

    TEST_CASE("dataset files") {
        const auto dir = test::temp_dir("taskgen_io");
        Rng rng(3);
        Dataset d{Geometry{2, 2, 1}, 3, test::random_matrix(7, 4, rng), {0, 1, 2, 0, 1, 2, 0}};
        d.x = d.x.cast<float>().cast<double>();
        write_dataset(d, dir / "d.sdrd");
        const Dataset back = read_dataset(dir / "d.sdrd");
        CHECK(back.geometry == d.geometry);
        CHECK(back.class_count == 3);
        CHECK(back.x == d.x);
        CHECK(back.y == d.y);

        {
            std::ifstream in(dir / "d.sdrd", std::ios::binary);
            std::string bytes((std::istreambuf_iterator<char>(in)), {});
            std::ofstream(dir / "short.sdrd", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
            bytes[4] = 9;
            std::ofstream(dir / "ver.sdrd", std::ios::binary) << bytes;
            bytes[0] = 'X';
            std::ofstream(dir / "magic.sdrd", std::ios::binary) << bytes;
        }
        auto code_of = [](const std::filesystem::path& p) {
            try {
                read_dataset(p);
            } catch (const Error& e) {
                return e.code();
            }
            return ErrorCode::InvalidArgument;
        };
        CHECK(code_of(dir / "short.sdrd") == ErrorCode::CorruptFile);
        CHECK(code_of(dir / "ver.sdrd") == ErrorCode::VersionMismatch);
        CHECK(code_of(dir / "magic.sdrd") == ErrorCode::CorruptFile);

        std::ofstream(dir / "d.csv") << "label,a,b,c,d\n1,0.5,1,2,3\n0,4,5,6,7\n";
        const Dataset csv = read_csv_dataset(dir / "d.csv");
        CHECK(csv.geometry == Geometry{2, 2, 1});
        CHECK(csv.y == std::vector<int>{1, 0});
        CHECK(csv.x(0, 0) == 0.5);
        std::ofstream(dir / "bad.csv") << "1,2,3\n0,x,1\n";
        CHECK_THROWS_AS(read_csv_dataset(dir / "bad.csv"), Error);
    }

    TEST_CASE("file sequence") {
        const auto dir = test::temp_dir("taskgen_manifest");
        // Ten classes with 21 samples each; feature 0 holds the sample index.
        Dataset d{Geometry{2, 2, 1}, 10, Matrix(210, 4), {}};
        Rng rng(4);
        for (int i = 0; i < 210; ++i) {
            d.y.push_back(i % 10);
            d.x(i, 0) = i;
            for (int j = 1; j < 4; ++j) d.x(i, j) = rng.normal() + d.y.back();
        }
        write_dataset(d, dir / "cifar10.sdrd");
        std::filesystem::copy_file(std::filesystem::path(SDR_SOURCE_DIR) / "data/manifests/cifar10.json",
                                   dir / "cifar10.json");
        const auto tasks = load_file_sequence(dir / "cifar10.json");
        REQUIRE(tasks.size() == 10);
        const auto& t3 = find_task(tasks, 3, 1);
        CHECK(t3.class_names == std::vector<std::string>{"cat", "dog"});
        CHECK(tasks[2].class_names == std::vector<std::string>{"cat", "dog"});

        for (int k = 1; k <= 5; ++k) {
            const auto& r1 = find_task(tasks, k, 1);
            const auto& r2 = find_task(tasks, k, 2);
            CHECK(is_similar(r1, r2));
            // 21 per class: 11 to r = 1, 10 to r = 2.
            CHECK(r1.train.size() + r1.validation.size() + r1.test.size() == 22);
            CHECK(r2.train.size() + r2.validation.size() + r2.test.size() == 20);
            std::set<double> ids;
            for (const auto* t : {&r1, &r2})
                for (const auto* s : {&t->train, &t->validation, &t->test})
                    for (Eigen::Index i = 0; i < s->x.rows(); ++i) ids.insert(s->x(i, 0));
            CHECK(ids.size() == 42);
        }

        std::ofstream(dir / "missing.json") << R"({"data": "cifar10.sdrd", "class_names": ["a"], "tasks": [["a"], ["b"], ["a"]]})";
        try {
            load_file_sequence(dir / "missing.json");
            FAIL("expected ClassMissing");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ClassMissing);
        }
        std::ofstream(dir / "bad.json") << R"({"tasks": [[0]]})";
        try {
            load_file_sequence(dir / "bad.json");
            FAIL("expected ManifestInvalid");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ManifestInvalid);
        }
        std::ofstream(dir / "split.json") << R"({"data": "cifar10.sdrd", "tasks": [[0], [1], [2]], "split": {"train": 0.9}})";
        CHECK_THROWS_AS(load_file_sequence(dir / "split.json"), Error);
    }
}
