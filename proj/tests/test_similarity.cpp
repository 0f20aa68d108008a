#include "helpers.hpp"

#include "sdr/error.hpp"
#include "sdr/similarity.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace sdr;
using namespace sdr::similarity;

namespace {

double mc_sigma(std::size_t samples) { return 0.5 / std::sqrt(static_cast<double>(samples)); }

}  // namespace

TEST_SUITE("similarity") {
    TEST_CASE("gram entry spot values") {
        const std::vector<double> e0{1, 0, 0}, e1{0, 1, 0};
        CHECK(gram_entry(e0, e0) == 0.5);
        CHECK(gram_entry(e0, e1) == 0.0);
        const std::vector<double> half{0.5, std::sqrt(0.75), 0};
        CHECK(std::abs(gram_entry(e0, half) - 1.0 / 6.0) < 1e-12);
        const std::vector<double> neg{-1, 0, 0};
        CHECK(gram_entry(e0, neg) == 0.0);
        const std::vector<double> long_v{2, 0, 0};
        CHECK_THROWS_AS(gram_entry(e0, long_v), Error);
    }

    TEST_CASE("Monte-Carlo oracle") {
        Rng rng(1);
        const std::vector<double> u{1, 0, 0, 0};
        const std::size_t n = 1000000;
        CHECK(std::abs(gram_entry_mc(u, u, n, rng) - 0.5) < 3 * mc_sigma(n));
        const std::vector<double> v{-1, 0, 0, 0};
        CHECK(std::abs(gram_entry_mc(u, v, n, rng)) < 3 * mc_sigma(n));
        const std::vector<double> w{0.5, std::sqrt(0.75), 0, 0};
        CHECK(std::abs(gram_entry_mc(u, w, n, rng) - 1.0 / 6.0) < 5e-3);
    }

    TEST_CASE("build_gram") {
        Matrix raw(2, 3);
        raw << 1, 0, 0, 0, 2, 0;
        Matrix h = build_gram(EmbeddingMatrix::from_raw(raw));
        CHECK((h - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);

        Matrix dup(2, 3);
        dup << 1, 1, 0, 2, 2, 0;
        h = build_gram(EmbeddingMatrix::from_raw(dup));
        CHECK(std::abs(h(0, 1) - 0.5) < 1e-8);

        Rng rng(2);
        const Matrix r = test::random_matrix(8, 5, rng);
        const auto emb = EmbeddingMatrix::from_raw(r);
        h = build_gram(emb);
        for (Eigen::Index i = 0; i < 8; ++i) {
            CHECK(h(i, i) == 0.5);
            for (Eigen::Index k = 0; k < 8; ++k) {
                CHECK(h(i, k) == h(k, i));
                CHECK((h(i, k) >= -0.09 && h(i, k) <= 0.5));
            }
        }
        for (Eigen::Index i = 0; i < 8; ++i) {
            for (Eigen::Index k = i + 1; k < 8; ++k) {
                const auto row = [&](Eigen::Index j) {
                    return std::vector<double>(emb.rows().row(j).data(), emb.rows().row(j).data() + 5);
                };
                Rng mc(static_cast<std::uint64_t>(100 * i + k));
                CHECK(std::abs(h(i, k) - gram_entry_mc(row(i), row(k), 1000000, mc)) < 5e-3);
            }
        }

        CHECK_THROWS_AS(build_gram(EmbeddingMatrix::from_raw(test::random_matrix(20, 3, rng)), 10), Error);
        CHECK_THROWS_AS(build_gram(EmbeddingMatrix::from_raw(test::random_matrix(1, 3, rng))), Error);
        CHECK_THROWS_AS(EmbeddingMatrix::from_raw(Matrix::Zero(2, 3)), Error);
    }

    TEST_CASE("similarity metric examples") {
        const Matrix h = 0.5 * Matrix::Identity(2, 2);
        const Matrix y = Matrix::Identity(2, 2);
        CHECK(similarity_metric(h, y, 0.0) == doctest::Approx(std::sqrt(32.0)).epsilon(1e-14));
        // Association variant: ||A||_F^2 = 8.
        CHECK(similarity_metric(h, y, 0.0, MetricVariant::Association) == doctest::Approx(std::sqrt(8.0)).epsilon(1e-14));
        Matrix h1(1, 1), y1(1, 1);
        h1 << 0.5;
        y1 << 1.0;
        CHECK(similarity_metric(h1, y1, 0.0) == doctest::Approx(2.0).epsilon(1e-14));
        CHECK_THROWS_AS(similarity_metric(h, Matrix::Identity(3, 3), 0.0), Error);
    }

    TEST_CASE("similarity metric is invariant to sample order and embedding scale") {
        Rng rng(3);
        const Matrix raw = test::random_matrix(30, 6, rng);
        std::vector<int> labels(30);
        for (int i = 0; i < 30; ++i) labels[static_cast<std::size_t>(i)] = i % 3;
        const double s = similarity_metric(build_gram(EmbeddingMatrix::from_raw(raw)), one_hot(labels, 3));

        std::vector<std::size_t> perm(30);
        for (std::size_t i = 0; i < 30; ++i) perm[i] = i;
        rng.shuffle(perm);
        Matrix raw_p(30, 6);
        std::vector<int> labels_p(30);
        for (std::size_t i = 0; i < 30; ++i) {
            raw_p.row(static_cast<Eigen::Index>(i)) = raw.row(static_cast<Eigen::Index>(perm[i]));
            labels_p[i] = labels[perm[i]];
        }
        const double sp = similarity_metric(build_gram(EmbeddingMatrix::from_raw(raw_p)), one_hot(labels_p, 3));
        CHECK(std::abs(s - sp) <= 1e-9 * s);

        for (const double c : {1e-3, 7.0, 1e4}) {
            const Matrix scaled = c * raw;
            const double sc = similarity_metric(build_gram(EmbeddingMatrix::from_raw(scaled)), one_hot(labels, 3));
            CHECK(std::abs(s - sc) <= 1e-9 * s);
        }
    }

    TEST_CASE("rank candidates") {
        const std::vector<Candidate> a{{1, 5.0}, {2, 3.0}, {3, 9.0}};
        CHECK(rank_candidates(a) == 2);
        const std::vector<Candidate> tie{{2, 3.0}, {1, 3.0}};
        CHECK(rank_candidates(tie) == 1);
        const std::vector<Candidate> one{{7, 1.0}};
        CHECK(rank_candidates(one) == 7);
        try {
            rank_candidates(std::vector<Candidate>{});
            FAIL("expected EmptyCandidates");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EmptyCandidates);
        }
        const std::vector<Candidate> nan{{1, std::nan("")}};
        CHECK_THROWS_AS(rank_candidates(nan), Error);
    }

    TEST_CASE("stratified subsample") {
        std::vector<int> labels;
        for (int i = 0; i < 1000; ++i) labels.push_back(i % 5 == 0 ? 0 : 1 + i % 4);
        Rng rng(4);
        const auto idx = stratified_subsample(labels, 5, 100, rng);
        CHECK(idx.size() == 100);
        CHECK(std::is_sorted(idx.begin(), idx.end()));
        std::vector<int> counts(5, 0);
        for (const auto i : idx) ++counts[static_cast<std::size_t>(labels[i])];
        for (const int c : counts) CHECK(c == 20);
        Rng a(9), b(9);
        CHECK(stratified_subsample(labels, 5, 64, a) == stratified_subsample(labels, 5, 64, b));
        const auto all = stratified_subsample(labels, 5, 5000, rng);
        CHECK(all.size() == 1000);
    }

    TEST_CASE("one hot") {
        const std::vector<int> y{0, 2, 1};
        const Matrix m = one_hot(y, 3);
        CHECK(m.rows() == 3);
        CHECK((m.rowwise().sum().array() == 1.0).all());
        CHECK(m(1, 2) == 1.0);
        const std::vector<int> bad{3};
        CHECK_THROWS_AS(one_hot(bad, 3), Error);
    }
}
