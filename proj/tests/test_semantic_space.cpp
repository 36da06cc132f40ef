#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "test_support.hpp"

namespace {

zsl::ClassVectorSet table_from(const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
    zsl::FeatureTable t(static_cast<std::uint32_t>(rows.front().second.size()));
    for (const auto& [label, v] : rows) t.add(label, v);
    return zsl::ClassVectorSet(std::move(t));
}

void expect_matches_oracle(const zsl::SemanticIndex& index, const zsl::ClassVectorSet& cv,
                           const std::vector<float>& q, std::size_t k) {
    const auto expected = zsl_test::brute_force_knn(cv.labels(), zsl_test::rows_of(cv), q, k);
    const auto got = index.query(q, k);
    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t i = 0; i < k; ++i) {
        ASSERT_EQ(got[i].label, expected[i].label) << "rank " << i;
        ASSERT_EQ(got[i].distance, expected[i].distance) << "rank " << i;
    }
}

TEST(SemanticIndex, NearestInTwoDimensions) {
    const auto cv = table_from({{"a", {0, 0}}, {"b", {3, 4}}, {"c", {1, 0}}});
    const zsl::SemanticIndex index(cv);
    const auto r = index.query(std::vector<float>{0.1F, 0.0F}, 3);
    ASSERT_EQ(r.size(), 3U);
    EXPECT_EQ(r[0].label, "a");
    EXPECT_EQ(r[1].label, "c");
    EXPECT_EQ(r[2].label, "b");
    EXPECT_DOUBLE_EQ(r[2].distance, std::hypot(3.0 - double(0.1F), 4.0));
}

TEST(SemanticIndex, KOneReturnsSingleLabel) {
    const auto cv = zsl_test::random_class_vectors(20, 3, 1);
    const zsl::SemanticIndex index(cv);
    EXPECT_EQ(index.query(std::vector<float>{0, 0, 0}, 1).size(), 1U);
}

TEST(SemanticIndex, TiesBreakByLabel) {
    const auto cv = table_from({{"z", {1, 0}}, {"m", {-1, 0}}, {"a", {0, 1}}, {"q", {0, -1}}});
    const zsl::SemanticIndex index(cv, std::nullopt, zsl::IndexOptions{1});
    const auto r = index.query(std::vector<float>{0, 0}, 4);
    EXPECT_EQ(r[0].label, "a");
    EXPECT_EQ(r[1].label, "m");
    EXPECT_EQ(r[2].label, "q");
    EXPECT_EQ(r[3].label, "z");
}

TEST(SemanticIndex, DuplicatePointsAllReturned) {
    const auto cv = table_from({{"b", {1, 1}}, {"a", {1, 1}}, {"c", {1, 1}}, {"d", {5, 5}}});
    const zsl::SemanticIndex index(cv, std::nullopt, zsl::IndexOptions{1});
    const auto r = index.query(std::vector<float>{1, 1}, 3);
    EXPECT_EQ(r[0].label, "a");
    EXPECT_EQ(r[1].label, "b");
    EXPECT_EQ(r[2].label, "c");
    EXPECT_EQ(r[0].distance, 0.0);
}

TEST(SemanticIndex, QueryOnIndexedPointHasZeroDistance) {
    const auto cv = zsl_test::random_class_vectors(50, 8, 2);
    const zsl::SemanticIndex index(cv);
    for (std::size_t i = 0; i < cv.size(); ++i) {
        const auto v = cv.table().vector(i);
        const auto r = index.query(v, 1);
        EXPECT_EQ(r[0].label, cv.labels()[i]);
        EXPECT_EQ(r[0].distance, 0.0);
    }
}

TEST(SemanticIndex, MatchesBruteForceAcrossDimsAndLeafSizes) {
    std::mt19937_64 gen(3);
    for (std::uint32_t dim : {1U, 2U, 7U, 16U, 64U}) {
        for (std::size_t leaf : {1U, 3U, 8U, 32U}) {
            const auto cv = zsl_test::random_class_vectors(97, dim, dim * 100 + leaf);
            const zsl::SemanticIndex index(cv, std::nullopt, zsl::IndexOptions{leaf});
            for (int q = 0; q < 40; ++q) {
                const auto query = zsl_test::gaussian_vector(gen, dim);
                for (std::size_t k : {1U, 5U, 97U}) expect_matches_oracle(index, cv, query, k);
            }
        }
    }
}

TEST(SemanticIndex, LinearScanAgreesWithTree) {
    std::mt19937_64 gen(4);
    const auto cv = zsl_test::random_class_vectors(196, 30, 8);
    const zsl::SemanticIndex index(cv);
    for (int q = 0; q < 200; ++q) {
        const auto query = zsl_test::gaussian_vector(gen, 30);
        EXPECT_EQ(index.query(query, 10), index.linear_scan(query, 10));
    }
}

TEST(SemanticIndex, CandidateSubsetRestrictsResults) {
    const auto cv = zsl_test::random_class_vectors(30, 4, 5);
    const std::vector<std::string> subset{cv.labels()[3], cv.labels()[7], cv.labels()[11]};
    const zsl::SemanticIndex index(cv, subset);
    EXPECT_EQ(index.size(), 3U);
    const auto r = index.query(cv.table().vector(0), 3);
    for (const auto& e : r) {
        EXPECT_TRUE(std::find(subset.begin(), subset.end(), e.label) != subset.end());
    }
}

TEST(SemanticIndex, NormalizedIndexRanksByDirection) {
    const auto cv = table_from({{"far_x", {10, 0}}, {"near_y", {0, 0.5F}}});
    const zsl::SemanticIndex index(cv, std::nullopt, zsl::IndexOptions{8, true});
    const auto q = zsl::l2_normalized(std::vector<float>{1, 0.1F});
    EXPECT_EQ(index.query(q, 1)[0].label, "far_x");
}

TEST(SemanticIndex, RejectsBadQueries) {
    const auto cv = zsl_test::random_class_vectors(5, 3, 6);
    const zsl::SemanticIndex index(cv);
    EXPECT_THROW(index.query(std::vector<float>{0, 0}, 1), zsl::ArgumentError);
    EXPECT_THROW(index.query(std::vector<float>{0, 0, 0}, 0), zsl::ArgumentError);
    EXPECT_THROW(index.query(std::vector<float>{0, 0, 0}, 6), zsl::ArgumentError);
    EXPECT_THROW(zsl::SemanticIndex(cv, std::vector<std::string>{"nope"}), zsl::ArgumentError);
    EXPECT_THROW(zsl::SemanticIndex(cv, std::vector<std::string>{}), zsl::ArgumentError);
    EXPECT_THROW(zsl::SemanticIndex(zsl::ClassVectorSet{}), zsl::ArgumentError);
}

TEST(SemanticIndex, FreeFunctionsForwardToIndex) {
    const auto cv = zsl_test::random_class_vectors(12, 2, 7);
    const auto index = zsl::build_index(cv);
    const std::vector<float> q{0.5F, -0.5F};
    EXPECT_EQ(zsl::query_k_nearest(index, q, 4), index.query(q, 4));
}

}  // namespace
