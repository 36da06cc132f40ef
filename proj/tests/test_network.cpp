#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "test_support.hpp"

namespace {

zsl::ArchitectureConfig small_arch(zsl::Activation semantic = zsl::Activation::relu) {
    zsl::ArchitectureConfig c;
    c.visual_dim = 10;
    c.text_dim = 6;
    c.semantic_dim = 4;
    c.reducer = {{10, 8, zsl::Activation::relu, true, 0.3}, {8, 6, zsl::Activation::relu, true, 0.3}};
    c.trunk = {{12, 9, zsl::Activation::relu, false, 0.2}, {9, 4, semantic, false, 0.0}};
    c.seed = 5;
    return c;
}

struct SmallModel {
    zsl::ClassVectorSet cv = zsl_test::random_class_vectors(7, 4, 1);
    zsl::Model<float> model;
    explicit SmallModel(zsl::ArchitectureConfig arch = small_arch())
        : model(zsl::init_model<float>(cv, cv.labels(), arch)) {}
};

TEST(Architecture, TaperedMatchesDefaultWidths) {
    const auto c = zsl::ArchitectureConfig::tapered(4096, 1024, 300);
    ASSERT_EQ(c.reducer.size(), 3U);
    EXPECT_EQ(c.reducer[0].out_dim, 2048U);
    EXPECT_EQ(c.reducer[1].out_dim, 1536U);
    EXPECT_EQ(c.reducer[2].out_dim, 1024U);
    const std::vector<std::size_t> trunk_out{1536, 1024, 768, 512, 300};
    ASSERT_EQ(c.trunk.size(), trunk_out.size());
    EXPECT_EQ(c.trunk[0].in_dim, 2048U);
    for (std::size_t i = 0; i < trunk_out.size(); ++i) EXPECT_EQ(c.trunk[i].out_dim, trunk_out[i]);
    for (const auto& l : c.reducer) {
        EXPECT_TRUE(l.has_batchnorm);
        EXPECT_DOUBLE_EQ(l.dropout_rate, 0.3);
    }
    EXPECT_EQ(c.trunk.back().activation, zsl::Activation::relu);
    EXPECT_NO_THROW(c.validate());
}

TEST(Architecture, SmallInputsUseWidthFloor) {
    const auto c = zsl::ArchitectureConfig::tapered(64, 32, 16, zsl::Activation::linear);
    EXPECT_EQ(c.reducer[0].out_dim, zsl::ArchitectureConfig::kMinHiddenWidth);
    EXPECT_EQ(c.reducer.back().out_dim, 32U);
    EXPECT_EQ(c.trunk.back().out_dim, 16U);
    EXPECT_EQ(c.trunk.back().activation, zsl::Activation::linear);
}

TEST(Architecture, RejectsBrokenChains) {
    auto c = small_arch();
    c.trunk[0].in_dim = 11;
    EXPECT_THROW(c.validate(), zsl::ConfigError);
    c = small_arch();
    c.trunk.back().out_dim = 5;
    EXPECT_THROW(c.validate(), zsl::ConfigError);
    c = small_arch();
    c.trunk[0].activation = zsl::Activation::softmax;
    EXPECT_THROW(c.validate(), zsl::ConfigError);
    c = small_arch();
    c.trunk.clear();
    EXPECT_THROW(c.validate(), zsl::ConfigError);
}

TEST(Architecture, JsonRoundTrip) {
    const auto c = zsl::ArchitectureConfig::tapered(100, 20, 10, zsl::Activation::linear, 77);
    EXPECT_EQ(zsl::architecture_from_json(zsl::to_json(c)), c);
}

TEST(Model, OutputLayerHoldsClassVectors) {
    const auto cv = zsl_test::random_class_vectors(196, 300, 2);
    std::vector<std::string> seen(cv.labels().begin(), cv.labels().begin() + 171);
    auto arch = zsl::ArchitectureConfig::tapered(24, 12, 300);
    const auto model = zsl::init_model<float>(cv, seen, arch);
    ASSERT_EQ(model.output_weights.rows(), 300);
    ASSERT_EQ(model.output_weights.cols(), 171);
    for (Eigen::Index c = 0; c < 171; ++c) {
        const auto v = cv.at(seen[static_cast<std::size_t>(c)]);
        for (Eigen::Index d = 0; d < 300; ++d) ASSERT_EQ(model.output_weights(d, c), v[static_cast<std::size_t>(d)]);
    }
}

TEST(Model, InitRejectsMismatches) {
    const auto cv = zsl_test::random_class_vectors(5, 4, 3);
    EXPECT_THROW(zsl::init_model<float>(cv, {"nope"}, small_arch()), zsl::ArgumentError);
    EXPECT_THROW(zsl::init_model<float>(cv, {}, small_arch()), zsl::ArgumentError);
    auto arch = small_arch();
    arch.semantic_dim = 5;
    arch.trunk.back().out_dim = 5;
    EXPECT_THROW(zsl::init_model<float>(cv, cv.labels(), arch), zsl::ConfigError);
}

TEST(Model, InitIsSeededAndHeUniform) {
    SmallModel a;
    SmallModel b;
    EXPECT_EQ(a.model.trunk[0].weight, b.model.trunk[0].weight);
    const double limit = std::sqrt(6.0 / 12.0);
    EXPECT_LE(a.model.trunk[0].weight.cwiseAbs().maxCoeff(), limit);
    EXPECT_EQ(a.model.trunk[0].bias.cwiseAbs().maxCoeff(), 0.0F);
    auto arch = small_arch();
    arch.seed = 6;
    SmallModel c(arch);
    EXPECT_NE(a.model.trunk[0].weight, c.model.trunk[0].weight);
}

TEST(Model, TrainableCountExcludesFrozenOutput) {
    SmallModel m;
    // reducer: 10*8+8 + 2*8, 8*6+6 + 2*6; trunk: 12*9+9, 9*4+4
    EXPECT_EQ(m.model.trainable_parameter_count(), 104U + 66U + 117U + 40U);
}

TEST(Forward, ShapesAndSoftmaxRows) {
    SmallModel m;
    std::mt19937_64 gen(1);
    const auto images = zsl_test::random_matrix(gen, 9, 10);
    const auto texts = zsl_test::random_matrix(gen, 9, 6);
    const auto trace = zsl::forward_batch(m.model, images, texts, zsl::ForwardMode::inference());
    EXPECT_EQ(trace.semantic.rows(), 9);
    EXPECT_EQ(trace.semantic.cols(), 4);
    EXPECT_EQ(trace.probs.cols(), 7);
    for (Eigen::Index r = 0; r < 9; ++r) {
        EXPECT_NEAR(trace.probs.row(r).cast<double>().sum(), 1.0, 1e-6);
        EXPECT_GE(trace.probs.row(r).minCoeff(), 0.0F);
    }
}

TEST(Forward, ReluOutputsAreNonNegative) {
    SmallModel m;
    std::mt19937_64 gen(2);
    const auto images = zsl_test::random_matrix(gen, 16, 10, 3.0);
    const auto texts = zsl_test::random_matrix(gen, 16, 6, 3.0);
    zsl::Rng rng(1);
    const auto trace = zsl::forward_batch(m.model, images, texts, zsl::ForwardMode::training(), &rng);
    for (const auto& l : trace.reducer) EXPECT_GE(l.output.minCoeff(), 0.0F);
    for (const auto& l : trace.trunk) EXPECT_GE(l.output.minCoeff(), 0.0F);
}

TEST(Forward, InferenceIsDeterministic) {
    SmallModel m;
    std::vector<float> x(10, 0.3F);
    std::vector<float> t(6, -0.2F);
    const auto a = zsl::forward(m.model, x, t, false);
    const auto b = zsl::forward(m.model, x, t, false);
    EXPECT_EQ(a.probs, b.probs);
}

TEST(Forward, DropoutNeedsRandomSource) {
    SmallModel m;
    std::vector<float> x(10, 0.3F);
    std::vector<float> t(6, -0.2F);
    EXPECT_THROW(zsl::forward(m.model, x, t, true), zsl::InternalError);
    zsl::Rng r1(4);
    zsl::Rng r2(4);
    EXPECT_EQ(zsl::forward(m.model, x, t, true, &r1).probs, zsl::forward(m.model, x, t, true, &r2).probs);
}

TEST(Forward, ZeroInputWithZeroBiasGivesZeroSemantic) {
    SmallModel m;
    std::vector<float> x(10, 0.0F);
    std::vector<float> t(6, 0.0F);
    const auto s = zsl::predict_semantic(m.model, x, t);
    for (Eigen::Index i = 0; i < s.size(); ++i) EXPECT_EQ(s[i], 0.0F);
}

TEST(Forward, RejectsBadInputs) {
    SmallModel m;
    std::vector<float> x(10, 0.0F);
    std::vector<float> t(6, 0.0F);
    EXPECT_THROW(zsl::predict_semantic(m.model, std::vector<float>(9, 0.0F), t), zsl::ArgumentError);
    EXPECT_THROW(zsl::predict_semantic(m.model, x, std::vector<float>(5, 0.0F)), zsl::ArgumentError);
    x[3] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_THROW(zsl::predict_semantic(m.model, x, t), zsl::NumericError);
    x[3] = std::numeric_limits<float>::infinity();
    EXPECT_THROW(zsl::reduce_visual(m.model, x, false), zsl::NumericError);
}

TEST(Forward, PredictSemanticMatchesForwardSemantic) {
    SmallModel m;
    std::mt19937_64 gen(3);
    const auto x = zsl_test::gaussian_vector(gen, 10);
    const auto t = zsl_test::gaussian_vector(gen, 6);
    const auto r = zsl::forward(m.model, x, t, false);
    const auto s = zsl::predict_semantic(m.model, x, t);
    EXPECT_EQ(r.trace.semantic.row(0), s);
    const zsl::MatrixF sm = s;
    EXPECT_EQ(zsl::class_probabilities(m.model, sm).row(0), r.probs);
}

TEST(Forward, ArgmaxOfOrthonormalClassVectors) {
    zsl::FeatureTable t(4);
    for (int c = 0; c < 4; ++c) {
        std::vector<float> e(4, 0.0F);
        e[static_cast<std::size_t>(c)] = 1.0F;
        t.add("e" + std::to_string(c), e);
    }
    const zsl::ClassVectorSet cv(std::move(t));
    const auto model = zsl::init_model<float>(cv, cv.labels(), small_arch());
    for (Eigen::Index c = 0; c < 4; ++c) {
        const zsl::MatrixF s = model.output_weights.col(c).transpose();
        Eigen::Index best = -1;
        zsl::class_probabilities(model, s).row(0).maxCoeff(&best);
        EXPECT_EQ(best, c);
    }
}

TEST(Forward, IdenticalClassVectorsSplitProbabilityEvenly) {
    zsl::FeatureTable t(4);
    t.add("a", std::vector<float>{1, 2, 3, 4});
    t.add("b", std::vector<float>{1, 2, 3, 4});
    const zsl::ClassVectorSet cv(std::move(t));
    const auto model = zsl::init_model<float>(cv, cv.labels(), small_arch());
    const auto r = zsl::forward(model, std::vector<float>(10, 0.7F), std::vector<float>(6, 0.1F), false);
    EXPECT_FLOAT_EQ(r.probs[0], 0.5F);
    EXPECT_FLOAT_EQ(r.probs[1], 0.5F);
}

TEST(Forward, SoftmaxIsStableForHugeLogits) {
    zsl::MatrixF logits(2, 3);
    logits << 1e4F, 0.0F, -1e4F, 50.0F, 50.0F, 50.0F;
    const auto p = zsl::detail::softmax_rows(logits);
    EXPECT_FLOAT_EQ(p(0, 0), 1.0F);
    EXPECT_EQ(p(0, 2), 0.0F);
    EXPECT_FLOAT_EQ(p(1, 1), 1.0F / 3.0F);
}

TEST(Forward, BatchnormInferenceUsesRunningStatistics) {
    // One BN layer, identity weight: output = (x - mean) / sqrt(var + eps) * gamma + beta.
    zsl::ArchitectureConfig c;
    c.visual_dim = 1;
    c.text_dim = 1;
    c.semantic_dim = 2;
    c.reducer = {{1, 1, zsl::Activation::linear, true, 0.0}};
    c.trunk = {{2, 2, zsl::Activation::linear, false, 0.0}};
    zsl::FeatureTable t(2);
    t.add("a", std::vector<float>{1, 0});
    auto model = zsl::init_model<double>(zsl::ClassVectorSet(std::move(t)), {"a"}, c);
    auto& bn = model.reducer[0];
    bn.weight(0, 0) = 1.0;
    bn.running_mean(0, 0) = 2.0;
    bn.running_var(0, 0) = 4.0;
    bn.gamma(0, 0) = 3.0;
    bn.beta(0, 0) = 0.5;
    zsl::Matrix<double> x(1, 1);
    x << 5.0;
    const auto out = zsl::detail::run_reducer<double>(model, x, zsl::ForwardMode::inference(), nullptr, nullptr);
    EXPECT_NEAR(out(0, 0), (5.0 - 2.0) / std::sqrt(4.0 + 1e-3) * 3.0 + 0.5, 1e-12);
}

TEST(Forward, FullSizeReducerOutputsTextWidth) {
    const auto cv = zsl_test::random_class_vectors(3, 300, 4);
    const auto model = zsl::init_model<float>(cv, cv.labels(), zsl::ArchitectureConfig::tapered(4096, 1024, 300));
    const auto r = zsl::reduce_visual(model, std::vector<float>(4096, 0.01F), false);
    EXPECT_EQ(r.size(), 1024);
}

TEST(Model, CastRoundTripPreservesFloats) {
    SmallModel m;
    const auto back = m.model.cast<double>().cast<float>();
    EXPECT_EQ(back.trunk[1].weight, m.model.trunk[1].weight);
    EXPECT_EQ(back.reducer[0].running_var, m.model.reducer[0].running_var);
    EXPECT_EQ(back.output_weights, m.model.output_weights);
}

}  // namespace
