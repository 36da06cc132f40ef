#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "test_support.hpp"

namespace {

using namespace std::string_literals;

// Two records, dim 3: "a" -> (1, 2, 3), "bc" -> (4, 5, 6), written out by hand.
const std::string kTwoRecords =
    "ZSLF"s + "\x01\x00\x00\x00"s + "\x02\x00\x00\x00"s + "\x03\x00\x00\x00"s +  //
    "\x01\x00"s + "a"s +                                                          //
    "\x00\x00\x80\x3f"s + "\x00\x00\x00\x40"s + "\x00\x00\x40\x40"s +            //
    "\x02\x00"s + "bc"s +                                                         //
    "\x00\x00\x80\x40"s + "\x00\x00\xa0\x40"s + "\x00\x00\xc0\x40"s;

zsl::FeatureTable two_records() {
    zsl::FeatureTable t(3);
    t.add("a", std::vector<float>{1, 2, 3});
    t.add("bc", std::vector<float>{4, 5, 6});
    return t;
}

TEST(Zslf, EncodesKnownBytes) {
    EXPECT_EQ(zsl::encode_zslf(two_records()), kTwoRecords);
}

TEST(Zslf, DecodesKnownBytes) {
    const auto t = zsl::decode_zslf(kTwoRecords);
    ASSERT_EQ(t.size(), 2U);
    EXPECT_EQ(t.dim(), 3U);
    EXPECT_EQ(t.id(1), "bc");
    EXPECT_EQ(t.vector(1)[2], 6.0F);
    EXPECT_EQ(t.find("a"), 0);
    EXPECT_EQ(t.find("zz"), -1);
}

TEST(Zslf, EmptyTableIsHeaderOnly) {
    const auto bytes = zsl::encode_zslf(zsl::FeatureTable(7));
    EXPECT_EQ(bytes, "ZSLF"s + "\x01\x00\x00\x00"s + "\x00\x00\x00\x00"s + "\x07\x00\x00\x00"s);
    const auto t = zsl::decode_zslf(bytes);
    EXPECT_EQ(t.size(), 0U);
    EXPECT_EQ(t.dim(), 7U);
}

TEST(Zslf, RoundTripKeepsSpecialFloatsBitwise) {
    zsl::FeatureTable t(4);
    t.add("x", std::vector<float>{-0.0F, std::numeric_limits<float>::denorm_min(),
                                  std::numeric_limits<float>::infinity(), std::numeric_limits<float>::quiet_NaN()});
    t.add("", std::vector<float>{1e-30F, -3.5F, 0.0F, 65504.0F});
    EXPECT_TRUE(zsl::decode_zslf(zsl::encode_zslf(t)) == t);
}

TEST(Zslf, RoundTripThroughFile) {
    zsl_test::TempDir dir("zslf_file");
    const auto path = dir.path() / "t.zslf";
    zsl::write_feature_file(two_records(), path);
    EXPECT_EQ(zsl::detail::read_file_bytes(path), kTwoRecords);
    EXPECT_TRUE(zsl::load_feature_file(path) == two_records());
}

TEST(Zslf, RejectsBadMagic) {
    auto bytes = kTwoRecords;
    bytes[3] = 'X';
    EXPECT_THROW(zsl::decode_zslf(bytes), zsl::FormatError);
    EXPECT_THROW(zsl::decode_zslf("ZS"), zsl::FormatError);
}

TEST(Zslf, RejectsUnknownVersion) {
    auto bytes = kTwoRecords;
    bytes[4] = '\x02';
    EXPECT_THROW(zsl::decode_zslf(bytes), zsl::FormatError);
}

TEST(Zslf, RejectsZeroDim) {
    const auto bytes = "ZSLF"s + "\x01\x00\x00\x00"s + "\x00\x00\x00\x00"s + "\x00\x00\x00\x00"s;
    EXPECT_THROW(zsl::decode_zslf(bytes), zsl::FormatError);
}

TEST(Zslf, TruncationAnywhereIsCorruption) {
    for (std::size_t len = 4; len < kTwoRecords.size(); ++len) {
        EXPECT_THROW(zsl::decode_zslf(kTwoRecords.substr(0, len)), zsl::CorruptionError) << "length " << len;
    }
}

TEST(Zslf, TrailingBytesAreCorruption) {
    EXPECT_THROW(zsl::decode_zslf(kTwoRecords + "x"), zsl::CorruptionError);
}

TEST(Zslf, CountLargerThanPayloadIsCorruption) {
    auto bytes = kTwoRecords;
    bytes[8] = '\x03';
    EXPECT_THROW(zsl::decode_zslf(bytes), zsl::CorruptionError);
}

TEST(Zslf, DuplicateIdsFailValidation) {
    zsl::FeatureTable t(1);
    t.add("a", std::vector<float>{1});
    t.add("a", std::vector<float>{2});
    EXPECT_THROW(t.validate(), zsl::ValidationError);
    EXPECT_THROW(zsl::encode_zslf(t), zsl::ValidationError);
    EXPECT_EQ(t.find("a"), 0);
}

TEST(Zslf, DuplicateIdsInFileFailDecode) {
    std::string raw = "ZSLF"s + "\x01\x00\x00\x00"s + "\x02\x00\x00\x00"s + "\x01\x00\x00\x00"s;
    for (int i = 0; i < 2; ++i) raw += "\x01\x00"s + "q"s + "\x00\x00\x80\x3f"s;
    EXPECT_THROW(zsl::decode_zslf(raw), zsl::ValidationError);
}

TEST(Zslf, WrongVectorLengthIsRejected) {
    zsl::FeatureTable t(3);
    EXPECT_THROW(t.add("a", std::vector<float>{1, 2}), zsl::ValidationError);
    EXPECT_THROW(zsl::FeatureTable(0), zsl::ValidationError);
}

TEST(Zslf, MissingFileIsIoError) {
    EXPECT_THROW(zsl::load_feature_file("/nonexistent/dir/x.zslf"), zsl::IoError);
}

TEST(Zslf, RandomTablesRoundTrip) {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto dim = static_cast<std::uint32_t>(1 + gen() % 40);
        zsl::FeatureTable t(dim);
        const auto rows = gen() % 30;
        for (std::uint64_t r = 0; r < rows; ++r) {
            t.add("id" + std::to_string(r) + std::string(gen() % 5, 'z'), zsl_test::gaussian_vector(gen, dim));
        }
        const auto bytes = zsl::encode_zslf(t);
        EXPECT_EQ(zsl::encode_zslf(zsl::decode_zslf(bytes)), bytes);
    }
}

}  // namespace
