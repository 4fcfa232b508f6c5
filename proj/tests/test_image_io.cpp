#include <gtest/gtest.h>

#include <fstream>

#include "lrad/image_io.hpp"
#include "test_util.hpp"

using namespace lrad;
using lrad::test::TempDir;

namespace {

void write_pgm(const std::filesystem::path& p, std::size_t w, std::size_t h, const std::vector<std::uint8_t>& px) {
    const auto bytes = encode_pgm(ByteImage{w, h, 1, px});
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

}  // namespace

TEST(Pgm, DecodesHeaderWithComments) {
    const std::string text = "P5\n# a comment\n3 2\n# another\n255\n";
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    for (std::uint8_t v : {1, 2, 3, 4, 5, 6}) bytes.push_back(v);
    const auto img = decode_pgm(bytes, "x.pgm");
    EXPECT_EQ(img.width, 3u);
    EXPECT_EQ(img.height, 2u);
    EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(decode_pgm(encode_pgm(img), "y").pixels, img.pixels);
}

TEST(Pgm, SixteenBitIsRescaled) {
    const std::string text = "P5 1 1 65535\n";
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    bytes.push_back(0xFF);
    bytes.push_back(0xFF);
    EXPECT_EQ(decode_pgm(bytes, "x").pixels[0], 255);
}

TEST(Pgm, RejectsGarbage) {
    const std::string text = "P6 1 1 255\n";
    EXPECT_THROW(decode_pgm({text.begin(), text.end()}, "x"), DataError);
    const std::string shortbody = "P5 2 2 255\n";
    EXPECT_THROW(decode_pgm({shortbody.begin(), shortbody.end()}, "x"), DataError);
}

TEST(Png, RoundTripGrayAndRgb) {
    TempDir dir("png");
    ByteImage gray{2, 2, 1, {0, 64, 128, 255}};
    encode_png(gray, dir / "g.png");
    EXPECT_EQ(decode_png(dir / "g.png", 1).pixels, gray.pixels);
    const auto rgb = decode_png(dir / "g.png", 3);
    EXPECT_EQ(rgb.pixels.size(), 12u);
    EXPECT_EQ(rgb.pixels[3], 64);
    EXPECT_EQ(rgb.pixels[5], 64);
    std::ofstream(dir / "bad.png") << "not a png";
    EXPECT_THROW(decode_png(dir / "bad.png", 1), DataError);
}

TEST(ResizeBilinear, IdentityAndUpsampleOracle) {
    const std::vector<float> src{0, 1, 2, 3};  // 2x2
    EXPECT_EQ(resize_bilinear(src, 1, 2, 2, 2, 2), src);
    // 2x2 -> 4x4 with half-pixel centres: source coords -0.25, 0.25, 0.75, 1.25 clamped to [0,1].
    const auto up = resize_bilinear(src, 1, 2, 2, 4, 4);
    auto ref = [&](double sy, double sx) {
        sy = std::clamp(sy, 0.0, 1.0);
        sx = std::clamp(sx, 0.0, 1.0);
        return (1 - sy) * ((1 - sx) * 0 + sx * 1) + sy * ((1 - sx) * 2 + sx * 3);
    };
    const double c[] = {-0.25, 0.25, 0.75, 1.25};
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) EXPECT_NEAR(up[y * 4 + x], ref(c[y], c[x]), 1e-6);
    // Downsampling a constant stays constant.
    const std::vector<float> flat(36, 0.25f);
    for (auto v : resize_bilinear(flat, 1, 6, 6, 3, 3)) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(ImageDir, LabelsFollowSortedSubdirectories) {
    TempDir dir("imgdir");
    std::filesystem::create_directories(dir / "cat");
    std::filesystem::create_directories(dir / "ant");
    write_pgm(dir / "cat" / "b.pgm", 2, 2, {0, 0, 0, 0});
    write_pgm(dir / "cat" / "a.pgm", 2, 2, {255, 255, 255, 255});
    encode_png(ByteImage{4, 4, 1, std::vector<std::uint8_t>(16, 255)}, dir / "ant" / "x.png");
    std::vector<std::string> names;
    const auto d = read_image_dir(dir.path(), 1, 2, &names);
    EXPECT_EQ(names, (std::vector<std::string>{"ant", "cat"}));
    EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 1}));
    EXPECT_EQ(d.ids, (std::vector<std::string>{"ant/x.png", "cat/a.pgm", "cat/b.pgm"}));
    EXPECT_EQ(d.images.shape(), (Shape{3, 1, 2, 2}));
    EXPECT_FLOAT_EQ(d.images[0], 1.0f);
    EXPECT_FLOAT_EQ(d.images[8], -1.0f);

    const auto rgb = read_image_dir(dir.path(), 3, 2);
    EXPECT_EQ(rgb.images.shape(), (Shape{3, 3, 2, 2}));
}

TEST(ImageDir, LooseFilesGetLabelZero) {
    TempDir dir("imgdir-loose");
    std::filesystem::create_directories(dir / "one");
    write_pgm(dir / "root.pgm", 1, 1, {0});
    write_pgm(dir / "one" / "a.pgm", 1, 1, {0});
    const auto d = read_image_dir(dir.path(), 1, 1);
    EXPECT_EQ(d.labels, (std::vector<int>{0, 1}));
    EXPECT_THROW(read_image_dir(dir / "one" / "a.pgm", 1, 1), DataError);
}
