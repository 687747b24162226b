#include <doctest.h>

#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "latentlens/dataset.hpp"
#include "latentlens/image.hpp"

using namespace latentlens;
using latentlens::testing::random_image;
using latentlens::testing::temp_dir;

TEST_CASE("identity augmentation copies the image") {
    std::mt19937_64 rng(1);
    const Image img = random_image(16, 16, 3, rng);
    AugmentConfig cfg{0.0, 1.0, 1.0, true, 8};
    const Image out = preprocess_train(img, rng, 16, cfg);
    CHECK(out == img);
}

TEST_CASE("training augmentation is seeded, bounded and sized") {
    std::mt19937_64 src(2);
    const Image img = random_image(40, 30, 3, src);
    std::mt19937_64 a(9), b(9);
    const Image x = preprocess_train(img, a, 24);
    const Image y = preprocess_train(img, b, 24);
    CHECK(x == y);
    CHECK(x.height == 24);
    CHECK(x.width == 24);
    for (double v : x.pixels) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("training augmentation rejects tiny inputs and targets") {
    std::mt19937_64 rng(3);
    CHECK_THROWS_AS(preprocess_train(random_image(6, 20, 3, rng), rng, 16), ImageError);
    CHECK_THROWS_AS(preprocess_train(random_image(20, 20, 3, rng), rng, 4), ImageError);
}

TEST_CASE("eval preprocessing resizes the shorter edge then centre-crops") {
    // 512x384 (w x h): shorter edge 384 -> 256, longer 512 -> 341, crop 224.
    Image img(384, 512, 1);
    for (int y = 0; y < 384; ++y)
        for (int x = 0; x < 512; ++x) img.at(y, x, 0) = (x + 2.0 * y) / 1300.0;
    const Image resized_img = resize(img, 256, 341);
    const Image out = preprocess_eval(img, 256, 224);
    REQUIRE(out.height == 224);
    REQUIRE(out.width == 224);
    // Offsets: (256-224)/2 = 16 rows, (341-224)/2 = 58 columns.
    for (int y = 0; y < 224; y += 37)
        for (int x = 0; x < 224; x += 41) CHECK(out.at(y, x, 0) == resized_img.at(y + 16, x + 58, 0));
    CHECK_THROWS_AS(preprocess_eval(img, 200, 224), std::invalid_argument);
}

TEST_CASE("resize preserves constants and averages when shrinking") {
    Image flat(10, 6, 3, 0.25);
    const Image r = resize(flat, 5, 9);
    for (double v : r.pixels) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
    Image checker(4, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) checker.at(y, x, 0) = (x + y) % 2;
    const Image half = resize(checker, 2, 2);
    for (double v : half.pixels) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("png round trip is exact at 8-bit precision") {
    std::mt19937_64 rng(4);
    Image img = random_image(9, 7, 3, rng);
    for (double& v : img.pixels) v = std::round(v * 255.0) / 255.0;
    const auto bytes = encode_png(img);
    const Image back = decode_image(bytes);
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(back.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-12));
    CHECK_THROWS(decode_image(std::vector<std::uint8_t>{1, 2, 3, 4}));
}

TEST_CASE("tensor conversion round trips") {
    std::mt19937_64 rng(5);
    std::vector<Image> imgs{random_image(5, 6, 3, rng), random_image(5, 6, 3, rng)};
    const Tensor t = to_tensor(imgs);
    CHECK(t.shape() == std::vector<int>{2, 3, 5, 6});
    const auto back = images_from_tensor(t);
    CHECK(back[0] == imgs[0]);
    CHECK(back[1] == imgs[1]);
}

TEST_CASE("dataset manifests round trip in both layouts") {
    const auto dir = temp_dir("manifest");
    const Dataset ds = make_blob_dataset(12, 16, 3);
    write_dataset(ds, dir);
    const Dataset back = load_manifest(dir / "manifest.csv", dir);
    REQUIRE(back.samples.size() == ds.samples.size());
    CHECK(back.classes.codes() == ds.classes.codes());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) CHECK(back.samples[i].label == ds.samples[i].label);

    // One-hot layout, ISIC style.
    std::ofstream(dir / "onehot.csv") << "image,A,B\n" << ds.samples[0].id << ",0.0,1.0\n" << ds.samples[1].id << ",1.0,0.0\n";
    const Dataset oh = load_manifest(dir / "onehot.csv", dir);
    REQUIRE(oh.samples.size() == 2);
    CHECK(oh.samples[0].label == 1);
    CHECK(oh.samples[1].label == 0);
    CHECK(oh.classes.codes() == std::vector<std::string>{"A", "B"});
    std::filesystem::remove_all(dir);
}

TEST_CASE("stratified split keeps every class on both sides") {
    const Dataset ds = make_blob_dataset(40, 8, 1);
    auto [train, val] = split(ds, 0.75, 7);
    CHECK(train.samples.size() + val.samples.size() == 40);
    for (int c = 0; c < 4; ++c) {
        CHECK(train.class_counts()[c] > 0);
        CHECK(val.class_counts()[c] > 0);
    }
    auto [train2, val2] = split(ds, 0.75, 7);
    CHECK(train2.samples.front().id == train.samples.front().id);
}
