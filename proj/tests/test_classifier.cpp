#include <doctest.h>

#include "gradcheck.hpp"
#include "latentlens/classifier.hpp"
#include "latentlens/dataset.hpp"

using namespace latentlens;
using latentlens::testing::gradient_check;

namespace {

ClassifierConfig small_config() {
    ClassifierConfig cfg;
    cfg.input_res = 16;
    cfg.conv_filters = {4, 8};
    cfg.hidden = 16;
    cfg.epochs = 150;
    cfg.batch_size = 16;
    cfg.learning_rate = 5e-3;
    cfg.augment = false;
    cfg.seed = 3;
    return cfg;
}

}  // namespace

TEST_CASE("classifier memorises a small training set") {
    const Dataset ds = make_blob_dataset(16, 16, 4);
    const auto result = train_classifier(ds, ds, small_config());
    CHECK(evaluate_balanced_accuracy(result.model, ds) == 1.0);
    CHECK(result.log.size() == 150);
    CHECK(result.log.back().loss < result.log.front().loss);
}

TEST_CASE("classifier loss gradients match finite differences") {
    ClassifierConfig cfg = small_config();
    cfg.input_res = 8;
    cfg.conv_filters = {3};
    cfg.hidden = 5;
    CnnClassifier clf(cfg, ClassCatalog({"A", "B", "C"}));
    const Dataset ds = make_blob_dataset(3, 8, 2);
    const Tensor x = to_tensor(ds.images());
    Tensor targets({3, 3}, 0.0);
    for (int i = 0; i < 3; ++i) targets[i * 3 + ds.samples[i].label] = 1.0;
    auto loss = [&] {
        const Tensor logits = clf.network().forward(x);
        const auto l = nn::bce_with_logits(logits, targets);
        clf.network().backward(l.grad);
        return l.value;
    };
    const auto r = gradient_check(loss, nn::parameters(clf.network()));
    CHECK(r.max_rel_error <= 1e-4);
    CHECK(r.checked > 0);
}

TEST_CASE("classifier predictions are well formed") {
    CnnClassifier clf(small_config(), ClassCatalog({"A", "B"}));
    const Dataset ds = make_blob_dataset(4, 16, 1);
    const auto preds = clf.predict_batch(ds.images());
    REQUIRE(preds.size() == 4);
    for (const auto& p : preds) {
        REQUIRE(p.scores.scores.size() == 2);
        for (double s : p.scores.scores) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        CHECK(p.label == p.scores.argmax());
    }
    CHECK_THROWS_AS(clf.predict(Image(15, 16, 3)), ShapeError);
    CHECK_THROWS_AS(clf.predict(Image(16, 16, 1)), ShapeError);
}

TEST_CASE("classifier checkpoint round trip keeps predictions") {
    CnnClassifier clf(small_config(), ClassCatalog({"A", "B", "C", "D"}));
    const Dataset ds = make_blob_dataset(6, 16, 5);
    auto ck = clf.to_checkpoint();
    const auto back = CnnClassifier::from_checkpoint(ck);
    CHECK(back.classes().codes() == clf.classes().codes());
    const auto a = clf.predict_batch(ds.images()), b = back.predict_batch(ds.images());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].scores.scores == b[i].scores.scores);
}

TEST_CASE("training needs two populated classes") {
    Dataset ds = make_blob_dataset(8, 16, 1);
    for (auto& s : ds.samples) s.label = 0;
    CHECK_THROWS(train_classifier(ds, ds, small_config()));
}
