#include <doctest.h>

#include "fixtures.hpp"
#include "latentlens/checkpoint.hpp"

using namespace latentlens;
using namespace latentlens::testing;

TEST_CASE("checkpoint serialize/deserialize/serialize is byte-identical") {
    CheckpointContainer c("test");
    c.metadata()["stage"] = 2;
    Tensor a({2, 3});
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.1 * static_cast<double>(i) - 0.25;
    c.put("a", a);
    c.put("b", Tensor({4}, 1.0 / 3.0));
    const auto bytes = c.serialize();
    const auto back = CheckpointContainer::deserialize(bytes);
    CHECK(back.serialize() == bytes);
    CHECK(back.kind() == "test");
    CHECK(back.metadata()["stage"] == 2);
    CHECK(back.metadata().contains("schema_version"));
    CHECK(back.get("a").storage() == a.storage());
    CHECK(back.names() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("checkpoint names stay unique and corrupt input is rejected") {
    CheckpointContainer c("test");
    c.put("w", Tensor({1}, 1.0));
    c.put("w", Tensor({1}, 2.0));
    CHECK(c.size() == 1);
    CHECK(c.get("w")[0] == 2.0);
    auto bytes = c.serialize();
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS(CheckpointContainer::deserialize(bad));
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS(CheckpointContainer::deserialize(bytes));
}

TEST_CASE("model checkpoints survive a file round trip") {
    const auto dir = temp_dir("ckpt");
    AaeModel m(tiny_aae_config());
    auto ck = m.to_checkpoint();
    ck.save(dir / "m.ckpt");
    const auto loaded = CheckpointContainer::load(dir / "m.ckpt");
    CHECK(loaded.serialize() == ck.serialize());
    AaeModel back = AaeModel::from_checkpoint(loaded);
    CHECK(back.to_checkpoint().serialize() == ck.serialize());
    std::mt19937_64 rng(1);
    const auto z = sample_prior(PriorSpec::standard_normal(4), 3, rng);
    CHECK(back.decode(z)[2] == m.decode(z)[2]);
    std::filesystem::remove_all(dir);
}
