#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "disen/config.hpp"

using namespace disen;
using doctest::Contains;

TEST_CASE("empty config document keeps every default") {
    const GlobalConfig got = parse_config("{}");
    const GlobalConfig def;
    CHECK(got.version == def.version);
    CHECK(got.seed == def.seed);
    CHECK(got.resolution == 32);
    CHECK(got.pairs_per_kind == 1500);
    CHECK(got.timesteps == 1000);
    CHECK(got.model.d_u == def.model.d_u);
    CHECK(got.sampler.omega == def.sampler.omega);
    CHECK(got.train.main_steps == def.train.main_steps);
    CHECK(got.train.variant == def.train.variant);
    CHECK(got.dump() == def.dump());
    CHECK_NOTHROW(got.validate());
}

TEST_CASE("section values land in the module configs they feed") {
    const GlobalConfig cfg = parse_config(R"({
        "seed": 9,
        "data": {"resolution": 16, "pairs_per_kind": 10},
        "model": {"patch_size": 8, "d_u": 8, "trunk_channels": [4, 6, 8], "gn_groups": 2},
        "diffusion": {"timesteps": 50},
        "sampler": {"mu": 0.5, "ddim_steps": 5},
        "train": {"variant": "cd", "lambda": 0.125, "batch_size": 3}
    })");
    CHECK(cfg.model_config().resolution == 16);
    CHECK(cfg.model_config().d_u == 8);
    CHECK(cfg.model_config().trunk_channels == std::vector<int>{4, 6, 8});
    CHECK(cfg.train_config().timesteps == 50);
    CHECK(cfg.train_config().seed == 9);
    CHECK(cfg.train_config().variant == ContrastiveVariant::CD);
    CHECK(cfg.train_config().lambda == 0.125);
    CHECK(cfg.train_config().batch_size == 3);
    CHECK(cfg.sampler_config().seed == 9);
    CHECK(cfg.sampler_config().mu == 0.5);
    CHECK(cfg.sampler_config().ddim_steps == 5);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("unknown keys are rejected naming section and key") {
    CHECK_THROWS_WITH_AS((void)parse_config(R"({"data": {"res": 1}})"),
                         Contains("data.res"), std::invalid_argument);
    CHECK_THROWS_WITH_AS((void)parse_config(R"({"train": {"lamda": 0.1}})"),
                         Contains("train.lamda"), std::invalid_argument);
    CHECK_THROWS_WITH_AS((void)parse_config(R"({"foo": 1})"), Contains("top-level.foo"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS((void)parse_config(R"({"model": 3})"), Contains("section model"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS((void)parse_config("[1, 2]"), Contains("top level"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS((void)parse_config("{nope"), Contains("invalid JSON"),
                         std::invalid_argument);
}

TEST_CASE("dump then reparse is the identity and drives the hash") {
    GlobalConfig cfg;
    cfg.seed = 123;
    cfg.resolution = 16;
    cfg.model.patch_size = 8;
    cfg.train.variant = ContrastiveVariant::CD;
    cfg.train.lambda = 0.25;
    cfg.sampler.mu = 0.0;

    const std::string text = cfg.dump();
    const GlobalConfig back = parse_config(text);
    CHECK(back.dump() == text);
    CHECK(config_hash(back) == config_hash(cfg));

    GlobalConfig other = cfg;
    other.train.lambda = 0.26;
    CHECK(config_hash(other) != config_hash(cfg));
    GlobalConfig reseeded = cfg;
    reseeded.seed = 124;
    CHECK(config_hash(reseeded) != config_hash(cfg));
}

TEST_CASE("variant names round-trip and bad ones are named") {
    CHECK(variant_from_name("cod") == ContrastiveVariant::COD);
    CHECK(variant_from_name("cd") == ContrastiveVariant::CD);
    CHECK(variant_from_name("none") == ContrastiveVariant::None);
    CHECK(std::string(variant_name(ContrastiveVariant::COD)) == "cod");
    CHECK(std::string(variant_name(ContrastiveVariant::None)) == "none");
    CHECK_THROWS_WITH_AS((void)variant_from_name("cos"), Contains("'cos'"),
                         std::invalid_argument);
}

TEST_CASE("validate rejects bad versions, counts, and forwarded module errors") {
    GlobalConfig cfg;
    cfg.version = 2;
    CHECK_THROWS_WITH_AS(cfg.validate(), Contains("version"), std::invalid_argument);
    cfg.version = 1;
    cfg.pairs_per_kind = 0;
    CHECK_THROWS_WITH_AS(cfg.validate(), Contains("pairs_per_kind"), std::invalid_argument);
    cfg.pairs_per_kind = 1;
    cfg.resolution = 33;  // not divisible by the default patch_size
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.resolution = 32;
    cfg.sampler.ddim_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("load_config reads files and names missing ones") {
    const std::string path = "test_config_tmp.json";
    {
        std::ofstream out(path);
        out << R"({"seed": 77, "train": {"main_steps": 42}})";
    }
    const GlobalConfig cfg = load_config(path);
    CHECK(cfg.seed == 77);
    CHECK(cfg.train.main_steps == 42);
    std::remove(path.c_str());
    CHECK_THROWS_WITH_AS((void)load_config("no_such_config.json"),
                         Contains("no_such_config.json"), std::runtime_error);
}
