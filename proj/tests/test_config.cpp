#include <fstream>

#include "doctest.h"
#include "experiments.hpp"

#ifndef SG_SOURCE_DIR
#define SG_SOURCE_DIR "."
#endif

using namespace sgx;

TEST_CASE("shipped default config equals the built-in defaults") {
    std::ifstream in(SG_SOURCE_DIR "/configs/default.json");
    REQUIRE(in);
    json file = json::parse(in);
    CHECK(file == default_config());
    auto loaded = load_config(SG_SOURCE_DIR "/configs/default.json", {});
    CHECK(loaded == default_config());
    CHECK(run_hash("report", loaded) == run_hash("report", default_config()));
}

TEST_CASE("overrides: typed, nested, validated") {
    auto c = load_config("", {"mc.n_traj=500", "bd_solve.method=spsa", "grid.mass=2"});
    CHECK(c["mc"]["n_traj"] == 500);
    CHECK(c["bd_solve"]["method"] == "spsa");
    CHECK(c["grid"]["mass"].is_number_float());
    CHECK_THROWS_AS(load_config("", {"mc.bogus=1"}), ConfigError);
    CHECK_THROWS_AS(load_config("", {"mc.n_traj=1.5"}), ConfigError);
    CHECK_THROWS_AS(load_config("", {"mc.n_traj"}), ConfigError);
    CHECK_THROWS_AS(load_config("", {"grid.n_side=48"}), ConfigError);
    CHECK_THROWS_AS(load_config("", {"physics.beta_sq=13"}), ConfigError);
    CHECK_THROWS_AS(load_config("", {"semiclassical.hbar=[0.1,0.2,0.3]"}), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent.json", {}), ConfigError);
}

TEST_CASE("run hash depends on subcommand and config") {
    auto c = default_config();
    auto d = load_config("", {"mc.master_seed=2"});
    CHECK(run_hash("wick-check", c).size() == 16);
    CHECK(run_hash("wick-check", c) != run_hash("lp-scaling", c));
    CHECK(run_hash("wick-check", c) != run_hash("wick-check", d));
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("csv and number formatting") {
    Table t{"x", {"a", "b"}};
    t.add({"1", "he said \"hi\", twice"});
    CHECK(to_csv(t) == "a,b\r\n1,\"he said \"\"hi\"\", twice\"\r\n");
    CHECK(num(0.1) == "0.1");
    CHECK(num(1.0 / 0.0) == "inf");
    CHECK(num(std::nan("")) == "nan");
}

TEST_CASE("unknown subcommand is a config error") {
    CHECK_THROWS_AS(run_subcommand("nope", default_config()), ConfigError);
    CHECK(subcommands().size() == 7);
}

TEST_CASE("decompose-check passes on defaults") {
    auto o = run_subcommand("decompose-check", default_config());
    CHECK(o.passed());
    CHECK(o.tables.size() >= 5);
}
