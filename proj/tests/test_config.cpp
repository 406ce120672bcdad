#include "mdre/config.hpp"

#include "doctest.h"

using namespace mdre;

TEST_CASE("config parses the supported toml subset") {
    const std::string text = R"(
# run config
objective = "power"
alpha = 1.5
epochs = 200
fix_mean5 = false
dims = [2, 5, 10]
data = ["a.csv", "b.csv"]

[opt]
lr = 1e-3
)";
    const Config cfg = Config::parse_string(text);
    CHECK(cfg.get_string("objective") == std::string("power"));
    CHECK(cfg.get_number("alpha") == 1.5);
    CHECK(cfg.get_int("epochs") == 200);
    CHECK(cfg.get_bool("fix_mean5") == false);
    CHECK(cfg.get_number_array("dims") == std::vector<double>{2.0, 5.0, 10.0});
    CHECK(cfg.get_string_array("data") == std::vector<std::string>{"a.csv", "b.csv"});
    CHECK(cfg.get_number("opt.lr") == doctest::Approx(1e-3));
    CHECK_FALSE(cfg.has("missing"));
    CHECK(cfg.get_string("missing") == std::nullopt);
}

TEST_CASE("config rejects malformed input") {
    CHECK_THROWS_AS(Config::parse_string("novalue\n"), ValidationError);
    CHECK_THROWS_AS(Config::parse_string("a = [1, 2\n"), ValidationError);
    CHECK_THROWS_AS(Config::parse_string("a = 1\na = 2\n"), ValidationError);
    CHECK_THROWS_AS(Config::parse_string("a = what\n"), ValidationError);
    CHECK_THROWS_AS(Config::parse_file("no_such_config.toml"), ValidationError);
}

TEST_CASE("config type mismatches throw") {
    const Config cfg = Config::parse_string("a = 1.5\nb = \"x\"\n");
    CHECK_THROWS_AS(cfg.get_string("a"), ValidationError);
    CHECK_THROWS_AS(cfg.get_number("b"), ValidationError);
    CHECK_THROWS_AS(cfg.get_int("a"), ValidationError);
}
