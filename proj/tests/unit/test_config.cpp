#include "doctest.h"

#include <string>

#include "memsde/config.hpp"

using namespace memsde;

namespace {

const char* kFull = R"(# modulated damping with a second past
[drift]
family = modulated_damping
b = 1.5
epsilon = 0.25
lambda = 2

[sim]
T = 20
dt = 0.02
n = 300
seed = 42
stopping_radius = 5
window = 4
past = bump

[checks]
z = 0.5, 1
domain_bound = 2

[girsanov]
x_past = zero
y_past = bump
lambda_prime = 0.5
k_prime = 0.1

[coupling]
past_1 = zero
past_2 = bump
replicates = 4

[past.bump]
terms = -0.1, 0, 0.1, 0.5

[output]
directory = results
formats = json, dat
)";

std::string field_of(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const ConfigError& e) {
    return e.issues().front().field;
  }
  return "";
}

std::size_t line_of(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const ConfigError& e) {
    return e.issues().front().line;
  }
  return 0;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults from an empty file") {
  const auto c = parse_config("");
  CHECK(c == RunConfig{});
  CHECK(c.sim.T == 10.0);
  CHECK(c.drift.family == "ou");
  CHECK_FALSE(c.girsanov.present);
  CHECK(c.emits("csv"));
}

TEST_CASE("full file parses and round-trips") {
  const auto c = parse_config(kFull);
  CHECK(c.drift.family == "modulated_damping");
  CHECK(c.drift.epsilon == 0.25);
  CHECK(c.sim.stopping_radius == 5.0);
  CHECK(c.sim.seed == 42);
  CHECK(c.checks.z == std::vector<double>{0.5, 1.0});
  CHECK(c.girsanov.present);
  CHECK(c.coupling.replicates == 4);
  CHECK(c.pasts.at("bump").terms.size() == 4);
  CHECK_FALSE(c.emits("csv"));
  CHECK(c.emits("json"));

  const auto text = serialize_config(c);
  CHECK(parse_config(text) == c);
  CHECK(serialize_config(parse_config(text)) == text);
}

TEST_CASE("composite drifts from named parts") {
  const auto c = parse_config(R"([drift]
family = composite
components = damp, delay
[drift.damp]
family = ou
b = 2
[drift.delay]
family = linear_distributed_delay
b = 0.5
kappa = 0.2
lambda = 3
)");
  const auto spec = build_drift(c);
  REQUIRE(std::holds_alternative<Composite>(spec.family));
  CHECK(std::get<Composite>(spec.family).parts.size() == 2);
  CHECK(drift_rate(c) == 3.0);
  CHECK(parse_config(serialize_config(c)) == c);
  CHECK(field_of("[drift]\nfamily = composite\ncomponents = nope\n") == "drift.components");
}

TEST_CASE("lambda_prime must stay below the kernel rate") {
  const std::string base = "[drift]\nfamily = modulated_damping\nlambda = 1\n[girsanov]\n";
  CHECK(field_of(base + "lambda_prime = 1\n") == "girsanov.lambda_prime");
  CHECK(line_of(base + "lambda_prime = 1\n") == 5);
  CHECK(field_of(base + "lambda_prime = 1.5\n") == "girsanov.lambda_prime");
  CHECK_NOTHROW(parse_config(base + "lambda_prime = 0.99\n"));
  CHECK(field_of("[girsanov]\nlambda_prime = 0.5\n") == "girsanov.lambda");
}

TEST_CASE("unknown keys, sections and syntax errors") {
  try {
    (void)parse_config("[drift]\ngamma = 1\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    REQUIRE(e.issues().size() == 1);
    CHECK(e.issues()[0].field == "drift.gamma");
    CHECK(e.issues()[0].line == 2);
    CHECK(std::string(e.what()).find("unknown key 'drift.gamma'") != std::string::npos);
  }
  CHECK(field_of("[nonsense]\n") == "nonsense");
  CHECK(line_of("[sim]\nT = 1\nthis line is wrong\n") == 3);
  CHECK(line_of("[sim\n") == 1);
  CHECK(line_of("T = 1\n") == 1);
  CHECK(line_of("[sim]\nT = 1\nT = 2\n") == 3);
  CHECK(line_of("[sim]\n[sim]\n") == 2);
  CHECK(field_of("[sim]\nT = fast\n") == "sim.T");
  CHECK(field_of("[sim]\nn = -3\n") == "sim.n");
  CHECK(field_of("[past.zero]\nterms = 1, 0\n") == "past.zero");
}

TEST_CASE("constraint errors name the field") {
  CHECK(field_of("[sim]\ndt = 0\n") == "sim.dt");
  CHECK(field_of("[sim]\npast = missing\n") == "sim.past");
  CHECK(field_of("[sim]\nmode = sometimes\n") == "sim.mode");
  CHECK(field_of("[drift]\nfamily = spline\n") == "drift.family");
  CHECK(field_of("[drift]\nfamily = modulated_damping\nepsilon = 1\n") == "drift");
  CHECK(field_of("[drift]\nfamily = ou\nb = 0\n") == "drift");
  CHECK(field_of("[past.p]\nterms = 1, 0, 2\n") == "past.p.terms");
  CHECK(field_of("[output]\nformats = csv, xml\n") == "output.formats");
  CHECK(field_of("[coupling]\nreplicates = 1\n") == "coupling.replicates");
  CHECK(field_of("[checks]\nallowed_fraction = 2\n") == "checks.allowed_fraction");
}

TEST_CASE("every problem is reported") {
  try {
    (void)parse_config("[sim]\nT = -1\ndt = -1\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.issues().size() == 2);
  }
}

TEST_CASE("pasts are built from their terms") {
  const auto c = parse_config(kFull);
  const auto p = build_past(c, "bump");
  CHECK(p.grid_step() == 0.02);
  CHECK(p.window_size() == 201);
  CHECK(p.current()[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.sample(0)[0] == doctest::Approx(-0.1 + 0.1 * std::exp(0.5 * 4.0)).epsilon(1e-12));
  const auto z = build_past(c, "zero");
  CHECK(z.current()[0] == 0.0);
  CHECK_THROWS(build_past(c, "other"));
}

TEST_CASE("validate_config re-checks an edited config") {
  auto c = parse_config(kFull);
  CHECK_NOTHROW(validate_config(c));
  c.sim.dt = -0.1;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
}

}
