#include <gtest/gtest.h>

#include "cemflow/config.hpp"
#include "cemflow/error.hpp"

using namespace cemflow;

namespace {

bool mentions(const ConfigError& e, const std::string& text) {
  for (const auto& i : e.issues())
    if (i.find(text) != std::string::npos) return true;
  return false;
}

template <class Fn>
ConfigError expect_config_error(Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "no ConfigError thrown";
  return ConfigError({});
}

}  // namespace

TEST(Config, MinimalSteadyDefaults) {
  const auto c = parse_config_text("[grid]\nnx = 40\ncoarse = 4\n");
  EXPECT_EQ(c.problem.lm, 3);
  EXPECT_EQ(c.problem.C, 24.0);
  EXPECT_EQ(c.problem.nx, 40);
  EXPECT_EQ(c.problem.ny, 40);
  EXPECT_EQ(c.coarse, std::vector<int>{4});
  EXPECT_EQ(c.layers, std::vector<int>{3});
  EXPECT_FALSE(c.time.enabled);
  EXPECT_TRUE(c.problem.segments.size() == 4);
  EXPECT_EQ(c.problem.kappa_scale, KappaScale::cell);
  EXPECT_EQ(c.resolved.at("cem.lm"), "3");
}

TEST(Config, Divisibility) {
  const auto e = expect_config_error([] { parse_config_text("[grid]\nnx = 15\ncoarse = 10\n"); });
  EXPECT_TRUE(mentions(e, "divisible"));
}

TEST(Config, DuplicateKey) {
  expect_config_error([] { parse_config_text("[grid]\nnx = 20\nnx = 40\n"); });
}

TEST(Config, UnknownKeyAndBadValues) {
  const auto e = expect_config_error([] {
    parse_config_text("[grid]\nnx = 40\ncoarse = 4\nsize = 3\n[cem]\nlm = -1\n[source]\nf = nope\n");
  });
  EXPECT_TRUE(mentions(e, "grid.size"));
  EXPECT_TRUE(mentions(e, "source.f"));
  EXPECT_GE(e.issues().size(), 2u);
}

TEST(Config, BoundaryLayouts) {
  const auto c = parse_config_text(
      "[grid]\nnx = 40\ncoarse = 4\n[boundary]\nleft = robin:-1\nright = neumann:1\n"
      "bottom = robin:0@0:0.5, robin:1@0.5:1\ntop = dirichlet\n");
  ASSERT_EQ(c.problem.segments.size(), 5u);
  EXPECT_EQ(c.problem.segments[0].q, -1.0);
  EXPECT_EQ(c.problem.segments[0].kind, BoundaryKind::neumann_robin);
  EXPECT_EQ(c.problem.segments[3].from, 0.5);
  expect_config_error([] { parse_config_text("[grid]\nnx = 40\ncoarse = 4\n[boundary]\nbottom = robin:0@0:0.5\n"); });
  expect_config_error([] { parse_config_text("[grid]\nnx = 40\ncoarse = 4\n[boundary]\nleft = wall\n"); });
}

TEST(Config, TimeBlock) {
  const auto c = parse_config_text("[grid]\nnx = 40\ncoarse = 4\n[time]\nT = 1\ntau = 0.1, 0.05\nscheme = both\n");
  EXPECT_TRUE(c.time.enabled);
  EXPECT_EQ(c.time.tau.size(), 2u);
  EXPECT_EQ(c.time.schemes.size(), 2u);
  expect_config_error([] { parse_config_text("[grid]\nnx = 40\ncoarse = 4\n[time]\nT = 1\ntau = 0.3\n"); });
}

TEST(Config, Pairing) {
  auto c = parse_config_text("[grid]\nnx = 40\ncoarse = 4, 8\n[cem]\nlayers = 1, 2\npairing = product\n");
  EXPECT_EQ(c.cells().size(), 4u);
  c = parse_config_text("[grid]\nnx = 40\ncoarse = 4, 8\n[cem]\nlayers = 1, 2\n");
  ASSERT_EQ(c.cells().size(), 2u);
  EXPECT_EQ(c.cells()[1], std::make_pair(8, 2));
  expect_config_error([] { parse_config_text("[grid]\nnx = 40\ncoarse = 4, 8\n[cem]\nlayers = 1, 2, 3\n"); });
}

TEST(Config, DumpRoundTrip) {
  const auto c = parse_config_text(
      "[run]\nseed = 9\n[grid]\nnx = 40\ncoarse = 4, 8\n[cem]\nlayers = 2, 3\nkappa_scale = element\n"
      "[velocity]\nmode = inflow\nc_flow = 0.25\n[boundary]\nleft = robin:-1\n[time]\nT = 0.5\ntau = 0.1\n");
  const auto d = parse_config_text(dump_config(c));
  EXPECT_EQ(d.resolved, c.resolved);
  EXPECT_EQ(d.problem.medium_seed, 9u);
  EXPECT_EQ(dump_config(d), dump_config(c));
}

TEST(Config, SyntaxErrorHasLine) {
  const auto e = expect_config_error([] { parse_config_text("[grid\nnx = 4\n"); });
  EXPECT_TRUE(mentions(e, "line 1"));
}

TEST(Config, MissingFile) { EXPECT_THROW(parse_config("/nonexistent/cfg.ini"), IoError); }
