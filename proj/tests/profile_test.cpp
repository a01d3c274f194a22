#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "libopt/profile.hpp"
#include "profile_oracle.hpp"
#include "support.hpp"

using namespace libopt;
using libopt::testing::IntTable;
using libopt::testing::TempDir;
using libopt::testing::write_file;

namespace {

const std::set<std::string> kPerf{"nfc", "time"};

std::string solver_name(std::size_t s) { return std::string(1, char('a' + s)); }

// Store holding tau as `nfc`, with info=1 for failures.
ResultsStore store_from(const IntTable& tau) {
  ResultsStore store;
  for (std::size_t p = 0; p < tau.size(); ++p)
    for (std::size_t s = 0; s < tau[p].size(); ++s) {
      auto cell = tau[p][s];
      std::string line = "libopt%" + solver_name(s) + "%c%p" + std::to_string(p) + "%nfc=" +
                         std::to_string(cell ? *cell : 7) + "%info=" + (cell ? "0" : "1");
      store.add(parse_line(line), false);
    }
  return store;
}

ProfileSpec spec_for(std::size_t ns) {
  std::string text = "solver";
  for (std::size_t s = 0; s < ns; ++s) text += " " + solver_name(s);
  return parse_spec(text + "\nperformance nfc\n");
}

RatioMatrix ratios(const IntTable& tau, std::optional<double> override = std::nullopt) {
  auto spec = spec_for(tau.empty() ? 2 : tau[0].size());
  return compute_ratios(select_results(spec, std::nullopt, store_from(tau)), spec.performance_token, override);
}

// A=(2,4,fail), B=(1,8,3).
const IntTable kWorked{{2, 1}, {4, 8}, {std::nullopt, 3}};

}  // namespace

TEST(ParseSpec, SolversCollectionsPerformance) {
  auto s = parse_spec("solver bosch klee durer\ncollection modulopt.easy cute\nperformance nfc\n", std::nullopt, false,
                      std::nullopt, kPerf);
  EXPECT_EQ(s.solvers, (std::vector<std::string>{"bosch", "klee", "durer"}));
  ASSERT_EQ(s.collections.size(), 2u);
  EXPECT_EQ(s.collections[0].subc, "easy");
  EXPECT_EQ(s.collections[1].subc, "all");
  EXPECT_EQ(s.performance_token, "nfc");
  EXPECT_EQ(s.output_base, fs::path("perf"));
  EXPECT_FALSE(s.log_scale);
}

TEST(ParseSpec, CommandLineOverrides) {
  auto s = parse_spec("solver a b\nperformance nfc\noutput mine\n", Name("time"), true, fs::path("cli"), kPerf);
  EXPECT_EQ(s.performance_token, "time");
  EXPECT_TRUE(s.log_scale);
  EXPECT_EQ(s.output_base, fs::path("cli"));

  auto t = parse_spec("solver a b\n", Name("nfc"));
  EXPECT_EQ(t.performance_token, "nfc");
  EXPECT_EQ(parse_spec("solver a b\nperformance nfc\noutput mine\n").output_base, fs::path("mine"));
}

TEST(ParseSpec, Errors) {
  EXPECT_THROW(parse_spec("solver a\nperformance nfc\n"), ParseError);
  EXPECT_THROW(parse_spec("solver a a\nperformance nfc\n"), ParseError);
  EXPECT_THROW(parse_spec("solver a b\n"), ParseError);
  EXPECT_THROW(parse_spec("solver a b\nperformance n\n", std::nullopt, false, std::nullopt, kPerf), ParseError);
  EXPECT_THROW(parse_spec("solver a b\nperformance nfc\nrho_max 1\n"), ParseError);
  EXPECT_THROW(parse_spec("solver a b\nperformance nfc\nplot yes\n"), ParseError);
  EXPECT_THROW(parse_spec("solver a b\nperformance nfc\nproblem n ~ 3\n"), ParseError);
  try {
    parse_spec("solver a b\nperformance nfc\n\nproblem n >= big\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(ParseSpec, ShippedSample) {
  auto s = parse_spec(libopt::testing::read_file(fs::path(LIBOPT_DOCS_DIR) / "perfopt.spc"), std::nullopt, false,
                      std::nullopt, std::set<std::string>{"nfc", "nga", "time"});
  EXPECT_EQ(s.solvers, (std::vector<std::string>{"m1qn3.diag", "m1qn3.scal", "lbfgs"}));
  EXPECT_EQ(s.collections.size(), 2u);
  EXPECT_EQ(s.filters.size(), 1u);
  EXPECT_EQ(*s.rho_bar_override, 50.0);
  EXPECT_EQ(s.output_base, fs::path("m1qn3_vs_lbfgs"));
}

TEST(ParseSpec, FiltersAndRhoMax) {
  auto s = parse_spec("solver a b.v2 # two\nperformance nfc\nproblem n>=1000\nproblem nfc != 3\nrho_max 10\n");
  ASSERT_EQ(s.filters.size(), 2u);
  EXPECT_EQ(s.filters[0].token, "n");
  EXPECT_EQ(s.filters[0].relation, Relation::greater_equal);
  EXPECT_EQ(s.filters[0].threshold, 1000.0);
  EXPECT_TRUE(s.filters[0].accepts(1875));
  EXPECT_FALSE(s.filters[0].accepts(10));
  EXPECT_EQ(s.filters[1].relation, Relation::not_equal);
  EXPECT_EQ(*s.rho_bar_override, 10.0);
  EXPECT_EQ(s.solvers[1], "b.v2");
}

TEST(GatherCandidates, WorkingDirectoryThenRoot) {
  TempDir tmp;
  auto root = tmp / "root";
  write_file(root / "collections/c/all.lst", "p1 p2 p3\n");
  write_file(root / "collections/c/easy.lst", "p1\n");
  write_file(root / "collections/d/all.lst", "q1\n");
  write_file(tmp / "c.easy.lst", "p2 p3\n");

  auto spec = parse_spec("solver a b\nperformance nfc\ncollection c.easy c d\n");
  auto got = gather_candidate_problems(spec, tmp.path(), root);
  ASSERT_TRUE(got);
  std::vector<std::string> names;
  for (const auto& id : *got) names.push_back(id.text());
  EXPECT_EQ(names, (std::vector<std::string>{"c/p2", "c/p3", "c/p1", "d/q1"}));

  EXPECT_FALSE(gather_candidate_problems(parse_spec("solver a b\nperformance nfc\n"), tmp.path(), root));
  EXPECT_THROW(gather_candidate_problems(parse_spec("solver a b\nperformance nfc\ncollection e\n"), tmp.path(), root),
               Error);
}

TEST(SelectResults, MissingSolverExcludesProblem) {
  ResultsStore store;
  for (const char* l : {"libopt%a%c%p1%n=1875%nfc=10%info=0", "libopt%b%c%p1%n=1875%nfc=20%info=0",
                        "libopt%a%c%p2%n=10%nfc=10%info=0", "libopt%b%c%p2%n=10%nfc=5%info=0",
                        "libopt%a%c%p3%n=5000%nfc=10%info=0", "libopt%a%d%p1%n=5000%nfc=10%info=0",
                        "libopt%b%d%p1%n=5000%info=0"})
    store.add(parse_line(l), false);

  auto all = select_results(parse_spec("solver a b\nperformance nfc\n"), std::nullopt, store);
  EXPECT_EQ(all.problems.size(), 2u);
  EXPECT_EQ(all.excluded_missing, 2u);

  auto big = select_results(parse_spec("solver a b\nperformance nfc\nproblem n >= 1000\n"), std::nullopt, store);
  ASSERT_EQ(big.problems.size(), 1u);
  EXPECT_EQ(big.problems[0].text(), "c/p1");
  EXPECT_EQ(big.excluded_filter, 1u);

  std::vector<ProblemId> only{{Name("c"), Name("p2")}};
  auto cand = select_results(parse_spec("solver a b\nperformance nfc\n"), only, store);
  ASSERT_EQ(cand.problems.size(), 1u);
  EXPECT_EQ(cand.problems[0].text(), "c/p2");
}

TEST(SelectResults, DescriptiveMismatchWarns) {
  ResultsStore store;
  store.add(parse_line("libopt%a%c%p%n=10%nfc=1%info=0"), false);
  store.add(parse_line("libopt%b%c%p%n=20%nfc=1%info=0"), false);
  auto r = select_results(parse_spec("solver a b\nperformance nfc\nproblem n > 5\n"), std::nullopt, store);
  EXPECT_EQ(r.problems.size(), 1u);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(ComputeRatios, WorkedExample) {
  auto m = ratios(kWorked);
  EXPECT_EQ(m.rho_bar, 4.0);
  EXPECT_EQ(m.rho[0][0], 2.0);
  EXPECT_EQ(m.rho[1][0], 1.0);
  EXPECT_EQ(m.rho[2][0], 4.0);
  EXPECT_TRUE(m.failed(2, 0));
  EXPECT_EQ(m.rho[0][1], 1.0);
  EXPECT_EQ(m.rho[1][1], 2.0);
  EXPECT_EQ(m.rho[2][1], 1.0);
}

TEST(ComputeRatios, TiesAllFailAndFloor) {
  auto tie = ratios({{5, 5}});
  EXPECT_EQ(tie.rho[0][0], 1.0);
  EXPECT_EQ(tie.rho[0][1], 1.0);
  EXPECT_EQ(tie.rho_bar, 2.0);

  auto none = ratios({{std::nullopt, std::nullopt}, {1, 3}});
  EXPECT_EQ(none.rho_bar, 6.0);
  EXPECT_EQ(none.rho[0][0], 6.0);
  EXPECT_EQ(none.rho[0][1], 6.0);

  auto only_fail = ratios({{std::nullopt, std::nullopt}});
  EXPECT_EQ(only_fail.rho_bar, 2.0);
}

TEST(ComputeRatios, OverrideMustExceedLargestRatio) {
  EXPECT_EQ(ratios(kWorked, 10.0).rho_bar, 10.0);
  EXPECT_EQ(ratios(kWorked, 10.0).rho[2][0], 10.0);
  EXPECT_THROW(ratios(kWorked, 2.0), Error);
  EXPECT_THROW(ratios(kWorked, 1.5), Error);
}

TEST(ComputeRatios, NonPositiveValueIsError) {
  ResultsStore store;
  store.add(parse_line("libopt%a%c%p%nfc=0%info=0"), false);
  store.add(parse_line("libopt%b%c%p%nfc=1%info=0"), false);
  auto spec = parse_spec("solver a b\nperformance nfc\n");
  EXPECT_THROW(compute_ratios(select_results(spec, std::nullopt, store), spec.performance_token), Error);
}

TEST(ComputeProfiles, WorkedExample) {
  auto f = compute_profiles(ratios(kWorked));
  ASSERT_EQ(f.size(), 2u);
  const double third = 1.0 / 3.0;
  EXPECT_DOUBLE_EQ(f[0](1), third);
  EXPECT_DOUBLE_EQ(f[0](2), 2 * third);
  EXPECT_DOUBLE_EQ(f[0](3.9), 2 * third);
  EXPECT_DOUBLE_EQ(f[0](4), 1.0);
  EXPECT_DOUBLE_EQ(f[1](1), 2 * third);
  EXPECT_DOUBLE_EQ(f[1](2), 1.0);
  EXPECT_DOUBLE_EQ(f[1](4), 1.0);
  EXPECT_DOUBLE_EQ(f[0].solve_fraction, 2 * third);
  EXPECT_DOUBLE_EQ(f[1].solve_fraction, 1.0);
  EXPECT_EQ(f[0](0.5), 0.0);
}

TEST(ComputeProfiles, EmptyHasNoProfiles) {
  EXPECT_TRUE(compute_profiles(ratios({})).empty());
}

TEST(EmitGnuplot, Staircase) {
  auto f = compute_profiles(ratios({{1, 1}, {3, 1}}));
  auto text = emit_gnuplot(f, false);
  EXPECT_EQ(text,
            "# performance profiles\n# x = t, y = fraction of problems\n"
            "# solver a\n1 0.5\n3 0.5\n3 1\n6 1\n6 1\n"
            "\n\n# solver b\n1 1\n6 1\n6 1\n");
  auto log = emit_gnuplot(f, true);
  EXPECT_NE(log.find("\n0 0.5\n1.58496 0.5\n1.58496 1\n"), std::string::npos) << log;
  EXPECT_NE(log.find("x = log2(t)"), std::string::npos);
}

TEST(EmitGnuplot, EmptyIsHeaderOnly) {
  EXPECT_EQ(emit_gnuplot({}, false), "# performance profiles\n# x = t, y = fraction of problems\n");
}

TEST(EmitMatlab, TwoSolvers) {
  auto m = emit_matlab(compute_profiles(ratios(kWorked)), false, "perf");
  EXPECT_EQ(m.rfind("function perf\n", 0), 0u);
  EXPECT_NE(m.find("p1 = [\n  1 0.333333\n  2 0.666667\n  4 1\n];\n"), std::string::npos) << m;
  EXPECT_NE(m.find("p2 = [\n  1 0.666667\n  2 1\n  4 1\n];\n"), std::string::npos) << m;
  EXPECT_NE(m.find("stairs(p2(:,1), p2(:,2));"), std::string::npos);
  EXPECT_NE(m.find("legend('a', 'b', 'Location', 'SouthEast');"), std::string::npos);
  EXPECT_NE(m.find("xlabel('t');"), std::string::npos);

  auto log = emit_matlab(compute_profiles(ratios(kWorked)), true, "perf");
  EXPECT_NE(log.find("xlabel('log_2(t)');"), std::string::npos);
  EXPECT_NE(log.find("p1 = [\n  0 0.333333\n  1 0.666667\n  2 1\n];\n"), std::string::npos) << log;
}

TEST(EmitMatlab, EmptyRaisesError) {
  auto m = emit_matlab({}, false, "perf");
  EXPECT_NE(m.find("error('perf: no eligible problems"), std::string::npos);
  EXPECT_EQ(m.find("stairs"), std::string::npos);
}

TEST(EmitMatlab, IdentifiersAndQuotes) {
  EXPECT_EQ(matlab_identifier("perf"), "perf");
  EXPECT_EQ(matlab_identifier("my-plot"), "my_plot");
  EXPECT_EQ(matlab_identifier("2024"), "perf_2024");
  EXPECT_EQ(matlab_quote("it's"), "'it''s'");
}

// Random instances agree with the exact rational oracle.
TEST(ProfileProperties, MatchesRationalOracle) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto tau = libopt::testing::random_instance(rng);
    auto want = libopt::testing::oracle(tau);
    auto m = ratios(tau);
    ASSERT_DOUBLE_EQ(m.rho_bar, want.rho_bar.value()) << trial;
    auto got = compute_profiles(m);
    ASSERT_EQ(got.size(), want.profiles.size());
    for (std::size_t s = 0; s < got.size(); ++s) {
      const auto& w = want.profiles[s];
      ASSERT_EQ(got[s].breakpoints.size(), w.points.size()) << "trial " << trial << " solver " << s;
      for (std::size_t i = 0; i < w.points.size(); ++i) {
        EXPECT_DOUBLE_EQ(got[s].breakpoints[i].t, w.points[i].first.value());
        EXPECT_DOUBLE_EQ(got[s].breakpoints[i].value, w.points[i].second.value());
      }
      EXPECT_DOUBLE_EQ(got[s].solve_fraction, w.solve_fraction.value());
    }
  }
}
