#include "decongest/oracle_enum.hpp"
#include "decongest/synthetic.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace decongest;

TEST(Enumeration, CountsAndOrder)
{
    std::vector<std::string> seen;
    for_each_mask(5, 2, [&](const Mask& m) { seen.push_back(m.to_string()); });
    EXPECT_EQ(seen.size(), 10u);
    EXPECT_EQ(seen.front(), "11000");
    EXPECT_EQ(seen.back(), "00011");
    EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), 10u);
    EXPECT_DOUBLE_EQ(binomial(14, 6), 3003.0);
    EXPECT_DOUBLE_EQ(binomial(5, 0), 1.0);
}

TEST(Sweep, ArgmaxMatchesDirectSearch)
{
    const Market mk = make_mixture_market(MixtureSpec{6, 6, 8, 0.4, 1.0, 2});
    const auto objectives = all_objectives(default_lambda(3, 8), true);
    const MaskSweepResult res = sweep(mk, 3, objectives, {});
    ASSERT_EQ(res.records.size(), 56u);
    for (std::size_t o = 0; o < objectives.size(); ++o) {
        double best = -1e300;
        for_each_mask(8, 3, [&](const Mask& m) { best = std::max(best, evaluate_mask(mk, m, objectives[o], nullptr, Imputation::zero)); });
        for (std::size_t idx : res.argmax[o]) EXPECT_NEAR(res.records[idx].objective[o], best, 1e-12);
        const auto aw = res.argmax_welfare(o);
        EXPECT_LE(aw.min, aw.mean + 1e-15);
        EXPECT_LE(aw.mean, aw.max + 1e-15);
    }
    // The welfare oracle dominates every other objective's argmax welfare.
    for (std::size_t o = 1; o < objectives.size(); ++o) EXPECT_GE(res.argmax_welfare(0).mean, res.argmax_welfare(o).max - 1e-12);
}

TEST(Sweep, CapSuggestsLearner)
{
    const Market mk = make_mixture_market(MixtureSpec{4, 4, 14, 0.0, 1.0, 1});
    SweepOptions opt;
    opt.cap = 100;
    try {
        sweep(mk, 6, all_objectives(0.5, false), opt);
        FAIL() << "expected cap error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("learn"), std::string::npos);
    }
}

TEST(Sweep, CsvHasOneLinePerMask)
{
    const Market mk = make_mixture_market(MixtureSpec{4, 4, 5, 0.0, 1.0, 1});
    const MaskSweepResult res = sweep(mk, 2, all_objectives(0.5, false), {});
    std::ostringstream os;
    write_sweep_csv(os, res);
    const std::string s = os.str();
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 11);
}

TEST(Objectives, NamesRoundTrip)
{
    for (const Objective& o : all_objectives(0.5, true)) EXPECT_EQ(objective_kind(o.name()), o.kind);
    EXPECT_THROW(objective_kind("nope"), Error);
}
