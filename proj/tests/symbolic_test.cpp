#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "coinbilliard/symbolic.hpp"

using namespace coinbilliard;
using namespace coinbilliard::symbolic;
namespace hs = coinbilliard::horseshoe;
using F = FineSymbol;

namespace {
const CoinParams kP4 = CoinParams::make(1e4);

const hs::StripFamily& family() {
    static hs::StripFamily fam = [] {
        hs::DomainPair dom = hs::build_domains(kP4);
        hs::StripFamily f = hs::extract_horizontal_strips(dom, kP4, 128);
        hs::extract_vertical_strips(dom, f, kP4, 128);
        return f;
    }();
    return fam;
}
}  // namespace

TEST(Words, ParseAndFormat) {
    EXPECT_EQ(format_coarse(parse_coarse("LRLLR")), "LRLLR");
    EXPECT_EQ(format_fine(parse_fine("L1R3L2")), "L1R3L2");
    EXPECT_THROW(parse_coarse("LRX"), std::invalid_argument);
    EXPECT_THROW(parse_coarse(""), std::invalid_argument);
    EXPECT_THROW(parse_fine("L4"), std::invalid_argument);
    EXPECT_THROW(parse_fine("L"), std::invalid_argument);
}

TEST(ValidateWord, Examples) {
    EXPECT_TRUE(validate_word({F::L2, F::L2, F::L2}).ok);
    WordCheck bad = validate_word({F::L1, F::R2});
    EXPECT_FALSE(bad.ok);
    EXPECT_EQ(bad.violation_index, 0u);
    EXPECT_TRUE(validate_word({F::R3, F::L1, F::R1, F::L3}).ok);
}

TEST(LiftCoarse, DeterministicChoices) {
    EXPECT_EQ(lift_coarse(parse_coarse("LLL"), F::L2),
              (FineWord{F::L2, F::L2, F::L2}));
    EXPECT_EQ(lift_coarse(parse_coarse("LR"), F::L2), (FineWord{F::L2, F::R1}));
    EXPECT_EQ(lift_coarse(parse_coarse("RL"), F::R2), (FineWord{F::R2, F::L1}));
    EXPECT_THROW(lift_coarse(parse_coarse("LR"), F::R2), std::invalid_argument);
}

TEST(LiftCoarse, SubscriptThreeFallbackIsAlsoValid) {
    // on a letter change both subscript 1 and subscript 3 are legal
    FineWord w{F::L2, make_symbol(Label::R, 3)};
    EXPECT_TRUE(validate_word(w).ok);
}

TEST(LiftCoarse, ExhaustivelyValidAndComplete) {
    // every coarse word has a valid lift whose letters project back
    for (int len = 1; len <= 10; ++len) {
        for (unsigned bits = 0; bits < (1u << len); ++bits) {
            CoarseWord w;
            for (int i = 0; i < len; ++i)
                w.push_back(bits >> i & 1 ? Label::R : Label::L);
            FineWord lifted = lift_coarse(w, make_symbol(w.front(), 2));
            ASSERT_EQ(lifted.size(), w.size());
            EXPECT_TRUE(validate_word(lifted).ok);
            for (std::size_t i = 0; i < w.size(); ++i)
                EXPECT_EQ(letter_of(lifted[i]), w[i]);
        }
    }
}

TEST(Subshift, ThreeToTheNMinusOneWords) {
    // every symbol has exactly three successors, so the count of valid words
    // of length n from a fixed start is 3^(n-1); enumerate to check
    std::function<long(F, int)> count = [&](F s, int remaining) -> long {
        if (remaining == 0) return 1;
        long total = 0;
        for (int j = 0; j < kNumSymbols; ++j)
            if (allowed_transition(s, static_cast<F>(j)))
                total += count(static_cast<F>(j), remaining - 1);
        return total;
    };
    for (int n = 1; n <= 8; ++n) {
        long expect = 1;
        for (int i = 1; i < n; ++i) expect *= 3;
        for (int s = 0; s < kNumSymbols; ++s)
            EXPECT_EQ(count(static_cast<F>(s), n - 1), expect);
    }
}

TEST(Itinerary, PeakFixedPointStartsAsL2) {
    // the vertical bounce at the peak is the period-one orbit; its first
    // strips are L2 before double rounding lets the orbit creep away
    auto it = itinerary_of(PhasePoint{kPi / 2, 0.0}, 3, family(), kP4);
    ASSERT_GE(it.coarse.size(), 3u);
    EXPECT_EQ(it.coarse[0], Label::L);
    EXPECT_EQ(it.coarse[1], Label::L);
    EXPECT_EQ(it.coarse[2], Label::L);
    ASSERT_GE(it.fine.size(), 1u);
    EXPECT_EQ(it.fine[0], F::L2);
}

TEST(Itinerary, EscapeIsRecorded) {
    const hs::StripFamily& fam = family();
    PhasePoint q{fam.dom.left.center + 0.3 * fam.dom.left.half_width, 0.0};
    double dist = 0.0;
    ASSERT_FALSE(detail::classify_vertical(fam, q, kP4, &dist));
    auto it = itinerary_of(q, 4, fam, kP4);
    ASSERT_TRUE(it.escaped_at.has_value());
    EXPECT_EQ(*it.escaped_at, 1);
    EXPECT_TRUE(it.fine.empty());
}

TEST(Itinerary, PointOutsideBothRectangles) {
    auto it = itinerary_of(PhasePoint{1.0, 0.5}, 2, family(), kP4);
    ASSERT_TRUE(it.escaped_at.has_value());
    EXPECT_EQ(*it.escaped_at, 0);
}

TEST(Realize, AllLeftWord) {
    CoarseWord w(10, Label::L);
    RealizationResult r = realize_sequence(w, family(), kP4);
    EXPECT_EQ(r.itinerary.coarse, w);
    EXPECT_EQ(r.depth, 10);
    const hs::Rect& rect = family().dom.left;
    EXPECT_GE(r.initial.theta, rect.lo());
    EXPECT_LE(r.initial.theta, rect.hi());
    EXPECT_DOUBLE_EQ(r.initial.theta_dot, 0.0);
    EXPECT_EQ(r.lift, FineWord(10, F::L2));
}

TEST(Realize, AlternatingWord) {
    CoarseWord w = parse_coarse("LRLRLRLRLR");
    RealizationResult r = realize_sequence(w, family(), kP4);
    EXPECT_EQ(r.itinerary.coarse, w);
    EXPECT_GT(r.interval_width, 0.0);
}

TEST(Realize, StartsInTheRequestedRectangle) {
    CoarseWord w = parse_coarse("RLLRR");
    RealizationResult r = realize_sequence(w, family(), kP4);
    EXPECT_EQ(r.itinerary.coarse, w);
    const hs::Rect& rect = family().dom.right;
    EXPECT_GE(r.initial.theta, rect.lo());
    EXPECT_LE(r.initial.theta, rect.hi());
}

TEST(Realize, SeededRandomWordsRoundTrip) {
    std::mt19937 rng(777);
    for (int trial = 0; trial < 5; ++trial) {
        CoarseWord w;
        for (int i = 0; i < 12; ++i)
            w.push_back(rng() & 1 ? Label::R : Label::L);
        RealizationResult r = realize_sequence(w, family(), kP4, 6000);
        EXPECT_EQ(r.itinerary.coarse, w) << format_coarse(w);
    }
}

TEST(Realize, BudgetExhaustionThrows) {
    CoarseWord w;
    for (int i = 0; i < 30; ++i) w.push_back(i % 2 ? Label::R : Label::L);
    try {
        realize_sequence(w, family(), kP4, 150);
        FAIL() << "expected a search failure";
    } catch (const NotFound& e) {
        EXPECT_GE(e.realized_prefix, 1);
        EXPECT_LT(e.realized_prefix, 30);
    } catch (const ResolutionExceeded& e) {
        EXPECT_GE(e.realized_prefix, 1);
    }
}

TEST(Realize, RejectsEmptyWord) {
    EXPECT_THROW(realize_sequence({}, family(), kP4), std::invalid_argument);
}
