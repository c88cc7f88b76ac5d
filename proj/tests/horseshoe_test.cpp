#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "coinbilliard/horseshoe.hpp"

using namespace coinbilliard;
using namespace coinbilliard::horseshoe;

namespace {
const CoinParams kP4 = CoinParams::make(1e4);

const StripFamily& family_at_1e4() {
    static StripFamily fam = [] {
        DomainPair dom = build_domains(kP4);
        StripFamily f = extract_horizontal_strips(dom, kP4, 128);
        extract_vertical_strips(dom, f, kP4, 128);
        return f;
    }();
    return fam;
}
}  // namespace

TEST(SolveK, BracketAndResidual) {
    for (double E : {1e3, 1e4, 1e5, 1e6, 1e7}) {
        CoinParams p = CoinParams::make(E);
        double k = solve_k(E, p);
        EXPECT_GT(k, kPi / 8);
        EXPECT_LT(k, kPi / 2);
        EXPECT_LT(std::abs(corner_landing_residual(E, k, p)), 1e-10);
    }
}

TEST(SolveK, ApproachesQuarterPi) {
    CoinParams p = CoinParams::make(1e6);
    EXPECT_NEAR(solve_k(1e6, p), kPi / 4, 2e-6);
    // gravity scales the root linearly at leading order
    CoinParams p2 = CoinParams::make(1e6, 2.0);
    double k2 = solve_k(1e6, p2);
    EXPECT_GT(k2, kPi / 4);
    EXPECT_LT(k2, kPi);
    EXPECT_NEAR(k2, kPi / 2, 1e-4);
}

TEST(SolveK, ResidualMatchesAsymptoticForm) {
    // A(E, k) -> pi - 4k/g as E grows, with an O(1/E) defect
    CoinParams p = CoinParams::make(1e8);
    for (double k : {0.5, 0.785, 1.2})
        EXPECT_LT(std::abs(corner_landing_residual(1e8, k, p) + 4.0 * k - kPi),
                  1e-6);
}

TEST(SolveK, ResidualDecreasesInK) {
    CoinParams p = CoinParams::make(1e4);
    double k = solve_k(1e4, p);
    double h = 1e-6;
    double slope = (corner_landing_residual(1e4, k + h, p) -
                    corner_landing_residual(1e4, k - h, p)) /
                   (2.0 * h);
    EXPECT_LT(slope, 0.0);
    EXPECT_NEAR(slope, -4.0 / p.g, 0.1);
}

TEST(SolveK, NoBracketBelowValidity) {
    CoinParams p = CoinParams::make(0.5);
    EXPECT_THROW(solve_k(0.5, p), NoBracket);
}

TEST(BuildDomains, RectangleDimensions) {
    DomainPair dom = build_domains(kP4);
    EXPECT_NEAR(dom.left.half_width, 7.855e-5, 2e-8);
    EXPECT_NEAR(dom.left.half_height, 1.1109e-2, 2e-6);
    EXPECT_DOUBLE_EQ(dom.left.center, kPi / 2);
    EXPECT_DOUBLE_EQ(dom.right.center, 3 * kPi / 2);
    // right rectangle is the left one shifted by pi
    EXPECT_DOUBLE_EQ(dom.right.half_width, dom.left.half_width);
    EXPECT_DOUBLE_EQ(dom.right.half_height, dom.left.half_height);
    EXPECT_DOUBLE_EQ(dom.right.center - dom.left.center, kPi);
}

TEST(BuildDomains, CornerEqualsReferencePointA) {
    DomainPair dom = build_domains(kP4);
    ReferencePoints ref = reference_points(dom, kP4);
    EXPECT_DOUBLE_EQ(ref.a.theta, dom.left.lo());
    EXPECT_DOUBLE_EQ(ref.a.theta_dot, dom.left.half_height);
    EXPECT_DOUBLE_EQ(ref.c.theta, dom.left.center);
    EXPECT_GT(ref.b.theta, ref.a.theta);
    EXPECT_LT(ref.b.theta, ref.c.theta);
}

TEST(ForwardImage, TopEdgeSpansMoreThanFullTurn) {
    DomainPair dom = build_domains(kP4);
    Polyline edge{PhasePoint{dom.left.lo(), dom.left.half_height},
                  PhasePoint{dom.left.hi(), dom.left.half_height}};
    ImagePolyline img = forward_image_polyline(edge, kP4, 1e-2);
    double span = img.points.back().theta - img.points.front().theta;
    EXPECT_GT(span, kTwoPi);
}

TEST(ForwardImage, TopEdgeImageIsMonotone) {
    DomainPair dom = build_domains(kP4);
    const Rect& r = dom.left;
    Polyline edge;
    for (int i = 0; i < 1000; ++i)
        edge.push_back(PhasePoint{
            r.lo() + (r.hi() - r.lo()) * i / 999.0, r.half_height});
    ImagePolyline img = forward_image_polyline(edge, kP4, 1e-2);
    EXPECT_TRUE(img.punctures.empty());
    bool crosses_zero = false;
    for (std::size_t i = 1; i < img.points.size(); ++i) {
        EXPECT_GT(img.points[i].theta, img.points[i - 1].theta);
        EXPECT_GT(img.points[i].theta_dot, img.points[i - 1].theta_dot);
        if (img.points[i - 1].theta_dot <= 0.0 && img.points[i].theta_dot >= 0.0)
            crosses_zero = true;
    }
    // the vertical-launch point maps onto the transversal
    EXPECT_TRUE(crosses_zero);
}

TEST(ForwardImage, RefinementBoundsImageGaps) {
    DomainPair dom = build_domains(kP4);
    Polyline edge{PhasePoint{dom.left.lo(), dom.left.half_height},
                  PhasePoint{dom.left.hi(), dom.left.half_height}};
    ImagePolyline img = forward_image_polyline(edge, kP4, 1e-3);
    for (std::size_t i = 1; i < img.points.size(); ++i)
        EXPECT_LT(std::abs(img.points[i].theta - img.points[i - 1].theta), 1e-3);
}

TEST(Extraction, SixStripsWithConventionLabels) {
    const StripFamily& fam = family_at_1e4();
    ASSERT_EQ(fam.horizontal.size(), 6u);
    int in_left = 0;
    for (const Strip& s : fam.horizontal) in_left += s.host == Label::L;
    EXPECT_EQ(in_left, 3);

    // hosts, origins, and top-to-bottom ordering fix the labels
    for (Label host : {Label::L, Label::R}) {
        const Strip& top = fam.strip(Orientation::horizontal, make_symbol(host, 1));
        const Strip& mid = fam.strip(Orientation::horizontal, make_symbol(host, 2));
        const Strip& bot = fam.strip(Orientation::horizontal, make_symbol(host, 3));
        EXPECT_EQ(mid.origin, host);
        EXPECT_EQ(top.origin, other(host));
        EXPECT_EQ(bot.origin, other(host));
        double t = top.lower.front().theta_dot;
        double m = mid.lower.front().theta_dot;
        double b = bot.lower.front().theta_dot;
        EXPECT_GT(t, m);
        EXPECT_GT(m, b);
    }
}

TEST(Extraction, StripsAreThinDisjointAndInside) {
    const StripFamily& fam = family_at_1e4();
    const DomainPair& dom = fam.dom;
    for (const Strip& s : fam.horizontal) {
        const Rect& r = dom.rect(s.host);
        ASSERT_EQ(s.lower.size(), s.upper.size());
        for (std::size_t i = 0; i < s.lower.size(); ++i) {
            EXPECT_GT(s.upper[i].theta_dot, s.lower[i].theta_dot);
            EXPECT_LE(std::abs(s.upper[i].theta_dot), r.half_height + 1e-9);
            EXPECT_LE(std::abs(s.lower[i].theta_dot), r.half_height + 1e-9);
        }
        EXPECT_GT(s.width, 0.0);
        EXPECT_LT(s.width, 2.0 * r.half_height / 100.0);
    }
    // pairwise vertical separation within each host at every sampled angle
    for (Label host : {Label::L, Label::R}) {
        const Strip& top = fam.strip(Orientation::horizontal, make_symbol(host, 1));
        const Strip& mid = fam.strip(Orientation::horizontal, make_symbol(host, 2));
        const Strip& bot = fam.strip(Orientation::horizontal, make_symbol(host, 3));
        for (std::size_t i = 0; i < top.lower.size(); ++i) {
            EXPECT_GT(top.lower[i].theta_dot, mid.upper[i].theta_dot);
            EXPECT_GT(mid.lower[i].theta_dot, bot.upper[i].theta_dot);
        }
    }
}

TEST(Extraction, SpansFullHostWidth) {
    const StripFamily& fam = family_at_1e4();
    for (const Strip& s : fam.horizontal) {
        const Rect& r = fam.dom.rect(s.host);
        EXPECT_NEAR(s.lower.front().theta, r.lo(), 1e-7);
        EXPECT_NEAR(s.lower.back().theta, r.hi(), 1e-7);
        EXPECT_GE(static_cast<int>(s.lower.size()), 257);
    }
}

TEST(Extraction, MuScalesLikeInverseSqrtEnergy) {
    const StripFamily& f4 = family_at_1e4();
    CoinParams p5 = CoinParams::make(1e5);
    DomainPair dom5 = build_domains(p5);
    StripFamily f5 = extract_horizontal_strips(dom5, p5, 128);
    double slope = std::log(f5.mu_h / f4.mu_h) / std::log(10.0);
    EXPECT_NEAR(slope, -0.5, 0.1);
}

TEST(Extraction, CountMismatchAwayFromExactScale) {
    CoinParams p = kP4;
    double k = solve_k(p.E, p);
    DomainPair wrong = build_domains_at(0.9 * k, p);
    try {
        extract_horizontal_strips(wrong, p, 128);
        FAIL() << "expected StripCountMismatch";
    } catch (const StripCountMismatch& e) {
        EXPECT_EQ(e.count, 2);
    }
}

TEST(Extraction, RejectsCoarseGrid) {
    DomainPair dom = build_domains(kP4);
    EXPECT_THROW(extract_horizontal_strips(dom, kP4, 32), std::invalid_argument);
}

TEST(Extraction, Deterministic) {
    DomainPair dom = build_domains(kP4);
    StripFamily a = extract_horizontal_strips(dom, kP4, 128);
    StripFamily b = extract_horizontal_strips(dom, kP4, 128);
    for (std::size_t s = 0; s < 6; ++s) {
        ASSERT_EQ(a.horizontal[s].lower.size(), b.horizontal[s].lower.size());
        for (std::size_t i = 0; i < a.horizontal[s].lower.size(); ++i) {
            EXPECT_EQ(a.horizontal[s].lower[i].theta,
                      b.horizontal[s].lower[i].theta);
            EXPECT_EQ(a.horizontal[s].lower[i].theta_dot,
                      b.horizontal[s].lower[i].theta_dot);
        }
    }
}

TEST(VerticalStrips, SpanFullHeightInTheOriginRectangle) {
    const StripFamily& fam = family_at_1e4();
    ASSERT_EQ(fam.vertical.size(), 6u);
    for (const Strip& v : fam.vertical) {
        const Strip& h = fam.strip(Orientation::horizontal, v.label);
        EXPECT_EQ(v.host, h.origin);
        const Rect& r = fam.dom.rect(v.host);
        EXPECT_NEAR(v.lower.front().theta_dot, -r.half_height, 1e-12);
        EXPECT_NEAR(v.lower.back().theta_dot, r.half_height, 1e-12);
        EXPECT_GT(v.width, 0.0);
        for (std::size_t i = 0; i < v.lower.size(); ++i) {
            EXPECT_GT(v.upper[i].theta, v.lower[i].theta);
            EXPECT_GE(v.lower[i].theta, r.lo() - 1e-9);
            EXPECT_LE(v.upper[i].theta, r.hi() + 1e-9);
        }
    }
}

TEST(VerticalStrips, InteriorPointsMapIntoTheirHorizontalStrip) {
    const StripFamily& fam = family_at_1e4();
    std::mt19937 rng(57);
    std::uniform_real_distribution<double> u01(0.15, 0.85);
    for (const Strip& v : fam.vertical) {
        const Strip& h = fam.strip(Orientation::horizontal, v.label);
        const Rect& host = fam.dom.rect(h.host);
        int hits = 0;
        for (int trial = 0; trial < 100; ++trial) {
            std::size_t row = 1 + rng() % (v.lower.size() - 2);
            double th = v.lower[row].theta +
                        u01(rng) * (v.upper[row].theta - v.lower[row].theta);
            PhasePoint q{th, v.lower[row].theta_dot};
            PhasePoint img = dynamics::return_map(q, kP4).point;
            double x = detail::wrap_near(img.theta, host.center);
            ASSERT_LE(std::abs(x - host.center), host.half_width * 1.0001);
            double lo = detail::interp_ordinate(h.lower, x);
            double hi = detail::interp_ordinate(h.upper, x);
            hits += (img.theta_dot >= lo - 1e-12 && img.theta_dot <= hi + 1e-12);
        }
        EXPECT_EQ(hits, 100) << symbol_name(v.label);
    }
}

TEST(ConleyMoser, AllThreeConditionsHold) {
    const StripFamily& fam = family_at_1e4();
    CMReport rep = check_conley_moser(fam, kP4);
    EXPECT_TRUE(rep.cm1_pass);
    EXPECT_LT(rep.cm1_value, 1e-2);
    EXPECT_GT(rep.cm1_value, 0.0);
    EXPECT_TRUE(rep.cm2_pass);
    EXPECT_TRUE(rep.cm3_pass);
    EXPECT_TRUE(rep.pass);
    int allowed = 0, forbidden = 0;
    for (const auto& e : rep.cm3) {
        if (e.allowed) {
            EXPECT_TRUE(e.nonempty) << symbol_name(e.s) << "->" << symbol_name(e.j);
            EXPECT_LT(e.width_ratio, 1.0);
            EXPECT_GT(e.width_ratio, 0.0);
            ++allowed;
        } else {
            EXPECT_FALSE(e.nonempty) << symbol_name(e.s) << "->" << symbol_name(e.j);
            EXPECT_GT(e.gap, 0.0);
            ++forbidden;
        }
    }
    EXPECT_EQ(allowed, 18);
    EXPECT_EQ(forbidden, 18);
}

TEST(ConleyMoser, SelfPairOfL1IsEmpty) {
    const StripFamily& fam = family_at_1e4();
    CMReport rep = check_conley_moser(fam, kP4);
    for (const auto& e : rep.cm3)
        if (e.s == FineSymbol::L1 && e.j == FineSymbol::L1) {
            EXPECT_FALSE(e.allowed);
            EXPECT_FALSE(e.nonempty);
        }
}

TEST(TransitionGraph, MatchesTheTwoRulesExactly) {
    const StripFamily& fam = family_at_1e4();
    TransitionGraph g = transition_graph(fam, kP4);
    EXPECT_TRUE(g == TransitionGraph::expected());
    auto successors = [&](FineSymbol s) {
        std::vector<FineSymbol> out;
        for (int j = 0; j < kNumSymbols; ++j)
            if (g.at(s, static_cast<FineSymbol>(j)))
                out.push_back(static_cast<FineSymbol>(j));
        return out;
    };
    using F = FineSymbol;
    EXPECT_EQ(successors(F::L2), (std::vector<F>{F::L2, F::R1, F::R3}));
    EXPECT_EQ(successors(F::R2), (std::vector<F>{F::L1, F::L3, F::R2}));
    EXPECT_TRUE(g.at(F::R2, F::R2));
    for (int i = 0; i < kNumSymbols; ++i) {
        int out_deg = 0, in_deg = 0;
        for (int j = 0; j < kNumSymbols; ++j) {
            out_deg += g.adj[i][j];
            in_deg += g.adj[j][i];
        }
        EXPECT_EQ(out_deg, 3);
        EXPECT_EQ(in_deg, 3);
    }
}

TEST(Bifurcation, CensusAcrossTheScale) {
    CoinParams p = kP4;
    auto censuses = scan_bifurcation(p, {0.9, 1.0, 1.05});
    // far below the exact scale the image bands stop short of the end
    // rectangles entirely: the middle crossings survive, nothing else
    EXPECT_EQ(censuses[0].full_count, 2);
    EXPECT_EQ(censuses[0].corner_count, 0);
    // at the exact scale and slightly above: six full crossings
    EXPECT_EQ(censuses[1].full_count, 6);
    EXPECT_EQ(censuses[1].corner_count, 0);
    EXPECT_EQ(censuses[2].full_count, 6);
    EXPECT_EQ(censuses[2].corner_count, 0);
}

TEST(Bifurcation, CornerRegimeJustBelowTheExactScale) {
    // the two-strips-and-four-corners picture lives in a narrow band of
    // scales right below k, where the band ends pull inside the rectangles
    CoinParams p = kP4;
    auto census = scan_bifurcation(p, {1.0 - 1.1e-4});
    EXPECT_EQ(census[0].full_count, 2);
    EXPECT_EQ(census[0].corner_count, 4);
}
