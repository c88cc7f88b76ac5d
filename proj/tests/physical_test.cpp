#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "coinbilliard/physical.hpp"

using namespace coinbilliard;
using namespace coinbilliard::physical;

namespace {

double kinetic(const PhysicalState& s, const CoinParams& p) {
    return 0.5 * p.I * s.theta_dot * s.theta_dot + 0.5 * p.m * s.Y_dot * s.Y_dot;
}

PhysicalState random_contact(Label side, std::mt19937& rng, const CoinParams& p) {
    std::uniform_real_distribution<double> uth(0.1, kPi - 0.1);
    std::uniform_real_distribution<double> uv(-3.0, 3.0);
    double theta = uth(rng);
    if (side == Label::R) theta += kPi;
    PhysicalState s;
    s.theta = theta;
    s.Y = (side == Label::L ? 1.0 : -1.0) * 0.5 * p.l * std::sin(theta);
    s.theta_dot = uv(rng);
    s.Y_dot = uv(rng);
    if (endpoint_velocity(s, side, p) >= 0.0) {
        s.Y_dot = -std::abs(s.Y_dot) - 0.5 * p.l * std::abs(s.theta_dot) - 0.1;
    }
    return s;
}

}  // namespace

TEST(EndpointImpulse, PeakContactIsPureTranslation) {
    CoinParams p = CoinParams::make(10.0);
    PhysicalState s{0.5 * p.l, kPi / 2, -2.0, 0.7};
    PhysicalState r = endpoint_impulse(s, Label::L, p);
    EXPECT_NEAR(r.Y_dot, 2.0, 1e-14);
    EXPECT_NEAR(r.theta_dot, 0.7, 1e-14);
}

TEST(EndpointImpulse, ReversesContactVelocityAndKeepsEnergy) {
    CoinParams p = CoinParams::make(10.0);
    std::mt19937 rng(3);
    for (int i = 0; i < 1000; ++i) {
        Label side = i % 2 ? Label::L : Label::R;
        PhysicalState s = random_contact(side, rng, p);
        double vc = endpoint_velocity(s, side, p);
        PhysicalState r = endpoint_impulse(s, side, p);
        EXPECT_NEAR(endpoint_velocity(r, side, p), -vc,
                    1e-12 * std::max(1.0, std::abs(vc)));
        EXPECT_NEAR(kinetic(r, p), kinetic(s, p), 1e-12 * kinetic(s, p));
    }
}

TEST(EndpointImpulse, TimeReversedImpulseRestoresTheState) {
    CoinParams p = CoinParams::make(10.0, 1.0, 1.0, 1.0);
    std::mt19937 rng(5);
    for (int i = 0; i < 200; ++i) {
        PhysicalState s = random_contact(Label::L, rng, p);
        PhysicalState post = endpoint_impulse(s, Label::L, p);
        PhysicalState rev{post.Y, post.theta, -post.Y_dot, -post.theta_dot};
        PhysicalState back = endpoint_impulse(rev, Label::L, p);
        EXPECT_NEAR(back.Y_dot, -s.Y_dot, 1e-12 * (1.0 + std::abs(s.Y_dot)));
        EXPECT_NEAR(back.theta_dot, -s.theta_dot,
                    1e-12 * (1.0 + std::abs(s.theta_dot)));
    }
}

TEST(EndpointImpulse, ErrorPaths) {
    CoinParams p = CoinParams::make(10.0);
    PhysicalState off_floor{2.0, kPi / 2, -1.0, 0.0};
    EXPECT_THROW(endpoint_impulse(off_floor, Label::L, p), NotInContact);
    PhysicalState separating{0.5 * p.l, kPi / 2, 1.0, 0.0};
    EXPECT_THROW(endpoint_impulse(separating, Label::L, p), SeparatingContact);
}

TEST(EndpointImpulse, MatchesTheBilliardReflection) {
    // the impulse in rod coordinates and the mirror law in billiard
    // coordinates are the same elastic collision
    std::mt19937 rng(11);
    for (double length : {2.0, 1.0}) {
        CoinParams phys = CoinParams::make(100.0, 1.0, 1.0, length);
        for (int i = 0; i < 500; ++i) {
            Label side = i % 2 ? Label::L : Label::R;
            PhysicalState s = random_contact(side, rng, phys);
            double E_phys = energy_of(s, phys);
            CoinParams bil = billiard_params(phys, E_phys);
            FullState pre = to_billiard(s, phys, Side::pre_collision);
            if (corner_distance(pre.theta) < 1e-3) continue;
            FullState post_b;
            try {
                post_b = dynamics::reflect(pre, bil);
            } catch (const std::invalid_argument&) {
                continue;  // contact velocity pointing along the boundary
            }
            PhysicalState post_p = endpoint_impulse(s, side, phys);
            FullState post_pb = to_billiard(post_p, phys, Side::post_collision);
            double scale = std::max(1.0, std::abs(post_b.y_dot));
            EXPECT_NEAR(post_pb.theta_dot, post_b.theta_dot, 1e-10 * scale);
            EXPECT_NEAR(post_pb.y_dot, post_b.y_dot, 1e-10 * scale);
        }
    }
}

TEST(Simulate, VerticalDropBouncesOnOneEndpoint) {
    CoinParams p = CoinParams::make(10.0);
    PhysicalState s0{2.0, kPi / 2, 0.0, 0.0};
    PhysicalTrajectory traj = physical_simulate(s0, 8, p);
    ASSERT_EQ(traj.word.size(), 8u);
    for (Label l : traj.word) EXPECT_EQ(l, Label::L);
    // period-two bouncing: each contact repeats the first
    for (const auto& rec : traj.collisions) {
        EXPECT_NEAR(rec.pre.Y, 0.5 * p.l, 1e-9);
        EXPECT_NEAR(rec.pre.theta, kPi / 2, 1e-9);
    }
}

TEST(Simulate, EnergyDriftStaysSmall) {
    CoinParams p = CoinParams::make(1e4);
    PhysicalState s0{1.7, 0.8, -3.0, 2.5};
    double E0 = energy_of(s0, p);
    PhysicalTrajectory traj = physical_simulate(s0, 1000, p);
    EXPECT_LT(std::abs(energy_of(traj.final_state, p) - E0) / E0, 1e-7);
}

TEST(Simulate, FlatDropHitsBothEndpointsTogether) {
    CoinParams p = CoinParams::make(10.0);
    PhysicalState s0{1.0, 0.0, 0.0, 0.0};
    EXPECT_THROW(physical_simulate(s0, 1, p), SimultaneousContact);
}

TEST(Simulate, LabelMatchesTheLowEndpoint) {
    CoinParams p = CoinParams::make(50.0);
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> uth(-6.0, 6.0);
    std::uniform_real_distribution<double> uv(-2.0, 2.0);
    int checked = 0;
    while (checked < 50) {
        PhysicalState s0{3.0, uth(rng), uv(rng), uv(rng)};
        PhysicalTrajectory traj;
        try {
            traj = physical_simulate(s0, 1, p);
        } catch (const BilliardError&) {
            continue;
        }
        const auto& rec = traj.collisions.front();
        // side L exactly when sin(theta) > 0 at contact
        EXPECT_EQ(rec.side == Label::L, std::sin(rec.pre.theta) > 0.0);
        EXPECT_NEAR(endpoint_height(rec.pre, rec.side, p), 0.0, 1e-9);
        ++checked;
    }
}

TEST(Crosscheck, AgreesAcrossParameterSets) {
    for (double length : {2.0, 1.0}) {
        CoinParams phys = CoinParams::make(1e4, 1.0, 1.0, length);
        EquivalenceReport rep = crosscheck(phys, 1e4, 5, 50, 99);
        EXPECT_EQ(rep.label_agreement, 1.0);
        EXPECT_LT(rep.max_state_deviation, 1e-8);
        for (const auto& s : rep.per_seed) EXPECT_EQ(s.steps, 50);
    }
}

TEST(Crosscheck, FreeRunsDivergeEventually) {
    // chaos amplifies the representation differences; the free-running label
    // horizon is finite and far shorter than the per-step protocol
    CoinParams phys = CoinParams::make(1e4);
    EquivalenceReport rep = crosscheck(phys, 1e4, 5, 100, 123);
    for (const auto& s : rep.per_seed) {
        EXPECT_GE(s.free_run_match, 1);
        EXPECT_LT(s.free_run_match, 100);
    }
}

TEST(Crosscheck, Deterministic) {
    CoinParams phys = CoinParams::make(1e4);
    EquivalenceReport a = crosscheck(phys, 1e4, 3, 20, 7);
    EquivalenceReport b = crosscheck(phys, 1e4, 3, 20, 7);
    EXPECT_EQ(a.max_state_deviation, b.max_state_deviation);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(a.per_seed[i].initial.theta, b.per_seed[i].initial.theta);
        EXPECT_EQ(a.per_seed[i].free_run_match, b.per_seed[i].free_run_match);
    }
}
