#pragma once
// Independent plane-rigid-body simulator for the coin: two equal point
// masses on a weightless rod of length l, falling under gravity and making
// elastic endpoint collisions with the floor Y = 0. Used as the
// cross-validation oracle for the billiard representation; the event search
// follows the same bracketing strategy with the same tolerance constants
// but is written against the rod coordinates, not shared with it.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "coinbilliard/core.hpp"
#include "coinbilliard/dynamics.hpp"

namespace coinbilliard {
namespace physical {

/// Rigid-coin state: center-of-mass height, normal-vector angle, and their
/// velocities. The center of mass never moves horizontally.
struct PhysicalState {
    double Y = 0.0;
    double theta = 0.0;
    double Y_dot = 0.0;
    double theta_dot = 0.0;
};

inline double endpoint_height(const PhysicalState& s, Label side,
                              const CoinParams& p) {
    double off = 0.5 * p.l * std::sin(s.theta);
    return side == Label::L ? s.Y - off : s.Y + off;
}

/// Vertical velocity of an endpoint.
inline double endpoint_velocity(const PhysicalState& s, Label side,
                                const CoinParams& p) {
    double off = 0.5 * p.l * std::cos(s.theta) * s.theta_dot;
    return side == Label::L ? s.Y_dot - off : s.Y_dot + off;
}

inline double energy_of(const PhysicalState& s, const CoinParams& p) {
    return 0.5 * p.I * s.theta_dot * s.theta_dot +
           0.5 * p.m * s.Y_dot * s.Y_dot + p.m * p.g * s.Y;
}

// ---------------------------------------------------------------------------
// Elastic endpoint impulse
// ---------------------------------------------------------------------------

/// Apply the vertical contact impulse that exactly reverses the touching
/// endpoint's vertical velocity. Kinetic energy is preserved.
inline PhysicalState endpoint_impulse(const PhysicalState& s, Label side,
                                      const CoinParams& p) {
    if (std::abs(endpoint_height(s, side, p)) > 1e-12 * std::max(1.0, p.l))
        throw NotInContact("endpoint_impulse: endpoint is not on the floor");
    double vc = endpoint_velocity(s, side, p);
    if (vc >= 0.0)
        throw SeparatingContact("endpoint_impulse: contact point moves upward");
    double lever = 0.5 * p.l * std::cos(s.theta);
    double J = -2.0 * vc / (1.0 / p.m + lever * lever / p.I);
    PhysicalState out = s;
    out.Y_dot += J / p.m;
    out.theta_dot += (side == Label::L ? -1.0 : 1.0) * J * lever / p.I;
    return out;
}

// ---------------------------------------------------------------------------
// Flight and event detection
// ---------------------------------------------------------------------------

namespace detail {

struct RodFlight {
    double Y0, th0, Vy, om, g, half_l;

    double Y(double t) const { return Y0 + (Vy - 0.5 * g * t) * t; }
    double Ydot(double t) const { return Vy - g * t; }
    double theta(double t) const { return th0 + om * t; }

    /// Clearance of the lower endpoint above the floor.
    double gap(double t) const {
        return Y(t) - half_l * std::abs(std::sin(theta(t)));
    }
    double gap_dot(double t) const {
        double th = theta(t);
        double sigma = std::sin(th) > 0.0 ? 1.0 : -1.0;
        return Ydot(t) - half_l * sigma * std::cos(th) * om;
    }
};

/// First floor contact of a ballistic rod flight: skip analytically while
/// the center of mass is too high for either endpoint to reach the floor,
/// march with a step bounding the angular advance, probe dips, bisect.
inline double first_contact_time(const RodFlight& fl, const CoinParams& p) {
    const double g = fl.g;
    const double dt = std::min(0.1 / std::max(std::abs(fl.om), 1e-300),
                               0.1 * std::sqrt(2.0 / g));
    const double t_max =
        (fl.Vy + std::sqrt(fl.Vy * fl.Vy + 2.0 * g * (fl.Y0 + 2.0 * fl.half_l))) / g;
    const double t_scale = std::max(t_max, std::sqrt(2.0 / g));

    double t0 = p.tol.launch_eps * t_scale;
    if (fl.gap(t0) <= 0.0 && fl.gap_dot(t0) <= 0.0)
        throw TangencyUnresolved("rod flight does not separate from the floor");
    if (fl.gap(0.0) > 1e-9 * std::max(1.0, fl.half_l)) t0 = 0.0;

    double lo = 0.0, hi = 0.0;
    bool bracketed = false;
    const long max_iter = static_cast<long>(t_max / dt) + 256;
    for (long it = 0; it < max_iter && !bracketed; ++it) {
        if (t0 > t_max + 16.0 * dt)
            throw TangencyUnresolved("rod contact search ran past its horizon");
        if (fl.Y(t0) > fl.half_l) {  // no endpoint can reach the floor
            double v = fl.Ydot(t0);
            double disc = v * v + 2.0 * g * (fl.Y(t0) - fl.half_l);
            double tc = t0 + (v + std::sqrt(disc)) / g;
            double gc = fl.gap(tc);
            if (gc <= 0.0) {
                lo = t0;
                hi = tc;
                bracketed = true;
                break;
            }
            t0 = tc;
        }
        double t1 = t0 + dt;
        double g1 = fl.gap(t1);
        if (g1 <= 0.0) {
            lo = t0;
            hi = t1;
            bracketed = true;
            break;
        }
        if (fl.gap_dot(t0) < 0.0 && fl.gap_dot(t1) > 0.0) {
            double a = t0, b = t1;
            for (int i = 0; i < 80 && (b - a) > p.tol.event_tol * t_scale; ++i) {
                double m = 0.5 * (a + b);
                (fl.gap_dot(m) < 0.0 ? a : b) = m;
            }
            double tm = 0.5 * (a + b);
            double gm = fl.gap(tm);
            if (gm <= 0.0) {
                if (tm - t0 < p.tol.tangency_dt * t_scale)
                    throw TangencyUnresolved("rod contact bracket too narrow");
                lo = t0;
                hi = tm;
                bracketed = true;
                break;
            }
            if (gm < p.tol.tangency_dg * std::max(1.0, fl.half_l))
                throw TangencyUnresolved("rod grazes the floor");
        }
        t0 = t1;
    }
    if (!bracketed) throw TangencyUnresolved("no rod contact found");

    for (int i = 0; i < 200 && (hi - lo) > p.tol.event_tol * t_scale; ++i) {
        double m = 0.5 * (lo + hi);
        (fl.gap(m) > 0.0 ? lo : hi) = m;
    }
    double t = 0.5 * (lo + hi);
    for (int i = 0; i < 6; ++i) {
        double gd = fl.gap_dot(t);
        if (gd == 0.0) break;
        double step = fl.gap(t) / gd;
        double tn = t - step;
        if (tn <= lo || tn >= hi) break;
        t = tn;
        if (std::abs(step) < 1e-18 * t_scale) break;
    }
    if (std::abs(fl.gap_dot(t)) < p.tol.tangency_dg * std::max(1.0, fl.half_l))
        throw TangencyUnresolved("rod contact is tangential");
    return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct CollisionRecord {
    double t = 0.0;            ///< absolute time of the contact
    PhysicalState pre;         ///< state right before the impulse
    PhysicalState post;        ///< state right after
    Label side = Label::L;
};

struct PhysicalTrajectory {
    std::vector<CollisionRecord> collisions;
    std::vector<Label> word;
    PhysicalState final_state;
};

/// Fly to the next endpoint contact. Returns the pre-collision state and
/// which endpoint touched.
inline CollisionRecord fly_to_contact(const PhysicalState& s, double t_base,
                                      const CoinParams& p) {
    detail::RodFlight fl{s.Y, s.theta, s.Y_dot, s.theta_dot, p.g, 0.5 * p.l};
    double t = detail::first_contact_time(fl, p);
    CollisionRecord rec;
    rec.t = t_base + t;
    rec.pre = PhysicalState{fl.Y(t), fl.theta(t), fl.Ydot(t), s.theta_dot};
    if (corner_distance(rec.pre.theta) < p.tol.corner_tol)
        throw SimultaneousContact("both endpoints reach the floor together");
    rec.side = std::sin(rec.pre.theta) > 0.0 ? Label::L : Label::R;
    return rec;
}

/// Simulate n endpoint collisions: ballistic flight, event detection on the
/// lower endpoint, elastic impulse, repeat. Records the collision word.
inline PhysicalTrajectory physical_simulate(const PhysicalState& s0, int n,
                                            const CoinParams& p) {
    PhysicalTrajectory traj;
    PhysicalState s = s0;
    double t_base = 0.0;
    for (int i = 0; i < n; ++i) {
        CollisionRecord rec = fly_to_contact(s, t_base, p);
        rec.post = endpoint_impulse(rec.pre, rec.side, p);
        t_base = rec.t;
        s = rec.post;
        traj.word.push_back(rec.side);
        traj.collisions.push_back(rec);
    }
    traj.final_state = s;
    return traj;
}

// ---------------------------------------------------------------------------
// Coordinate equivalence with the billiard representation
// ---------------------------------------------------------------------------

/// Billiard-side parameters equivalent to a physical parameter set: the
/// rescale y = sqrt(m/I) Y turns the rod dynamics into the unit billiard
/// with gravity g sqrt(m/I) and energy E/I, in the same time variable.
inline CoinParams billiard_params(const CoinParams& phys, double E_phys) {
    CoinParams b = CoinParams::make(E_phys / phys.I,
                                    phys.g * std::sqrt(phys.m / phys.I));
    b.tol = phys.tol;
    return b;
}

/// Map a physical state to billiard coordinates (theta, y, theta_dot, y_dot).
inline FullState to_billiard(const PhysicalState& s, const CoinParams& phys,
                             Side side) {
    double scale = std::sqrt(phys.m / phys.I);
    FullState out;
    out.theta = s.theta;
    out.y = scale * s.Y;
    out.theta_dot = s.theta_dot;
    out.y_dot = scale * s.Y_dot;
    out.side = side;
    return out;
}

/// Map a billiard state back to rod coordinates.
inline PhysicalState from_billiard(const FullState& s, const CoinParams& phys) {
    double scale = std::sqrt(phys.I / phys.m);  // Y = scale * y
    return PhysicalState{scale * s.y, s.theta, scale * s.y_dot, s.theta_dot};
}

/// Place a billiard pre-collision phase point on the rod: the touching
/// endpoint sits on the floor and the center of mass carries the implied
/// vertical velocity.
inline PhysicalState from_phase_point(const PhasePoint& q,
                                      const CoinParams& phys,
                                      const CoinParams& billiard) {
    double scale = std::sqrt(phys.I / phys.m);  // Y = scale * y
    PhysicalState s;
    s.theta = q.theta;
    s.theta_dot = q.theta_dot;
    s.Y = scale * std::abs(std::sin(q.theta));
    s.Y_dot = scale * ydot_from(q, billiard);
    return s;
}

// ---------------------------------------------------------------------------
// Simulator crosscheck
// ---------------------------------------------------------------------------

struct SeedReport {
    PhasePoint initial;
    int steps = 0;                 ///< per-step comparisons completed
    int label_agreements = 0;
    double max_state_deviation = 0.0;
    int free_run_match = 0;        ///< free-running collisions before the
                                   ///< two label sequences diverge
    std::string stopped;           ///< dynamics error that ended the seed, if any
};

struct EquivalenceReport {
    double energy = 0.0;           ///< physical energy
    double mass = 0.0, length = 0.0, gravity = 0.0;
    int seeds = 0;
    int collisions = 0;
    double max_state_deviation = 0.0;
    double label_agreement = 0.0;  ///< fraction over all per-step comparisons
    std::vector<SeedReport> per_seed;
};

/// Drive both simulators over seeded random initial collisions. Each step
/// starts the two from the identical state, advances one collision, and
/// compares the arrival in billiard coordinates; the pair is then re-seeded
/// from the billiard arrival. A free-running comparison per seed records how
/// long the two label sequences stay equal without re-seeding (chaos bounds
/// that horizon).
inline EquivalenceReport crosscheck(const CoinParams& phys, double E_phys,
                                    int n_seeds, int n_collisions,
                                    unsigned long rng_seed) {
    CoinParams bil = billiard_params(phys, E_phys);
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> u_theta(0.15, kPi - 0.15);
    std::uniform_real_distribution<double> u_frac(-0.7, 0.7);
    std::uniform_int_distribution<int> u_hump(0, 1);

    EquivalenceReport rep;
    rep.energy = E_phys;
    rep.mass = phys.m;
    rep.length = phys.l;
    rep.gravity = phys.g;
    rep.seeds = n_seeds;
    rep.collisions = n_collisions;

    long agreements = 0, comparisons = 0;
    for (int s = 0; s < n_seeds; ++s) {
        double theta = u_theta(rng) + kPi * u_hump(rng);
        double frac = u_frac(rng);
        double cap = std::sqrt(2.0 * bil.E -
                               2.0 * bil.g * std::abs(std::sin(theta)));
        PhasePoint q{theta, frac * cap};
        SeedReport sr;
        sr.initial = q;

        FullState pre = full_state_from(q, bil);
        for (int i = 0; i < n_collisions; ++i) {
            FullState b_next;
            try {
                b_next = dynamics::step_full(pre, bil);
            } catch (const BilliardError& e) {
                sr.stopped = e.what();
                break;
            }
            Label side = std::sin(pre.theta) > 0.0 ? Label::L : Label::R;
            PhysicalState p_pre = from_billiard(pre, phys);
            CollisionRecord rec;
            try {
                PhysicalState p_post = endpoint_impulse(p_pre, side, phys);
                rec = fly_to_contact(p_post, 0.0, phys);
            } catch (const BilliardError& e) {
                sr.stopped = e.what();
                break;
            }
            FullState p_next = to_billiard(rec.pre, phys, Side::pre_collision);
            double dev = std::max({std::abs(p_next.theta - b_next.theta),
                                   std::abs(p_next.y - b_next.y),
                                   std::abs(p_next.theta_dot - b_next.theta_dot),
                                   std::abs(p_next.y_dot - b_next.y_dot)});
            sr.max_state_deviation = std::max(sr.max_state_deviation, dev);
            Label b_side = std::sin(b_next.theta) > 0.0 ? Label::L : Label::R;
            sr.label_agreements += rec.side == b_side;
            ++sr.steps;
            pre = b_next;
        }

        // free-running label horizon
        try {
            FullState b = full_state_from(q, bil);
            PhysicalState ph = from_billiard(b, phys);
            for (int i = 0; i < n_collisions; ++i) {
                Label bl = std::sin(b.theta) > 0.0 ? Label::L : Label::R;
                Label pl = std::sin(ph.theta) > 0.0 ? Label::L : Label::R;
                if (bl != pl) break;
                ++sr.free_run_match;
                b = dynamics::step_full(b, bil);
                CollisionRecord rec =
                    fly_to_contact(endpoint_impulse(ph, pl, phys), 0.0, phys);
                ph = rec.pre;
            }
        } catch (const BilliardError&) {
        }

        agreements += sr.label_agreements;
        comparisons += sr.steps;
        rep.max_state_deviation =
            std::max(rep.max_state_deviation, sr.max_state_deviation);
        rep.per_seed.push_back(sr);
    }
    rep.label_agreement =
        comparisons > 0 ? double(agreements) / double(comparisons) : 0.0;
    return rep;
}

}  // namespace physical
}  // namespace coinbilliard
