#pragma once
// Core types for the bouncing-coin billiard: a point billiard in the domain
// y >= |sin theta| under gravity, obtained from a rigid rod with two equal
// end masses bouncing on a floor. Angles are kept on the real line here;
// cylinder (theta mod 2pi) reduction happens in the horseshoe layer.

#include <cmath>
#include <stdexcept>
#include <string>

namespace coinbilliard {

inline constexpr double kPi    = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct BilliardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Radicand 2E - 2g|sin theta| - theta_dot^2 is not positive: no real
/// downward vertical velocity exists at this phase point.
struct EnergyDeficit : BilliardError {
    using BilliardError::BilliardError;
};

/// Phase point or boundary footpoint lies within corner_tol of theta = n*pi,
/// where the boundary normal is undefined.
struct CornerAngle : BilliardError {
    using BilliardError::BilliardError;
};

/// A flight's first boundary crossing lands within corner_tol of a corner.
struct CornerCollision : BilliardError {
    using BilliardError::BilliardError;
};

/// The event finder cannot certify a transversal first crossing (grazing).
struct TangencyUnresolved : BilliardError {
    using BilliardError::BilliardError;
};

/// Finite-difference stencil points land on different boundary arcs.
struct BranchCrossing : BilliardError {
    using BilliardError::BilliardError;
};

/// A flight arrived at the boundary moving upward, so the landing cannot be
/// encoded on the downward section.
struct UpwardArrival : BilliardError {
    using BilliardError::BilliardError;
};

/// The scale equation has no sign change on the search bracket (E too small).
struct NoBracket : BilliardError {
    using BilliardError::BilliardError;
};

/// Strip extraction found a count other than six.
struct StripCountMismatch : BilliardError {
    int count;
    explicit StripCountMismatch(int n)
        : BilliardError("strip count mismatch: found " + std::to_string(n) +
                        " strips, expected 6"),
          count(n) {}
};

/// Measured transition adjacency violates the two subshift rules.
struct GraphMismatch : BilliardError {
    using BilliardError::BilliardError;
};

/// Adaptive image refinement exceeded its depth limit.
struct ImageDisconnected : BilliardError {
    using BilliardError::BilliardError;
};

/// Rigid-body impulse requested while the endpoint is off the floor.
struct NotInContact : BilliardError {
    using BilliardError::BilliardError;
};

/// Rigid-body impulse requested while the contact point moves upward.
struct SeparatingContact : BilliardError {
    using BilliardError::BilliardError;
};

/// Both rod endpoints reach the floor together (the theta = n*pi corner).
struct SimultaneousContact : BilliardError {
    using BilliardError::BilliardError;
};

/// Subdivision interval fell below representable width before matching.
struct ResolutionExceeded : BilliardError {
    int realized_prefix;
    ResolutionExceeded(const std::string& what, int prefix)
        : BilliardError(what), realized_prefix(prefix) {}
};

/// All search branches exhausted within the node budget.
struct NotFound : BilliardError {
    int realized_prefix;
    NotFound(const std::string& what, int prefix)
        : BilliardError(what), realized_prefix(prefix) {}
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Numerical tolerances shared across the library. Defaults suit energies in
/// [1e1, 1e8] with g near 1; the CLI can override the first three.
struct Tolerances {
    double corner_tol  = 1e-9;   ///< radians from n*pi treated as a corner
    double event_tol   = 1e-14;  ///< relative bisection width for flight events
    double match_tol   = 1e-12;  ///< strip-membership margin
    double launch_eps  = 1e-12;  ///< relative event-search start offset
    double tangency_dt = 1e-13;  ///< bracket width (relative) flagged as grazing
    double tangency_dg = 1e-9;   ///< |d(y - |sin|)/dt| at event flagged as grazing
};

/// Physical constants of the coin and the conserved energy, in the rescaled
/// units where the billiard domain is y >= |sin theta|. With the default
/// m = 1, l = 2 (hence I = 1) the rescale is the identity; other rod
/// geometries enter through the physical-simulator conversion.
struct CoinParams {
    double m = 1.0;  ///< total mass
    double l = 2.0;  ///< rod length
    double I = 1.0;  ///< moment of inertia, always m*l^2/4
    double g = 1.0;  ///< gravity
    double E = 1e4;  ///< total energy
    Tolerances tol{};

    static CoinParams make(double energy, double gravity = 1.0,
                           double mass = 1.0, double length = 2.0) {
        CoinParams p;
        p.m = mass;
        p.l = length;
        p.I = 0.25 * mass * length * length;
        p.g = gravity;
        p.E = energy;
        return p;
    }

    void validate() const {
        if (!(m > 0.0) || !(l > 0.0) || !(g > 0.0))
            throw std::invalid_argument("CoinParams: m, l, g must be positive");
        if (I != 0.25 * m * l * l)
            throw std::invalid_argument("CoinParams: I must equal m*l^2/4");
        if (!(E > g))
            throw std::invalid_argument(
                "CoinParams: E must exceed g so the boundary peak is reachable");
    }
};

// ---------------------------------------------------------------------------
// State types
// ---------------------------------------------------------------------------

/// (theta, theta_dot) on the downward Poincare section: the state right
/// before a collision, with the vertical velocity implied by the energy.
struct PhasePoint {
    double theta     = 0.0;
    double theta_dot = 0.0;
};

enum class Side { pre_collision, post_collision, in_flight };

/// Full billiard state (theta, y, theta_dot, y_dot) plus which side of a
/// collision it sits on.
struct FullState {
    double theta     = 0.0;
    double y         = 0.0;
    double theta_dot = 0.0;
    double y_dot     = 0.0;
    Side side        = Side::in_flight;
};

/// Phase point with the angle reduced to [0, 2pi).
struct CylinderPoint {
    double theta_mod = 0.0;
    double theta_dot = 0.0;
};

enum class Label { L, R };

inline char label_char(Label s) { return s == Label::L ? 'L' : 'R'; }

inline Label other(Label s) { return s == Label::L ? Label::R : Label::L; }

/// The six strip symbols. The letter is the hosting rectangle; subscript 2
/// marks the strip produced by the same-letter rectangle, subscripts 1 and 3
/// the other-origin strips ordered top to bottom in theta_dot.
enum class FineSymbol { L1, L2, L3, R1, R2, R3 };

inline constexpr int kNumSymbols = 6;

inline Label letter_of(FineSymbol s) {
    return static_cast<int>(s) < 3 ? Label::L : Label::R;
}

inline int subscript_of(FineSymbol s) { return static_cast<int>(s) % 3 + 1; }

inline FineSymbol make_symbol(Label letter, int subscript) {
    int idx = (letter == Label::L ? 0 : 3) + subscript - 1;
    return static_cast<FineSymbol>(idx);
}

inline std::string symbol_name(FineSymbol s) {
    return std::string(1, label_char(letter_of(s))) +
           std::to_string(subscript_of(s));
}

/// The strip a symbol's image strips originate from: the image of a strip
/// with letter X lands inside the image of rectangle X, so its successors
/// are exactly the symbols of origin X.
inline Label origin_of(FineSymbol s) {
    return subscript_of(s) == 2 ? letter_of(s) : other(letter_of(s));
}

/// Adjacency rule of the six-symbol subshift: s may precede j exactly when
/// j originates from s's letter. Equivalently: L1, L2, L3 precede R1, L2,
/// R3; R1, R2, R3 precede L1, R2, L3.
inline bool allowed_transition(FineSymbol s, FineSymbol j) {
    return origin_of(j) == letter_of(s);
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Total energy theta_dot^2/2 + y_dot^2/2 + g*y of a state.
inline double energy_of(const FullState& s, const CoinParams& p) {
    return 0.5 * (s.theta_dot * s.theta_dot + s.y_dot * s.y_dot) + p.g * s.y;
}

/// Distance from theta to the nearest corner n*pi.
inline double corner_distance(double theta) {
    double r = std::remainder(theta, kPi);
    return std::abs(r);
}

inline bool near_corner(double theta, const CoinParams& p) {
    return corner_distance(theta) < p.tol.corner_tol;
}

/// Radicand of the downward-velocity root at a phase point. The fused
/// subtraction keeps full relative precision when theta_dot^2 nearly
/// exhausts 2E (skimming states), where a plain evaluation quantizes at
/// ulp(2E).
inline double radicand_of(const PhasePoint& q, const CoinParams& p) {
    return std::fma(-q.theta_dot, q.theta_dot, 2.0 * p.E) -
           2.0 * p.g * std::abs(std::sin(q.theta));
}

/// The (negative) vertical velocity on the downward section,
/// -sqrt(2E - 2g|sin theta| - theta_dot^2).
inline double ydot_from(const PhasePoint& q, const CoinParams& p) {
    double r = radicand_of(q, p);
    if (r <= 0.0)
        throw EnergyDeficit("ydot_from: radicand " + std::to_string(r) +
                            " is not positive at theta=" + std::to_string(q.theta));
    return -std::sqrt(r);
}

/// Reduce an angle to [0, 2pi). 2pi-periodic and idempotent up to rounding.
inline double wrap_theta(double theta) {
    double w = theta - kTwoPi * std::floor(theta / kTwoPi);
    if (w >= kTwoPi) w -= kTwoPi;  // floor rounding can land exactly on 2pi
    if (w < 0.0) w += kTwoPi;
    return w;
}

inline CylinderPoint to_cylinder(const PhasePoint& q) {
    return CylinderPoint{wrap_theta(q.theta), q.theta_dot};
}

/// Which hump the footpoint sits on: L when sin theta > 0, R when < 0.
inline Label coarse_label(const PhasePoint& q, const CoinParams& p) {
    if (near_corner(q.theta, p))
        throw CornerAngle("coarse_label: theta within corner_tol of n*pi");
    return std::sin(q.theta) > 0.0 ? Label::L : Label::R;
}

/// Validate the phase-point invariants (positive radicand, not a corner).
inline void require_valid(const PhasePoint& q, const CoinParams& p) {
    if (near_corner(q.theta, p))
        throw CornerAngle("phase point at a corner angle");
    if (radicand_of(q, p) <= 0.0)
        throw EnergyDeficit("phase point has no downward velocity");
}

/// Pre-collision full state implied by a phase point on the section.
inline FullState full_state_from(const PhasePoint& q, const CoinParams& p) {
    FullState s;
    s.theta     = q.theta;
    s.y         = std::abs(std::sin(q.theta));
    s.theta_dot = q.theta_dot;
    s.y_dot     = ydot_from(q, p);
    s.side      = Side::pre_collision;
    return s;
}

}  // namespace coinbilliard
