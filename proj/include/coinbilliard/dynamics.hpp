#pragma once
// The billiard flow: elastic reflection at y = |sin theta|, parabolic free
// flight with boundary event detection, the return map f on the downward
// section, its time-reversal inverse, and the analytic Jacobian of f with a
// finite-difference cross-check.

#include <algorithm>
#include <array>
#include <cmath>

#include "coinbilliard/core.hpp"

namespace coinbilliard {
namespace dynamics {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Flight arc in the (theta, y) plane: y = alpha (theta - beta)^2 + gamma.
/// A launch with theta_dot_+ = 0 is a vertical line instead; alpha is
/// meaningless then and the degenerate flag is set.
struct FlightParabola {
    double alpha = 0.0;  ///< curvature, -g / (2 theta_dot_+^2)
    double beta  = 0.0;  ///< vertex angle
    double gamma = 0.0;  ///< vertex height
    bool degenerate = false;
};

/// Derivative of the return map, d(theta_1, theta_dot_1)/d(theta, theta_dot).
struct Jacobian2 {
    double a11 = 0.0, a12 = 0.0;
    double a21 = 0.0, a22 = 0.0;
    double det() const { return a11 * a22 - a12 * a21; }
};

struct ReturnResult {
    PhasePoint point;        ///< next pre-collision phase point
    FlightParabola parabola; ///< the connecting flight arc
};

// ---------------------------------------------------------------------------
// Reflection
// ---------------------------------------------------------------------------

namespace detail {

/// Apply the boundary reflection matrix at angle theta to a velocity.
/// The matrix is symmetric with determinant -1, hence its own inverse.
inline void apply_reflection(double theta, double& theta_dot, double& y_dot) {
    double c = std::cos(theta);
    double sn = std::sin(theta);
    double sigma = sn > 0.0 ? 1.0 : -1.0;
    double s2 = sn * sn;
    double d = 1.0 + c * c;
    double td = theta_dot, yd = y_dot;
    theta_dot = (s2 * td + 2.0 * c * sigma * yd) / d;
    y_dot     = (2.0 * c * sigma * td - s2 * yd) / d;
}

/// Inward boundary normal component of a velocity, v . n with
/// n = (-cos(theta) sign(sin(theta)), 1).
inline double normal_component(double theta, double theta_dot, double y_dot) {
    double c = std::cos(theta);
    double sigma = std::sin(theta) > 0.0 ? 1.0 : -1.0;
    return -c * sigma * theta_dot + y_dot;
}

}  // namespace detail

/// Elastic reflection of a pre-collision state. Position is unchanged and
/// speed is preserved; applying it twice returns the input velocity.
inline FullState reflect(const FullState& s, const CoinParams& p) {
    if (near_corner(s.theta, p))
        throw CornerAngle("reflect: collision at a corner angle");
    if (detail::normal_component(s.theta, s.theta_dot, s.y_dot) >= 0.0)
        throw std::invalid_argument("reflect: velocity does not point into the boundary");
    FullState out = s;
    detail::apply_reflection(out.theta, out.theta_dot, out.y_dot);
    out.side = Side::post_collision;
    return out;
}

// ---------------------------------------------------------------------------
// Flight and event detection
// ---------------------------------------------------------------------------

namespace detail {

/// Ballistic arc theta(t) = theta0 + u t, y(t) = y0 + w t - g t^2 / 2.
struct Flight {
    double theta0, y0, u, w, g;

    double theta(double t) const { return theta0 + u * t; }
    double y(double t) const { return y0 + (w - 0.5 * g * t) * t; }
    double ydot(double t) const { return w - g * t; }

    /// Height above the boundary; an event is the first positive root.
    double gap(double t) const {
        return y(t) - std::abs(std::sin(theta(t)));
    }
    double gap_dot(double t) const {
        double th = theta(t);
        double sigma = std::sin(th) > 0.0 ? 1.0 : -1.0;
        return ydot(t) - sigma * std::cos(th) * u;
    }
};

/// First boundary crossing time of a flight launched from the boundary.
/// Strategy: the boundary never exceeds 1, so stretches with y > 1 are
/// skipped analytically; the rest is marched with a step that bounds both
/// the angular advance and the free-fall scale, then bisected and polished.
/// Steps whose gap derivative changes sign are probed for interior dips so
/// grazing passes are caught rather than stepped over.
inline double first_event_time(const Flight& fl, const CoinParams& p) {
    const double g = fl.g;
    const double dt = std::min(0.1 / std::max(std::abs(fl.u), 1e-300),
                               0.1 * std::sqrt(2.0 / g));
    // Fall time to y = -2 bounds every event (the boundary is nonnegative).
    const double t_max =
        (fl.w + std::sqrt(fl.w * fl.w + 2.0 * g * (fl.y0 + 2.0))) / g;
    const double t_scale = std::max(t_max, std::sqrt(2.0 / g));

    double t0 = p.tol.launch_eps * t_scale;
    double g0 = fl.gap(t0);
    if (g0 <= 0.0)
        throw TangencyUnresolved("flight does not separate from the boundary");

    double lo = 0.0, hi = 0.0;  // bracket with gap(lo) > 0 >= gap(hi)
    bool bracketed = false;
    const long max_iter = static_cast<long>(t_max / dt) + 256;
    for (long it = 0; it < max_iter && !bracketed; ++it) {
        if (t0 > t_max + 16.0 * dt)
            throw TangencyUnresolved("flight event search ran past its horizon");
        // Skip ahead while above the boundary's maximum height.
        if (fl.y(t0) > 1.0) {
            double v = fl.ydot(t0);
            double disc = v * v + 2.0 * g * (fl.y(t0) - 1.0);
            double tc = t0 + (v + std::sqrt(disc)) / g;
            double gc = fl.gap(tc);
            if (gc <= 0.0) {  // came down exactly onto a peak
                lo = t0;
                hi = tc;
                bracketed = true;
                break;
            }
            t0 = tc;
            g0 = gc;
        }
        double t1 = t0 + dt;
        double g1 = fl.gap(t1);
        if (g1 <= 0.0) {
            lo = t0;
            hi = t1;
            bracketed = true;
            break;
        }
        // Interior dip: the gap derivative recovers within the step.
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
                    throw TangencyUnresolved("sign change too narrow to certify");
                lo = t0;
                hi = tm;
                bracketed = true;
                break;
            }
            if (gm < p.tol.tangency_dg)
                throw TangencyUnresolved("grazing pass within tolerance of the boundary");
        }
        t0 = t1;
        g0 = g1;
    }
    if (!bracketed)
        throw TangencyUnresolved("no boundary crossing found");

    // Bisection to a tight bracket, then guarded Newton polish.
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
    if (std::abs(fl.gap_dot(t)) < p.tol.tangency_dg)
        throw TangencyUnresolved("event is tangential within tolerance");
    return t;
}

}  // namespace detail

/// Build the flight arc of a post-collision launch.
inline FlightParabola parabola_of(const FullState& launch, const CoinParams& p) {
    FlightParabola fp;
    if (launch.theta_dot == 0.0) {
        fp.degenerate = true;
        fp.beta = launch.theta;
        fp.gamma = launch.y + launch.y_dot * launch.y_dot / (2.0 * p.g);
        return fp;
    }
    fp.alpha = -p.g / (2.0 * launch.theta_dot * launch.theta_dot);
    fp.beta = launch.theta + launch.theta_dot * launch.y_dot / p.g;
    fp.gamma = launch.y + launch.y_dot * launch.y_dot / (2.0 * p.g);
    return fp;
}

/// Fly a post-collision state to the next boundary crossing and return the
/// pre-collision state there. Energy is conserved exactly along the arc.
inline FullState fly_to_next_collision(const FullState& s, const CoinParams& p) {
    detail::Flight fl{s.theta, s.y, s.theta_dot, s.y_dot, p.g};
    double t = detail::first_event_time(fl, p);
    double th1 = fl.theta(t);
    if (near_corner(th1, p))
        throw CornerCollision("flight lands within corner_tol of theta = n*pi");
    FullState out;
    out.theta = th1;
    out.y = std::abs(std::sin(th1));
    out.theta_dot = s.theta_dot;
    out.y_dot = fl.ydot(t);
    out.side = Side::pre_collision;
    return out;
}

// ---------------------------------------------------------------------------
// Return map
// ---------------------------------------------------------------------------

/// One step of the billiard map: reflect, fly, land. The result is the next
/// pre-collision phase point together with the connecting arc.
inline ReturnResult return_map(const PhasePoint& q, const CoinParams& p) {
    require_valid(q, p);
    FullState pre = full_state_from(q, p);
    FullState post = reflect(pre, p);
    FlightParabola fp = parabola_of(post, p);
    FullState arr = fly_to_next_collision(post, p);
    if (arr.y_dot >= 0.0)
        throw UpwardArrival("return map arrival is not on the downward section");
    return ReturnResult{PhasePoint{arr.theta, arr.theta_dot}, fp};
}

/// One full-state step of the billiard flow, pre-collision to pre-collision.
/// Unlike return_map this never needs the downward-section chart, so it also
/// handles arrivals moving upward along a steep boundary stretch.
inline FullState step_full(const FullState& pre, const CoinParams& p) {
    return fly_to_next_collision(reflect(pre, p), p);
}

inline Jacobian2 jacobian_analytic(const PhasePoint& q, const CoinParams& p);

/// Inverse of the return map by time reversal: negate the pre-collision
/// velocity, fly to the next event, negate again, and undo the reflection
/// (the reflection matrix is an involution). Points whose preimage collision
/// moves upward along a steep boundary stretch have no representation on the
/// downward section and are rejected.
///
/// Rounding the preimage to section coordinates costs accuracy where it
/// skims the boundary (the chart is ill-conditioned there), so the angle is
/// polished by a Newton step on the forward map; the strong anisotropy of
/// the map makes that one knob recover both output coordinates.
inline PhasePoint inverse_return_map(const PhasePoint& q, const CoinParams& p) {
    require_valid(q, p);
    double yd = ydot_from(q, p);
    FullState launch;
    launch.theta = q.theta;
    launch.y = std::abs(std::sin(q.theta));
    launch.theta_dot = -q.theta_dot;
    launch.y_dot = -yd;
    launch.side = Side::post_collision;
    FullState arr = fly_to_next_collision(launch, p);
    double td = -arr.theta_dot;
    double ydp = -arr.y_dot;
    detail::apply_reflection(arr.theta, td, ydp);
    if (ydp >= 0.0)
        throw UpwardArrival("preimage lies off the downward section");
    PhasePoint out{arr.theta, td};
    require_valid(out, p);
    for (int i = 0; i < 4; ++i) {
        double residual = return_map(out, p).point.theta - q.theta;
        if (std::abs(residual) < 1e-11 * std::max(1.0, std::abs(q.theta)))
            break;
        out.theta -= residual / jacobian_analytic(out, p).a11;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Jacobian
// ---------------------------------------------------------------------------

namespace detail {

/// d theta_dot_+ / d theta and / d theta_dot of the reflection step, with
/// y_dot eliminated through the energy relation.
inline void reflection_derivatives(double theta, double theta_dot, double y_dot,
                                   const CoinParams& p, double& d_dth,
                                   double& d_dtd) {
    double c = std::cos(theta);
    double sn = std::sin(theta);
    double sigma = sn > 0.0 ? 1.0 : -1.0;
    double d = 1.0 + c * c;
    double s2 = sn * sn;
    d_dth = (2.0 * theta_dot * y_dot * std::sin(2.0 * theta) -
             2.0 * p.g * c * c * d - 2.0 * y_dot * y_dot * sigma * sn * s2) /
            (y_dot * d * d);
    d_dtd = (s2 - 2.0 * sigma * theta_dot * c / y_dot) / d;
}

}  // namespace detail

/// Closed-form Jacobian of the return map, assembled by the chain rule from
/// the reflection derivatives and the on-shell flight derivatives. The sign
/// branch in the flight terms follows the sign of sin(theta_1).
inline Jacobian2 jacobian_analytic(const PhasePoint& q, const CoinParams& p) {
    require_valid(q, p);
    FullState pre = full_state_from(q, p);
    FullState post = reflect(pre, p);
    FullState arr = fly_to_next_collision(post, p);
    if (arr.y_dot >= 0.0)
        throw UpwardArrival("jacobian: arrival is not on the downward section");

    double dtp_dth, dtp_dtd;
    detail::reflection_derivatives(q.theta, q.theta_dot, pre.y_dot, p, dtp_dth,
                                   dtp_dtd);

    double sigma0 = std::sin(q.theta) > 0.0 ? 1.0 : -1.0;
    double sigma1 = std::sin(arr.theta) > 0.0 ? 1.0 : -1.0;
    double c0 = std::cos(q.theta);
    double c1 = std::cos(arr.theta);
    double u = post.theta_dot;   // constant along the flight
    double w = post.y_dot;
    double yd1 = arr.y_dot;

    double denom = w * (yd1 - sigma1 * arr.theta_dot * c1);
    double dth1_dthp = yd1 * (w - sigma0 * u * c0) / denom;
    double dth1_dtdp = (w - yd1) * (w * yd1 + arr.theta_dot * arr.theta_dot) /
                       (p.g * denom);

    Jacobian2 J;
    J.a11 = dth1_dthp + dth1_dtdp * dtp_dth;
    J.a12 = dth1_dtdp * dtp_dtd;
    J.a21 = dtp_dth;
    J.a22 = dtp_dtd;
    return J;
}

/// Central-difference Jacobian used as the independent check of the closed
/// form. Throws BranchCrossing when the stencil orbits do not launch from and
/// land on the same boundary arcs.
inline Jacobian2 jacobian_fd(const PhasePoint& q, const CoinParams& p,
                             double h = 0.0) {
    if (h <= 0.0) h = 1e-6 * std::max(1.0, std::abs(q.theta_dot));

    auto arc = [](double theta) {
        return static_cast<long>(std::floor(theta / kPi));
    };
    const long launch_arc = arc(q.theta);
    const long landing_arc = arc(return_map(q, p).point.theta);

    auto eval = [&](double dth, double dtd) {
        PhasePoint s{q.theta + dth, q.theta_dot + dtd};
        if (arc(s.theta) != launch_arc)
            throw BranchCrossing("fd stencil straddles a boundary corner");
        PhasePoint r = return_map(s, p).point;
        if (arc(r.theta) != landing_arc)
            throw BranchCrossing("fd stencil orbits land on different arcs");
        return r;
    };

    PhasePoint tp = eval(h, 0.0), tm = eval(-h, 0.0);
    PhasePoint dp = eval(0.0, h), dm = eval(0.0, -h);
    Jacobian2 J;
    J.a11 = (tp.theta - tm.theta) / (2.0 * h);
    J.a21 = (tp.theta_dot - tm.theta_dot) / (2.0 * h);
    J.a12 = (dp.theta - dm.theta) / (2.0 * h);
    J.a22 = (dp.theta_dot - dm.theta_dot) / (2.0 * h);
    return J;
}

}  // namespace dynamics
}  // namespace coinbilliard
