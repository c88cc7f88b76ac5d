#pragma once
// Horseshoe construction for the coin billiard: the energy-dependent scale
// k(E), the two small rectangles D_L and D_R around the sine peaks, the six
// horizontal strips cut by the image of the domain on the cylinder, their
// vertical preimage strips, the Conley-Moser condition checks, the measured
// transition graph, and the census of the topological picture as the
// rectangle scale is varied.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "coinbilliard/core.hpp"
#include "coinbilliard/dynamics.hpp"

namespace coinbilliard {
namespace horseshoe {

// ---------------------------------------------------------------------------
// Domain
// ---------------------------------------------------------------------------

struct Rect {
    double center = 0.0;
    double half_width = 0.0;   // in theta
    double half_height = 0.0;  // in theta_dot
    double lo() const { return center - half_width; }
    double hi() const { return center + half_width; }
};

/// The two rectangles of the horseshoe domain, centered on the peaks at
/// pi/2 and 3pi/2 with half-width k/E and half-height sqrt(2) k / sqrt(E).
struct DomainPair {
    double k = 0.0;
    double E = 0.0;
    Rect left, right;

    const Rect& rect(Label h) const { return h == Label::L ? left : right; }
};

/// Residual of the corner-return condition: twice the signed theta distance
/// from the top-left rectangle corner's launch to its parabola vertex, plus
/// pi. At the root the corner trajectory lands exactly one hump to the left.
/// Evaluated through the exact reflection, not its asymptotic expansion; the
/// trig is written in the complement angle k/E so no precision is lost next
/// to the peak.
inline double corner_landing_residual(double E, double k, const CoinParams& base) {
    const double g = base.g;
    double x = k / E;                          // pi/2 - theta_a
    double td = std::sqrt(2.0) * k / std::sqrt(E);
    double sin_th = std::cos(x);               // sin(theta_a)
    double cos_th = std::sin(x);               // cos(theta_a)
    double rad_pre = std::fma(-td, td, 2.0 * E) - 2.0 * g * sin_th;
    if (rad_pre <= 0.0)
        throw EnergyDeficit("corner_landing_residual: no real incoming velocity");
    double tdp = (td * sin_th * sin_th - 2.0 * std::sqrt(rad_pre) * cos_th) /
                 (1.0 + cos_th * cos_th);
    double rad_post = std::fma(-tdp, tdp, 2.0 * E) - 2.0 * g * sin_th;
    if (rad_post <= 0.0)
        throw EnergyDeficit("corner_landing_residual: no real flight velocity");
    return (2.0 / g) * tdp * std::sqrt(rad_post) + kPi;
}

/// Solve the corner-return condition for k on (g pi/8, g pi/2) by bisection.
/// The residual is positive at the left end and negative at the right end
/// once E is large enough; otherwise NoBracket.
inline double solve_k(double E, const CoinParams& p) {
    double lo = p.g * kPi / 8.0;
    double hi = p.g * kPi / 2.0;
    double rlo, rhi;
    try {
        rlo = corner_landing_residual(E, lo, p);
        rhi = corner_landing_residual(E, hi, p);
    } catch (const EnergyDeficit&) {
        throw NoBracket("solve_k: E too small for the corner trajectory");
    }
    if (!(rlo > 0.0) || !(rhi < 0.0))
        throw NoBracket("solve_k: no sign change on (g pi/8, g pi/2)");
    for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
        double m = 0.5 * (lo + hi);
        (corner_landing_residual(E, m, p) > 0.0 ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
}

namespace detail {

inline Rect make_rect(double center, double K, double E) {
    return Rect{center, K / E, std::sqrt(2.0) * K / std::sqrt(E)};
}

inline void validate_rect(const Rect& r, const CoinParams& p) {
    if (!(r.half_width < kPi / 2.0))
        throw BilliardError("domain rectangle reaches a corner");
    for (double th : {r.lo(), r.hi()})
        for (double td : {-r.half_height, r.half_height})
            require_valid(PhasePoint{th, td}, p);
}

}  // namespace detail

/// Build the rectangle pair at scale K (used by the bifurcation scan).
inline DomainPair build_domains_at(double K, const CoinParams& p) {
    DomainPair dom;
    dom.k = K;
    dom.E = p.E;
    dom.left = detail::make_rect(kPi / 2.0, K, p.E);
    dom.right = detail::make_rect(3.0 * kPi / 2.0, K, p.E);
    detail::validate_rect(dom.left, p);
    detail::validate_rect(dom.right, p);
    return dom;
}

/// Build the domain at the solved scale k(E).
inline DomainPair build_domains(const CoinParams& p) {
    return build_domains_at(solve_k(p.E, p), p);
}

/// The three reference points on the top edge of the left rectangle: the
/// left corner a, the point b whose launch is vertical, and the top-center c.
struct ReferencePoints {
    PhasePoint a, b, c;
};

inline ReferencePoints reference_points(const DomainPair& dom, const CoinParams& p) {
    const Rect& r = dom.left;
    double hh = r.half_height;
    auto launch_tdot = [&](double theta) {
        return dynamics::reflect(full_state_from(PhasePoint{theta, hh}, p), p)
            .theta_dot;
    };
    double lo = r.lo(), hi = r.center;  // launch_tdot < 0 at a, > 0 at center
    for (int i = 0; i < 200 && hi - lo > 1e-17; ++i) {
        double m = 0.5 * (lo + hi);
        (launch_tdot(m) < 0.0 ? lo : hi) = m;
    }
    ReferencePoints ref;
    ref.a = PhasePoint{r.lo(), hh};
    ref.b = PhasePoint{0.5 * (lo + hi), hh};
    ref.c = PhasePoint{r.center, hh};
    return ref;
}

// ---------------------------------------------------------------------------
// Strips
// ---------------------------------------------------------------------------

enum class Orientation { horizontal, vertical };

using Polyline = std::vector<PhasePoint>;

/// A strip between two boundary polylines. Horizontal strips are graphs over
/// theta in the host-rectangle frame (lower/upper in theta_dot); vertical
/// strips are graphs over theta_dot (lower = left, upper = right in theta).
struct Strip {
    Orientation orientation = Orientation::horizontal;
    FineSymbol label = FineSymbol::L1;
    Label host = Label::L;    ///< rectangle containing the strip
    Label origin = Label::L;  ///< rectangle whose image (H) / preimage target (V) cut it
    Polyline lower, upper;
    double mu = 0.0;     ///< max boundary difference quotient
    double width = 0.0;  ///< max boundary separation

    // Bookkeeping for horizontal strips: the unwrapped theta window the
    // origin band was cut over, and the edge-parameter intervals that map
    // onto it (used for second-iterate geometry).
    double window_lo = 0.0, window_hi = 0.0;
    std::array<double, 2> upper_params{0.0, 0.0};
    std::array<double, 2> lower_params{0.0, 0.0};
};

struct StripFamily {
    DomainPair dom;
    int grid_n = 0;
    std::vector<Strip> horizontal;
    std::vector<Strip> vertical;
    double mu_h = 0.0, mu_v = 0.0;

    const Strip& strip(Orientation o, FineSymbol s) const {
        const auto& v = o == Orientation::horizontal ? horizontal : vertical;
        for (const Strip& st : v)
            if (st.label == s) return st;
        throw BilliardError("strip " + symbol_name(s) + " not present");
    }
};

namespace detail {

/// Nearest 2pi-translate of theta to ref.
inline double wrap_near(double theta, double ref) {
    return theta - kTwoPi * std::round((theta - ref) / kTwoPi);
}

/// Bisection solve of an increasing map on [lo, hi]. Targets slightly
/// outside the range clamp to the endpoints (clamp_tol guards against
/// genuinely out-of-range targets). Evaluation failures at interior points
/// (a parameter whose orbit grazes a corner) are sidestepped by re-splitting
/// at a nudged point.
template <class F>
double solve_increasing(F&& f, double lo, double hi, double target,
                        double clamp_tol) {
    double flo = f(lo);
    double fhi = f(hi);
    if (target <= flo) {
        if (flo - target > clamp_tol)
            throw BilliardError("solve_increasing: target below range");
        return lo;
    }
    if (target >= fhi) {
        if (target - fhi > clamp_tol)
            throw BilliardError("solve_increasing: target above range");
        return hi;
    }
    for (int i = 0; i < 100 && hi - lo > 1e-16 * std::max(1.0, std::abs(hi));
         ++i) {
        double m = 0.5 * (lo + hi);
        double fm;
        bool ok = false;
        for (double frac : {0.5, 0.45, 0.55, 0.38, 0.62}) {
            m = lo + frac * (hi - lo);
            try {
                fm = f(m);
                ok = true;
                break;
            } catch (const BilliardError&) {
            }
        }
        if (!ok) break;  // unresolvable sliver; midpoint is the best estimate
        (fm < target ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
}

/// Image abscissa of a point on a horizontal line theta_dot = tdot.
struct EdgeMap {
    double tdot;
    const CoinParams* p;
    double theta1(double theta0) const {
        return dynamics::return_map(PhasePoint{theta0, tdot}, *p).point.theta;
    }
    PhasePoint image(double theta0) const {
        return dynamics::return_map(PhasePoint{theta0, tdot}, *p).point;
    }
};

inline double polyline_mu(const Polyline& poly, Orientation o) {
    if (poly.size() < 2) return 0.0;
    // ignore segments much shorter than the mean spacing; they carry no
    // slope information (solver granularity can repeat an abscissa)
    double span = o == Orientation::horizontal
                      ? std::abs(poly.back().theta - poly.front().theta)
                      : std::abs(poly.back().theta_dot - poly.front().theta_dot);
    double floor = 1e-3 * span / static_cast<double>(poly.size());
    double mu = 0.0;
    for (std::size_t i = 1; i < poly.size(); ++i) {
        double dth = poly[i].theta - poly[i - 1].theta;
        double dtd = poly[i].theta_dot - poly[i - 1].theta_dot;
        double run = o == Orientation::horizontal ? std::abs(dth) : std::abs(dtd);
        double rise = o == Orientation::horizontal ? std::abs(dtd) : std::abs(dth);
        if (run < floor) continue;
        mu = std::max(mu, rise / run);
    }
    return mu;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward image polylines
// ---------------------------------------------------------------------------

struct ImagePolyline {
    Polyline points;  ///< image vertices, angles unwrapped
    /// indices into points after which a flagged gap follows (a parameter
    /// sliver whose orbits hit a corner and could not be refined through)
    std::vector<std::size_t> punctures;
};

/// Map a polyline forward pointwise, inserting midpoints adaptively until
/// successive image angles differ by less than delta_img. Samples whose
/// orbit hits a corner are flagged and subdivision continues around them.
inline ImagePolyline forward_image_polyline(const Polyline& edge,
                                            const CoinParams& p,
                                            double delta_img = 1e-3,
                                            int max_depth = 40) {
    if (edge.size() < 2)
        throw std::invalid_argument("forward_image_polyline: need >= 2 vertices");
    ImagePolyline out;

    auto map_point = [&](const PhasePoint& q) {
        return dynamics::return_map(q, p).point;
    };

    // Depth-first over input segments, emitting images left to right.
    std::function<void(PhasePoint, PhasePoint, PhasePoint, PhasePoint, int)>
        refine = [&](PhasePoint a, PhasePoint fa, PhasePoint b, PhasePoint fb,
                     int depth) {
            if (std::abs(fb.theta - fa.theta) < delta_img) {
                out.points.push_back(fb);
                return;
            }
            if (depth >= max_depth)
                throw ImageDisconnected(
                    "forward_image_polyline: refinement depth exceeded");
            PhasePoint m{0.5 * (a.theta + b.theta),
                         0.5 * (a.theta_dot + b.theta_dot)};
            PhasePoint fm;
            bool ok = false;
            for (double frac : {0.5, 0.47, 0.53}) {
                m = PhasePoint{a.theta + frac * (b.theta - a.theta),
                               a.theta_dot + frac * (b.theta_dot - a.theta_dot)};
                try {
                    fm = map_point(m);
                    ok = true;
                    break;
                } catch (const BilliardError&) {
                }
            }
            if (!ok) {  // corner sliver; flag the gap and keep both sides
                out.punctures.push_back(out.points.size() - 1);
                out.points.push_back(fb);
                return;
            }
            refine(a, fa, m, fm, depth + 1);
            refine(m, fm, b, fb, depth + 1);
        };

    PhasePoint a = edge.front();
    PhasePoint fa = map_point(a);
    out.points.push_back(fa);
    for (std::size_t i = 1; i < edge.size(); ++i) {
        PhasePoint b = edge[i];
        PhasePoint fb = map_point(b);
        refine(a, fa, b, fb, 0);
        a = b;
        fa = fb;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Horizontal strip extraction
// ---------------------------------------------------------------------------

namespace detail {

struct Crossing {
    Label origin, host;
    double shift;                   // window = host rect + shift (unwrapped)
    double window_lo, window_hi;    // unwrapped
    Polyline lower, upper;          // host frame
    std::array<double, 2> upper_params, lower_params;
    double mean_ordinate = 0.0;
};

/// Cut the image band of one rectangle against every rectangle copy it fully
/// crosses, sampling both boundary curves at nv abscissae per window.
inline void collect_crossings(const DomainPair& dom, Label origin,
                              const CoinParams& p, int nv,
                              std::vector<Crossing>& out) {
    const Rect& r0 = dom.rect(origin);
    double hh = r0.half_height;
    EdgeMap top{hh, &p}, bottom{-hh, &p};

    double up_lo = top.theta1(r0.lo()), up_hi = top.theta1(r0.hi());
    double dn_lo = bottom.theta1(r0.lo()), dn_hi = bottom.theta1(r0.hi());
    if (!(up_lo < up_hi) || !(dn_lo < dn_hi))
        throw BilliardError("edge image is not increasing");
    double cover_lo = std::max(up_lo, dn_lo);
    double cover_hi = std::min(up_hi, dn_hi);

    const double edge_tol = 1e-8;
    for (Label host : {Label::L, Label::R}) {
        const Rect& rh = dom.rect(host);
        long n_min = static_cast<long>(
            std::ceil((cover_lo - edge_tol - rh.lo()) / kTwoPi));
        long n_max = static_cast<long>(
            std::floor((cover_hi + edge_tol - rh.hi()) / kTwoPi));
        for (long n = n_min; n <= n_max; ++n) {
            double shift = kTwoPi * n;
            double w_lo = rh.lo() + shift, w_hi = rh.hi() + shift;
            Crossing c;
            c.origin = origin;
            c.host = host;
            c.shift = shift;
            c.window_lo = w_lo;
            c.window_hi = w_hi;
            bool inside = true;
            double th_lo_u = r0.lo(), th_lo_d = r0.lo();
            double acc = 0.0;
            for (int i = 0; i < nv && inside; ++i) {
                double x = w_lo + (w_hi - w_lo) * i / (nv - 1);
                double pu = solve_increasing(
                    [&](double t) { return top.theta1(t); },
                    std::max(th_lo_u - 1e-12, r0.lo()), r0.hi(), x, edge_tol);
                double pd = solve_increasing(
                    [&](double t) { return bottom.theta1(t); },
                    std::max(th_lo_d - 1e-12, r0.lo()), r0.hi(), x, edge_tol);
                th_lo_u = pu;
                th_lo_d = pd;
                PhasePoint iu = top.image(pu), id = bottom.image(pd);
                if (std::abs(iu.theta_dot) > rh.half_height + 1e-9 ||
                    std::abs(id.theta_dot) > rh.half_height + 1e-9 ||
                    !(iu.theta_dot > id.theta_dot)) {
                    inside = false;
                    break;
                }
                // keep the achieved abscissae so the vertices sit exactly on
                // the image curves (slope quotients stay noise-free)
                c.upper.push_back(PhasePoint{iu.theta - shift, iu.theta_dot});
                c.lower.push_back(PhasePoint{id.theta - shift, id.theta_dot});
                acc += 0.5 * (iu.theta_dot + id.theta_dot);
                if (i == 0) {
                    c.upper_params[0] = pu;
                    c.lower_params[0] = pd;
                } else if (i == nv - 1) {
                    c.upper_params[1] = pu;
                    c.lower_params[1] = pd;
                }
            }
            if (inside) {
                c.mean_ordinate = acc / nv;
                out.push_back(std::move(c));
            }
        }
    }
}

}  // namespace detail

/// Cut the six horizontal strips out of the image of the domain on the
/// cylinder. Throws StripCountMismatch when the census differs from six
/// (wrong energy regime or a rectangle scale away from k).
inline StripFamily extract_horizontal_strips(const DomainPair& dom,
                                             const CoinParams& p,
                                             int grid_n = 256) {
    if (grid_n < 64)
        throw std::invalid_argument("extract_horizontal_strips: grid_n < 64");
    int nv = std::max(grid_n, 256) + 1;

    std::vector<detail::Crossing> crossings;
    detail::collect_crossings(dom, Label::L, p, nv, crossings);
    detail::collect_crossings(dom, Label::R, p, nv, crossings);
    if (crossings.size() != 6)
        throw StripCountMismatch(static_cast<int>(crossings.size()));

    StripFamily fam;
    fam.dom = dom;
    fam.grid_n = grid_n;
    for (Label host : {Label::L, Label::R}) {
        std::vector<detail::Crossing*> in_host;
        for (auto& c : crossings)
            if (c.host == host) in_host.push_back(&c);
        if (in_host.size() != 3)
            throw StripCountMismatch(static_cast<int>(crossings.size()));
        std::sort(in_host.begin(), in_host.end(),
                  [](auto* a, auto* b) { return a->mean_ordinate > b->mean_ordinate; });
        int same_origin = 0;
        for (auto* c : in_host)
            if (c->origin == host) ++same_origin;
        if (same_origin != 1)
            throw BilliardError("unexpected strip origin split in a host rectangle");
        for (std::size_t pos = 0; pos < 3; ++pos) {
            detail::Crossing* c = in_host[pos];
            Strip s;
            s.orientation = Orientation::horizontal;
            s.host = host;
            s.origin = c->origin;
            int subscript = c->origin == host ? 2 : (pos == 0 ? 1 : 3);
            s.label = make_symbol(host, subscript);
            s.lower = std::move(c->lower);
            s.upper = std::move(c->upper);
            s.window_lo = c->window_lo;
            s.window_hi = c->window_hi;
            s.upper_params = c->upper_params;
            s.lower_params = c->lower_params;
            s.mu = std::max(detail::polyline_mu(s.lower, s.orientation),
                            detail::polyline_mu(s.upper, s.orientation));
            for (std::size_t i = 0; i < s.lower.size(); ++i)
                s.width = std::max(s.width,
                                   s.upper[i].theta_dot - s.lower[i].theta_dot);
            fam.mu_h = std::max(fam.mu_h, s.mu);
            fam.horizontal.push_back(std::move(s));
        }
        // middle strip must carry subscript 2: positions are top(1), mid, bottom(3)
        if (subscript_of(fam.horizontal[fam.horizontal.size() - 2].label) != 2)
            throw BilliardError("same-origin strip is not the middle strip");
    }
    return fam;
}

// ---------------------------------------------------------------------------
// Vertical strip extraction
// ---------------------------------------------------------------------------

/// For each horizontal strip, extract its preimage as a vertical strip
/// spanning the full height of the rectangle that maps onto it. Boundaries
/// are located row by row as the preimages of the strip window's edges.
inline void extract_vertical_strips(const DomainPair& dom, StripFamily& fam,
                                    const CoinParams& p, int grid_n = 256) {
    if (fam.horizontal.size() != 6)
        throw BilliardError("extract_vertical_strips: horizontal strips missing");
    int nv = std::max(grid_n, 256) + 1;

    for (const Strip& h : fam.horizontal) {
        const Rect& r0 = dom.rect(h.origin);
        Strip v;
        v.orientation = Orientation::vertical;
        v.label = h.label;
        v.host = h.origin;          // the rectangle containing the preimage
        v.origin = letter_of(h.label);  // rectangle of the next collision
        for (int j = 0; j < nv; ++j) {
            double row = -r0.half_height +
                         2.0 * r0.half_height * j / (nv - 1);
            detail::EdgeMap em{row, &p};
            double left = detail::solve_increasing(
                [&](double t) { return em.theta1(t); }, r0.lo(), r0.hi(),
                h.window_lo, 1e-8);
            double right = detail::solve_increasing(
                [&](double t) { return em.theta1(t); }, r0.lo(), r0.hi(),
                h.window_hi, 1e-8);
            v.lower.push_back(PhasePoint{left, row});
            v.upper.push_back(PhasePoint{right, row});
            v.width = std::max(v.width, right - left);
        }
        v.mu = std::max(detail::polyline_mu(v.lower, v.orientation),
                        detail::polyline_mu(v.upper, v.orientation));
        fam.mu_v = std::max(fam.mu_v, v.mu);
        fam.vertical.push_back(std::move(v));
    }
    if (fam.vertical.size() != 6)
        throw StripCountMismatch(static_cast<int>(fam.vertical.size()));
}

// ---------------------------------------------------------------------------
// Conley-Moser conditions
// ---------------------------------------------------------------------------

struct TransitionGraph {
    std::array<std::array<bool, kNumSymbols>, kNumSymbols> adj{};

    bool at(FineSymbol s, FineSymbol j) const {
        return adj[static_cast<int>(s)][static_cast<int>(j)];
    }

    static TransitionGraph expected() {
        TransitionGraph g;
        for (int i = 0; i < kNumSymbols; ++i)
            for (int j = 0; j < kNumSymbols; ++j)
                g.adj[i][j] = allowed_transition(static_cast<FineSymbol>(i),
                                                 static_cast<FineSymbol>(j));
        return g;
    }

    bool operator==(const TransitionGraph& o) const { return adj == o.adj; }
};

struct CMReport {
    double cm1_value = 0.0;
    bool cm1_pass = false;

    struct Cm2Entry {
        FineSymbol label;
        double d_vertical = 0.0;    // mapped V side boundaries vs H window edges
        double d_horizontal = 0.0;  // mapped V top/bottom pieces vs H boundaries
        double threshold = 0.0;
        bool pass = false;
    };
    std::vector<Cm2Entry> cm2;
    bool cm2_pass = false;

    struct Cm3Entry {
        FineSymbol s, j;
        bool allowed = false;
        bool nonempty = false;
        double width = 0.0;
        double width_ratio = 0.0;  // vs d(H_s), allowed pairs
        double slope = 0.0;
        double gap = 0.0;  // clearance for forbidden pairs
        bool pass = false;
    };
    std::vector<Cm3Entry> cm3;
    bool cm3_pass = false;

    TransitionGraph adjacency;
    bool pass = false;
};

namespace detail {

struct PairGeometry {
    bool nonempty = false;
    double width = 0.0;
    double slope = 0.0;
    double gap = 0.0;
};

inline double interp_ordinate(const Polyline& poly, double x) {
    // uniform abscissae
    double lo = poly.front().theta, hi = poly.back().theta;
    double t = (x - lo) / (hi - lo) * (poly.size() - 1);
    long i = std::clamp(static_cast<long>(t), 0L,
                        static_cast<long>(poly.size()) - 2);
    double f = t - i;
    return poly[i].theta_dot + f * (poly[i + 1].theta_dot - poly[i].theta_dot);
}

/// Geometry of the image of strip s against strip j, both on the cylinder.
/// The image's boundaries are second iterates of the origin-rectangle edges
/// restricted to the parameter windows recorded at extraction.
inline PairGeometry pair_geometry(const StripFamily& fam, const Strip& hs,
                                  const Strip& hj, const CoinParams& p,
                                  int samples = 129) {
    auto second = [&](double tdot_edge, double theta0) {
        PhasePoint q1 =
            dynamics::return_map(PhasePoint{theta0, tdot_edge}, p).point;
        return dynamics::return_map(q1, p).point;
    };
    const Rect& r0 = fam.dom.rect(hs.origin);
    double hh = r0.half_height;

    auto span_of = [&](double tdot_edge, const std::array<double, 2>& pr) {
        return std::array<double, 2>{second(tdot_edge, pr[0]).theta,
                                     second(tdot_edge, pr[1]).theta};
    };
    std::array<double, 2> up_span = span_of(hh, hs.upper_params);
    std::array<double, 2> dn_span = span_of(-hh, hs.lower_params);
    double cover_lo = std::max(up_span[0], dn_span[0]);
    double cover_hi = std::min(up_span[1], dn_span[1]);

    PairGeometry out;
    out.gap = std::numeric_limits<double>::infinity();
    const double w_lo_host = hj.upper.front().theta;
    const double w_hi_host = hj.upper.back().theta;

    long n_min =
        static_cast<long>(std::ceil((cover_lo - 1e-8 - w_lo_host) / kTwoPi));
    long n_max =
        static_cast<long>(std::floor((cover_hi + 1e-8 - w_hi_host) / kTwoPi));
    for (long n = n_min; n <= n_max; ++n) {
        double shift = kTwoPi * n;
        Polyline up2, dn2;
        double su = hs.upper_params[0], sd = hs.lower_params[0];
        for (int i = 0; i < samples; ++i) {
            double xh = w_lo_host + (w_hi_host - w_lo_host) * i / (samples - 1);
            double x = xh + shift;
            su = solve_increasing(
                [&](double t) { return second(hh, t).theta; },
                std::max(su - 1e-12, hs.upper_params[0]), hs.upper_params[1], x,
                2e-6);
            sd = solve_increasing(
                [&](double t) { return second(-hh, t).theta; },
                std::max(sd - 1e-12, hs.lower_params[0]), hs.lower_params[1], x,
                2e-6);
            PhasePoint pu2 = second(hh, su), pd2 = second(-hh, sd);
            up2.push_back(PhasePoint{pu2.theta - shift, pu2.theta_dot});
            dn2.push_back(PhasePoint{pd2.theta - shift, pd2.theta_dot});
        }
        // overlap with strip j over the window
        double min_h = std::numeric_limits<double>::infinity();
        double max_h = 0.0;
        double min_gap = std::numeric_limits<double>::infinity();
        Polyline clip_lo, clip_hi;
        for (int i = 0; i < samples; ++i) {
            double xh = up2[i].theta;
            double a_lo = std::min(dn2[i].theta_dot, up2[i].theta_dot);
            double a_hi = std::max(dn2[i].theta_dot, up2[i].theta_dot);
            double b_lo = interp_ordinate(hj.lower, xh);
            double b_hi = interp_ordinate(hj.upper, xh);
            double o_lo = std::max(a_lo, b_lo);
            double o_hi = std::min(a_hi, b_hi);
            min_h = std::min(min_h, o_hi - o_lo);
            max_h = std::max(max_h, o_hi - o_lo);
            min_gap = std::min(min_gap, std::max(b_lo - a_hi, a_lo - b_hi));
            clip_lo.push_back(PhasePoint{xh, o_lo});
            clip_hi.push_back(PhasePoint{xh, o_hi});
        }
        if (min_h > 0.0) {
            out.nonempty = true;
            out.width = std::max(out.width, max_h);
            out.slope = std::max(
                {out.slope, polyline_mu(clip_lo, Orientation::horizontal),
                 polyline_mu(clip_hi, Orientation::horizontal)});
        } else {
            out.gap = std::min(out.gap, min_gap);
        }
    }
    return out;
}

inline double point_polyline_distance(const PhasePoint& q, const Polyline& poly,
                                      double theta_scale = 1.0,
                                      double tdot_scale = 1.0) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < poly.size(); ++i) {
        double ax = poly[i - 1].theta / theta_scale,
               ay = poly[i - 1].theta_dot / tdot_scale;
        double bx = poly[i].theta / theta_scale, by = poly[i].theta_dot / tdot_scale;
        double px = q.theta / theta_scale, py = q.theta_dot / tdot_scale;
        double vx = bx - ax, vy = by - ay;
        double tt = ((px - ax) * vx + (py - ay) * vy) /
                    std::max(vx * vx + vy * vy, 1e-300);
        tt = std::clamp(tt, 0.0, 1.0);
        double dx = px - (ax + tt * vx), dy = py - (ay + tt * vy);
        best = std::min(best, std::hypot(dx, dy));
    }
    return best;
}

inline double polyline_hausdorff(const Polyline& a, const Polyline& b) {
    double d = 0.0;
    for (const PhasePoint& q : a)
        d = std::max(d, point_polyline_distance(q, b));
    for (const PhasePoint& q : b)
        d = std::max(d, point_polyline_distance(q, a));
    return d;
}

}  // namespace detail

/// Check the three Conley-Moser conditions on an extracted strip family.
/// Failures are recorded in the report, never thrown.
inline CMReport check_conley_moser(const StripFamily& fam, const CoinParams& p) {
    if (fam.horizontal.size() != 6 || fam.vertical.size() != 6)
        throw BilliardError("check_conley_moser: both strip families required");
    CMReport rep;

    rep.cm1_value = fam.mu_h * fam.mu_v;
    rep.cm1_pass = rep.cm1_value >= 0.0 && rep.cm1_value < 1.0;

    // CM2: boundary classes of V map onto the matching boundary classes of H.
    double spacing = std::max(2.0 * fam.dom.left.half_width,
                              2.0 * fam.dom.left.half_height) /
                     std::max(fam.grid_n, 1);
    rep.cm2_pass = true;
    for (const Strip& v : fam.vertical) {
        const Strip& h = fam.strip(Orientation::horizontal, v.label);
        CMReport::Cm2Entry e;
        e.label = v.label;
        e.threshold = 10.0 * spacing;

        double host_lo = h.upper.front().theta;
        double host_hi = h.upper.back().theta;
        // side boundaries -> window-edge segments
        for (int side = 0; side < 2; ++side) {
            const Polyline& vb = side == 0 ? v.lower : v.upper;
            double edge = side == 0 ? host_lo : host_hi;
            Polyline seg{PhasePoint{edge, detail::interp_ordinate(h.lower, edge)},
                         PhasePoint{edge, detail::interp_ordinate(h.upper, edge)}};
            Polyline mapped;
            for (const PhasePoint& q : vb) {
                PhasePoint r = dynamics::return_map(q, p).point;
                mapped.push_back(
                    PhasePoint{detail::wrap_near(r.theta, edge), r.theta_dot});
            }
            e.d_vertical =
                std::max(e.d_vertical, detail::polyline_hausdorff(mapped, seg));
        }
        // top/bottom pieces -> horizontal boundaries of H
        const Rect& r0 = fam.dom.rect(v.host);
        for (int side = 0; side < 2; ++side) {
            double row = side == 0 ? -r0.half_height : r0.half_height;
            const PhasePoint& lft = side == 0 ? v.lower.front() : v.lower.back();
            const PhasePoint& rgt = side == 0 ? v.upper.front() : v.upper.back();
            const Polyline& target = side == 0 ? h.lower : h.upper;
            Polyline mapped;
            int nseg = static_cast<int>(target.size());
            for (int i = 0; i < nseg; ++i) {
                double th = lft.theta + (rgt.theta - lft.theta) * i / (nseg - 1);
                PhasePoint r = dynamics::return_map(PhasePoint{th, row}, p).point;
                mapped.push_back(PhasePoint{
                    detail::wrap_near(r.theta, 0.5 * (host_lo + host_hi)),
                    r.theta_dot});
            }
            e.d_horizontal =
                std::max(e.d_horizontal, detail::polyline_hausdorff(mapped, target));
        }
        e.pass = e.d_vertical <= e.threshold && e.d_horizontal <= e.threshold;
        rep.cm2_pass = rep.cm2_pass && e.pass;
        rep.cm2.push_back(e);
    }

    // CM3: strip-to-strip image geometry.
    rep.cm3_pass = true;
    for (const Strip& hs : fam.horizontal) {
        for (const Strip& hj : fam.horizontal) {
            detail::PairGeometry g = detail::pair_geometry(fam, hs, hj, p);
            CMReport::Cm3Entry e;
            e.s = hs.label;
            e.j = hj.label;
            e.allowed = allowed_transition(hs.label, hj.label);
            e.nonempty = g.nonempty;
            e.width = g.width;
            e.width_ratio = g.nonempty ? g.width / hs.width : 0.0;
            e.slope = g.slope;
            e.gap = g.gap;
            // nested boundary slopes share the first-level 1/sqrt(E) scale
            // but not its exact constant; 1% headroom defines the family
            // Lipschitz bound (the product with mu_v stays far below 1)
            if (e.allowed)
                e.pass = g.nonempty && e.width_ratio < 1.0 &&
                         e.slope <= fam.mu_h * 1.01;
            else
                e.pass = !g.nonempty;
            rep.cm3_pass = rep.cm3_pass && e.pass;
            rep.adjacency.adj[static_cast<int>(hs.label)]
                            [static_cast<int>(hj.label)] = g.nonempty;
            rep.cm3.push_back(e);
        }
    }
    rep.pass = rep.cm1_pass && rep.cm2_pass && rep.cm3_pass;
    return rep;
}

/// Measure the transition graph from strip-image intersections and verify it
/// matches the subshift rules exactly.
inline TransitionGraph transition_graph(const StripFamily& fam,
                                        const CoinParams& p) {
    TransitionGraph g;
    for (const Strip& hs : fam.horizontal)
        for (const Strip& hj : fam.horizontal)
            g.adj[static_cast<int>(hs.label)][static_cast<int>(hj.label)] =
                detail::pair_geometry(fam, hs, hj, p).nonempty;
    TransitionGraph want = TransitionGraph::expected();
    if (!(g == want)) {
        std::string diff;
        for (int i = 0; i < kNumSymbols; ++i)
            for (int j = 0; j < kNumSymbols; ++j)
                if (g.adj[i][j] != want.adj[i][j])
                    diff += " " + symbol_name(static_cast<FineSymbol>(i)) + "->" +
                            symbol_name(static_cast<FineSymbol>(j)) +
                            (g.adj[i][j] ? " extra" : " missing");
        throw GraphMismatch("transition graph mismatch:" + diff);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Bifurcation scan
// ---------------------------------------------------------------------------

struct BifComponent {
    Label host = Label::L;   ///< which rectangle's copy is intersected
    double shift = 0.0;      ///< 2 pi n of the copy, unwrapped
    bool full = false;       ///< spans the whole window width
    double coverage = 0.0;   ///< fraction of sampled abscissae covered
};

struct BifCensus {
    double factor = 0.0;
    double K = 0.0;
    int full_count = 0;
    int corner_count = 0;
    std::vector<BifComponent> components;
};

namespace detail {

/// Boundary curve of an image band, parametrized monotonically.
struct BandCurve {
    // horizontal edge: parameter is theta_0; side edge: parameter is tdot_0
    bool horizontal_edge;
    double fixed;  // tdot for horizontal edges, theta for side edges
    double par_lo, par_hi;
    const CoinParams* p;

    PhasePoint image(double t) const {
        PhasePoint q = horizontal_edge ? PhasePoint{t, fixed}
                                       : PhasePoint{fixed, t};
        return dynamics::return_map(q, *p).point;
    }
    double theta1(double t) const { return image(t).theta; }
    std::array<double, 2> span() const {
        return {theta1(par_lo), theta1(par_hi)};
    }
};

}  // namespace detail

/// Census of the image of the domain built at K = factor * k against the
/// rectangle lattice on the unwrapped plane: per intersected rectangle copy,
/// classify the component as a full-width horizontal crossing or a corner
/// clip. At the exact k the census is six full crossings.
inline std::vector<BifCensus> scan_bifurcation(const CoinParams& p,
                                               const std::vector<double>& factors,
                                               int samples = 65) {
    double k = solve_k(p.E, p);
    std::vector<BifCensus> out;
    for (double factor : factors) {
        BifCensus census;
        census.factor = factor;
        census.K = factor * k;
        DomainPair dom = build_domains_at(census.K, p);

        for (Label origin : {Label::L, Label::R}) {
            const Rect& r0 = dom.rect(origin);
            double hh = r0.half_height;
            std::vector<detail::BandCurve> curves = {
                {true, hh, r0.lo(), r0.hi(), &p},
                {true, -hh, r0.lo(), r0.hi(), &p},
                {false, r0.lo(), -hh, hh, &p},
                {false, r0.hi(), -hh, hh, &p},
            };
            double band_lo = std::numeric_limits<double>::infinity();
            double band_hi = -band_lo;
            std::vector<std::array<double, 2>> spans;
            for (auto& c : curves) {
                auto s = c.span();
                if (s[0] > s[1]) std::swap(s[0], s[1]);
                spans.push_back(s);
                band_lo = std::min(band_lo, s[0]);
                band_hi = std::max(band_hi, s[1]);
            }
            for (Label host : {Label::L, Label::R}) {
                const Rect& rh = dom.rect(host);
                long n_min = static_cast<long>(
                    std::ceil((band_lo - rh.hi()) / kTwoPi));
                long n_max = static_cast<long>(
                    std::floor((band_hi - rh.lo()) / kTwoPi));
                for (long n = n_min; n <= n_max; ++n) {
                    double shift = kTwoPi * n;
                    double w_lo = rh.lo() + shift, w_hi = rh.hi() + shift;
                    std::vector<bool> covered(samples, false);
                    std::vector<bool> clipped(samples, false);
                    for (int i = 0; i < samples; ++i) {
                        double x = w_lo + (w_hi - w_lo) * i / (samples - 1);
                        std::vector<double> hits;
                        for (std::size_t ci = 0; ci < curves.size(); ++ci) {
                            if (x < spans[ci][0] || x > spans[ci][1]) continue;
                            auto& c = curves[ci];
                            bool increasing =
                                c.theta1(c.par_lo) < c.theta1(c.par_hi);
                            double t = detail::solve_increasing(
                                [&](double u) {
                                    return increasing ? c.theta1(u)
                                                      : -c.theta1(u);
                                },
                                c.par_lo, c.par_hi, increasing ? x : -x, 1e-7);
                            hits.push_back(c.image(t).theta_dot);
                        }
                        std::sort(hits.begin(), hits.end());
                        for (std::size_t h2 = 0; h2 + 1 < hits.size(); h2 += 2) {
                            if (hits[h2] <= rh.half_height &&
                                hits[h2 + 1] >= -rh.half_height) {
                                covered[i] = true;
                                // a section clipped by a horizontal rectangle
                                // edge marks a corner-style intersection
                                clipped[i] = hits[h2] < -rh.half_height - 1e-9 ||
                                             hits[h2 + 1] > rh.half_height + 1e-9;
                                break;
                            }
                        }
                    }
                    // maximal covered runs are the components; a full
                    // crossing spans the window side to side without
                    // touching the top or bottom edge
                    int i = 0;
                    while (i < samples) {
                        if (!covered[i]) {
                            ++i;
                            continue;
                        }
                        int j = i;
                        bool any_clip = false;
                        while (j < samples && covered[j]) {
                            any_clip = any_clip || clipped[j];
                            ++j;
                        }
                        BifComponent comp;
                        comp.host = host;
                        comp.shift = shift;
                        comp.coverage = double(j - i) / samples;
                        comp.full = (i == 0 && j == samples && !any_clip);
                        (comp.full ? census.full_count : census.corner_count)++;
                        census.components.push_back(comp);
                        i = j;
                    }
                }
            }
        }
        out.push_back(std::move(census));
    }
    return out;
}

}  // namespace horseshoe
}  // namespace coinbilliard
