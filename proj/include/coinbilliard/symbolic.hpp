#pragma once
// The six-symbol subshift and finite-depth realization: word validation,
// deterministic lifting of L/R words to strip symbols, orbit itineraries
// against an extracted strip family, and the subdivision search that locates
// initial conditions realizing a prescribed collision word.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "coinbilliard/core.hpp"
#include "coinbilliard/dynamics.hpp"
#include "coinbilliard/horseshoe.hpp"

namespace coinbilliard {
namespace symbolic {

using FineWord = std::vector<FineSymbol>;
using CoarseWord = std::vector<Label>;

// ---------------------------------------------------------------------------
// Words
// ---------------------------------------------------------------------------

inline CoarseWord parse_coarse(const std::string& s) {
    CoarseWord w;
    for (char c : s) {
        if (c == 'L')
            w.push_back(Label::L);
        else if (c == 'R')
            w.push_back(Label::R);
        else
            throw std::invalid_argument(std::string("invalid coarse symbol '") +
                                        c + "'");
    }
    if (w.empty()) throw std::invalid_argument("empty coarse word");
    return w;
}

inline std::string format_coarse(const CoarseWord& w) {
    std::string s;
    for (Label l : w) s += label_char(l);
    return s;
}

inline FineWord parse_fine(const std::string& s) {
    FineWord w;
    for (std::size_t i = 0; i + 1 < s.size(); i += 2) {
        Label letter;
        if (s[i] == 'L')
            letter = Label::L;
        else if (s[i] == 'R')
            letter = Label::R;
        else
            throw std::invalid_argument("invalid fine symbol letter");
        int sub = s[i + 1] - '0';
        if (sub < 1 || sub > 3)
            throw std::invalid_argument("invalid fine symbol subscript");
        w.push_back(make_symbol(letter, sub));
    }
    if (s.size() % 2 != 0 || w.empty())
        throw std::invalid_argument("malformed fine word");
    return w;
}

inline std::string format_fine(const FineWord& w) {
    std::string s;
    for (FineSymbol f : w) s += symbol_name(f);
    return s;
}

struct WordCheck {
    bool ok = true;
    std::size_t violation_index = 0;  ///< first index i with w[i] -/-> w[i+1]
};

/// Check every adjacent pair against the subshift rules.
inline WordCheck validate_word(const FineWord& w) {
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
        if (!allowed_transition(w[i], w[i + 1])) return {false, i};
    return {true, w.size()};
}

/// Deterministic lift of an L/R word to a valid fine word starting at a
/// given symbol: a repeated letter takes the (unique) subscript-2 symbol, a
/// letter change takes subscript 1; subscript 3 is the equally valid
/// fallback a search may try instead.
inline FineWord lift_coarse(const CoarseWord& w, FineSymbol start) {
    if (w.empty()) throw std::invalid_argument("lift_coarse: empty word");
    if (letter_of(start) != w.front())
        throw std::invalid_argument("lift_coarse: start letter mismatch");
    FineWord out{start};
    for (std::size_t i = 1; i < w.size(); ++i)
        out.push_back(make_symbol(w[i], w[i] == w[i - 1] ? 2 : 1));
    return out;
}

// ---------------------------------------------------------------------------
// Itineraries
// ---------------------------------------------------------------------------

struct ItineraryStep {
    PhasePoint point;  ///< pre-collision phase point, angle unwrapped
    Label coarse = Label::L;
    std::optional<FineSymbol> strip;  ///< vertical strip containing the point
    double strip_distance = 0.0;      ///< distance to the strip boundary
};

struct Itinerary {
    std::vector<ItineraryStep> steps;
    CoarseWord coarse;
    FineWord fine;  ///< vertical-strip symbols while the orbit stays in them
    std::optional<int> escaped_at;  ///< first index outside both rectangles
    std::optional<int> error_at;    ///< step where the dynamics failed
    std::string error;
};

namespace detail {

/// Which vertical strip contains a point, if any, together with the distance
/// to the nearest strip boundary. Points closer to a boundary than match_tol
/// stay unclassified.
inline std::optional<FineSymbol> classify_vertical(
    const horseshoe::StripFamily& fam, const PhasePoint& q, const CoinParams& p,
    double* distance_out) {
    using horseshoe::Orientation;
    for (const horseshoe::Strip& v : fam.vertical) {
        const horseshoe::Rect& r = fam.dom.rect(v.host);
        double th = horseshoe::detail::wrap_near(q.theta, r.center);
        if (std::abs(th - r.center) > r.half_width ||
            std::abs(q.theta_dot) > r.half_height)
            continue;
        // boundaries are graphs over theta_dot on a uniform row grid
        double t = (q.theta_dot + r.half_height) / (2.0 * r.half_height) *
                   (v.lower.size() - 1);
        long i = std::clamp(static_cast<long>(t), 0L,
                            static_cast<long>(v.lower.size()) - 2);
        double f = t - i;
        double left =
            v.lower[i].theta + f * (v.lower[i + 1].theta - v.lower[i].theta);
        double right =
            v.upper[i].theta + f * (v.upper[i + 1].theta - v.upper[i].theta);
        if (th < left || th > right) continue;
        double d = std::min({th - left, right - th,
                             r.half_height - std::abs(q.theta_dot)});
        if (distance_out) *distance_out = d;
        if (d < p.tol.match_tol) return std::nullopt;  // ambiguous hit
        return v.label;
    }
    return std::nullopt;
}

inline bool in_domain(const horseshoe::DomainPair& dom, const PhasePoint& q) {
    for (Label h : {Label::L, Label::R}) {
        const horseshoe::Rect& r = dom.rect(h);
        double th = horseshoe::detail::wrap_near(q.theta, r.center);
        if (std::abs(th - r.center) <= r.half_width &&
            std::abs(q.theta_dot) <= r.half_height)
            return true;
    }
    return false;
}

}  // namespace detail

/// Follow n collisions from a phase point, recording the coarse letter of
/// every collision and the vertical strip membership while the orbit stays
/// inside the domain rectangles.
inline Itinerary itinerary_of(const PhasePoint& p0, int n,
                              const horseshoe::StripFamily& fam,
                              const CoinParams& p) {
    Itinerary it;
    PhasePoint q = p0;
    bool fine_open = true;
    for (int i = 0; i < n; ++i) {
        ItineraryStep step;
        step.point = q;
        try {
            step.coarse = coarse_label(q, p);
        } catch (const BilliardError& e) {
            it.error_at = i;
            it.error = e.what();
            break;
        }
        it.coarse.push_back(step.coarse);
        if (!detail::in_domain(fam.dom, q)) {
            if (!it.escaped_at) it.escaped_at = i;
            fine_open = false;
        } else if (fine_open) {
            step.strip = detail::classify_vertical(fam, q, p, &step.strip_distance);
            if (step.strip)
                it.fine.push_back(*step.strip);
            else
                fine_open = false;
        }
        it.steps.push_back(step);
        if (i + 1 < n) {
            try {
                q = dynamics::return_map(q, p).point;
            } catch (const BilliardError& e) {
                it.error_at = i + 1;
                it.error = e.what();
                break;
            }
        }
    }
    return it;
}

// ---------------------------------------------------------------------------
// Realization search
// ---------------------------------------------------------------------------

struct RealizationResult {
    PhasePoint initial;
    int depth = 0;               ///< matched collisions
    double interval_width = 0.0; ///< subdivision interval at termination
    long nodes = 0;              ///< intervals examined
    FineWord lift;               ///< the guiding lift of the requested word
    Itinerary itinerary;         ///< diagnostics along the realized orbit
};

namespace detail {

struct SearchNode {
    double lo, hi;
    int match;       // coarse prefix length matched by the midpoint
    int fine_match;  // strip-symbol matches against the lift's tail
    bool operator<(const SearchNode& o) const {
        if (match != o.match) return match < o.match;
        if (fine_match != o.fine_match) return fine_match < o.fine_match;
        double w = hi - lo, ow = o.hi - o.lo;
        if (w != ow) return w < ow;
        return lo > o.lo;  // deterministic: prefer the leftmost interval
    }
};

}  // namespace detail

/// Locate an initial condition on the theta_dot = 0 transversal of the
/// starting rectangle whose coarse collision word matches w, by best-first
/// interval subdivision. The lift of w guides the search through its strip
/// tie-break; the interval width bounds the distance to the nested-strip
/// point the infinite word would pin down.
inline RealizationResult realize_sequence(const CoarseWord& w,
                                          const horseshoe::StripFamily& fam,
                                          const CoinParams& p,
                                          long node_budget = 2000) {
    if (w.empty()) throw std::invalid_argument("realize_sequence: empty word");
    const int n = static_cast<int>(w.size());
    const horseshoe::Rect& r0 = fam.dom.rect(w.front());
    FineWord lift = lift_coarse(w, make_symbol(w.front(), 2));

    auto evaluate = [&](double theta, int* fine_match) {
        Itinerary it = itinerary_of(PhasePoint{theta, 0.0}, n, fam, p);
        int match = 0;
        while (match < static_cast<int>(it.coarse.size()) &&
               it.coarse[match] == w[match])
            ++match;
        // strip agreement with the lift's tail (the strip of collision i
        // pins the letter of collision i+1)
        int fm = 0;
        while (fm < static_cast<int>(it.fine.size()) && fm + 1 < n &&
               fm < match && letter_of(it.fine[fm]) == w[fm + 1])
            ++fm;
        *fine_match = fm;
        return match;
    };

    std::priority_queue<detail::SearchNode> queue;
    long nodes = 0;
    auto push_interval = [&](double lo, double hi) -> std::optional<double> {
        double mid = 0.5 * (lo + hi);
        int fm = 0;
        int match = evaluate(mid, &fm);
        ++nodes;
        if (match >= n) return mid;
        queue.push(detail::SearchNode{lo, hi, match, fm});
        return std::nullopt;
    };

    std::optional<double> found = push_interval(r0.lo(), r0.hi());
    int best_prefix = 0;
    double width_at_end = r0.hi() - r0.lo();
    bool resolution_floor = false;
    while (!found) {
        if (queue.empty()) {
            if (resolution_floor)
                throw ResolutionExceeded(
                    "realize_sequence: interval width fell below 1e-15 before "
                    "matching; longest realized prefix " +
                        std::to_string(best_prefix),
                    best_prefix);
            throw NotFound("realize_sequence: search space exhausted; longest "
                           "realized prefix " +
                               std::to_string(best_prefix),
                           best_prefix);
        }
        detail::SearchNode top = queue.top();
        queue.pop();
        best_prefix = std::max(best_prefix, top.match);
        width_at_end = top.hi - top.lo;
        if (width_at_end < 1e-15) {
            resolution_floor = true;
            continue;
        }
        if (nodes >= node_budget)
            throw NotFound("realize_sequence: node budget exhausted; longest "
                           "realized prefix " +
                               std::to_string(best_prefix),
                           best_prefix);
        double mid = 0.5 * (top.lo + top.hi);
        found = push_interval(top.lo, mid);
        if (!found) found = push_interval(mid, top.hi);
    }

    RealizationResult res;
    res.initial = PhasePoint{*found, 0.0};
    res.depth = n;
    res.interval_width = width_at_end;
    res.nodes = nodes;
    res.lift = lift;
    res.itinerary = itinerary_of(res.initial, n, fam, p);
    return res;
}

}  // namespace symbolic
}  // namespace coinbilliard
