#pragma once
// Run configuration and the serialization formats shared by the CLI, the
// tests, and downstream plotting: a flat key=value config file, JSON
// summaries with versioned schema tags, and plain CSV for polylines and
// trajectories.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coinbilliard/core.hpp"
#include "coinbilliard/horseshoe.hpp"
#include "coinbilliard/physical.hpp"
#include "coinbilliard/symbolic.hpp"

namespace coinbilliard {
namespace io {

using nlohmann::json;

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    double energy = 1e4;
    double gravity = 1.0;
    double mass = 1.0;
    double length = 2.0;
    int grid_n = 256;
    double corner_tol = 1e-9;
    double event_tol = 1e-14;
    double match_tol = 1e-12;
    unsigned long seed = 12345;
    std::string out_dir = ".";
    std::string format = "csv";

    void validate() const {
        if (grid_n < 64) throw std::invalid_argument("grid-n must be >= 64");
        if (!(corner_tol > 0.0) || !(event_tol > 0.0) || !(match_tol > 0.0))
            throw std::invalid_argument("tolerances must be positive");
        if (format != "csv" && format != "json")
            throw std::invalid_argument("format must be csv or json");
    }

    CoinParams params() const {
        CoinParams p = CoinParams::make(energy, gravity, mass, length);
        p.tol.corner_tol = corner_tol;
        p.tol.event_tol = event_tol;
        p.tol.match_tol = match_tol;
        return p;
    }

    /// Flat key=value text, lossless for doubles.
    std::string to_kv() const {
        std::ostringstream os;
        os << "energy=" << format_double(energy) << "\n"
           << "gravity=" << format_double(gravity) << "\n"
           << "mass=" << format_double(mass) << "\n"
           << "length=" << format_double(length) << "\n"
           << "grid-n=" << grid_n << "\n"
           << "corner-tol=" << format_double(corner_tol) << "\n"
           << "event-tol=" << format_double(event_tol) << "\n"
           << "match-tol=" << format_double(match_tol) << "\n"
           << "seed=" << seed << "\n"
           << "out-dir=" << out_dir << "\n"
           << "format=" << format << "\n";
        return os.str();
    }

    static RunConfig from_kv(const std::string& text) {
        RunConfig c;
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config line without '=': " + line);
            std::string key = line.substr(0, eq);
            std::string val = line.substr(eq + 1);
            if (key == "energy") c.energy = std::stod(val);
            else if (key == "gravity") c.gravity = std::stod(val);
            else if (key == "mass") c.mass = std::stod(val);
            else if (key == "length") c.length = std::stod(val);
            else if (key == "grid-n") c.grid_n = std::stoi(val);
            else if (key == "corner-tol") c.corner_tol = std::stod(val);
            else if (key == "event-tol") c.event_tol = std::stod(val);
            else if (key == "match-tol") c.match_tol = std::stod(val);
            else if (key == "seed") c.seed = std::stoul(val);
            else if (key == "out-dir") c.out_dir = val;
            else if (key == "format") c.format = val;
            else throw std::invalid_argument("unknown config key: " + key);
        }
        return c;
    }
};

// ---------------------------------------------------------------------------
// JSON builders
// ---------------------------------------------------------------------------

inline json phase_point_json(const PhasePoint& q) {
    return json{{"theta", q.theta}, {"theta_dot", q.theta_dot}};
}

inline json strip_json(const horseshoe::Strip& s) {
    return json{
        {"label", symbol_name(s.label)},
        {"orientation",
         s.orientation == horseshoe::Orientation::horizontal ? "horizontal"
                                                             : "vertical"},
        {"host", std::string(1, label_char(s.host))},
        {"origin", std::string(1, label_char(s.origin))},
        {"mu", s.mu},
        {"width", s.width},
        {"vertices", s.lower.size()},
    };
}

inline json adjacency_json(const horseshoe::TransitionGraph& g) {
    json out = json::object();
    for (int i = 0; i < kNumSymbols; ++i) {
        json succ = json::array();
        for (int j = 0; j < kNumSymbols; ++j)
            if (g.adj[i][j]) succ.push_back(symbol_name(static_cast<FineSymbol>(j)));
        out[symbol_name(static_cast<FineSymbol>(i))] = succ;
    }
    return out;
}

inline json cm_report_json(const horseshoe::CMReport& r) {
    json cm2 = json::array();
    for (const auto& e : r.cm2)
        cm2.push_back(json{{"label", symbol_name(e.label)},
                           {"d_vertical", e.d_vertical},
                           {"d_horizontal", e.d_horizontal},
                           {"threshold", e.threshold},
                           {"pass", e.pass}});
    json cm3 = json::array();
    for (const auto& e : r.cm3)
        cm3.push_back(json{{"s", symbol_name(e.s)},
                           {"j", symbol_name(e.j)},
                           {"allowed", e.allowed},
                           {"nonempty", e.nonempty},
                           {"width", e.width},
                           {"width_ratio", e.width_ratio},
                           {"slope", e.slope},
                           {"gap", e.nonempty ? 0.0 : e.gap},
                           {"pass", e.pass}});
    return json{{"cm1", json{{"value", r.cm1_value}, {"pass", r.cm1_pass}}},
                {"cm2", cm2},
                {"cm2_pass", r.cm2_pass},
                {"cm3", cm3},
                {"cm3_pass", r.cm3_pass},
                {"pass", r.pass}};
}

inline json strips_summary_json(const horseshoe::StripFamily& fam,
                                const horseshoe::CMReport& rep,
                                const CoinParams& p) {
    json strips = json::array();
    for (const auto& s : fam.horizontal) strips.push_back(strip_json(s));
    for (const auto& s : fam.vertical) strips.push_back(strip_json(s));
    return json{{"schema", "coinbilliard/strips-summary/1"},
                {"energy", p.E},
                {"gravity", p.g},
                {"k", fam.dom.k},
                {"grid_n", fam.grid_n},
                {"domain",
                 json{{"half_width", fam.dom.left.half_width},
                      {"half_height", fam.dom.left.half_height},
                      {"centers", json::array({fam.dom.left.center,
                                               fam.dom.right.center})}}},
                {"strip_count_horizontal", fam.horizontal.size()},
                {"strip_count_vertical", fam.vertical.size()},
                {"mu_h", fam.mu_h},
                {"mu_v", fam.mu_v},
                {"strips", strips},
                {"cm", cm_report_json(rep)},
                {"adjacency", adjacency_json(rep.adjacency)}};
}

inline json itinerary_json(const symbolic::Itinerary& it) {
    json steps = json::array();
    for (std::size_t i = 0; i < it.steps.size(); ++i) {
        const auto& st = it.steps[i];
        json j{{"index", i},
               {"theta", st.point.theta},
               {"theta_dot", st.point.theta_dot},
               {"coarse", std::string(1, label_char(st.coarse))}};
        if (st.strip) {
            j["strip"] = symbol_name(*st.strip);
            j["strip_distance"] = st.strip_distance;
        }
        steps.push_back(j);
    }
    json out{{"coarse", symbolic::format_coarse(it.coarse)},
             {"fine", symbolic::format_fine(it.fine)},
             {"steps", steps}};
    if (it.escaped_at) out["escaped_at"] = *it.escaped_at;
    if (it.error_at) {
        out["error_at"] = *it.error_at;
        out["error"] = it.error;
    }
    return out;
}

inline json realization_json(const symbolic::RealizationResult& r,
                             const symbolic::CoarseWord& word, bool verified) {
    return json{{"schema", "coinbilliard/realization/1"},
                {"word", symbolic::format_coarse(word)},
                {"lift", symbolic::format_fine(r.lift)},
                {"initial", phase_point_json(r.initial)},
                {"depth", r.depth},
                {"interval_width", r.interval_width},
                {"nodes", r.nodes},
                {"verified", verified},
                {"itinerary", itinerary_json(r.itinerary)}};
}

inline json census_json(const std::vector<horseshoe::BifCensus>& censuses) {
    json rows = json::array();
    for (const auto& c : censuses) {
        json comps = json::array();
        for (const auto& comp : c.components)
            comps.push_back(json{{"host", std::string(1, label_char(comp.host))},
                                 {"shift", comp.shift},
                                 {"kind", comp.full ? "full" : "corner"},
                                 {"coverage", comp.coverage}});
        rows.push_back(json{{"factor", c.factor},
                            {"K", c.K},
                            {"full", c.full_count},
                            {"corner", c.corner_count},
                            {"components", comps}});
    }
    return json{{"schema", "coinbilliard/bifurcation/1"}, {"factors", rows}};
}

inline json crosscheck_json(const physical::EquivalenceReport& r) {
    json seeds = json::array();
    for (const auto& s : r.per_seed) {
        json j{{"initial", phase_point_json(s.initial)},
               {"steps", s.steps},
               {"label_agreements", s.label_agreements},
               {"max_state_deviation", s.max_state_deviation},
               {"free_run_match", s.free_run_match}};
        if (!s.stopped.empty()) j["stopped"] = s.stopped;
        seeds.push_back(j);
    }
    return json{{"schema", "coinbilliard/crosscheck/1"},
                {"energy", r.energy},
                {"mass", r.mass},
                {"length", r.length},
                {"gravity", r.gravity},
                {"seeds", r.seeds},
                {"collisions", r.collisions},
                {"max_state_deviation", r.max_state_deviation},
                {"label_agreement", r.label_agreement},
                {"per_seed", seeds}};
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

inline void write_polyline_csv(std::ostream& os, const horseshoe::Polyline& poly) {
    os << "theta,theta_dot\n";
    for (const PhasePoint& q : poly)
        os << format_double(q.theta) << "," << format_double(q.theta_dot) << "\n";
}

inline void write_physical_csv(std::ostream& os,
                               const physical::PhysicalTrajectory& traj) {
    os << "t,Y,theta,Y_dot,theta_dot,event,label\n";
    for (const auto& rec : traj.collisions) {
        os << format_double(rec.t) << "," << format_double(rec.pre.Y) << ","
           << format_double(rec.pre.theta) << ","
           << format_double(rec.pre.Y_dot) << ","
           << format_double(rec.pre.theta_dot) << ",collision,"
           << label_char(rec.side) << "\n";
    }
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << content;
}

}  // namespace io
}  // namespace coinbilliard
