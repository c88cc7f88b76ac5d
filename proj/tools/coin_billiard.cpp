// Command-line front end for the coin billiard: scale solving, trajectory
// simulation, strip extraction with the Conley-Moser report, the bifurcation
// census, realization of prescribed collision words, and the cross-check
// against the rigid-rod simulator.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "coinbilliard/core.hpp"
#include "coinbilliard/dynamics.hpp"
#include "coinbilliard/horseshoe.hpp"
#include "coinbilliard/io.hpp"
#include "coinbilliard/physical.hpp"
#include "coinbilliard/symbolic.hpp"

namespace cb = coinbilliard;
namespace hs = coinbilliard::horseshoe;
namespace sym = coinbilliard::symbolic;
namespace ph = coinbilliard::physical;
namespace io = coinbilliard::io;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNoBracket = 2;
constexpr int kExitDynamics = 3;
constexpr int kExitStripMismatch = 4;
constexpr int kExitNotFound = 5;
constexpr int kExitResolution = 6;
constexpr int kExitUsage = 64;

std::string out_path(const io::RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

int cmd_solve_k(const io::RunConfig& cfg) {
    cb::CoinParams p = cfg.params();
    if (!(p.E > p.g)) {
        std::cout << "no-bracket: energy " << p.E
                  << " does not reach the boundary peak (needs E > g)\n";
        return kExitNoBracket;
    }
    double lo = p.g * cb::kPi / 8.0, hi = p.g * cb::kPi / 2.0;
    try {
        double k = hs::solve_k(p.E, p);
        double residual = hs::corner_landing_residual(p.E, k, p);
        std::cout << "k = " << io::format_double(k) << "\n"
                  << "residual A(E,k) = " << io::format_double(residual) << "\n"
                  << "bracket = (" << io::format_double(lo) << ", "
                  << io::format_double(hi) << ")\n";
        return kExitOk;
    } catch (const cb::NoBracket& e) {
        std::cout << "no-bracket: " << e.what() << "\n";
        return kExitNoBracket;
    }
}

int cmd_simulate(const io::RunConfig& cfg, double theta, double theta_dot,
                 int collisions) {
    cb::CoinParams p = cfg.params();
    cb::PhasePoint q{theta, theta_dot};
    cb::require_valid(q, p);

    // strips give the fine-label column when the energy supports them
    std::optional<hs::StripFamily> fam;
    try {
        hs::DomainPair dom = hs::build_domains(p);
        hs::StripFamily f = hs::extract_horizontal_strips(dom, p, cfg.grid_n);
        hs::extract_vertical_strips(dom, f, p, cfg.grid_n);
        fam = std::move(f);
    } catch (const cb::BilliardError&) {
    }

    std::ostringstream csv;
    csv << "collision_index,theta,theta_dot,theta_wrapped,energy,coarse_label,"
           "fine_label\n";
    io::json rows = io::json::array();
    int exit_code = kExitOk;
    std::string error;
    // step in full state space: trajectories of wild orbits stay valid even
    // where the downward-section chart does not apply
    cb::FullState state = cb::full_state_from(q, p);
    for (int i = 0; i < collisions; ++i) {
        cb::PhasePoint here{state.theta, state.theta_dot};
        std::string fine;
        double dist = 0.0;
        if (fam && state.y_dot < 0.0) {
            auto strip = sym::detail::classify_vertical(*fam, here, p, &dist);
            if (strip) fine = cb::symbol_name(*strip);
        }
        char coarse = std::sin(state.theta) > 0.0 ? 'L' : 'R';
        double energy = cb::energy_of(state, p);
        csv << i << "," << io::format_double(here.theta) << ","
            << io::format_double(here.theta_dot) << ","
            << io::format_double(cb::wrap_theta(here.theta)) << ","
            << io::format_double(energy) << "," << coarse << "," << fine << "\n";
        rows.push_back(io::json{{"collision_index", i},
                                {"theta", here.theta},
                                {"theta_dot", here.theta_dot},
                                {"theta_wrapped", cb::wrap_theta(here.theta)},
                                {"energy", energy},
                                {"coarse_label", std::string(1, coarse)},
                                {"fine_label", fine}});
        if (i + 1 < collisions) {
            try {
                state = cb::dynamics::step_full(state, p);
            } catch (const cb::BilliardError& e) {
                error = e.what();
                std::cerr << "dynamics error at collision " << i + 1 << ": "
                          << error << "\n";
                exit_code = kExitDynamics;
                break;
            }
        }
    }

    if (cfg.format == "json") {
        io::json out{{"schema", "coinbilliard/trajectory/1"},
                     {"energy", p.E},
                     {"rows", rows}};
        if (!error.empty()) out["error"] = error;
        io::write_file(out_path(cfg, "trajectory.json"), out.dump(2) + "\n");
        std::cout << "wrote " << out_path(cfg, "trajectory.json") << "\n";
    } else {
        io::write_file(out_path(cfg, "trajectory.csv"), csv.str());
        std::cout << "wrote " << out_path(cfg, "trajectory.csv") << "\n";
    }
    return exit_code;
}

int cmd_strips(const io::RunConfig& cfg) {
    cb::CoinParams p = cfg.params();
    hs::DomainPair dom = hs::build_domains(p);
    hs::StripFamily fam;
    try {
        fam = hs::extract_horizontal_strips(dom, p, cfg.grid_n);
        hs::extract_vertical_strips(dom, fam, p, cfg.grid_n);
    } catch (const cb::StripCountMismatch& e) {
        std::cerr << e.what() << "\n";
        auto census = hs::scan_bifurcation(p, {1.0});
        io::write_file(out_path(cfg, "census.json"),
                       io::census_json(census).dump(2) + "\n");
        std::cerr << "census written to " << out_path(cfg, "census.json") << "\n";
        return kExitStripMismatch;
    }
    hs::CMReport rep = hs::check_conley_moser(fam, p);
    hs::transition_graph(fam, p);

    for (const hs::Strip& s : fam.horizontal) {
        for (int side = 0; side < 2; ++side) {
            std::ostringstream os;
            io::write_polyline_csv(os, side == 0 ? s.lower : s.upper);
            io::write_file(out_path(cfg, "strip_H_" + cb::symbol_name(s.label) +
                                             (side == 0 ? "_lower" : "_upper") +
                                             ".csv"),
                           os.str());
        }
    }
    for (const hs::Strip& s : fam.vertical) {
        for (int side = 0; side < 2; ++side) {
            std::ostringstream os;
            io::write_polyline_csv(os, side == 0 ? s.lower : s.upper);
            io::write_file(out_path(cfg, "strip_V_" + cb::symbol_name(s.label) +
                                             (side == 0 ? "_left" : "_right") +
                                             ".csv"),
                           os.str());
        }
    }
    // image-of-domain plot data: the four edge images of each rectangle
    for (cb::Label origin : {cb::Label::L, cb::Label::R}) {
        const hs::Rect& r = dom.rect(origin);
        struct EdgeSpec {
            const char* name;
            cb::PhasePoint a, b;
        } edges[] = {
            {"top", {r.lo(), r.half_height}, {r.hi(), r.half_height}},
            {"bottom", {r.lo(), -r.half_height}, {r.hi(), -r.half_height}},
            {"left", {r.lo(), -r.half_height}, {r.lo(), r.half_height}},
            {"right", {r.hi(), -r.half_height}, {r.hi(), r.half_height}},
        };
        for (const auto& e : edges) {
            hs::ImagePolyline img =
                hs::forward_image_polyline({e.a, e.b}, p, 2e-3);
            std::ostringstream os;
            io::write_polyline_csv(os, img.points);
            io::write_file(out_path(cfg, std::string("image_D") +
                                             cb::label_char(origin) + "_" +
                                             e.name + ".csv"),
                           os.str());
        }
    }
    io::json summary = io::strips_summary_json(fam, rep, p);
    io::write_file(out_path(cfg, "summary.json"), summary.dump(2) + "\n");

    std::cout << "strips: " << fam.horizontal.size() << " horizontal, "
              << fam.vertical.size() << " vertical\n"
              << "mu_h = " << fam.mu_h << ", mu_v = " << fam.mu_v
              << ", mu_h*mu_v = " << fam.mu_h * fam.mu_v << "\n"
              << "conley-moser: " << (rep.pass ? "pass" : "FAIL") << "\n"
              << "wrote " << out_path(cfg, "summary.json") << "\n";
    return rep.pass ? kExitOk : kExitDynamics;
}

int cmd_bifurcation(const io::RunConfig& cfg, const std::vector<double>& factors) {
    cb::CoinParams p = cfg.params();
    auto censuses = hs::scan_bifurcation(p, factors);
    io::write_file(out_path(cfg, "bifurcation.json"),
                   io::census_json(censuses).dump(2) + "\n");
    std::cout << "factor,K,full,corner\n";
    for (const auto& c : censuses)
        std::cout << c.factor << "," << c.K << "," << c.full_count << ","
                  << c.corner_count << "\n";
    std::cout << "wrote " << out_path(cfg, "bifurcation.json") << "\n";
    return kExitOk;
}

int cmd_realize(const io::RunConfig& cfg, const std::string& word, long budget) {
    cb::CoinParams p = cfg.params();
    sym::CoarseWord w = sym::parse_coarse(word);
    hs::DomainPair dom = hs::build_domains(p);
    hs::StripFamily fam = hs::extract_horizontal_strips(dom, p, cfg.grid_n);
    hs::extract_vertical_strips(dom, fam, p, cfg.grid_n);
    try {
        sym::RealizationResult res = sym::realize_sequence(w, fam, p, budget);
        bool verified = res.itinerary.coarse == w;
        io::write_file(out_path(cfg, "realization.json"),
                       io::realization_json(res, w, verified).dump(2) + "\n");
        std::cout << "initial = (" << io::format_double(res.initial.theta)
                  << ", " << io::format_double(res.initial.theta_dot) << ")\n"
                  << "realized prefix = " << res.depth << " of " << w.size()
                  << "\n"
                  << "interval width = " << res.interval_width << "\n"
                  << "verification: " << (verified ? "pass" : "FAIL") << "\n"
                  << "wrote " << out_path(cfg, "realization.json") << "\n";
        return verified ? kExitOk : kExitDynamics;
    } catch (const cb::ResolutionExceeded& e) {
        std::cerr << e.what() << "\n";
        return kExitResolution;
    } catch (const cb::NotFound& e) {
        std::cerr << e.what() << "\n";
        return kExitNotFound;
    }
}

int cmd_crosscheck(const io::RunConfig& cfg, int collisions) {
    cb::CoinParams phys = cfg.params();
    ph::EquivalenceReport rep =
        ph::crosscheck(phys, cfg.energy, 20, collisions, cfg.seed);
    io::write_file(out_path(cfg, "crosscheck.json"),
                   io::crosscheck_json(rep).dump(2) + "\n");
    std::cout << "seeds = " << rep.seeds << ", collisions = " << rep.collisions
              << "\n"
              << "label agreement = " << rep.label_agreement << "\n"
              << "max per-collision state deviation = "
              << rep.max_state_deviation << "\n"
              << "wrote " << out_path(cfg, "crosscheck.json") << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bouncing-coin billiard: return map, horseshoe strips, and "
                 "collision-word realization"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand
    app.set_config("--config");

    io::RunConfig cfg;
    app.add_option("--energy", cfg.energy, "total energy (rescaled units)");
    app.add_option("--gravity", cfg.gravity, "gravity");
    app.add_option("--mass", cfg.mass, "total mass");
    app.add_option("--length", cfg.length, "rod length");
    app.add_option("--grid-n", cfg.grid_n, "strip sampling resolution (>= 64)");
    app.add_option("--corner-tol", cfg.corner_tol, "corner exclusion tolerance");
    app.add_option("--event-tol", cfg.event_tol, "event bisection tolerance");
    app.add_option("--match-tol", cfg.match_tol, "strip membership tolerance");
    app.add_option("--seed", cfg.seed, "random seed");
    app.add_option("--out-dir", cfg.out_dir, "output directory")
        ->envname("COINBILLIARD_OUT");
    app.add_option("--format", cfg.format, "output format: csv or json");

    auto* sk = app.add_subcommand("solve-k", "solve the rectangle scale k(E)");

    auto* sim = app.add_subcommand("simulate", "follow collisions from a point");
    double theta = cb::kPi / 2, theta_dot = 0.0;
    int collisions = 100;
    sim->add_option("--theta", theta, "initial angle");
    sim->add_option("--theta-dot", theta_dot, "initial angular velocity");
    sim->add_option("--collisions", collisions, "number of collisions");

    auto* st = app.add_subcommand("strips", "extract strips and check the "
                                            "Conley-Moser conditions");

    auto* bif = app.add_subcommand("bifurcation", "census of the domain image "
                                                  "at scaled rectangle sizes");
    std::vector<double> factors{0.9, 1.0, 1.05};
    bif->add_option("--factors", factors, "K/k ratios to scan");

    auto* rl = app.add_subcommand("realize", "find an initial condition with a "
                                             "prescribed collision word");
    std::string word;
    long budget = 2000;
    rl->add_option("--word", word, "coarse word over {L, R}")->required();
    rl->add_option("--budget", budget, "subdivision node budget");

    auto* cc = app.add_subcommand("crosscheck", "compare the billiard against "
                                                "the rigid-rod simulator");
    int cc_collisions = 100;
    cc->add_option("--collisions", cc_collisions, "collisions per seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        cfg.validate();
        if (sk->parsed()) return cmd_solve_k(cfg);
        if (sim->parsed()) return cmd_simulate(cfg, theta, theta_dot, collisions);
        if (st->parsed()) return cmd_strips(cfg);
        if (bif->parsed()) return cmd_bifurcation(cfg, factors);
        if (rl->parsed()) return cmd_realize(cfg, word, budget);
        if (cc->parsed()) return cmd_crosscheck(cfg, cc_collisions);
    } catch (const cb::NoBracket& e) {
        std::cerr << e.what() << "\n";
        return kExitNoBracket;
    } catch (const cb::StripCountMismatch& e) {
        std::cerr << e.what() << "\n";
        return kExitStripMismatch;
    } catch (const cb::NotFound& e) {
        std::cerr << e.what() << "\n";
        return kExitNotFound;
    } catch (const cb::ResolutionExceeded& e) {
        std::cerr << e.what() << "\n";
        return kExitResolution;
    } catch (const cb::BilliardError& e) {
        std::cerr << e.what() << "\n";
        return kExitDynamics;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitOk;
}
