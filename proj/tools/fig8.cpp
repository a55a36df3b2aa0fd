// fig8: verification suites, basin maps, coding runs, flow shooting and
// Bowen-eye statistics from the command line.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "fig8/chasing.hpp"
#include "fig8/flow_glue.hpp"
#include "fig8/statistics.hpp"

using namespace fig8;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct RunConfig {
    std::string preset = "default";
    std::string config;
    std::uint64_t seed = 1;
    std::string out = ".";
    bool json_out = false;
    std::vector<std::string> suites;
    bool with_flow = false;
    std::int64_t n = 0;
    std::int64_t samples = 0;
    int kmax = 6;
    int resolution = 48;
    int budget = 32;
    std::string map;
    std::string box = "eps";
    std::int64_t level = -1;
    std::string symbol = "l,t,6";
    bool probe = true;
    double target = 0;
};

// Preset first, then inline overrides from the JSON file. Primary constants
// re-derive a, b, delta1 and p unless those are given explicitly.
Params load_params(const RunConfig& rc) {
    Params p = preset(rc.preset);
    if (rc.config.empty()) return p;
    std::ifstream in(rc.config);
    if (!in) throw ConfigError("cannot open config " + rc.config);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("preset")) p = preset(j["preset"].get<std::string>());
    const json& o = j.contains("params") ? j["params"] : j;
    std::map<std::string, double*> primary = {
        {"sigma", &p.sigma}, {"a_tilde", &p.a_tilde}, {"b_tilde", &p.b_tilde}, {"eps1", &p.eps1},
        {"kappa", &p.kappa}, {"beta_xi2", &p.beta_xi2}, {"q1", &p.q1},
        {"cantor_measure_fraction", &p.cantor_measure_fraction}};
    std::map<std::string, double*> derived = {{"a", &p.a}, {"b", &p.b}, {"delta1", &p.delta1}, {"p", &p.p}};
    std::map<std::string, int*> ints = {{"n0", &p.n0}, {"k0", &p.k0}, {"cantor_depth", &p.cantor_depth}};
    for (auto& [k, v] : o.items()) {
        if (k == "preset" || k == "params") continue;
        if (!v.is_number()) throw ConfigError("config key " + k + " must be a number");
        if (primary.count(k)) *primary[k] = v.get<double>();
        else if (ints.count(k)) {
            if (!v.is_number_integer()) throw ConfigError("config key " + k + " must be an integer");
            *ints[k] = v.get<int>();
        } else if (!derived.count(k))
            throw ConfigError("unknown config key " + k);
    }
    bool touched = false;
    for (auto& [k, _] : primary) touched = touched || o.contains(k);
    if (touched) p.derive();
    for (auto& [k, ptr] : derived)
        if (o.contains(k)) *ptr = o[k].get<double>();
    return p;
}

json params_json(const Params& p) {
    return {{"sigma", p.sigma}, {"a_tilde", p.a_tilde}, {"b_tilde", p.b_tilde}, {"a", p.a}, {"b", p.b},
            {"eps1", p.eps1}, {"delta1", p.delta1}, {"n0", p.n0}, {"k0", p.k0}, {"p", p.p},
            {"kappa", p.kappa}, {"beta_xi2", p.beta_xi2}, {"q1", p.q1},
            {"cantor_measure_fraction", p.cantor_measure_fraction}, {"cantor_depth", p.cantor_depth}};
}

ScaledPoint local(double x, double tau, std::int64_t n) { return ScaledPoint{x, tau, n, Chart::Local, 0}; }

struct Suite {
    bool pass = true;
    json detail = json::object();
};

// ---------------------------------------------------------------------------
// verify suites

Suite suite_params(const Params& p, const RunConfig&) {
    Suite s;
    ValidationReport r = validate_full(p);
    json items = json::array();
    for (const auto& c : r.items)
        items.push_back({{"name", c.name}, {"pass", c.pass}, {"slack", c.slack}, {"gating", c.gating}});
    s.pass = r.pass();
    s.detail["items"] = items;
    return s;
}

Suite suite_rescale(const Params& p, const RunConfig& rc) {
    Suite s;
    CounterRng rng(rc.seed, 1);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        std::int64_t n = p.n0 + static_cast<std::int64_t>(rng.next() % 41);
        Rescaler::UV w{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
        auto back = rescale(n, unrescale(n, w, p), p);
        worst = std::max({worst, std::abs(back.u - w.u), std::abs(back.v - w.v)});
    }
    s.pass = worst < 1e-12;
    s.detail = {{"points", 10000}, {"max_roundtrip_error", worst}};
    return s;
}

Suite suite_jacobian(const Params& p, const RunConfig& rc) {
    Suite s;
    Model M(p);
    CounterRng rng(rc.seed, 2);
    double worst = 0;
    int nonpositive = 0;
    const double sg = p.sigma;
    for (int i = 0; i < 500; ++i) {
        double sign = i % 2 ? 1.0 : -1.0;
        // the h1/h2 strip just before landing
        double X = rng.uniform(sg * sg * (p.a - 0.005), sg * sg * (p.sigma + 0.05)), y = rng.uniform(0.002, 0.02);
        auto F = [&](double x, double yy) {
            StepResult r = M.f1_step(ScaledPoint::from_raw(x, yy, sg));
            return Vec2{r.next.x, r.next.y(sg)};
        };
        StepResult r = M.f1_step(ScaledPoint::from_raw(sign * X, sign * y, sg));
        const double hx = 1e-6, hy = 1e-8;
        Vec2 xp = F(sign * X + hx, sign * y), xm = F(sign * X - hx, sign * y);
        Vec2 yp = F(sign * X, sign * y + hy), ym = F(sign * X, sign * y - hy);
        double J[4] = {(xp.x - xm.x) / (2 * hx), (yp.x - ym.x) / (2 * hy), (xp.y - xm.y) / (2 * hx),
                       (yp.y - ym.y) / (2 * hy)};
        double A[4] = {r.jacobian.a, r.jacobian.b, r.jacobian.c, r.jacobian.d};
        double scale = std::max({std::abs(A[0]), std::abs(A[1]), std::abs(A[2]), std::abs(A[3])});
        for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(A[k] - J[k]) / scale);
        if (!(r.jacobian.det() > 0)) ++nonpositive;
    }
    s.pass = worst < 1e-5 && nonpositive == 0;
    s.detail = {{"points", 500}, {"max_relative_error", worst}, {"nonpositive_det", nonpositive}};
    return s;
}

Suite suite_trapping(const Params& p, const RunConfig&) {
    Suite s;
    Model M(p);
    const TrapRegion& Q = M.Q;
    double worst = 1e300;
    for (int side = 0; side < 4; ++side)
        for (int i = 0; i < 100; ++i) {
            double t = (i + 0.5) / 100;
            double x = side < 2 ? Q.x.lo + t * Q.x.width() : (side == 2 ? Q.x.lo : Q.x.hi);
            double y = side >= 2 ? Q.y.lo + t * Q.y.width() : (side == 0 ? Q.y.lo : Q.y.hi);
            ScaledPoint q = ScaledPoint::from_raw(x, y, p.sigma);
            for (int k = 0; k < p.n0 + p.k0 + 1; ++k) q = M.f1_step(q).next;
            worst = std::min(worst, q.chart == Chart::Local ? Q.margin(q.x, q.y(p.sigma)) : -1.0);
        }
    s.pass = worst > 0;
    s.detail = {{"boundary_points", 400}, {"min_margin", worst}};
    return s;
}

std::string color_after(const Model& M, ScaledPoint q, int max_returns) {
    ReturnEngine E(M);
    for (int r = 0; r < max_returns; ++r) {
        ReturnResult rr = E.g_return(MapId::F1, q);
        if (rr.kind == ReturnResult::EscapedQ) return "Q";
        q = rr.landing;
        if (M.in_Q(q)) return "Q";
        auto s = in_eps_tower(q, M.prm);
        if (s) return color_name(region_classify(*s, M.prm).color);
    }
    return "lost";
}

Suite suite_regions(const Params& p, const RunConfig& rc) {
    Suite s;
    Model M(p);
    std::map<Color, std::set<std::string>> allowed = {
        {Color::Pink, {"Red", "Q"}}, {Color::Red, {"Q"}}, {Color::Green, {"Blue", "Pink", "Red", "Q"}},
        {Color::Blue, {"Blue", "Pink", "Red", "Q"}}, {Color::S, {"S"}}};
    const double ax = 2 / (p.b - p.a), bx = (p.a + p.b) / (p.b - p.a), e = p.eps_tilde();
    CounterRng rng(rc.seed, 3);
    std::map<Color, int> counts;
    std::map<std::string, int> violations;
    const int per_region = 1000;
    for (int guard = 0; guard < 40000000; ++guard) {
        bool done = true;
        for (auto& [c, _] : allowed) done = done && counts[c] >= per_region;
        if (done) break;
        double u = rng.uniform(-1 - 3 * e, 1 + 3 * e), w = rng.uniform(-1 - 3 * e, 1 + 3 * e);
        Color c = region_classify_rescaled(u, w, p).color;
        if (!allowed.count(c) || counts[c] >= per_region) continue;
        ++counts[c];
        ScaledPoint q = local((u + bx) / ax, (w + bx) / ax, p.n0 + 1 + (counts[c] % 8));
        std::string got = color_after(M, q, 8);
        if (!allowed[c].count(got)) {
            ++violations[std::string(color_name(c)) + "->" + got];
            s.pass = false;
        }
    }
    json cj = json::object();
    for (auto& [c, n] : counts) {
        cj[color_name(c)] = n;
        if (n < per_region) s.pass = false;
    }
    s.detail = {{"sampled", cj}, {"violations", violations}};
    return s;
}

Suite suite_cone(const Params& p, const RunConfig& rc) {
    Suite s;
    Profiles P(p);
    BlueReturn<f128> br(P);
    CounterRng rng(rc.seed, 4);
    int points = 0, cone_bad = 0, incl_bad = 0;
    double min_incl = 1e300;
    const double tests[][2] = {{1, 0}, {1, 0.5}, {1, -0.5}, {-1, 0.25}};
    for (int tries = 0; points < 300 && tries < 100000; ++tries) {
        H h = rng.uniform() < 0.5 ? H::l : H::r;
        V v = rng.uniform() < 0.5 ? V::t : V::b;
        std::int64_t n = n1(h, p) + static_cast<std::int64_t>(rng.next() % 4);
        Rect R = blue_rect(h, v, p);
        f128 x = rng.uniform(R.x.lo, R.x.hi), t = rng.uniform(R.tau.lo, R.tau.hi);
        auto o = br.apply(v, n, x, t);
        auto eta = locate_blue<f128>(o.X, o.tau, 2 * n, p);
        if (!eta) continue;
        ++points;
        f128 scale = br.sig(2 * n - eta->n);
        double A = static_cast<double>(o.dXdx), B = static_cast<double>(o.dXdt);
        double C = static_cast<double>(o.dTdx / scale), D = static_cast<double>(o.dTdt / scale);
        double det = A * D - B * C;
        for (const auto& w : tests) {
            double l = (D * w[0] - B * w[1]) / det, m = (-C * w[0] + A * w[1]) / det;
            if (!(std::abs(l) >= 2 * std::abs(m))) ++cone_bad;
        }
        double incl = static_cast<double>(br.h2_inclination(v, n, x, t) / scale);
        min_incl = std::min(min_incl, incl);
        if (!(incl >= 2)) ++incl_bad;
    }
    s.pass = points > 0 && cone_bad == 0 && incl_bad == 0;
    s.detail = {{"points", points}, {"cone_violations", cone_bad}, {"min_e1_inclination", min_incl}};
    return s;
}

Suite suite_heights(const Params& p, const RunConfig& rc) {
    Suite s;
    Profiles P(p);
    Chaser C(P);
    ChaseConfig cfg;
    cfg.k_max = rc.kmax;
    cfg.resolution = rc.resolution;
    cfg.node_budget = rc.budget;
    json rows = json::array();
    for (H h : {H::l, H::r})
        for (V v : {V::t, V::b}) {
            BlueSymbol th{h, v, n1(h, p) + 1, false};
            ChaseResult R = C.chase(th, cfg);
            json ratios = json::array();
            bool ok = R.geometry_ok && R.max_inclination < 0.5;
            for (int k = 0; k <= cfg.k_max; ++k) {
                double r = height_ratio_sum(R, k);
                ratios.push_back(r);
                ok = ok && r <= std::pow(2.0, -k) * 1.05;
            }
            s.pass = s.pass && ok;
            rows.push_back({{"symbol", symbol_string(th)}, {"pass", ok}, {"height_ratio_sum", ratios},
                            {"max_inclination", R.max_inclination}, {"error", R.error}});
        }
    s.detail = {{"k_max", cfg.k_max}, {"resolution", cfg.resolution}, {"symbols", rows}};
    return s;
}

Suite suite_tau(const Params& p, const RunConfig& rc) {
    Suite s;
    CounterRng rng(rc.seed, 5);
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
        TauState a{rng.uniform(p.a, p.b), rng.uniform(p.a, p.b), Level::from(p.n0), 0}, c = a;
        for (int d = 0; d < 50 && c.x == a.x && c.tau == a.tau; ++d)
            for (int k = 0; k < 4; ++k) c = g0_return(c, p);
        if (c.x != a.x || c.tau != a.tau) ++bad;
    }
    s.pass = bad == 0;
    s.detail = {{"seeds", 1000}, {"cycles", 50}, {"deviations", bad}};
    return s;
}

Suite suite_escape(const Params& p, const RunConfig& rc) {
    Suite s;
    Profiles P(p);
    CounterRng rng(rc.seed, 6);
    int k_seeds = 0, gap = 0, matched = 0, mismatched = 0, capped = 0;
    const std::int64_t cap = 256;
    for (int i = 0; i < 1000; ++i) {
        double x = rng.uniform(p.a, p.b), t = rng.uniform(p.a, p.b);
        TauState st{x, t, Level::from(p.n0), 0};
        if (P.K.in_K(x)) {
            ++k_seeds;
            for (int r = 0; r < 400; ++r) st = g2_tower_return(st, P);
            if (st.x != x || st.tau != t) ++mismatched;
            continue;
        }
        ++gap;
        std::int64_t d_map = -1;
        for (std::int64_t d = 0; d < cap; ++d) {
            if (st.tau < p.a || st.tau > p.b) {
                d_map = d;
                break;
            }
            for (int k = 0; k < 4; ++k) st = g2_tower_return(st, P);
        }
        EscapeOutcome eo = escape_recursion(P, x, t, Level::from(p.n0), cap);
        if (d_map < 0) {
            ++capped;
            if (eo.exited && eo.exit_cycle < cap) ++mismatched;
        } else {
            (eo.exited && eo.exit_cycle == d_map ? matched : mismatched)++;
        }
    }
    s.pass = mismatched == 0;
    s.detail = {{"k_seeds", k_seeds}, {"gap_seeds", gap}, {"matched", matched}, {"mismatched", mismatched},
                {"beyond_cap", capped}, {"cap_cycles", cap}};
    return s;
}

Suite suite_flow(const Params& p, const RunConfig&) {
    Suite s;
    GlueConfig c = GlueConfig::from_sigma(p.sigma);
    ShotResult r = shoot_homoclinic(c, c.delta0() / 2);
    s.pass = r.closure < 1e-6;
    s.detail = {{"tstar_u", r.tstar_u}, {"tstar_s", r.tstar_s}, {"closure", r.closure}};
    return s;
}

using SuiteFn = std::function<Suite(const Params&, const RunConfig&)>;

const std::vector<std::pair<std::string, SuiteFn>>& all_suites() {
    static const std::vector<std::pair<std::string, SuiteFn>> v = {
        {"params", suite_params}, {"rescale", suite_rescale}, {"jacobian", suite_jacobian},
        {"trapping", suite_trapping}, {"regions", suite_regions}, {"cone", suite_cone},
        {"heights", suite_heights}, {"tau", suite_tau}, {"escape", suite_escape}, {"flow", suite_flow}};
    return v;
}

void emit(const RunConfig& rc, const json& report, const std::string& text) {
    if (rc.json_out) std::cout << report.dump(2) << "\n";
    else std::cout << text;
}

fs::path out_path(const RunConfig& rc, const std::string& name) {
    fs::create_directories(rc.out);
    return fs::path(rc.out) / name;
}

// ---------------------------------------------------------------------------
// commands

int cmd_verify(const RunConfig& rc) {
    Params p = load_params(rc);
    std::vector<std::string> run = rc.suites;
    if (run.empty())
        for (auto& [name, _] : all_suites())
            if (name != "flow" || rc.with_flow) run.push_back(name);
    for (const auto& name : run) {
        bool known = false;
        for (auto& [n, _] : all_suites()) known = known || n == name;
        if (!known) throw ConfigError("unknown suite: " + name);
    }
    json report = {{"command", "verify"}, {"preset", rc.preset}, {"seed", rc.seed}, {"params", params_json(p)}};
    json suites = json::array();
    std::ostringstream text;
    bool all_pass = true;
    bool params_ok = validate_full(p).pass();
    for (const auto& [name, fn] : all_suites()) {
        if (std::find(run.begin(), run.end(), name) == run.end()) continue;
        Suite s;
        if (name != "params" && !params_ok) {
            s.pass = false;
            s.detail = {{"skipped", "parameters invalid"}};
        } else {
            try {
                s = fn(p, rc);
            } catch (const std::exception& e) {
                s.pass = false;
                s.detail = {{"error", e.what()}};
            }
        }
        all_pass = all_pass && s.pass;
        suites.push_back({{"name", name}, {"pass", s.pass}, {"detail", s.detail}});
        text << (s.pass ? "PASS " : "FAIL ") << name << " " << s.detail.dump() << "\n";
    }
    report["suites"] = suites;
    report["pass"] = all_pass;
    emit(rc, report, text.str());
    return all_pass ? 0 : 1;
}

Box parse_box(const std::string& name, std::int64_t level, const Params& p) {
    static const std::map<std::string, BoxKind> kinds = {{"stable", BoxKind::Stable},
                                                         {"extended", BoxKind::ExtendedStable},
                                                         {"eps", BoxKind::EpsBox},
                                                         {"unstable", BoxKind::Unstable},
                                                         {"exterior", BoxKind::ExteriorStable}};
    auto it = kinds.find(name);
    if (it == kinds.end()) throw ConfigError("unknown box: " + name);
    return make_box(it->second, level < 0 ? p.n0 : level, p);
}

int cmd_basin(const RunConfig& rc) {
    Params p = load_params(rc);
    if (!validate_full(p).pass()) throw ConfigError("parameters fail validation");
    Model M(p);
    MapId map = parse_map(rc.map.empty() ? "F2" : rc.map);
    Box B = parse_box(rc.box, rc.level, p);
    std::int64_t n = rc.samples > 0 ? rc.samples : 100000;
    BasinEstimate e = basin_sample(M, map, B, n, rc.seed);
    {
        std::ofstream csv(out_path(rc, "basin.csv"));
        csv << "ix,iy,x_lo,x_hi,tau_lo,tau_hi,samples,in_basin\n";
        csv.precision(17);
        for (int iy = 0; iy < e.grid_y; ++iy)
            for (int ix = 0; ix < e.grid_x; ++ix) {
                std::size_t k = static_cast<std::size_t>(iy) * e.grid_x + ix;
                double x0 = B.x.lo + B.x.width() * ix / e.grid_x, x1 = B.x.lo + B.x.width() * (ix + 1) / e.grid_x;
                double t0 = B.tau.lo + B.tau.width() * iy / e.grid_y;
                double t1 = B.tau.lo + B.tau.width() * (iy + 1) / e.grid_y;
                csv << ix << "," << iy << "," << x0 << "," << x1 << "," << t0 << "," << t1 << "," << e.cell_total[k]
                    << "," << e.cell_basin[k] << "\n";
            }
    }
    json report = {{"command", "basin"},  {"map", map_name(map)},     {"box", rc.box},
                   {"level", B.level},    {"seed", rc.seed},          {"samples", e.samples},
                   {"in_basin", e.in_basin}, {"undecided", e.undecided}, {"fraction", e.fraction},
                   {"ci95", {e.ci_lo, e.ci_hi}}, {"predicted_fraction", nullptr}, {"by_verdict", e.by_verdict}};
    // the K-column prediction belongs to the maps that carry h3
    if (map == MapId::F2) report["predicted_fraction"] = predicted_basin_fraction(M.pr, B);
    std::ostringstream text;
    text << "basin " << map_name(map) << " on " << rc.box << " level " << B.level << ": fraction " << e.fraction
         << " CI [" << e.ci_lo << ", " << e.ci_hi << "]";
    if (!report["predicted_fraction"].is_null()) text << ", predicted " << report["predicted_fraction"].get<double>();
    text << "\n";
    if (rc.probe) {
        auto rep = nowhere_density_probe(M, map, B, {(p.b - p.a) / 10, (p.b - p.a) / 30}, rc.seed);
        json probes = json::array();
        for (const auto& r : rep) {
            probes.push_back({{"radius", r.radius}, {"disks", r.disks}, {"basin_hitting", r.basin_hitting},
                              {"successes", r.successes}, {"success_rate", r.success_rate},
                              {"skipped", r.skipped}, {"warning", r.warning}});
            text << "probe r=" << r.radius << ": " << r.successes << "/" << r.basin_hitting << "\n";
        }
        report["density_probe"] = probes;
    }
    text << "cells written to " << out_path(rc, "basin.csv").string() << "\n";
    emit(rc, report, text.str());
    return 0;
}

BlueSymbol parse_symbol(const std::string& s, const Params& p) {
    std::stringstream ss(s);
    std::string h, v, n;
    if (!std::getline(ss, h, ',') || !std::getline(ss, v, ',') || !std::getline(ss, n))
        throw ConfigError("symbol must look like l,t,6");
    if ((h != "l" && h != "r") || (v != "t" && v != "b")) throw ConfigError("bad symbol " + s);
    BlueSymbol th{h == "l" ? H::l : H::r, v == "t" ? V::t : V::b, std::stoll(n), false};
    if (th.n < n1(th.h, p)) throw ConfigError("symbol level below n1");
    return th;
}

int cmd_code(const RunConfig& rc) {
    Params p = load_params(rc);
    if (!validate_full(p).pass()) throw ConfigError("parameters fail validation");
    Model M(p);
    Chaser C(M.pr);
    BlueSymbol th = parse_symbol(rc.symbol, p);
    ChaseConfig cfg;
    cfg.k_max = rc.kmax;
    cfg.resolution = rc.resolution;
    cfg.node_budget = rc.budget;
    ChaseResult R = C.chase(th, cfg);
    json nodes = json::array();
    for (const auto& nd : R.nodes) {
        json path = json::array();
        for (const auto& s : nd.path) path.push_back(symbol_string(s));
        nodes.push_back({{"path", path}, {"depth", nd.depth}, {"height", nd.height},
                         {"inclination", nd.inclination}, {"parent", nd.parent}, {"expanded", nd.expanded}});
    }
    json ratios = json::array();
    bool ok = R.geometry_ok && R.max_inclination < 0.5;
    std::ostringstream text;
    text << "chase " << symbol_string(th) << "\n k  sum(height)/delta1  bound\n";
    for (int k = 0; k <= cfg.k_max; ++k) {
        double r = height_ratio_sum(R, k), bound = std::pow(2.0, -k) * 1.05;
        ok = ok && r <= bound;
        ratios.push_back({{"k", k}, {"ratio_sum", r}, {"bound", bound}});
        text << " " << k << "  " << r << "  " << bound << "\n";
    }
    // coding traces of the midpoints of the deepest components
    {
        std::ofstream csv(out_path(rc, "coding.csv"));
        csv << "node,step,symbol,verdict,admissible_prefix\n";
        int written = 0;
        for (std::size_t i = 0; i < R.nodes.size() && written < 32; ++i) {
            const auto& nd = R.nodes[i];
            if (nd.depth != cfg.k_max) continue;
            for (std::size_t j = 0; j < nd.xs.size(); ++j) {
                if (!nd.alive[j]) continue;
                CodeTrace tr = code_orbit(M, th, f128(nd.xs[j]), (nd.lo[j] + nd.hi[j]) / 2, nd.depth);
                for (std::size_t k = 0; k < tr.symbols.size(); ++k)
                    csv << i << "," << k << ",\"" << symbol_string(tr.symbols[k]) << "\"," << verdict_name(tr.verdict)
                        << "," << tr.admissible_prefix << "\n";
                ++written;
                break;
            }
        }
    }
    json tree = {{"symbol", symbol_string(th)}, {"nodes", nodes}};
    std::ofstream(out_path(rc, "code_tree.json")) << tree.dump(1) << "\n";
    json report = {{"command", "code"}, {"symbol", symbol_string(th)}, {"k_max", cfg.k_max},
                   {"resolution", cfg.resolution}, {"node_budget", cfg.node_budget}, {"pass", ok},
                   {"max_inclination", R.max_inclination}, {"ratios", ratios}, {"error", R.error}};
    emit(rc, report, text.str());
    return ok ? 0 : 1;
}

int cmd_flow(const RunConfig& rc) {
    Params p = load_params(rc);
    GlueConfig c = GlueConfig::from_sigma(p.sigma);
    c.validate();
    double target = rc.target > 0 ? rc.target : c.delta0() / 2;
    ShotResult r = shoot_homoclinic(c, target);
    {
        std::ofstream csv(out_path(rc, "loop.csv"));
        csv.precision(17);
        csv << "x,y\n";
        for (const auto& u : r.loop) csv << u[0] << "," << u[1] << "\n";
    }
    json report = {{"command", "flow"}, {"target", target}, {"tstar_u", r.tstar_u}, {"tstar_s", r.tstar_s},
                   {"hit_u", r.hit_u}, {"hit_s", r.hit_s}, {"closure", r.closure},
                   {"loop_points", r.loop.size()}, {"pass", r.closure < 1e-6}};
    std::ostringstream text;
    text.precision(10);
    text << "t*_u " << r.tstar_u << "  t*_s " << r.tstar_s << "  closure " << r.closure << "\n";
    emit(rc, report, text.str());
    return r.closure < 1e-6 ? 0 : 1;
}

int cmd_bowen(const RunConfig& rc) {
    Params p = load_params(rc);
    if (!validate_full(p).pass()) throw ConfigError("parameters fail validation");
    Model M(p);
    MapId map = parse_map(rc.map.empty() ? "BowenF0" : rc.map);
    if (!is_bowen(map)) throw ConfigError("bowen needs BowenF0 or BowenF2");
    std::int64_t N = rc.n > 0 ? rc.n : 10000000;
    HistoricReport h = historic_test(M, map, local(1.39, 1.40, p.n0), N);
    {
        std::ofstream csv(out_path(rc, "birkhoff.csv"));
        csv.precision(17);
        csv << "t,avg_x\n";
        for (const auto& tp : h.summary.birkhoff["x"]) csv << tp.t << "," << tp.avg << "\n";
    }
    json report = {{"command", "bowen"}, {"map", map_name(map)}, {"N", N},
                   {"liminf_est", h.liminf_est}, {"limsup_est", h.limsup_est}, {"gap", h.gap},
                   {"gap_previous_window", h.gap_previous_window}, {"gap_last_window", h.gap_last_window},
                   {"verdict", verdict_name(h.summary.verdict)}};
    std::ostringstream text;
    text << "Birkhoff x-average: liminf " << h.liminf_est << ", limsup " << h.limsup_est << ", gap " << h.gap
         << " (" << verdict_name(h.summary.verdict) << ")\n";
    emit(rc, report, text.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fig8: figure-eight attractor experiments"};
    app.require_subcommand(1);
    RunConfig rc;
    auto common = [&](CLI::App* s) {
        s->add_option("--preset", rc.preset, "parameter preset (default, regular)");
        s->add_option("--config", rc.config, "JSON file with parameter overrides")->check(CLI::ExistingFile);
        s->add_option("--seed", rc.seed, "random seed");
        s->add_option("--out", rc.out, "output directory");
        s->add_flag("--json", rc.json_out, "print a JSON report");
    };
    auto* verify = app.add_subcommand("verify", "run the verification suites");
    common(verify);
    verify->add_option("--suite", rc.suites, "suite(s) to run");
    verify->add_flag("--with-flow", rc.with_flow, "include the flow shooting suite");
    verify->add_option("--kmax", rc.kmax, "chasing depth for the heights suite")->check(CLI::Range(1, 12));
    verify->add_option("--resolution", rc.resolution, "chasing samples per boundary")->check(CLI::Range(4, 4096));
    auto* basin = app.add_subcommand("basin", "Monte Carlo basin map and nowhere-density probe");
    common(basin);
    basin->add_option("--map", rc.map, "F0, F1, F2, BowenF0, BowenF2");
    basin->add_option("--box", rc.box, "stable, extended, eps, unstable, exterior");
    basin->add_option("--level", rc.level, "box level (default n0)");
    basin->add_option("--samples", rc.samples, "number of samples")->check(CLI::PositiveNumber);
    basin->add_flag("!--no-probe", rc.probe, "skip the nowhere-density probe");
    auto* code = app.add_subcommand("code", "chase persistent components of a blue rectangle");
    common(code);
    code->add_option("--symbol", rc.symbol, "starting rectangle, e.g. l,t,6");
    code->add_option("--kmax", rc.kmax, "depth")->check(CLI::Range(1, 12));
    code->add_option("--resolution", rc.resolution, "samples per boundary")->check(CLI::Range(4, 4096));
    code->add_option("--budget", rc.budget, "expansions beyond depth 1")->check(CLI::NonNegativeNumber);
    auto* flow = app.add_subcommand("flow", "shoot the homoclinic loop of the glued field");
    common(flow);
    flow->add_option("--target", rc.target, "section hit coordinate (default delta0/2)");
    auto* bowen = app.add_subcommand("bowen", "Birkhoff averages along a Bowen-eye orbit");
    common(bowen);
    bowen->add_option("--map", rc.map, "BowenF0 or BowenF2");
    bowen->add_option("--n", rc.n, "number of steps")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    try {
        if (*verify) return cmd_verify(rc);
        if (*basin) return cmd_basin(rc);
        if (*code) return cmd_code(rc);
        if (*flow) return cmd_flow(rc);
        if (*bowen) return cmd_bowen(rc);
    } catch (const ConfigError& e) {
        if (rc.json_out) std::cout << json{{"error", "config"}, {"message", e.what()}}.dump(2) << "\n";
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
