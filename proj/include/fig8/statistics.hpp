#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fig8/map_core.hpp"
#include "fig8/return_dynamics.hpp"
#include "fig8/rng.hpp"

namespace fig8 {

enum class Verdict { ConvergesToDiracO, EscapedToQ, EscapedFarField, HistoricCandidate, Undecided };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::ConvergesToDiracO: return "ConvergesToDiracO";
        case Verdict::EscapedToQ: return "EscapedToQ";
        case Verdict::EscapedFarField: return "EscapedFarField";
        case Verdict::HistoricCandidate: return "HistoricCandidate";
        case Verdict::Undecided: return "Undecided";
    }
    return "?";
}

struct TracePoint {
    std::int64_t t;
    double avg;
};

struct OrbitOptions {
    bool skeleton = true;
    double trace_ratio = 1.02;       // geometric spacing of the Birkhoff trace
    std::size_t max_landings = 4096; // landings kept for inspection
};

struct OrbitSummary {
    std::int64_t steps = 0;
    std::vector<double> eps;
    std::map<double, double> visit_fraction;        // final window [N/2, N)
    std::map<double, double> visit_fraction_total;  // whole run
    std::map<std::string, std::vector<TracePoint>> birkhoff;
    Verdict verdict = Verdict::Undecided;
    std::optional<std::int64_t> escape_step;
    bool skeleton = true;
    bool truncated = false;  // stepwise run stopped at the representation limit
    std::int64_t returns = 0;
    std::int64_t window_lo = 0, window_hi = 0;
    double delta_tol = 0;
    std::vector<std::int64_t> linear_runs;  // departure index j of each completed passage
    std::vector<ScaledPoint> landings;
    std::vector<Chart> visits;              // chart of each completed passage (Local or LocalP)
    std::string note;
};

namespace detail {

// Running accounting of visits and observable sums over the time axis.
struct Ledger {
    std::vector<double> eps;
    std::vector<std::string> obs;
    std::int64_t N;
    std::int64_t wlo, whi;
    std::vector<std::int64_t> in_total, in_window;
    std::vector<double> sums;
    std::vector<std::vector<TracePoint>> traces;
    std::vector<std::int64_t> grid;
    std::size_t next_grid = 0;
    std::int64_t t = 0;

    Ledger(std::vector<double> e, std::vector<std::string> o, std::int64_t n, double ratio)
        : eps(std::move(e)), obs(std::move(o)), N(n), wlo(n / 2), whi(n) {
        in_total.assign(eps.size(), 0);
        in_window.assign(eps.size(), 0);
        sums.assign(obs.size(), 0.0);
        traces.resize(obs.size());
        double g = 1;
        while (g < static_cast<double>(N)) {
            std::int64_t k = static_cast<std::int64_t>(std::ceil(g));
            if (grid.empty() || k > grid.back()) grid.push_back(k);
            g *= ratio;
        }
        if (grid.empty() || grid.back() != N) grid.push_back(N);
    }

    static std::int64_t overlap(std::int64_t a, std::int64_t b, std::int64_t lo, std::int64_t hi) {
        return std::max<std::int64_t>(0, std::min(b, hi) - std::max(a, lo));
    }

    // record observables at grid times falling in [t, t+len); prefix(k) returns
    // the observable sums over the first k states of the block
    template <class Prefix>
    void record(std::int64_t len, Prefix prefix) {
        while (next_grid < grid.size() && grid[next_grid] <= t + len) {
            std::int64_t g = grid[next_grid];
            std::vector<double> ps = prefix(g - t);
            for (std::size_t i = 0; i < obs.size(); ++i)
                traces[i].push_back({g, (sums[i] + ps[i]) / static_cast<double>(g)});
            ++next_grid;
        }
    }

    void single(Vec2 w, Vec2 raw_o) {
        std::vector<double> v(obs.size());
        for (std::size_t i = 0; i < obs.size(); ++i) v[i] = obs[i] == "y" ? w.y : w.x;
        record(1, [&](std::int64_t) { return v; });
        double r = std::hypot(raw_o.x, raw_o.y);
        for (std::size_t k = 0; k < eps.size(); ++k)
            if (r < eps[k]) {
                ++in_total[k];
                if (t >= wlo && t < whi) ++in_window[k];
            }
        for (std::size_t i = 0; i < obs.size(); ++i) sums[i] += v[i];
        ++t;
    }
};

}  // namespace detail

class OrbitRunner {
public:
    const Model& M;
    explicit OrbitRunner(const Model& m) : M(m) {}

    OrbitSummary run(MapId map, ScaledPoint q, std::int64_t N, std::vector<double> eps_list,
                     std::vector<std::string> observables = {"x"}, OrbitOptions opt = {}) const {
        if (N < 1) throw std::invalid_argument("run_orbit needs N >= 1");
        for (const auto& o : observables)
            if (o != "x" && o != "y") throw ConfigError("unknown observable: " + o);
        for (double e : eps_list)
            if (!(e > 0 && e < 1)) throw ConfigError("eps must lie in (0, 1)");
        const bool bowen = is_bowen(map);
        const double sg = M.sigma;
        detail::Ledger L(eps_list, observables, N, opt.trace_ratio);
        OrbitSummary S;
        S.eps = eps_list;
        S.skeleton = opt.skeleton;
        std::int64_t passage_start = 0;
        bool stop = false;
        bool pre_landing = false;  // q is the first local state after an excursion
        if (!is_loop(q.chart)) q = q.canonical(sg);
        if (!bowen && M.in_Q(q)) {
            S.verdict = Verdict::EscapedToQ;
            S.escape_step = 0;
        }
        while (!stop && S.verdict != Verdict::EscapedToQ && L.t < N) {
            const bool local = q.chart == Chart::Local || q.chart == Chart::LocalP;
            if (local && q.x == 0 && q.tau == 0 && q.chart == Chart::Local) {
                // fixed point O
                std::int64_t rem = N - L.t;
                L.record(rem, [&](std::int64_t) { return std::vector<double>(observables.size(), 0.0); });
                for (std::size_t k = 0; k < L.eps.size(); ++k) {
                    L.in_total[k] += rem;
                    L.in_window[k] += Ledger_overlap(L.t, N, L.wlo, L.whi);
                }
                L.t = N;
                break;
            }
            if (opt.skeleton && local && !pre_landing && linear_regime(q, bowen)) {
                std::int64_t j = departure_index(q, bowen);  // -1: never departs (tau == 0)
                std::int64_t J = j < 0 ? N - L.t - 1 : std::min<std::int64_t>(j, N - L.t - 1);
                account_run(L, q, J);
                if (j < 0 || J < j) {
                    L.t += J + 1;
                    break;
                }
                L.t += J + 1;
                if (L.t >= N) break;
                try {
                    q = departure_point(q, j, bowen);
                } catch (const ModelBoundary& e) {
                    S.verdict = Verdict::EscapedFarField;
                    S.note = e.what();
                    stop = true;
                }
                S.linear_runs.push_back(j);
                continue;
            }
            // one explicit step
            Vec2 w = M.raw_position(q);
            Vec2 wo = (q.chart == Chart::Local) ? w : Vec2{1e300, 1e300};
            L.single(w, wo);
            StepResult st;
            try {
                st = M.step(map, q);
            } catch (const ModelBoundary& e) {
                S.verdict = Verdict::EscapedFarField;
                S.note = e.what();
                break;
            } catch (const RepresentationError& e) {
                S.truncated = true;
                S.note = e.what();
                break;
            }
            if (st.tags & tag::Identity) {
                S.verdict = Verdict::EscapedFarField;
                S.note = "orbit reached a fixed far-field region";
                break;
            }
            ScaledPoint next = is_loop(st.next.chart) ? st.next : st.next.canonical(sg);
            if (!is_loop(q.chart) && is_loop(next.chart)) S.linear_runs.push_back(L.t - 1 - passage_start);
            if (is_loop(q.chart) && !is_loop(next.chart)) {
                pre_landing = true;
            } else if (pre_landing) {
                ++S.returns;
                S.visits.push_back(next.chart);
                if (S.landings.size() < opt.max_landings) S.landings.push_back(next);
                passage_start = L.t;
                pre_landing = false;
            }
            q = next;
            if (!bowen && (st.tags & tag::TrappedQ)) {
                S.verdict = Verdict::EscapedToQ;
                S.escape_step = L.t;
                break;
            }
        }
        S.steps = L.t;
        S.window_lo = L.wlo;
        S.window_hi = std::min(L.whi, L.t);
        std::int64_t wlen = S.window_hi - S.window_lo;
        S.delta_tol = wlen > 0 ? 2.0 * M.prm.k0 / static_cast<double>(wlen) : 1.0;
        for (std::size_t k = 0; k < L.eps.size(); ++k) {
            S.visit_fraction_total[L.eps[k]] =
                L.t > 0 ? static_cast<double>(L.in_total[k]) / static_cast<double>(L.t) : 0.0;
            S.visit_fraction[L.eps[k]] =
                wlen > 0 ? static_cast<double>(L.in_window[k]) / static_cast<double>(wlen) : 0.0;
        }
        for (std::size_t i = 0; i < observables.size(); ++i) S.birkhoff[observables[i]] = L.traces[i];
        if (S.verdict == Verdict::Undecided && !S.truncated) S.verdict = decide(S, bowen, q);
        return S;
    }

private:
    static std::int64_t Ledger_overlap(std::int64_t a, std::int64_t b, std::int64_t lo, std::int64_t hi) {
        return detail::Ledger::overlap(a, b, lo, hi);
    }

    double band_lo(bool bowen) const { return bowen ? M.DloB : M.Dlo; }

    bool linear_regime(const ScaledPoint& q, bool bowen) const {
        if (q.chart == Chart::LocalP && !bowen) return false;
        double ax = std::abs(q.x);
        if (ax >= M.sigma * M.sigma * M.prm.a * (1 - 1e-15)) return false;
        if (ax > (bowen ? M.XVB : M.XV)) return false;
        if (q.tau == 0) return true;
        return std::abs(q.y(M.sigma)) < M.sigma * band_lo(bowen);
    }

    // number of linear steps before the departure state (-1 when tau == 0)
    std::int64_t departure_index(const ScaledPoint& q, bool bowen) const {
        if (q.tau == 0) return -1;
        const double sg = M.sigma, D = band_lo(bowen);
        double at = std::abs(q.tau);
        if (std::abs(q.y(sg)) >= D) return 0;
        double est = static_cast<double>(q.n) + std::log(D / at) / std::log(sg);
        std::int64_t j = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(est)) - 1);
        while (std::abs(ScaledValue{at, q.n - j}.raw(sg)) < D) ++j;
        while (j > 0 && std::abs(ScaledValue{at, q.n - (j - 1)}.raw(sg)) >= D) --j;
        return j;
    }

    // loop point at stage 1 reached from the departure state j
    ScaledPoint departure_point(const ScaledPoint& q, std::int64_t j, bool bowen) const {
        const double sg = M.sigma;
        double ydep = ScaledValue{q.tau, q.n - j}.raw(sg);
        ScaledValue xdep = ScaledValue{q.x, 2 * j}.normalized(sg);
        if (std::abs(xdep.raw(sg)) > M.Xdep) throw ModelBoundary("departure outside the strip");
        if (bowen && ydep < 0) throw ModelBoundary("Bowen mode has no lower loop");
        ScaledPoint e;
        e.x = ydep;
        e.tau = xdep.t;
        e.n = xdep.n;
        e.stage = 1;
        if (bowen)
            e.chart = q.chart == Chart::Local ? Chart::LoopOP : Chart::LoopPO;
        else
            e.chart = ydep > 0 ? Chart::LoopUpper : Chart::LoopLower;
        return e;
    }

    // states t = 0..J of the linear passage from q
    void account_run(detail::Ledger& L, const ScaledPoint& q, std::int64_t J) const {
        const double sg = M.sigma, p = M.prm.p;
        const bool atP = q.chart == Chart::LocalP;
        const double sx = atP ? -1.0 : 1.0, ox = atP ? 2 * p : 0.0;
        // x_t = sigma^(-2t) x, y_t = sigma^t y
        auto xsum = [&](std::int64_t k) {  // sum over the first k states
            if (k <= 0) return 0.0;
            double r = 1 / (sg * sg);
            return q.x * (1 - std::pow(r, static_cast<double>(k))) / (1 - r);
        };
        auto ysum = [&](std::int64_t k) {
            if (k <= 0 || q.tau == 0) return 0.0;
            double ylast = ScaledValue{q.tau, q.n - (k - 1)}.raw(sg);
            double y0 = q.y(sg);
            return (sg * ylast - y0) / (sg - 1);
        };
        auto prefix = [&](std::int64_t k) {
            std::vector<double> v(L.obs.size());
            for (std::size_t i = 0; i < L.obs.size(); ++i)
                v[i] = L.obs[i] == "y" ? sx * ysum(k) + ox * static_cast<double>(k)
                                       : sx * xsum(k) + ox * static_cast<double>(k);
            return v;
        };
        L.record(J + 1, prefix);
        if (!atP) {
            for (std::size_t k = 0; k < L.eps.size(); ++k) {
                auto [lo, hi] = in_ball_interval(q, J, L.eps[k]);
                if (hi >= lo) {
                    L.in_total[k] += hi - lo + 1;
                    L.in_window[k] += detail::Ledger::overlap(L.t + lo, L.t + hi + 1, L.wlo, L.whi);
                }
            }
        }
        std::vector<double> tot = prefix(J + 1);
        for (std::size_t i = 0; i < L.obs.size(); ++i) L.sums[i] += tot[i];
    }

public:
    // squared distance to O of state t of the linear passage, compared against eps^2
    bool in_ball(const ScaledPoint& q, std::int64_t t, double eps) const {
        const double sg = M.sigma;
        double x = q.x == 0 ? 0.0 : q.x * std::pow(sg, -2.0 * static_cast<double>(t));
        double y = ScaledValue{q.tau, q.n - t}.raw(sg);
        return x * x + y * y < eps * eps;
    }

    // the in-ball states of a linear passage form an interval (the squared norm is convex in t)
    std::pair<std::int64_t, std::int64_t> in_ball_interval(const ScaledPoint& q, std::int64_t J, double eps) const {
        const double ls = std::log(M.sigma);
        double tc;
        if (q.x == 0) tc = 0;
        else if (q.tau == 0) tc = static_cast<double>(J);
        else tc = (std::log(std::abs(q.x)) - std::log(std::abs(q.tau)) + static_cast<double>(q.n) * ls) / (3 * ls);
        tc = std::clamp(tc, 0.0, static_cast<double>(J));
        std::int64_t c0 = static_cast<std::int64_t>(std::floor(tc));
        std::int64_t c = -1;
        for (std::int64_t cand : {c0, c0 + 1, c0 - 1, c0 + 2})
            if (cand >= 0 && cand <= J && in_ball(q, cand, eps)) {
                c = cand;
                break;
            }
        if (c < 0) return {1, 0};
        std::int64_t lo = 0, hi = c;  // first in-ball index in [0, c]
        while (lo < hi) {
            std::int64_t m = lo + (hi - lo) / 2;
            if (in_ball(q, m, eps)) hi = m;
            else lo = m + 1;
        }
        std::int64_t first = lo;
        lo = c;
        hi = J;  // last in-ball index in [c, J]
        while (lo < hi) {
            std::int64_t m = lo + (hi - lo + 1) / 2;
            if (in_ball(q, m, eps)) lo = m;
            else hi = m - 1;
        }
        return {first, lo};
    }

private:
    Verdict decide(const OrbitSummary& S, bool bowen, const ScaledPoint& q) const {
        if (!is_loop(q.chart) && q.chart == Chart::Local && q.x == 0 && q.tau == 0) {
            bool all = true;
            for (auto& [e, f] : S.visit_fraction) all = all && f >= 1 - S.delta_tol;
            return all ? Verdict::ConvergesToDiracO : Verdict::Undecided;
        }
        if (bowen) {
            if (S.visits.size() < 3) return Verdict::Undecided;
            for (std::size_t i = 1; i < S.visits.size(); ++i)
                if (S.visits[i] == S.visits[i - 1]) return Verdict::Undecided;
            return Verdict::HistoricCandidate;
        }
        if (S.linear_runs.size() < 2) return Verdict::Undecided;
        for (std::size_t i = 1; i < S.linear_runs.size(); ++i)
            if (S.linear_runs[i] < S.linear_runs[i - 1]) return Verdict::Undecided;
        for (auto& [e, f] : S.visit_fraction)
            if (f < 1 - S.delta_tol) return Verdict::Undecided;
        return Verdict::ConvergesToDiracO;
    }
};

inline OrbitSummary run_orbit(const Model& M, MapId map, const ScaledPoint& q, std::int64_t N,
                              const std::vector<double>& eps_list, const std::vector<std::string>& observables = {"x"},
                              OrbitOptions opt = {}) {
    return OrbitRunner(M).run(map, q, N, eps_list, observables, opt);
}

// ---------------------------------------------------------------------------

struct HistoricReport {
    double liminf_est = 0, limsup_est = 0, gap = 0;
    double gap_previous_window = 0, gap_last_window = 0;
    OrbitSummary summary;
};

inline HistoricReport historic_test(const Model& M, MapId map, const ScaledPoint& q, std::int64_t N,
                                    const std::string& observable = "x") {
    HistoricReport h;
    OrbitOptions opt;
    opt.trace_ratio = 1.01;
    h.summary = run_orbit(M, map, q, N, {0.5}, {observable}, opt);
    const auto& tr = h.summary.birkhoff[observable];
    std::int64_t n = h.summary.steps;
    auto window = [&](std::int64_t lo, std::int64_t hi) {
        double mn = 1e300, mx = -1e300;
        for (const auto& pt : tr)
            if (pt.t >= lo && pt.t <= hi) {
                mn = std::min(mn, pt.avg);
                mx = std::max(mx, pt.avg);
            }
        return std::pair<double, double>{mn, mx};
    };
    auto [a1, b1] = window(n / 4, n / 2);
    auto [a2, b2] = window(n / 2, n);
    if (a1 > b1 || a2 > b2) return h;
    h.gap_previous_window = b1 - a1;
    h.gap_last_window = b2 - a2;
    h.liminf_est = std::min(a1, a2);
    h.limsup_est = std::max(b1, b2);
    h.gap = std::min(h.gap_previous_window, h.gap_last_window);
    return h;
}

// ---------------------------------------------------------------------------
// Basin membership with certificates.

struct ClassifyOptions {
    int max_returns = 48;
    int tower_returns = 64;
    std::int64_t escape_cap = 1 << 16;
};

struct Classification {
    Verdict verdict = Verdict::Undecided;
    bool certified = false;
    int returns = 0;
    const char* reason = "";
};

inline Classification classify_point(const Model& M, MapId map, ScaledPoint q, const ClassifyOptions& o = {}) {
    const Params& p = M.prm;
    const double sg = M.sigma;
    ReturnEngine E(M);
    Interval I{p.a, p.b}, It{p.a_tilde, p.b_tilde};
    Classification c;
    for (c.returns = 0;; ++c.returns) {
        q = q.canonical(sg);
        if (q.chart == Chart::Local && !is_bowen(map)) {
            if (M.in_Q(q)) {
                c.verdict = Verdict::EscapedToQ;
                c.certified = true;
                c.reason = "in Q";
                return c;
            }
            double sx = q.x < 0 ? -1.0 : 1.0;
            double x = sx * q.x, tau = sx * q.tau;
            bool tower = q.n >= p.n0 && tau > 0;
            if (map == MapId::F0 && tower && It.contains(x) && It.contains(tau)) {
                c.verdict = Verdict::ConvergesToDiracO;
                c.certified = true;
                c.reason = "extended stable tower";
                return c;
            }
            if (tower && I.contains(x) && I.contains(tau)) {
                if (map != MapId::F2) {
                    c.verdict = Verdict::ConvergesToDiracO;
                    c.certified = true;
                    c.reason = "stable tower";
                    return c;
                }
                TauState s{x, tau, Level::from(q.n), 0};
                std::optional<TauState> omega;
                for (int k = 0; k < o.tower_returns; ++k) {
                    s = g2_tower_return(s, M.pr);
                    if (!I.contains(s.tau)) {
                        c.verdict = Verdict::EscapedToQ;
                        c.certified = true;
                        c.reason = "left the stable tower";
                        return c;
                    }
                    if (omega_member(s.m, p.n0, true)) omega = s;
                }
                if (!omega || M.pr.K.phi(omega->x) == 0) {
                    c.verdict = Verdict::ConvergesToDiracO;
                    c.certified = omega.has_value();
                    c.reason = "x in K: tau constant";
                    return c;
                }
                EscapeOutcome eo = escape_recursion(M.pr, omega->x, omega->tau, omega->m, o.escape_cap);
                c.verdict = Verdict::EscapedToQ;
                c.certified = eo.exited || eo.certified;
                c.reason = eo.exited ? "left the stable tower" : "finite exit certified";
                return c;
            }
        }
        if (is_bowen(map) && (q.chart == Chart::Local || q.chart == Chart::LocalP)) {
            double sx = q.x < 0 ? -1.0 : 1.0;
            if (q.n >= p.n0 && It.contains(sx * q.x) && It.contains(sx * q.tau)) {
                c.verdict = Verdict::HistoricCandidate;
                c.reason = "Bowen tower";
                return c;
            }
        }
        if (c.returns >= o.max_returns || q.n > (std::int64_t(1) << 56)) {
            c.reason = "return budget exhausted";
            return c;
        }
        try {
            ReturnResult r = E.g_return(map, q);
            if (r.kind == ReturnResult::EscapedQ) {
                c.verdict = Verdict::EscapedToQ;
                c.certified = true;
                c.reason = "entered Q";
                return c;
            }
            q = r.landing;
        } catch (const ModelBoundary& e) {
            c.verdict = Verdict::EscapedFarField;
            c.reason = "model boundary";
            return c;
        }
    }
}

// ---------------------------------------------------------------------------

struct BasinEstimate {
    Box region;
    std::int64_t samples = 0;
    std::int64_t in_basin = 0;
    std::int64_t undecided = 0;
    std::map<std::string, std::int64_t> by_verdict;
    double fraction = 0, ci_lo = 0, ci_hi = 0;  // Wilson 95%
    int grid_x = 0, grid_y = 0;
    std::vector<std::int64_t> cell_total, cell_basin;  // row-major, tau rows
};

inline std::pair<double, double> wilson_interval(std::int64_t k, std::int64_t n, double z = 1.959963984540054) {
    if (n <= 0) return {0, 1};
    double ph = static_cast<double>(k) / static_cast<double>(n), nn = static_cast<double>(n);
    double den = 1 + z * z / nn;
    double mid = (ph + z * z / (2 * nn)) / den;
    double half = z * std::sqrt(ph * (1 - ph) / nn + z * z / (4 * nn * nn)) / den;
    return {k == 0 ? 0.0 : std::max(0.0, mid - half), k == n ? 1.0 : std::min(1.0, mid + half)};
}

inline ScaledPoint sample_box(const Box& b, CounterRng& rng) {
    double x = rng.uniform(b.x.lo, b.x.hi);
    double t = rng.uniform(b.tau.lo, b.tau.hi);
    ScaledPoint q;
    q.x = b.x_level == 0 ? x : ScaledValue{x, b.x_level}.raw(2.0);
    q.tau = t;
    q.n = b.level;
    return q;
}

inline BasinEstimate basin_sample(const Model& M, MapId map, const Box& region, std::int64_t n_samples,
                                  std::uint64_t seed, int grid = 32, const ClassifyOptions& o = {}) {
    if (region.x_level != 0) throw ConfigError("basin sampling expects a stable-type box");
    BasinEstimate est;
    est.region = region;
    est.grid_x = est.grid_y = grid;
    est.cell_total.assign(static_cast<std::size_t>(grid) * grid, 0);
    est.cell_basin.assign(static_cast<std::size_t>(grid) * grid, 0);
    CounterRng rng(seed, 1);
    for (std::int64_t i = 0; i < n_samples; ++i) {
        ScaledPoint q = sample_box(region, rng);
        Classification c = classify_point(M, map, q, o);
        ++est.samples;
        est.by_verdict[verdict_name(c.verdict)]++;
        bool in = c.verdict == Verdict::ConvergesToDiracO;
        if (in) ++est.in_basin;
        if (c.verdict == Verdict::Undecided) ++est.undecided;
        int gx = std::clamp(static_cast<int>((q.x - region.x.lo) / region.x.width() * grid), 0, grid - 1);
        int gy = std::clamp(static_cast<int>((q.tau - region.tau.lo) / region.tau.width() * grid), 0, grid - 1);
        est.cell_total[static_cast<std::size_t>(gy) * grid + gx]++;
        if (in) est.cell_basin[static_cast<std::size_t>(gy) * grid + gx]++;
    }
    est.fraction = est.samples ? static_cast<double>(est.in_basin) / static_cast<double>(est.samples) : 0;
    std::tie(est.ci_lo, est.ci_hi) = wilson_interval(est.in_basin, est.samples);
    return est;
}

// K-columns of S inside a stable-type box at the same level
inline double predicted_basin_fraction(const Profiles& P, const Box& region) {
    Interval I{P.prm.a, P.prm.b};
    double wx = std::max(0.0, std::min(region.x.hi, I.hi) - std::max(region.x.lo, I.lo));
    double wt = std::max(0.0, std::min(region.tau.hi, I.hi) - std::max(region.tau.lo, I.lo));
    double kx = wx > 0 ? P.K.measure * wx / (I.hi - I.lo) : 0.0;
    if (wx > 0 && wx < I.hi - I.lo) {
        // partial overlap: integrate K's indicator over the clipped range
        double lo = std::max(region.x.lo, I.lo), hi = std::min(region.x.hi, I.hi);
        double gaps = 0;
        for (const Interval& g : P.K.gaps) gaps += std::max(0.0, std::min(g.hi, hi) - std::max(g.lo, lo));
        kx = (hi - lo) - gaps;
    }
    return kx * wt / region.area_scaled();
}

// ---------------------------------------------------------------------------

struct DensityProbeOptions {
    int disks = 200;
    int points_per_disk = 32;
    int grid = 32;
    int points_per_subdisk = 16;
};

struct DensityReport {
    double radius = 0;
    int disks = 0;
    int basin_hitting = 0;
    int successes = 0;
    double success_rate = 0;
    bool skipped = false;
    std::string warning;
};

inline std::vector<DensityReport> nowhere_density_probe(const Model& M, MapId map, const Box& region,
                                                        const std::vector<double>& radii, std::uint64_t seed,
                                                        const DensityProbeOptions& o = {},
                                                        const ClassifyOptions& co = {}) {
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] < radii[i - 1])) throw ConfigError("probe radii must be descending");
    std::vector<DensityReport> out;
    auto basin = [&](double x, double t) {
        ScaledPoint q;
        q.x = x;
        q.tau = t;
        q.n = region.level;
        return classify_point(M, map, q, co).verdict == Verdict::ConvergesToDiracO;
    };
    auto in_disk = [](CounterRng& rng, double r, double& dx, double& dy) {
        double u = rng.uniform(), th = 2 * std::numbers::pi * rng.uniform();
        double rr = r * std::sqrt(u);
        dx = rr * std::cos(th);
        dy = rr * std::sin(th);
    };
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        double r = radii[ri];
        DensityReport rep;
        rep.radius = r;
        double scale = std::max(std::abs(region.x.hi), std::abs(region.tau.hi));
        if (!(r > 0) || r / 8 < 64 * std::numeric_limits<double>::epsilon() * scale ||
            2 * r > std::min(region.x.width(), region.tau.width())) {
            rep.skipped = true;
            rep.warning = "radius outside the resolvable range";
            out.push_back(rep);
            continue;
        }
        CounterRng rng(seed, 100 + ri);
        for (int d = 0; d < o.disks; ++d) {
            double cx = rng.uniform(region.x.lo + r, region.x.hi - r);
            double ct = rng.uniform(region.tau.lo + r, region.tau.hi - r);
            ++rep.disks;
            bool hit = false;
            for (int k = 0; k < o.points_per_disk && !hit; ++k) {
                double dx, dy;
                in_disk(rng, r, dx, dy);
                hit = basin(cx + dx, ct + dy);
            }
            if (!hit) continue;
            ++rep.basin_hitting;
            double rs = r / 8, reach = r - rs;
            bool found = false;
            for (int gi = 0; gi < o.grid && !found; ++gi)
                for (int gj = 0; gj < o.grid && !found; ++gj) {
                    double ox = -reach + 2 * reach * (gi + 0.5) / o.grid;
                    double oy = -reach + 2 * reach * (gj + 0.5) / o.grid;
                    if (std::hypot(ox, oy) > reach) continue;
                    bool clean = true;
                    for (int k = 0; k < o.points_per_subdisk && clean; ++k) {
                        double dx, dy;
                        in_disk(rng, rs, dx, dy);
                        clean = !basin(cx + ox + dx, ct + oy + dy);
                    }
                    found = clean;
                }
            if (found) ++rep.successes;
        }
        rep.success_rate = rep.basin_hitting ? static_cast<double>(rep.successes) / rep.basin_hitting : 0.0;
        out.push_back(rep);
    }
    return out;
}

}  // namespace fig8
