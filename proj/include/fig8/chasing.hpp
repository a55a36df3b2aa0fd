#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/multiprecision/float128.hpp>

#include "fig8/return_dynamics.hpp"

namespace fig8 {

using f128 = boost::multiprecision::float128;

// One connected component of k-persistent points, kept as a band between two
// tau-graphs over sampled x (tau measured at the level of path[0]).
struct QuasiRectApprox {
    std::vector<BlueSymbol> path;
    std::vector<double> xs;
    std::vector<f128> lo, hi;
    std::vector<char> alive;
    double height = 0;       // max fiber thickness / delta1
    double inclination = 0;  // max boundary slope, rescaled units
    int depth = 0;
    int parent = -1;
    bool expanded = false;
    std::vector<int> children;
};

struct ChaseConfig {
    int k_max = 6;
    int resolution = 512;
    int node_budget = 250;  // expansions beyond depth 1
};

struct ChaseResult {
    BlueSymbol theta;
    std::vector<QuasiRectApprox> nodes;
    std::vector<double> upper_sum;  // bound on sum of heights / delta1 at depth k
    double max_inclination = 0;
    int expansions = 0;
    int subadditivity_violations = 0;  // children heavier than their parent
    bool geometry_ok = true;
    std::string error;
};

class Chaser {
public:
    const Profiles& P;
    const Params& p;
    BlueReturn<f128> br;

    explicit Chaser(const Profiles& pr) : P(pr), p(pr.prm), br(pr) {}

    // tau at the level of path.back() after following the whole path from theta
    f128 compose(const std::vector<BlueSymbol>& path, f128 x, f128 tau) const {
        for (std::size_t j = 0; j + 1 < path.size(); ++j) {
            auto o = br.apply(path[j].v, path[j].n, x, tau);
            x = o.X;
            tau = o.tau / br.sig(2 * path[j].n - path[j + 1].n);
        }
        return tau;
    }

    ChaseResult chase(const BlueSymbol& theta, const ChaseConfig& cfg) const {
        ChaseResult R;
        R.theta = theta;
        Rect rect = blue_rect(theta.h, theta.v, p);
        QuasiRectApprox root;
        root.path = {theta};
        int res = std::max(cfg.resolution, 2);
        for (int i = 0; i < res; ++i) {
            double x = rect.x.lo + (rect.x.hi - rect.x.lo) * i / (res - 1);
            root.xs.push_back(x);
            root.lo.push_back(f128(rect.tau.lo));
            root.hi.push_back(f128(rect.tau.hi));
            root.alive.push_back(1);
        }
        finish_node(root);
        R.nodes.push_back(std::move(root));
        try {
            expand(R, 0);
            // spine: follow the heaviest child down to k_max
            int cur = 0;
            while (R.nodes[cur].depth + 1 < cfg.k_max && !R.nodes[cur].children.empty()) {
                int best = heaviest_child(R, cur);
                expand(R, best);
                cur = best;
            }
            // best first within the budget
            auto cmp = [&](int a, int b) { return R.nodes[a].height < R.nodes[b].height; };
            std::priority_queue<int, std::vector<int>, decltype(cmp)> pq(cmp);
            for (int i = 0; i < static_cast<int>(R.nodes.size()); ++i)
                if (!R.nodes[i].expanded && R.nodes[i].depth < cfg.k_max) pq.push(i);
            while (!pq.empty() && R.expansions < cfg.node_budget) {
                int i = pq.top();
                pq.pop();
                if (R.nodes[i].expanded) continue;
                std::size_t before = R.nodes.size();
                expand(R, i);
                for (std::size_t c = before; c < R.nodes.size(); ++c)
                    if (R.nodes[c].depth < cfg.k_max) pq.push(static_cast<int>(c));
            }
        } catch (const std::exception& e) {
            R.geometry_ok = false;
            R.error = e.what();
        }
        R.upper_sum.assign(cfg.k_max + 1, 0.0);
        for (const auto& nd : R.nodes) {
            R.max_inclination = std::max(R.max_inclination, nd.inclination);
            if (nd.depth <= cfg.k_max) R.upper_sum[nd.depth] += nd.height;
            if (!nd.expanded)
                for (int k = nd.depth + 1; k <= cfg.k_max; ++k) R.upper_sum[k] += nd.height;
            if (nd.expanded) {
                double sum = 0;
                for (int c : nd.children) sum += R.nodes[c].height;
                if (sum > nd.height * (1 + 1e-9)) R.subadditivity_violations++;
            }
        }
        return R;
    }

private:
    int heaviest_child(const ChaseResult& R, int i) const {
        int best = R.nodes[i].children.front();
        for (int c : R.nodes[i].children)
            if (R.nodes[c].height > R.nodes[best].height) best = c;
        return best;
    }

    void finish_node(QuasiRectApprox& nd) const {
        double h = 0, inc = 0;
        int prev = -1;
        for (std::size_t i = 0; i < nd.xs.size(); ++i) {
            if (!nd.alive[i]) continue;
            h = std::max(h, static_cast<double>(nd.hi[i] - nd.lo[i]));
            if (prev >= 0) {
                double dx = nd.xs[i] - nd.xs[prev];
                inc = std::max(inc, std::abs(static_cast<double>(nd.lo[i] - nd.lo[prev])) / dx);
                inc = std::max(inc, std::abs(static_cast<double>(nd.hi[i] - nd.hi[prev])) / dx);
            }
            prev = static_cast<int>(i);
        }
        nd.height = h / p.delta1;
        nd.inclination = inc;
    }

    // tau in [lo, hi] where g(tau) = target, g monotone on the bracket
    f128 solve(const std::vector<BlueSymbol>& path, f128 x, f128 lo, f128 hi, f128 glo, f128 ghi,
               f128 target) const {
        auto F = [&](f128 t) { return compose(path, x, t) - target; };
        f128 flo = glo - target, fhi = ghi - target;
        if (flo == 0) return lo;
        if (fhi == 0) return hi;
        std::uintmax_t it = 200;
        auto tol = [](f128 a, f128 b) {
            using boost::multiprecision::abs;
            return abs(a - b) <= 64 * std::numeric_limits<f128>::epsilon() * abs(a);
        };
        auto r = boost::math::tools::toms748_solve(F, lo, hi, flo, fhi, tol, it);
        return (r.first + r.second) / 2;
    }

    void expand(ChaseResult& R, int idx) const {
        QuasiRectApprox& parent_ref = R.nodes[idx];
        parent_ref.expanded = true;
        R.expansions++;
        const BlueSymbol last = parent_ref.path.back();
        std::vector<BlueSymbol> succ = blue_successors(last, p);
        QuasiRectApprox parent = parent_ref;  // nodes may reallocate below
        std::vector<int> kids;
        std::size_t res = parent.xs.size();
        // G at the band ends, at the level 2n of the last symbol
        std::vector<BlueSymbol> probe = parent.path;
        probe.push_back(BlueSymbol{gbar(last).h, V::t, 2 * last.n, false});
        std::vector<f128> gl(res), gh(res);
        for (std::size_t i = 0; i < res; ++i) {
            if (!parent.alive[i]) continue;
            gl[i] = compose(probe, f128(parent.xs[i]), parent.lo[i]);
            gh[i] = compose(probe, f128(parent.xs[i]), parent.hi[i]);
        }
        for (const BlueSymbol& eta : succ) {
            QuasiRectApprox ch;
            ch.path = parent.path;
            ch.path.push_back(eta);
            ch.depth = parent.depth + 1;
            ch.parent = idx;
            ch.xs = parent.xs;
            ch.lo.assign(res, f128(0));
            ch.hi.assign(res, f128(0));
            ch.alive.assign(res, 0);
            Rect re = blue_rect(eta.h, eta.v, p);
            f128 scale = br.sig(2 * last.n - eta.n);  // tau at level eta.n -> level 2n
            f128 Tlo = f128(re.tau.lo) * scale, Thi = f128(re.tau.hi) * scale;
            bool any = false;
            for (std::size_t i = 0; i < res; ++i) {
                if (!parent.alive[i]) continue;
                f128 a = gl[i], b = gh[i];
                bool inc = b > a;
                f128 gmin = inc ? a : b, gmax = inc ? b : a;
                if (gmax < Tlo || gmin > Thi) continue;
                f128 x = f128(parent.xs[i]);
                f128 t1 = Tlo <= gmin ? (inc ? parent.lo[i] : parent.hi[i])
                                      : solve(probe, x, parent.lo[i], parent.hi[i], a, b, Tlo);
                f128 t2 = Thi >= gmax ? (inc ? parent.hi[i] : parent.lo[i])
                                      : solve(probe, x, parent.lo[i], parent.hi[i], a, b, Thi);
                ch.lo[i] = std::min(t1, t2);
                ch.hi[i] = std::max(t1, t2);
                if (ch.hi[i] > ch.lo[i]) {
                    ch.alive[i] = 1;
                    any = true;
                }
            }
            if (!any) {
                if (precedes(eta, last, p) && eta.n < gbar(last).n)
                    throw std::runtime_error("geometry inconsistency: predicted intersection " +
                                             symbol_string(eta) + " missing");
                continue;
            }
            finish_node(ch);
            kids.push_back(static_cast<int>(R.nodes.size()));
            R.nodes.push_back(std::move(ch));
        }
        R.nodes[idx].children = kids;
    }
};

inline double height_ratio_sum(const ChaseResult& R, int k) {
    if (k < 0 || k >= static_cast<int>(R.upper_sum.size())) throw std::out_of_range("depth not chased");
    return R.upper_sum[k];
}

// ---------------------------------------------------------------------------
// Symbolic coding of a blue orbit.

struct CodeTrace {
    std::vector<BlueSymbol> symbols;
    enum Verdict { StillBlue, EscapedQ, LeftBlueTower, Inadmissible } verdict = StillBlue;
    int admissible_prefix = 0;
};

inline const char* verdict_name(CodeTrace::Verdict v) {
    switch (v) {
        case CodeTrace::StillBlue: return "StillBlue";
        case CodeTrace::EscapedQ: return "EscapedQ";
        case CodeTrace::LeftBlueTower: return "LeftBlueTower";
        case CodeTrace::Inadmissible: return "Inadmissible";
    }
    return "?";
}

inline CodeTrace code_orbit(const Model& M, const BlueSymbol& start, f128 x, f128 tau, int steps,
                            int follow_returns = 64) {
    CodeTrace tr;
    const Params& p = M.prm;
    BlueReturn<f128> br(M.pr);
    BlueSymbol cur = start;
    tr.symbols.push_back(cur);
    for (int k = 0; k < steps; ++k) {
        auto o = br.apply(cur.v, cur.n, x, tau);
        auto nxt = locate_blue(o.X, o.tau, 2 * cur.n, p);
        if (!nxt) {
            // off the blue tower: follow the stepwise returns
            ScaledPoint q;
            q.x = static_cast<double>(o.X);
            ScaledValue tv = ScaledValue{static_cast<double>(o.tau), 2 * cur.n}.normalized(p.sigma);
            q.tau = tv.t;
            q.n = tv.n;
            tr.verdict = CodeTrace::LeftBlueTower;
            ReturnEngine E(M);
            try {
                for (int r = 0; r < follow_returns; ++r) {
                    if (M.in_Q(q)) { tr.verdict = CodeTrace::EscapedQ; break; }
                    ReturnResult rr = E.g_return(MapId::F1, q);
                    if (rr.kind == ReturnResult::EscapedQ) { tr.verdict = CodeTrace::EscapedQ; break; }
                    q = rr.landing;
                }
            } catch (const std::exception&) {
            }
            return tr;
        }
        if (!precedes(*nxt, cur, p)) {
            tr.symbols.push_back(*nxt);
            tr.verdict = CodeTrace::Inadmissible;
            return tr;
        }
        tr.admissible_prefix++;
        x = o.X;
        tau = o.tau / br.sig(2 * cur.n - nxt->n);
        cur = *nxt;
        tr.symbols.push_back(cur);
    }
    return tr;
}

}  // namespace fig8
