#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fig8/map_core.hpp"

namespace fig8 {

// (x, tau) at box level m after d returns; levels beyond int64 are fine here.
struct TauState {
    double x = 0;
    double tau = 0;
    Level m;
    std::int64_t d = 0;
};

inline bool in_box(const TauState& s, Interval I) { return I.contains(s.x) && I.contains(s.tau); }

inline TauState g0_return(const TauState& s, const Params& p) {
    Interval It{p.a_tilde, p.b_tilde};
    if (!in_box(s, It)) throw std::domain_error("g0_return: point outside the extended box");
    return {p.a + p.b - s.tau, s.x, s.m.doubled(), s.d + 1};
}

// f2 on the S-tower in level-free form: g0, then the h3 push when the landing
// level is in Omega. Quadrant 1 only; quadrant 3 follows by -Id.
inline TauState g2_tower_return(const TauState& s, const Profiles& P) {
    const Params& p = P.prm;
    TauState r = g0_return(s, p);
    if (omega_member(r.m, p.n0, true)) {
        double ph = P.K.phi(r.x);
        double ps = P.psi.value(r.tau);
        if (ph != 0 && ps != 0) r.tau += ph * ps * eps_scaled(r.m, p.kappa);
    }
    return r;
}

// ---------------------------------------------------------------------------
// One first return of the stepwise maps, evaluated in closed form.

struct ReturnResult {
    enum Kind { Landed, EscapedQ } kind = Landed;
    ScaledPoint landing;      // canonical, Local or LocalP chart
    std::int64_t steps = 0;   // map iterates consumed
    std::int64_t linear = 0;  // linear steps before the departure
    unsigned tags = 0;
    double y_dep = 0;
};

class ReturnEngine {
public:
    const Model& M;
    explicit ReturnEngine(const Model& m) : M(m) {}

    // First return of a local point to the post-landing position.
    ReturnResult g_return(MapId map, ScaledPoint q) const {
        const double sg = M.sigma;
        const bool bowen = is_bowen(map);
        const double D = bowen ? M.DloB : M.Dlo;
        ReturnResult r;
        if (is_loop(q.chart)) throw std::domain_error("g_return starts from a local point");
        q = q.canonical(sg);
        // large x: the first linear image could still meet a perturbation support
        while (std::abs(q.x) >= sg * sg * M.prm.a * (1 - 1e-15)) {
            StepResult st = M.step(map, q);
            ++r.steps;
            r.tags |= st.tags;
            if (st.tags & tag::TrappedQ) {
                r.kind = ReturnResult::EscapedQ;
                r.landing = st.next;
                return r;
            }
            if (st.tags & tag::Identity) throw ModelBoundary("return from a fixed region");
            if (is_loop(st.next.chart)) return finish_loop(map, st.next, r);
            q = st.next.canonical(sg);
        }
        if (q.tau == 0) throw ModelBoundary("point on the stable axis never departs");
        if (q.n > (std::numeric_limits<std::int64_t>::max() >> 2))
            throw RepresentationError("level too large for int64 bookkeeping");
        double ay = std::abs(q.y(sg));
        if (q.n < -2000 || ay >= sg * D) throw ModelBoundary("point above the linear zone");
        if (std::abs(q.x) > (bowen ? M.XVB : M.XV)) throw ModelBoundary("point outside the linear zone");
        // smallest j with sigma^j |y| >= D
        std::int64_t j = 0;
        if (ay < D) {
            double at = std::abs(q.tau);
            double est = static_cast<double>(q.n) + std::log(D / at) / std::log(sg);
            j = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(est)) - 1);
            while (std::abs(ScaledValue{at, q.n - j}.raw(sg)) < D) ++j;
            while (j > 0 && std::abs(ScaledValue{at, q.n - (j - 1)}.raw(sg)) >= D) --j;
        }
        r.linear = j;
        r.steps += j;
        r.tags |= j > 0 ? tag::LinearV : 0u;
        double ydep = ScaledValue{q.tau, q.n - j}.raw(sg);
        ScaledValue xdep = ScaledValue{q.x, 2 * j}.normalized(sg);
        if (std::abs(xdep.raw(sg)) > M.Xdep) throw ModelBoundary("departure outside the strip");
        if (bowen && ydep < 0) throw ModelBoundary("Bowen mode has no lower loop");
        r.y_dep = ydep;
        ScaledPoint e;
        e.x = ydep;
        e.tau = xdep.t;
        e.n = xdep.n;
        e.stage = M.prm.k0 - 2;
        if (bowen)
            e.chart = q.chart == Chart::Local ? Chart::LoopOP : Chart::LoopPO;
        else
            e.chart = ydep > 0 ? Chart::LoopUpper : Chart::LoopLower;
        r.steps += M.prm.k0 - 2;  // departure and rotations
        r.tags |= tag::Excursion;
        return finish_loop(map, e, r);
    }

private:
    // from the last loop stage: T_out, then the landing step
    ReturnResult finish_loop(MapId map, ScaledPoint e, ReturnResult r) const {
        while (e.stage < M.prm.k0 - 2) {
            e.stage++;
            r.steps++;
        }
        StepResult pre = M.step(map, e);
        r.steps++;
        r.tags |= pre.tags;
        if (pre.tags & tag::TrappedQ) {
            r.kind = ReturnResult::EscapedQ;
            r.landing = pre.next;
            return r;
        }
        StepResult land = M.step(map, pre.next);
        r.steps++;
        r.tags |= land.tags;
        r.landing = land.next.canonical(M.sigma);
        if (land.tags & tag::TrappedQ) r.kind = ReturnResult::EscapedQ;
        return r;
    }
};

// ---------------------------------------------------------------------------
// Colored regions of C_n.

enum class Color { S, Red, Blue, Green, Orange, Pink, Outside };

inline const char* color_name(Color c) {
    switch (c) {
        case Color::S: return "S";
        case Color::Red: return "Red";
        case Color::Blue: return "Blue";
        case Color::Green: return "Green";
        case Color::Orange: return "Orange";
        case Color::Pink: return "Pink";
        case Color::Outside: return "Outside";
    }
    return "?";
}

enum class H { l, r };
enum class V { t, b };

struct RegionLabel {
    Color color = Color::Outside;
    H h = H::l;  // meaningful for Blue and Pink
    V v = V::t;  // meaningful for Blue, Red, Green
};

// classify a point of C_n given in rescaled coordinates (u, w) = L_n(x, y)
inline RegionLabel region_classify_rescaled(double u, double w, const Params& p) {
    const double e = p.eps_tilde(), dl = p.delta_tilde();
    const double au = std::abs(u), aw = std::abs(w);
    RegionLabel L;
    L.h = u < 0 ? H::l : H::r;
    L.v = w < 0 ? V::b : V::t;
    const double tol = 1e-12;
    if (au > 1 + 3 * e + tol || aw > 1 + 3 * e + tol) {
        L.color = Color::Outside;
        return L;
    }
    if (au <= 1 && aw <= 1) L.color = Color::S;
    else if (aw >= 1 + e + dl) L.color = Color::Red;
    else if (aw >= 1 + e && au >= 1 + 2 * e) L.color = Color::Blue;
    else if (aw >= 1 + e) L.color = Color::Green;
    else if (au >= 1 + 2 * e) L.color = Color::Pink;
    else L.color = Color::Orange;
    return L;
}

inline RegionLabel region_classify(const TauState& s, const Params& p) {
    double ax = 2 / (p.b - p.a), bx = (p.a + p.b) / (p.b - p.a);
    return region_classify_rescaled(ax * s.x - bx, ax * s.tau - bx, p);
}

// C-box containing a local point: its canonical level and tau, if any
inline std::optional<TauState> in_eps_tower(const ScaledPoint& q, const Params& p) {
    if (q.chart != Chart::Local) return std::nullopt;
    ScaledPoint c = q.canonical(p.sigma);
    Interval C{p.a - 3 * p.eps1, p.b + 3 * p.eps1};
    if (c.n < p.n0 || !C.contains(c.x) || !C.contains(c.tau)) return std::nullopt;
    return TauState{c.x, c.tau, Level::from(c.n), 0};
}

// ---------------------------------------------------------------------------
// Blue tower symbols.

struct BlueSymbol {
    H h = H::l;
    V v = V::t;
    std::int64_t n = 0;
    bool exterior = false;
    friend bool operator==(const BlueSymbol&, const BlueSymbol&) = default;
};

inline std::string symbol_string(const BlueSymbol& s) {
    return std::string("(") + (s.h == H::l ? "l" : "r") + "," + (s.v == V::t ? "t" : "b") + "," +
           std::to_string(s.n) + ")";
}

inline std::int64_t n1(H h, const Params& p) { return h == H::l ? p.n0 + 1 : p.n0 + 2; }

struct Rect {
    Interval x, tau;
};

inline Rect blue_rect(H h, V v, const Params& p) {
    Rect R;
    R.x = h == H::l ? Interval{p.a - 3 * p.eps1, p.a - 2 * p.eps1} : Interval{p.b + 2 * p.eps1, p.b + 3 * p.eps1};
    R.tau = v == V::t ? Interval{p.b + p.eps1, p.b + p.eps1 + p.delta1}
                      : Interval{p.a - p.eps1 - p.delta1, p.a - p.eps1};
    return R;
}

// image symbol of the rectangle's starting corner: the sweep starts there
inline BlueSymbol gbar(const BlueSymbol& s) {
    BlueSymbol g = s;
    g.n = 2 * s.n;
    if (s.h == H::r && s.v == V::t) { g.h = H::l; g.v = V::t; }
    else if (s.h == H::l && s.v == V::t) { g.h = H::l; g.v = V::b; }
    else if (s.h == H::l && s.v == V::b) { g.h = H::r; g.v = V::b; }
    else { g.h = H::r; g.v = V::t; }
    return g;
}

// eta precedes theta: the return of A^B(theta) meets A^B(eta)
inline bool precedes(const BlueSymbol& eta, const BlueSymbol& theta, const Params& p) {
    BlueSymbol g = gbar(theta);
    if (eta.h != g.h || eta.n < n1(eta.h, p)) return false;
    if (!theta.exterior) return eta.n < g.n || (eta.n == g.n && g.v == V::b);
    return eta.n < g.n || (eta.n == g.n && g.v == V::t);
}

inline std::vector<BlueSymbol> blue_successors(const BlueSymbol& th, const Params& p) {
    std::vector<BlueSymbol> out;
    BlueSymbol g = gbar(th);
    for (std::int64_t n = n1(g.h, p); n <= g.n; ++n)
        for (V v : {V::t, V::b}) {
            BlueSymbol e{g.h, v, n, th.exterior};
            if (precedes(e, th, p)) out.push_back(e);
        }
    return out;
}

// Closed-form blue return in (x, tau) coordinates, templated for extended
// precision. Output tau is at level 2n.
template <class T>
struct BlueReturn {
    const Profiles* pr;
    T s, e1, c, beta, sigma;

    explicit BlueReturn(const Profiles& P)
        : pr(&P), s(T(P.prm.a) + T(P.prm.b)), e1(P.prm.eps1), c(P.xi2.c), beta(P.prm.beta_xi2), sigma(P.prm.sigma) {}

    T sig(std::int64_t k) const {
        using std::ldexp;
        using std::pow;
        if (sigma == T(2)) return ldexp(T(1), static_cast<int>(k));
        return pow(sigma, T(k));
    }
    struct Out {
        T X, tau;
        T dXdx, dXdt, dTdx, dTdt;
    };
    // v = t: perturbed at the pre-landing point; v = b: at the landing point
    Out apply(V v, std::int64_t n, T x, T tau) const {
        Out o;
        if (v == V::t) {
            T xp = sigma * sigma * (s - tau - e1);
            T f = pr->phi2.value(xp);
            T fd = pr->phi2.d1(xp);
            T big = sig(2 * n + 1) * c;
            o.X = s - tau - e1;
            o.tau = x * (1 - f * (1 - beta)) + big * f;
            o.dXdx = 0;
            o.dXdt = -1;
            o.dTdx = 1 - f * (1 - beta);
            o.dTdt = (big - (1 - beta) * x) * fd * (-sigma * sigma);
        } else {
            T X = s - tau + e1;
            T f = pr->phi2.value(X);
            T fd = pr->phi2.d1(X);
            T big = sig(2 * n) * c;
            o.X = X;
            o.tau = x * (1 - f * (1 - beta)) + big * f;
            o.dXdx = 0;
            o.dXdt = -1;
            o.dTdx = 1 - f * (1 - beta);
            o.dTdt = -(big - (1 - beta) * x) * fd;
        }
        return o;
    }
    // h2 shear at the stage where it acts, as slope in the landing's rescaled frame
    T h2_inclination(V v, std::int64_t n, T x, T tau) const {
        using std::abs;
        if (v == V::t) {
            T xp = sigma * sigma * (s - tau - e1);
            T yp = x / sig(2 * n + 1);
            T g = pr->phi2.d1(xp) * (c - (1 - beta) * yp);
            return abs(g) * sig(2 * n + 3);
        }
        T X = s - tau + e1;
        T yl = x / sig(2 * n);
        T g = pr->phi2.d1(X) * (c - (1 - beta) * yl);
        return abs(g) * sig(2 * n);
    }
};

// which blue rectangle holds a point whose tau is given at level n2 (= 2n)
template <class T>
std::optional<BlueSymbol> locate_blue(T X, T tau2n, std::int64_t n2, const Params& p) {
    for (H h : {H::l, H::r}) {
        Rect R = blue_rect(h, V::t, p);
        if (!(X >= T(R.x.lo) && X <= T(R.x.hi))) continue;
        T t = tau2n;
        for (std::int64_t n = n2; n >= n1(h, p); --n) {
            for (V v : {V::t, V::b}) {
                Rect Rv = blue_rect(h, v, p);
                if (t >= T(Rv.tau.lo) && t <= T(Rv.tau.hi)) return BlueSymbol{h, v, n, false};
            }
            t /= T(p.sigma);
            if (t < T(p.a_tilde) / 4) break;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// f2 on the S tower: each 16^d m landing pushes tau by phi(x) psi(tau) kappa / ln n.

struct EscapeOutcome {
    bool exited = false;
    std::int64_t exit_cycle = -1;  // d with tau_d first outside [a,b]
    std::int64_t cycles = 0;
    double tau_final = 0;
    bool certified = false;        // finite exit proven (phi > 0 and psi > 0)
    double log10_exit_bound = 0;   // upper bound on log10 of the exit cycle when not exited
};

inline EscapeOutcome escape_recursion(const Profiles& P, double x0, double tau0, Level m0,
                                      std::int64_t max_cycles) {
    const Params& p = P.prm;
    EscapeOutcome o;
    double ph = P.K.phi(x0);
    double tau = tau0;
    double lm = m0.log();
    const double l16 = std::log(16.0);
    for (std::int64_t d = 0; d < max_cycles; ++d) {
        if (tau < p.a || tau > p.b) {
            o.exited = true;
            o.exit_cycle = d;
            o.cycles = d;
            o.tau_final = tau;
            return o;
        }
        if (ph == 0) break;  // pushes vanish: tau stays put forever
        tau += ph * P.psi.value(tau) * p.kappa / (lm + (d + 1) * l16);
    }
    o.cycles = max_cycles;
    o.tau_final = tau;
    if (tau < p.a || tau > p.b) {
        o.exited = true;
        o.exit_cycle = max_cycles;
        return o;
    }
    double ps = P.psi.value(tau);
    o.certified = ph > 0 && ps > 0;
    if (o.certified) {
        // psi is nondecreasing on [a+eps1, b] and >= psi(tau) on the way up to b,
        // so sum_{d=D0}^{D} c/(lm + d l16) >= b - tau bounds the exit cycle.
        double cst = ph * std::min(ps, 1.0) * p.kappa / l16;
        double X0 = lm / l16 + static_cast<double>(max_cycles) + 1;
        double need = (p.b - tau) / cst;  // ln(X_D / X0) >= need
        o.log10_exit_bound = (std::log(X0) + need) / std::log(10.0);
    }
    return o;
}

}  // namespace fig8
