#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fig8/params.hpp"
#include "fig8/profiles.hpp"

namespace fig8 {

struct ModelBoundary : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// raw x of a tower orbit fell below the normal double range
struct RepresentationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class MapId { F0, F1, F2, BowenF0, BowenF2 };

inline const char* map_name(MapId m) {
    switch (m) {
        case MapId::F0: return "F0";
        case MapId::F1: return "F1";
        case MapId::F2: return "F2";
        case MapId::BowenF0: return "BowenF0";
        case MapId::BowenF2: return "BowenF2";
    }
    return "?";
}
inline MapId parse_map(const std::string& s) {
    if (s == "F0") return MapId::F0;
    if (s == "F1") return MapId::F1;
    if (s == "F2") return MapId::F2;
    if (s == "BowenF0") return MapId::BowenF0;
    if (s == "BowenF2") return MapId::BowenF2;
    throw ConfigError("unknown map: " + s);
}
inline bool is_bowen(MapId m) { return m == MapId::BowenF0 || m == MapId::BowenF2; }

struct Vec2 {
    double x = 0, y = 0;
};

struct Mat2 {
    double a = 1, b = 0, c = 0, d = 1;  // [[a,b],[c,d]]
    double det() const { return a * d - b * c; }
    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    Mat2 inverse() const {
        double D = det();
        return {d / D, -b / D, -c / D, a / D};
    }
};

namespace tag {
constexpr unsigned LinearV = 1u << 0;
constexpr unsigned Excursion = 1u << 1;
constexpr unsigned Identity = 1u << 2;
constexpr unsigned PerturbH1 = 1u << 3;
constexpr unsigned PerturbH2 = 1u << 4;
constexpr unsigned PerturbH3 = 1u << 5;
constexpr unsigned TrappedQ = 1u << 6;
}  // namespace tag

struct StepResult {
    ScaledPoint next;
    unsigned tags = 0;
    int stage = 0;  // excursion stage of `next` (0 outside the loop)
    Mat2 jacobian;  // raw local coordinates; loop charts use (x_dep, y_dep)
};

struct TrapRegion {
    Interval x, y;
    bool contains(double px, double py) const { return x.contains(px) && y.contains(py); }
    // distance to the boundary, positive inside
    double margin(double px, double py) const {
        return std::min({px - x.lo, x.hi - px, py - y.lo, y.hi - py});
    }
};

// One raw point after an h-map, with y kept in scaled form.
struct HOut {
    double x;
    ScaledValue y;
    Mat2 jac;
    bool moved;
};

class Model {
public:
    Params prm;
    Profiles pr;
    double s;
    double sigma;
    double Dlo;       // departure band [Dlo, sigma Dlo)
    double Xdep;      // departure strip half width
    double XV;        // linear zone half width
    double DloB, XVB; // Bowen-mode band
    TrapRegion Q;

    explicit Model(const Params& p)
        : prm(p), pr(p), s(p.a + p.b), sigma(p.sigma) {
        Dlo = (p.b + 3.5 * p.eps1) / sigma;
        Xdep = p.pow_sigma(3 - 2 * p.n0);
        XV = sigma * sigma * (s - Dlo);
        DloB = p.a_tilde;
        XVB = sigma * sigma * (s - DloB);
        Q.x = {p.b + 2 * p.eps1 + p.delta1, sigma * sigma * (p.a - 2 * p.eps1 - p.delta1)};
        Q.y = {p.pow_sigma(-p.n0 - 2) * (p.b + 4 * p.eps1), p.pow_sigma(-p.n0 - 1) * (p.a - 3 * p.eps1)};
        if (!(Q.x.lo < Q.x.hi && Q.y.lo < Q.y.hi)) throw ConfigError("trapping region Q is empty");
    }

    // -------------------------------------------------------------- h maps

    HOut h1_apply(double x, ScaledValue y) const {
        if (x < 0) {
            HOut r = h1_pos(-x, ScaledValue{-y.t, y.n});
            r.x = -r.x;
            r.y.t = -r.y.t;
            return r;
        }
        return h1_pos(x, y);
    }
    HOut h2_apply(double x, ScaledValue y) const {
        if (x < 0) {
            HOut r = h2_pos(-x, ScaledValue{-y.t, y.n});
            r.x = -r.x;
            r.y.t = -r.y.t;
            return r;
        }
        return h2_pos(x, y);
    }

    // h3 in box-pinned form; jacobian in (x, tau) coordinates at the box level
    struct H3Out {
        ScaledPoint q;
        Mat2 jac_scaled;
        bool moved;
    };
    H3Out h3_apply(const ScaledPoint& q, bool bowen = false) const {
        H3Out r{q, {}, false};
        if (q.chart != Chart::Local && q.chart != Chart::LocalP) return r;
        if (q.chart == Chart::LocalP && !bowen) return r;
        ScaledPoint c = q.canonical(sigma);
        double ax = std::abs(c.x), at = std::abs(c.tau);
        if (c.tau == 0 || c.x == 0) return r;
        if (!(at >= prm.a_tilde && at <= prm.b_tilde) || c.n < prm.n0) return r;
        bool interior = (c.x > 0) == (c.tau > 0);
        if (bowen) interior = false;  // Bowen towers use the 4^d schedule
        Level L = Level::from(c.n);
        if (!omega_member(L, prm.n0, interior)) return r;
        double ph = pr.K.phi(ax);
        double ps = pr.psi.value(at);
        double e = eps_scaled(L, prm.kappa);
        double sgn_t = c.tau > 0 ? 1.0 : -1.0;
        double sgn_x = c.x > 0 ? 1.0 : -1.0;
        r.jac_scaled = {1, 0, sgn_t * sgn_x * pr.K.phi_d1(ax) * ps * e, 1 + ph * pr.psi.d1(at) * e};
        if (ph == 0 || ps == 0) return r;
        c.tau = sgn_t * (at + ph * ps * e);
        r.q = c;
        r.moved = true;
        return r;
    }

    // ------------------------------------------------------------ f0 steps

    StepResult f0_step(const ScaledPoint& q, bool bowen = false) const {
        StepResult r;
        if (is_loop(q.chart)) return loop_step(q, bowen);
        if (q.chart == Chart::LocalP && !bowen) throw ModelBoundary("P chart outside Bowen mode");
        double D = bowen ? DloB : Dlo;
        double X = bowen ? XVB : XV;
        double y = q.y(sigma);
        double ax = std::abs(q.x), ay = std::abs(y);
        // far field and the rotation centre
        Vec2 w = raw_position(q);
        if (std::max(std::abs(w.x), std::abs(w.y)) > 4 * prm.p ||
            std::hypot(std::abs(w.x) - prm.p, std::abs(w.y) - prm.p) < 0.5) {
            r.next = q;
            r.tags = tag::Identity;
            return r;
        }
        if (ax <= X && ay < sigma * D) {
            if (ay >= D) {
                if (ax > Xdep) throw ModelBoundary("departure band outside the strip");
                if (bowen && y < 0) throw ModelBoundary("Bowen mode has no lower loop");
                ScaledPoint e;
                e.x = y;
                ScaledValue xd = ScaledValue::from_raw(q.x, sigma);
                e.tau = xd.t;
                e.n = xd.n;
                e.stage = 1;
                if (bowen)
                    e.chart = q.chart == Chart::Local ? Chart::LoopOP : Chart::LoopPO;
                else
                    e.chart = y > 0 ? Chart::LoopUpper : Chart::LoopLower;
                r.next = e;
                r.stage = 1;
                r.tags = tag::Excursion;
                r.jacobian = {1, 0, 0, 1};
                return r;
            }
            ScaledPoint nq = q;
            nq.x = q.x / (sigma * sigma);
            if (nq.x != 0 && std::abs(nq.x) < std::numeric_limits<double>::min())
                throw RepresentationError("x below normal range; use the return skeleton");
            nq.n = q.n - 1;
            if (nq.tau == 0) nq.n = 0;
            r.next = nq;
            r.tags = tag::LinearV;
            r.jacobian = {1 / (sigma * sigma), 0, 0, sigma};
            return r;
        }
        throw ModelBoundary("point outside the modeled region");
    }

    StepResult f1_step(const ScaledPoint& q) const {
        StepResult r = f0_step(q, false);
        apply_h12(r);
        return r;
    }

    StepResult f2_step(const ScaledPoint& q) const {
        StepResult r = f1_step(q);
        if (r.next.chart == Chart::Local) {
            H3Out h = h3_apply(r.next, false);
            if (h.moved) {
                r.next = h.q.canonical(sigma);
                r.tags |= tag::PerturbH3;
                Mat2 J = h.jac_scaled;
                J.c *= std::pow(sigma, -static_cast<double>(h.q.n));
                r.jacobian = J * r.jacobian;
            }
        }
        return r;
    }

    StepResult bowen_step(const ScaledPoint& q, bool perturbed = false) const {
        StepResult r = f0_step(q, true);
        if (perturbed && (r.next.chart == Chart::Local || r.next.chart == Chart::LocalP)) {
            H3Out h = h3_apply(r.next, true);
            if (h.moved) {
                r.next = h.q.canonical(sigma);
                r.tags |= tag::PerturbH3;
            }
        }
        return r;
    }

    StepResult step(MapId m, const ScaledPoint& q) const {
        switch (m) {
            case MapId::F0: return f0_step(q, false);
            case MapId::F1: return f1_step(q);
            case MapId::F2: return f2_step(q);
            case MapId::BowenF0: return bowen_step(q, false);
            case MapId::BowenF2: return bowen_step(q, true);
        }
        return f0_step(q);
    }

    bool in_Q(const ScaledPoint& q) const {
        if (q.chart != Chart::Local) return false;
        return Q.contains(q.x, q.y(sigma));
    }

    // Position in the plane; loop points are placed on the annulus around (p,p).
    Vec2 raw_position(const ScaledPoint& q) const {
        const double p = prm.p;
        switch (q.chart) {
            case Chart::Local: return {q.x, q.y(sigma)};
            case Chart::LocalP: return {2 * p - q.x, 2 * p - q.y(sigma)};
            default: break;
        }
        bool bowen = q.chart == Chart::LoopOP || q.chart == Chart::LoopPO;
        double D = bowen ? DloB : Dlo;
        double xd = ScaledValue{q.tau, q.n}.raw(sigma);
        double ay = std::abs(q.x);
        double sgn = q.x < 0 ? -1.0 : 1.0;
        double u = std::clamp(sgn * xd / Xdep, -1.0, 1.0);
        double v = std::clamp((ay - D) / (sigma * D - D), 0.0, 1.0);
        double r0 = q.chart == Chart::LoopPO ? 2.5 : 1.0;
        double th = 2 * std::numbers::pi * q.stage / (prm.k0 - 1);
        double wx = r0 + 0.5 * v, wy = -0.25 * u;
        Vec2 e{p + std::cos(th) * wx - std::sin(th) * wy, p + std::sin(th) * wx + std::cos(th) * wy};
        if (q.chart == Chart::LoopLower) return {-e.x, -e.y};
        if (q.chart == Chart::LoopPO) return {2 * p - e.x, 2 * p - e.y};
        return e;
    }

private:
    HOut h1_pos(double x, ScaledValue y) const {
        HOut r{x, y, {}, false};
        double yr = y.raw(sigma);
        double f1 = pr.phi1.value(yr);
        double D = pr.xi1.disp(x);
        if (f1 == 0 || D == 0) {
            r.jac = {1 + f1 * pr.xi1.disp_d1(x), pr.phi1.d1(yr) * D, 0, 1};
            return r;
        }
        r.x = x + f1 * D;
        r.jac = {1 + f1 * pr.xi1.disp_d1(x), pr.phi1.d1(yr) * D, 0, 1};
        r.moved = true;
        return r;
    }

    HOut h2_pos(double x, ScaledValue y) const {
        HOut r{x, y, {}, false};
        double f2 = pr.phi2.value(x);
        double yr = y.raw(sigma);
        double ay = std::abs(yr);
        if (f2 == 0 || ay >= pr.xi2.Y0) {
            double g = pr.phi2.d1(x) * (pr.xi2.value(yr) - yr);
            r.jac = {1, 0, g, f2 * pr.xi2.d1(yr) + 1 - f2};
            return r;
        }
        double beta = prm.beta_xi2, c = pr.xi2.c;
        if (ay <= pr.xi2.Y1) {
            // y + f2 (beta y + c - y), exact for tiny y
            ScaledValue lin{y.t * (1 - f2 * (1 - beta)), y.n};
            r.y = scaled_add(lin, ScaledValue::from_raw(f2 * c, sigma), sigma);
            r.jac = {1, 0, pr.phi2.d1(x) * (c - (1 - beta) * yr), f2 * beta + 1 - f2};
        } else {
            double xi = pr.xi2.value(yr);
            r.y = ScaledValue::from_raw(yr + f2 * (xi - yr), sigma);
            r.jac = {1, 0, pr.phi2.d1(x) * (xi - yr), f2 * pr.xi2.d1(yr) + 1 - f2};
        }
        r.moved = true;
        return r;
    }

    void apply_h12(StepResult& r) const {
        if (r.next.chart != Chart::Local) return;
        ScaledPoint& q = r.next;
        HOut a = h1_apply(q.x, q.yv());
        if (a.moved) {
            q.x = a.x;
            r.tags |= tag::PerturbH1;
        }
        r.jacobian = a.jac * r.jacobian;
        HOut b = h2_apply(q.x, q.yv());
        if (b.moved) {
            ScaledValue v = b.y.normalized(sigma);
            q.tau = v.t;
            q.n = v.n;
            r.tags |= tag::PerturbH2;
        }
        r.jacobian = b.jac * r.jacobian;
        if (in_Q(q)) r.tags |= tag::TrappedQ;
    }

    StepResult loop_step(const ScaledPoint& q, bool bowen) const {
        bool bowen_chart = q.chart == Chart::LoopOP || q.chart == Chart::LoopPO;
        if (bowen != bowen_chart) throw ModelBoundary("loop chart does not match the map");
        StepResult r;
        if (q.stage < prm.k0 - 2) {
            r.next = q;
            r.next.stage = q.stage + 1;
            r.stage = r.next.stage;
            r.tags = tag::Excursion;
            r.jacobian = {1, 0, 0, 1};
            return r;
        }
        // T_out: onto the pre-landing point, one linear step before the landing
        double yd = q.x;
        double sgn = yd < 0 ? -1.0 : 1.0;
        ScaledPoint e;
        e.x = sigma * sigma * sgn * (s - std::abs(yd));
        e.tau = q.tau;
        e.n = q.n + 1;
        if (e.tau == 0) e.n = 0;
        e.chart = q.chart == Chart::LoopOP ? Chart::LocalP : Chart::Local;
        r.next = e.canonical(sigma);
        r.tags = tag::Excursion;
        r.jacobian = {0, -sigma * sigma, 1 / sigma, 0};
        return r;
    }
};

}  // namespace fig8
