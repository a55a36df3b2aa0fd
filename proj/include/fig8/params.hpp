#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace fig8 {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Params {
    double sigma = 2.0;
    double a_tilde = 1.30;
    double b_tilde = 1.48;
    double a = 1.345;
    double b = 1.435;
    double eps1 = 0.003;
    double delta1 = 3e-4;
    int n0 = 4;
    int k0 = 12;
    double p = 16.0;
    double kappa = 0.05;
    double beta_xi2 = 0.1;
    double q1 = 3.0;
    double cantor_measure_fraction = 0.3;
    int cantor_depth = 12;

    // a, b, delta1 and p follow from the primary constants.
    void derive() {
        a = a_tilde + (b_tilde - a_tilde) / 4;
        b = b_tilde - (b_tilde - a_tilde) / 4;
        delta1 = eps1 / 10;
        p = std::pow(sigma, 4);
    }

    double s() const { return a + b; }
    double pow_sigma(double k) const {
        if (sigma == 2.0) return std::ldexp(1.0, static_cast<int>(k));
        return std::pow(sigma, k);
    }
    double eps_tilde() const { return 2 * eps1 / (b - a); }
    double delta_tilde() const { return 2 * delta1 / (b - a); }
    // fixed point of the affine zone of xi2 and its offset
    double q2() const { return pow_sigma(-n0 - 1) * (a + b / sigma) / 2; }
    double c_xi2() const { return q2() * (1 - beta_xi2); }
};

inline Params default_params() {
    Params p;
    p.derive();
    return p;
}

// Largest kappa with c^2 kappa / ln 2 < eps1 needs the Cantor C^1 constant,
// so that preset is finished in profiles.hpp (regular_params).

struct Interval {
    double lo = 0, hi = 0;
    bool contains(double v) const { return v >= lo && v <= hi; }
    bool contains_open(double v) const { return v > lo && v < hi; }
    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
};

struct CheckItem {
    std::string name;
    bool pass = false;
    double slack = 0;  // positive when satisfied
    bool gating = true;
};

struct ValidationReport {
    std::vector<CheckItem> items;
    bool pass() const {
        return std::all_of(items.begin(), items.end(),
                           [](const CheckItem& c) { return c.pass || !c.gating; });
    }
};

inline double eps1_bound_box(const Params& p) { return (p.b - p.a) / 8; }
inline double eps1_bound_gap(const Params& p) {
    return p.pow_sigma(-p.n0) * (p.a - p.b / p.sigma) / 10;
}
inline double eps1_bound_sigma(const Params& p) {
    return (p.sigma - p.b_tilde) * (p.b - p.a) / 4;
}

inline ValidationReport validate_params(const Params& p) {
    ValidationReport r;
    auto add = [&](std::string name, double slack, bool gating = true) {
        r.items.push_back({std::move(name), std::isfinite(slack) && slack > 0, slack, gating});
    };
    const double vals[] = {p.sigma, p.a_tilde, p.b_tilde, p.a, p.b, p.eps1, p.delta1,
                           p.p, p.kappa, p.beta_xi2, p.q1, p.cantor_measure_fraction};
    bool finite = std::all_of(std::begin(vals), std::end(vals),
                              [](double v) { return std::isfinite(v); });
    add("finite", finite ? 1.0 : -1.0);
    if (!finite) return r;

    add("sigma > 1", p.sigma - 1);
    add("1 < a_tilde", p.a_tilde - 1);
    add("a_tilde < b_tilde", p.b_tilde - p.a_tilde);
    add("b_tilde < sigma", p.sigma - p.b_tilde);
    add("b_tilde - a_tilde < (sigma-1)/5", (p.sigma - 1) / 5 - (p.b_tilde - p.a_tilde));
    add("a + b = a_tilde + b_tilde", 1e-12 - std::abs(p.a + p.b - p.a_tilde - p.b_tilde));
    add("b - a = (b_tilde - a_tilde)/2",
        1e-12 - std::abs((p.b - p.a) - (p.b_tilde - p.a_tilde) / 2));
    add("eps1 > 0", p.eps1);
    add("eps1 < (b-a)/8", eps1_bound_box(p) - p.eps1);
    add("eps1 < sigma^-n0 (a - b/sigma)/10", eps1_bound_gap(p) - p.eps1);
    add("eps1 < (sigma - b_tilde)(b-a)/4", eps1_bound_sigma(p) - p.eps1);
    add("a - 5 eps1 >= a_tilde", p.a - 5 * p.eps1 - p.a_tilde + 1e-15);
    add("b + 5 eps1 <= b_tilde", p.b_tilde - (p.b + 5 * p.eps1) + 1e-15);
    add("delta1 = eps1/10", 1e-15 - std::abs(p.delta1 - p.eps1 / 10));
    add("n0 >= 1", p.n0 - 0.5);
    add("k0 >= 6", p.k0 - 5.5);
    add("p = sigma^4", 1e-12 * p.p - std::abs(p.p - std::pow(p.sigma, 4)));
    add("kappa > 0", p.kappa);
    add("0 < beta_xi2", p.beta_xi2);
    add("beta_xi2 < 1", 1 - p.beta_xi2);
    add("sigma < q1", p.q1 - p.sigma);
    add("q1 < sigma^2", p.sigma * p.sigma - p.q1);
    add("0 < cantor_measure_fraction < 1",
        std::min(p.cantor_measure_fraction, 1 - p.cantor_measure_fraction));
    add("cantor_depth >= 1", p.cantor_depth - 0.5);
    // (V2): affine image of [-Y1, Y1] inside the open band of Q's heights
    double Y1 = p.pow_sigma(-p.n0 - 1) * (p.a - p.eps1);
    double c = p.c_xi2();
    double lo = p.pow_sigma(-p.n0 - 2) * (p.b + 4 * p.eps1);
    double hi = p.pow_sigma(-p.n0 - 1) * (p.a - 3 * p.eps1);
    add("xi2 affine image above sigma^(-n0-2)(b+4eps1)", (c - p.beta_xi2 * Y1) - lo);
    add("xi2 affine image below sigma^(-n0-1)(a-3eps1)", hi - (c + p.beta_xi2 * Y1));
    return r;
}

// ---------------------------------------------------------------------------
// Exact levels. Box levels reach 16^d m with d far beyond any integer type,
// so a level is stored as odd * 2^exp.

struct Level {
    std::int64_t odd = 1;
    std::int64_t exp = 0;

    static Level from(std::int64_t n) {
        if (n <= 0) throw std::invalid_argument("level must be positive");
        Level l;
        while ((n & 1) == 0) {
            n >>= 1;
            ++l.exp;
        }
        l.odd = n;
        return l;
    }
    Level doubled(std::int64_t times = 1) const { return {odd, exp + times}; }
    double log() const { return std::log(static_cast<double>(odd)) + exp * std::log(2.0); }
    bool fits_int64() const {
        return exp < 62 && (odd >> (62 - exp)) == 0;
    }
    std::int64_t value() const {
        if (!fits_int64()) throw std::overflow_error("level exceeds int64");
        return odd << exp;
    }
    friend bool operator==(const Level&, const Level&) = default;
};

// ---------------------------------------------------------------------------
// A positive or negative number t * sigma^(-n); keeps tiny heights exact.

struct ScaledValue {
    double t = 0;
    std::int64_t n = 0;

    double raw(double sigma) const {
        if (t == 0) return 0;
        if (sigma == 2.0) {
            if (n > 2000) return 0;
            if (n < -2000) return std::copysign(std::numeric_limits<double>::infinity(), t);
            return std::ldexp(t, static_cast<int>(-n));
        }
        return t * std::pow(sigma, static_cast<double>(-n));
    }
    // t in [1, sigma) in magnitude, or t == 0 with n == 0
    ScaledValue normalized(double sigma) const {
        ScaledValue r = *this;
        if (r.t == 0 || !std::isfinite(r.t)) {
            if (r.t == 0) r.n = 0;
            return r;
        }
        if (sigma == 2.0) {
            int e;
            double m = std::frexp(r.t, &e);  // |m| in [0.5,1)
            r.t = 2 * m;
            r.n -= (e - 1);
            return r;
        }
        double k = std::floor(std::log(std::abs(r.t)) / std::log(sigma));
        r.t /= std::pow(sigma, k);
        r.n -= static_cast<std::int64_t>(k);
        while (std::abs(r.t) >= sigma) { r.t /= sigma; ++r.n; }
        while (std::abs(r.t) < 1) { r.t *= sigma; --r.n; }
        return r;
    }
    ScaledValue at_level(std::int64_t m, double sigma) const {
        // same value expressed as t' sigma^(-m)
        if (t == 0) return {0, m};
        double shift = static_cast<double>(m - n);
        double f = (sigma == 2.0 && std::abs(shift) < 2000) ? std::ldexp(1.0, static_cast<int>(shift))
                                                            : std::pow(sigma, shift);
        return {t * f, m};
    }
    static ScaledValue from_raw(double y, double sigma) { return ScaledValue{y, 0}.normalized(sigma); }
};

inline ScaledValue scaled_mul(ScaledValue v, double f, double sigma) {
    return ScaledValue{v.t * f, v.n}.normalized(sigma);
}

inline ScaledValue scaled_add(ScaledValue u, ScaledValue v, double sigma) {
    if (u.t == 0) return v.normalized(sigma);
    if (v.t == 0) return u.normalized(sigma);
    if (u.n > v.n) std::swap(u, v);  // u is the larger magnitude scale
    std::int64_t gap = v.n - u.n;
    if (gap * std::log2(sigma) > 1100) return u.normalized(sigma);
    return ScaledValue{u.t + v.at_level(u.n, sigma).t, u.n}.normalized(sigma);
}

// compare |v| against a raw threshold without forming tiny numbers
inline int scaled_cmp(ScaledValue v, double thr, double sigma) {
    double r = v.raw(sigma);
    if (r < thr) return -1;
    if (r > thr) return 1;
    return 0;
}

// ---------------------------------------------------------------------------

enum class Chart { Local, LoopUpper, LoopLower, LocalP, LoopOP, LoopPO };

inline const char* chart_name(Chart c) {
    switch (c) {
        case Chart::Local: return "Local";
        case Chart::LoopUpper: return "LoopUpper";
        case Chart::LoopLower: return "LoopLower";
        case Chart::LocalP: return "LocalP";
        case Chart::LoopOP: return "LoopOP";
        case Chart::LoopPO: return "LoopPO";
    }
    return "?";
}

inline bool is_loop(Chart c) {
    return c == Chart::LoopUpper || c == Chart::LoopLower || c == Chart::LoopOP || c == Chart::LoopPO;
}

// Local charts: the point (x, sigma^-n tau), seen from O (Local) or from P
// through s_pp (LocalP). Loop charts: x holds y_dep, (tau, n) holds x_dep,
// stage counts excursion steps already taken.
struct ScaledPoint {
    double x = 0;
    double tau = 0;
    std::int64_t n = 0;
    Chart chart = Chart::Local;
    int stage = 0;

    ScaledValue yv() const { return {tau, n}; }
    double y(double sigma) const { return yv().raw(sigma); }

    static ScaledPoint local(double x, ScaledValue y, double sigma, Chart c = Chart::Local) {
        ScaledValue v = y.normalized(sigma);
        return {x, v.t, v.n, c, 0};
    }
    static ScaledPoint from_raw(double x, double y, double sigma) {
        return local(x, ScaledValue{y, 0}, sigma);
    }
    // box-pinned form: same point with tau relative to level m
    ScaledPoint pinned(std::int64_t m, double sigma) const {
        ScaledPoint q = *this;
        ScaledValue v = yv().at_level(m, sigma);
        q.tau = v.t;
        q.n = m;
        return q;
    }
    ScaledPoint canonical(double sigma) const {
        if (is_loop(chart)) return *this;
        return local(x, yv(), sigma, chart);
    }
};

// ---------------------------------------------------------------------------

enum class BoxKind { Stable, ExtendedStable, EpsBox, Unstable, ExteriorStable };

struct Box {
    Interval x;
    Interval tau;
    std::int64_t level = 0;    // y-range is sigma^-level * tau
    std::int64_t x_level = 0;  // x-range is sigma^-x_level * x (unstable boxes)
    BoxKind kind = BoxKind::Stable;

    bool contains(const ScaledPoint& q, double sigma) const {
        ScaledPoint r = q.pinned(level, sigma);
        double xs = x_level == 0 ? q.x : ScaledValue{q.x, 0}.at_level(x_level, sigma).t;
        return x.contains(xs) && tau.contains(r.tau);
    }
    double area_scaled() const { return x.width() * tau.width(); }
};

inline Box make_box(BoxKind kind, std::int64_t n, const Params& p) {
    if (n < p.n0) throw std::invalid_argument("box level below n0");
    Box bx;
    bx.level = n;
    bx.kind = kind;
    Interval I{p.a, p.b}, It{p.a_tilde, p.b_tilde};
    Interval C{p.a - 3 * p.eps1, p.b + 3 * p.eps1};
    switch (kind) {
        case BoxKind::Stable: bx.x = I; bx.tau = I; break;
        case BoxKind::ExtendedStable: bx.x = It; bx.tau = It; break;
        case BoxKind::EpsBox: bx.x = C; bx.tau = C; break;
        case BoxKind::Unstable:
            bx.x = It; bx.x_level = n; bx.tau = It; bx.level = 0; break;
        case BoxKind::ExteriorStable: bx.x = I; bx.tau = {-p.b, -p.a}; break;
    }
    return bx;
}

// ---------------------------------------------------------------------------
// L_n : S_n -> [-1,1]^2

struct Rescaler {
    std::int64_t level;
    double ax, bx;  // u = ax * x - bx, same coefficients for tau

    Rescaler(std::int64_t n, const Params& p)
        : level(n), ax(2 / (p.b - p.a)), bx((p.a + p.b) / (p.b - p.a)) {}

    struct UV { double u, v; };

    UV forward(const ScaledPoint& q, double sigma) const {
        std::int64_t d = level - q.n;
        if (d > 4 || d < -4) throw std::invalid_argument("rescale: level mismatch beyond 4");
        double t = q.tau * std::pow(sigma, static_cast<double>(d));
        return {ax * q.x - bx, ax * t - bx};
    }
    ScaledPoint inverse(UV w) const {
        ScaledPoint q;
        q.x = (w.u + bx) / ax;
        q.tau = (w.v + bx) / ax;
        q.n = level;
        return q;
    }
};

inline Rescaler::UV rescale(std::int64_t n, const ScaledPoint& q, const Params& p) {
    return Rescaler(n, p).forward(q, p.sigma);
}
inline ScaledPoint unrescale(std::int64_t n, Rescaler::UV w, const Params& p) {
    return Rescaler(n, p).inverse(w);
}

enum class Symmetry { s_v, s_h, minus_id, s_pp };

inline ScaledPoint apply_symmetry(Symmetry s, ScaledPoint q, const Params& p) {
    switch (s) {
        case Symmetry::s_v: q.tau = -q.tau; return q;
        case Symmetry::s_h: q.x = -q.x; return q;
        case Symmetry::minus_id: q.x = -q.x; q.tau = -q.tau; return q;
        case Symmetry::s_pp: {
            if (is_loop(q.chart)) throw std::invalid_argument("s_pp needs a local point");
            if (q.n > 900 || q.n < -900) throw std::invalid_argument("s_pp on a scaled point out of raw range");
            double y = q.y(p.sigma);
            return ScaledPoint::from_raw(2 * p.p - q.x, 2 * p.p - y, p.sigma);
        }
    }
    return q;
}

}  // namespace fig8
