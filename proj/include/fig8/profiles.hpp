#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fig8/params.hpp"

namespace fig8 {

// Septic smoothstep: S(0)=0, S(1)=1, first three derivatives vanish at both ends.
template <class T>
T smoothstep(T u) {
    if (u <= 0) return T(0);
    if (u >= 1) return T(1);
    T u2 = u * u;
    return u2 * u2 * (T(35) - T(84) * u + T(70) * u2 - T(20) * u2 * u);
}
template <class T>
T smoothstep_d1(T u) {
    if (u <= 0 || u >= 1) return T(0);
    T v = u * (1 - u);
    return T(140) * v * v * v;
}
template <class T>
T smoothstep_d2(T u) {
    if (u <= 0 || u >= 1) return T(0);
    T v = u * (1 - u);
    return T(420) * v * v * (1 - 2 * u);
}
template <class T>
T smoothstep_d3(T u) {
    if (u <= 0 || u >= 1) return T(0);
    return T(840) * u * (1 - u) * (1 - 5 * u + 5 * u * u);
}
// integral of S from 0 to t, t in [0,1]; equals 1/2 at t = 1
template <class T>
T smoothstep_int(T t) {
    if (t <= 0) return T(0);
    if (t >= 1) return T(0.5) + (t - 1);
    T t5 = t * t * t * t * t;
    return t5 * (T(7) - T(14) * t + T(10) * t * t - T(2.5) * t * t * t);
}

struct Bump {
    double l0, l1, r1, r0;

    Bump(double l0_, double l1_, double r1_, double r0_) : l0(l0_), l1(l1_), r1(r1_), r0(r0_) {
        if (!(l0 < l1 && l1 < r1 && r1 < r0)) throw std::invalid_argument("bump knots out of order");
    }
    template <class T>
    T value(T x) const {
        if (x <= l0 || x >= r0) return T(0);
        if (x < l1) return smoothstep((x - l0) / T(l1 - l0));
        if (x <= r1) return T(1);
        return smoothstep((T(r0) - x) / T(r0 - r1));
    }
    template <class T>
    T d1(T x) const {
        if (x <= l0 || x >= r0 || (x >= l1 && x <= r1)) return T(0);
        if (x < l1) return smoothstep_d1((x - l0) / T(l1 - l0)) / T(l1 - l0);
        return -smoothstep_d1((T(r0) - x) / T(r0 - r1)) / T(r0 - r1);
    }
    template <class T>
    T d2(T x) const {
        if (x <= l0 || x >= r0 || (x >= l1 && x <= r1)) return T(0);
        if (x < l1) {
            T w = l1 - l0;
            return smoothstep_d2((x - l0) / w) / (w * w);
        }
        T w = r0 - r1;
        return smoothstep_d2((T(r0) - x) / w) / (w * w);
    }
    double max_d1() const { return 2.1875 / std::min(l1 - l0, r0 - r1); }
};

// Ramp R on [0,1]: convex up to u_c, concave mirror above, R(1)=1.
struct ConvexRampShape {
    double uc, w;
    explicit ConvexRampShape(double threshold) : uc(1 - (1 - threshold) / 2), w((1 - threshold) / 2) {}
    template <class T>
    T value(T u) const {
        if (u <= 0) return T(0);
        if (u >= 1) return T(1);
        if (u <= uc) return T(2 * uc) * smoothstep_int(u / T(uc));
        T z = (u - T(uc)) / T(w);
        return T(uc) + T(2 * w) * (z - smoothstep_int(z));
    }
    template <class T>
    T d1(T u) const {
        if (u <= 0 || u >= 1) return T(0);
        if (u <= uc) return 2 * smoothstep(u / T(uc));
        return 2 * (1 - smoothstep((u - T(uc)) / T(w)));
    }
    template <class T>
    T d2(T u) const {
        if (u <= 0 || u >= 1) return T(0);
        if (u <= uc) return 2 * smoothstep_d1(u / T(uc)) / T(uc);
        return -2 * smoothstep_d1((u - T(uc)) / T(w)) / T(w);
    }
};

// phi2: plateau on [l1, r1], convex ramps below the threshold
struct ConvexBump {
    double l0, l1, r1, r0, threshold;
    ConvexRampShape shape;

    ConvexBump(double l0_, double l1_, double r1_, double r0_, double thr)
        : l0(l0_), l1(l1_), r1(r1_), r0(r0_), threshold(thr), shape(thr) {
        if (!(l0 < l1 && l1 < r1 && r1 < r0)) throw std::invalid_argument("phi2 knots out of order");
    }
    template <class T>
    T value(T x) const {
        if (x <= l0 || x >= r0) return T(0);
        if (x < l1) return shape.value((x - l0) / T(l1 - l0));
        if (x <= r1) return T(1);
        return shape.value((T(r0) - x) / T(r0 - r1));
    }
    template <class T>
    T d1(T x) const {
        if (x <= l0 || x >= r0 || (x >= l1 && x <= r1)) return T(0);
        if (x < l1) return shape.d1((x - l0) / T(l1 - l0)) / T(l1 - l0);
        return -shape.d1((T(r0) - x) / T(r0 - r1)) / T(r0 - r1);
    }
    template <class T>
    T d2(T x) const {
        if (x <= l0 || x >= r0 || (x >= l1 && x <= r1)) return T(0);
        if (x < l1) {
            T w = l1 - l0;
            return shape.d2((x - l0) / w) / (w * w);
        }
        T w = r0 - r1;
        return shape.d2((T(r0) - x) / w) / (w * w);
    }
};

// xi1(x) = x + D(x); D vanishes off [b, sigma^2 a]
struct Xi1 {
    double b, e1, s2, a, q1;
    double xl, xr;  // ends of the middle segment
    double c;       // bend of the middle reparametrization
    double ustar;

    Xi1(const Params& p) : b(p.b), e1(p.eps1), s2(p.sigma * p.sigma), a(p.a), q1(p.q1) {
        xl = b + 3 * e1;
        xr = s2 * (a - 3 * e1);
        if (!(xl < q1 && q1 < xr)) throw ConfigError("q1 outside the middle segment of xi1");
        double target = 1 / (1 + s2);
        double lo = 0, hi = 1;
        for (int i = 0; i < 200; ++i) {
            double m = 0.5 * (lo + hi);
            (smoothstep(m) < target ? lo : hi) = m;
        }
        ustar = 0.5 * (lo + hi);
        double tq = (q1 - xl) / (xr - xl);
        c = (ustar - tq) / (tq * (1 - tq));
        if (!(std::abs(c) < 1)) throw ConfigError("xi1 reparametrization not monotone for this q1");
    }

    template <class T>
    T disp(T x) const {
        if (x <= b || x >= s2 * a) return T(0);
        if (x < b + e1) return T(e1) * smoothstep((x - b) / T(e1));
        if (x <= xl) return T(e1);
        if (x < xr) {
            T t = (x - xl) / T(xr - xl);
            T u = t + T(c) * t * (1 - t);
            return T(e1) - T((1 + s2) * e1) * smoothstep(u);
        }
        if (x <= s2 * (a - e1)) return T(-s2 * e1);
        return T(-s2 * e1) * (1 - smoothstep((x - T(s2 * (a - e1))) / T(s2 * e1)));
    }
    template <class T>
    T disp_d1(T x) const {
        if (x <= b || x >= s2 * a) return T(0);
        if (x < b + e1) return smoothstep_d1((x - b) / T(e1));
        if (x <= xl) return T(0);
        if (x < xr) {
            T L = T(xr - xl);
            T t = (x - xl) / L;
            T u = t + T(c) * t * (1 - t);
            T du = 1 + T(c) * (1 - 2 * t);
            return -T((1 + s2) * e1) * smoothstep_d1(u) * du / L;
        }
        if (x <= s2 * (a - e1)) return T(0);
        return smoothstep_d1((x - T(s2 * (a - e1))) / T(s2 * e1));
    }
    template <class T>
    T value(T x) const {
        T d = disp(x);
        if (d == 0) return x;
        return x + d;
    }
    template <class T>
    T d1(T x) const { return 1 + disp_d1(x); }
};

// xi2: identity for |y| >= Y0, affine beta*y + c for |y| <= Y1
struct Xi2 {
    double Y0, Y1, beta, c;
    Xi2(const Params& p)
        : Y0(p.pow_sigma(-p.n0 - 1) * p.a),
          Y1(p.pow_sigma(-p.n0 - 1) * (p.a - p.eps1)),
          beta(p.beta_xi2),
          c(p.c_xi2()) {
        double lo = p.pow_sigma(-p.n0 - 2) * (p.b + 4 * p.eps1);
        double hi = p.pow_sigma(-p.n0 - 1) * (p.a - 3 * p.eps1);
        if (!(c - beta * Y1 > lo && c + beta * Y1 < hi))
            throw ConfigError("beta_xi2 violates the xi2 image condition");
    }
    template <class T>
    T weight(T y) const {
        using std::abs;
        T ay = abs(y);
        if (ay >= Y0) return T(0);
        if (ay <= Y1) return T(1);
        return smoothstep((T(Y0) - ay) / T(Y0 - Y1));
    }
    template <class T>
    T weight_d1(T y) const {
        using std::abs;
        T ay = abs(y);
        if (ay >= Y0 || ay <= Y1) return T(0);
        T g = -smoothstep_d1((T(Y0) - ay) / T(Y0 - Y1)) / T(Y0 - Y1);
        return y < 0 ? -g : g;
    }
    template <class T>
    T value(T y) const {
        T w = weight(y);
        if (w == 0) return y;
        T aff = T(beta) * y + T(c);
        if (w == 1) return aff;
        return (1 - w) * y + w * aff;
    }
    template <class T>
    T d1(T y) const {
        T w = weight(y);
        return (1 - w) + w * T(beta) + weight_d1(y) * (T(beta) * y + T(c) - y);
    }
};

// ---------------------------------------------------------------------------

struct CantorSet {
    double a = 0, b = 0;
    int depth = 0;
    std::vector<Interval> gaps;  // sorted, open
    double measure = 0;
    double c1 = 1;               // bound on |phi_K| and |phi_K'| (and |psi'|)
    bool truncated = false;

    // sup of |d/dx 256 (P)^4| over a gap of unit width
    static double unit_slope() { return 1024.0 * std::pow(3.0 / 14.0, 3) / std::sqrt(7.0); }

    const Interval* gap_of(double x) const {
        if (!(x > a && x < b) || gaps.empty()) return nullptr;
        auto it = std::upper_bound(gaps.begin(), gaps.end(), x,
                                   [](double v, const Interval& g) { return v < g.lo; });
        if (it == gaps.begin()) return nullptr;
        --it;
        return (x > it->lo && x < it->hi) ? &*it : nullptr;
    }
    bool in_K(double x) const { return x >= a && x <= b && gap_of(x) == nullptr; }

    double phi(double x) const {
        const Interval* g = gap_of(x);
        if (!g) return 0;
        double L = g->width();
        double P = (x - g->lo) * (g->hi - x) / (L * L);
        double P2 = P * P;
        return 256 * P2 * P2;
    }
    double phi_d1(double x) const {
        const Interval* g = gap_of(x);
        if (!g) return 0;
        double L = g->width();
        double P = (x - g->lo) * (g->hi - x) / (L * L);
        double dP = (g->hi + g->lo - 2 * x) / (L * L);
        return 1024 * P * P * P * dP;
    }
    double phi_d2(double x) const {
        const Interval* g = gap_of(x);
        if (!g) return 0;
        double L = g->width();
        double P = (x - g->lo) * (g->hi - x) / (L * L);
        double dP = (g->hi + g->lo - 2 * x) / (L * L);
        double d2P = -2 / (L * L);
        return 1024 * (3 * P * P * dP * dP + P * P * P * d2P);
    }
};

inline CantorSet fat_cantor(const Params& p, int depth) {
    if (depth < 1) throw std::invalid_argument("Cantor depth must be >= 1");
    double f = p.cantor_measure_fraction;
    if (!(f > 0 && f < 1)) throw std::invalid_argument("cantor_measure_fraction must be in (0,1)");
    CantorSet K;
    K.a = p.a;
    K.b = p.b;
    K.depth = depth;
    double len = p.b - p.a;
    double G = 2 * (1 - f) * len / (1 - std::ldexp(1.0, -depth));
    std::vector<Interval> level{{p.a, p.b}};
    double removed = 0;
    for (int d = 1; d <= depth; ++d) {
        double g = G * std::ldexp(1.0, -2 * d);
        if (!(g > 8 * std::numeric_limits<double>::epsilon() * len)) {
            K.truncated = true;
            K.depth = d - 1;
            break;
        }
        std::vector<Interval> next;
        next.reserve(level.size() * 2);
        for (const Interval& I : level) {
            double m = I.mid();
            K.gaps.push_back({m - g / 2, m + g / 2});
            next.push_back({I.lo, m - g / 2});
            next.push_back({m + g / 2, I.hi});
            removed += g;
        }
        level.swap(next);
    }
    std::sort(K.gaps.begin(), K.gaps.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    K.measure = len - removed;
    double gmin = K.gaps.empty() ? len : G * std::ldexp(1.0, -2 * K.depth);
    K.c1 = std::max({1.0, CantorSet::unit_slope() / gmin, 2.1875 / p.eps1});
    return K;
}

// ---------------------------------------------------------------------------
// Omega: levels 16^d m (interior) or 4^d m (exterior), m a starting integer.

inline bool is_starting(std::int64_t m, int n0) {
    return (m >= n0 && m < 2 * n0) || (m % 2 == 1 && m >= n0);
}

inline bool omega_member(const Level& L, int n0, bool interior = true) {
    const std::int64_t period = interior ? 4 : 2;  // log2 of 16 or 4
    if (L.odd >= n0 && L.exp % period == 0) return true;
    if (L.odd >= 2 * n0) return false;
    std::int64_t i0 = 0;
    std::int64_t v = L.odd;
    while (v < n0) {
        v <<= 1;
        ++i0;
    }
    if (v >= 2 * n0) return false;
    return i0 <= L.exp && (L.exp - i0) % period == 0;
}
inline bool omega_member(std::int64_t n, int n0, bool interior = true) {
    if (n < n0) return false;
    return omega_member(Level::from(n), n0, interior);
}

// sigma^n eps_n = kappa / ln n
inline double eps_scaled(const Level& L, double kappa) {
    double ln = L.log();
    if (!(ln > 0.5)) throw std::invalid_argument("eps_n needs n >= 2");
    return kappa / ln;
}
inline double eps_scaled(std::int64_t n, double kappa) {
    if (n < 2) throw std::invalid_argument("eps_n needs n >= 2");
    return eps_scaled(Level::from(n), kappa);
}

// ---------------------------------------------------------------------------

struct Profiles {
    Params prm;
    Bump phi1;
    Bump psi;
    ConvexBump phi2;
    Xi1 xi1;
    Xi2 xi2;
    CantorSet K;

    explicit Profiles(const Params& p)
        : prm(p),
          phi1(-p.pow_sigma(-p.n0 - 1) * p.a, -p.pow_sigma(-p.n0 - 2) * (p.b + 3 * p.eps1),
               p.pow_sigma(-p.n0 - 2) * (p.b + 3 * p.eps1), p.pow_sigma(-p.n0 - 1) * p.a),
          psi(p.a, p.a + p.eps1, p.b, p.b + p.eps1),
          phi2(p.b + 2 * p.eps1, p.b + 2 * p.eps1 + p.delta1,
               p.sigma * p.sigma * (p.a - 2 * p.eps1 - p.delta1), p.sigma * p.sigma * (p.a - 2 * p.eps1),
               (p.b + 3 * p.eps1) / (p.b + 4 * p.eps1)),
          xi1(p),
          xi2(p),
          K(fat_cantor(p, p.cantor_depth)) {}

    // regularity: c^2 kappa / ln 2 < eps1
    double regularity_slack() const { return prm.eps1 - K.c1 * K.c1 * prm.kappa / std::log(2.0); }
};

inline Params regular_params() {
    Params p = default_params();
    CantorSet K = fat_cantor(p, p.cantor_depth);
    p.kappa = 0.9 * p.eps1 * std::log(2.0) / (K.c1 * K.c1);
    return p;
}

// validate_params plus the checks that need the constructed profiles
inline ValidationReport validate_full(const Params& p) {
    ValidationReport r = validate_params(p);
    if (!r.pass()) return r;
    try {
        Profiles pr(p);
        r.items.push_back({"xi1 middle segment monotone", true, 1 - std::abs(pr.xi1.c), true});
        double slack = pr.regularity_slack();
        r.items.push_back({"c^2 kappa / ln 2 < eps1 (C1 regularity of h3)", slack > 0, slack, false});
    } catch (const std::exception& e) {
        r.items.push_back({std::string("profile construction: ") + e.what(), false, -1, true});
    }
    return r;
}

inline Params preset(const std::string& name) {
    if (name == "default") return default_params();
    if (name == "regular") return regular_params();
    throw ConfigError("unknown preset: " + name);
}

}  // namespace fig8
