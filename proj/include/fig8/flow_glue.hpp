#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "fig8/profiles.hpp"

namespace fig8 {

struct NoHit : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OutsideRegion : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShootingFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoInteriorFixedPoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlueConfig {
    double sigma = 2.0;
    double p = 16.0;
    double T = 4.0;
    double eps_band = 2.0;
    double beta_rot = 0.3;
    double tstar_u = 2.0;
    double tstar_s = 2.0;
    double h = 1e-3;

    static GlueConfig from_sigma(double sigma) {
        GlueConfig c;
        c.sigma = sigma;
        c.p = std::pow(sigma, 4);
        c.T = c.p / 4;
        c.eps_band = c.p / 8;
        c.tstar_u = c.tstar_s = c.T / 2;
        return c;
    }

    void validate() const {
        if (!(sigma > 1)) throw ConfigError("glue: sigma must exceed 1");
        if (!(T > 0 && T < p / 2)) throw ConfigError("glue: T must lie in (0, p/2)");
        if (!(eps_band > 0 && eps_band < p / 3)) throw ConfigError("glue: eps must lie in (0, p/3)");
        if (!(beta_rot > 0)) throw ConfigError("glue: rotation speed must be positive");
        if (!(tstar_u > 0 && tstar_u < T && tstar_s > 0 && tstar_s < T))
            throw ConfigError("glue: plateau parameters must lie in (0, T)");
        if (!(h > 0)) throw ConfigError("glue: step must be positive");
    }

    double ln_sigma() const { return std::log(sigma); }
    // radius of the rotation orbit through (p+T, 3 eps)
    double r3() const { return std::hypot(T, p - 3 * eps_band); }
    // pure rotation chord: the circle through (0,p) around (p,p) meets y = p+T at x = delta0
    double delta0() const { return p - std::sqrt(p * p - T * T); }
};

using P2 = std::array<double, 2>;

enum class Field { Z, X, Y };

enum class GlueRegion { V, Rs, Ru, B, U };

inline const char* glue_region_name(GlueRegion r) {
    switch (r) {
        case GlueRegion::V: return "V";
        case GlueRegion::Rs: return "Rs";
        case GlueRegion::Ru: return "Ru";
        case GlueRegion::B: return "B";
        case GlueRegion::U: return "U";
    }
    return "?";
}

// Plateau 1 on [0, p+t*], smooth descent to 0 over [p+t*, p+t*+w], w = (T-t*) t*/T.
inline double glue_alpha(double t, double p, double T, double tstar) {
    double w = (T - tstar) * tstar / T;
    double a = p + tstar;
    if (t <= a) return 1.0;
    if (t >= a + w) return 0.0;
    return 1.0 - smoothstep((t - a) / w);
}

// First-quadrant region; the third quadrant is handled by -Id symmetry in field_Z.
inline GlueRegion glue_region(const P2& u, const GlueConfig& c) {
    double x = u[0], y = u[1], p = c.p, T = c.T, e = c.eps_band;
    double side = p + T;
    if (x > side || y > side) return GlueRegion::U;
    if (std::hypot(x - p, y - p) < c.r3()) return GlueRegion::U;
    if (x > p && x < side && y < 2 * e) return GlueRegion::Rs;
    if (y > p && y < side && x < 2 * e) return GlueRegion::Ru;
    if (x * y * y < side * e * e) return GlueRegion::V;
    return GlueRegion::B;
}

inline double glue_rho(const P2& u, const GlueConfig& c) {
    switch (glue_region(u, c)) {
        case GlueRegion::V: return 1.0;
        case GlueRegion::U: return 0.0;
        case GlueRegion::Rs: return glue_alpha(u[0], c.p, c.T, c.tstar_s);
        case GlueRegion::Ru: return glue_alpha(u[1], c.p, c.T, c.tstar_u);
        case GlueRegion::B: {
            double side = c.p + c.T;
            double uh = std::log(u[0] * u[1] * u[1] / (side * c.eps_band * c.eps_band));
            double uc = std::hypot(u[0] - c.p, u[1] - c.p) - c.r3();
            return smoothstep(uc / (uc + uh));
        }
    }
    return 0.0;
}

inline P2 field_X(const P2& u, const GlueConfig& c) {
    double l = c.ln_sigma();
    return {-2 * l * u[0], l * u[1]};
}

inline P2 field_Y(const P2& u, const GlueConfig& c) {
    return {c.beta_rot * (u[1] - c.p), c.beta_rot * (c.p - u[0])};
}

inline P2 field_Z(const P2& u, const GlueConfig& c) {
    constexpr double slack = 1e-6;  // orbits shadowing an axis may cross it by roundoff
    if (u[0] < 0 && u[1] < 0) {
        P2 v = field_Z({-u[0], -u[1]}, c);
        return {-v[0], -v[1]};
    }
    if (u[0] < -slack || u[1] < -slack)
        throw OutsideRegion("glue field evaluated off the modeled quadrants");
    P2 q{std::max(u[0], 0.0), std::max(u[1], 0.0)};
    double r = glue_rho(q, c);
    P2 X = field_X(u, c), Y = field_Y(q, c);
    return {r * X[0] + (1 - r) * Y[0], r * X[1] + (1 - r) * Y[1]};
}

inline P2 field(Field f, const P2& u, const GlueConfig& c) {
    switch (f) {
        case Field::X: return field_X(u, c);
        case Field::Y: return field_Y(u, c);
        case Field::Z: break;
    }
    return field_Z(u, c);
}

inline P2 rk4(Field f, const P2& u, double h, const GlueConfig& c) {
    auto add = [](const P2& a, const P2& b, double s) { return P2{a[0] + s * b[0], a[1] + s * b[1]}; };
    P2 k1 = field(f, u, c);
    P2 k2 = field(f, add(u, k1, h / 2), c);
    P2 k3 = field(f, add(u, k2, h / 2), c);
    P2 k4 = field(f, add(u, k3, h), c);
    return {u[0] + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            u[1] + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
}

// Oriented segment {origin + s*dir : s in [0, len]}.
struct Section {
    std::string name;
    P2 origin;
    P2 dir;
    double len;

    double signed_distance(const P2& u) const { return dir[0] * (u[1] - origin[1]) - dir[1] * (u[0] - origin[0]); }
    double coord(const P2& u) const { return dir[0] * (u[0] - origin[0]) + dir[1] * (u[1] - origin[1]); }
    bool within(const P2& u, double tol = 1e-7) const {
        double s = coord(u);
        return s >= -tol && s <= len + tol;
    }

    static Section H(const GlueConfig& c) { return {"H", {0, c.p + c.T}, {1, 0}, 1.0}; }
    static Section V(const GlueConfig& c) { return {"V", {c.p + c.T, 0}, {0, 1}, 1.0}; }
    static Section Vprime(const GlueConfig& c) { return {"V'", {c.p, 0}, {0, 1}, 1.0}; }
    static Section line_y(double y0, double len) { return {"y=const", {0, y0}, {1, 0}, len}; }
};

struct Hit {
    P2 point;
    double time;
    double transversality;
};

// First crossing of `sec` along the forward (direction = +1) or backward (-1) orbit.
// The starting point itself never counts.
inline Hit hit_section(const P2& u0, const Section& sec, const GlueConfig& c, int direction = 1,
                       Field f = Field::Z, double max_time = 400.0, std::vector<P2>* trace = nullptr) {
    double h = direction >= 0 ? c.h : -c.h;
    P2 u = u0;
    double d = sec.signed_distance(u);
    double t = 0;
    long steps = static_cast<long>(max_time / c.h);
    if (trace) trace->push_back(u);
    for (long i = 0; i < steps; ++i) {
        P2 v = rk4(f, u, h, c);
        double dv = sec.signed_distance(v);
        bool crossed = (d < 0 && dv >= 0) || (d > 0 && dv <= 0);
        if (crossed) {
            double dd = d;
            auto g = [&](double s) { return sec.signed_distance(rk4(f, u, s * h, c)); };
            double s = 1.0;
            if (dv != 0) {
                boost::uintmax_t it = 100;
                auto r = boost::math::tools::toms748_solve(
                    g, 0.0, 1.0, dd, dv, [](double a, double b) { return std::abs(b - a) < 1e-15; }, it);
                s = 0.5 * (r.first + r.second);
            }
            P2 w = rk4(f, u, s * h, c);
            if (sec.within(w)) {
                P2 F = field(f, w, c);
                double tr = sec.dir[0] * F[1] - sec.dir[1] * F[0];
                if (trace) trace->push_back(w);
                return {w, t + s * h, tr};
            }
        }
        u = v;
        d = dv;
        t += h;
        if (trace) trace->push_back(u);
    }
    throw NoHit("no crossing of section " + sec.name + " within time budget");
}

struct ShotResult {
    double tstar_u = 0, tstar_s = 0;
    double hit_u = 0, hit_s = 0;
    int iterations_u = 0, iterations_s = 0;
    double closure = 0;  // |y| where the forward orbit of (0,p) crosses x = p near the axis
    std::vector<P2> loop;
};

namespace detail {

template <class F>
inline std::pair<double, int> bisect_decreasing(F fn, double lo, double hi, double target, const char* what) {
    double flo = fn(lo), fhi = fn(hi);
    if (!(flo > target && fhi < target))
        throw ShootingFailure(std::string(what) + ": target not bracketed, f(" + std::to_string(lo) +
                              ")=" + std::to_string(flo) + " f(" + std::to_string(hi) +
                              ")=" + std::to_string(fhi) + " target=" + std::to_string(target));
    int it = 0;
    while (hi - lo > 1e-10 && it < 200) {
        double m = 0.5 * (lo + hi);
        double fm = fn(m);
        if (!(fm <= flo + 1e-12 && fm >= fhi - 1e-12))
            throw ShootingFailure(std::string(what) + ": shooting function not monotone near t*=" + std::to_string(m));
        if (fm > target) {
            lo = m;
            flo = fm;
        } else {
            hi = m;
            fhi = fm;
        }
        ++it;
    }
    return {0.5 * (lo + hi), it};
}

}  // namespace detail

inline double shoot_u_hit(const GlueConfig& c, double tstar) {
    GlueConfig g = c;
    g.tstar_u = tstar;
    return hit_section({0, g.p}, Section::H(g), g, +1).point[0];
}

inline double shoot_s_hit(const GlueConfig& c, double tstar) {
    GlueConfig g = c;
    g.tstar_s = tstar;
    return hit_section({g.p, 0}, Section::V(g), g, -1).point[1];
}

inline ShotResult shoot_homoclinic(GlueConfig c, double target_delta) {
    c.validate();
    if (!(target_delta > 0 && target_delta < c.delta0()))
        throw ConfigError("glue: target delta must lie in (0, delta0)");
    ShotResult r;
    double lo = 1e-6 * c.T, hi = c.T * (1 - 1e-6);
    auto [tu, iu] = detail::bisect_decreasing([&](double t) { return shoot_u_hit(c, t); }, lo, hi, target_delta,
                                              "unstable branch");
    auto [ts, is] = detail::bisect_decreasing([&](double t) { return shoot_s_hit(c, t); }, lo, hi, target_delta,
                                              "stable branch");
    c.tstar_u = r.tstar_u = tu;
    c.tstar_s = r.tstar_s = ts;
    r.iterations_u = iu;
    r.iterations_s = is;
    r.hit_u = shoot_u_hit(c, tu);
    r.hit_s = shoot_s_hit(c, ts);
    Section vp = Section::Vprime(c);
    vp.origin[1] = -0.5;  // accept crossings slightly below the axis
    vp.len = 1.5;
    Hit end = hit_section({0, c.p}, vp, c, +1, Field::Z, 400.0, &r.loop);
    r.closure = std::abs(end.point[1]);
    return r;
}

// Forward first return to V' = {(p, y)}.
inline double return_map_vprime(const GlueConfig& c, double y) {
    Section vp = Section::Vprime(c);
    return hit_section({c.p, y}, vp, c, +1).point[1];
}

struct FixedPointScan {
    std::vector<std::pair<double, double>> samples;  // (y, P(y) - y)
    std::optional<double> y_star;
    double residual = 0;
};

inline FixedPointScan lowest_fixed_point(const GlueConfig& c, int grid = 60) {
    FixedPointScan out;
    double y0 = 1e-4;
    double prev_y = 0, prev_g = 0;
    for (int i = 0; i <= grid; ++i) {
        double y = y0 * std::pow(1.0 / y0, static_cast<double>(i) / grid);
        double g;
        try {
            g = return_map_vprime(c, y) - y;
        } catch (const NoHit&) {
            continue;
        }
        out.samples.push_back({y, g});
        if (out.samples.size() > 1 && ((prev_g < 0) != (g < 0))) {
            auto fn = [&](double v) { return return_map_vprime(c, v) - v; };
            boost::uintmax_t it = 200;
            auto r = boost::math::tools::toms748_solve(
                fn, prev_y, y, prev_g, g, [](double a, double b) { return std::abs(b - a) < 1e-13; }, it);
            double ys = 0.5 * (r.first + r.second);
            out.y_star = ys;
            out.residual = std::abs(fn(ys));
            return out;
        }
        prev_y = y;
        prev_g = g;
    }
    return out;
}

// x*y^2 drift along a pure hyperbolic orbit over the given time.
inline double energy_drift(const GlueConfig& c, const P2& u0, double time) {
    P2 u = u0;
    long n = static_cast<long>(std::lround(time / c.h));
    double e0 = u[0] * u[1] * u[1];
    for (long i = 0; i < n; ++i) u = rk4(Field::X, u, c.h, c);
    return std::abs(u[0] * u[1] * u[1] - e0) / std::abs(e0);
}

}  // namespace fig8
