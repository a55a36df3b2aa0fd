#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fig8/map_core.hpp"
#include "fig8/rng.hpp"

using namespace fig8;

namespace {

const Params P0 = default_params();

ScaledPoint local(double x, double tau, std::int64_t n) { return ScaledPoint{x, tau, n, Chart::Local, 0}; }

// iterate until the orbit is back in a local chart after an excursion
ScaledPoint run_to_landing(const Model& M, MapId map, ScaledPoint q, int* steps = nullptr) {
    bool left = false;
    int k = 0;
    for (; k < 100000; ++k) {
        StepResult r = M.step(map, q);
        q = r.next;
        if (is_loop(q.chart)) left = true;
        if (left && !is_loop(q.chart) && r.tags & tag::LinearV) break;
    }
    if (steps) *steps = k + 1;
    return q.canonical(M.sigma);
}

}  // namespace

TEST(F0, LinearStep) {
    Model M(P0);
    ScaledPoint q = local(1.4, 1.39, 9);
    StepResult r = M.f0_step(q);
    EXPECT_EQ(r.tags, tag::LinearV);
    EXPECT_DOUBLE_EQ(r.next.x, 1.4 / 4);
    EXPECT_DOUBLE_EQ(r.next.tau, 1.39);
    EXPECT_EQ(r.next.n, 8);
    EXPECT_DOUBLE_EQ(r.jacobian.a, 0.25);
    EXPECT_DOUBLE_EQ(r.jacobian.d, 2.0);
}

TEST(F0, FixedPoints) {
    Model M(P0);
    StepResult r = M.f0_step(local(0, 0, 0));
    EXPECT_EQ(r.next.x, 0.0);
    EXPECT_EQ(r.next.tau, 0.0);
    ScaledPoint P{0, 0, 0, Chart::LocalP, 0};
    StepResult rp = M.f0_step(P, true);
    EXPECT_EQ(rp.next.chart, Chart::LocalP);
    EXPECT_EQ(rp.next.x, 0.0);
    EXPECT_EQ(rp.next.tau, 0.0);
    StepResult far = M.f0_step(ScaledPoint::from_raw(100, 100, 2.0));
    EXPECT_EQ(far.tags, tag::Identity);
    EXPECT_THROW(M.f0_step(ScaledPoint::from_raw(5, 5, 2.0)), ModelBoundary);
    EXPECT_THROW(M.f0_step(P), ModelBoundary);
}

TEST(F0, ExcursionCompositeIsRotation) {
    Model M(P0);
    CounterRng rng(1, 0);
    const double s = P0.a + P0.b;
    for (int i = 0; i < 200; ++i) {
        double xd = rng.uniform(-M.Xdep, M.Xdep);
        double y = rng.uniform(M.Dlo, M.sigma * M.Dlo) * (i % 2 ? 1 : -1);
        ScaledPoint q = ScaledPoint::from_raw(xd, y, 2.0);
        for (int k = 0; k < P0.k0; ++k) {
            StepResult r = M.f0_step(q);
            EXPECT_GT(r.jacobian.det(), 0.0);
            q = r.next;
            if (k < P0.k0 - 1) {
                Vec2 w = M.raw_position(q);
                EXPECT_GT(std::hypot(w.x, w.y), 1.0) << "excursion came near O at stage " << k;
            }
        }
        ASSERT_EQ(q.chart, Chart::Local);
        double sg = y > 0 ? 1 : -1;
        EXPECT_NEAR(q.x, sg * (s - std::abs(y)), 1e-14);
        EXPECT_NEAR(q.y(2.0), xd, 1e-15 * std::abs(xd) + 1e-300);
    }
}

TEST(F0, TowerReturnLandsInDoubleLevel) {
    Model M(P0);
    CounterRng rng(2, 0);
    const double s = P0.a + P0.b;
    for (int i = 0; i < 100; ++i) {
        std::int64_t n = P0.n0 + static_cast<std::int64_t>(rng.next() % 20);
        double x = rng.uniform(P0.a, P0.b), t = rng.uniform(P0.a, P0.b);
        int steps = 0;
        ScaledPoint r = run_to_landing(M, MapId::F0, local(x, t, n), &steps);
        EXPECT_EQ(steps, n + P0.k0);
        ScaledPoint pin = r.pinned(2 * n, 2.0);
        EXPECT_NEAR(pin.x, s - t, 1e-14);
        EXPECT_NEAR(pin.tau, x, 1e-14);
    }
}

TEST(F1, IdentityOnStableTower) {
    Model M(P0);
    CounterRng rng(3, 0);
    for (int i = 0; i < 500; ++i) {
        ScaledPoint q = local(rng.uniform(P0.a, P0.b), rng.uniform(P0.a, P0.b), P0.n0 + (i % 30));
        for (int k = 0; k < 60 && !is_loop(q.chart); ++k) {
            StepResult a = M.f0_step(q), b = M.f1_step(q);
            EXPECT_EQ(a.next.x, b.next.x);
            EXPECT_EQ(a.next.tau, b.next.tau);
            EXPECT_EQ(a.next.n, b.next.n);
            q = a.next;
        }
    }
}

TEST(F1, CompositionIdentity) {
    Model M(P0);
    CounterRng rng(4, 0);
    for (int i = 0; i < 10000; ++i) {
        // pre-landing points and landing points, both signs
        double sg = i % 2 ? 1.0 : -1.0;
        double X = i % 4 < 2 ? rng.uniform(4 * 1.33, 4 * 2.05) : rng.uniform(1.3, 2.06);
        double y = rng.uniform(0.001, 0.04);
        ScaledPoint q = ScaledPoint::from_raw(sg * X, sg * y, 2.0);
        StepResult f0 = M.f0_step(q);
        StepResult f1 = M.f1_step(q);
        HOut h1 = M.h1_apply(f0.next.x, f0.next.yv());
        HOut h2 = M.h2_apply(h1.x, h1.y);
        EXPECT_NEAR(f1.next.x, h2.x, 1e-12);
        EXPECT_NEAR(f1.next.y(2.0), h2.y.raw(2.0), 1e-12);
    }
}

TEST(H1, TranslationZoneAndExample) {
    Model M(P0);
    Profiles& P = M.pr;
    CounterRng rng(5, 0);
    double ymax = std::pow(2.0, -P0.n0 - 2) * (P0.b + 3 * P0.eps1);
    for (int i = 0; i < 500; ++i) {
        double x = rng.uniform(P0.b, 4 * P0.a);
        double y = rng.uniform(-ymax, ymax);
        HOut r = M.h1_apply(x, ScaledValue::from_raw(y, 2.0));
        EXPECT_NEAR(r.x, P.xi1.value(x), 1e-15);
        EXPECT_DOUBLE_EQ(r.y.raw(2.0), y);
    }
}

TEST(H2, OffSupportIdentity) {
    Model M(P0);
    for (double x : {0.5, 1.3, P0.b + 2 * P0.eps1, 6.0})
        for (double y : {0.01, 0.03, -0.02}) {
            HOut r = M.h2_apply(x, ScaledValue::from_raw(y, 2.0));
            EXPECT_EQ(r.x, x);
            EXPECT_DOUBLE_EQ(r.y.raw(2.0), y);
            EXPECT_FALSE(r.moved);
        }
}

TEST(Jacobians, H1H2MatchFiniteDifferences) {
    Model M(P0);
    CounterRng rng(6, 0);
    auto check = [&](auto h, double x, double y, const char* what) {
        HOut c = h(x, y);
        // small steps: the xi2 transition band has a large third derivative
        const double hx = 1e-7, hy = 1e-8 * std::max(std::abs(y), 1e-3);
        HOut xp = h(x + hx, y), xm = h(x - hx, y), yp = h(x, y + hy), ym = h(x, y - hy);
        double J[4] = {(xp.x - xm.x) / (2 * hx), (yp.x - ym.x) / (2 * hy),
                       (xp.y.raw(2.0) - xm.y.raw(2.0)) / (2 * hx), (yp.y.raw(2.0) - ym.y.raw(2.0)) / (2 * hy)};
        double A[4] = {c.jac.a, c.jac.b, c.jac.c, c.jac.d};
        double scale = std::max({std::abs(A[0]), std::abs(A[1]), std::abs(A[2]), std::abs(A[3])});
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(A[k], J[k], 1e-5 * scale) << what << " entry " << k << " at " << x << "," << y;
        EXPECT_GT(c.jac.det(), 0.0) << what;
    };
    auto h1 = [&](double x, double y) { return M.h1_apply(x, ScaledValue::from_raw(y, 2.0)); };
    auto h2 = [&](double x, double y) { return M.h2_apply(x, ScaledValue::from_raw(y, 2.0)); };
    for (int i = 0; i < 1000; ++i) {
        double sg = i % 2 ? 1.0 : -1.0;
        check(h1, sg * rng.uniform(P0.b + 1e-4, 4 * P0.a - 1e-4), sg * rng.uniform(0.005, 0.045), "h1");
        check(h2, sg * rng.uniform(P0.b + 2 * P0.eps1, 4 * (P0.a - 2 * P0.eps1)), sg * rng.uniform(0.001, 0.045),
              "h2");
    }
}

TEST(Jacobians, F1StepMatchesFiniteDifferences) {
    Model M(P0);
    CounterRng rng(7, 0);
    for (int i = 0; i < 1000; ++i) {
        double sg = i % 2 ? 1.0 : -1.0;
        double X = rng.uniform(4 * 1.34, 4 * 2.05), y = rng.uniform(0.002, 0.02);
        auto F = [&](double x, double yy) {
            StepResult r = M.f1_step(ScaledPoint::from_raw(x, yy, 2.0));
            return Vec2{r.next.x, r.next.y(2.0)};
        };
        StepResult r = M.f1_step(ScaledPoint::from_raw(sg * X, sg * y, 2.0));
        const double hx = 1e-6, hy = 1e-8;
        Vec2 xp = F(sg * X + hx, sg * y), xm = F(sg * X - hx, sg * y);
        Vec2 yp = F(sg * X, sg * y + hy), ym = F(sg * X, sg * y - hy);
        double J[4] = {(xp.x - xm.x) / (2 * hx), (yp.x - ym.x) / (2 * hy), (xp.y - xm.y) / (2 * hx),
                       (yp.y - ym.y) / (2 * hy)};
        double A[4] = {r.jacobian.a, r.jacobian.b, r.jacobian.c, r.jacobian.d};
        double scale = std::max({std::abs(A[0]), std::abs(A[1]), std::abs(A[2]), std::abs(A[3])});
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(A[k], J[k], 1e-5 * scale) << k << " at " << X << "," << y;
        EXPECT_GT(r.jacobian.det(), 0.0);
    }
}

TEST(H3, FixesKColumnsAndMatchesFiniteDifferences) {
    for (const char* name : {"default", "regular"}) {
        Params p = preset(name);
        Model M(p);
        const CantorSet& K = M.pr.K;
        CounterRng rng(8, 0);
        for (std::int64_t n : {5, 80, 1280}) {
            ASSERT_TRUE(omega_member(n, p.n0));
            // x in K: unchanged
            for (double x : {p.a, p.b, K.gaps[0].lo, K.gaps.back().hi}) {
                auto h = M.h3_apply(local(x, 1.4, n));
                EXPECT_FALSE(h.moved);
                EXPECT_EQ(h.q.tau, 1.4);
            }
            std::vector<Interval> wide = K.gaps;
            std::sort(wide.begin(), wide.end(), [](const Interval& u, const Interval& v) { return u.width() > v.width(); });
            wide.resize(7);
            for (int i = 0; i < 300; ++i) {
                const Interval& g = wide[rng.next() % 7];
                double x = rng.uniform(g.lo, g.hi), t = rng.uniform(p.a_tilde, p.b_tilde);
                auto c = M.h3_apply(local(x, t, n));
                auto T = [&](double xx, double tt) { return M.h3_apply(local(xx, tt, n)).q.pinned(n, 2.0).tau; };
                const double h = 1e-7;
                double dtx = (T(x + h, t) - T(x - h, t)) / (2 * h);
                double dtt = (T(x, t + h) - T(x, t - h)) / (2 * h);
                EXPECT_NEAR(c.jac_scaled.c, dtx, 1e-5 * std::max(1.0, std::abs(dtx)));
                EXPECT_NEAR(c.jac_scaled.d, dtt, 1e-5);
                if (std::string(name) == "regular") {
                    EXPECT_GT(c.jac_scaled.det(), 0.0);
                }
            }
            // off Omega: untouched
            auto off = M.h3_apply(local(K.gaps[0].mid(), 1.4, 2 * n));
            EXPECT_FALSE(off.moved);
        }
    }
}

TEST(H3, DerivativeTendsToIdentity) {
    // the diagonal deviation is phi psi' kappa / ln n: sup * ln n settles to a constant
    Model M(P0);
    double prev = 1e300, prev_scaled = 1e300;
    for (std::int64_t n : {11, 101, 1001, 10001}) {
        double sup = 0;
        for (int i = 0; i < 200; ++i)
            for (int j = 0; j < 400; ++j) {
                double x = P0.a + (P0.b - P0.a) * (i + 0.5) / 200.0;
                double t = P0.a_tilde + (P0.b_tilde - P0.a_tilde) * (j + 0.5) / 400.0;
                auto h = M.h3_apply(local(x, t, n));
                // raw lower-left entry carries sigma^-n
                double c = h.jac_scaled.c * std::pow(2.0, -static_cast<double>(n));
                sup = std::max({sup, std::abs(c), std::abs(h.jac_scaled.d - 1)});
            }
        double scaled = sup * std::log(static_cast<double>(n));
        EXPECT_LT(sup, prev) << n;
        EXPECT_LE(scaled, prev_scaled * (1 + 1e-6)) << n;
        prev = sup;
        prev_scaled = scaled;
    }
    // constant: max phi * max |psi'| * kappa
    const Profiles& P = M.pr;
    double dpsi = 0;
    for (int j = 0; j <= 100000; ++j) dpsi = std::max(dpsi, std::abs(P.psi.d1(P0.a + 1.2 * P0.eps1 * j / 100000.0)));
    EXPECT_NEAR(prev_scaled, dpsi * P0.kappa, 0.02 * dpsi * P0.kappa);
}

TEST(F2, KColumnsFollowF0) {
    Model M(P0);
    const CantorSet& K = M.pr.K;
    for (double x : {P0.a, K.gaps[0].lo, K.gaps[3].hi, P0.b}) {
        ScaledPoint a = local(x, 1.4, P0.n0), b = a;
        int k = 0;
        try {
            for (; k < 100000; ++k) {
                a = M.f0_step(a).next;
                b = M.f2_step(b).next;
                ASSERT_EQ(a.x, b.x);
                ASSERT_EQ(a.tau, b.tau);
                ASSERT_EQ(a.n, b.n);
            }
        } catch (const RepresentationError&) {
        }
        EXPECT_GT(k, 500);
    }
}

TEST(Q, TrapsAfterFixedTime) {
    Model M(P0);
    const TrapRegion& Q = M.Q;
    EXPECT_LT(Q.x.lo, Q.x.hi);
    EXPECT_LT(Q.y.lo, Q.y.hi);
    const int per_side = 100;
    double worst = 1e300;
    for (int side = 0; side < 4; ++side)
        for (int i = 0; i < per_side; ++i) {
            double s = (i + 0.5) / per_side;
            double x = side < 2 ? Q.x.lo + s * Q.x.width() : (side == 2 ? Q.x.lo : Q.x.hi);
            double y = side >= 2 ? Q.y.lo + s * Q.y.width() : (side == 0 ? Q.y.lo : Q.y.hi);
            ScaledPoint q = ScaledPoint::from_raw(x, y, 2.0);
            for (int k = 0; k < P0.n0 + P0.k0 + 1; ++k) q = M.f1_step(q).next;
            ASSERT_EQ(q.chart, Chart::Local);
            worst = std::min(worst, Q.margin(q.x, q.y(2.0)));
        }
    EXPECT_GT(worst, 0.0);
}

TEST(Bowen, ReturnsAlternateBetweenSaddles) {
    Model M(P0);
    const double s = P0.a + P0.b;
    CounterRng rng(9, 0);
    for (int i = 0; i < 100; ++i) {
        std::int64_t n = P0.n0 + static_cast<std::int64_t>(rng.next() % 10);
        double x = rng.uniform(P0.a_tilde, P0.b_tilde), t = rng.uniform(P0.a_tilde, P0.b_tilde);
        ScaledPoint r1 = run_to_landing(M, MapId::BowenF0, local(x, t, n));
        EXPECT_EQ(r1.chart, Chart::LocalP);
        ScaledPoint p1 = r1.pinned(2 * n, 2.0);
        EXPECT_NEAR(p1.x, s - t, 1e-14);
        EXPECT_NEAR(p1.tau, x, 1e-14);
        ScaledPoint r2 = run_to_landing(M, MapId::BowenF0, r1);
        EXPECT_EQ(r2.chart, Chart::Local);
        ScaledPoint p2 = r2.pinned(4 * n, 2.0);
        EXPECT_NEAR(p2.x, s - x, 1e-14);
        EXPECT_NEAR(p2.tau, s - t, 1e-14);
    }
}

TEST(MapId, Names) {
    for (MapId m : {MapId::F0, MapId::F1, MapId::F2, MapId::BowenF0, MapId::BowenF2})
        EXPECT_EQ(parse_map(map_name(m)), m);
    EXPECT_THROW(parse_map("F9"), ConfigError);
}
