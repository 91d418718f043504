#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dgstab/errors.hpp"
#include "dgstab/geometry.hpp"
#include "support.hpp"

using namespace dgstab;

TEST_CASE("slab_contains on axis-aligned and diagonal slabs") {
    const Slab s({0, 0}, {1, 0}, 2);
    CHECK(slab_contains(s, std::vector<double>{0.9, 5}));
    CHECK_FALSE(slab_contains(s, std::vector<double>{1.1, 0}));

    const double r = 1 / std::sqrt(2.0);
    const Slab d({1, 1}, {r, r}, 1);
    // projection of (0.3, 0.3) onto the diagonal is 0.3*sqrt(2) ~ 0.424 < 0.5
    CHECK(slab_contains(d, std::vector<double>{1.3, 1.3}) == (0.6 * r <= 0.5));
    CHECK_FALSE(slab_contains(d, std::vector<double>{1.4, 1.4}));
}

TEST_CASE("boundary points count as inside") {
    const Slab s({0, 0}, {1, 0}, 2);
    CHECK(slab_contains(s, std::vector<double>{1.0, 3}));
    CHECK(slab_contains(s, std::vector<double>{-1.0, -3}));
}

TEST_CASE("normals are normalised and degenerate ones rejected") {
    const Slab s({0, 0}, {3, 4}, 1);
    CHECK(std::hypot(s.normal()[0], s.normal()[1]) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(Slab({0, 0}, {1e-13, 0}, 1), ValidationError);
    CHECK_THROWS_AS(Slab({0, 0}, {1, 0}, 0), ValidationError);
    CHECK_THROWS_AS(HalfSpace({0, 0}, 1), ValidationError);
}

TEST_CASE("dimension mismatch is an error") {
    const Slab s({0, 0}, {1, 0}, 2);
    CHECK_THROWS_AS(slab_contains(s, std::vector<double>{1, 2, 3}), ValidationError);
    const TruncatedSlab ts(s, {HalfSpace({1, 0}, 0)});
    CHECK_THROWS_AS(truncated_contains(ts, std::vector<double>{1}), ValidationError);
}

TEST_CASE("truncated_contains") {
    const Slab s({0, 0}, {1, 0}, 2);
    SUBCASE("empty truncation list equals slab_contains") {
        const TruncatedSlab ts(s);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-2, 2);
        for (int k = 0; k < 1000; ++k) {
            std::vector<double> x{u(rng), u(rng)};
            CHECK(truncated_contains(ts, x) == slab_contains(s, x));
        }
    }
    SUBCASE("violating one of several constraints") {
        const TruncatedSlab ts(s, {HalfSpace({0, 1}, 1), HalfSpace({0, -1}, 1), HalfSpace({1, 1}, 0.5)});
        CHECK(truncated_contains(ts, std::vector<double>{0, 0}));
        CHECK_FALSE(truncated_contains(ts, std::vector<double>{0, 1.5}));
        CHECK_FALSE(truncated_contains(ts, std::vector<double>{0.4, 0.4}));
    }
    SUBCASE("random truncated slabs match a constraint loop") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> u(-1, 1);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<HalfSpace> cuts;
            for (int c = 0; c < 3; ++c) cuts.emplace_back(std::vector<double>{u(rng), u(rng) + 2}, u(rng));
            const TruncatedSlab ts(Slab({u(rng), u(rng)}, {u(rng), 1.0}, 0.1 + std::abs(u(rng))), cuts);
            for (int k = 0; k < 100; ++k) {
                std::vector<double> x{u(rng), u(rng)};
                const double proj = ((x[0] - ts.slab.center()[0]) * ts.slab.normal()[0] +
                                     (x[1] - ts.slab.center()[1]) * ts.slab.normal()[1]);
                bool inside = std::abs(proj) <= ts.slab.width() / 2;
                for (const auto& h : cuts) inside = inside && (h.v[0] * x[0] + h.v[1] * x[1] <= h.t);
                CHECK(truncated_contains(ts, x) == inside);
                if (truncated_contains(ts, x)) CHECK(slab_contains(ts.slab, x));
            }
        }
    }
}

TEST_CASE("scale") {
    const TruncatedSlab ts(Slab({0, 0}, {1, 0}, 0.5), {HalfSpace({0, 1}, 2)});
    CHECK(scale(ts, 1.0) == ts);
    const auto two = scale(ts, 2.0);
    CHECK(two.slab.width() == 1.0);
    CHECK(two.truncations == ts.truncations);
    CHECK(two.slab.center() == ts.slab.center());
    CHECK(two.slab.normal() == ts.slab.normal());
    CHECK_THROWS_AS(scale(ts, 0.0), ValidationError);

    SUBCASE("iterated scaling stays within one ulp per step of ell*kappa^i") {
        for (double kappa : {2.0, 3.0, 1.5, 2.7}) {
            const double ell = 0.001;
            TruncatedSlab s = with_width(ts, ell);
            for (int i = 1; i <= 40; ++i) {
                s = scale(s, kappa);
                const double direct = ell * std::pow(kappa, i);
                const double ulp = std::nextafter(direct, INFINITY) - direct;
                CHECK(std::abs(s.slab.width() - direct) <= i * ulp);
            }
        }
    }
}

TEST_CASE("mass") {
    const auto ds = dgtest::random_cloud(200, 5);
    CHECK(mass(ds, TruncatedSlab(Slab({0, 0}, {1, 0}, 10))) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mass(ds, TruncatedSlab(Slab({5, 0}, {1, 0}, 1))) == 0.0);

    SUBCASE("ten points, slab covering three") {
        std::vector<double> pts;
        for (int i = 0; i < 10; ++i) {
            pts.push_back(i);
            pts.push_back(0);
        }
        const LabeledDataset line(2, 2, pts, std::vector<int>(10, 0));
        const TruncatedSlab ts(Slab({4, 0}, {1, 0}, 2.5));
        CHECK(mass(line, ts) == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(mass(line, ts) == dgtest::naive_mass(line, ts, 2.5));
    }

    SUBCASE("monotone in the scale factor") {
        const auto w = dgtest::random_cloud(300, 9, 1.0, true);
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(-1, 1);
        for (int t = 0; t < 30; ++t) {
            const TruncatedSlab ts(Slab({u(rng), u(rng)}, {u(rng), u(rng) + 0.1}, 0.01),
                                   {HalfSpace({u(rng), u(rng) + 2}, u(rng))});
            double prev = 0.0;
            for (double f = 1; f < 500; f *= 1.7) {
                const double m = mass(w, scale(ts, f));
                CHECK(m >= prev);
                prev = m;
            }
        }
    }

    SUBCASE("invariant under a common rotation") {
        const auto w = dgtest::random_cloud(300, 10, 1.0, true);
        const double th = 0.7, c = std::cos(th), s = std::sin(th);
        auto rot = [&](std::vector<double> v) { return std::vector<double>{c * v[0] - s * v[1], s * v[0] + c * v[1]}; };
        std::vector<double> pts;
        for (std::size_t i = 0; i < w.size(); ++i) {
            auto r = rot({w.point(i)[0], w.point(i)[1]});
            pts.insert(pts.end(), r.begin(), r.end());
        }
        const auto rotated = w.with_coordinates(2, pts);
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(-1, 1);
        for (int t = 0; t < 50; ++t) {
            const std::vector<double> ctr{u(rng), u(rng)}, nrm{u(rng), u(rng) + 0.1}, hv{u(rng), 1.0};
            const double ht = u(rng), width = 0.05 + std::abs(u(rng));
            const TruncatedSlab a(Slab(ctr, nrm, width), {HalfSpace(hv, ht)});
            const TruncatedSlab b(Slab(rot(ctr), rot(nrm), width), {HalfSpace(rot(hv), ht)});
            // random data never sits within rounding distance of a boundary here
            CHECK(mass(w, a) == doctest::Approx(mass(rotated, b)).epsilon(1e-12));
        }
    }
}
