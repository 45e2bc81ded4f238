#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gasketlab/meanvalue.hpp"

#include <cmath>
#include <random>

using namespace gasket;

namespace {
struct Built {
    Fractal f;
    HarmonicStructure hs;
    explicit Built(const char* name) : f(builtin_descriptor(name)), hs(make_harmonic_structure(f)) {}
};

bool encloses(const ITriple& a, const Triple& v, double slack = 1e-12)
{
    for (std::size_t i = 0; i < 3; ++i)
        if (!(a[i].lo - slack <= v[i] && v[i] <= a[i].hi + slack))
            return false;
    return true;
}

double max_width(const ITriple& a) { return std::max({a[0].width(), a[1].width(), a[2].width()}); }

// Coefficients of B's mean in the boundary basis of the base cell, from independent piece integrals.
Triple mean_coefficients(CutIntegrator& cut, const CutoffSpec& spec, double tol)
{
    const auto& hs = cut.structure();
    Mat3 P;
    for (int j = 0; j < 3; ++j) {
        Triple e{};
        e[static_cast<std::size_t>(j)] = 1;
        P.col(j) = harmonic_on_cell(hs, e, spec.base_cell.word);
    }
    const Mat3 Pinv = P.inverse();
    Triple out{};
    for (int i = 0; i < 3; ++i) {
        const Eigen::Vector3d hk = Pinv.col(i);
        const BMeasures bm = integrate_harmonic_over(cut, spec, {hk(0), hk(1), hk(2)}, tol);
        out[static_cast<std::size_t>(i)] = bm.integral.mid() / bm.mass.mid();
    }
    return out;
}
}

TEST_CASE("tmap anchors on sg")
{
    Built b("sg");
    CutIntegrator cut(b.hs);
    const double tol = 1e-5;
    const auto t000 = tmap(cut, 0, {0, 0, 0}, tol);
    CHECK(encloses(t000, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
    const auto t001 = tmap(cut, 0, {0, 0, 1}, tol);
    CHECK(encloses(t001, {0, 0, 1}));
    CHECK(max_width(t001) <= 1e-4);
    const auto t011 = tmap(cut, 0, {0, 1, 1}, tol);
    CHECK(encloses(t011, {-1.0 / 9, 5.0 / 9, 5.0 / 9}));
    CHECK(max_width(t011) <= 1e-4);
    CHECK(encloses(tmap(cut, 0, {1, 1, 1}, tol), {1.0 / 3, 1.0 / 3, 1.0 / 3}));
    const auto mid = midpoints(tmap(cut, 0, {0, 0.5, 1}, tol));
    CHECK(mid[0] == doctest::Approx(-0.02857).epsilon(1e-3));
    CHECK(mid[1] == doctest::Approx(0.2).epsilon(1e-3));
}

TEST_CASE("tmap row sums and the outside curve")
{
    Built b("sg");
    CutIntegrator cut(b.hs);
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> d(0, 1);
    for (int t = 0; t < 20; ++t) {
        const auto a = tmap(cut, 0, {0, d(rng), d(rng)}, 1e-6);
        const IntervalValue s = a[0] + a[1] + a[2];
        CHECK(std::abs(s.mid() - 1) <= s.width() + 1e-12);
    }
    for (int i = 1; i <= 9; ++i)
        CHECK(tmap(cut, 0, {0, i / 10.0, 1}, 1e-6)[0].hi <= 0);
}

TEST_CASE("row sums on hexagasket and sg3")
{
    for (const char* name : {"hexagasket", "sg3"}) {
        Built b(name);
        CutIntegrator cut(b.hs);
        std::mt19937 rng(4);
        std::uniform_real_distribution<double> d(0, 1);
        for (int type = 0; type < b.f.neighborhood_type_count(); ++type) {
            const Valence l = b.f.valence(b.f.neighborhood_type_representative(type));
            for (int t = 0; t < 10; ++t) {
                Triple c{d(rng), d(rng), 0};
                for (std::size_t i = 0; i < 3; ++i)
                    if (l[i] == 0)
                        c[i] = 0;
                const auto a = tmap(cut, type, c, 1e-5);
                const IntervalValue s = a[0] + a[1] + a[2];
                CHECK(std::abs(s.mid() - 1) <= s.width() + 1e-12);
            }
        }
    }
}

TEST_CASE("tmap is independent of the base cell")
{
    for (const char* name : {"sg", "sg3"}) {
        Built b(name);
        CutIntegrator cut(b.hs);
        const double tol = 1e-6;
        for (int type = 0; type < b.f.neighborhood_type_count(); ++type) {
            const CellRef rep = b.f.neighborhood_type_representative(type);
            const Valence l = b.f.valence(rep);
            Triple c{0.35, 0.8, 0.0};
            for (std::size_t i = 0; i < 3; ++i)
                if (l[i] == 0)
                    c[i] = 0;
            const auto a = tmap(cut, type, c, tol);
            int seen = 0;
            for (int len = 2; len <= 4 && seen < 5; ++len)
                for_each_word(b.f.n_maps(), len, [&](const std::string& w) {
                    const CellRef cell{w};
                    if (seen >= 5 || b.f.touches_boundary(cell) || b.f.neighborhood_type(cell) != type || b.f.valence(cell) != l)
                        return;
                    ++seen;
                    const Triple got = mean_coefficients(cut, {cell, c}, tol * 1e-2);
                    for (std::size_t i = 0; i < 3; ++i)
                        CHECK(std::abs(got[i] - a[i].mid()) <= 2 * a[i].width() + 1e-6);
                });
            CHECK(seen >= 2);
        }
    }
}

TEST_CASE("injectivity witness on B*")
{
    Built b("sg");
    CutIntegrator cut(b.hs);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> d(0, 1);
    int pairs = 0;
    while (pairs < 20) {
        const Triple c1{0, d(rng), d(rng)}, c2{0, d(rng), d(rng)};
        if (std::hypot(c1[1] - c2[1], c1[2] - c2[2]) < 0.05)
            continue;
        ++pairs;
        const auto a1 = tmap(cut, 0, c1, 1e-6), a2 = tmap(cut, 0, c2, 1e-6);
        double gap = 0;
        for (std::size_t i = 0; i < 3; ++i)
            gap = std::max(gap, std::abs(a1[i].mid() - a2[i].mid()) - a1[i].width() - a2[i].width());
        CHECK(gap > 0);
    }
}

TEST_CASE("target coefficients")
{
    Built b("sg");
    const CellRef w{"01"};
    const Triple p0 = target_coefficients(b.hs, b.f.address("01", 0), w);
    CHECK(p0[0] == doctest::Approx(1));
    CHECK(p0[1] == doctest::Approx(0));
    const Triple mid = target_coefficients(b.hs, b.f.address("010", 1), w);
    CHECK(mid[0] == doctest::Approx(0.4));
    CHECK(mid[1] == doctest::Approx(0.4));
    CHECK(mid[2] == doctest::Approx(0.2));
    // F_w F_0^n q_1 approaches p_0 at the rate (3/5)^n
    const Triple deep = target_coefficients(b.hs, b.f.address("010000000000", 1), w);
    CHECK(1 - deep[0] <= 1.01 * std::pow(0.6, 10));
    CHECK(1 - deep[0] > 0);
}

TEST_CASE("solving for neighborhoods")
{
    Built b("sg");
    CutIntegrator cut(b.hs);
    const double tol = 1e-6;
    const auto corner = solve_mvn(cut, b.f.address("01", 2), CellRef{"01"}, tol);
    CHECK(corner.spec.c[0] == doctest::Approx(0));
    CHECK(corner.spec.c[1] == doctest::Approx(0));
    CHECK(corner.spec.c[2] == doctest::Approx(1));
    CHECK(corner.converged);

    const auto inner = solve_mvn(cut, b.f.address("010", 1), CellRef{"01"}, tol);
    CHECK(inner.residual <= tol);
    CHECK(std::min({inner.spec.c[0], inner.spec.c[1], inner.spec.c[2]}) == 0);
    CHECK(verify_residual(cut, inner.spec, b.f.address("010", 1), tol) <= tol);

    const Address x = b.f.address("0", 1);
    CHECK(first_level(b.f, x) == 2);
    for (const auto& m : mvn_sequence(cut, x, 0, 6, tol))
        CHECK(m.residual <= tol);
    CHECK_THROWS(solve_mvn(cut, x, CellRef{"0"}, tol));
}

TEST_CASE("case 2 on the hexagasket")
{
    Built b("hexagasket");
    CutIntegrator cut(b.hs);
    int found = 0;
    for_each_word(6, 2, [&](const std::string& w) {
        const CellRef cell{w};
        if (found >= 3 || b.f.touches_boundary(cell))
            return;
        const Valence l = b.f.valence(cell);
        if (std::count(l.begin(), l.end(), 0) != 1)
            return;
        const auto m = solve_mvn(cut, b.f.address(w + "1", 2), cell, 1e-6);
        CHECK(m.solve_case == SolveCase::one_nonjunction);
        CHECK(m.residual <= 1e-6);
        ++found;
    });
    CHECK(found == 3);
}

TEST_CASE("c_B")
{
    Built b("sg");
    CutIntegrator cut(b.hs);
    const Address x = b.f.address("01", 2);
    std::vector<IntervalValue> cbs;
    for (const auto& m : mvn_sequence(cut, x, 2, 5, 1e-6)) {
        const int k = m.spec.base_cell.level();
        const auto cb = cb_constant(cut, m, x);
        const auto band = cb_band(k);
        CHECK(cb.lo >= band.first);
        CHECK(cb.hi <= band.second);
        const auto series = cb_constant_series(cut, m, x, k + 10);
        CHECK(std::max(cb.lo, series.lo) <= std::min(cb.hi, series.hi));
        cbs.push_back(cb);
    }
    for (std::size_t i = 1; i < cbs.size(); ++i)
        CHECK(std::abs(5 * cbs[i].mid() - cbs[i - 1].mid()) <= 5 * cbs[i].width() + cbs[i - 1].width() + 1e-15);

    const Address j = b.f.address("0", 1);
    const auto mj = solve_mvn(cut, j, *base_cell_at(b.f, j, 3), 1e-6);
    CHECK((cb_constant(cut, mj, j) * 125.0).contains(1.0 / 18));
}

TEST_CASE("convergence of the mean value quotient")
{
    Built b("sg");
    CutIntegrator cut(b.hs);
    const Address x = b.f.address("0", 1);
    for (const auto& r : convergence_experiment(cut, TestFunction::harmonic, {0.2, 1, -0.4}, x, 2, 4, 7, 1e-6))
        CHECK(std::abs(r.numerator.mid()) <= r.numerator.width() + 1e-12);
    for (const auto& r : convergence_experiment(cut, TestFunction::v, {1, 0, 0}, x, 2, 4, 7, 1e-6))
        CHECK(r.ratio.contains(1.0));
    for (const auto& r : convergence_experiment(cut, TestFunction::green_of_harmonic, {1, 0, 0}, x, 2, 4, 7, 1e-6))
        CHECK(std::abs(r.ratio.mid() - r.expected) < 1e-6);
    CHECK_THROWS(convergence_experiment(cut, TestFunction::v, {1, 0, 0}, x, 2, 6, 7, 1e-6));
}
