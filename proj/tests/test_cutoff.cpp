#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gasketlab/cutoff.hpp"

#include <cmath>
#include <random>

using namespace gasket;

namespace {
struct Built {
    Fractal f;
    HarmonicStructure hs;
    explicit Built(const char* name) : f(builtin_descriptor(name)), hs(make_harmonic_structure(f)) {}
};

// Mass of {y >= y0} in sg, enclosed by classifying level-d cells by their vertices.
std::pair<double, double> brute_mass_above(const Fractal& f, double y0, int d)
{
    double in = 0, straddle = 0;
    const double mu = std::pow(3.0, -d);
    for_each_word(3, d, [&](const std::string& w) {
        double lo = 1e9, hi = -1e9;
        for (int v = 0; v < 3; ++v) {
            const double y = f.map_word(w, f.boundary_point(v)).y;
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
        if (lo >= y0)
            in += mu;
        else if (hi > y0)
            straddle += mu;
    });
    return {in, in + straddle};
}
}

TEST_CASE("rationalize")
{
    const auto r = rationalize(0.375);
    CHECK(r.num == 3);
    CHECK(r.den == 8);
    const auto t = rationalize(1.0 / 3);
    CHECK(t.num == 1);
    CHECK(t.den == 3);
}

TEST_CASE("cell integral of harmonic functions")
{
    Built b("sg");
    CHECK(cell_integral_harmonic(b.f, {1, 1, 1}, CellRef{"01"}) == doctest::Approx(1.0 / 9));
    CHECK(cell_integral_harmonic(b.f, {1, 0, 0}, CellRef{""}) == doctest::Approx(1.0 / 3));
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int t = 0; t < 5; ++t) {
        const Triple h{d(rng), d(rng), d(rng)};
        double brute = 0;
        for_each_word(3, 8, [&](const std::string& w) {
            const auto hv = harmonic_on_cell(b.hs, h, w);
            brute += b.f.cell_measure(CellRef{w}) * hv.mean();
        });
        CHECK(std::abs(cell_integral_harmonic(b.f, h, CellRef{""}) - brute) < 1e-6);
    }
}

TEST_CASE("junction means")
{
    Built b("sg");
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> d(-1, 1);
    for (const char* w : {"0", "01", "0122"})
        for (int v = 0; v < 3; ++v) {
            const Address p = b.f.address(w, v);
            if (b.f.classify_point(p) != PointKind::junction)
                continue;
            const Triple h{d(rng), d(rng), d(rng)};
            CHECK(std::abs(junction_mean(b.hs, h, p).value - harmonic_eval(b.hs, h, p)) < 1e-12);
            CHECK(junction_mean(b.hs, {2, 2, 2}, p).value == doctest::Approx(2));
        }
    CHECK_THROWS(junction_mean(b.hs, {1, 0, 0}, b.f.address("", 0)));
}

TEST_CASE("cutoff endpoints")
{
    for (const char* name : {"sg", "hexagasket", "sg3"}) {
        Built b(name);
        CutIntegrator cut(b.hs);
        const CellRef cell{"1"};
        const double mu = b.f.cell_measure(cell);
        const auto full = cutoff_coefficients(cut, {cell, 0, 1.0}, 1e-6);
        CHECK(full.m.contains(1.0 / 3));
        CHECK(full.n.contains(1.0 / 3));
        CHECK(full.mass.lo <= mu + 1e-12);
        CHECK(full.mass.hi >= mu - 1e-12);
        const auto none = cutoff_coefficients(cut, {cell, 2, 0.0}, 1e-6);
        CHECK(none.m.contains(0));
        CHECK(none.n.contains(0));
        CHECK(none.mass.contains(0));
    }
}

TEST_CASE("cutoff monotonicity and width")
{
    for (const char* name : {"sg", "hexagasket", "sg3"}) {
        Built b(name);
        CutIntegrator cut(b.hs);
        const double tol = 1e-5;
        CutoffCoefficients prev = cutoff_coefficients(cut, {CellRef{""}, 0, 0.0}, tol);
        for (int i = 1; i <= 10; ++i) {
            const auto cur = cutoff_coefficients(cut, {CellRef{""}, 0, i / 10.0}, tol);
            CHECK(cur.converged);
            CHECK(prev.m.hi <= cur.m.lo + 2 * tol);
            CHECK(prev.n.hi <= cur.n.lo + 2 * tol);
            CHECK(prev.mass.hi <= cur.mass.lo + 2 * tol);
            prev = cur;
        }
        const auto half = cutoff_coefficients(cut, {CellRef{""}, 0, 0.5}, tol);
        const auto one = cutoff_coefficients(cut, {CellRef{""}, 0, 1.0}, tol);
        CHECK(half.m.hi < one.m.lo);
        CHECK(half.n.hi < one.n.lo);
    }
}

TEST_CASE("cut sections are symmetric about the apex axis")
{
    for (const char* name : {"sg", "hexagasket", "sg3"}) {
        Built b(name);
        CutIntegrator cut(b.hs);
        for (int a = 0; a < 3; ++a) {
            const ITriple j = cut.basis(CutIntegrator::toward(a), cut.level_for(0.4), cut.default_depth());
            const auto s = static_cast<std::size_t>((a + 1) % 3), t = static_cast<std::size_t>((a + 2) % 3);
            CHECK(std::abs(j[s].mid() - j[t].mid()) <= j[s].width() + j[t].width() + 1e-15);
        }
    }
}

TEST_CASE("cutoff mass against a brute-force enclosure")
{
    Built b("sg");
    CutIntegrator cut(b.hs);
    const double H = std::sqrt(3.0) / 2;
    for (double c : {0.2, 0.45, 0.7}) {
        const auto co = cutoff_coefficients(cut, {CellRef{""}, 0, c}, 1e-6);
        const auto [lo, hi] = brute_mass_above(b.f, H * (1 - c), 9);
        CHECK(co.mass.hi >= lo);
        CHECK(co.mass.lo <= hi);
        CHECK(co.mass.lo >= lo - 1e-12);
        CHECK(co.mass.hi <= hi + 1e-12);
    }
}

TEST_CASE("cutoff coefficients integrate harmonic functions")
{
    Built b("sg");
    CutIntegrator cut(b.hs);
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> d(-1, 1);
    const double tol = 1e-6;
    const auto co = cutoff_coefficients(cut, {CellRef{""}, 1, 1.0}, tol);
    for (int t = 0; t < 20; ++t) {
        const Triple h{d(rng), d(rng), d(rng)};
        const double est = co.m.mid() * h[1] + co.n.mid() * (h[0] + h[2]);
        CHECK(std::abs(est - cell_integral_harmonic(b.f, h, CellRef{""})) <= 2 * tol);
    }
    // additivity: a cut plus its complement from the opposite side fills the cell
    const Level s = cut.level_for(0.3);
    const auto part = cut.basis(0, s, 24);
    const auto rest = cut.basis(3, -s, 24);
    IntervalValue total{0, 0};
    for (std::size_t i = 0; i < 3; ++i)
        total += part[i] + rest[i];
    CHECK(total.lo <= 1 + 2 * tol);
    CHECK(total.hi >= 1 - 2 * tol);
    CHECK(total.width() <= 2 * tol);
}

TEST_CASE("integrating sampled functions")
{
    Built b("sg");
    CutIntegrator cut(b.hs);
    const Triple h{0.3, -0.5, 1.2};
    const auto u = sample_harmonic(b.hs, h, 6);
    const auto hv = harmonic_on_cell(b.hs, h, "12");
    const auto iv = integrate_vertex_function(cut, u, CellRef{"12"}, 1e-8);
    CHECK(iv.contains(cell_integral_harmonic(b.f, {hv(0), hv(1), hv(2)}, CellRef{"12"})));
    CHECK(iv.width() < 1e-8);

    const int M = 8;
    const auto mesh = mesh_for(b.f, M);
    const auto v = sample(mesh, [&](const Address& a) { return v_vertex(b.hs, a); }, 1);
    const auto ones = sample(mesh, [](const Address&) { return 1.0; }, 1);
    const double target = -kVScale * 5.0 / 18.0;
    const auto plain = integrate_vertex_function(cut, v, CellRef{"0"}, 1e-8);
    CHECK(std::abs(plain.mid() - target) < 2e-4);
    const auto corrected = integrate_vertex_function(cut, v, CellRef{"0"}, 1e-8, &ones);
    CHECK(std::abs(corrected.mid() - target) < 1e-10);
    CHECK_THROWS(integrate_vertex_function(cut, sample_harmonic(b.hs, h, 3), CellRef{"012"}, 1e-8));
}
