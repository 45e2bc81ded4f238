#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gasketlab/green.hpp"

#include <cmath>
#include <random>

using namespace gasket;

namespace {
struct Sg {
    Fractal f{builtin_descriptor("sg")};
    HarmonicStructure hs = make_harmonic_structure(f);
};

Address random_vertex(const Fractal& f, std::mt19937& rng, int level)
{
    std::string w;
    for (int i = 0; i < level; ++i)
        w += static_cast<char>('0' + rng() % 3);
    return f.address(w, static_cast<int>(rng() % 3));
}
}

TEST_CASE("splines")
{
    Sg s;
    const Address z = s.f.address("0", 1);
    CHECK(spline_eval(s.hs, z, 1, z) == doctest::Approx(1));
    CHECK(spline_eval(s.hs, z, 1, s.f.address("00", 1)) == doctest::Approx(0.4));
    CHECK(spline_eval(s.hs, z, 1, s.f.address("22", 0)) == 0);
    double total = 0;
    for (const auto& [a, val] : spline_support(s.hs, 3, s.f.address("0120", 2)))
        total += val;
    CHECK(total == doctest::Approx(1));
}

TEST_CASE("spline integrals")
{
    Sg s;
    for (int m = 1; m <= 6; ++m)
        CHECK(spline_integral(s.hs, s.f.extend(s.f.address("0", 1), m), m) == doctest::Approx(2 / std::pow(3.0, m + 1)).epsilon(1e-14));
    CHECK(spline_integral(s.hs, s.f.address("1", 2), 1) == doctest::Approx(2.0 / 9));
    CHECK(spline_integral(s.hs, s.f.extend(s.f.address("01", 2), 4), 4) == doctest::Approx(2.0 / 243));
}

TEST_CASE("kernel coefficients")
{
    Sg s;
    const Address a = s.f.address("0", 1), b = s.f.address("0", 2);
    CHECK(g_coeff(s.hs, a, a, 0) == doctest::Approx(9.0 / 50));
    CHECK(g_coeff(s.hs, a, b, 0) == doctest::Approx(3.0 / 50));
    CHECK(g_coeff(s.hs, s.f.address("00", 1), s.f.address("11", 2), 1) == 0);
}

TEST_CASE("green function")
{
    Sg s;
    std::mt19937 rng(3);
    for (int t = 0; t < 50; ++t) {
        const Address x = random_vertex(s.f, rng, 3), y = random_vertex(s.f, rng, 3);
        CHECK(green_eval(s.hs, x, y, 4) == doctest::Approx(green_eval(s.hs, y, x, 4)).epsilon(1e-13));
        CHECK(green_eval(s.hs, s.f.address("", 1), y, 4) == 0);
        double prev = 0;
        for (int M = 0; M <= 4; ++M) {
            const double g = green_eval(s.hs, x, y, M);
            CHECK(g >= prev - 1e-15);
            prev = g;
        }
    }
}

TEST_CASE("green function integrates to -v")
{
    Sg s;
    const int M = 6, level = M + 1;
    const auto mesh = mesh_for(s.f, level);
    for (const auto& x : mesh_for(s.f, 2)->vertices()) {
        // integral of the level-(M+1) interpolant of G_M(x, .) is exact.
        double integral = 0;
        for (std::size_t i = 0; i < mesh->size(); ++i) {
            const Address& y = mesh->vertex(i);
            if (!y.word.empty())
                integral += green_eval(s.hs, x, y, M) * spline_integral(s.hs, y, level);
        }
        CHECK(std::abs(-integral - v_vertex(s.hs, x)) < 1e-4);
    }
}

TEST_CASE("phi_m")
{
    Sg s;
    CHECK(phi_eval(s.hs, 1, s.f.address("01", 2)) == doctest::Approx(1));
    CHECK(phi_eval(s.hs, 1, s.f.address("0", 2)) == 0);
    const Address t = s.f.address("011", 0);
    CHECK(phi_eval(s.hs, 0, t) == doctest::Approx(0.8));
    CHECK(phi_eval(s.hs, 1, t) == doctest::Approx(0.6));
    CHECK(phi_eval(s.hs, 2, t) == doctest::Approx(1));
    for (const auto& x : mesh_for(s.f, 6)->vertices())
        for (int m = 0; m < 4; ++m) {
            const double p = phi_eval(s.hs, m, x);
            CHECK(p >= -1e-15);
            CHECK(p <= 1 + 1e-15);
        }
}

TEST_CASE("v and its normalization")
{
    Sg s;
    const auto q = v_eval(s.hs, s.f.address("", 0), 12);
    CHECK(q.contains(0));
    for (const char* w : {"011", "012", "021", "022"}) {
        const auto vt = v_eval(s.hs, s.f.address(w, 0), 12);
        CHECK((-15.0 * vt).contains(24.0 / 25));
        CHECK(vt.width() <= 1e-6);
    }
    for (const auto& x : mesh_for(s.f, 5)->vertices()) {
        const double vt = -15 * v_vertex(s.hs, x);
        CHECK(vt >= -1e-15);
        CHECK(vt <= 1 + 1e-12);
    }
}

TEST_CASE("v is D3 invariant")
{
    Sg s;
    for (const auto& x : mesh_for(s.f, 4)->vertices())
        for (int g = 0; g < s.f.symmetry_count(); ++g)
            CHECK(std::abs(v_vertex(s.hs, s.f.apply_symmetry(g, x)) - v_vertex(s.hs, x)) < 1e-12);
}

TEST_CASE("truncated v on V_{M+1}")
{
    Sg s;
    for (int M = 1; M <= 6; ++M) {
        double hi = -1;
        for (const auto& x : mesh_for(s.f, M + 1)->vertices())
            hi = std::max(hi, -15 * v_eval(s.hs, x, M).mid());
        CHECK(hi <= 1 + 1e-9);
    }
}

TEST_CASE("phi cell integrals")
{
    Sg s;
    for (int m = 0; m <= 5; ++m)
        CHECK(phi_cell_integral(s.hs, m, CellRef{"0"}) == doctest::Approx(2.0 / 9));
    double series = 0;
    for (int m = 0; m <= 40; ++m)
        series += std::pow(5.0, -m) * phi_cell_integral(s.hs, m, CellRef{"0"});
    CHECK(series == doctest::Approx(5.0 / 18));
}
