#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gasketlab/green.hpp"

#include <random>

using namespace gasket;

namespace {
struct Built {
    Fractal f;
    HarmonicStructure hs;
    explicit Built(const char* name) : f(builtin_descriptor(name)), hs(make_harmonic_structure(f)) {}
};
}

TEST_CASE("renormalization factors")
{
    CHECK(std::abs(solve_renormalization(Fractal(builtin_descriptor("sg"))) - 0.6) < 1e-12);
    CHECK(std::abs(solve_renormalization(Fractal(builtin_descriptor("hexagasket"))) - 3.0 / 7) < 1e-12);
    CHECK(std::abs(solve_renormalization(Fractal(builtin_descriptor("sg3"))) - 7.0 / 15) < 1e-12);
}

TEST_CASE("sg extension matrices follow the 1/5-2/5 rule")
{
    Built b("sg");
    Mat3 a0;
    a0 << 1, 0, 0, 0.4, 0.4, 0.2, 0.4, 0.2, 0.4;
    CHECK((b.hs.A(0) - a0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("extension rows are stochastic and consistent")
{
    for (const char* name : {"sg", "hexagasket", "sg3"}) {
        Built b(name);
        for (int i = 0; i < b.f.n_maps(); ++i) {
            CHECK(b.hs.A(i).minCoeff() >= -1e-12);
            for (int r = 0; r < 3; ++r)
                CHECK(b.hs.A(i).row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
        for (const auto& id : b.f.descriptor().identifications)
            CHECK((b.hs.A(id.map_a).row(id.vertex_a) - b.hs.A(id.map_b).row(id.vertex_b)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("constants extend to constants")
{
    for (const char* name : {"sg", "hexagasket", "sg3"}) {
        Built b(name);
        const auto u = sample_harmonic(b.hs, {2.5, 2.5, 2.5}, 3);
        for (double x : u.values)
            CHECK(x == doctest::Approx(2.5).epsilon(1e-12));
    }
}

TEST_CASE("harmonic evaluation")
{
    Built b("sg");
    CHECK(harmonic_eval(b.hs, {1, 0, 0}, b.f.address("0", 1)) == doctest::Approx(0.4));
    // representative independence
    CHECK(harmonic_eval(b.hs, {0.3, -1, 2}, b.f.address("01", 1)) ==
          doctest::Approx(harmonic_eval(b.hs, {0.3, -1, 2}, b.f.address("011", 1))));
    const auto u = sample_harmonic(b.hs, {1, 0, 0}, 4);
    for (std::size_t i = 0; i < u.mesh->size(); ++i)
        if (!u.mesh->is_boundary(i))
            CHECK(std::abs(discrete_laplacian(u, u.mesh->vertex(i))) < 1e-12);
}

TEST_CASE("energy is level independent for harmonic functions")
{
    Built b("sg");
    for (const Triple& h : {Triple{1, 0, 0}, Triple{0, 1, 0}, Triple{0.2, -0.7, 1.1}}) {
        const double e0 = graph_energy(b.hs, sample_harmonic(b.hs, h, 0));
        for (int m = 1; m <= 6; ++m)
            CHECK(std::abs(graph_energy(b.hs, sample_harmonic(b.hs, h, m)) - e0) < 1e-12);
    }
    CHECK(graph_energy(b.hs, sample_harmonic(b.hs, {1, 0, 0}, 0)) == doctest::Approx(2));
    CHECK(graph_energy(b.hs, sample_harmonic(b.hs, {3, 3, 3}, 2)) == doctest::Approx(0));
}

TEST_CASE("maximum principle")
{
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> d(-1, 1);
    for (const char* name : {"sg", "hexagasket", "sg3"}) {
        Built b(name);
        const int level = b.f.n_maps() == 3 ? 4 : 3;
        for (int t = 0; t < 100; ++t) {
            const Triple h{d(rng), d(rng), d(rng)};
            const auto u = sample_harmonic(b.hs, h, level);
            const auto [lo, hi] = std::minmax_element(u.values.begin(), u.values.end());
            CHECK(*lo >= std::min({h[0], h[1], h[2]}) - 1e-12);
            CHECK(*hi <= std::max({h[0], h[1], h[2]}) + 1e-12);
        }
    }
}

TEST_CASE("discrete laplacian of an indicator")
{
    Built b("sg");
    const auto mesh = mesh_for(b.f, 3);
    const Address x = b.f.address("01", 2);
    const auto u = sample(mesh, [&](const Address& a) { return a == x ? 1.0 : 0.0; }, 1);
    CHECK(discrete_laplacian(u, x) == doctest::Approx(-4));
}

TEST_CASE("laplacian estimate")
{
    Built b("sg");
    const Address x = b.f.address("0", 1);
    std::vector<VertexFunction> fs;
    for (int m = 1; m <= 10; ++m)
        fs.push_back(sample(mesh_for(b.f, m), [&](const Address& a) { return v_vertex(b.hs, a); }, 1));
    const auto est = laplacian_estimate(fs, x);
    CHECK(std::abs(est.back() - 1.0) < 1e-3);
    const auto harm = laplacian_estimate({sample_harmonic(b.hs, {1, 0, 0}, 4)}, x);
    CHECK(std::abs(harm[0]) < 1e-12);
    Built hx("hexagasket");
    CHECK_THROWS(laplacian_estimate({sample_harmonic(hx.hs, {1, 0, 0}, 1)}, hx.f.address("0", 1)));
}

TEST_CASE("scaling of the laplacian under composition")
{
    Built b("sg");
    const Address x = b.f.address("1", 2);
    std::vector<VertexFunction> fs;
    for (int m = 2; m <= 9; ++m)
        fs.push_back(sample(mesh_for(b.f, m), [&](const Address& a) { return v_vertex(b.hs, b.f.canonical({"0" + a.word, a.vertex})); }, 1));
    CHECK(std::abs(laplacian_estimate(fs, x).back() - 0.2) < 1e-3);
}

TEST_CASE("normal derivatives")
{
    Built b("sg");
    std::vector<VertexFunction> fs;
    for (int m = 0; m <= 4; ++m)
        fs.push_back(sample_harmonic(b.hs, {1, 0, 0}, m));
    for (double t : normal_derivative(b.hs, fs, CellRef{""}, 0))
        CHECK(t == doctest::Approx(2));
    std::vector<VertexFunction> cs{sample_harmonic(b.hs, {1, 1, 1}, 3)};
    CHECK(normal_derivative(b.hs, cs, CellRef{""}, 1)[0] == doctest::Approx(0));

    // v at the junction F0q1: the two one-sided derivatives cancel up to 2/3^{m+1}.
    const int m = 10;
    std::vector<VertexFunction> vs{sample(mesh_for(b.f, m), [&](const Address& a) { return v_vertex(b.hs, a); }, 1)};
    const double sum = normal_derivative(b.hs, vs, CellRef{"0"}, 1).back() + normal_derivative(b.hs, vs, CellRef{"1"}, 0).back();
    CHECK(std::abs(sum) <= 2.0 / std::pow(3.0, m + 1) + 1e-9);
}

TEST_CASE("dirichlet solve")
{
    Built b("sg");
    const auto mesh = mesh_for(b.f, 4);
    const auto zero = sample(mesh, [](const Address&) { return 0.0; }, 1);
    const auto rep = dirichlet_solve(b.hs, zero, {1, 2, 3});
    const auto h = sample_harmonic(b.hs, {1, 2, 3}, 4);
    for (std::size_t i = 0; i < mesh->size(); ++i)
        CHECK(rep.u[i] == doctest::Approx(h[i]).epsilon(1e-12));

    const auto m8 = mesh_for(b.f, 8);
    const auto one = sample(m8, [](const Address&) { return 1.0; }, 1);
    const auto v = dirichlet_solve(b.hs, one, {0, 0, 0});
    CHECK(v.residual <= 1e-9);
    for (const auto& a : mesh_for(b.f, 3)->vertices())
        CHECK(std::abs(v.u.at(a) - v_vertex(b.hs, a)) < 1e-5);
    // round trip through the discrete laplacian
    const double s = 1.5 * std::pow(5.0, 8);
    for (std::size_t i = 0; i < m8->size(); i += 37)
        if (!m8->is_boundary(i))
            CHECK(std::abs(s * discrete_laplacian(v.u, m8->vertex(i)) - 1.0) < 1e-8);
}
