#include "gasketlab/meanvalue.hpp"

#include <algorithm>
#include <cmath>

namespace gasket {

namespace {

const IntervalValue kZero{0.0, 0.0};

void require_sg(const Fractal& f, const char* what)
{
    if (f.name() != "sg" || f.n_maps() != 3)
        throw std::invalid_argument(std::string(what) + ": only available on sg");
}

// Evaluation tolerance for the cut integrals inside the solver.
double inner_tol(double tol) { return std::min(1e-10, tol * 1e-3); }

double worst_gap(const IntervalValue& iv, double target)
{
    return std::max(std::fabs(iv.lo - target), std::fabs(iv.hi - target));
}

struct PieceGeometry {
    int dir;
    Level s;
    int depth;
};

PieceGeometry piece(CutIntegrator& cut, int apex, double c, double tol)
{
    const auto co = cutoff_coefficients(cut, CutoffRegion{CellRef{}, apex, c}, tol);
    return {CutIntegrator::toward(apex), cut.level_for(c), co.depth};
}

} // namespace

Triple midpoints(const ITriple& a) { return {a[0].mid(), a[1].mid(), a[2].mid()}; }

namespace {

double max_width(const ITriple& a) { return std::max({a[0].width(), a[1].width(), a[2].width()}); }

ITriple assemble_tmap(CutIntegrator& cut, const Valence& l, const Triple& c, double piece_tol, bool* at_cap)
{
    std::array<IntervalValue, 3> ja{}, js{};
    *at_cap = false;
    for (std::size_t i = 0; i < 3; ++i) {
        if (c[i] == 0.0) {
            ja[i] = js[i] = kZero;
            continue;
        }
        const auto co = cutoff_coefficients(cut, CutoffRegion{CellRef{}, 0, c[i]}, piece_tol);
        ja[i] = co.m;
        js[i] = co.n;
        *at_cap = *at_cap || co.depth >= cut.depth_cap();
    }
    // Neighbor vertices other than p_i are eliminated with the discrete
    // mean value identity of harmonic functions at the junction p_i.
    IntervalValue mass{1.0, 1.0};
    for (std::size_t i = 0; i < 3; ++i)
        mass += static_cast<double>(l[i]) * (ja[i] + 2.0 * js[i]);
    ITriple out{};
    for (std::size_t i = 0; i < 3; ++i) {
        IntervalValue num = outward(1.0 / 3.0, 1.0 / 3.0) + static_cast<double>(l[i]) * ja[i] +
                            static_cast<double>(2 * l[i] + 2) * js[i];
        for (std::size_t j = 0; j < 3; ++j)
            if (j != i)
                num = num - js[j];
        out[i] = num / mass;
    }
    return out;
}

} // namespace

ITriple tmap(CutIntegrator& cut, const Valence& l, const Triple& c, double tol, bool* converged)
{
    if (!(tol > 0))
        throw std::invalid_argument("tmap: tol must be positive");
    for (std::size_t i = 0; i < 3; ++i)
        if (l[i] == 0 && c[i] != 0.0)
            throw std::invalid_argument("tmap: c_i must be 0 at a nonjunction vertex");
    // Piece widths add up (and get amplified by the valences), so the piece
    // tolerance is tightened until the assembled triple meets tol.
    double piece_tol = tol;
    bool at_cap = false;
    ITriple out = assemble_tmap(cut, l, c, piece_tol, &at_cap);
    while (max_width(out) > tol && !at_cap && piece_tol > 1e-15) {
        piece_tol /= 8;
        out = assemble_tmap(cut, l, c, piece_tol, &at_cap);
    }
    if (converged)
        *converged = max_width(out) <= tol;
    return out;
}

ITriple tmap(CutIntegrator& cut, int neighborhood_type, const Triple& c, double tol, bool* converged)
{
    const auto& f = cut.structure().frac();
    return tmap(cut, f.valence(f.neighborhood_type_representative(neighborhood_type)), c, tol, converged);
}

Triple target_coefficients(const HarmonicStructure& hs, const Address& x, const CellRef& base_cell)
{
    const auto& f = hs.frac();
    const Address cx = f.canonical(x);
    const int level = std::max(cx.level(), base_cell.level());
    for (const auto& r : f.representatives(cx, level))
        if (r.word.compare(0, base_cell.word.size(), base_cell.word) == 0) {
            const auto row = harmonic_row(hs, std::string_view(r.word).substr(base_cell.word.size()), r.vertex);
            return {row(0), row(1), row(2)};
        }
    throw std::invalid_argument("target_coefficients: x is not in cell '" + base_cell.word + "'");
}

BMeasures integrate_harmonic_over(CutIntegrator& cut, const CutoffSpec& spec, const Triple& h, double tol)
{
    const auto& hs = cut.structure();
    const auto& f = hs.frac();
    const CellRef& w = spec.base_cell;
    const Eigen::Vector3d hw = harmonic_on_cell(hs, h, w.word);
    const double mw = f.cell_measure(w);
    BMeasures out{outward(mw * hw.sum() / 3.0, mw * hw.sum() / 3.0), IntervalValue{mw, mw}};
    const auto nb = f.neighbor_cells(w);
    for (std::size_t i = 0; i < 3; ++i) {
        if (spec.c[i] == 0.0)
            continue;
        for (const auto& n : nb[i]) {
            const auto g = piece(cut, n.apex, spec.c[i], tol);
            const ITriple j = cut.basis(g.dir, g.s, g.depth);
            const Eigen::Vector3d hn = harmonic_on_cell(hs, h, n.cell.word);
            const double mn = f.cell_measure(n.cell);
            for (int k = 0; k < 3; ++k) {
                out.integral += (mn * hn(k)) * j[static_cast<std::size_t>(k)];
                out.mass += mn * j[static_cast<std::size_t>(k)];
            }
        }
    }
    return out;
}

double verify_residual(CutIntegrator& cut, const CutoffSpec& spec, const Address& x, double tol)
{
    const auto& hs = cut.structure();
    double worst = 0;
    for (int j = 0; j < 3; ++j) {
        Triple h{};
        h[static_cast<std::size_t>(j)] = 1.0;
        const BMeasures b = integrate_harmonic_over(cut, spec, h, inner_tol(tol));
        worst = std::max(worst, worst_gap(b.integral / b.mass, harmonic_eval(hs, h, hs.frac().canonical(x))));
    }
    return worst;
}

namespace {

struct Solver2D {
    CutIntegrator& cut;
    Valence l;
    Triple a;
    std::size_t i1, i2, z;
    double tol;
    int evaluations = 0;

    Triple spec(double c1, double c2) const
    {
        Triple c{};
        c[i1] = c1;
        c[i2] = c2;
        return c;
    }
    Eigen::Vector2d residual(double c1, double c2)
    {
        ++evaluations;
        const Triple t = midpoints(tmap(cut, l, spec(c1, c2), inner_tol(tol)));
        return {t[i1] - a[i1], t[i2] - a[i2]};
    }
};

bool newton(Solver2D& s, Eigen::Vector2d& c, double goal)
{
    constexpr double kStep = 1e-4;
    Eigen::Vector2d r = s.residual(c(0), c(1));
    for (int it = 0; it < 60; ++it) {
        if (r.lpNorm<Eigen::Infinity>() <= goal)
            return true;
        Eigen::Matrix2d jac;
        for (int d = 0; d < 2; ++d) {
            Eigen::Vector2d cp = c;
            const double h = c(d) + kStep <= 1.0 ? kStep : -kStep;
            cp(d) += h;
            jac.col(d) = (s.residual(cp(0), cp(1)) - r) / h;
        }
        if (std::fabs(jac.determinant()) < 1e-14)
            return false;
        const Eigen::Vector2d step = jac.partialPivLu().solve(r);
        double lambda = 1.0;
        bool moved = false;
        while (lambda > 1e-6) {
            const Eigen::Vector2d trial = (c - lambda * step).cwiseMax(0.0).cwiseMin(1.0);
            const Eigen::Vector2d rt = s.residual(trial(0), trial(1));
            if (rt.lpNorm<Eigen::Infinity>() < r.lpNorm<Eigen::Infinity>()) {
                c = trial;
                r = rt;
                moved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!moved)
            return r.lpNorm<Eigen::Infinity>() <= goal;
    }
    return r.lpNorm<Eigen::Infinity>() <= goal;
}

// Outer bisection on c_{i1}; inner bisection on c_{i2}, along which the
// weight at p_{i2} increases.
bool nested_bisection(Solver2D& s, Eigen::Vector2d& c, double goal)
{
    const auto inner = [&](double c1) {
        double lo = 0.0, hi = 1.0;
        if (s.residual(c1, 0.0)(1) >= 0)
            return 0.0;
        if (s.residual(c1, 1.0)(1) <= 0)
            return 1.0;
        for (int it = 0; it < 45; ++it) {
            const double mid = 0.5 * (lo + hi);
            (s.residual(c1, mid)(1) < 0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    double lo = 0.0, hi = 1.0;
    const double glo = s.residual(lo, inner(lo))(0);
    const double ghi = s.residual(hi, inner(hi))(0);
    if ((glo > 0) == (ghi > 0))
        return false;
    for (int it = 0; it < 45; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double g = s.residual(mid, inner(mid))(0);
        ((g > 0) == (glo > 0) ? lo : hi) = mid;
    }
    c = {0.5 * (lo + hi), inner(0.5 * (lo + hi))};
    return s.residual(c(0), c(1)).lpNorm<Eigen::Infinity>() <= goal;
}

} // namespace

MeanValueNeighborhood solve_mvn(CutIntegrator& cut, const Address& x, const CellRef& base_cell, double tol)
{
    if (!(tol > 0))
        throw std::invalid_argument("solve_mvn: tol must be positive");
    const auto& hs = cut.structure();
    const auto& f = hs.frac();
    MeanValueNeighborhood out;
    out.spec.base_cell = base_cell;
    const Valence l = f.valence(base_cell); // throws if the cell meets V_0
    out.target = target_coefficients(hs, x, base_cell);
    const Triple& a = out.target;

    std::vector<std::size_t> nonjunction;
    for (std::size_t i = 0; i < 3; ++i)
        if (l[i] == 0)
            nonjunction.push_back(i);

    const double goal = std::min(1e-8, tol * 1e-2);
    if (nonjunction.size() >= 2) {
        out.solve_case = SolveCase::two_nonjunctions;
        out.method = "cell";
    } else if (nonjunction.size() == 1) {
        // h(p_z) is the average of the other two vertices, so only the
        // reduced pair (a_i1 + a_z/2, a_i2 + a_z/2) matters.
        out.solve_case = SolveCase::one_nonjunction;
        const std::size_t z = nonjunction[0];
        const std::size_t i1 = (z + 1) % 3 < (z + 2) % 3 ? (z + 1) % 3 : (z + 2) % 3;
        const std::size_t i2 = 3 - z - i1;
        const double want1 = a[i1] + 0.5 * a[z];
        const std::size_t p = want1 >= 0.5 ? i1 : i2;
        const double want = a[p] + 0.5 * a[z];
        const auto reduced = [&](double c) {
            Triple cc{};
            cc[p] = c;
            const Triple t = midpoints(tmap(cut, l, cc, inner_tol(tol)));
            return t[p] + 0.5 * t[z] - want;
        };
        double lo = 0.0, hi = 1.0;
        if (reduced(1.0) < -goal)
            throw MeanValueError("solve_mvn: target outside the reachable segment", -reduced(1.0));
        for (int it = 0; it < 60 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            (reduced(mid) < 0 ? lo : hi) = mid;
        }
        out.spec.c[p] = reduced(lo) == 0 ? lo : 0.5 * (lo + hi);
        out.method = "bisection";
    } else {
        out.solve_case = SolveCase::all_junctions;
        std::array<std::size_t, 3> order{0, 1, 2};
        std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return a[p] < a[q]; });
        bool solved = false;
        double best = 1e300;
        for (std::size_t z : order) {
            const std::size_t i1 = z == 0 ? 1 : 0;
            const std::size_t i2 = z == 2 ? 1 : 2;
            Solver2D s{cut, l, a, i1, i2, z, tol};
            // grid start
            Eigen::Vector2d c(0, 0);
            double bestgrid = 1e300;
            for (int g1 = 0; g1 <= 16; ++g1)
                for (int g2 = 0; g2 <= 16; ++g2) {
                    const double r = s.residual(g1 / 16.0, g2 / 16.0).lpNorm<Eigen::Infinity>();
                    if (r < bestgrid) {
                        bestgrid = r;
                        c = {g1 / 16.0, g2 / 16.0};
                    }
                }
            out.method = "grid";
            if (bestgrid <= goal) {
                solved = true;
            } else {
                out.method = "newton";
                solved = newton(s, c, goal);
                if (!solved) {
                    Eigen::Vector2d cb = c;
                    if (nested_bisection(s, cb, goal)) {
                        c = cb;
                        solved = true;
                        out.method = "bisection";
                    }
                }
            }
            best = std::min(best, s.residual(c(0), c(1)).lpNorm<Eigen::Infinity>());
            out.spec.c = s.spec(c(0), c(1));
            if (solved)
                break;
        }
        if (!solved)
            throw MeanValueError("solve_mvn: no B* neighborhood found for cell '" + base_cell.word + "'", best);
    }

    out.achieved = tmap(cut, l, out.spec.c, inner_tol(tol));
    for (std::size_t i = 0; i < 3; ++i)
        if (out.spec.c[i] > 0)
            out.coefficients[i] = cutoff_coefficients(cut, CutoffRegion{base_cell, 0, out.spec.c[i]}, inner_tol(tol));
    out.residual = verify_residual(cut, out.spec, x, tol);
    out.converged = out.residual <= tol;
    return out;
}

std::optional<CellRef> base_cell_at(const Fractal& f, const Address& x, int k)
{
    const Address cx = f.canonical(x);
    if (cx.word.empty())
        throw std::invalid_argument("x lies in V_0");
    std::vector<CellRef> cands;
    if (k < cx.level())
        cands.push_back(CellRef{cx.word.substr(0, static_cast<std::size_t>(k))});
    else
        for (const auto& r : f.representatives(cx, k))
            cands.push_back(CellRef{r.word});
    std::sort(cands.begin(), cands.end());
    for (const auto& c : cands)
        if (!f.touches_boundary(c))
            return c;
    return std::nullopt;
}

int first_level(const Fractal& f, const Address& x)
{
    const Address cx = f.canonical(x);
    for (int k = 1; k <= cx.level() + 4; ++k)
        if (base_cell_at(f, cx, k))
            return k;
    throw std::logic_error("first_level: no cell off V_0 found");
}

std::vector<MeanValueNeighborhood> mvn_sequence(CutIntegrator& cut, const Address& x, int kmin, int kmax, double tol)
{
    const auto& f = cut.structure().frac();
    std::vector<MeanValueNeighborhood> out;
    for (int k = std::max(kmin, first_level(f, x)); k <= kmax; ++k)
        out.push_back(solve_mvn(cut, x, *base_cell_at(f, x, k), tol));
    return out;
}

std::pair<double, double> cb_band(int k)
{
    const double s = std::pow(5.0, -k);
    return {7.0 / 1350.0 * s, 25.0 / 12.0 * s};
}

IntervalValue cb_constant(CutIntegrator& cut, const MeanValueNeighborhood& mvn, const Address& x)
{
    const auto& hs = cut.structure();
    const auto& f = hs.frac();
    require_sg(f, "cb_constant");
    const CellRef& w = mvn.spec.base_cell;
    const int k = w.level();
    const double shrink = std::pow(5.0, -k);
    // v o F_w = (harmonic part) + 5^{-k} v on every level-k cell.
    const auto vertex_v = [&](const CellRef& c) {
        Eigen::Vector3d v;
        for (int j = 0; j < 3; ++j)
            v(j) = v_vertex(hs, f.canonical({c.word, j}));
        return v;
    };
    const double mw = f.cell_measure(w);
    IntervalValue integral = mw * (outward(vertex_v(w).sum() / 3.0, vertex_v(w).sum() / 3.0) +
                                   shrink * outward(-1.0 / 18.0, -1.0 / 18.0));
    IntervalValue mass{mw, mw};
    const auto nb = f.neighbor_cells(w);
    for (std::size_t i = 0; i < 3; ++i) {
        if (mvn.spec.c[i] == 0.0)
            continue;
        for (const auto& n : nb[i]) {
            const Level s = cut.level_for(mvn.spec.c[i]);
            const int dir = CutIntegrator::toward(n.apex);
            const ITriple j = cut.basis(dir, s, cut.depth_cap());
            const IntervalValue vpart = cut.v_part(dir, s, cut.depth_cap());
            const Eigen::Vector3d vn = vertex_v(n.cell);
            const double mn = f.cell_measure(n.cell);
            IntervalValue piece = shrink * vpart;
            for (int q = 0; q < 3; ++q) {
                piece += vn(q) * j[static_cast<std::size_t>(q)];
                mass += mn * j[static_cast<std::size_t>(q)];
            }
            integral += mn * piece;
        }
    }
    const double vx = v_vertex(hs, x);
    return integral / mass - IntervalValue{vx, vx};
}

IntervalValue cb_constant_series(CutIntegrator& cut, const MeanValueNeighborhood& mvn, const Address& x, int M)
{
    const auto& hs = cut.structure();
    const auto& f = hs.frac();
    require_sg(f, "cb_constant_series");
    const CellRef& w = mvn.spec.base_cell;
    const int k = w.level();
    if (M < k + 6)
        throw std::invalid_argument("cb_constant_series: need M >= k + 6");
    const auto nb = f.neighbor_cells(w);
    const IntervalValue whole = cut.phi_part(0, 0, cut.highest(0), 0);
    const auto phi_on = [&](int m, const CellRef& c) {
        Eigen::Vector3d v;
        for (int j = 0; j < 3; ++j)
            v(j) = phi_eval(hs, m, f.canonical({c.word, j}));
        return v;
    };
    constexpr int kJDepth = 40;

    IntervalValue mass{f.cell_measure(w), f.cell_measure(w)};
    for (std::size_t i = 0; i < 3; ++i)
        if (mvn.spec.c[i] != 0.0)
            for (const auto& n : nb[i]) {
                const ITriple j = cut.basis(CutIntegrator::toward(n.apex), cut.level_for(mvn.spec.c[i]), cut.depth_cap());
                mass += f.cell_measure(n.cell) * (j[0] + j[1] + j[2]);
            }

    IntervalValue sum = kZero;
    for (int m = 0; m <= M; ++m) {
        // phi_m is harmonic on k-cells for m < k and equals phi_{m-k} o F_c^{-1} otherwise.
        const double mw = f.cell_measure(w);
        IntervalValue integral = m < k ? outward(mw * phi_on(m, w).sum() / 3.0, mw * phi_on(m, w).sum() / 3.0)
                                       : mw * whole;
        for (std::size_t i = 0; i < 3; ++i) {
            if (mvn.spec.c[i] == 0.0)
                continue;
            for (const auto& n : nb[i]) {
                const Level s = cut.level_for(mvn.spec.c[i]);
                const int dir = CutIntegrator::toward(n.apex);
                const double mn = f.cell_measure(n.cell);
                if (m < k) {
                    const ITriple j = cut.basis(dir, s, cut.depth_cap());
                    const Eigen::Vector3d pv = phi_on(m, n.cell);
                    for (int q = 0; q < 3; ++q)
                        integral += (mn * pv(q)) * j[static_cast<std::size_t>(q)];
                } else {
                    integral += mn * cut.phi_part(m - k, dir, s, (m - k) + kJDepth);
                }
            }
        }
        const double px = phi_eval(hs, m, x);
        sum += std::pow(5.0, -m) * (integral / mass - IntervalValue{px, px});
    }
    const double tail = kVScale * std::pow(5.0, -M) / 4.0;
    return -kVScale * sum + IntervalValue{-tail, tail};
}

std::vector<ConvergenceRow> convergence_experiment(CutIntegrator& cut, TestFunction kind, const Triple& h,
                                                   const Address& x, int kmin, int kmax, int M, double tol)
{
    const auto& hs = cut.structure();
    const auto& f = hs.frac();
    require_sg(f, "convergence_experiment");
    const Address cx = f.canonical(x);
    if (cx.level() > M)
        throw std::invalid_argument("convergence_experiment: x must lie in V_M");
    if (kmax + 2 > M)
        throw std::invalid_argument("convergence_experiment: need M >= kmax + 2");

    const auto mesh = mesh_for(f, M);
    VertexFunction u, lap;
    double ux = 0, expected = 0;
    switch (kind) {
    case TestFunction::harmonic:
        u = sample_harmonic(hs, h, M);
        lap = VertexFunction{mesh, std::vector<double>(mesh->size(), 0.0)};
        expected = 0.0;
        break;
    case TestFunction::v:
        u = sample(mesh, [&](const Address& a) { return v_vertex(hs, a); });
        lap = VertexFunction{mesh, std::vector<double>(mesh->size(), 1.0)};
        expected = 1.0;
        break;
    case TestFunction::green_of_harmonic:
        lap = sample_harmonic(hs, h, M);
        u = dirichlet_solve(hs, weak_rhs(hs, lap), {0, 0, 0}).u;
        expected = harmonic_eval(hs, h, cx);
        break;
    }
    ux = u.at(cx);

    std::vector<ConvergenceRow> rows;
    for (const auto& mvn : mvn_sequence(cut, cx, kmin, kmax, tol)) {
        ConvergenceRow row;
        row.k = mvn.spec.base_cell.level();
        row.spec = mvn.spec;
        row.cb = cb_constant(cut, mvn, cx);
        row.expected = expected;
        IntervalValue integral = integrate_vertex_function(cut, u, mvn.spec.base_cell, tol, &lap);
        const auto nb = f.neighbor_cells(mvn.spec.base_cell);
        for (std::size_t i = 0; i < 3; ++i)
            if (mvn.spec.c[i] != 0.0)
                for (const auto& n : nb[i])
                    integral += integrate_vertex_function(cut, u, CutoffRegion{n.cell, n.apex, mvn.spec.c[i]}, tol, &lap);
        const BMeasures ones = integrate_harmonic_over(cut, mvn.spec, {1, 1, 1}, inner_tol(tol));
        row.numerator = integral / ones.mass - IntervalValue{ux, ux};
        row.ratio = row.numerator / row.cb;
        rows.push_back(row);
    }
    return rows;
}

} // namespace gasket
