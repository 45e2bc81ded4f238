#include "gasketlab/green.hpp"

#include <cmath>

namespace gasket {

namespace {

void require_sg(const HarmonicStructure& hs, const char* what)
{
    if (hs.frac().name() != "sg" || hs.frac().n_maps() != 3)
        throw std::invalid_argument(std::string(what) + ": kernel constants are only known for sg");
}

} // namespace

std::map<Address, double> spline_support(const HarmonicStructure& hs, int m, const Address& x)
{
    const auto& f = hs.frac();
    const Address cx = f.canonical(x);
    std::map<Address, double> out;
    if (cx.level() <= m) {
        out.emplace(cx, 1.0);
        return out;
    }
    const std::string cell = cx.word.substr(0, static_cast<std::size_t>(m));
    const auto row = harmonic_row(hs, std::string_view(cx.word).substr(static_cast<std::size_t>(m)), cx.vertex);
    for (int j = 0; j < 3; ++j)
        if (row(j) != 0.0)
            out[f.canonical({cell, j})] += row(j);
    return out;
}

double spline_eval(const HarmonicStructure& hs, const Address& z, int m, const Address& x)
{
    const Address cz = hs.frac().canonical(z);
    if (cz.level() > m)
        throw std::invalid_argument("spline_eval: z is not in V_m");
    const auto sup = spline_support(hs, m, x);
    const auto it = sup.find(cz);
    return it == sup.end() ? 0.0 : it->second;
}

double spline_integral(const HarmonicStructure& hs, const Address& z, int m)
{
    const auto& f = hs.frac();
    const Address cz = f.canonical(z);
    if (cz.level() > m)
        throw std::invalid_argument("spline_integral: z is not in V_m");
    if (cz.word.empty())
        return std::pow(f.weight(), m) / 3.0;
    // psi restricted to each m-cell at z is a basis harmonic, integral mu/3.
    const double cells = static_cast<double>(f.representatives(cz, m).size());
    return cells * std::pow(f.weight(), m) / 3.0;
}

double g_coeff(const HarmonicStructure& hs, const Address& z, const Address& zp, int m)
{
    require_sg(hs, "g_coeff");
    const auto& f = hs.frac();
    const Address a = f.canonical(z), b = f.canonical(zp);
    if (a.level() != m + 1 || b.level() != m + 1)
        throw std::invalid_argument("g_coeff: both points must lie in V_{m+1} \\ V_m");
    if (a.word.substr(0, static_cast<std::size_t>(m)) != b.word.substr(0, static_cast<std::size_t>(m)))
        return 0.0;
    const double rm = std::pow(hs.r, m);
    return a == b ? 9.0 / 50.0 * rm : 3.0 / 50.0 * rm;
}

double green_eval(const HarmonicStructure& hs, const Address& x, const Address& y, int M)
{
    require_sg(hs, "green_eval");
    double total = 0;
    for (int m = 0; m <= M; ++m) {
        const auto sx = spline_support(hs, m + 1, x);
        const auto sy = spline_support(hs, m + 1, y);
        for (const auto& [z, px] : sx) {
            if (z.level() != m + 1)
                continue;
            for (const auto& [zp, py] : sy)
                if (zp.level() == m + 1)
                    total += g_coeff(hs, z, zp, m) * px * py;
        }
    }
    return total;
}

double phi_eval(const HarmonicStructure& hs, int m, const Address& x)
{
    double s = 0;
    for (const auto& [z, val] : spline_support(hs, m + 1, x))
        if (z.level() == m + 1)
            s += val;
    return s;
}

IntervalValue v_eval(const HarmonicStructure& hs, const Address& x, int M)
{
    const Address cx = hs.frac().canonical(x);
    // phi_m vanishes on V_m, so only m < level(x) contribute.
    const int last = std::min(M, cx.level() - 1);
    double s = 0;
    for (int m = last; m >= 0; --m)
        s += std::pow(5.0, -m) * phi_eval(hs, m, cx);
    const double val = -kVScale * s;
    if (cx.level() <= M + 1)
        return outward(val, val);
    const double tail = kVScale * std::pow(5.0, -M) / 4.0; // (1/15) sum_{m>M} 5^{-m}
    return outward(val - tail, val);
}

double v_vertex(const HarmonicStructure& hs, const Address& x)
{
    const Address cx = hs.frac().canonical(x);
    double s = 0;
    for (int m = cx.level() - 1; m >= 0; --m)
        s += std::pow(5.0, -m) * phi_eval(hs, m, cx);
    return -kVScale * s;
}

double phi_cell_integral(const HarmonicStructure& hs, int m, const CellRef& cell)
{
    const auto& f = hs.frac();
    if (cell.level() != 1)
        throw std::invalid_argument("phi_cell_integral: cell must be a level-1 cell");
    // phi_m o F_i = phi_{m-1}, and every phi_j integrates to the same value over K.
    const auto phi0_on = [&](const std::string& w) {
        double s = 0;
        for (int j = 0; j < 3; ++j)
            s += phi_eval(hs, 0, f.canonical({w, j}));
        return s / 3.0;
    };
    if (m == 0)
        return f.weight() * phi0_on(cell.word);
    double whole = 0;
    for (int i = 0; i < f.n_maps(); ++i)
        whole += f.weight() * phi0_on(std::string(1, static_cast<char>('0' + i)));
    return f.weight() * whole;
}

} // namespace gasket
