#pragma once

#include "gasketlab/harmonic.hpp"
#include "gasketlab/interval.hpp"

#include <map>

namespace gasket {

// psi_z^{(m)}(x): piecewise harmonic of level m, delta_z on V_m.
double spline_eval(const HarmonicStructure& hs, const Address& z, int m, const Address& x);
// Nonzero values psi_z^{(m)}(x) over z in V_m, keyed by canonical z.
std::map<Address, double> spline_support(const HarmonicStructure& hs, int m, const Address& x);
// Integral of psi_z^{(m)}; 2/3^{m+1} for a junction of sg.
double spline_integral(const HarmonicStructure& hs, const Address& z, int m);

// Kernel coefficient for z, z' in V_{m+1} \ V_m (sg).
double g_coeff(const HarmonicStructure& hs, const Address& z, const Address& zp, int m);
// G_M(x, y): the double spline sum truncated after level M.
double green_eval(const HarmonicStructure& hs, const Address& x, const Address& y, int M);

// phi_m = sum of psi_z^{(m+1)} over z in V_{m+1} \ V_m.
double phi_eval(const HarmonicStructure& hs, int m, const Address& x);
// v = -(1/15) sum_m 5^{-m} phi_m, truncated after M with the tail enclosed.
IntervalValue v_eval(const HarmonicStructure& hs, const Address& x, int M);
// Exact v at a vertex of V_*: the series is a finite sum there.
double v_vertex(const HarmonicStructure& hs, const Address& x);
// Integral of phi_m over the level-1 cell F_i(K).
double phi_cell_integral(const HarmonicStructure& hs, int m, const CellRef& cell);

constexpr double kVScale = 1.0 / 15.0;

} // namespace gasket
