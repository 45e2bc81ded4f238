#pragma once

#include "gasketlab/cutoff.hpp"

#include <optional>

namespace gasket {

using Valence = std::array<int, 3>;

// B(c0,c1,c2) around base_cell: the cell plus, at each vertex p_i, the part of
// every neighbor cell within c_i * cell_size of p_i.
struct CutoffSpec {
    CellRef base_cell;
    Triple c{};
};

// T(c) for a cell whose vertices have l_i neighbors. Depends only on the valence.
ITriple tmap(CutIntegrator& cut, const Valence& l, const Triple& c, double tol, bool* converged = nullptr);
ITriple tmap(CutIntegrator& cut, int neighborhood_type, const Triple& c, double tol, bool* converged = nullptr);
Triple midpoints(const ITriple& a);

// a with h(x) = sum_i a_i h(p_i) for harmonic h, p_i the vertices of base_cell.
Triple target_coefficients(const HarmonicStructure& hs, const Address& x, const CellRef& base_cell);

enum class SolveCase { all_junctions = 1, one_nonjunction = 2, two_nonjunctions = 3 };

struct MeanValueNeighborhood {
    CutoffSpec spec;
    Triple target{};
    ITriple achieved{};
    double residual = 0.0; // max_j |M_B(h_j) - h_j(x)|, independent integration
    std::array<CutoffCoefficients, 3> coefficients{};
    SolveCase solve_case = SolveCase::all_junctions;
    std::string method; // grid | newton | bisection | cell
    bool converged = false;
};

class MeanValueError : public std::runtime_error {
public:
    MeanValueError(const std::string& what, double best) : std::runtime_error(what), best_residual(best) {}
    double best_residual;
};

struct BMeasures {
    IntervalValue integral;
    IntervalValue mass;
};

// Integral and measure of B for the harmonic function with boundary triple h on K,
// integrating each neighbor piece directly.
BMeasures integrate_harmonic_over(CutIntegrator& cut, const CutoffSpec& spec, const Triple& h, double tol);
double verify_residual(CutIntegrator& cut, const CutoffSpec& spec, const Address& x, double tol);

MeanValueNeighborhood solve_mvn(CutIntegrator& cut, const Address& x, const CellRef& base_cell, double tol);

// Least level k with a level-k cell containing x that is off V_0.
int first_level(const Fractal& f, const Address& x);
// Level-k cell containing x, off V_0 (lexicographically least such).
std::optional<CellRef> base_cell_at(const Fractal& f, const Address& x, int k);
std::vector<MeanValueNeighborhood> mvn_sequence(CutIntegrator& cut, const Address& x, int kmin, int kmax, double tol);

// c_B = M_B(v) - v(x) via the self-similarity of v on each piece (sg).
IntervalValue cb_constant(CutIntegrator& cut, const MeanValueNeighborhood& mvn, const Address& x);
// The same constant summed from the phi_m series up to M with the tail enclosed (sg).
IntervalValue cb_constant_series(CutIntegrator& cut, const MeanValueNeighborhood& mvn, const Address& x, int M);
// Bounds (7/1350) 5^{-k}, (25/12) 5^{-k}.
std::pair<double, double> cb_band(int k);

enum class TestFunction { harmonic, v, green_of_harmonic };

struct ConvergenceRow {
    int k = 0;
    CutoffSpec spec;
    IntervalValue cb;
    IntervalValue numerator; // M_B(u) - u(x)
    IntervalValue ratio;
    double expected = 0.0; // Delta u(x)
};

// u is the harmonic function h, v, or the solution of Delta u = h with zero boundary values.
std::vector<ConvergenceRow> convergence_experiment(CutIntegrator& cut, TestFunction kind, const Triple& h,
                                                   const Address& x, int kmin, int kmax, int M, double tol);

} // namespace gasket
