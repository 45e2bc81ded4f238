#pragma once

#include "gasketlab/mesh.hpp"

#include <Eigen/Dense>

namespace gasket {

using Triple = std::array<double, 3>;
using Mat3 = Eigen::Matrix3d;

struct HarmonicStructure {
    const Fractal* fractal = nullptr;
    double r = 0.0;
    // extension[i] maps (h(q0),h(q1),h(q2)) to (h(F_i q0),h(F_i q1),h(F_i q2)).
    std::vector<Mat3> extension;
    // mass(i,j) = integral of h_i h_j over K for the boundary basis.
    Mat3 mass = Mat3::Zero();

    const Fractal& frac() const { return *fractal; }
    const Mat3& A(int i) const { return extension[static_cast<std::size_t>(i)]; }
};

// Effective boundary conductance of the level-1 network with unit cell conductances.
double level1_effective_conductance(const Fractal& f);
// Bisection on the energy-renormalization fixed point, tolerance 1e-14.
double solve_renormalization(const Fractal& f);
std::vector<Mat3> solve_extension(const Fractal& f, double r);
Mat3 solve_mass_matrix(const Fractal& f, const std::vector<Mat3>& extension);
HarmonicStructure make_harmonic_structure(const Fractal& f);

// Row vector a with h(F_word q_vertex) = a . (h(q0),h(q1),h(q2)).
Eigen::RowVector3d harmonic_row(const HarmonicStructure& hs, std::string_view word, int vertex);
// Boundary values of h on the cell F_word(K).
Eigen::Vector3d harmonic_on_cell(const HarmonicStructure& hs, const Triple& h, std::string_view word);
double harmonic_eval(const HarmonicStructure& hs, const Triple& h, const Address& a);

VertexFunction sample_harmonic(const HarmonicStructure& hs, const Triple& h, int level);

double graph_energy(const HarmonicStructure& hs, const VertexFunction& f);
double discrete_laplacian(const VertexFunction& f, const Address& x);
// (3/2) 5^m Delta_m f(x) for each sample; SG only.
std::vector<double> laplacian_estimate(const std::vector<VertexFunction>& fs, const Address& x);
// r^{-m} sum over y ~_m p inside the cell of (f(p) - f(y)), one term per sample
// whose level is at least the cell's.
std::vector<double> normal_derivative(const HarmonicStructure& hs, const std::vector<VertexFunction>& fs,
                                      const CellRef& cell, int vertex);

constexpr int kSgDepthCap = 10;
constexpr int kPcfDepthCap = 7;

struct DirichletReport {
    VertexFunction u;
    double residual = 0.0; // max |(3/2)5^m Delta_m u - rhs| over interior vertices
    int refinements = 0;
};

// Solves (3/2) 5^m Delta_m u = rhs on V_m \ V_0 with u = boundary on V_0. SG only.
DirichletReport dirichlet_solve(const HarmonicStructure& hs, const VertexFunction& rhs, const Triple& boundary);
// Right-hand side int(g psi_x)/int(psi_x) for the level-m piecewise harmonic
// interpolant of g. With it the discrete solution coincides with the continuum
// solution on V_m whenever g itself is piecewise harmonic at level m.
VertexFunction weak_rhs(const HarmonicStructure& hs, const VertexFunction& g);

} // namespace gasket
