#pragma once

#include "gasketlab/green.hpp"

#include <unordered_map>

namespace gasket {

using ITriple = std::array<IntervalValue, 3>;
// Exact cut level: numerator over the integrator's fixed denominator.
using Level = __int128;

struct SmallRational {
    long long num = 0;
    long long den = 1;
};
// Best rational approximation with denominator <= 1e6; throws when that is
// not within 1e-9 of x.
SmallRational rationalize(double x);

// E = points of base_cell within c * cell_size of the apex, measured along the
// cell's reflection axis through the apex.
struct CutoffRegion {
    CellRef base_cell;
    int apex = 0;
    double c = 0.0;
};

struct CutoffCoefficients {
    IntervalValue m;    // apex weight, in units of mu(base_cell)
    IntervalValue n;    // weight of each of the other two vertices
    IntervalValue mass; // mu(E)
    bool converged = true;
    int depth = 0;
};

// Integrals over the half-plane sections R(d, s) = {z in K : <z - centroid, d>/H <= s}
// of K, where H is the boundary triangle's height and d runs over the six
// directions +-(centroid - q_a). Every level s reachable by the recursion is a
// multiple of 1/D for one fixed D (cutoff fractions are rounded to multiples
// of 2^-60 first), so the recursion runs in exact integer arithmetic; only the
// straddling cells at the depth floor are enclosed crudely.
class CutIntegrator {
public:
    explicit CutIntegrator(const HarmonicStructure& hs);

    const HarmonicStructure& structure() const { return *hs_; }
    // Direction pointing from q_apex towards the centroid.
    static int toward(int apex) { return apex; }
    // s for the line at c * cell_size from the apex.
    Level level_for(double c) const;
    double level_value(Level s) const;
    int depth_cap() const { return depth_cap_; }
    int default_depth() const { return hs_->frac().n_maps() == 3 ? 12 : 8; }

    // Integrals of the boundary basis h_0,h_1,h_2 of K over R(d, s), mu(K) = 1.
    ITriple basis(int dir, const Level& s, int depth);
    // Integral of v over R(d, s); sg only.
    IntervalValue v_part(int dir, const Level& s, int depth);
    // Integral of phi_m over R(d, s); sg only.
    IntervalValue phi_part(int m, int dir, const Level& s, int depth);

    // Extent of <z - centroid, d>/H over K.
    const Level& lowest(int dir) const { return lo_[static_cast<std::size_t>(dir)]; }
    const Level& highest(int dir) const { return hi_[static_cast<std::size_t>(dir)]; }
    // Child section: the part of R(d,s) inside F_i(K), pulled back to K.
    std::pair<int, Level> child(int i, int dir, const Level& s) const;

private:
    struct Key {
        int dir;
        Level s;
        int depth;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept;
    };

    const HarmonicStructure* hs_;
    int depth_cap_;
    Level denom_ = 1;
    Level ext_ = 0; // numerator of the axis extent
    std::array<Level, 6> lo_{}, hi_{};
    std::vector<std::array<int, 6>> dir_map_;
    std::vector<std::array<Level, 6>> offset_;
    std::vector<Level> inv_ratio_;
    std::vector<Triple> v_at_children_;
    std::vector<Triple> phi0_at_children_;
    double phi_whole_ = 0.0;
    std::unordered_map<Key, ITriple, KeyHash> memo_j_;
    std::unordered_map<Key, IntervalValue, KeyHash> memo_v_;
    std::vector<std::unordered_map<Key, IntervalValue, KeyHash>> memo_phi_;
    std::map<std::pair<double, double>, CutoffCoefficients> coeff_cache_;

    friend CutoffCoefficients cutoff_coefficients(CutIntegrator& cut, const CutoffRegion& region, double tol);
};

double cell_integral_harmonic(const Fractal& f, const Triple& h_on_cell, const CellRef& cell);

struct JunctionMean {
    double value = 0.0;
    double integral = 0.0;
    double measure = 0.0;
};
// Mean of the harmonic function h (boundary triple of K) over the two cells
// meeting at the junction p.
JunctionMean junction_mean(const HarmonicStructure& hs, const Triple& h, const Address& p);

CutoffCoefficients cutoff_coefficients(const HarmonicStructure& hs, const CutoffRegion& region, double tol);
CutoffCoefficients cutoff_coefficients(CutIntegrator& cut, const CutoffRegion& region, double tol);

// Integral of the level-M piecewise harmonic interpolant of u over a cell or a
// cutoff region. When `laplacian` holds samples of Delta u on V_M (sg), the
// leading interpolation error g * 5^{-M} * (v o F_sigma^{-1}) is added per M-cell.
IntervalValue integrate_vertex_function(CutIntegrator& cut, const VertexFunction& u, const CutoffRegion& region,
                                        double tol, const VertexFunction* laplacian = nullptr);
IntervalValue integrate_vertex_function(CutIntegrator& cut, const VertexFunction& u, const CellRef& cell,
                                        double tol, const VertexFunction* laplacian = nullptr);

} // namespace gasket
