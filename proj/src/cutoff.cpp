#include "gasketlab/cutoff.hpp"

#include <cmath>
#include <numeric>

namespace gasket {

namespace {

const IntervalValue kThird = outward(1.0 / 3.0, 1.0 / 3.0);
const IntervalValue kZero{0.0, 0.0};

bool is_sg(const Fractal& f) { return f.name() == "sg" && f.n_maps() == 3; }

ITriple zero_triple() { return {kZero, kZero, kZero}; }

} // namespace

SmallRational rationalize(double x)
{
    // Continued fraction convergents p/q.
    long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double rest = x;
    for (int it = 0; it < 64; ++it) {
        const double a = std::floor(rest);
        const auto ai = static_cast<long long>(a);
        const long long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
        if (q2 > 1000000)
            break;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        if (std::fabs(static_cast<double>(p1) / static_cast<double>(q1) - x) < 1e-13)
            break;
        const double frac = rest - a;
        if (frac < 1e-15)
            break;
        rest = 1.0 / frac;
    }
    if (q1 == 0 || std::fabs(static_cast<double>(p1) / static_cast<double>(q1) - x) > 1e-9)
        throw std::invalid_argument("geometry constant " + std::to_string(x) + " is not a small rational");
    return {p1, q1};
}

namespace {

constexpr int kFractionBits = 60;

long long lcm(long long a, long long b) { return a / std::gcd(a, b) * b; }

} // namespace

std::size_t CutIntegrator::KeyHash::operator()(const Key& k) const noexcept
{
    const auto u = static_cast<unsigned __int128>(k.s);
    std::size_t h = std::hash<unsigned long long>{}(static_cast<unsigned long long>(u));
    h ^= std::hash<unsigned long long>{}(static_cast<unsigned long long>(u >> 64)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::size_t>(k.dir * 131 + k.depth) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

CutIntegrator::CutIntegrator(const HarmonicStructure& hs) : hs_(&hs)
{
    const auto& f = hs.frac();
    depth_cap_ = f.n_maps() == 3 ? 60 : 40;
    const Point q0 = f.boundary_point(0), q1 = f.boundary_point(1), q2 = f.boundary_point(2);
    const Point cen = (1.0 / 3.0) * (q0 + q1 + q2);
    const double height = 1.5 * distance(q0, cen);
    std::array<Point, 6> dirs{};
    for (int a = 0; a < 3; ++a) {
        const Point u = cen - f.boundary_point(a);
        dirs[static_cast<std::size_t>(a)] = (1.0 / distance(u, {})) * u;
        dirs[static_cast<std::size_t>(a + 3)] = -1.0 * dirs[static_cast<std::size_t>(a)];
    }
    // K lies in the hull of V_1, and V_1 is in K, so V_1 realises the extremes.
    std::array<SmallRational, 6> lo{}, hi{};
    for (std::size_t d = 0; d < 6; ++d) {
        double l = 1e300, h = -1e300;
        for (int i = 0; i < f.n_maps(); ++i)
            for (int j = 0; j < 3; ++j) {
                const double t = dot(f.descriptor().maps[static_cast<std::size_t>(i)](f.boundary_point(j)) - cen, dirs[d]) / height;
                l = std::min(l, t);
                h = std::max(h, t);
            }
        lo[d] = rationalize(l);
        hi[d] = rationalize(h);
    }
    std::vector<std::array<SmallRational, 6>> off;
    for (int i = 0; i < f.n_maps(); ++i) {
        const AffineMap& m = f.descriptor().maps[static_cast<std::size_t>(i)];
        const double rho = m.ratio();
        std::array<int, 6> dm{};
        std::array<SmallRational, 6> o{};
        for (std::size_t d = 0; d < 6; ++d) {
            // R^T d with R the rotation part of the map.
            const Point rd{(m.a * dirs[d].x + m.c * dirs[d].y) / rho, (m.b * dirs[d].x + m.d * dirs[d].y) / rho};
            int found = -1;
            for (std::size_t e = 0; e < 6; ++e)
                if (distance(rd, dirs[e]) < 1e-9)
                    found = static_cast<int>(e);
            if (found < 0)
                throw std::invalid_argument("cut integration: map rotation does not preserve the six axis directions");
            dm[d] = found;
            o[d] = rationalize(dot(m(cen) - cen, dirs[d]) / height);
        }
        const SmallRational inv = rationalize(1.0 / rho);
        if (inv.den != 1)
            throw std::invalid_argument("cut integration: contraction ratios must be 1/n for an integer n");
        dir_map_.push_back(dm);
        off.push_back(o);
        inv_ratio_.push_back(inv.num);
    }

    long long l = 1;
    for (std::size_t d = 0; d < 6; ++d)
        l = lcm(lcm(l, lo[d].den), hi[d].den);
    for (const auto& o : off)
        for (const auto& r : o)
            l = lcm(l, r.den);
    denom_ = static_cast<Level>(l) << kFractionBits;
    const auto scaled = [&](const SmallRational& r) { return static_cast<Level>(r.num) * (denom_ / r.den); };
    for (std::size_t d = 0; d < 6; ++d) {
        lo_[d] = scaled(lo[d]);
        hi_[d] = scaled(hi[d]);
    }
    for (const auto& o : off) {
        std::array<Level, 6> row{};
        for (std::size_t d = 0; d < 6; ++d)
            row[d] = scaled(o[d]);
        offset_.push_back(row);
    }
    ext_ = (hi_[0] - lo_[0]) >> kFractionBits; // extent * D / 2^60

    for (int i = 0; i < f.n_maps(); ++i) {
        Triple vv{}, pv{};
        for (int j = 0; j < 3; ++j) {
            const Address a = f.canonical({std::string(1, static_cast<char>('0' + i)), j});
            pv[static_cast<std::size_t>(j)] = phi_eval(hs, 0, a);
            vv[static_cast<std::size_t>(j)] = is_sg(f) ? v_vertex(hs, a) : 0.0;
        }
        phi0_at_children_.push_back(pv);
        v_at_children_.push_back(vv);
        phi_whole_ += f.weight() * (pv[0] + pv[1] + pv[2]) / 3.0;
    }
}

Level CutIntegrator::level_for(double c) const
{
    if (!(c >= 0.0 && c <= 1.0))
        throw std::invalid_argument("cutoff fraction must lie in [0,1]");
    const auto frac = static_cast<Level>(std::llround(std::ldexp(c, kFractionBits)));
    return lo_[0] + frac * ext_;
}

double CutIntegrator::level_value(Level s) const
{
    return static_cast<double>(s) / static_cast<double>(denom_);
}

std::pair<int, Level> CutIntegrator::child(int i, int dir, const Level& s) const
{
    const auto ii = static_cast<std::size_t>(i);
    const auto d = static_cast<std::size_t>(dir);
    return {dir_map_[ii][d], (s - offset_[ii][d]) * inv_ratio_[ii]};
}

ITriple CutIntegrator::basis(int dir, const Level& s, int depth)
{
    if (s >= highest(dir))
        return {kThird, kThird, kThird};
    if (s <= lowest(dir))
        return zero_triple(); // a line carries no mass
    if (depth <= 0)
        return {IntervalValue{0.0, kThird.hi}, IntervalValue{0.0, kThird.hi}, IntervalValue{0.0, kThird.hi}};
    const Key key{dir, s, depth};
    if (const auto it = memo_j_.find(key); it != memo_j_.end())
        return it->second;
    const auto& f = hs_->frac();
    ITriple out = zero_triple();
    for (int i = 0; i < f.n_maps(); ++i) {
        const auto [ci, si] = child(i, dir, s);
        const ITriple sub = basis(ci, si, depth - 1);
        const Mat3& a = hs_->A(i);
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                if (a(k, j) != 0.0)
                    out[static_cast<std::size_t>(j)] += (f.weight() * a(k, j)) * sub[static_cast<std::size_t>(k)];
    }
    // basis integrals of K are 1/3 each and nonnegative
    for (auto& v : out)
        v = IntervalValue{std::max(v.lo, 0.0), std::min(v.hi, kThird.hi)};
    if (memo_j_.size() > 500000)
        memo_j_.clear();
    memo_j_.emplace(key, out);
    return out;
}

IntervalValue CutIntegrator::v_part(int dir, const Level& s, int depth)
{
    if (!is_sg(hs_->frac()))
        throw std::invalid_argument("v integrals are only available on sg");
    if (s >= highest(dir))
        return outward(-1.0 / 18.0, -1.0 / 18.0);
    if (s <= lowest(dir))
        return kZero;
    if (depth <= 0)
        return outward(-kVScale, 0.0); // -1/15 <= v <= 0
    const Key key{dir, s, depth};
    if (const auto it = memo_v_.find(key); it != memo_v_.end())
        return it->second;
    const auto& f = hs_->frac();
    // v o F_i = (harmonic with the values of v at F_i q_j) + v / 5
    IntervalValue out = kZero;
    for (int i = 0; i < f.n_maps(); ++i) {
        const auto [ci, si] = child(i, dir, s);
        const ITriple j = basis(ci, si, depth - 1);
        IntervalValue part = 0.2 * v_part(ci, si, depth - 1);
        for (int k = 0; k < 3; ++k)
            part += v_at_children_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * j[static_cast<std::size_t>(k)];
        out += f.weight() * part;
    }
    if (memo_v_.size() > 500000)
        memo_v_.clear();
    memo_v_.emplace(key, out);
    return out;
}

IntervalValue CutIntegrator::phi_part(int m, int dir, const Level& s, int depth)
{
    if (!is_sg(hs_->frac()))
        throw std::invalid_argument("phi integrals are only available on sg");
    if (s >= highest(dir))
        return outward(phi_whole_, phi_whole_);
    if (s <= lowest(dir))
        return kZero;
    if (depth <= 0)
        return IntervalValue{0.0, 1.0};
    if (memo_phi_.size() <= static_cast<std::size_t>(m))
        memo_phi_.resize(static_cast<std::size_t>(m) + 1);
    auto& memo = memo_phi_[static_cast<std::size_t>(m)];
    const Key key{dir, s, depth};
    if (const auto it = memo.find(key); it != memo.end())
        return it->second;
    const auto& f = hs_->frac();
    IntervalValue out = kZero;
    for (int i = 0; i < f.n_maps(); ++i) {
        const auto [ci, si] = child(i, dir, s);
        IntervalValue part = kZero;
        if (m == 0) {
            const ITriple j = basis(ci, si, depth - 1);
            for (int k = 0; k < 3; ++k)
                part += phi0_at_children_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * j[static_cast<std::size_t>(k)];
        } else {
            part = phi_part(m - 1, ci, si, depth - 1); // phi_m o F_i = phi_{m-1}
        }
        out += f.weight() * part;
    }
    if (memo.size() > 500000)
        memo.clear();
    memo_phi_[static_cast<std::size_t>(m)].emplace(key, out);
    return out;
}

double cell_integral_harmonic(const Fractal& f, const Triple& h, const CellRef& cell)
{
    return f.cell_measure(cell) * (h[0] + h[1] + h[2]) / 3.0;
}

JunctionMean junction_mean(const HarmonicStructure& hs, const Triple& h, const Address& p)
{
    const auto& f = hs.frac();
    const Address cp = f.canonical(p);
    if (f.classify_point(cp) != PointKind::junction)
        throw std::invalid_argument("junction_mean: point is not a junction");
    const auto reps = f.representatives(cp, cp.level());
    if (reps.size() != 2)
        throw std::invalid_argument("junction_mean: point does not join exactly two cells");
    JunctionMean out;
    for (const auto& r : reps) {
        const Eigen::Vector3d hv = harmonic_on_cell(hs, h, r.word);
        out.integral += cell_integral_harmonic(f, {hv(0), hv(1), hv(2)}, CellRef{r.word});
        out.measure += f.cell_measure(CellRef{r.word});
    }
    out.value = out.integral / out.measure;
    return out;
}

CutoffCoefficients cutoff_coefficients(CutIntegrator& cut, const CutoffRegion& region, double tol)
{
    if (!(tol > 0))
        throw std::invalid_argument("cutoff_coefficients: tol must be positive");
    if (region.apex < 0 || region.apex > 2)
        throw std::invalid_argument("cutoff_coefficients: apex must be 0, 1 or 2");
    const auto cached = cut.coeff_cache_.find({region.c, tol});
    CutoffCoefficients out;
    const auto a = static_cast<std::size_t>(region.apex);
    const double mu = cut.structure().frac().cell_measure(region.base_cell);
    if (cached != cut.coeff_cache_.end()) {
        // stored for apex 0 and unit measure
        out = cached->second;
        out.mass = mu * out.mass;
        return out;
    }
    const Level s = cut.level_for(region.c);
    const int dir = CutIntegrator::toward(region.apex);
    for (int depth = cut.default_depth();; depth = std::min(cut.depth_cap(), depth + 8)) {
        const ITriple j = cut.basis(dir, s, depth);
        out.m = j[a];
        out.n = hull(j[(a + 1) % 3], j[(a + 2) % 3]);
        const IntervalValue total = j[0] + j[1] + j[2];
        out.mass = total;
        out.depth = depth;
        out.converged = std::max(out.m.width(), out.n.width()) <= tol;
        if (out.converged || depth >= cut.depth_cap())
            break;
    }
    if (cut.coeff_cache_.size() > 100000)
        cut.coeff_cache_.clear();
    cut.coeff_cache_.emplace(std::make_pair(region.c, tol), out);
    out.mass = mu * out.mass;
    return out;
}

CutoffCoefficients cutoff_coefficients(const HarmonicStructure& hs, const CutoffRegion& region, double tol)
{
    CutIntegrator cut(hs);
    return cutoff_coefficients(cut, region, tol);
}

namespace {

struct InterpolantIntegrator {
    CutIntegrator& cut;
    const VertexFunction& u;
    const VertexFunction* lap;
    int straddle_depth;
    double cell_mu;

    Eigen::Vector3d values(const std::string& w, const VertexFunction& fn) const
    {
        const auto& f = cut.structure().frac();
        return {fn.at(f.canonical({w, 0})), fn.at(f.canonical({w, 1})), fn.at(f.canonical({w, 2}))};
    }

    IntervalValue run(const std::string& w, int dir, const Level& s, bool full)
    {
        if (!full) {
            if (s >= cut.highest(dir))
                full = true;
            else if (s <= cut.lowest(dir))
                return kZero;
        }
        const auto& f = cut.structure().frac();
        if (w.size() == static_cast<std::size_t>(u.level())) {
            const Eigen::Vector3d uv = values(w, u);
            IntervalValue val;
            IntervalValue bias = kZero;
            if (full) {
                val = outward(cell_mu * uv.sum() / 3.0, cell_mu * uv.sum() / 3.0);
            } else {
                const ITriple j = cut.basis(dir, s, straddle_depth);
                val = kZero;
                for (int k = 0; k < 3; ++k)
                    val += (cell_mu * uv(k)) * j[static_cast<std::size_t>(k)];
            }
            if (lap) {
                const double g = values(w, *lap).mean();
                const double scale = g * std::pow(5.0, -u.level()) * cell_mu;
                bias = scale * (full ? outward(-1.0 / 18.0, -1.0 / 18.0) : cut.v_part(dir, s, straddle_depth));
            }
            return val + bias;
        }
        IntervalValue total = kZero;
        for (int i = 0; i < f.n_maps(); ++i) {
            const std::string sub = w + static_cast<char>('0' + i);
            if (full) {
                total += run(sub, 0, 0, true);
            } else {
                const auto [ci, si] = cut.child(i, dir, s);
                total += run(sub, ci, si, false);
            }
        }
        return total;
    }
};

void check_depth(const VertexFunction& u, const CellRef& cell)
{
    if (u.level() < cell.level() + 2)
        throw std::invalid_argument("integrate_vertex_function: samples must be at least two levels finer than the cell");
}

} // namespace

IntervalValue integrate_vertex_function(CutIntegrator& cut, const VertexFunction& u, const CutoffRegion& region,
                                        double tol, const VertexFunction* laplacian)
{
    // Straddling M-cells are always resolved at the depth cap, far below any
    // practical tol; tol only guards against an unusable request.
    if (!(tol > 0))
        throw std::invalid_argument("integrate_vertex_function: tol must be positive");
    const auto& f = cut.structure().frac();
    check_depth(u, region.base_cell);
    InterpolantIntegrator it{cut, u, laplacian, cut.depth_cap(), std::pow(f.weight(), u.level())};
    return it.run(region.base_cell.word, CutIntegrator::toward(region.apex), cut.level_for(region.c), false);
}

IntervalValue integrate_vertex_function(CutIntegrator& cut, const VertexFunction& u, const CellRef& cell, double tol,
                                        const VertexFunction* laplacian)
{
    if (!(tol > 0))
        throw std::invalid_argument("integrate_vertex_function: tol must be positive");
    const auto& f = cut.structure().frac();
    check_depth(u, cell);
    InterpolantIntegrator it{cut, u, laplacian, cut.depth_cap(), std::pow(f.weight(), u.level())};
    return it.run(cell.word, 0, 0, true);
}

} // namespace gasket
