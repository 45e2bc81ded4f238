#include "gasketlab/fractal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace gasket {

namespace {

constexpr double kGeomTol = 1e-9;

bool same_point(Point a, Point b) { return distance(a, b) < kGeomTol; }

const double kSqrt3 = std::sqrt(3.0);

std::array<Point, 3> unit_triangle()
{
    return {Point{0.5, kSqrt3 / 2}, Point{0.0, 0.0}, Point{1.0, 0.0}};
}

AffineMap scaled(double s, Point t) { return {s, 0, 0, s, t.x, t.y}; }

std::vector<Perm3> all_perms()
{
    std::vector<Perm3> out;
    Perm3 p{0, 1, 2};
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x)
    {
        while (parent[static_cast<std::size_t>(x)] != x)
            x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        return x;
    }
    void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

// Glue every pair of level-1 slots with coinciding coordinates.
std::vector<Identification> identifications_from_geometry(const PcfDescriptor& d)
{
    std::vector<Identification> ids;
    const int n = d.n_maps();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = i + 1; k < n; ++k)
                for (int l = 0; l < 3; ++l)
                    if (same_point(d.maps[i](d.boundary[j]), d.maps[k](d.boundary[l])))
                        ids.push_back({i, j, k, l});
    return ids;
}

PcfDescriptor finish_builtin(std::string name, std::vector<AffineMap> maps)
{
    PcfDescriptor d;
    d.name = std::move(name);
    d.maps = std::move(maps);
    d.boundary = unit_triangle();
    d.identifications = identifications_from_geometry(d);
    d.symmetry = all_perms();
    d.measure_weights.assign(d.maps.size(), 1.0 / static_cast<double>(d.maps.size()));
    return d;
}

// Signed area test used by the convex hull routine.
double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

std::vector<Point> convex_hull(std::vector<Point> pts)
{
    std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    std::vector<Point> h(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= kGeomTol)
            --k;
        h[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= kGeomTol)
            --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

bool inside_convex(const std::vector<Point>& hull, Point p)
{
    for (std::size_t i = 0; i < hull.size(); ++i)
        if (cross(hull[i], hull[(i + 1) % hull.size()], p) < -kGeomTol)
            return false;
    return true;
}

std::vector<Point> level1_points(const PcfDescriptor& d)
{
    std::vector<Point> pts;
    for (const auto& f : d.maps)
        for (const auto& q : d.boundary)
            pts.push_back(f(q));
    return pts;
}

} // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double AffineMap::norm() const
{
    Eigen::Matrix2d m;
    m << a, b, c, d;
    return Eigen::JacobiSVD<Eigen::Matrix2d>(m).singularValues()(0);
}

double AffineMap::ratio() const { return std::sqrt(std::fabs(a * d - b * c)); }

AffineMap AffineMap::compose(const AffineMap& in) const
{
    return {a * in.a + b * in.c, a * in.b + b * in.d, c * in.a + d * in.c, c * in.b + d * in.d,
            a * in.e + b * in.f + e, c * in.e + d * in.f + f};
}

AffineMap AffineMap::through(const std::array<Point, 3>& from, const std::array<Point, 3>& to)
{
    Eigen::Matrix3d m;
    Eigen::Vector3d tx, ty;
    for (int i = 0; i < 3; ++i) {
        m.row(i) << from[i].x, from[i].y, 1.0;
        tx(i) = to[i].x;
        ty(i) = to[i].y;
    }
    const auto lu = m.fullPivLu();
    if (!lu.isInvertible())
        throw std::invalid_argument("AffineMap::through: degenerate source triangle");
    const Eigen::Vector3d u = lu.solve(tx);
    const Eigen::Vector3d v = lu.solve(ty);
    return {u(0), u(1), v(0), v(1), u(2), v(2)};
}

std::string_view to_string(PointKind k)
{
    switch (k) {
    case PointKind::boundary:
        return "boundary";
    case PointKind::junction:
        return "junction";
    case PointKind::generic_vertex:
        return "generic-vertex";
    }
    return "?";
}

std::vector<std::string> builtin_names() { return {"sg", "hexagasket", "sg3"}; }

PcfDescriptor builtin_descriptor(std::string_view name)
{
    const auto q = unit_triangle();
    if (name == "sg") {
        std::vector<AffineMap> maps;
        for (const auto& p : q)
            maps.push_back(scaled(0.5, 0.5 * p));
        return finish_builtin("sg", std::move(maps));
    }
    const double third = 1.0 / 3.0;
    if (name == "sg3") {
        // Corner cells fix q0, q1, q2; then bottom-middle, middle-left, middle-right.
        return finish_builtin("sg3", {scaled(third, {third, kSqrt3 / 3}), scaled(third, {0, 0}),
                                      scaled(third, {2 * third, 0}), scaled(third, {third, 0}),
                                      scaled(third, {1.0 / 6, kSqrt3 / 6}), scaled(third, {0.5, kSqrt3 / 6})});
    }
    if (name == "hexagasket") {
        // Corner cells are homotheties; the three outward star tips are
        // contracted and rotated by pi, so V_1 is the Star of David.
        return finish_builtin("hexagasket", {scaled(third, {third, kSqrt3 / 3}), scaled(third, {0, 0}),
                                             scaled(third, {2 * third, 0}), scaled(-third, {2 * third, 0}),
                                             scaled(-third, {third, kSqrt3 / 3}), scaled(-third, {1.0, kSqrt3 / 3})});
    }
    throw std::invalid_argument("unknown fractal '" + std::string(name) + "'");
}

void validate(const PcfDescriptor& d)
{
    const int n = d.n_maps();
    if (n < 3 || n > 10)
        throw std::invalid_argument("descriptor: need 3..10 maps");
    if (std::fabs(cross(d.boundary[1], d.boundary[2], d.boundary[0])) < kGeomTol)
        throw std::invalid_argument("descriptor: boundary points are collinear");
    const double side = distance(d.boundary[1], d.boundary[2]);
    if (std::fabs(distance(d.boundary[0], d.boundary[1]) - side) > kGeomTol ||
        std::fabs(distance(d.boundary[0], d.boundary[2]) - side) > kGeomTol)
        throw std::invalid_argument("descriptor: boundary must be an equilateral triangle");
    for (const auto& f : d.maps) {
        if (!(f.norm() < 1.0))
            throw std::invalid_argument("descriptor: map is not a contraction");
        // similarity: columns orthogonal with equal length
        if (std::fabs(f.a * f.b + f.c * f.d) > kGeomTol ||
            std::fabs(f.a * f.a + f.c * f.c - (f.b * f.b + f.d * f.d)) > kGeomTol)
            throw std::invalid_argument("descriptor: map is not a similarity");
    }
    if (static_cast<int>(d.measure_weights.size()) != n)
        throw std::invalid_argument("descriptor: measure_weights size mismatch");
    double total = 0;
    for (double w : d.measure_weights) {
        if (std::fabs(w - 1.0 / n) > 1e-12)
            throw std::invalid_argument("descriptor: measure weights must all equal 1/N");
        total += w;
    }
    if (std::fabs(total - 1.0) > 1e-12)
        throw std::invalid_argument("descriptor: measure weights must sum to 1");

    // Identifications: in range and geometrically sound.
    UnionFind uf(3 * n);
    for (const auto& id : d.identifications) {
        if (id.map_a < 0 || id.map_a >= n || id.map_b < 0 || id.map_b >= n || id.vertex_a < 0 || id.vertex_a > 2 ||
            id.vertex_b < 0 || id.vertex_b > 2)
            throw std::invalid_argument("descriptor: identification index out of range");
        if (id.map_a == id.map_b)
            throw std::invalid_argument("descriptor: identification within a single cell");
        if (!same_point(d.maps[id.map_a](d.boundary[id.vertex_a]), d.maps[id.map_b](d.boundary[id.vertex_b])))
            throw std::invalid_argument("descriptor: identified vertices have different coordinates");
        uf.unite(3 * id.map_a + id.vertex_a, 3 * id.map_b + id.vertex_b);
    }
    // Every coincidence must be generated by the listed identifications.
    for (const auto& id : identifications_from_geometry(d))
        if (uf.find(3 * id.map_a + id.vertex_a) != uf.find(3 * id.map_b + id.vertex_b))
            throw std::invalid_argument("descriptor: coinciding level-1 vertices are not identified");
    // Level-1 graph connected.
    UnionFind conn(3 * n);
    for (int s = 0; s < 3 * n; ++s)
        conn.unite(s, uf.find(s));
    for (int i = 0; i < n; ++i) {
        conn.unite(3 * i, 3 * i + 1);
        conn.unite(3 * i, 3 * i + 2);
    }
    for (int s = 1; s < 3 * n; ++s)
        if (conn.find(s) != conn.find(0))
            throw std::invalid_argument("descriptor: level-1 graph is disconnected");
    // Every boundary point must be a vertex of some level-1 cell.
    for (const auto& qb : d.boundary) {
        bool found = false;
        for (const auto& f : d.maps)
            for (const auto& qv : d.boundary)
                found = found || same_point(f(qv), qb);
        if (!found)
            throw std::invalid_argument("descriptor: boundary point is not a level-1 vertex");
    }
    // Convex hull of V_1 must be mapped into itself, so the attractor lies inside it.
    const auto hull = convex_hull(level1_points(d));
    for (const auto& f : d.maps)
        for (const auto& p : hull)
            if (!inside_convex(hull, f(p)))
                throw std::invalid_argument("descriptor: maps do not preserve the hull of V_1");

    // D3 action.
    auto perms = d.symmetry;
    std::sort(perms.begin(), perms.end());
    if (perms != all_perms())
        throw std::invalid_argument("descriptor: symmetry must list the 6 permutations of {0,1,2}");
    const auto cells = [&](const AffineMap& g) {
        std::vector<std::array<Point, 3>> out;
        for (const auto& f : d.maps)
            out.push_back({g(f(d.boundary[0])), g(f(d.boundary[1])), g(f(d.boundary[2]))});
        return out;
    };
    const auto base = cells(AffineMap{});
    for (const auto& p : d.symmetry) {
        const auto g = AffineMap::through(d.boundary, {d.boundary[p[0]], d.boundary[p[1]], d.boundary[p[2]]});
        for (const auto& tri : cells(g)) {
            const bool hit = std::any_of(base.begin(), base.end(), [&](const auto& other) {
                return std::all_of(tri.begin(), tri.end(), [&](Point v) {
                    return std::any_of(other.begin(), other.end(), [&](Point u) { return same_point(u, v); });
                });
            });
            if (!hit)
                throw std::invalid_argument("descriptor: symmetry does not permute the level-1 cells");
        }
    }
}

void for_each_word(int n_maps, int length, const std::function<void(const std::string&)>& fn)
{
    std::string w(static_cast<std::size_t>(length), '0');
    while (true) {
        fn(w);
        int pos = length - 1;
        while (pos >= 0 && w[static_cast<std::size_t>(pos)] == '0' + n_maps - 1) {
            w[static_cast<std::size_t>(pos)] = '0';
            --pos;
        }
        if (pos < 0)
            return;
        ++w[static_cast<std::size_t>(pos)];
    }
}

Fractal::Fractal(PcfDescriptor desc) : desc_(std::move(desc))
{
    validate(desc_);
    const int n = n_maps();
    for (const auto& f : desc_.maps)
        ratios_.push_back(f.ratio());

    fix_.assign(static_cast<std::size_t>(n), {-1, -1, -1});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j)
            for (int l = 0; l < 3; ++l)
                if (same_point(desc_.maps[i](desc_.boundary[j]), desc_.boundary[l]))
                    fix_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = l;

    UnionFind uf(3 * n);
    for (const auto& id : desc_.identifications)
        uf.unite(3 * id.map_a + id.vertex_a, 3 * id.map_b + id.vertex_b);
    slot_class_.assign(static_cast<std::size_t>(3 * n), -1);
    std::map<int, int> root_to_class;
    for (int s = 0; s < 3 * n; ++s) {
        const int root = uf.find(s);
        auto [it, fresh] = root_to_class.try_emplace(root, static_cast<int>(classes_.size()));
        if (fresh) {
            classes_.emplace_back();
            class_boundary_.push_back(-1);
        }
        slot_class_[static_cast<std::size_t>(s)] = it->second;
        classes_[static_cast<std::size_t>(it->second)].push_back({s / 3, s % 3});
        if (fix_[static_cast<std::size_t>(s / 3)][static_cast<std::size_t>(s % 3)] >= 0)
            class_boundary_[static_cast<std::size_t>(it->second)] = fix_[static_cast<std::size_t>(s / 3)][static_cast<std::size_t>(s % 3)];
    }

    // Symmetry isometries and their conjugation action on the maps.
    for (const auto& p : desc_.symmetry)
        sym_maps_.push_back(AffineMap::through(desc_.boundary, {desc_.boundary[p[0]], desc_.boundary[p[1]], desc_.boundary[p[2]]}));
    conj_.assign(sym_maps_.size(), std::vector<std::pair<int, int>>(static_cast<std::size_t>(n), {-1, -1}));
    for (int s = 0; s < symmetry_count(); ++s)
        for (int i = 0; i < n; ++i) {
            bool found = false;
            for (int k = 0; k < n && !found; ++k)
                for (int t = 0; t < symmetry_count() && !found; ++t) {
                    bool ok = true;
                    for (int j = 0; j < 3 && ok; ++j)
                        ok = same_point(sym_maps_[static_cast<std::size_t>(s)](desc_.maps[i](desc_.boundary[j])),
                                        desc_.maps[k](desc_.boundary[symmetry_perm(t)[j]]));
                    if (ok) {
                        conj_[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] = {k, t};
                        found = true;
                    }
                }
            if (!found)
                throw std::invalid_argument("descriptor: symmetry is not compatible with the maps");
        }

    // Axis extent of K through q0, in units of the triangle height.
    const Point q0 = desc_.boundary[0];
    const Point centroid = (1.0 / 3.0) * (desc_.boundary[0] + desc_.boundary[1] + desc_.boundary[2]);
    const double height = 1.5 * distance(q0, centroid);
    const Point axis = (1.0 / distance(q0, centroid)) * (centroid - q0);
    double far = 0;
    for (const auto& p : level1_points(desc_))
        far = std::max(far, dot(p - q0, axis));
    axis_extent_ = far / height;

    // Neighborhood-type registry: first appearance over shallow levels.
    const int max_level = n == 3 ? 5 : 3;
    for (int level = 1; level <= max_level; ++level)
        for_each_word(n, level, [&](const std::string& w) {
            const CellRef c{w};
            if (touches_boundary(c))
                return;
            auto sig = type_signature(c);
            if (type_ids_.emplace(std::move(sig), static_cast<int>(type_reps_.size())).second)
                type_reps_.push_back(c);
        });
}

Address Fractal::address(std::string_view word, int vertex) const
{
    if (vertex < 0 || vertex > 2)
        throw std::invalid_argument("address: vertex must be 0, 1 or 2");
    for (char ch : word)
        if (ch < '0' || ch >= '0' + n_maps())
            throw std::invalid_argument("address: digit out of range in '" + std::string(word) + "'");
    return canonical({std::string(word), vertex});
}

Address Fractal::canonical(Address a) const
{
    while (!a.word.empty()) {
        const int last = a.word.back() - '0';
        const int f = boundary_fix(last, a.vertex);
        if (f < 0)
            break;
        a.vertex = f;
        a.word.pop_back();
    }
    if (a.word.empty())
        return a;
    const int last = a.word.back() - '0';
    const auto& cls = classes_[static_cast<std::size_t>(slot_class(last, a.vertex))];
    Address best = a;
    for (const auto& s : cls) {
        Address cand{a.word.substr(0, a.word.size() - 1) + static_cast<char>('0' + s.map), s.label};
        best = std::min(best, cand);
    }
    return best;
}

std::vector<std::pair<std::string, int>> Fractal::paths_to(int label, int depth) const
{
    if (depth == 0)
        return {{std::string(), label}};
    std::vector<std::pair<std::string, int>> out;
    for (int i = 0; i < n_maps(); ++i)
        for (int b = 0; b < 3; ++b)
            if (boundary_fix(i, b) == label)
                for (auto& [s, j] : paths_to(b, depth - 1))
                    out.emplace_back(static_cast<char>('0' + i) + s, j);
    return out;
}

std::vector<Address> Fractal::representatives(const Address& canon, int level) const
{
    if (canon.level() > level)
        throw std::invalid_argument("representatives: point is not in V_" + std::to_string(level));
    std::vector<Address> out;
    if (canon.word.empty()) {
        for (auto& [s, j] : paths_to(canon.vertex, level))
            out.push_back({s, j});
    } else {
        const int last = canon.word.back() - '0';
        const std::string prefix = canon.word.substr(0, canon.word.size() - 1);
        for (const auto& slot : classes_[static_cast<std::size_t>(slot_class(last, canon.vertex))])
            for (auto& [s, j] : paths_to(slot.label, level - canon.level()))
                out.push_back({prefix + static_cast<char>('0' + slot.map) + s, j});
    }
    std::sort(out.begin(), out.end());
    return out;
}

Address Fractal::extend(const Address& canon, int level) const
{
    auto reps = representatives(canon, level);
    if (reps.empty())
        throw std::logic_error("extend: no representative");
    return reps.front();
}

std::vector<int> Fractal::vertex_labels_in(const Address& canon, const CellRef& cell) const
{
    std::vector<int> out;
    if (canon.level() > cell.level())
        return out;
    for (const auto& r : representatives(canon, cell.level()))
        if (r.word == cell.word)
            out.push_back(r.vertex);
    return out;
}

Point Fractal::map_word(std::string_view word, Point p) const
{
    for (auto it = word.rbegin(); it != word.rend(); ++it)
        p = desc_.maps[static_cast<std::size_t>(*it - '0')](p);
    return p;
}

AffineMap Fractal::word_map(std::string_view word) const
{
    AffineMap m;
    for (char ch : word)
        m = m.compose(desc_.maps[static_cast<std::size_t>(ch - '0')]);
    return m;
}

Point Fractal::point_coords(const Address& a) const { return map_word(a.word, boundary_point(a.vertex)); }

PointKind Fractal::classify_point(const Address& canon) const
{
    if (canon.word.empty())
        return PointKind::boundary;
    const int last = canon.word.back() - '0';
    return classes_[static_cast<std::size_t>(slot_class(last, canon.vertex))].size() >= 2 ? PointKind::junction
                                                                                           : PointKind::generic_vertex;
}

int Fractal::slot_multiplicity(int map, int label) const
{
    return static_cast<int>(classes_[static_cast<std::size_t>(slot_class(map, label))].size());
}

double Fractal::cell_measure(const CellRef& c) const { return std::pow(weight(), c.level()); }

double Fractal::cell_scale(const CellRef& c) const
{
    double s = 1.0;
    for (char ch : c.word)
        s *= ratio(ch - '0');
    return s;
}

double Fractal::cell_size(const CellRef& c) const
{
    const double height = distance(desc_.boundary[1], desc_.boundary[2]) * std::sqrt(3.0) / 2;
    return axis_extent_ * height * cell_scale(c);
}

std::array<Address, 3> Fractal::cell_vertices(const CellRef& c) const
{
    return {canonical({c.word, 0}), canonical({c.word, 1}), canonical({c.word, 2})};
}

bool Fractal::touches_boundary(const CellRef& c) const
{
    for (const auto& v : cell_vertices(c))
        if (v.word.empty())
            return true;
    return false;
}

NeighborList Fractal::neighbor_cells(const CellRef& c) const
{
    if (touches_boundary(c))
        throw NeighborhoodTypeError("cell '" + c.word + "' meets V_0; it has no full neighborhood at this level");
    NeighborList out;
    const auto verts = cell_vertices(c);
    for (int i = 0; i < 3; ++i)
        for (const auto& r : representatives(verts[static_cast<std::size_t>(i)], c.level()))
            if (r.word != c.word)
                out[static_cast<std::size_t>(i)].push_back({CellRef{r.word}, r.vertex});
    return out;
}

std::array<int, 3> Fractal::valence(const CellRef& c) const
{
    const auto nb = neighbor_cells(c);
    return {static_cast<int>(nb[0].size()), static_cast<int>(nb[1].size()), static_cast<int>(nb[2].size())};
}

std::vector<long long> Fractal::type_signature(const CellRef& c) const
{
    const auto nb = neighbor_cells(c);
    const auto to_std = AffineMap::through(
        {map_word(c.word, desc_.boundary[0]), map_word(c.word, desc_.boundary[1]), map_word(c.word, desc_.boundary[2])},
        desc_.boundary);
    std::vector<std::array<Point, 3>> tris;
    for (const auto& list : nb)
        for (const auto& n : list)
            tris.push_back({to_std(map_word(n.cell.word, desc_.boundary[0])), to_std(map_word(n.cell.word, desc_.boundary[1])),
                            to_std(map_word(n.cell.word, desc_.boundary[2]))});
    std::vector<long long> best;
    for (const auto& g : sym_maps_) {
        std::vector<std::vector<long long>> keyed;
        for (const auto& t : tris) {
            std::vector<std::pair<long long, long long>> pts;
            for (const auto& p : t) {
                const Point gp = g(p);
                pts.emplace_back(std::llround(gp.x * 1e6), std::llround(gp.y * 1e6));
            }
            std::sort(pts.begin(), pts.end());
            std::vector<long long> flat;
            for (auto& [x, y] : pts) {
                flat.push_back(x);
                flat.push_back(y);
            }
            keyed.push_back(std::move(flat));
        }
        std::sort(keyed.begin(), keyed.end());
        std::vector<long long> sig{static_cast<long long>(keyed.size())};
        for (auto& k : keyed)
            sig.insert(sig.end(), k.begin(), k.end());
        if (best.empty() || sig < best)
            best = std::move(sig);
    }
    return best;
}

int Fractal::neighborhood_type(const CellRef& c) const
{
    const auto it = type_ids_.find(type_signature(c));
    if (it == type_ids_.end())
        throw NeighborhoodTypeError("cell '" + c.word + "' has an unregistered neighborhood type");
    return it->second;
}

Address Fractal::apply_symmetry(int s, const Address& a) const
{
    std::string w;
    int cur = s;
    for (char ch : a.word) {
        const auto [k, t] = conj_[static_cast<std::size_t>(cur)][static_cast<std::size_t>(ch - '0')];
        w.push_back(static_cast<char>('0' + k));
        cur = t;
    }
    return canonical({w, symmetry_perm(cur)[static_cast<std::size_t>(a.vertex)]});
}

CellRef Fractal::apply_symmetry(int s, const CellRef& c) const
{
    std::string w;
    int cur = s;
    for (char ch : c.word) {
        const auto [k, t] = conj_[static_cast<std::size_t>(cur)][static_cast<std::size_t>(ch - '0')];
        w.push_back(static_cast<char>('0' + k));
        cur = t;
    }
    return {w};
}

} // namespace gasket
