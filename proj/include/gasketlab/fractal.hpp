#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gasket {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double distance(Point a, Point b);

// x -> (a x + b y + e, c x + d y + f)
struct AffineMap {
    double a = 1, b = 0, c = 0, d = 1, e = 0, f = 0;

    Point operator()(Point p) const { return {a * p.x + b * p.y + e, c * p.x + d * p.y + f}; }
    // Operator 2-norm of the linear part.
    double norm() const;
    // Similarity ratio, assuming the linear part is a scaled isometry.
    double ratio() const;
    AffineMap compose(const AffineMap& inner) const;
    static AffineMap through(const std::array<Point, 3>& from, const std::array<Point, 3>& to);
};

// F_{map_a}(q_{vertex_a}) == F_{map_b}(q_{vertex_b})
struct Identification {
    int map_a = 0, vertex_a = 0, map_b = 0, vertex_b = 0;
};

using Perm3 = std::array<int, 3>;

struct PcfDescriptor {
    std::string name;
    std::vector<AffineMap> maps;
    std::array<Point, 3> boundary{};
    std::vector<Identification> identifications;
    std::vector<Perm3> symmetry;
    std::vector<double> measure_weights;

    int n_maps() const { return static_cast<int>(maps.size()); }
};

// sg | hexagasket | sg3
PcfDescriptor builtin_descriptor(std::string_view name);
std::vector<std::string> builtin_names();

// Throws std::invalid_argument naming the violated invariant.
void validate(const PcfDescriptor& d);

// The point F_word(q_vertex); word digits are '0' + map index.
struct Address {
    std::string word;
    int vertex = 0;

    int level() const { return static_cast<int>(word.size()); }
    auto operator<=>(const Address&) const = default;
};

struct CellRef {
    std::string word;

    int level() const { return static_cast<int>(word.size()); }
    auto operator<=>(const CellRef&) const = default;
};

struct AddressHash {
    std::size_t operator()(const Address& a) const noexcept
    {
        return std::hash<std::string>{}(a.word) * 3u + static_cast<std::size_t>(a.vertex);
    }
};

enum class PointKind { boundary, junction, generic_vertex };
std::string_view to_string(PointKind k);

// A same-level cell meeting a cell at one of its boundary vertices; `apex`
// is the label of the shared point in the neighbor's own frame.
struct Neighbor {
    CellRef cell;
    int apex = 0;
};

using NeighborList = std::array<std::vector<Neighbor>, 3>;

class NeighborhoodTypeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Validated p.c.f. fractal with the derived tables needed for address algebra.
// Immutable after construction.
class Fractal {
public:
    explicit Fractal(PcfDescriptor desc);

    const PcfDescriptor& descriptor() const { return desc_; }
    const std::string& name() const { return desc_.name; }
    int n_maps() const { return desc_.n_maps(); }
    double weight() const { return desc_.measure_weights[0]; }
    double ratio(int map) const { return ratios_[static_cast<std::size_t>(map)]; }
    Point boundary_point(int label) const { return desc_.boundary[static_cast<std::size_t>(label)]; }

    // F_map(q_label) == q_result, or -1.
    int boundary_fix(int map, int label) const { return fix_[static_cast<std::size_t>(map)][static_cast<std::size_t>(label)]; }

    // Builds an address from a digit string, validating digits, and canonicalizes it.
    Address address(std::string_view word, int vertex) const;
    Address canonical(Address a) const;
    // Every level-`level` address denoting the same point as `canon`.
    std::vector<Address> representatives(const Address& canon, int level) const;
    // Lexicographically least level-`level` representative.
    Address extend(const Address& canon, int level) const;
    // Vertex labels of `cell` at which the point sits, or empty if the point is
    // not a vertex of that cell.
    std::vector<int> vertex_labels_in(const Address& canon, const CellRef& cell) const;

    Point point_coords(const Address& a) const;
    Point map_word(std::string_view word, Point p) const;
    AffineMap word_map(std::string_view word) const;
    PointKind classify_point(const Address& canon) const;

    double cell_measure(const CellRef& c) const;
    double cell_scale(const CellRef& c) const;
    // Extent of the cell along the reflection axis through a boundary vertex.
    double cell_size(const CellRef& c) const;
    std::array<Address, 3> cell_vertices(const CellRef& c) const;
    bool touches_boundary(const CellRef& c) const;

    // Throws NeighborhoodTypeError if the cell touches V_0.
    NeighborList neighbor_cells(const CellRef& c) const;
    std::array<int, 3> valence(const CellRef& c) const;
    int neighborhood_type(const CellRef& c) const;
    int neighborhood_type_count() const { return static_cast<int>(type_reps_.size()); }
    const CellRef& neighborhood_type_representative(int id) const { return type_reps_.at(static_cast<std::size_t>(id)); }

    // D3 action.
    int symmetry_count() const { return static_cast<int>(desc_.symmetry.size()); }
    const Perm3& symmetry_perm(int s) const { return desc_.symmetry[static_cast<std::size_t>(s)]; }
    const AffineMap& symmetry_map(int s) const { return sym_maps_[static_cast<std::size_t>(s)]; }
    Address apply_symmetry(int s, const Address& a) const;
    CellRef apply_symmetry(int s, const CellRef& c) const;

    // Number of level-1 slots (i, j) glued to slot (map, label), including itself.
    int slot_multiplicity(int map, int label) const;
    // Level-1 vertex classes (points of V_1).
    int v1_class_count() const { return static_cast<int>(classes_.size()); }
    int v1_class(int map, int label) const { return slot_class(map, label); }
    // Boundary label of a V_1 class, or -1 when it is not in V_0.
    int v1_class_boundary(int cls) const { return class_boundary_[static_cast<std::size_t>(cls)]; }

private:
    struct Slot {
        int map;
        int label;
    };

    int slot_class(int map, int label) const { return slot_class_[static_cast<std::size_t>(map * 3 + label)]; }
    std::vector<std::pair<std::string, int>> paths_to(int label, int depth) const;
    std::vector<long long> type_signature(const CellRef& c) const;

    PcfDescriptor desc_;
    std::vector<double> ratios_;
    std::vector<std::array<int, 3>> fix_;
    std::vector<int> slot_class_;
    std::vector<std::vector<Slot>> classes_;
    std::vector<int> class_boundary_;
    std::vector<AffineMap> sym_maps_;
    // conj_[s][i] = (k, s') with sigma_s o F_i = F_k o sigma_s'
    std::vector<std::vector<std::pair<int, int>>> conj_;
    std::map<std::vector<long long>, int> type_ids_;
    std::vector<CellRef> type_reps_;
    double axis_extent_ = 1.0;
};

// Enumerate all words of the given length in lexicographic order.
void for_each_word(int n_maps, int length, const std::function<void(const std::string&)>& fn);

} // namespace gasket
