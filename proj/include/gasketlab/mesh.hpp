#pragma once

#include "gasketlab/fractal.hpp"

#include <memory>
#include <unordered_map>

namespace gasket {

// The graph Gamma_m: canonical vertices of V_m in sorted order, the m-cells in
// lexicographic word order, and the edge lists.
class Mesh {
public:
    Mesh(const Fractal& f, int level);

    const Fractal& fractal() const { return *fractal_; }
    int level() const { return level_; }
    std::size_t size() const { return vertices_.size(); }
    const std::vector<Address>& vertices() const { return vertices_; }
    const Address& vertex(std::size_t i) const { return vertices_[i]; }
    // -1 when the (canonical) address is not in V_m.
    int index(const Address& canon) const;
    bool is_boundary(std::size_t i) const { return vertices_[i].word.empty(); }

    std::size_t cell_count() const { return cells_.size(); }
    const std::array<int, 3>& cell(std::size_t c) const { return cells_[c]; }
    std::string cell_word(std::size_t c) const;

    // Unique edges (i < j) of Gamma_m.
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    // Neighbors of vertex i in Gamma_m, one entry per edge.
    const std::vector<int>& adjacent(std::size_t i) const { return adj_[i]; }

private:
    const Fractal* fractal_;
    int level_;
    std::vector<Address> vertices_;
    std::unordered_map<Address, int, AddressHash> index_;
    std::vector<std::array<int, 3>> cells_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> adj_;
};

// Meshes are cached per (fractal, level); the fractal must outlive the cache entry.
std::shared_ptr<const Mesh> mesh_for(const Fractal& f, int level);

// u restricted to V_m.
struct VertexFunction {
    std::shared_ptr<const Mesh> mesh;
    std::vector<double> values;

    int level() const { return mesh->level(); }
    double at(const Address& canon) const;
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

VertexFunction sample(const std::shared_ptr<const Mesh>& mesh, const std::function<double(const Address&)>& fn,
                      int threads = 1);

} // namespace gasket
