#include "gasketlab/mesh.hpp"

#include <tuple>

#include <algorithm>
#include <mutex>
#include <set>
#include <thread>

namespace gasket {

Mesh::Mesh(const Fractal& f, int level) : fractal_(&f), level_(level)
{
    if (level < 0)
        throw std::invalid_argument("Mesh: negative level");
    std::vector<std::array<Address, 3>> raw;
    std::vector<Address> all;
    for_each_word(f.n_maps(), level, [&](const std::string& w) {
        const auto v = f.cell_vertices(CellRef{w});
        raw.push_back(v);
        all.insert(all.end(), v.begin(), v.end());
    });
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    vertices_ = std::move(all);
    index_.reserve(vertices_.size());
    for (std::size_t i = 0; i < vertices_.size(); ++i)
        index_.emplace(vertices_[i], static_cast<int>(i));

    cells_.reserve(raw.size());
    std::set<std::pair<int, int>> edge_set;
    for (const auto& tri : raw) {
        std::array<int, 3> ids{};
        for (int j = 0; j < 3; ++j)
            ids[static_cast<std::size_t>(j)] = index_.at(tri[static_cast<std::size_t>(j)]);
        cells_.push_back(ids);
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b)
                edge_set.emplace(std::min(ids[a], ids[b]), std::max(ids[a], ids[b]));
    }
    edges_.assign(edge_set.begin(), edge_set.end());
    adj_.resize(vertices_.size());
    for (const auto& [a, b] : edges_) {
        adj_[static_cast<std::size_t>(a)].push_back(b);
        adj_[static_cast<std::size_t>(b)].push_back(a);
    }
}

int Mesh::index(const Address& canon) const
{
    const auto it = index_.find(canon);
    return it == index_.end() ? -1 : it->second;
}

std::string Mesh::cell_word(std::size_t c) const
{
    std::string w(static_cast<std::size_t>(level_), '0');
    for (int pos = level_ - 1; pos >= 0; --pos) {
        w[static_cast<std::size_t>(pos)] = static_cast<char>('0' + c % static_cast<std::size_t>(fractal_->n_maps()));
        c /= static_cast<std::size_t>(fractal_->n_maps());
    }
    return w;
}

std::shared_ptr<const Mesh> mesh_for(const Fractal& f, int level)
{
    static std::mutex mu;
    // The address alone could be reused by a different fractal once the first
    // one is gone, so the map coefficients are part of the key.
    std::vector<double> print;
    for (const auto& m : f.descriptor().maps)
        print.insert(print.end(), {m.a, m.b, m.c, m.d, m.e, m.f});
    static std::map<std::tuple<const Fractal*, int, std::vector<double>>, std::shared_ptr<const Mesh>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{&f, level, std::move(print)}];
    if (!slot)
        slot = std::make_shared<const Mesh>(f, level);
    return slot;
}

double VertexFunction::at(const Address& canon) const
{
    const int i = mesh->index(canon);
    if (i < 0)
        throw std::out_of_range("VertexFunction: address not in V_" + std::to_string(level()));
    return values[static_cast<std::size_t>(i)];
}

VertexFunction sample(const std::shared_ptr<const Mesh>& mesh, const std::function<double(const Address&)>& fn,
                      int threads)
{
    VertexFunction out{mesh, std::vector<double>(mesh->size())};
    const std::size_t n = mesh->size();
    const auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            out.values[i] = fn(mesh->vertex(i));
    };
    if (threads <= 1 || n < 1024) {
        work(0, n);
        return out;
    }
    // Each slot is written by exactly one thread, so the result does not
    // depend on the thread count.
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + static_cast<std::size_t>(threads) - 1) / static_cast<std::size_t>(threads);
    for (std::size_t b = 0; b < n; b += chunk)
        pool.emplace_back(work, b, std::min(n, b + chunk));
    for (auto& t : pool)
        t.join();
    return out;
}

} // namespace gasket
