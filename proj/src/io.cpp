#include "gasketlab/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gasket {

using nlohmann::json;

PcfDescriptor parse_descriptor(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("descriptor: ") + e.what());
    }
    PcfDescriptor d;
    try {
        d.name = j.at("name").get<std::string>();
        for (const auto& m : j.at("maps"))
            d.maps.push_back({m.at("a").get<double>(), m.at("b").get<double>(), m.at("c").get<double>(),
                              m.at("d").get<double>(), m.at("e").get<double>(), m.at("f").get<double>()});
        const auto& b = j.at("boundary");
        if (b.size() != 3)
            throw std::invalid_argument("descriptor: boundary needs 3 points");
        for (std::size_t i = 0; i < 3; ++i)
            d.boundary[i] = {b[i].at(0).get<double>(), b[i].at(1).get<double>()};
        for (const auto& id : j.at("identifications"))
            d.identifications.push_back({id.at(0).get<int>(), id.at(1).get<int>(), id.at(2).get<int>(), id.at(3).get<int>()});
        for (const auto& p : j.at("symmetry"))
            d.symmetry.push_back({p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>()});
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("descriptor: ") + e.what());
    }
    d.measure_weights.assign(d.maps.size(), d.maps.empty() ? 0.0 : 1.0 / static_cast<double>(d.maps.size()));
    validate(d);
    return d;
}

PcfDescriptor load_descriptor(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open descriptor file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_descriptor(ss.str());
}

std::string descriptor_json(const PcfDescriptor& d)
{
    json j;
    j["name"] = d.name;
    j["maps"] = json::array();
    for (const auto& m : d.maps)
        j["maps"].push_back({{"a", m.a}, {"b", m.b}, {"c", m.c}, {"d", m.d}, {"e", m.e}, {"f", m.f}});
    j["boundary"] = json::array();
    for (const auto& p : d.boundary)
        j["boundary"].push_back({p.x, p.y});
    j["identifications"] = json::array();
    for (const auto& id : d.identifications)
        j["identifications"].push_back({id.map_a, id.vertex_a, id.map_b, id.vertex_b});
    j["symmetry"] = d.symmetry;
    return j.dump(2);
}

PcfDescriptor resolve_descriptor(const std::string& name_or_path)
{
    for (const auto& n : builtin_names())
        if (n == name_or_path)
            return builtin_descriptor(n);
    if (name_or_path.find('/') == std::string::npos && name_or_path.find(".json") == std::string::npos)
        throw std::invalid_argument("unknown fractal '" + name_or_path + "'");
    return load_descriptor(name_or_path);
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_vertex_csv(std::ostream& os, const VertexFunction& f)
{
    os << "word,vertex,value\n";
    for (std::size_t i = 0; i < f.mesh->size(); ++i) {
        const Address& a = f.mesh->vertex(i);
        os << a.word << ',' << a.vertex << ',' << fmt(f[i]) << '\n';
    }
}

VertexFunction read_vertex_csv(std::istream& is, const Fractal& f, int level)
{
    const auto mesh = mesh_for(f, level);
    VertexFunction out{mesh, std::vector<double>(mesh->size(), 0.0)};
    std::vector<bool> seen(mesh->size(), false);
    std::string line;
    std::getline(is, line); // header
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string word, vertex, value;
        std::getline(ss, word, ',');
        std::getline(ss, vertex, ',');
        std::getline(ss, value, ',');
        const int idx = mesh->index(f.address(word, std::stoi(vertex)));
        if (idx < 0)
            throw std::invalid_argument("vertex csv: '" + word + "," + vertex + "' is not in V_" + std::to_string(level));
        if (seen[static_cast<std::size_t>(idx)])
            throw std::invalid_argument("vertex csv: duplicate vertex '" + word + "," + vertex + "'");
        seen[static_cast<std::size_t>(idx)] = true;
        out[static_cast<std::size_t>(idx)] = std::stod(value);
    }
    for (bool s : seen)
        if (!s)
            throw std::invalid_argument("vertex csv: missing vertices");
    return out;
}

std::string mvn_json(const std::string& fractal, const Address& x, const MeanValueNeighborhood& mvn,
                     const std::optional<IntervalValue>& cb)
{
    json j;
    j["fractal"] = fractal;
    j["word"] = x.word;
    j["vertex"] = x.vertex;
    j["k"] = mvn.spec.base_cell.level();
    j["cell"] = mvn.spec.base_cell.word;
    j["case"] = static_cast<int>(mvn.solve_case);
    j["c"] = mvn.spec.c;
    j["a_target"] = mvn.target;
    j["residual"] = mvn.residual;
    if (cb)
        j["cb"] = {{"lo", cb->lo}, {"hi", cb->hi}};
    else
        j["cb"] = nullptr;
    return j.dump();
}

} // namespace gasket
