#pragma once

#include "gasketlab/meanvalue.hpp"

#include <iosfwd>

namespace gasket {

// Descriptor JSON: {name, maps:[{a,b,c,d,e,f}], boundary:[[x,y]x3],
// identifications:[[i,j,k,l]], symmetry:[[p0,p1,p2]x6]}. measure weights are 1/N.
PcfDescriptor parse_descriptor(std::string_view json_text);
PcfDescriptor load_descriptor(const std::string& path);
std::string descriptor_json(const PcfDescriptor& d);
// Built-in name or path to a descriptor file.
PcfDescriptor resolve_descriptor(const std::string& name_or_path);

// %.17g
std::string fmt(double v);

void write_vertex_csv(std::ostream& os, const VertexFunction& f);
// Rows may come in any order; every V_m vertex must appear exactly once.
VertexFunction read_vertex_csv(std::istream& is, const Fractal& f, int level);

std::string mvn_json(const std::string& fractal, const Address& x, const MeanValueNeighborhood& mvn,
                     const std::optional<IntervalValue>& cb);

} // namespace gasket
