#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "homolab/field.hpp"
#include "homolab/grid.hpp"

namespace homolab {

// FNV-1a over raw bytes: the hash tying grid functions to the field they
// were computed from, and manifests to their files
std::uint64_t fnv1a(const void* data, std::size_t n);
std::uint64_t fnv1a(const std::string& s);

std::string topology_label(Topology t);
Topology topology_from_label(const std::string& s);
std::string law_label(FieldLaw l);
FieldLaw law_from_label(const std::string& s);

// fixed-order binary encoding of a field descriptor (header only; the cells
// re-derive from the seed)
std::vector<unsigned char> encode_field_descriptor(const FieldSpec& spec);
std::uint64_t field_descriptor_hash(const FieldSpec& spec);

// versioned binary descriptor plus a JSON twin at path + ".json"
void write_field_descriptor(const std::string& path, const FieldSpec& spec);
FieldSpec read_field_descriptor(const std::string& path);

struct StoredGridFunction {
    GridFunction f;
    double time = 0.0;
    std::uint64_t field_hash = 0;
};

// flat binary array of doubles with a JSON sidecar at path + ".json"
// carrying the grid spec, the time stamp, and the field descriptor hash
void write_grid_function(const std::string& path, const GridFunction& f,
                         double time, std::uint64_t field_hash);
StoredGridFunction read_grid_function(const std::string& path);

// numeric CSV, every value at 17 significant digits
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string format_g17(double v);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace homolab
