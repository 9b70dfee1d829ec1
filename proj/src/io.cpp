#include "homolab/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "homolab/error.hpp"

namespace homolab {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'H', 'L', 'A', 'B'};
constexpr std::uint32_t kDescriptorVersion = 1;

template <class T>
void push_raw(std::vector<unsigned char>& buf, const T& v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
}

template <class T>
T pull_raw(const std::vector<unsigned char>& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size())
        throw IoError("field descriptor truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

std::vector<unsigned char> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<unsigned char> buf{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
    if (in.bad()) throw IoError("read failed on '" + path + "'");
    return buf;
}

void write_bytes(const std::string& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(n));
    if (!out) throw IoError("write failed on '" + path + "'");
}

json grid_to_json(const Grid& g) {
    return json{{"dim", g.dim},
                {"n", {g.n[0], g.n[1]}},
                {"h", g.h},
                {"torus", g.torus},
                {"period", g.period},
                {"origin", {g.origin[0], g.origin[1]}}};
}

Grid grid_from_json(const json& j) {
    Grid g;
    g.dim = j.at("dim").get<int>();
    g.n[0] = j.at("n").at(0).get<long>();
    g.n[1] = j.at("n").at(1).get<long>();
    g.h = j.at("h").get<double>();
    g.torus = j.at("torus").get<bool>();
    g.period = j.at("period").get<double>();
    g.origin[0] = j.at("origin").at(0).get<double>();
    g.origin[1] = j.at("origin").at(1).get<double>();
    if (g.dim != 1 && g.dim != 2) throw ValidationError("bad grid dimension");
    if (g.n[0] < 1 || g.n[1] < 1 || !(g.h > 0.0))
        throw ValidationError("bad grid layout");
    return g;
}

}  // namespace

std::string topology_label(Topology t) {
    return t == Topology::torus ? "torus" : "free_space";
}

Topology topology_from_label(const std::string& s) {
    if (s == "torus") return Topology::torus;
    if (s == "free_space") return Topology::free_space;
    throw ValidationError("unknown topology '" + s + "'");
}

std::string law_label(FieldLaw l) {
    switch (l) {
        case FieldLaw::uniform: return "uniform";
        case FieldLaw::two_point: return "two_point";
        case FieldLaw::laminar: return "laminar";
        case FieldLaw::constant: return "constant";
    }
    return "uniform";
}

FieldLaw law_from_label(const std::string& s) {
    if (s == "uniform") return FieldLaw::uniform;
    if (s == "two_point") return FieldLaw::two_point;
    if (s == "laminar") return FieldLaw::laminar;
    if (s == "constant") return FieldLaw::constant;
    throw ValidationError("unknown field law '" + s + "'");
}

std::uint64_t fnv1a(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::vector<unsigned char> encode_field_descriptor(const FieldSpec& spec) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    push_raw(buf, kDescriptorVersion);
    push_raw(buf, spec.seed);
    push_raw(buf, static_cast<std::int32_t>(spec.dimension));
    push_raw(buf, static_cast<std::int32_t>(spec.topology));
    push_raw(buf, static_cast<std::int32_t>(spec.law));
    push_raw(buf, static_cast<std::int64_t>(spec.period));
    push_raw(buf, spec.params.lambda);
    push_raw(buf, spec.params.Lambda_);
    push_raw(buf, spec.params.alpha0);
    push_raw(buf, spec.params.K0);
    push_raw(buf, spec.params.cross_margin);
    push_raw(buf, spec.rho);
    push_raw(buf, spec.law_a);
    push_raw(buf, spec.law_b);
    push_raw(buf, spec.law_c);
    push_raw(buf, spec.cell_size);
    push_raw(buf, static_cast<std::int64_t>(spec.offset[0]));
    push_raw(buf, static_cast<std::int64_t>(spec.offset[1]));
    return buf;
}

std::uint64_t field_descriptor_hash(const FieldSpec& spec) {
    const auto buf = encode_field_descriptor(spec);
    return fnv1a(buf.data(), buf.size());
}

void write_field_descriptor(const std::string& path, const FieldSpec& spec) {
    const auto buf = encode_field_descriptor(spec);
    write_bytes(path, buf.data(), buf.size());
    json j{{"magic", "HLAB"},
           {"version", kDescriptorVersion},
           {"seed", spec.seed},
           {"dimension", spec.dimension},
           {"topology", topology_label(spec.topology)},
           {"law", law_label(spec.law)},
           {"period", spec.period},
           {"params",
            {{"lambda", spec.params.lambda},
             {"Lambda", spec.params.Lambda_},
             {"alpha0", spec.params.alpha0},
             {"K0", spec.params.K0},
             {"cross_margin", spec.params.cross_margin}}},
           {"rho", spec.rho},
           {"law_a", spec.law_a},
           {"law_b", spec.law_b},
           {"law_c", spec.law_c},
           {"cell_size", spec.cell_size},
           {"offset", {spec.offset[0], spec.offset[1]}}};
    write_text(path + ".json", j.dump(2) + "\n");
}

FieldSpec read_field_descriptor(const std::string& path) {
    const auto buf = read_bytes(path);
    if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw IoError("'" + path + "' is not a field descriptor");
    std::size_t pos = 4;
    const auto version = pull_raw<std::uint32_t>(buf, pos);
    if (version != kDescriptorVersion)
        throw IoError("unsupported field descriptor version");
    FieldSpec spec;
    spec.seed = pull_raw<std::uint64_t>(buf, pos);
    spec.dimension = pull_raw<std::int32_t>(buf, pos);
    spec.topology = static_cast<Topology>(pull_raw<std::int32_t>(buf, pos));
    spec.law = static_cast<FieldLaw>(pull_raw<std::int32_t>(buf, pos));
    spec.period = pull_raw<std::int64_t>(buf, pos);
    spec.params.lambda = pull_raw<double>(buf, pos);
    spec.params.Lambda_ = pull_raw<double>(buf, pos);
    spec.params.alpha0 = pull_raw<double>(buf, pos);
    spec.params.K0 = pull_raw<double>(buf, pos);
    spec.params.cross_margin = pull_raw<double>(buf, pos);
    spec.rho = pull_raw<double>(buf, pos);
    spec.law_a = pull_raw<double>(buf, pos);
    spec.law_b = pull_raw<double>(buf, pos);
    spec.law_c = pull_raw<double>(buf, pos);
    spec.cell_size = pull_raw<double>(buf, pos);
    spec.offset[0] = pull_raw<std::int64_t>(buf, pos);
    spec.offset[1] = pull_raw<std::int64_t>(buf, pos);
    return spec;
}

void write_grid_function(const std::string& path, const GridFunction& f,
                         double time, std::uint64_t field_hash) {
    write_bytes(path, f.v.data(), f.v.size() * sizeof(double));
    json j{{"grid", grid_to_json(f.grid)},
           {"time", time},
           {"field_hash", field_hash},
           {"count", f.v.size()},
           {"format", "f64"}};
    write_text(path + ".json", j.dump(2) + "\n");
}

StoredGridFunction read_grid_function(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text(path + ".json"));
    } catch (const json::exception& e) {
        throw IoError("bad sidecar for '" + path + "': " + e.what());
    }
    StoredGridFunction out;
    try {
        out.f.grid = grid_from_json(j.at("grid"));
        out.time = j.at("time").get<double>();
        out.field_hash = j.at("field_hash").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw IoError("bad sidecar for '" + path + "': " + e.what());
    }
    const auto buf = read_bytes(path);
    const std::size_t n = static_cast<std::size_t>(out.f.grid.node_count());
    if (buf.size() != n * sizeof(double))
        throw IoError("'" + path + "' does not match its sidecar layout");
    out.f.v.resize(n);
    std::memcpy(out.f.v.data(), buf.data(), buf.size());
    return out;
}

std::string format_g17(double v) {
    char tmp[40];
    std::snprintf(tmp, sizeof tmp, "%.17g", v);
    return tmp;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ostringstream out;
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << "\n";
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw ValidationError("csv row width does not match the header");
        for (std::size_t c = 0; c < row.size(); ++c)
            out << (c ? "," : "") << format_g17(row[c]);
        out << "\n";
    }
    write_text(path, out.str());
}

void write_text(const std::string& path, const std::string& content) {
    write_bytes(path, content.data(), content.size());
}

std::string read_text(const std::string& path) {
    const auto buf = read_bytes(path);
    return std::string(buf.begin(), buf.end());
}

}  // namespace homolab
