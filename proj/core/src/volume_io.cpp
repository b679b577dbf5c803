#include "weakseg/volume_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "raw volume I/O assumes a little-endian host");

namespace weakseg {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

struct Header {
    Dims3 dims;
    std::array<double, 3> spacing{1, 1, 1};
    bool is_mask = false;
    std::string raw_name;
};

Header parse_header(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open volume header: " + path.string());
    Header h;
    bool have_dims = false, have_type = false, have_file = false;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key, eq;
        if (!(ls >> key >> eq) || eq != "=") continue;
        if (key == "NDims") {
            int n = 0;
            ls >> n;
            if (n != 3) throw std::runtime_error("volume header: NDims must be 3");
        } else if (key == "DimSize") {
            if (!(ls >> h.dims.nx >> h.dims.ny >> h.dims.nz))
                throw std::runtime_error("volume header: bad DimSize");
            have_dims = true;
        } else if (key == "ElementSpacing") {
            if (!(ls >> h.spacing[0] >> h.spacing[1] >> h.spacing[2]))
                throw std::runtime_error("volume header: bad ElementSpacing");
        } else if (key == "ElementType") {
            std::string t;
            ls >> t;
            if (t == "FLOAT32") h.is_mask = false;
            else if (t == "UINT8") h.is_mask = true;
            else throw std::runtime_error("volume header: unknown ElementType " + t);
            have_type = true;
        } else if (key == "ElementDataFile") {
            ls >> h.raw_name;
            have_file = true;
        }
    }
    if (!have_dims || !have_type || !have_file)
        throw std::runtime_error("volume header: missing required field in " + path.string());
    if (h.dims.nx < 1 || h.dims.ny < 1 || h.dims.nz < 1)
        throw std::runtime_error("volume header: dims must be >= 1");
    return h;
}

std::string raw_name_for(const std::filesystem::path& header_path) {
    return header_path.stem().string() + ".raw";
}

void write_bytes(const std::filesystem::path& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(static_cast<const char*>(data), std::streamsize(n));
    if (!out)
        throw std::runtime_error("short write: " + path.string());
}

std::vector<char> read_bytes(const std::filesystem::path& path, std::size_t expect) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open raw file: " + path.string());
    std::vector<char> buf(expect);
    in.read(buf.data(), std::streamsize(expect));
    if (std::size_t(in.gcount()) != expect)
        throw std::runtime_error("raw file too short: " + path.string());
    return buf;
}

} // namespace

std::string volume_header_text(const Dims3& dims, const std::array<double, 3>& spacing,
                               bool is_mask, const std::string& raw_name) {
    std::string s;
    s += "NDims = 3\n";
    s += "DimSize = " + std::to_string(dims.nx) + " " + std::to_string(dims.ny) + " " +
         std::to_string(dims.nz) + "\n";
    s += "ElementSpacing = " + format_double(spacing[0]) + " " + format_double(spacing[1]) +
         " " + format_double(spacing[2]) + "\n";
    s += std::string("ElementType = ") + (is_mask ? "UINT8" : "FLOAT32") + "\n";
    s += "ElementDataFile = " + raw_name + "\n";
    return s;
}

void write_volume(const std::filesystem::path& header_path, const VolumeGrid& vol) {
    vol.validate();
    std::string raw = raw_name_for(header_path);
    std::string header = volume_header_text(vol.dims, vol.spacing, false, raw);
    write_bytes(header_path, header.data(), header.size());
    write_bytes(header_path.parent_path() / raw, vol.data.data(),
                vol.data.size() * sizeof(float));
}

void write_mask(const std::filesystem::path& header_path, const MaskVolume& mask) {
    if (mask.data.size() != mask.dims.voxels())
        throw std::invalid_argument("write_mask: data length != dims");
    std::string raw = raw_name_for(header_path);
    std::string header = volume_header_text(mask.dims, {1, 1, 1}, true, raw);
    write_bytes(header_path, header.data(), header.size());
    write_bytes(header_path.parent_path() / raw, mask.data.data(), mask.data.size());
}

VolumeGrid read_volume(const std::filesystem::path& header_path) {
    Header h = parse_header(header_path);
    if (h.is_mask)
        throw std::runtime_error("read_volume: header describes a UINT8 mask");
    VolumeGrid vol;
    vol.dims = h.dims;
    vol.spacing = h.spacing;
    std::size_t n = h.dims.voxels();
    std::vector<char> bytes = read_bytes(header_path.parent_path() / h.raw_name, n * sizeof(float));
    vol.data.resize(n);
    std::memcpy(vol.data.data(), bytes.data(), n * sizeof(float));
    vol.validate();
    return vol;
}

MaskVolume read_mask(const std::filesystem::path& header_path) {
    Header h = parse_header(header_path);
    if (!h.is_mask)
        throw std::runtime_error("read_mask: header describes a FLOAT32 volume");
    MaskVolume mask(h.dims);
    std::vector<char> bytes = read_bytes(header_path.parent_path() / h.raw_name, h.dims.voxels());
    std::memcpy(mask.data.data(), bytes.data(), bytes.size());
    for (auto& v : mask.data) v = v ? 1 : 0;
    return mask;
}

} // namespace weakseg
