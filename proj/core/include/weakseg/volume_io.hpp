#ifndef WEAKSEG_VOLUME_IO_HPP
#define WEAKSEG_VOLUME_IO_HPP

#include <filesystem>
#include <string>

#include "weakseg/volume.hpp"

namespace weakseg {

// Volume container: a text header plus a raw voxel file.
//
// The header holds exactly these lines, in this order:
//
//   NDims = 3
//   DimSize = <nx> <ny> <nz>
//   ElementSpacing = <sx> <sy> <sz>
//   ElementType = FLOAT32|UINT8
//   ElementDataFile = <name>.raw
//
// The raw file stores voxels row-major x-fastest, little-endian: IEEE-754
// 32-bit floats for FLOAT32 intensities, one byte per voxel for UINT8 masks
// and label maps. The data file name is the header name with the extension
// replaced by .raw, and is looked up next to the header on read.

void write_volume(const std::filesystem::path& header_path, const VolumeGrid& vol);
void write_mask(const std::filesystem::path& header_path, const MaskVolume& mask);

VolumeGrid read_volume(const std::filesystem::path& header_path);
MaskVolume read_mask(const std::filesystem::path& header_path);

// Header text for a given volume, exposed for golden-file tests.
std::string volume_header_text(const Dims3& dims, const std::array<double, 3>& spacing,
                               bool is_mask, const std::string& raw_name);

} // namespace weakseg

#endif
