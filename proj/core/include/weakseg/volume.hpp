#ifndef WEAKSEG_VOLUME_HPP
#define WEAKSEG_VOLUME_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace weakseg {

// Voxel counts of a 3D grid. Data layout everywhere is row-major x-fastest:
// linear index = x + nx*(y + ny*z).
struct Dims3 {
    int nx = 0, ny = 0, nz = 0;

    std::size_t voxels() const {
        return std::size_t(nx) * std::size_t(ny) * std::size_t(nz);
    }
    int extent(int direction) const {
        return direction == 0 ? nx : direction == 1 ? ny : nz;
    }
    bool operator==(const Dims3&) const = default;
};

// 3D scalar intensity field with spacing metadata (mm per voxel).
struct VolumeGrid {
    Dims3 dims;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<float> data;

    VolumeGrid() = default;
    VolumeGrid(Dims3 d, float fill = 0.0f);

    std::size_t index(int x, int y, int z) const {
        return std::size_t(x) + std::size_t(dims.nx) * (std::size_t(y) + std::size_t(dims.ny) * std::size_t(z));
    }
    float& at(int x, int y, int z) { return data[index(x, y, z)]; }
    float at(int x, int y, int z) const { return data[index(x, y, z)]; }

    void validate() const; // throws std::invalid_argument on broken invariants
};

// Binary label volume; one byte per voxel, values 0/1.
struct MaskVolume {
    Dims3 dims;
    std::vector<std::uint8_t> data;

    MaskVolume() = default;
    explicit MaskVolume(Dims3 d, std::uint8_t fill = 0);

    std::size_t index(int x, int y, int z) const {
        return std::size_t(x) + std::size_t(dims.nx) * (std::size_t(y) + std::size_t(dims.ny) * std::size_t(z));
    }
    std::uint8_t& at(int x, int y, int z) { return data[index(x, y, z)]; }
    std::uint8_t at(int x, int y, int z) const { return data[index(x, y, z)]; }

    std::size_t count() const;
    bool empty_mask() const { return count() == 0; }
    bool operator==(const MaskVolume&) const = default;
};

// One orthogonal plane of a volume. direction is the fixed axis
// (0 = sagittal/x, 1 = coronal/y, 2 = transverse/z); the two remaining axes
// keep their relative order, the lower one varying fastest. For a 2D image of
// width na and height nb that means pixel (row, col) = data[col + na*row],
// where col runs along the faster (lower) axis.
struct SliceImage {
    int direction = 0;
    int index = 0;
    int na = 0, nb = 0;
    std::vector<float> data;

    float at(int row, int col) const { return data[std::size_t(col) + std::size_t(na) * std::size_t(row)]; }
};

// Binary 2D mask with the same layout as SliceImage.
struct Mask2D {
    int na = 0, nb = 0;
    std::vector<std::uint8_t> data;

    Mask2D() = default;
    Mask2D(int na_, int nb_, std::uint8_t fill = 0)
        : na(na_), nb(nb_), data(std::size_t(na_) * std::size_t(nb_), fill) {}

    std::size_t index(int row, int col) const { return std::size_t(col) + std::size_t(na) * std::size_t(row); }
    std::uint8_t& at(int row, int col) { return data[index(row, col)]; }
    std::uint8_t at(int row, int col) const { return data[index(row, col)]; }

    std::size_t count() const;
    bool empty_mask() const { return count() == 0; }
    bool operator==(const Mask2D&) const = default;
};

// Inclusive pixel extents of a set region.
struct Rect2D {
    int row_min = 0, row_max = 0, col_min = 0, col_max = 0;
    bool operator==(const Rect2D&) const = default;
};

// --- slice extraction / insertion -----------------------------------------

SliceImage extract_slice(const VolumeGrid& vol, int direction, int index);
Mask2D extract_slice(const MaskVolume& vol, int direction, int index);
void insert_slice(VolumeGrid& vol, const SliceImage& slice);
void insert_slice(MaskVolume& vol, int direction, int index, const Mask2D& mask);

// --- 2D morphology and analysis --------------------------------------------

// Iterated 4-neighbourhood erosion; pixels outside the image count as
// background.
Mask2D erode_mask(const Mask2D& mask, int iterations);

// 4-connected components of the set pixels. Returns per-pixel ids with
// background 0 and components numbered 1..count in row-major first-encounter
// order.
struct ComponentMap {
    int na = 0, nb = 0;
    std::vector<std::int32_t> labels;
    int count = 0;

    std::int32_t at(int row, int col) const { return labels[std::size_t(col) + std::size_t(na) * std::size_t(row)]; }
};
ComponentMap connected_components(const Mask2D& mask);

// 4-connected components of a dense label image: pixels belong to the same
// component iff they are joined by a path of equal labels. Every pixel gets a
// component id >= 1.
ComponentMap connected_components_labelled(int na, int nb, const std::vector<std::int32_t>& labels);

// Tight inclusive extents over set pixels; nullopt when the mask is empty.
std::optional<Rect2D> bounding_rect(const Mask2D& mask);

// --- small mask helpers -----------------------------------------------------

void mask_or(MaskVolume& dst, const MaskVolume& src);
Mask2D filled_rect(int na, int nb, const Rect2D& r);

} // namespace weakseg

#endif
