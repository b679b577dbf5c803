#include "weakseg/volume.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace weakseg {

VolumeGrid::VolumeGrid(Dims3 d, float fill) : dims(d), data(d.voxels(), fill) {
    validate();
}

void VolumeGrid::validate() const {
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1)
        throw std::invalid_argument("VolumeGrid: all dims must be >= 1");
    if (data.size() != dims.voxels())
        throw std::invalid_argument("VolumeGrid: data length != nx*ny*nz");
    for (double s : spacing)
        if (!(s > 0.0))
            throw std::invalid_argument("VolumeGrid: spacing must be > 0");
}

MaskVolume::MaskVolume(Dims3 d, std::uint8_t fill) : dims(d), data(d.voxels(), fill) {}

std::size_t MaskVolume::count() const {
    return std::accumulate(data.begin(), data.end(), std::size_t(0),
                           [](std::size_t s, std::uint8_t v) { return s + (v != 0); });
}

std::size_t Mask2D::count() const {
    return std::accumulate(data.begin(), data.end(), std::size_t(0),
                           [](std::size_t s, std::uint8_t v) { return s + (v != 0); });
}

// Maps slice-plane coordinates (row, col) to volume coordinates for a given
// fixed direction. col runs along the lower of the two free axes.
namespace {

struct SlicePlane {
    int na, nb;       // extents along (col, row)
    int ax_col, ax_row;
};

SlicePlane plane_for(const Dims3& dims, int direction, int index) {
    if (direction < 0 || direction > 2)
        throw std::out_of_range("extract_slice: direction must be 0, 1 or 2");
    if (index < 0 || index >= dims.extent(direction))
        throw std::out_of_range("extract_slice: slice index out of range");
    switch (direction) {
    case 0: return {dims.ny, dims.nz, 1, 2};
    case 1: return {dims.nx, dims.nz, 0, 2};
    default: return {dims.nx, dims.ny, 0, 1};
    }
}

inline std::size_t volume_index(const Dims3& dims, int direction, int index,
                                const SlicePlane& p, int row, int col) {
    int xyz[3];
    xyz[direction] = index;
    xyz[p.ax_col] = col;
    xyz[p.ax_row] = row;
    return std::size_t(xyz[0]) +
           std::size_t(dims.nx) * (std::size_t(xyz[1]) + std::size_t(dims.ny) * std::size_t(xyz[2]));
}

} // namespace

SliceImage extract_slice(const VolumeGrid& vol, int direction, int index) {
    SlicePlane p = plane_for(vol.dims, direction, index);
    SliceImage out;
    out.direction = direction;
    out.index = index;
    out.na = p.na;
    out.nb = p.nb;
    out.data.resize(std::size_t(p.na) * std::size_t(p.nb));
    for (int row = 0; row < p.nb; ++row)
        for (int col = 0; col < p.na; ++col)
            out.data[std::size_t(col) + std::size_t(p.na) * std::size_t(row)] =
                vol.data[volume_index(vol.dims, direction, index, p, row, col)];
    return out;
}

Mask2D extract_slice(const MaskVolume& vol, int direction, int index) {
    SlicePlane p = plane_for(vol.dims, direction, index);
    Mask2D out(p.na, p.nb);
    for (int row = 0; row < p.nb; ++row)
        for (int col = 0; col < p.na; ++col)
            out.data[out.index(row, col)] =
                vol.data[volume_index(vol.dims, direction, index, p, row, col)];
    return out;
}

void insert_slice(VolumeGrid& vol, const SliceImage& slice) {
    SlicePlane p = plane_for(vol.dims, slice.direction, slice.index);
    if (slice.na != p.na || slice.nb != p.nb)
        throw std::invalid_argument("insert_slice: slice dims do not match volume");
    for (int row = 0; row < p.nb; ++row)
        for (int col = 0; col < p.na; ++col)
            vol.data[volume_index(vol.dims, slice.direction, slice.index, p, row, col)] =
                slice.data[std::size_t(col) + std::size_t(p.na) * std::size_t(row)];
}

void insert_slice(MaskVolume& vol, int direction, int index, const Mask2D& mask) {
    SlicePlane p = plane_for(vol.dims, direction, index);
    if (mask.na != p.na || mask.nb != p.nb)
        throw std::invalid_argument("insert_slice: mask dims do not match volume");
    for (int row = 0; row < p.nb; ++row)
        for (int col = 0; col < p.na; ++col)
            vol.data[volume_index(vol.dims, direction, index, p, row, col)] =
                mask.at(row, col);
}

Mask2D erode_mask(const Mask2D& mask, int iterations) {
    if (iterations < 0)
        throw std::invalid_argument("erode_mask: iterations must be >= 0");
    Mask2D cur = mask;
    Mask2D next(mask.na, mask.nb);
    for (int it = 0; it < iterations; ++it) {
        for (int row = 0; row < cur.nb; ++row) {
            for (int col = 0; col < cur.na; ++col) {
                bool keep = cur.at(row, col) != 0 &&
                            row > 0 && cur.at(row - 1, col) != 0 &&
                            row + 1 < cur.nb && cur.at(row + 1, col) != 0 &&
                            col > 0 && cur.at(row, col - 1) != 0 &&
                            col + 1 < cur.na && cur.at(row, col + 1) != 0;
                next.at(row, col) = keep ? 1 : 0;
            }
        }
        std::swap(cur, next);
    }
    return cur;
}

ComponentMap connected_components(const Mask2D& mask) {
    ComponentMap out;
    out.na = mask.na;
    out.nb = mask.nb;
    out.labels.assign(mask.data.size(), 0);
    out.count = 0;

    std::vector<std::size_t> stack;
    for (int row = 0; row < mask.nb; ++row) {
        for (int col = 0; col < mask.na; ++col) {
            std::size_t i = mask.index(row, col);
            if (mask.data[i] == 0 || out.labels[i] != 0) continue;
            ++out.count;
            out.labels[i] = out.count;
            stack.push_back(i);
            while (!stack.empty()) {
                std::size_t p = stack.back();
                stack.pop_back();
                int r = int(p / std::size_t(mask.na));
                int c = int(p % std::size_t(mask.na));
                const int dr[4] = {-1, 1, 0, 0};
                const int dc[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    int rr = r + dr[k], cc = c + dc[k];
                    if (rr < 0 || rr >= mask.nb || cc < 0 || cc >= mask.na) continue;
                    std::size_t q = mask.index(rr, cc);
                    if (mask.data[q] != 0 && out.labels[q] == 0) {
                        out.labels[q] = out.count;
                        stack.push_back(q);
                    }
                }
            }
        }
    }
    return out;
}

ComponentMap connected_components_labelled(int na, int nb,
                                           const std::vector<std::int32_t>& labels) {
    if (labels.size() != std::size_t(na) * std::size_t(nb))
        throw std::invalid_argument("connected_components_labelled: size mismatch");
    ComponentMap out;
    out.na = na;
    out.nb = nb;
    out.labels.assign(labels.size(), 0);
    out.count = 0;

    std::vector<std::size_t> stack;
    for (int row = 0; row < nb; ++row) {
        for (int col = 0; col < na; ++col) {
            std::size_t i = std::size_t(col) + std::size_t(na) * std::size_t(row);
            if (out.labels[i] != 0) continue;
            std::int32_t value = labels[i];
            ++out.count;
            out.labels[i] = out.count;
            stack.push_back(i);
            while (!stack.empty()) {
                std::size_t p = stack.back();
                stack.pop_back();
                int r = int(p / std::size_t(na));
                int c = int(p % std::size_t(na));
                const int dr[4] = {-1, 1, 0, 0};
                const int dc[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    int rr = r + dr[k], cc = c + dc[k];
                    if (rr < 0 || rr >= nb || cc < 0 || cc >= na) continue;
                    std::size_t q = std::size_t(cc) + std::size_t(na) * std::size_t(rr);
                    if (out.labels[q] == 0 && labels[q] == value) {
                        out.labels[q] = out.count;
                        stack.push_back(q);
                    }
                }
            }
        }
    }
    return out;
}

std::optional<Rect2D> bounding_rect(const Mask2D& mask) {
    Rect2D r{mask.nb, -1, mask.na, -1};
    for (int row = 0; row < mask.nb; ++row) {
        for (int col = 0; col < mask.na; ++col) {
            if (mask.at(row, col) == 0) continue;
            r.row_min = std::min(r.row_min, row);
            r.row_max = std::max(r.row_max, row);
            r.col_min = std::min(r.col_min, col);
            r.col_max = std::max(r.col_max, col);
        }
    }
    if (r.row_max < 0) return std::nullopt;
    return r;
}

void mask_or(MaskVolume& dst, const MaskVolume& src) {
    if (!(dst.dims == src.dims))
        throw std::invalid_argument("mask_or: dims mismatch");
    for (std::size_t i = 0; i < dst.data.size(); ++i)
        dst.data[i] = (dst.data[i] | src.data[i]) ? 1 : 0;
}

Mask2D filled_rect(int na, int nb, const Rect2D& r) {
    Mask2D out(na, nb);
    for (int row = r.row_min; row <= r.row_max; ++row)
        for (int col = r.col_min; col <= r.col_max; ++col)
            out.at(row, col) = 1;
    return out;
}

} // namespace weakseg
