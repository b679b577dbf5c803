#include "weakseg/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace weakseg {

namespace {

void or_slice(MaskVolume& vol, int direction, int index, const Mask2D& mask) {
    Mask2D existing = extract_slice(vol, direction, index);
    if (existing.na != mask.na || existing.nb != mask.nb)
        throw std::invalid_argument("fuse_annotations: annotation dims do not match volume");
    for (std::size_t i = 0; i < existing.data.size(); ++i)
        existing.data[i] = (existing.data[i] | mask.data[i]) ? 1 : 0;
    insert_slice(vol, direction, index, existing);
}

} // namespace

PriorVolumes fuse_annotations(const std::vector<SliceAnnotation>& annotations,
                              const Dims3& dims) {
    PriorVolumes out;
    out.sc_vol = MaskVolume(dims);
    out.a_vol = MaskVolume(dims);

    std::array<std::vector<std::uint8_t>, 3> annotated;
    for (int d = 0; d < 3; ++d)
        annotated[std::size_t(d)].assign(std::size_t(dims.extent(d)), 0);

    for (const auto& ann : annotations) {
        if (ann.direction < 0 || ann.direction > 2 || ann.index < 0 ||
            ann.index >= dims.extent(ann.direction))
            throw std::invalid_argument("fuse_annotations: annotation address out of range");
        annotated[std::size_t(ann.direction)][std::size_t(ann.index)] = 1;
        if (!ann.mask) continue;
        if (ann.kind == AnnotationKind::SC)
            or_slice(out.sc_vol, ann.direction, ann.index, *ann.mask);
        else
            or_slice(out.a_vol, ann.direction, ann.index, *ann.mask);
    }

    // u_vol: never shown to the user in any direction.
    out.u_vol = MaskVolume(dims);
    std::size_t i = 0;
    for (int z = 0; z < dims.nz; ++z) {
        bool uz = annotated[2][std::size_t(z)] == 0;
        for (int y = 0; y < dims.ny; ++y) {
            bool uy = annotated[1][std::size_t(y)] == 0;
            for (int x = 0; x < dims.nx; ++x, ++i)
                out.u_vol.data[i] = (uz && uy && annotated[0][std::size_t(x)] == 0) ? 1 : 0;
        }
    }

    out.s_fg = out.sc_vol;
    out.s_bg = MaskVolume(dims);
    for (std::size_t v = 0; v < out.s_bg.data.size(); ++v)
        out.s_bg.data[v] =
            (!out.a_vol.data[v] && !out.u_vol.data[v] && !out.s_fg.data[v]) ? 1 : 0;
    return out;
}

IntensityModel build_intensity_model(const VolumeGrid& vol, const MaskVolume& samples) {
    if (!(vol.dims == samples.dims))
        throw std::invalid_argument("build_intensity_model: dims mismatch");
    if (samples.empty_mask())
        throw std::invalid_argument("build_intensity_model: empty sample set");

    IntensityModel m;
    auto [mn_it, mx_it] = std::minmax_element(vol.data.begin(), vol.data.end());
    m.lo = *mn_it;
    m.hi = *mx_it;

    std::array<std::size_t, IntensityModel::kBins> counts{};
    std::size_t total = 0;
    for (std::size_t i = 0; i < vol.data.size(); ++i) {
        if (!samples.data[i]) continue;
        ++counts[std::size_t(m.bin(vol.data[i]))];
        ++total;
    }

    // Floor at eps, then distribute the remaining mass over the non-floored
    // bins; iterate in case the scaling pushes further bins under the floor.
    const double eps = IntensityModel::kEps;
    std::array<bool, IntensityModel::kBins> floored{};
    for (;;) {
        double free_mass = 1.0;
        double free_raw = 0.0;
        int n_floored = 0;
        for (int b = 0; b < IntensityModel::kBins; ++b) {
            if (floored[std::size_t(b)]) { ++n_floored; continue; }
            free_raw += double(counts[std::size_t(b)]) / double(total);
        }
        free_mass -= double(n_floored) * eps;
        bool changed = false;
        for (int b = 0; b < IntensityModel::kBins; ++b) {
            if (floored[std::size_t(b)]) { m.p[std::size_t(b)] = eps; continue; }
            double share = free_raw > 0.0
                               ? double(counts[std::size_t(b)]) / double(total) / free_raw * free_mass
                               : 0.0;
            if (share < eps) {
                floored[std::size_t(b)] = true;
                changed = true;
            } else {
                m.p[std::size_t(b)] = share;
            }
        }
        if (!changed) break;
    }
    return m;
}

CostField build_cost_field(const VolumeGrid& vol, const IntensityModel& fg,
                           const IntensityModel& bg, const PriorVolumes& priors) {
    CostField cost(vol.dims);
    for (std::size_t i = 0; i < vol.data.size(); ++i) {
        double intensity = vol.data[i];
        cost.ds[i] = priors.s_fg.data[i] ? 0.0f : float(-std::log(fg.prob(intensity)));
        cost.dt[i] = priors.s_bg.data[i] ? 0.0f : float(-std::log(bg.prob(intensity)));
    }
    return cost;
}

SegmentationResult segment_weak(const SubjectRecord& subject, const SolverConfig& cfg) {
    SegmentationResult out;
    PriorVolumes priors = fuse_annotations(subject.annotations, subject.volume.dims);
    if (priors.s_fg.empty_mask() || priors.s_bg.empty_mask()) {
        out.mask = MaskVolume(subject.volume.dims);
        out.failed = true;
        return out;
    }
    IntensityModel fg = build_intensity_model(subject.volume, priors.s_fg);
    IntensityModel bg = build_intensity_model(subject.volume, priors.s_bg);
    CostField cost = build_cost_field(subject.volume, fg, bg, priors);
    BinarySolveResult solved = solve_binary(cost, cfg);
    out.mask = threshold_labels(solved.labels);
    out.report = solved.report;
    return out;
}

} // namespace weakseg
