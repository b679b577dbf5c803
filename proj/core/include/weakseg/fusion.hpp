#ifndef WEAKSEG_FUSION_HPP
#define WEAKSEG_FUSION_HPP

#include <array>

#include "weakseg/annotation.hpp"
#include "weakseg/maxflow.hpp"
#include "weakseg/volume.hpp"

namespace weakseg {

// Fused volume priors. sc_vol is the union of all scribble stacks, a_vol the
// union of all companion (BD/RR/PS) annotation stacks, u_vol the voxels that
// lie on no annotated slice of any direction. s_fg/s_bg are the foreground and
// background sample sets; on conflicting (corrupted) input the foreground
// wins, so s_fg and s_bg are always disjoint.
struct PriorVolumes {
    MaskVolume sc_vol;
    MaskVolume a_vol;
    MaskVolume u_vol;
    MaskVolume s_fg;
    MaskVolume s_bg;
};

PriorVolumes fuse_annotations(const std::vector<SliceAnnotation>& annotations,
                              const Dims3& dims);

// Normalized 256-bin intensity histogram over the volume's intensity range,
// floored at eps and renormalized.
struct IntensityModel {
    static constexpr int kBins = 256;
    static constexpr double kEps = 1e-8;

    double lo = 0.0;
    double hi = 0.0;
    std::array<double, kBins> p{};

    int bin(double intensity) const {
        if (!(hi > lo)) return 0;
        int b = int((intensity - lo) / (hi - lo) * kBins);
        return b < 0 ? 0 : (b >= kBins ? kBins - 1 : b);
    }
    double prob(double intensity) const { return p[std::size_t(bin(intensity))]; }
};

// Throws std::invalid_argument when `samples` is empty (no model can be
// built; callers report a failed case instead).
IntensityModel build_intensity_model(const VolumeGrid& vol, const MaskVolume& samples);

// Negative log-likelihood data terms from the two intensity models, with the
// annotated regions forced to zero cost on their own side: ds = 0 on s_fg,
// dt = 0 on s_bg.
CostField build_cost_field(const VolumeGrid& vol, const IntensityModel& fg,
                           const IntensityModel& bg, const PriorVolumes& priors);

struct SegmentationResult {
    MaskVolume mask;
    bool failed = false; // empty foreground or background sample set
    ConvergenceReport report;
};

// Full weakly-supervised pipeline for an annotated subject: fuse the
// annotations, build the intensity models and cost field, run the binary
// max-flow solver and threshold at 0.5. A subject whose fused samples leave
// either model without voxels is returned as a failed case with an empty
// mask.
SegmentationResult segment_weak(const SubjectRecord& subject, const SolverConfig& cfg);

} // namespace weakseg

#endif
