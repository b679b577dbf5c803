#ifndef WEAKSEG_ANNOTATION_HPP
#define WEAKSEG_ANNOTATION_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "weakseg/maxflow.hpp"
#include "weakseg/volume.hpp"

namespace weakseg {

// The weak annotation drawn on a slice. NotVisible is a recorded "nothing
// here" answer; Unannotated states only appear in reports (an unannotated
// slice simply has no record).
enum class AnnotationKind : std::uint8_t { SC, BD, RR, PS, NotVisible, Unannotated };

// Which companion annotation accompanies the foreground scribble.
enum class AnnotationType : std::uint8_t { SCOnly, SCBD, SCRR, SCPS };

const char* to_string(AnnotationKind k);
const char* to_string(AnnotationType t);
std::optional<AnnotationKind> annotation_kind_from_string(const std::string& s);
std::optional<AnnotationType> annotation_type_from_string(const std::string& s);

// Simulation parameters for one annotated subject.
struct AnnotationPlan {
    double ar = 1.0;                  // annotation rate in (0,1]
    double err = 0.0;                 // per-slice misidentification probability
    AnnotationType type = AnnotationType::SCRR;
    int bd_splits = 4;                // ds: grid splits per image dimension
    double sc_max_area_fraction = 0.15;
    std::uint64_t seed = 0;

    // Every k-th slice is annotated; rounding reproduces the intended strides
    // for rates like 0.33.
    int stride() const;
    void validate() const;
};

// One weak annotation on one slice of one direction. `corrupted` is
// simulation provenance only; nothing downstream reads it except the quality
// scoring in reports.
struct SliceAnnotation {
    int direction = 0;
    int index = 0;
    AnnotationKind kind = AnnotationKind::NotVisible;
    bool corrupted = false;
    std::optional<Mask2D> mask;

    bool operator==(const SliceAnnotation&) const = default;
};

struct OrganMask {
    std::string name;
    MaskVolume mask;
};

// Per-slice component maps of the intensity pre-segmentation, for all three
// directions.
struct Presegmentation {
    Dims3 dims;
    std::array<std::vector<ComponentMap>, 3> maps; // maps[direction][index]

    const ComponentMap& at(int direction, int index) const {
        return maps[std::size_t(direction)][std::size_t(index)];
    }
};

// One subject: image, expert organ masks (organs[target] is the structure
// being segmented, the rest are distractors) and the simulated annotations.
struct SubjectRecord {
    int id = 0;
    VolumeGrid volume;
    std::vector<OrganMask> organs;
    std::size_t target = 0;
    std::vector<SliceAnnotation> annotations;
    std::shared_ptr<const Presegmentation> preseg; // cached, PS plans only

    const MaskVolume& target_mask() const { return organs[target].mask; }
};

// --- slice schedule ----------------------------------------------------------

// Annotated slice addresses for a plan: indices {0, k, 2k, ...} in each of the
// three directions. Each (direction, index) appears exactly once.
std::vector<std::pair<int, int>> select_slices(const AnnotationPlan& plan, const Dims3& dims);

// --- per-slice simulators -----------------------------------------------------

// Scribble: iterated erosion of the object mask until the area drops to the
// requested fraction, keeping the last non-empty mask. Empty input yields
// NotVisible.
SliceAnnotation simulate_sc(const Mask2D& m, double max_area_fraction);

// Binary decisions: union of the ds x ds grid cells that intersect the object
// (remainder pixels belong to the last row/column of cells).
SliceAnnotation simulate_bd(const Mask2D& m, int ds);

// Rectangular region: the filled tight bounding box of the object.
SliceAnnotation simulate_rr(const Mask2D& m);

// Pre-segmentation merge: union of the components that intersect the object.
SliceAnnotation simulate_ps(const Mask2D& m, const ComponentMap& components);

// --- pre-segmentation ---------------------------------------------------------

// Argmax label map of the multi-region intensity segmentation: costs are L1
// distances to the n_labels most frequent intensities of the volume's 256-bin
// histogram (ties toward the lower bin).
std::vector<std::int32_t> intensity_label_map(const VolumeGrid& vol, int n_labels = 16,
                                              double alpha_potts = 0.05);

// The label map above followed by per-slice 4-connected component analysis in
// every direction.
Presegmentation compute_presegmentation(const VolumeGrid& vol, int n_labels = 16,
                                        double alpha_potts = 0.05);

// Computes and caches the pre-segmentation on the subject if absent.
void ensure_presegmentation(SubjectRecord& subject, int n_labels = 16,
                            double alpha_potts = 0.05);

// --- subject-level simulation ---------------------------------------------------

// Clean (error-free) annotation of every scheduled slice: a scribble plus the
// plan's companion annotation where the target is visible, a NotVisible
// record where it is not.
void annotate_subject(SubjectRecord& subject, const AnnotationPlan& plan);

// Corruption pass: each annotated slice is independently corrupted with
// probability plan.err. A corrupted slice is re-annotated with the same
// simulators from a distractor organ visible in that slice (chosen uniformly),
// or recorded as NotVisible when no distractor is visible there. The RNG is
// split per (seed, subject, direction, index), so results do not depend on
// evaluation order.
void apply_error_model(SubjectRecord& subject, const AnnotationPlan& plan);

// annotate_subject followed by apply_error_model.
void simulate_annotations(SubjectRecord& subject, const AnnotationPlan& plan);

// --- manifest I/O ---------------------------------------------------------------

// Line-oriented annotation manifest. Grammar (single spaces, one record per
// line; a slice carries one SC line plus one companion line, or a single NV
// line):
//
//   WSANN 1
//   subject <id>
//   dims <nx> <ny> <nz>
//   records <count>
//   ann <direction> <index> <SC|BD|RR|PS|NV> <corrupted:0|1> [<na> <nb> <runs...>]
//
// Masks are run-length encoded over the row-major pixel order as alternating
// run lengths, the first run counting zeros (possibly 0).
struct AnnotationManifest {
    int subject_id = 0;
    Dims3 dims;
    std::vector<SliceAnnotation> annotations;
};

void write_annotation_manifest(const std::filesystem::path& path, int subject_id,
                               const Dims3& dims,
                               const std::vector<SliceAnnotation>& annotations);
AnnotationManifest read_annotation_manifest(const std::filesystem::path& path);

} // namespace weakseg

#endif
