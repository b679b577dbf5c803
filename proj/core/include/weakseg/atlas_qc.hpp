#ifndef WEAKSEG_ATLAS_QC_HPP
#define WEAKSEG_ATLAS_QC_HPP

#include <filesystem>
#include <optional>
#include <vector>

#include "weakseg/annotation.hpp"
#include "weakseg/volume.hpp"

namespace weakseg {

// The weakly labelled atlas: the annotated cohort itself. All subjects share
// dims (the phantoms are generated in a common space).
struct AtlasDatabase {
    std::vector<SubjectRecord> subjects;

    Dims3 dims() const { return subjects.empty() ? Dims3{} : subjects.front().volume.dims; }
};

struct QCConfig {
    int n_similar = 30;
    int n_iterations = 2;
    double consensus_threshold = 0.5;

    void validate() const;
};

// --- Dice similarity coefficient ---------------------------------------------

// 2*|A n B| / (|A| + |B|); two empty masks score 1 by convention. Throws on
// dims mismatch.
double dice(const Mask2D& a, const Mask2D& b);
double dice(const MaskVolume& a, const MaskVolume& b);

// --- slice units ---------------------------------------------------------------

// A subject's annotation of one slice, reduced to the single mask the QC
// compares: the companion (BD/RR/PS) annotation when present, otherwise the
// scribble, otherwise the empty mask of a NotVisible answer.
struct SliceUnit {
    int direction = 0;
    int index = 0;
    AnnotationKind kind = AnnotationKind::NotVisible; // representative kind
    bool corrupted = false;
    Mask2D mask; // empty for NotVisible
};

// The unit at (direction, index), or nullopt when the slice is unannotated.
std::optional<SliceUnit> slice_unit(const SubjectRecord& subject, int direction, int index);

// --- retrieval -------------------------------------------------------------------

// Sum-of-squared-differences ranking of the spatially corresponding image
// slices of all other subjects, cheapest first, ties broken by subject index.
// Annotation-independent, so it can be computed once per cohort and reused
// across experiment cells.
struct NeighborCache {
    // ranked[d][index][query] = subject indices ordered by SSD.
    std::array<std::vector<std::vector<std::vector<int>>>, 3> ranked;
};
NeighborCache build_neighbor_cache(const AtlasDatabase& db);

// The n most similar annotated slices (same direction and index, other
// subjects); fewer when the database is small. Returned as subject indices.
std::vector<int> retrieve_similar(const AtlasDatabase& db, int query_subject,
                                  int direction, int index, int n,
                                  const NeighborCache* cache = nullptr);

// --- fusion and outlier detection -------------------------------------------------

// Mean label fusion thresholded at `threshold` (strict majority at 0.5).
// Throws on an empty list.
Mask2D consensus_fusion(const std::vector<const Mask2D*>& masks, double threshold);

struct OutlierDecision {
    bool outlier = false;
    double dice_vs_consensus = 1.0;
    double mu = 0.0; // mean member Dice of the final iteration
};

// Iteratively refined consensus check of one annotated slice against its most
// similar peers: starting from the SSD-ranked subset, each round fuses the
// members, scores every member against the fusion and keeps those at or above
// the mean. The query is an outlier when its Dice against the final consensus
// falls below the final mean. Slices without peers are kept.
OutlierDecision detect_outlier(const AtlasDatabase& db, int query_subject, int direction,
                               int index, const QCConfig& cfg,
                               const NeighborCache* cache = nullptr);

// --- database filtering --------------------------------------------------------------

struct RejectionRecord {
    int subject_id = 0;
    int direction = 0;
    int index = 0;
    AnnotationKind kind = AnnotationKind::NotVisible;
    bool corrupted = false;
    double dice_vs_consensus = 1.0;
    double mu = 0.0;
    bool rejected = false;
};

struct FilterResult {
    AtlasDatabase filtered;
    std::vector<RejectionRecord> report;
};

// Classifies every annotated slice of every subject against the original
// (unfiltered) database and removes the rejected ones; a rejected slice loses
// all its records and becomes unannotated. Decisions depend only on the input
// database, so they are order-independent and classification runs in
// parallel. Pass a precomputed NeighborCache to reuse the image rankings
// across calls on the same cohort.
FilterResult filter_database(const AtlasDatabase& db, const QCConfig& cfg,
                             unsigned n_threads = 1,
                             const NeighborCache* cache = nullptr);

// Rejection report CSV: one row per classified slice.
void write_qc_report(const std::filesystem::path& path,
                     const std::vector<RejectionRecord>& report);

} // namespace weakseg

#endif
