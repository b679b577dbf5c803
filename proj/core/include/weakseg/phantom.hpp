#ifndef WEAKSEG_PHANTOM_HPP
#define WEAKSEG_PHANTOM_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "weakseg/atlas_qc.hpp"

namespace weakseg {

// Intensity-only blob attached to an organ (offset relative to the organ
// center). Satellites share the organ's intensity distribution but are not
// part of its ground-truth mask; they give the cohort structures that weak
// annotations handle differently depending on how tightly they hug the organ.
struct SatelliteSpec {
    std::array<double, 3> offset{};
    double radius = 0.0;
};

struct OrganSpec {
    std::string name;
    std::array<double, 3> center{};
    std::array<double, 3> radii{};
    double intensity = 0.0;
    double sigma = 0.0;
    double center_jitter = 0.25;  // uniform +/- voxels per axis, per subject
    double radius_jitter = 0.01;  // multiplicative uniform +/- fraction
    std::vector<SatelliteSpec> satellites;
};

struct PhantomSpec {
    Dims3 dims{64, 64, 64};
    double background_mean = 40.0;
    double background_sigma = 3.0;
    std::vector<OrganSpec> organs;
    std::size_t target = 0;
    int max_placement_retries = 32;

    void validate() const;
};

// Realized per-subject pose after jitter, recorded in cohort manifests.
struct RealizedPose {
    std::string organ;
    std::array<double, 3> center{};
    std::array<double, 3> radii{};
};

// The default multi-organ phantom used by the experiment harness: a large
// central target with two attached satellites, plus three distractor organs
// with distinct intensities placed so that together the organs span almost
// every slice index of every direction.
PhantomSpec default_phantom_spec();

// Deterministic phantom for (spec, subject_seed): jittered ellipsoid organs
// on a noisy background, exact ground-truth masks, organs pairwise disjoint
// with a one-voxel gap (poses are re-sampled on collision, bounded retries).
SubjectRecord generate_phantom(const PhantomSpec& spec, std::uint64_t subject_seed,
                               std::vector<RealizedPose>* poses = nullptr);

struct CohortPoses {
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<RealizedPose>> organs;
};

// `count` subjects with per-subject seeds split from the master seed.
AtlasDatabase generate_cohort(const PhantomSpec& spec, int count, std::uint64_t master_seed,
                              CohortPoses* poses = nullptr);

// --- cohort persistence -------------------------------------------------------

// Directory layout written by gen-cohort:
//
//   DIR/cohort.txt          text manifest: count, dims, master seed, then per
//                           subject a `subject <id> seed <seed>` line and one
//                           `organ <id> <name> <cx> <cy> <cz> <rx> <ry> <rz>`
//                           line per organ
//   DIR/subj_NNN/subject.txt  per-subject manifest (image, target, organs)
//   DIR/subj_NNN/image.mhd|.raw and organ_<name>.mhd|.raw volumes
void write_cohort_dir(const std::filesystem::path& dir, const AtlasDatabase& db,
                      const CohortPoses& poses, std::uint64_t master_seed);
AtlasDatabase read_cohort_dir(const std::filesystem::path& dir);

// Single-subject manifest used by `weakseg segment`.
SubjectRecord read_subject_manifest(const std::filesystem::path& manifest_path);

} // namespace weakseg

#endif
