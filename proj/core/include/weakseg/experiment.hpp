#ifndef WEAKSEG_EXPERIMENT_HPP
#define WEAKSEG_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "weakseg/atlas_qc.hpp"
#include "weakseg/fusion.hpp"
#include "weakseg/phantom.hpp"
#include "weakseg/stats.hpp"

namespace weakseg {

// Full sweep description. Parsed from / serialized to a line-oriented
// `key = value` config file (see parse_experiment_config).
struct ExperimentConfig {
    std::vector<double> ar_set{1.0, 0.5, 0.33, 0.25, 0.1, 0.05, 0.01};
    std::vector<double> err_set{0.0, 0.05, 0.1, 0.25, 0.5};
    std::vector<AnnotationType> types{AnnotationType::SCBD, AnnotationType::SCRR,
                                      AnnotationType::SCPS};
    PhantomSpec phantom = default_phantom_spec();
    int cohort_count = 30;
    std::uint64_t seed = 1234;

    SolverConfig solver{.alpha = 4.0};
    int potts_labels = 16;
    double alpha_potts = 0.05;
    QCConfig qc{};
    double sc_max_area_fraction = 0.15;
    int bd_splits = 4;

    unsigned threads = 0; // 0 = hardware concurrency
    std::string out_dir = "out";

    void validate() const;
    unsigned effective_threads() const;
};

// CI-sized profile: first 3 annotation rates, first 2 error rates, 5 subjects.
ExperimentConfig smoke_profile(ExperimentConfig cfg);

// One grid cell's accuracy summary; case_dsc holds the per-subject scores
// (failed cases enter as 0) for pairing across runs.
struct CellStats {
    AnnotationType type = AnnotationType::SCBD;
    double ar = 1.0;
    double err = 0.0;
    double mean_dsc = 0.0;
    double sd_dsc = 0.0;
    int failures = 0;
    int n = 0;
    std::vector<double> case_dsc;
};

// Accuracy over every (type, AR, ERR) cell of the config, cells ordered
// type-major, then AR, then ERR.
struct AccuracyMatrix {
    bool corrected = false;
    std::vector<CellStats> cells;
};

struct SignificanceCell {
    AnnotationType type;
    double ar = 1.0;
    double err = 0.0;
    TTestResult test;
    char direction = '0'; // '+'/'-' when p < 0.05, else '0'
};

// The generated cohort plus the caches that are annotation-independent (Potts
// pre-segmentations live on the subjects, image-similarity rankings here), so
// several grid runs over the same cohort share the expensive parts.
struct CohortContext {
    AtlasDatabase cohort;
    NeighborCache neighbors;
    bool neighbors_built = false;
};
CohortContext build_cohort_context(const ExperimentConfig& cfg);

// Runs the sweep: for every cell and subject, simulate annotations, optionally
// filter the cell's annotated database through the outlier QC, segment, and
// score Dice against ground truth. Deterministic for a given config: each
// cell's annotation seed derives from (seed, type, ar, err) only, so
// sub-grids reproduce the corresponding cells of the full grid and corrected
// and raw runs are paired case by case.
AccuracyMatrix run_grid(const ExperimentConfig& cfg, bool corrected);

// As run_grid, but reusing a previously built context; ctx must come from a
// config with the same phantom, cohort_count and seed.
AccuracyMatrix run_grid_with(const ExperimentConfig& cfg, bool corrected, CohortContext& ctx);

// Paired t-tests per cell between corrected and raw case scores.
std::vector<SignificanceCell> significance_tests(const ExperimentConfig& cfg,
                                                 const AccuracyMatrix& corrected,
                                                 const AccuracyMatrix& raw);

// Writes, per annotation type:
//   accuracy_<type>_<raw|corrected>.csv  header ar,err,mean_dsc,sd_dsc,failures,n
//   accuracy_<type>_<raw|corrected>.pgm  8-bit graymap, rows = ERR, cols = AR,
//                                        pixel = round(255 * mean DSC)
//   significance_<type>.csv              header ar,err,t,p,direction
// The significance files always exist; they carry rows only when tests are
// provided.
void emit_reports(const ExperimentConfig& cfg, const std::vector<AccuracyMatrix>& matrices,
                  const std::vector<SignificanceCell>& tests,
                  const std::filesystem::path& out_dir);

// `weakseg run`: raw grid always; with corrected=true also the QC-corrected
// grid plus the per-cell significance tests.
void run_experiment(const ExperimentConfig& cfg, bool corrected);

// --- config file ----------------------------------------------------------------

// Line-oriented `key = value` text; '#' starts a comment. Unknown keys are an
// error. Lists are comma-separated. Keys: ar_set, err_set, types,
// cohort_count, dims, seed, alpha, alpha_potts, n_labels, n_similar,
// n_iterations, sc_fraction, bd_splits, solver_max_iterations,
// solver_tolerance, threads, out.
ExperimentConfig parse_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config_text(const std::string& text);
std::string serialize_experiment_config(const ExperimentConfig& cfg);

} // namespace weakseg

#endif
