// Command-line front end: cohort generation, experiment sweeps, annotation
// quality control and single-subject segmentation.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "weakseg/experiment.hpp"
#include "weakseg/parallel.hpp"
#include "weakseg/volume_io.hpp"

namespace {

weakseg::AnnotationType parse_type_or_throw(const std::string& s) {
    auto t = weakseg::annotation_type_from_string(s);
    if (!t || *t == weakseg::AnnotationType::SCOnly)
        throw std::runtime_error("unknown annotation type '" + s + "' (expected bd, rr or ps)");
    return *t;
}

int run_gen_cohort(int count, const std::string& dims_str, std::uint64_t seed,
                   const std::string& out_dir) {
    weakseg::PhantomSpec spec = weakseg::default_phantom_spec();
    if (!dims_str.empty()) {
        int nx = 0, ny = 0, nz = 0;
        if (std::sscanf(dims_str.c_str(), "%d,%d,%d", &nx, &ny, &nz) != 3)
            throw std::runtime_error("--dims expects X,Y,Z");
        spec.dims = {nx, ny, nz};
    }
    weakseg::CohortPoses poses;
    weakseg::AtlasDatabase db = weakseg::generate_cohort(spec, count, seed, &poses);
    weakseg::write_cohort_dir(out_dir, db, poses, seed);
    std::printf("wrote %d subjects to %s\n", count, out_dir.c_str());
    return 0;
}

int run_run(const std::string& config_path, bool corrected, bool smoke,
            const std::string& out_override) {
    weakseg::ExperimentConfig cfg = weakseg::parse_experiment_config(config_path);
    if (smoke) cfg = weakseg::smoke_profile(cfg);
    if (!out_override.empty()) cfg.out_dir = out_override;
    weakseg::run_experiment(cfg, corrected);
    std::printf("reports written to %s\n", cfg.out_dir.c_str());
    return 0;
}

int run_qc(const std::string& db_dir, const std::string& report_path,
           const std::string& type_str, double ar, double err, std::uint64_t seed) {
    weakseg::AtlasDatabase db = weakseg::read_cohort_dir(db_dir);

    weakseg::AnnotationPlan plan;
    plan.type = parse_type_or_throw(type_str);
    plan.ar = ar;
    plan.err = err;
    plan.seed = seed;
    for (auto& subject : db.subjects)
        weakseg::simulate_annotations(subject, plan);

    weakseg::QCConfig qc;
    weakseg::FilterResult result =
        weakseg::filter_database(db, qc, weakseg::default_thread_count());
    weakseg::write_qc_report(report_path, result.report);

    std::size_t rejected = 0;
    for (const auto& r : result.report) rejected += r.rejected;
    std::printf("classified %zu annotated slices, rejected %zu; report: %s\n",
                result.report.size(), rejected, report_path.c_str());
    return 0;
}

int run_segment(const std::string& subject_path, const std::string& type_str, double ar,
                double err, std::uint64_t seed, const std::string& out_path,
                const std::string& dump_annotations) {
    weakseg::SubjectRecord subject = weakseg::read_subject_manifest(subject_path);

    weakseg::AnnotationPlan plan;
    plan.type = parse_type_or_throw(type_str);
    plan.ar = ar;
    plan.err = err;
    plan.seed = seed;
    weakseg::simulate_annotations(subject, plan);
    if (!dump_annotations.empty())
        weakseg::write_annotation_manifest(dump_annotations, subject.id,
                                           subject.volume.dims, subject.annotations);

    weakseg::SolverConfig solver;
    solver.alpha = 4.0;
    weakseg::SegmentationResult result = weakseg::segment_weak(subject, solver);
    weakseg::write_mask(out_path, result.mask);
    if (result.failed) {
        std::fprintf(stderr, "segmentation failed (empty sample set); wrote empty mask\n");
        return 2;
    }
    double dsc = weakseg::dice(result.mask, subject.target_mask());
    std::printf("segmented %s: dice=%.4f iterations=%d residual=%.2e\n",
                subject_path.c_str(), dsc, result.report.iterations, result.report.residual);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"weakseg: weak-annotation segmentation experiments"};
    app.require_subcommand(1);

    // gen-cohort
    auto* gen = app.add_subcommand("gen-cohort", "generate a phantom cohort on disk");
    int count = 30;
    std::string dims_str;
    std::uint64_t gen_seed = 1234;
    std::string gen_out = "cohort";
    gen->add_option("--count", count, "number of subjects");
    gen->add_option("--dims", dims_str, "volume dims as X,Y,Z (default 64,64,64)");
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--out", gen_out, "output directory")->required();

    // run
    auto* run = app.add_subcommand("run", "run the AR x ERR experiment grid");
    std::string config_path;
    bool corrected = false, raw = false, smoke = false;
    std::string run_out;
    run->add_option("--config", config_path, "experiment config file")->required();
    run->add_flag("--corrected", corrected, "include outlier-corrected grid and t-tests");
    run->add_flag("--raw", raw, "raw grid only (default)");
    run->add_flag("--smoke", smoke, "CI-sized profile: 3 ARs x 2 ERRs x 5 subjects");
    run->add_option("--out", run_out, "override output directory");

    // qc
    auto* qc = app.add_subcommand("qc", "classify a cohort's annotations");
    std::string db_dir, report_path;
    std::string qc_type = "bd";
    double qc_ar = 1.0, qc_err = 0.25;
    std::uint64_t qc_seed = 1234;
    qc->add_option("--db", db_dir, "cohort directory (from gen-cohort)")->required();
    qc->add_option("--report", report_path, "rejection report CSV path")->required();
    qc->add_option("--type", qc_type, "annotation type: bd|rr|ps");
    qc->add_option("--ar", qc_ar, "annotation rate");
    qc->add_option("--err", qc_err, "error rate");
    qc->add_option("--seed", qc_seed, "annotation seed");

    // segment
    auto* seg = app.add_subcommand("segment", "segment one subject from weak annotations");
    std::string subject_path, seg_type = "rr", seg_out, dump_annotations;
    double seg_ar = 1.0, seg_err = 0.0;
    std::uint64_t seg_seed = 1234;
    seg->add_option("--subject", subject_path, "subject manifest (subject.txt)")->required();
    seg->add_option("--type", seg_type, "annotation type: rr|bd|ps")->required();
    seg->add_option("--ar", seg_ar, "annotation rate")->required();
    seg->add_option("--err", seg_err, "error rate")->required();
    seg->add_option("--seed", seg_seed, "annotation seed");
    seg->add_option("--out", seg_out, "output mask header path (.mhd)")->required();
    seg->add_option("--dump-annotations", dump_annotations,
                    "also write the simulated annotation manifest here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen_cohort(count, dims_str, gen_seed, gen_out);
        if (run->parsed()) {
            if (corrected && raw)
                throw std::runtime_error("--corrected and --raw are mutually exclusive");
            return run_run(config_path, corrected, smoke, run_out);
        }
        if (qc->parsed()) return run_qc(db_dir, report_path, qc_type, qc_ar, qc_err, qc_seed);
        if (seg->parsed())
            return run_segment(subject_path, seg_type, seg_ar, seg_err, seg_seed, seg_out,
                               dump_annotations);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "weakseg: %s\n", e.what());
        return 1;
    }
    return 0;
}
