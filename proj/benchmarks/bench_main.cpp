#include <benchmark/benchmark.h>

#include "weakseg/annotation.hpp"
#include "weakseg/atlas_qc.hpp"
#include "weakseg/fusion.hpp"
#include "weakseg/phantom.hpp"
#include "weakseg/rng.hpp"

using namespace weakseg;

namespace {

SubjectRecord bench_subject(int dim) {
    PhantomSpec spec = default_phantom_spec();
    double scale = double(dim) / 64.0;
    spec.dims = {dim, dim, dim};
    for (auto& o : spec.organs) {
        for (auto& c : o.center) c *= scale;
        for (auto& r : o.radii) r *= scale;
        for (auto& sat : o.satellites) {
            for (auto& off : sat.offset) off *= scale;
            sat.radius *= scale;
        }
    }
    return generate_phantom(spec, 7);
}

void BM_GeneratePhantom(benchmark::State& state) {
    PhantomSpec spec = default_phantom_spec();
    std::uint64_t seed = 0;
    for (auto _ : state) {
        SubjectRecord s = generate_phantom(spec, seed++);
        benchmark::DoNotOptimize(s.volume.data.data());
    }
}
BENCHMARK(BM_GeneratePhantom)->Unit(benchmark::kMillisecond);

void BM_SolveBinary(benchmark::State& state) {
    const int dim = int(state.range(0));
    SubjectRecord s = bench_subject(dim);
    AnnotationPlan plan;
    plan.type = AnnotationType::SCRR;
    plan.ar = 0.25;
    simulate_annotations(s, plan);
    SolverConfig cfg;
    cfg.alpha = 4.0;
    for (auto _ : state) {
        SegmentationResult r = segment_weak(s, cfg);
        benchmark::DoNotOptimize(r.mask.data.data());
    }
}
BENCHMARK(BM_SolveBinary)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Presegmentation(benchmark::State& state) {
    SubjectRecord s = bench_subject(int(state.range(0)));
    for (auto _ : state) {
        Presegmentation p = compute_presegmentation(s.volume, 16, 0.05);
        benchmark::DoNotOptimize(p.maps[0].data());
    }
}
BENCHMARK(BM_Presegmentation)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DiceVolume(benchmark::State& state) {
    SubjectRecord s = bench_subject(64);
    const MaskVolume& a = s.target_mask();
    MaskVolume b = a;
    b.data[0] ^= 1;
    for (auto _ : state) benchmark::DoNotOptimize(dice(a, b));
}
BENCHMARK(BM_DiceVolume);

void BM_FilterDatabase(benchmark::State& state) {
    PhantomSpec spec = default_phantom_spec();
    AtlasDatabase db = generate_cohort(spec, 10, 5);
    AnnotationPlan plan;
    plan.type = AnnotationType::SCBD;
    plan.err = 0.25;
    plan.seed = 9;
    for (auto& subject : db.subjects) simulate_annotations(subject, plan);
    QCConfig qc;
    NeighborCache cache = build_neighbor_cache(db);
    for (auto _ : state) {
        FilterResult r = filter_database(db, qc, 1, &cache);
        benchmark::DoNotOptimize(r.report.data());
    }
}
BENCHMARK(BM_FilterDatabase)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
