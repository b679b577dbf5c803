#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "weakseg/atlas_qc.hpp"
#include "weakseg/rng.hpp"

using namespace weakseg;

namespace {

Mask2D top_half(int na, int nb) {
    Mask2D m(na, nb);
    for (int r = 0; r < nb / 2; ++r)
        for (int c = 0; c < na; ++c) m.at(r, c) = 1;
    return m;
}

// Minimal subject whose only content is an annotation unit at (d=2, idx=0).
SubjectRecord annotated_subject(int id, Dims3 dims, std::optional<Mask2D> companion,
                                float image_fill = 1.0f) {
    SubjectRecord s;
    s.id = id;
    s.volume = VolumeGrid(dims, image_fill);
    s.organs.push_back({"target", MaskVolume(dims)});
    SliceAnnotation ann;
    ann.direction = 2;
    ann.index = 0;
    if (companion) {
        ann.kind = AnnotationKind::BD;
        ann.mask = std::move(companion);
    } else {
        ann.kind = AnnotationKind::NotVisible;
    }
    s.annotations.push_back(std::move(ann));
    return s;
}

} // namespace

TEST_CASE("dice formula") {
    Mask2D a(4, 4), b(4, 4);
    for (int c = 0; c < 4; ++c) a.at(0, c) = 1;
    CHECK(dice(a, a) == 1.0);

    for (int c = 0; c < 4; ++c) b.at(3, c) = 1;
    CHECK(dice(a, b) == 0.0);

    // |a|=4, |b|=4, overlap 2 -> 0.5
    Mask2D c4(4, 4), d4(4, 4);
    c4.at(0, 0) = c4.at(0, 1) = c4.at(0, 2) = c4.at(0, 3) = 1;
    d4.at(0, 2) = d4.at(0, 3) = d4.at(1, 0) = d4.at(1, 1) = 1;
    CHECK(dice(c4, d4) == 0.5);

    CHECK(dice(Mask2D(3, 3), Mask2D(3, 3)) == 1.0); // empty/empty convention
    CHECK_THROWS_AS(dice(Mask2D(3, 3), Mask2D(4, 3)), std::invalid_argument);
}

TEST_CASE("dice symmetry and volume overload") {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        Mask2D a(6, 6), b(6, 6);
        for (auto& px : a.data) px = rng.uniform() < 0.4 ? 1 : 0;
        for (auto& px : b.data) px = rng.uniform() < 0.4 ? 1 : 0;
        CHECK(dice(a, b) == dice(b, a));
        CHECK(dice(a, a) == 1.0);
    }
    MaskVolume v1({3, 3, 3}), v2({3, 3, 3});
    v1.at(0, 0, 0) = 1;
    v2.at(0, 0, 0) = 1;
    v2.at(1, 0, 0) = 1;
    CHECK(dice(v1, v2) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("consensus fusion thresholds") {
    Mask2D on(2, 2, 1), off(2, 2, 0);
    std::vector<const Mask2D*> three{&on, &on, &off};
    CHECK(consensus_fusion(three, 0.5).count() == 4); // 2/3 > 0.5

    std::vector<const Mask2D*> two{&on, &off};
    CHECK(consensus_fusion(two, 0.5).count() == 0); // tie is unset

    std::vector<const Mask2D*> same{&on, &on, &on};
    CHECK(consensus_fusion(same, 0.5) == on);

    std::vector<const Mask2D*> none;
    CHECK_THROWS_AS(consensus_fusion(none, 0.5), std::invalid_argument);
}

TEST_CASE("retrieve_similar ranks by SSD with deterministic ties") {
    Dims3 dims{4, 4, 2};
    AtlasDatabase db;
    // query has fill 10; candidates at distances |fill-10| per pixel
    const float fills[] = {10.0f, 10.0f, 12.0f, 11.0f, 20.0f, 11.0f};
    for (int i = 0; i < 6; ++i)
        db.subjects.push_back(annotated_subject(i, dims, top_half(4, 4), fills[i]));

    std::vector<int> got = retrieve_similar(db, 0, 2, 0, 10);
    // SSD: subj1=0, subj3=16, subj5=16, subj2=64, subj4=1600; tie 3<5
    CHECK(got == std::vector<int>{1, 3, 5, 2, 4});

    CHECK(retrieve_similar(db, 0, 2, 0, 2) == std::vector<int>{1, 3});

    // identical subject ranks first with SSD 0
    CHECK(got.front() == 1);
}

TEST_CASE("retrieve_similar skips unannotated subjects") {
    Dims3 dims{4, 4, 2};
    AtlasDatabase db;
    db.subjects.push_back(annotated_subject(0, dims, top_half(4, 4)));
    db.subjects.push_back(annotated_subject(1, dims, top_half(4, 4)));
    db.subjects.push_back(annotated_subject(2, dims, top_half(4, 4)));
    db.subjects[2].annotations.clear(); // unannotated
    CHECK(retrieve_similar(db, 0, 2, 0, 10) == std::vector<int>{1});
}

TEST_CASE("slice_unit picks the companion and represents NV as empty") {
    Dims3 dims{4, 4, 2};
    SubjectRecord s = annotated_subject(0, dims, top_half(4, 4));
    SliceAnnotation sc;
    sc.direction = 2;
    sc.index = 0;
    sc.kind = AnnotationKind::SC;
    sc.mask = Mask2D(4, 4);
    sc.mask->at(0, 0) = 1;
    s.annotations.push_back(sc);

    auto unit = slice_unit(s, 2, 0);
    REQUIRE(unit.has_value());
    CHECK(unit->kind == AnnotationKind::BD);
    CHECK(unit->mask == top_half(4, 4));

    SubjectRecord nv = annotated_subject(1, dims, std::nullopt);
    auto nv_unit = slice_unit(nv, 2, 0);
    REQUIRE(nv_unit.has_value());
    CHECK(nv_unit->kind == AnnotationKind::NotVisible);
    CHECK(nv_unit->mask.count() == 0);

    CHECK(!slice_unit(nv, 2, 1).has_value());
}

TEST_CASE("detect_outlier: unanimous agreement keeps the annotation") {
    Dims3 dims{6, 6, 2};
    AtlasDatabase db;
    for (int i = 0; i < 8; ++i)
        db.subjects.push_back(annotated_subject(i, dims, top_half(6, 6)));
    QCConfig cfg;
    cfg.n_similar = 30;
    OutlierDecision d = detect_outlier(db, 0, 2, 0, cfg);
    CHECK(!d.outlier);
    CHECK(d.dice_vs_consensus == 1.0);
    CHECK(d.mu == 1.0);
}

TEST_CASE("detect_outlier: disjoint from a unanimous consensus is rejected") {
    Dims3 dims{6, 6, 2};
    AtlasDatabase db;
    Mask2D bottom(6, 6);
    for (int r = 3; r < 6; ++r)
        for (int c = 0; c < 6; ++c) bottom.at(r, c) = 1;
    db.subjects.push_back(annotated_subject(0, dims, bottom));
    for (int i = 1; i < 9; ++i)
        db.subjects.push_back(annotated_subject(i, dims, top_half(6, 6)));
    QCConfig cfg;
    OutlierDecision d = detect_outlier(db, 0, 2, 0, cfg);
    CHECK(d.outlier);
    CHECK(d.dice_vs_consensus == 0.0);
}

TEST_CASE("detect_outlier: five-atlas hand trace") {
    // Members: three top-half masks, one full mask, one empty (NV).
    // Iteration 1: consensus = top half (4/5 votes); dices are
    // {1, 1, 1, 2*8/24=0.6667, 0}; mu1 = 0.73333; survivors = the three
    // top-half members. Iteration 2: consensus = top half, all dices 1,
    // mu2 = 1. A full-mask query scores 0.6667 < 1 -> outlier; a top-half
    // query scores 1 >= 1 -> kept.
    Dims3 dims{4, 4, 2};
    Mask2D full(4, 4, 1);
    AtlasDatabase db;
    db.subjects.push_back(annotated_subject(0, dims, full)); // query
    db.subjects.push_back(annotated_subject(1, dims, top_half(4, 4)));
    db.subjects.push_back(annotated_subject(2, dims, top_half(4, 4)));
    db.subjects.push_back(annotated_subject(3, dims, top_half(4, 4)));
    db.subjects.push_back(annotated_subject(4, dims, full));
    db.subjects.push_back(annotated_subject(5, dims, std::nullopt)); // NV

    QCConfig cfg;
    cfg.n_similar = 5;
    cfg.n_iterations = 2;
    OutlierDecision d = detect_outlier(db, 0, 2, 0, cfg);
    CHECK(d.mu == doctest::Approx(1.0));
    CHECK(d.dice_vs_consensus == doctest::Approx(2.0 * 8.0 / 24.0));
    CHECK(d.outlier);

    OutlierDecision kept = detect_outlier(db, 1, 2, 0, cfg);
    CHECK(!kept.outlier);
    CHECK(kept.dice_vs_consensus == doctest::Approx(1.0));
}

TEST_CASE("detect_outlier with no peers keeps the annotation") {
    Dims3 dims{4, 4, 2};
    AtlasDatabase db;
    db.subjects.push_back(annotated_subject(0, dims, top_half(4, 4)));
    QCConfig cfg;
    OutlierDecision d = detect_outlier(db, 0, 2, 0, cfg);
    CHECK(!d.outlier);
}

TEST_CASE("filter_database: identical annotations yield zero rejections") {
    Dims3 dims{6, 6, 2};
    AtlasDatabase db;
    for (int i = 0; i < 6; ++i)
        db.subjects.push_back(annotated_subject(i, dims, top_half(6, 6)));
    QCConfig cfg;
    FilterResult r = filter_database(db, cfg, 2);
    CHECK(r.report.size() == 6);
    for (const auto& rec : r.report) CHECK(!rec.rejected);
    for (const auto& s : r.filtered.subjects) CHECK(s.annotations.size() == 1);
}

TEST_CASE("filter_database: one gross outlier among near-identical peers") {
    Dims3 dims{6, 6, 2};
    AtlasDatabase db;
    Mask2D wrong(6, 6);
    wrong.at(5, 5) = 1;
    for (int i = 0; i < 12; ++i)
        db.subjects.push_back(annotated_subject(i, dims, i == 4 ? wrong : top_half(6, 6)));
    db.subjects[4].annotations[0].corrupted = true;

    QCConfig cfg;
    FilterResult r = filter_database(db, cfg, 2);
    int rejected = 0;
    for (const auto& rec : r.report) {
        if (rec.rejected) {
            ++rejected;
            CHECK(rec.subject_id == 4);
            CHECK(rec.corrupted);
        }
    }
    CHECK(rejected == 1);
    CHECK(r.filtered.subjects[4].annotations.empty()); // slice became unannotated
}

TEST_CASE("filter_database decisions are reproducible across runs and threads") {
    Dims3 dims{6, 6, 3};
    Rng rng(606);
    AtlasDatabase db;
    for (int i = 0; i < 10; ++i) {
        Mask2D m(6, 6);
        for (auto& px : m.data) px = rng.uniform() < 0.5 ? 1 : 0;
        SubjectRecord s = annotated_subject(i, dims, m, float(i));
        // second unit on another slice
        SliceAnnotation extra;
        extra.direction = 2;
        extra.index = 1;
        extra.kind = AnnotationKind::RR;
        extra.mask = top_half(6, 6);
        s.annotations.push_back(extra);
        db.subjects.push_back(std::move(s));
    }
    QCConfig cfg;
    FilterResult a = filter_database(db, cfg, 1);
    FilterResult b = filter_database(db, cfg, 2);
    REQUIRE(a.report.size() == b.report.size());
    for (std::size_t i = 0; i < a.report.size(); ++i) {
        CHECK(a.report[i].rejected == b.report[i].rejected);
        CHECK(a.report[i].dice_vs_consensus == b.report[i].dice_vs_consensus);
        CHECK(a.report[i].mu == b.report[i].mu);
    }
    // Classifying again (decisions depend only on the input db) changes nothing.
    FilterResult again = filter_database(db, cfg, 2);
    for (std::size_t i = 0; i < a.report.size(); ++i)
        CHECK(a.report[i].rejected == again.report[i].rejected);
}

TEST_CASE("QC report CSV shape") {
    namespace fs = std::filesystem;
    std::vector<RejectionRecord> report(2);
    report[0] = {3, 2, 10, AnnotationKind::BD, true, 0.25, 0.9, true};
    report[1] = {4, 0, 1, AnnotationKind::NotVisible, false, 1.0, 0.8, false};
    fs::path path = fs::temp_directory_path() / "weakseg_qc_report.csv";
    write_qc_report(path, report);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "subject,direction,index,kind,corrupted,dice,mu,rejected");
    std::getline(in, line);
    CHECK(line == "3,2,10,BD,1,0.250000,0.900000,1");
    std::getline(in, line);
    CHECK(line == "4,0,1,NV,0,1.000000,0.800000,0");
    fs::remove(path);
}
