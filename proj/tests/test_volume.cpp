#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <queue>

#include "weakseg/rng.hpp"
#include "weakseg/volume.hpp"
#include "weakseg/volume_io.hpp"

using namespace weakseg;

namespace {

Mask2D random_mask(int na, int nb, Rng& rng, double density = 0.4) {
    Mask2D m(na, nb);
    for (auto& px : m.data) px = rng.uniform() < density ? 1 : 0;
    return m;
}

// Reference erosion: explicit per-pixel neighbourhood check.
Mask2D erode_ref(const Mask2D& m) {
    Mask2D out(m.na, m.nb);
    for (int r = 0; r < m.nb; ++r)
        for (int c = 0; c < m.na; ++c) {
            auto get = [&](int rr, int cc) -> bool {
                if (rr < 0 || rr >= m.nb || cc < 0 || cc >= m.na) return false;
                return m.at(rr, cc) != 0;
            };
            out.at(r, c) =
                (get(r, c) && get(r - 1, c) && get(r + 1, c) && get(r, c - 1) && get(r, c + 1))
                    ? 1
                    : 0;
        }
    return out;
}

// Reference connected components: BFS flood fill, kept independent of the
// library's stack-based labelling.
std::pair<std::vector<int>, int> flood_fill_ref(const Mask2D& m) {
    std::vector<int> labels(m.data.size(), 0);
    int count = 0;
    for (int r = 0; r < m.nb; ++r)
        for (int c = 0; c < m.na; ++c) {
            std::size_t i = m.index(r, c);
            if (!m.data[i] || labels[i]) continue;
            ++count;
            std::queue<std::pair<int, int>> q;
            q.push({r, c});
            labels[i] = count;
            while (!q.empty()) {
                auto [cr, cc] = q.front();
                q.pop();
                const int dr[4] = {-1, 1, 0, 0};
                const int dc[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    int nr = cr + dr[k], nc = cc + dc[k];
                    if (nr < 0 || nr >= m.nb || nc < 0 || nc >= m.na) continue;
                    std::size_t j = m.index(nr, nc);
                    if (m.data[j] && !labels[j]) {
                        labels[j] = count;
                        q.push({nr, nc});
                    }
                }
            }
        }
    return {labels, count};
}

} // namespace

TEST_CASE("extract_slice returns row-major planes") {
    VolumeGrid v({2, 2, 2});
    for (int i = 0; i < 8; ++i) v.data[std::size_t(i)] = float(i);

    SliceImage z0 = extract_slice(v, 2, 0);
    CHECK(z0.data == std::vector<float>{0, 1, 2, 3});
    SliceImage z1 = extract_slice(v, 2, 1);
    CHECK(z1.data == std::vector<float>{4, 5, 6, 7});

    CHECK(z0.na == 2);
    CHECK(z0.nb == 2);
}

TEST_CASE("extract_slice dims per direction") {
    VolumeGrid v({3, 4, 5});
    SliceImage sx = extract_slice(v, 0, 1);
    CHECK(sx.na == 4); // y fastest
    CHECK(sx.nb == 5);
    SliceImage sy = extract_slice(v, 1, 2);
    CHECK(sy.na == 3);
    CHECK(sy.nb == 5);
    SliceImage sz = extract_slice(v, 2, 3);
    CHECK(sz.na == 3);
    CHECK(sz.nb == 4);
}

TEST_CASE("extract_slice bounds errors") {
    VolumeGrid v({2, 2, 2});
    CHECK_THROWS_AS(extract_slice(v, 2, 2), std::out_of_range);
    CHECK_THROWS_AS(extract_slice(v, 2, -1), std::out_of_range);
    CHECK_THROWS_AS(extract_slice(v, 3, 0), std::out_of_range);
}

TEST_CASE("slice round-trip is the identity") {
    Rng rng(11);
    VolumeGrid v({3, 4, 5});
    for (auto& x : v.data) x = float(rng.uniform());
    MaskVolume m(v.dims);
    for (auto& px : m.data) px = rng.uniform() < 0.5 ? 1 : 0;

    for (int d = 0; d < 3; ++d)
        for (int idx = 0; idx < v.dims.extent(d); ++idx) {
            VolumeGrid v2 = v;
            insert_slice(v2, extract_slice(v, d, idx));
            CHECK(v2.data == v.data);

            MaskVolume m2 = m;
            insert_slice(m2, d, idx, extract_slice(m, d, idx));
            CHECK(m2 == m);
        }
}

TEST_CASE("erode_mask on solid squares") {
    Mask2D all3(3, 3, 1);
    Mask2D e = erode_mask(all3, 1);
    CHECK(e.count() == 1);
    CHECK(e.at(1, 1) == 1);

    CHECK(erode_mask(all3, 0) == all3);

    Mask2D all5(5, 5, 1);
    Mask2D e2 = erode_mask(all5, 2);
    CHECK(e2.count() == 1);
    CHECK(e2.at(2, 2) == 1);
}

TEST_CASE("erosion matches reference and is monotone") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        Mask2D m = random_mask(9, 7, rng, 0.6);

        Mask2D lib = erode_mask(m, 1);
        CHECK(lib == erode_ref(m));

        // erode(m, a+b) == erode(erode(m, a), b)
        Mask2D two = erode_mask(m, 2);
        CHECK(two == erode_mask(erode_mask(m, 1), 1));

        // contractive
        for (std::size_t i = 0; i < m.data.size(); ++i)
            if (lib.data[i]) CHECK(m.data[i] == 1);
    }
}

TEST_CASE("connected components: diagonal pixels are separate") {
    Mask2D m(4, 4);
    m.at(1, 1) = 1;
    m.at(2, 2) = 1;
    ComponentMap cm = connected_components(m);
    CHECK(cm.count == 2);
    CHECK(cm.at(1, 1) != cm.at(2, 2));
}

TEST_CASE("connected components: empty mask") {
    Mask2D m(5, 5);
    CHECK(connected_components(m).count == 0);
}

TEST_CASE("connected components: first-encounter ordering") {
    Mask2D m(5, 3);
    m.at(0, 3) = 1; // first in row-major order -> id 1
    m.at(1, 0) = 1;
    ComponentMap cm = connected_components(m);
    CHECK(cm.at(0, 3) == 1);
    CHECK(cm.at(1, 0) == 2);
}

TEST_CASE("connected components match flood-fill oracle") {
    Rng rng(37);
    for (int trial = 0; trial < 30; ++trial) {
        Mask2D m = random_mask(16, 16, rng, 0.45);
        ComponentMap cm = connected_components(m);
        auto [ref_labels, ref_count] = flood_fill_ref(m);
        CHECK(cm.count == ref_count);
        // Identical partition and identical ids (both first-encounter order).
        for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(cm.labels[i] == ref_labels[i]);
        // Partition property: set pixels labelled 1..count, others 0.
        for (std::size_t i = 0; i < m.data.size(); ++i) {
            if (m.data[i]) {
                CHECK(cm.labels[i] >= 1);
                CHECK(cm.labels[i] <= cm.count);
            } else {
                CHECK(cm.labels[i] == 0);
            }
        }
    }
}

TEST_CASE("connected_components_labelled separates touching regions") {
    // Two vertically adjacent stripes with different labels stay apart.
    std::vector<std::int32_t> labels = {7, 7, 7, 9, 9, 9};
    ComponentMap cm = connected_components_labelled(3, 2, labels);
    CHECK(cm.count == 2);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(1, 0) == 2);
}

TEST_CASE("bounding_rect") {
    Mask2D m(10, 8);
    m.at(2, 3) = 1;
    m.at(5, 7) = 1;
    auto r = bounding_rect(m);
    REQUIRE(r.has_value());
    CHECK(*r == Rect2D{2, 5, 3, 7});

    Mask2D single(9, 9);
    single.at(4, 4) = 1;
    CHECK(*bounding_rect(single) == Rect2D{4, 4, 4, 4});

    CHECK(!bounding_rect(Mask2D(4, 4)).has_value());
}

TEST_CASE("bounding_rect is tight") {
    Rng rng(91);
    for (int trial = 0; trial < 20; ++trial) {
        Mask2D m = random_mask(12, 9, rng, 0.1);
        auto r = bounding_rect(m);
        if (!r) {
            CHECK(m.count() == 0);
            continue;
        }
        bool row_min_hit = false, row_max_hit = false, col_min_hit = false, col_max_hit = false;
        for (int row = 0; row < m.nb; ++row)
            for (int col = 0; col < m.na; ++col) {
                if (!m.at(row, col)) continue;
                CHECK(row >= r->row_min);
                CHECK(row <= r->row_max);
                CHECK(col >= r->col_min);
                CHECK(col <= r->col_max);
                row_min_hit |= row == r->row_min;
                row_max_hit |= row == r->row_max;
                col_min_hit |= col == r->col_min;
                col_max_hit |= col == r->col_max;
            }
        CHECK(row_min_hit);
        CHECK(row_max_hit);
        CHECK(col_min_hit);
        CHECK(col_max_hit);
    }
}

TEST_CASE("volume header is bit-exact") {
    std::string h = volume_header_text({4, 5, 6}, {1.0, 1.0, 2.5}, false, "vol.raw");
    CHECK(h ==
          "NDims = 3\n"
          "DimSize = 4 5 6\n"
          "ElementSpacing = 1 1 2.5\n"
          "ElementType = FLOAT32\n"
          "ElementDataFile = vol.raw\n");
    std::string hm = volume_header_text({2, 2, 2}, {1, 1, 1}, true, "m.raw");
    CHECK(hm.find("ElementType = UINT8\n") != std::string::npos);
}

TEST_CASE("volume and mask file round-trip") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "weakseg_io_test";
    fs::create_directories(dir);

    Rng rng(5);
    VolumeGrid v({5, 4, 3});
    v.spacing = {0.5, 0.75, 2.0};
    for (auto& x : v.data) x = float(rng.uniform() * 100.0 - 50.0);
    write_volume(dir / "v.mhd", v);
    VolumeGrid back = read_volume(dir / "v.mhd");
    CHECK(back.dims == v.dims);
    CHECK(back.spacing == v.spacing);
    CHECK(back.data == v.data);

    MaskVolume m(v.dims);
    for (auto& px : m.data) px = rng.uniform() < 0.3 ? 1 : 0;
    write_mask(dir / "m.mhd", m);
    CHECK(read_mask(dir / "m.mhd") == m);

    CHECK_THROWS(read_volume(dir / "m.mhd")); // wrong element type
    CHECK_THROWS(read_volume(dir / "missing.mhd"));

    // Truncated raw payload.
    write_volume(dir / "t.mhd", v);
    fs::resize_file(dir / "t.raw", 7);
    CHECK_THROWS(read_volume(dir / "t.mhd"));

    fs::remove_all(dir);
}
