#include "weakseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "weakseg/rng.hpp"
#include "weakseg/volume_io.hpp"

namespace weakseg {

void PhantomSpec::validate() const {
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1)
        throw std::invalid_argument("PhantomSpec: dims must be >= 1");
    if (organs.empty())
        throw std::invalid_argument("PhantomSpec: needs at least one organ");
    if (target >= organs.size())
        throw std::invalid_argument("PhantomSpec: target index out of range");
    for (const auto& o : organs) {
        for (double r : o.radii)
            if (!(r > 0.0))
                throw std::invalid_argument("PhantomSpec: organ radii must be > 0");
        if (o.sigma < 0.0)
            throw std::invalid_argument("PhantomSpec: organ sigma must be >= 0");
    }
    if (background_sigma < 0.0)
        throw std::invalid_argument("PhantomSpec: background sigma must be >= 0");
}

PhantomSpec default_phantom_spec() {
    PhantomSpec spec;
    spec.dims = {64, 64, 64};
    spec.background_mean = 40.0;
    spec.background_sigma = 3.0;

    OrganSpec liver;
    liver.name = "liver";
    liver.center = {32.0, 30.0, 32.0};
    liver.radii = {17.0, 13.0, 16.0};
    liver.intensity = 120.0;
    liver.sigma = 1.5;
    liver.satellites = {
        {{18.2, 0.0, 0.0}, 2.6},
        {{-18.2, 1.0, 0.0}, 2.6},
    };

    OrganSpec kidney;
    kidney.name = "kidney";
    kidney.center = {11.0, 16.0, 17.0};
    kidney.radii = {8.0, 10.0, 16.0};
    kidney.intensity = 150.0;
    kidney.sigma = 1.5;

    OrganSpec spleen;
    spleen.name = "spleen";
    spleen.center = {52.0, 16.0, 46.0};
    spleen.radii = {8.0, 10.0, 16.0};
    spleen.intensity = 165.0;
    spleen.sigma = 1.5;

    OrganSpec aorta;
    aorta.name = "aorta";
    aorta.center = {32.0, 53.5, 32.0};
    aorta.radii = {9.0, 9.0, 20.0};
    aorta.intensity = 95.0;
    aorta.sigma = 1.5;

    spec.organs = {liver, kidney, spleen, aorta};
    spec.target = 0;
    return spec;
}

namespace {

struct PlacedOrgan {
    std::array<double, 3> center;
    std::array<double, 3> radii;
    MaskVolume mask;      // ground-truth ellipsoid
    MaskVolume footprint; // ellipsoid plus satellites (intensity region)
};

bool inside_ellipsoid(double x, double y, double z, const std::array<double, 3>& c,
                      const std::array<double, 3>& r) {
    double dx = (x - c[0]) / r[0];
    double dy = (y - c[1]) / r[1];
    double dz = (z - c[2]) / r[2];
    return dx * dx + dy * dy + dz * dz <= 1.0;
}

PlacedOrgan place_organ(const OrganSpec& spec, const Dims3& dims, Rng& rng) {
    PlacedOrgan p;
    for (int a = 0; a < 3; ++a)
        p.center[std::size_t(a)] =
            spec.center[std::size_t(a)] + rng.uniform_range(-spec.center_jitter, spec.center_jitter);
    for (int a = 0; a < 3; ++a)
        p.radii[std::size_t(a)] =
            spec.radii[std::size_t(a)] * rng.uniform_range(1.0 - spec.radius_jitter, 1.0 + spec.radius_jitter);

    p.mask = MaskVolume(dims);
    p.footprint = MaskVolume(dims);

    // Voxelize only the bounding box of the full footprint.
    double pad = 1.0;
    for (const auto& s : spec.satellites) pad = std::max(pad, s.radius + 1.0);
    double reach = *std::max_element(p.radii.begin(), p.radii.end()) + pad;
    for (const auto& s : spec.satellites)
        for (double off : s.offset) reach = std::max(reach, std::abs(off) + s.radius + 1.0);

    int x0 = std::max(0, int(std::floor(p.center[0] - reach)));
    int x1 = std::min(dims.nx - 1, int(std::ceil(p.center[0] + reach)));
    int y0 = std::max(0, int(std::floor(p.center[1] - reach)));
    int y1 = std::min(dims.ny - 1, int(std::ceil(p.center[1] + reach)));
    int z0 = std::max(0, int(std::floor(p.center[2] - reach)));
    int z1 = std::min(dims.nz - 1, int(std::ceil(p.center[2] + reach)));

    for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                bool in_organ = inside_ellipsoid(x, y, z, p.center, p.radii);
                bool in_footprint = in_organ;
                for (const auto& s : spec.satellites) {
                    if (in_footprint) break;
                    std::array<double, 3> sc = {p.center[0] + s.offset[0],
                                                p.center[1] + s.offset[1],
                                                p.center[2] + s.offset[2]};
                    double dx = x - sc[0], dy = y - sc[1], dz = z - sc[2];
                    in_footprint = dx * dx + dy * dy + dz * dz <= s.radius * s.radius;
                }
                if (in_organ) p.mask.at(x, y, z) = 1;
                if (in_footprint) p.footprint.at(x, y, z) = 1;
            }
    return p;
}

// Two footprints collide when they overlap or touch face-to-face; a one-voxel
// gap keeps pre-segmentation components of distinct organs separate.
bool collides(const MaskVolume& a, const MaskVolume& b) {
    const Dims3& d = a.dims;
    const std::size_t sx = 1, sy = std::size_t(d.nx), sz = std::size_t(d.nx) * std::size_t(d.ny);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                std::size_t i = std::size_t(x) + sy * std::size_t(y) + sz * std::size_t(z);
                if (!a.data[i]) continue;
                if (b.data[i]) return true;
                if (x > 0 && b.data[i - sx]) return true;
                if (x + 1 < d.nx && b.data[i + sx]) return true;
                if (y > 0 && b.data[i - sy]) return true;
                if (y + 1 < d.ny && b.data[i + sy]) return true;
                if (z > 0 && b.data[i - sz]) return true;
                if (z + 1 < d.nz && b.data[i + sz]) return true;
            }
    return false;
}

} // namespace

SubjectRecord generate_phantom(const PhantomSpec& spec, std::uint64_t subject_seed,
                               std::vector<RealizedPose>* poses) {
    spec.validate();

    std::vector<PlacedOrgan> placed;
    bool ok = false;
    for (int attempt = 0; attempt < spec.max_placement_retries && !ok; ++attempt) {
        placed.clear();
        ok = true;
        for (std::size_t o = 0; o < spec.organs.size(); ++o) {
            Rng rng(mix_seed(subject_seed, 0x505EULL, o, std::uint64_t(attempt)));
            PlacedOrgan p = place_organ(spec.organs[o], spec.dims, rng);
            for (const auto& other : placed)
                if (collides(p.footprint, other.footprint)) { ok = false; break; }
            if (!ok) break;
            placed.push_back(std::move(p));
        }
    }
    if (!ok)
        throw std::runtime_error("generate_phantom: organ placement failed after bounded retries");

    SubjectRecord subject;
    subject.volume.dims = spec.dims;
    subject.volume.data.resize(spec.dims.voxels());
    subject.target = spec.target;

    // One noise draw per voxel from a counter-keyed stream; the owning
    // structure only selects mean and sigma, so generation order is free.
    const std::size_t n = spec.dims.voxels();
    std::vector<std::uint8_t> owner(n, 0xff);
    for (std::size_t o = 0; o < placed.size(); ++o)
        for (std::size_t i = 0; i < n; ++i)
            if (placed[o].footprint.data[i]) owner[i] = std::uint8_t(o);

    for (std::size_t i = 0; i < n; ++i) {
        Rng noise(mix_seed(subject_seed, 0x4E01ULL, i));
        double mean = spec.background_mean, sigma = spec.background_sigma;
        if (owner[i] != 0xff) {
            mean = spec.organs[owner[i]].intensity;
            sigma = spec.organs[owner[i]].sigma;
        }
        subject.volume.data[i] = float(mean + sigma * noise.gaussian());
    }

    for (std::size_t o = 0; o < placed.size(); ++o) {
        subject.organs.push_back({spec.organs[o].name, std::move(placed[o].mask)});
        if (poses)
            poses->push_back({spec.organs[o].name, placed[o].center, placed[o].radii});
    }
    return subject;
}

AtlasDatabase generate_cohort(const PhantomSpec& spec, int count, std::uint64_t master_seed,
                              CohortPoses* poses) {
    if (count < 1)
        throw std::invalid_argument("generate_cohort: count must be >= 1");
    AtlasDatabase db;
    db.subjects.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i) {
        std::uint64_t seed = mix_seed(master_seed, std::uint64_t(i));
        std::vector<RealizedPose> subject_poses;
        SubjectRecord s = generate_phantom(spec, seed, poses ? &subject_poses : nullptr);
        s.id = i;
        db.subjects.push_back(std::move(s));
        if (poses) {
            poses->seeds.push_back(seed);
            poses->organs.push_back(std::move(subject_poses));
        }
    }
    return db;
}

// --- persistence ----------------------------------------------------------------

namespace {

std::string subj_dir_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "subj_%03d", id);
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_cohort_dir(const std::filesystem::path& dir, const AtlasDatabase& db,
                      const CohortPoses& poses, std::uint64_t master_seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::ofstream manifest(dir / "cohort.txt");
    if (!manifest)
        throw std::runtime_error("cannot write cohort manifest in " + dir.string());
    Dims3 dims = db.dims();
    manifest << "WSCOHORT 1\n";
    manifest << "count " << db.subjects.size() << "\n";
    manifest << "dims " << dims.nx << " " << dims.ny << " " << dims.nz << "\n";
    manifest << "master_seed " << master_seed << "\n";
    for (std::size_t i = 0; i < db.subjects.size(); ++i) {
        const SubjectRecord& s = db.subjects[i];
        manifest << "subject " << s.id << " seed "
                 << (i < poses.seeds.size() ? poses.seeds[i] : 0) << "\n";
        if (i < poses.organs.size())
            for (const auto& p : poses.organs[i]) {
                manifest << "organ " << s.id << " " << p.organ;
                for (double c : p.center) manifest << " " << format_double(c);
                for (double r : p.radii) manifest << " " << format_double(r);
                manifest << "\n";
            }
    }

    for (const SubjectRecord& s : db.subjects) {
        fs::path sdir = dir / subj_dir_name(s.id);
        fs::create_directories(sdir);
        write_volume(sdir / "image.mhd", s.volume);
        std::ofstream sm(sdir / "subject.txt");
        sm << "WSSUBJECT 1\n";
        sm << "id " << s.id << "\n";
        sm << "image image.mhd\n";
        sm << "target " << s.organs[s.target].name << "\n";
        for (const OrganMask& o : s.organs) {
            std::string file = "organ_" + o.name + ".mhd";
            sm << "organ " << o.name << " " << file << "\n";
            write_mask(sdir / file, o.mask);
        }
    }
}

SubjectRecord read_subject_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in)
        throw std::runtime_error("cannot open subject manifest: " + manifest_path.string());
    std::filesystem::path dir = manifest_path.parent_path();

    SubjectRecord s;
    std::string target_name;
    std::string line;
    if (!std::getline(in, line) || line != "WSSUBJECT 1")
        throw std::runtime_error("subject manifest: bad magic in " + manifest_path.string());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "id") {
            ls >> s.id;
        } else if (tag == "image") {
            std::string file;
            ls >> file;
            s.volume = read_volume(dir / file);
        } else if (tag == "target") {
            ls >> target_name;
        } else if (tag == "organ") {
            std::string name, file;
            ls >> name >> file;
            s.organs.push_back({name, read_mask(dir / file)});
        }
    }
    for (std::size_t o = 0; o < s.organs.size(); ++o)
        if (s.organs[o].name == target_name) s.target = o;
    if (s.organs.empty())
        throw std::runtime_error("subject manifest: no organs listed");
    return s;
}

AtlasDatabase read_cohort_dir(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / "cohort.txt");
    if (!manifest)
        throw std::runtime_error("cannot open cohort manifest in " + dir.string());
    std::string line;
    if (!std::getline(manifest, line) || line != "WSCOHORT 1")
        throw std::runtime_error("cohort manifest: bad magic in " + dir.string());

    AtlasDatabase db;
    while (std::getline(manifest, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag != "subject") continue;
        int id = 0;
        ls >> id;
        db.subjects.push_back(
            read_subject_manifest(dir / subj_dir_name(id) / "subject.txt"));
    }
    if (db.subjects.empty())
        throw std::runtime_error("cohort manifest lists no subjects: " + dir.string());
    return db;
}

} // namespace weakseg
