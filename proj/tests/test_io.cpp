#include "support.hpp"

#include "cryostoch/error.hpp"
#include "cryostoch/io.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

using namespace cryostoch;
namespace fs = std::filesystem;

namespace {

VolumeGrid float_volume(int n, std::uint64_t seed) {
    auto v = testing::random_volume(n, seed);
    for (double& x : v.data()) {
        x = static_cast<float>(x);
    }
    return v;
}

void patch_int(const fs::path& p, std::streamoff offset, std::int32_t value) {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(offset);
    f.write(reinterpret_cast<const char*>(&value), sizeof value);
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        lines.push_back(line);
    }
    return lines;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p);
    for (const auto& l : lines) {
        out << l << '\n';
    }
}

ParticleStack small_stack(std::size_t k, bool poses) {
    ParticleStack s;
    s.pixel_size = 2.7;
    auto rng = stream_rng(17, 0);
    const auto pool = default_ctf_pool();
    for (std::size_t i = 0; i < k; ++i) {
        ParticleImage img(8);
        std::normal_distribution<double> g;
        for (double& p : img.pixels()) {
            p = static_cast<float>(g(rng));
        }
        s.images.push_back(img);
        ImageRecord r;
        r.index = i;
        r.ctf = pool[i % pool.size()];
        r.ctf.b_factor = 12.5;
        if (poses) {
            r.orientation = uniform_random_quaternion(rng);
            r.shift = {0.25 * static_cast<double>(i), -1.0 / 3.0};
        }
        s.records.push_back(r);
    }
    return s;
}

} // namespace

TEST_CASE("MRC volume round trip") {
    const auto dir = testing::scratch_dir("io_mrc");
    auto v = float_volume(12, 1);
    v.set_voxel_size(1.0 / 3.0);
    write_volume(dir / "v.mrc", v);
    const auto info = read_mrc_info(dir / "v.mrc");
    CHECK(info.nx == 12);
    CHECK(info.ny == 12);
    CHECK(info.nz == 12);
    CHECK(info.mode == 2);
    CHECK(info.voxel_size == 1.0 / 3.0);
    const auto back = read_volume(dir / "v.mrc");
    CHECK(back.values() == v.values());
    CHECK(back.voxel_size() == 1.0 / 3.0);
    CHECK(fs::file_size(dir / "v.mrc") == 1024 + 12 * 12 * 12 * 4);
}

TEST_CASE("MRC voxels are stored in single precision") {
    const auto dir = testing::scratch_dir("io_precision");
    VolumeGrid v(4);
    v.data()[0] = 0.1;
    write_volume(dir / "v.mrc", v);
    CHECK(read_volume(dir / "v.mrc").data()[0] == static_cast<double>(0.1f));
}

TEST_CASE("malformed MRC files are rejected") {
    const auto dir = testing::scratch_dir("io_bad");
    const auto v = float_volume(8, 2);

    write_volume(dir / "mode.mrc", v);
    patch_int(dir / "mode.mrc", 12, 1);
    CHECK_THROWS_AS((void)read_volume(dir / "mode.mrc"), DataError);

    write_volume(dir / "short.mrc", v);
    fs::resize_file(dir / "short.mrc", fs::file_size(dir / "short.mrc") - 4);
    CHECK_THROWS_AS((void)read_volume(dir / "short.mrc"), DataError);

    write_volume(dir / "header.mrc", v);
    fs::resize_file(dir / "header.mrc", 100);
    CHECK_THROWS_AS((void)read_volume(dir / "header.mrc"), DataError);

    write_volume(dir / "stamp.mrc", v);
    patch_int(dir / "stamp.mrc", 208, 0x41424344);
    CHECK_THROWS_AS((void)read_volume(dir / "stamp.mrc"), DataError);

    write_volume(dir / "dims.mrc", v);
    patch_int(dir / "dims.mrc", 0, 6);
    CHECK_THROWS_AS((void)read_volume(dir / "dims.mrc"), DataError);

    CHECK_THROWS_AS((void)read_volume(dir / "missing.mrc"), DataError);
}

TEST_CASE("particle stack round trip with poses") {
    const auto dir = testing::scratch_dir("io_stack");
    const auto s = small_stack(10, true);
    write_stack(dir / "p.mrcs", dir / "p.csv", s);
    const auto back = read_stack(dir / "p.mrcs", dir / "p.csv");
    REQUIRE(back.images.size() == 10);
    CHECK(back.pixel_size == 2.7);
    CHECK(back.has_poses());
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(std::equal(back.images[i].pixels().begin(), back.images[i].pixels().end(),
                         s.images[i].pixels().begin()));
        const auto& a = back.records[i];
        const auto& b = s.records[i];
        CHECK(a.index == i);
        CHECK(a.ctf.defocus_u == b.ctf.defocus_u);
        CHECK(a.ctf.defocus_v == b.ctf.defocus_v);
        CHECK(a.ctf.astigmatism_angle == b.ctf.astigmatism_angle);
        CHECK(a.ctf.b_factor == 12.5);
        CHECK(a.orientation->coeffs() == b.orientation->coeffs());
        CHECK(a.shift.x == b.shift.x);
        CHECK(a.shift.y == b.shift.y);
    }
}

TEST_CASE("pose columns are optional") {
    const auto dir = testing::scratch_dir("io_noposes");
    const auto s = small_stack(4, false);
    write_stack(dir / "p.mrcs", dir / "p.csv", s);
    CHECK(read_lines(dir / "p.csv")[0].find("qw") == std::string::npos);
    const auto back = read_stack(dir / "p.mrcs", dir / "p.csv");
    CHECK_FALSE(back.has_poses());
    CHECK(back.records[3].ctf.defocus_u == s.records[3].ctf.defocus_u);
}

TEST_CASE("stack and sidecar must agree") {
    const auto dir = testing::scratch_dir("io_mismatch");
    write_stack(dir / "p.mrcs", dir / "p.csv", small_stack(10, true));
    auto lines = read_lines(dir / "p.csv");
    REQUIRE(lines.size() == 11);

    auto nine = lines;
    nine.pop_back();
    write_lines(dir / "nine.csv", nine);
    CHECK_THROWS_AS((void)read_stack(dir / "p.mrcs", dir / "nine.csv"), DataError);

    auto swapped = lines;
    std::swap(swapped[2], swapped[3]);
    write_lines(dir / "order.csv", swapped);
    CHECK_THROWS_AS((void)read_metadata(dir / "order.csv"), DataError);

    auto garbage = lines;
    garbage[4].replace(garbage[4].find(','), 1, ",x");
    write_lines(dir / "garbage.csv", garbage);
    CHECK_THROWS_AS((void)read_metadata(dir / "garbage.csv"), DataError);

    // Drop the qw column only.
    std::vector<std::string> partial;
    for (const auto& l : lines) {
        std::stringstream in(l);
        std::string field, out;
        for (int c = 0; std::getline(in, field, ','); ++c) {
            if (c != 8) {
                out += (out.empty() ? "" : ",") + field;
            }
        }
        partial.push_back(out);
    }
    write_lines(dir / "partial.csv", partial);
    CHECK_THROWS_AS((void)read_metadata(dir / "partial.csv"), DataError);

    auto bad_ctf = small_stack(2, false);
    bad_ctf.records[1].ctf.amplitude_contrast = 1.5;
    write_metadata(dir / "ctf.csv", bad_ctf.records);
    CHECK_THROWS_AS((void)read_metadata(dir / "ctf.csv"), DataError);
}

TEST_CASE("metrics log appends and parses back") {
    const auto dir = testing::scratch_dir("io_metrics");
    {
        MetricsLog log(dir / "m.csv");
        log.append({10, 1000, 0.5, 1234.5678, std::nullopt, 0.25, 1e-3});
        log.append({20, 2000, 1.25, 1000.125, 130.5, 0.125, 9e-4});
        // Visible on disk before the log is closed.
        CHECK(read_lines(dir / "m.csv").size() == 3);
    }
    const auto rows = read_metrics(dir / "m.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].iteration == 10);
    CHECK(rows[0].gradient_evaluations == 1000);
    CHECK_FALSE(rows[0].test_nll_per_image.has_value());
    CHECK(rows[1].test_nll_per_image.value() == 130.5);
    CHECK(rows[1].minibatch_objective == 1000.125);
    CHECK(rows[1].learning_rate == doctest::Approx(9e-4).epsilon(1e-10));
    CHECK(read_lines(dir / "m.csv")[0] == MetricsLog::header());

    auto lines = read_lines(dir / "m.csv");
    std::swap(lines[1], lines[2]);
    write_lines(dir / "bad.csv", lines);
    CHECK_THROWS_AS((void)read_metrics(dir / "bad.csv"), DataError);
}
