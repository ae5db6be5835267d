#include "cryostoch/error.hpp"
#include "cryostoch/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <string_view>

namespace cryostoch {
namespace {

static_assert(std::endian::native == std::endian::little, "MRC I/O assumes a little-endian host");

constexpr std::size_t kHeaderBytes = 1024;
constexpr std::string_view kVoxelLabel = "cryostoch voxel_size=";

struct Header {
    std::array<char, kHeaderBytes> bytes{};

    template <typename T>
    void put(std::size_t offset, T value) {
        std::memcpy(bytes.data() + offset, &value, sizeof(T));
    }
    template <typename T>
    T get(std::size_t offset) const {
        T value;
        std::memcpy(&value, bytes.data() + offset, sizeof(T));
        return value;
    }
};

struct Stats {
    float min, max, mean, rms;
};

Stats stats_of(std::span<const float> data) {
    if (data.empty()) {
        return {0, 0, 0, 0};
    }
    double lo = data[0], hi = data[0], sum = 0.0;
    for (float v : data) {
        lo = std::min<double>(lo, v);
        hi = std::max<double>(hi, v);
        sum += v;
    }
    const double mean = sum / static_cast<double>(data.size());
    double ss = 0.0;
    for (float v : data) {
        ss += (v - mean) * (v - mean);
    }
    return {static_cast<float>(lo), static_cast<float>(hi), static_cast<float>(mean),
            static_cast<float>(std::sqrt(ss / static_cast<double>(data.size())))};
}

Header make_header(int nx, int ny, int nz, double voxel_size, bool is_volume, std::span<const float> data) {
    Header h;
    h.put<std::int32_t>(0, nx);
    h.put<std::int32_t>(4, ny);
    h.put<std::int32_t>(8, nz);
    h.put<std::int32_t>(12, 2);
    h.put<std::int32_t>(28, nx);
    h.put<std::int32_t>(32, ny);
    h.put<std::int32_t>(36, nz);
    h.put<float>(40, static_cast<float>(nx * voxel_size));
    h.put<float>(44, static_cast<float>(ny * voxel_size));
    h.put<float>(48, static_cast<float>(nz * voxel_size));
    h.put<float>(52, 90.0f);
    h.put<float>(56, 90.0f);
    h.put<float>(60, 90.0f);
    h.put<std::int32_t>(64, 1);
    h.put<std::int32_t>(68, 2);
    h.put<std::int32_t>(72, 3);
    const auto s = stats_of(data);
    h.put<float>(76, s.min);
    h.put<float>(80, s.max);
    h.put<float>(84, s.mean);
    h.put<std::int32_t>(88, is_volume ? 1 : 0);
    h.put<std::int32_t>(92, 0);
    h.put<std::int32_t>(108, 20140);
    std::memcpy(h.bytes.data() + 208, "MAP ", 4);
    const std::array<unsigned char, 4> stamp{0x44, 0x44, 0x00, 0x00};
    std::memcpy(h.bytes.data() + 212, stamp.data(), 4);
    h.put<float>(216, s.rms);
    h.put<std::int32_t>(220, 1);
    const auto label = fmt::format("{}{}", kVoxelLabel, voxel_size);
    std::memset(h.bytes.data() + 224, ' ', 80);
    std::memcpy(h.bytes.data() + 224, label.data(), std::min<std::size_t>(label.size(), 80));
    return h;
}

void write_mrc(const std::filesystem::path& path, const Header& h, std::span<const float> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError(fmt::format("cannot open {} for writing", path.string()));
    }
    out.write(h.bytes.data(), kHeaderBytes);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    out.flush();
    if (!out) {
        throw DataError(fmt::format("failed writing {}", path.string()));
    }
}

struct MrcFile {
    MrcInfo info;
    std::vector<float> data;
};

MrcInfo parse_header(const Header& h, const std::filesystem::path& path, std::uintmax_t file_size,
                     std::size_t& data_offset) {
    const auto where = path.string();
    if (std::memcmp(h.bytes.data() + 208, "MAP ", 4) != 0) {
        throw DataError(fmt::format("{}: missing MRC map stamp", where));
    }
    const auto stamp0 = static_cast<unsigned char>(h.bytes[212]);
    if (stamp0 != 0x44) {
        throw DataError(fmt::format("{}: not a little-endian MRC file (machine stamp 0x{:02x})", where, stamp0));
    }
    MrcInfo info;
    info.nx = h.get<std::int32_t>(0);
    info.ny = h.get<std::int32_t>(4);
    info.nz = h.get<std::int32_t>(8);
    info.mode = h.get<std::int32_t>(12);
    if (info.mode != 2) {
        throw DataError(fmt::format("{}: unsupported MRC mode {} (only mode 2, float32, is supported)", where,
                                    info.mode));
    }
    if (info.nx <= 0 || info.ny <= 0 || info.nz <= 0) {
        throw DataError(fmt::format("{}: invalid dimensions {} x {} x {}", where, info.nx, info.ny, info.nz));
    }
    const auto ext = h.get<std::int32_t>(92);
    if (ext < 0) {
        throw DataError(fmt::format("{}: negative extended header size", where));
    }
    data_offset = kHeaderBytes + static_cast<std::size_t>(ext);
    const std::uintmax_t need =
        data_offset + 4ULL * static_cast<std::uintmax_t>(info.nx) * info.ny * static_cast<std::uintmax_t>(info.nz);
    if (file_size < need) {
        throw DataError(fmt::format("{}: truncated MRC file ({} bytes, expected {})", where, file_size, need));
    }
    const int mx = h.get<std::int32_t>(28);
    const float cella = h.get<float>(40);
    info.voxel_size = mx > 0 && cella > 0.0f ? static_cast<double>(cella) / mx : 1.0;
    const int labels = std::clamp(h.get<std::int32_t>(220), 0, 10);
    for (int l = 0; l < labels; ++l) {
        const std::string_view text(h.bytes.data() + 224 + 80 * l, 80);
        if (text.starts_with(kVoxelLabel)) {
            auto rest = text.substr(kVoxelLabel.size());
            rest = rest.substr(0, rest.find(' '));
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
            if (ec == std::errc{} && value > 0.0) {
                info.voxel_size = value;
            }
        }
    }
    return info;
}

MrcFile read_mrc(const std::filesystem::path& path, bool with_data) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) {
        throw DataError(fmt::format("cannot read {}: {}", path.string(), ec.message()));
    }
    if (size < kHeaderBytes) {
        throw DataError(fmt::format("{}: truncated MRC header", path.string()));
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open {}", path.string()));
    }
    Header h;
    in.read(h.bytes.data(), kHeaderBytes);
    std::size_t offset = 0;
    MrcFile f;
    f.info = parse_header(h, path, size, offset);
    if (with_data) {
        f.data.resize(static_cast<std::size_t>(f.info.nx) * f.info.ny * f.info.nz);
        in.seekg(static_cast<std::streamoff>(offset));
        in.read(reinterpret_cast<char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * sizeof(float)));
        if (!in) {
            throw DataError(fmt::format("{}: short read of voxel data", path.string()));
        }
    }
    return f;
}

} // namespace

void write_volume(const std::filesystem::path& path, const VolumeGrid& v) {
    std::vector<float> data(v.data().begin(), v.data().end());
    write_mrc(path, make_header(v.side(), v.side(), v.side(), v.voxel_size(), true, data), data);
}

MrcInfo read_mrc_info(const std::filesystem::path& path) { return read_mrc(path, false).info; }

VolumeGrid read_volume(const std::filesystem::path& path) {
    auto f = read_mrc(path, true);
    if (f.info.nx != f.info.ny || f.info.nx != f.info.nz) {
        throw DataError(fmt::format("{}: volume is not cubic ({} x {} x {})", path.string(), f.info.nx, f.info.ny,
                                    f.info.nz));
    }
    if (f.info.nx % 2 != 0) {
        throw DataError(fmt::format("{}: volume side {} is odd", path.string(), f.info.nx));
    }
    return VolumeGrid(f.info.nx, std::vector<double>(f.data.begin(), f.data.end()), f.info.voxel_size);
}

bool ParticleStack::has_poses() const {
    return !records.empty() &&
           std::all_of(records.begin(), records.end(), [](const auto& r) { return r.orientation.has_value(); });
}

void write_stack(const std::filesystem::path& stack_path, const std::filesystem::path& sidecar_path,
                 const ParticleStack& stack) {
    if (stack.images.empty()) {
        throw DataError("cannot write an empty particle stack");
    }
    if (stack.images.size() != stack.records.size()) {
        throw DataError("particle stack and metadata have different lengths");
    }
    const int n = stack.images.front().side();
    std::vector<float> data;
    data.reserve(stack.images.size() * static_cast<std::size_t>(n) * n);
    for (const auto& img : stack.images) {
        if (img.side() != n) {
            throw DimensionError("particle images have different sizes");
        }
        data.insert(data.end(), img.pixels().begin(), img.pixels().end());
    }
    write_mrc(stack_path,
              make_header(n, n, static_cast<int>(stack.images.size()), stack.pixel_size, false, data), data);
    write_metadata(sidecar_path, stack.records);
}

ParticleStack read_stack(const std::filesystem::path& stack_path, const std::filesystem::path& sidecar_path) {
    auto f = read_mrc(stack_path, true);
    if (f.info.nx != f.info.ny || f.info.nx % 2 != 0) {
        throw DataError(fmt::format("{}: particle images must be square with an even side", stack_path.string()));
    }
    ParticleStack stack;
    stack.pixel_size = f.info.voxel_size;
    stack.records = read_metadata(sidecar_path);
    if (stack.records.size() != static_cast<std::size_t>(f.info.nz)) {
        throw DataError(fmt::format("{} has {} records but the stack holds {} images", sidecar_path.string(),
                                    stack.records.size(), f.info.nz));
    }
    const std::size_t per = static_cast<std::size_t>(f.info.nx) * f.info.ny;
    stack.images.reserve(f.info.nz);
    for (int z = 0; z < f.info.nz; ++z) {
        const auto first = f.data.begin() + static_cast<std::ptrdiff_t>(z * per);
        stack.images.emplace_back(f.info.nx, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(per)));
    }
    return stack;
}

} // namespace cryostoch
