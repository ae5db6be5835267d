#include "cryostoch/error.hpp"
#include "cryostoch/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <string>
#include <string_view>

namespace cryostoch {
namespace {

constexpr std::array<std::string_view, 8> kRequired{"image_index", "defocus_u", "defocus_v", "astig_angle",
                                                    "voltage_kv", "cs", "amplitude_contrast", "b_factor"};
constexpr std::array<std::string_view, 6> kPose{"qw", "qx", "qy", "qz", "shift_x", "shift_y"};

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
            field.remove_prefix(1);
        }
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
            field.remove_suffix(1);
        }
        out.push_back(field);
        if (comma == std::string_view::npos) {
            return out;
        }
        start = comma + 1;
    }
}

template <typename T>
T parse_number(std::string_view text, const std::filesystem::path& path, std::size_t line) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DataError(fmt::format("{}:{}: cannot parse '{}' as a number", path.string(), line, text));
    }
    return value;
}

} // namespace

void write_metadata(const std::filesystem::path& path, std::span<const ImageRecord> records) {
    const bool with_pose = !records.empty() && std::all_of(records.begin(), records.end(), [](const auto& r) {
        return r.orientation.has_value();
    });
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError(fmt::format("cannot open {} for writing", path.string()));
    }
    std::string header;
    for (auto c : kRequired) {
        header += header.empty() ? "" : ",";
        header += c;
    }
    if (with_pose) {
        for (auto c : kPose) {
            header += ",";
            header += c;
        }
    }
    out << header << '\n';
    for (const auto& r : records) {
        const auto& c = r.ctf;
        out << fmt::format("{},{},{},{},{},{},{},{}", r.index, c.defocus_u, c.defocus_v, c.astigmatism_angle,
                           c.voltage_kv, c.spherical_aberration, c.amplitude_contrast, c.b_factor);
        if (with_pose) {
            const auto& q = *r.orientation;
            out << fmt::format(",{},{},{},{},{},{}", q.w(), q.x(), q.y(), q.z(), r.shift.x, r.shift.y);
        }
        out << '\n';
    }
    out.flush();
    if (!out) {
        throw DataError(fmt::format("failed writing {}", path.string()));
    }
}

std::vector<ImageRecord> read_metadata(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(fmt::format("cannot open metadata table {}", path.string()));
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(fmt::format("{}: empty metadata table", path.string()));
    }
    const auto names = split(line);
    std::map<std::string_view, std::size_t, std::less<>> column;
    std::vector<std::string> owned(names.begin(), names.end());
    for (std::size_t i = 0; i < owned.size(); ++i) {
        column[owned[i]] = i;
    }
    for (auto c : kRequired) {
        if (!column.contains(c)) {
            throw DataError(fmt::format("{}: missing column '{}'", path.string(), c));
        }
    }
    const auto pose_columns = std::count_if(kPose.begin(), kPose.end(), [&](auto c) { return column.contains(c); });
    if (pose_columns != 0 && pose_columns != static_cast<long>(kPose.size())) {
        throw DataError(fmt::format("{}: pose columns must be all present or all absent", path.string()));
    }
    const bool with_pose = pose_columns != 0;

    std::vector<ImageRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = split(line);
        if (fields.size() != owned.size()) {
            throw DataError(fmt::format("{}:{}: expected {} fields, found {}", path.string(), line_no, owned.size(),
                                        fields.size()));
        }
        auto num = [&](std::string_view name) { return parse_number<double>(fields[column.at(name)], path, line_no); };
        ImageRecord r;
        r.index = parse_number<std::size_t>(fields[column.at("image_index")], path, line_no);
        r.ctf.defocus_u = num("defocus_u");
        r.ctf.defocus_v = num("defocus_v");
        r.ctf.astigmatism_angle = num("astig_angle");
        r.ctf.voltage_kv = num("voltage_kv");
        r.ctf.spherical_aberration = num("cs");
        r.ctf.amplitude_contrast = num("amplitude_contrast");
        r.ctf.b_factor = num("b_factor");
        try {
            r.ctf.validate();
        } catch (const ConfigError& e) {
            throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
        if (with_pose) {
            r.orientation = Quaternion(num("qw"), num("qx"), num("qy"), num("qz"));
            r.shift = {num("shift_x"), num("shift_y")};
        }
        if (r.index != records.size()) {
            throw DataError(fmt::format("{}:{}: image_index {} out of sequence (expected {})", path.string(), line_no,
                                        r.index, records.size()));
        }
        records.push_back(r);
    }
    return records;
}

} // namespace cryostoch
