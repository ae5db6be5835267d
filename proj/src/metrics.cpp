#include "cryostoch/error.hpp"
#include "cryostoch/io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <string>
#include <string_view>

namespace cryostoch {
namespace {

constexpr std::string_view kHeader =
    "iteration,gradient_evaluations,wall_seconds,minibatch_objective,test_nll_per_image,step_norm,learning_rate";

template <typename T>
T field(std::string_view text, const std::filesystem::path& path, std::size_t line) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DataError(fmt::format("{}:{}: malformed metrics field '{}'", path.string(), line, text));
    }
    return value;
}

} // namespace

std::string MetricsLog::header() { return std::string(kHeader); }

std::string MetricsLog::format(const MetricsRow& r) {
    const std::string nll = r.test_nll_per_image ? fmt::format("{:.10f}", *r.test_nll_per_image) : std::string();
    return fmt::format("{},{},{:.6f},{:.10f},{},{:.10e},{:.10e}", r.iteration, r.gradient_evaluations,
                       r.wall_seconds, r.minibatch_objective, nll, r.step_norm, r.learning_rate);
}

MetricsLog::MetricsLog(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
    if (!out_) {
        throw DataError(fmt::format("cannot open metrics log {}", path.string()));
    }
    out_ << kHeader << '\n' << std::flush;
}

void MetricsLog::append(const MetricsRow& row) {
    out_ << format(row) << '\n' << std::flush;
    if (!out_) {
        throw DataError("failed appending to the metrics log");
    }
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(fmt::format("cannot open metrics log {}", path.string()));
    }
    std::string line;
    if (!std::getline(in, line) || line != kHeader) {
        throw DataError(fmt::format("{}: missing or unexpected metrics header", path.string()));
    }
    std::vector<MetricsRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> f;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            f.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (f.size() != 7) {
            throw DataError(fmt::format("{}:{}: expected 7 fields, found {}", path.string(), line_no, f.size()));
        }
        MetricsRow r;
        r.iteration = field<std::size_t>(f[0], path, line_no);
        r.gradient_evaluations = field<std::size_t>(f[1], path, line_no);
        r.wall_seconds = field<double>(f[2], path, line_no);
        r.minibatch_objective = field<double>(f[3], path, line_no);
        if (!f[4].empty()) {
            r.test_nll_per_image = field<double>(f[4], path, line_no);
        }
        r.step_norm = field<double>(f[5], path, line_no);
        r.learning_rate = field<double>(f[6], path, line_no);
        if (!rows.empty() && r.gradient_evaluations <= rows.back().gradient_evaluations) {
            throw DataError(fmt::format("{}:{}: gradient_evaluations must increase strictly", path.string(), line_no));
        }
        rows.push_back(r);
    }
    return rows;
}

} // namespace cryostoch
