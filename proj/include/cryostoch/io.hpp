#pragma once

#include "cryostoch/ctf.hpp"
#include "cryostoch/grid.hpp"
#include "cryostoch/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <vector>

namespace cryostoch {

// MRC2014, little endian, mode 2 (float32). Voxels are stored as float32, so
// values round-trip exactly only when they are representable in single
// precision. The exact voxel size is kept in a header label as well as in
// the cell dimensions.

struct MrcInfo {
    int nx = 0, ny = 0, nz = 0;
    int mode = 2;
    double voxel_size = 1.0;
};

void write_volume(const std::filesystem::path& path, const VolumeGrid& v);
[[nodiscard]] VolumeGrid read_volume(const std::filesystem::path& path);
[[nodiscard]] MrcInfo read_mrc_info(const std::filesystem::path& path);

/// Per-image metadata row of the sidecar table.
struct ImageRecord {
    std::size_t index = 0;
    CtfParams ctf;
    std::optional<Quaternion> orientation; ///< ground truth, when known
    Shift2 shift{};
};

struct ParticleStack {
    std::vector<ParticleImage> images;
    std::vector<ImageRecord> records;
    double pixel_size = 1.0;

    [[nodiscard]] bool has_poses() const;
};

/// Writes the image stack (MRC, nz = K) and the CSV sidecar.
void write_stack(const std::filesystem::path& stack_path, const std::filesystem::path& sidecar_path,
                 const ParticleStack& stack);
/// Throws DataError when the sidecar and stack disagree.
[[nodiscard]] ParticleStack read_stack(const std::filesystem::path& stack_path,
                                       const std::filesystem::path& sidecar_path);

void write_metadata(const std::filesystem::path& path, std::span<const ImageRecord> records);
[[nodiscard]] std::vector<ImageRecord> read_metadata(const std::filesystem::path& path);

struct MetricsRow {
    std::size_t iteration = 0;
    std::size_t gradient_evaluations = 0;
    double wall_seconds = 0.0;
    double minibatch_objective = 0.0;
    std::optional<double> test_nll_per_image;
    double step_norm = 0.0;
    double learning_rate = 0.0;
};

/// Append-only metrics table; every row is flushed as it is written.
class MetricsLog {
public:
    /// Creates (or truncates) the file and writes the header.
    explicit MetricsLog(const std::filesystem::path& path);
    void append(const MetricsRow& row);

    [[nodiscard]] static std::string header();
    [[nodiscard]] static std::string format(const MetricsRow& row);

private:
    std::ofstream out_;
};

/// Parses a metrics file; throws DataError on malformed rows or decreasing
/// gradient_evaluations.
[[nodiscard]] std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

} // namespace cryostoch
