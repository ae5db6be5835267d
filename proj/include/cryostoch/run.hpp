#pragma once

#include "cryostoch/io.hpp"
#include "cryostoch/model.hpp"
#include "cryostoch/optim.hpp"
#include "cryostoch/quadrature.hpp"
#include "cryostoch/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cryostoch {

/// dataset.json: everything about a dataset that is not per image.
struct DatasetManifest {
    int side = 0;
    std::size_t count = 0;
    double pixel_size = 1.0;
    double sigma = 0.0; ///< noise standard deviation; 0 when noise was disabled
    double target_snr = 0.0;
    double signal_variance = 0.0;
    std::uint64_t seed = 0;
    std::string stack_file = "particles.mrcs";
    std::string metadata_file = "particles.csv";
    std::string truth_file;  ///< empty when unknown
    std::string clean_file;  ///< noise-free stack, optional
};

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& m);
[[nodiscard]] DatasetManifest read_manifest(const std::filesystem::path& dir);

struct Dataset {
    std::filesystem::path dir;
    DatasetManifest manifest;
    ParticleStack stack;
};

[[nodiscard]] Dataset load_dataset(const std::filesystem::path& dir);

struct SynthConfig {
    std::filesystem::path output;
    std::optional<std::filesystem::path> volume; ///< default: built-in phantom
    int side = 32;
    std::size_t count = 2000;
    double snr = 0.2; ///< <= 0 or infinite disables noise
    std::uint64_t seed = 1;
    double pixel_size = 3.0;
    double shift_std = 0.0;
    double shift_radius = 0.0;
    bool write_clean = false;
    bool force = false;
};

struct SynthResult {
    DatasetManifest manifest;
    SimulatedDataset data;
};

SynthResult cmd_synth(const SynthConfig& cfg);

struct InitConfig {
    std::filesystem::path output;
    int side = 32;
    int spheres = 10;
    double min_radius = 0.0; ///< 0: side / 16
    double max_radius = 0.0; ///< 0: side / 8
    std::uint64_t seed = 1;
    double voxel_size = 1.0;
    bool force = false;
};

VolumeGrid cmd_init(const InitConfig& cfg);

/// Likelihood geometry shared by reconstruction and evaluation.
struct ModelConfig {
    double cutoff = 0.25;
    int oversampling = 2;
    Interpolation kernel = Interpolation::trilinear;
    ShiftPrior shift_prior = ShiftPrior::none();
    int lebedev_order = 0; ///< 0: chosen from the cutoff
    int inplane_count = 0; ///< 0: chosen from the cutoff
};

[[nodiscard]] PoseScheme make_pose_scheme(const ModelConfig& m, int side);

struct HoldoutSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded shuffle of 0..count-1; the first `holdout` indices are held out.
/// Both parts are returned in ascending order.
[[nodiscard]] HoldoutSplit split_holdout(std::size_t count, std::size_t holdout, std::uint64_t seed);

/// Hand-tuned defaults for the desk-scale synthetic problem.
[[nodiscard]] OptimizerConfig default_optimizer_config(Method m);

struct RunConfig {
    std::filesystem::path dataset;
    std::filesystem::path init_volume;
    std::filesystem::path output_dir;
    OptimizerConfig optimizer;
    ModelConfig model;
    PriorParams prior;
    std::optional<double> sigma; ///< default: the dataset's noise level
    std::size_t batch_size = 100;
    int epochs = 3;
    std::size_t holdout = 100;
    std::uint64_t seed = 1;
    std::size_t metrics_every = 10;
    std::size_t test_every = 50;
    /// Extra snapshots at the first logged test point past each count.
    std::vector<std::size_t> snapshot_evaluations{5000, 50000};
    bool force = false;

    void validate() const;
};

struct RunSummary {
    VolumeGrid final_volume;
    std::vector<MetricsRow> rows;
    HoldoutSplit split;
    std::size_t steps = 0;
    std::size_t gradient_evaluations = 0;
    std::optional<double> final_test_nll;
    std::vector<std::filesystem::path> snapshots;
};

/// Runs the optimizer over shuffled minibatches and writes metrics.csv,
/// snapshots, final.mrc and run_config.json into the output directory.
/// On a numerical failure the last finite iterate is written to
/// last_good.mrc before the NumericalError propagates.
RunSummary cmd_reconstruct(const RunConfig& cfg);

enum class Subset { holdout, all };

struct EvaluateConfig {
    std::filesystem::path dataset;
    std::filesystem::path volume;
    ModelConfig model;
    std::optional<double> sigma;
    Subset subset = Subset::holdout;
    std::size_t holdout = 100;
    std::uint64_t seed = 1;
};

struct EvaluateReport {
    std::size_t count = 0;
    double per_image = 0.0; ///< mean negative log marginal
    double total = 0.0;     ///< per_image * count
};

[[nodiscard]] EvaluateReport cmd_evaluate(const EvaluateConfig& cfg);

struct CompareConfig {
    RunConfig base;
    std::vector<Method> methods;
    std::vector<std::pair<Method, double>> eta0; ///< overrides of the tuned defaults
};

struct CompareTrace {
    Method method;
    RunSummary run;
};

/// Runs each method into output_dir/<method> with the same data split and
/// order, and writes the merged compare.csv.
std::vector<CompareTrace> cmd_compare(const CompareConfig& cfg);

/// Command-line entry point; returns the process exit code.
int cli_main(int argc, const char* const* argv);

} // namespace cryostoch
