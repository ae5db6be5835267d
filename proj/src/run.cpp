#include "cryostoch/run.hpp"

#include "cryostoch/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cryostoch {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "dataset.json";

void ensure_writable(const fs::path& path, bool force) {
    if (fs::exists(path) && !force) {
        throw ConfigError(fmt::format("{} already exists; pass --force to overwrite", path.string()));
    }
}

VolumeGrid float_rounded(std::span<const double> v, int side) {
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [](double x) { return static_cast<double>(static_cast<float>(x)); });
    return VolumeGrid(side, std::move(out));
}

double resolve_sigma(const std::optional<double>& requested, const DatasetManifest& m) {
    const double sigma = requested.value_or(m.sigma);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ConfigError("noise sigma is unknown for this dataset; pass --sigma");
    }
    return sigma;
}

std::vector<Observation> build_observations(const Dataset& d, const FrequencyMask& mask) {
    std::vector<Observation> obs(d.stack.images.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(obs.size()); ++i) {
        obs[i] = make_observation(d.stack.images[i], d.stack.records[i].ctf, d.stack.pixel_size, mask,
                                  static_cast<int>(i));
    }
    return obs;
}

std::vector<const Observation*> select(const std::vector<Observation>& obs, std::span<const std::size_t> idx) {
    std::vector<const Observation*> out;
    out.reserve(idx.size());
    for (auto i : idx) {
        out.push_back(&obs[i]);
    }
    return out;
}

json config_json(const RunConfig& c) {
    const auto& o = c.optimizer;
    return json{
        {"dataset", c.dataset.string()},
        {"init_volume", c.init_volume.string()},
        {"output_dir", c.output_dir.string()},
        {"optimizer",
         {{"method", method_name(o.method)},
          {"eta0", o.schedule.eta0},
          {"lambda_anneal", o.schedule.lambda_anneal},
          {"momentum", o.fixed_momentum ? json(*o.fixed_momentum) : json(nullptr)},
          {"adagrad_epsilon", o.adagrad_epsilon},
          {"tonga_rank", o.tonga_rank},
          {"tonga_period", o.tonga_period},
          {"tonga_epsilon", o.tonga_epsilon},
          {"lbfgs_memory", o.lbfgs_memory},
          {"lbfgs_regularizer", o.lbfgs_regularizer},
          {"lbfgs_initial_gamma", o.lbfgs_initial_gamma},
          {"cg_iterations", o.cg_iterations},
          {"hf_damping", o.hf_damping},
          {"hf_batch_size", o.hf_batch_size}}},
        {"model",
         {{"cutoff", c.model.cutoff},
          {"oversampling", c.model.oversampling},
          {"kernel", kernel_name(c.model.kernel)},
          {"shift_std", c.model.shift_prior.std_dev},
          {"shift_radius", c.model.shift_prior.truncation_radius},
          {"shift_spacing", c.model.shift_prior.grid_spacing},
          {"zero_shift", c.model.shift_prior.zero_only},
          {"lebedev_order", c.model.lebedev_order},
          {"inplane_count", c.model.inplane_count}}},
        {"prior", {{"lambda_plus", c.prior.lambda_plus}, {"lambda_minus", c.prior.lambda_minus}}},
        {"sigma", c.sigma ? json(*c.sigma) : json(nullptr)},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"holdout", c.holdout},
        {"seed", c.seed},
        {"metrics_every", c.metrics_every},
        {"test_every", c.test_every},
        {"snapshot_evaluations", c.snapshot_evaluations},
    };
}

} // namespace

void write_manifest(const fs::path& dir, const DatasetManifest& m) {
    const json j{{"side", m.side},
                 {"count", m.count},
                 {"pixel_size", m.pixel_size},
                 {"sigma", m.sigma},
                 {"target_snr", std::isfinite(m.target_snr) ? json(m.target_snr) : json(nullptr)},
                 {"signal_variance", m.signal_variance},
                 {"seed", m.seed},
                 {"stack", m.stack_file},
                 {"metadata", m.metadata_file},
                 {"truth", m.truth_file},
                 {"clean", m.clean_file}};
    std::ofstream out(dir / kManifestName, std::ios::trunc);
    if (!out) {
        throw DataError(fmt::format("cannot write {}", (dir / kManifestName).string()));
    }
    out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const fs::path& dir) {
    const auto path = dir / kManifestName;
    std::ifstream in(path);
    if (!in) {
        throw DataError(fmt::format("cannot open dataset manifest {}", path.string()));
    }
    try {
        const auto j = json::parse(in);
        DatasetManifest m;
        m.side = j.at("side").get<int>();
        m.count = j.at("count").get<std::size_t>();
        m.pixel_size = j.at("pixel_size").get<double>();
        m.sigma = j.at("sigma").get<double>();
        m.target_snr = j.at("target_snr").is_null() ? kNoNoise : j.at("target_snr").get<double>();
        m.signal_variance = j.value("signal_variance", 0.0);
        m.seed = j.value("seed", std::uint64_t{0});
        m.stack_file = j.at("stack").get<std::string>();
        m.metadata_file = j.at("metadata").get<std::string>();
        m.truth_file = j.value("truth", std::string());
        m.clean_file = j.value("clean", std::string());
        return m;
    } catch (const json::exception& e) {
        throw DataError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

Dataset load_dataset(const fs::path& dir) {
    Dataset d;
    d.dir = dir;
    d.manifest = read_manifest(dir);
    d.stack = read_stack(dir / d.manifest.stack_file, dir / d.manifest.metadata_file);
    if (d.stack.images.size() != d.manifest.count || d.stack.images.front().side() != d.manifest.side) {
        throw DataError(fmt::format("{}: stack shape does not match the manifest", dir.string()));
    }
    return d;
}

SynthResult cmd_synth(const SynthConfig& cfg) {
    fs::create_directories(cfg.output);
    ensure_writable(cfg.output / kManifestName, cfg.force);
    VolumeGrid truth = cfg.volume ? read_volume(*cfg.volume) : make_phantom(default_phantom_spec(cfg.side));
    truth.set_voxel_size(cfg.pixel_size);
    // Simulate from exactly what truth.mrc will hold.
    for (double& x : truth.data()) {
        x = static_cast<float>(x);
    }

    SimulationConfig sim;
    sim.count = cfg.count;
    sim.target_snr = cfg.snr > 0.0 ? cfg.snr : kNoNoise;
    sim.seed = cfg.seed;
    sim.pixel_size = cfg.pixel_size;
    sim.shift_std = cfg.shift_std;
    sim.shift_radius = cfg.shift_radius;

    SynthResult r;
    r.data = simulate_dataset(truth, sim);

    auto& m = r.manifest;
    m.side = truth.side();
    m.count = cfg.count;
    m.pixel_size = cfg.pixel_size;
    m.sigma = r.data.sigma;
    m.target_snr = sim.target_snr;
    m.signal_variance = r.data.signal_variance;
    m.seed = cfg.seed;
    m.truth_file = "truth.mrc";

    ParticleStack stack;
    stack.pixel_size = cfg.pixel_size;
    stack.images = r.data.images;
    for (std::size_t i = 0; i < cfg.count; ++i) {
        stack.records.push_back({i, r.data.ctfs[i], r.data.orientations[i], r.data.shifts[i]});
    }
    write_stack(cfg.output / m.stack_file, cfg.output / m.metadata_file, stack);
    if (cfg.write_clean) {
        m.clean_file = "clean.mrcs";
        stack.images = r.data.clean;
        write_stack(cfg.output / m.clean_file, cfg.output / "clean.csv", stack);
    }
    write_volume(cfg.output / m.truth_file, truth);
    write_manifest(cfg.output, m);
    return r;
}

VolumeGrid cmd_init(const InitConfig& cfg) {
    ensure_writable(cfg.output, cfg.force);
    const double lo = cfg.min_radius > 0.0 ? cfg.min_radius : cfg.side / 16.0;
    const double hi = cfg.max_radius > 0.0 ? cfg.max_radius : cfg.side / 8.0;
    auto v = random_init(cfg.side, cfg.spheres, lo, hi, cfg.seed);
    v.set_voxel_size(cfg.voxel_size);
    if (cfg.output.has_parent_path()) {
        fs::create_directories(cfg.output.parent_path());
    }
    write_volume(cfg.output, v);
    return v;
}

PoseScheme make_pose_scheme(const ModelConfig& m, int side) {
    if ((m.lebedev_order > 0) != (m.inplane_count > 0)) {
        throw ConfigError("lebedev_order and inplane_count must be given together");
    }
    if (m.lebedev_order > 0) {
        return build_pose_scheme(m.lebedev_order, m.inplane_count, m.shift_prior);
    }
    return build_pose_scheme(m.cutoff, side, m.shift_prior);
}

HoldoutSplit split_holdout(std::size_t count, std::size_t holdout, std::uint64_t seed) {
    if (holdout >= count) {
        throw ConfigError(fmt::format("holdout of {} leaves no training images out of {}", holdout, count));
    }
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = stream_rng(seed, 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    HoldoutSplit s;
    s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(holdout));
    s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(holdout), idx.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

OptimizerConfig default_optimizer_config(Method m) {
    OptimizerConfig c;
    c.method = m;
    switch (m) {
    case Method::sgd: c.schedule.eta0 = 1e-3; break;
    case Method::cm: c.schedule.eta0 = 5e-4; break;
    case Method::nag: c.schedule.eta0 = 5e-4; break;
    case Method::adagrad: c.schedule.eta0 = 0.2; break;
    case Method::tonga:
        c.schedule.eta0 = 1.5e4;
        c.tonga_epsilon = 1e7;
        break;
    case Method::olbfgs:
        c.schedule.eta0 = 1.0;
        c.lbfgs_initial_gamma = 1e-3;
        break;
    case Method::hf: c.hf_damping = 1000.0; break;
    }
    return c;
}

void RunConfig::validate() const {
    optimizer.validate();
    if (batch_size == 0) {
        throw ConfigError("batch size must be positive");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be at least 1");
    }
    if (metrics_every == 0 || test_every == 0) {
        throw ConfigError("metrics and test cadences must be positive");
    }
    if (!(prior.lambda_plus >= 0.0) || !(prior.lambda_minus >= 0.0)) {
        throw ConfigError("prior rates must be non-negative");
    }
    if (model.oversampling < 1) {
        throw ConfigError("oversampling must be at least 1");
    }
}

RunSummary cmd_reconstruct(const RunConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const Dataset data = load_dataset(cfg.dataset);
    const int n = data.manifest.side;
    const VolumeGrid init = read_volume(cfg.init_volume);
    if (init.side() != n) {
        throw DataError(fmt::format("initial volume has side {} but the dataset images are {} pixels", init.side(), n));
    }
    const NoiseModel noise{resolve_sigma(cfg.sigma, data.manifest)};

    fs::create_directories(cfg.output_dir);
    ensure_writable(cfg.output_dir / "metrics.csv", cfg.force);

    const Projector proj(n, cfg.model.cutoff, cfg.model.oversampling, cfg.model.kernel);
    const PoseScheme scheme = make_pose_scheme(cfg.model, n);
    const auto obs = build_observations(data, proj.mask());

    RunSummary summary;
    summary.split = split_holdout(obs.size(), cfg.holdout, cfg.seed);
    const auto& train = summary.split.train;
    const auto test = select(obs, summary.split.test);
    const std::size_t batch = step_batch_size(cfg.optimizer, cfg.batch_size);
    if (batch > train.size()) {
        throw ConfigError(fmt::format("minibatch of {} exceeds the {} training images", batch, train.size()));
    }
    const std::size_t steps_per_epoch = train.size() / batch;

    {
        std::ofstream out(cfg.output_dir / "run_config.json", std::ios::trunc);
        out << config_json(cfg).dump(2) << '\n';
    }

    Optimizer opt(cfg.optimizer, init.size());
    std::vector<double> v = init.values();
    std::vector<double> last_good = v;
    MetricsLog log(cfg.output_dir / "metrics.csv");
    std::size_t next_snapshot = 0;
    auto thresholds = cfg.snapshot_evaluations;
    std::sort(thresholds.begin(), thresholds.end());

    auto test_nll = [&](std::span<const double> x) {
        if (test.empty()) {
            return std::optional<double>{};
        }
        return std::optional<double>{dataset_nll(proj, test, float_rounded(x, n), scheme, noise)};
    };
    auto write_snapshot = [&](const fs::path& path, std::span<const double> x) {
        VolumeGrid vol(n, std::vector<double>(x.begin(), x.end()), init.voxel_size());
        write_volume(path, vol);
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = train;
        auto rng = stream_rng(cfg.seed, static_cast<std::uint64_t>(epoch) + 1);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            const auto batch_obs =
                select(obs, std::span(order).subspan(s * batch, batch));
            const GradientSource source = [&](std::span<const double> x) {
                const VolumeGrid vol(n, std::vector<double>(x.begin(), x.end()));
                auto o = minibatch_objective(proj, batch_obs, vol, scheme, noise, cfg.prior, train.size());
                return Evaluation{o.value, std::move(o.gradient.values())};
            };
            StepReport report;
            try {
                report = opt.step(v, source);
                if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
                    throw NumericalError(fmt::format("volume became non-finite at iteration {}", opt.iteration()));
                }
            } catch (const NumericalError&) {
                write_snapshot(cfg.output_dir / "last_good.mrc", last_good);
                throw;
            }
            last_good = v;
            ++summary.steps;
            summary.gradient_evaluations += static_cast<std::size_t>(report.gradient_calls) * batch;

            const bool epoch_end = s + 1 == steps_per_epoch;
            if (summary.steps % cfg.metrics_every != 0 && !epoch_end) {
                continue;
            }
            MetricsRow row;
            row.iteration = summary.steps;
            row.gradient_evaluations = summary.gradient_evaluations;
            row.minibatch_objective = report.value;
            row.step_norm = report.step_norm;
            row.learning_rate = report.learning_rate;
            if (summary.steps % cfg.test_every == 0 || epoch_end) {
                row.test_nll_per_image = test_nll(v);
                bool snap = epoch_end;
                while (next_snapshot < thresholds.size() && summary.gradient_evaluations >= thresholds[next_snapshot]) {
                    snap = true;
                    ++next_snapshot;
                }
                if (snap) {
                    const auto path = cfg.output_dir / fmt::format("snapshot_{:06d}.mrc", summary.steps);
                    write_snapshot(path, v);
                    summary.snapshots.push_back(path);
                }
            }
            row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            log.append(row);
            summary.rows.push_back(row);
        }
    }

    summary.final_volume = VolumeGrid(n, v, init.voxel_size());
    write_volume(cfg.output_dir / "final.mrc", summary.final_volume);
    if (!summary.rows.empty()) {
        summary.final_test_nll = summary.rows.back().test_nll_per_image;
    }
    return summary;
}

EvaluateReport cmd_evaluate(const EvaluateConfig& cfg) {
    const Dataset data = load_dataset(cfg.dataset);
    const int n = data.manifest.side;
    const VolumeGrid v = read_volume(cfg.volume);
    if (v.side() != n) {
        throw DataError(fmt::format("volume has side {} but the dataset images are {} pixels", v.side(), n));
    }
    const NoiseModel noise{resolve_sigma(cfg.sigma, data.manifest)};
    const Projector proj(n, cfg.model.cutoff, cfg.model.oversampling, cfg.model.kernel);
    const PoseScheme scheme = make_pose_scheme(cfg.model, n);
    const auto obs = build_observations(data, proj.mask());
    std::vector<std::size_t> idx;
    if (cfg.subset == Subset::holdout) {
        idx = split_holdout(obs.size(), cfg.holdout, cfg.seed).test;
    } else {
        idx.resize(obs.size());
        std::iota(idx.begin(), idx.end(), 0);
    }
    const auto subset = select(obs, idx);
    EvaluateReport r;
    r.count = subset.size();
    r.per_image = dataset_nll(proj, subset, v, scheme, noise);
    r.total = r.per_image * static_cast<double>(r.count);
    return r;
}

std::vector<CompareTrace> cmd_compare(const CompareConfig& cfg) {
    if (cfg.methods.empty()) {
        throw ConfigError("compare needs at least one method");
    }
    fs::create_directories(cfg.base.output_dir);
    ensure_writable(cfg.base.output_dir / "compare.csv", cfg.base.force);
    std::vector<CompareTrace> traces;
    for (Method m : cfg.methods) {
        RunConfig run = cfg.base;
        run.optimizer = default_optimizer_config(m);
        for (const auto& [method, eta] : cfg.eta0) {
            if (method == m) {
                run.optimizer.schedule.eta0 = eta;
            }
        }
        run.output_dir = cfg.base.output_dir / std::string(method_name(m));
        traces.push_back({m, cmd_reconstruct(run)});
    }
    std::ofstream out(cfg.base.output_dir / "compare.csv", std::ios::trunc);
    out << "method,iteration,gradient_evaluations,test_nll_per_image,minibatch_objective\n";
    for (const auto& t : traces) {
        auto rows = t.run.rows;
        std::stable_sort(rows.begin(), rows.end(),
                         [](const auto& a, const auto& b) { return a.gradient_evaluations < b.gradient_evaluations; });
        for (const auto& r : rows) {
            out << fmt::format("{},{},{},{},{:.10f}\n", method_name(t.method), r.iteration, r.gradient_evaluations,
                               r.test_nll_per_image ? fmt::format("{:.10f}", *r.test_nll_per_image) : "",
                               r.minibatch_objective);
        }
    }
    return traces;
}

} // namespace cryostoch
