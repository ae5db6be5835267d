#include "cryostoch/error.hpp"
#include "cryostoch/run.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

namespace cryostoch {
namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4 };

const std::map<std::string, Interpolation> kKernels{{"trilinear", Interpolation::trilinear},
                                                    {"sinc", Interpolation::windowed_sinc},
                                                    {"sinc8", Interpolation::wide_sinc}};

struct ShiftFlags {
    double std_dev = 0.0;
    double radius = 2.0;
    double spacing = 1.0;

    ShiftPrior prior() const {
        if (std_dev <= 0.0) {
            return ShiftPrior::none();
        }
        return ShiftPrior{std_dev, radius, spacing, false};
    }
};

void add_model_flags(CLI::App* app, ModelConfig& m, ShiftFlags& shifts) {
    app->add_option("--cutoff", m.cutoff, "Frequency cutoff as a fraction of Nyquist")->capture_default_str();
    app->add_option("--oversampling", m.oversampling, "Fourier padding factor")->capture_default_str();
    app->add_option("--kernel", m.kernel, "Slice interpolation kernel")
        ->transform(CLI::CheckedTransformer(kKernels, CLI::ignore_case))
        ->option_text("trilinear|sinc|sinc8")
        ->default_str(std::string(kernel_name(m.kernel)));
    app->add_option("--shift-std", shifts.std_dev, "Shift prior std in pixels (0 = no shifts)")->capture_default_str();
    app->add_option("--shift-radius", shifts.radius, "Shift prior truncation radius")->capture_default_str();
    app->add_option("--shift-spacing", shifts.spacing, "Shift grid spacing")->capture_default_str();
    app->add_option("--lebedev-order", m.lebedev_order, "Override the Lebedev order (0 = auto)")
        ->capture_default_str();
    app->add_option("--inplane", m.inplane_count, "Override the in-plane angle count (0 = auto)")
        ->capture_default_str();
}

struct OptimizerFlags {
    std::string method = "sgd";
    std::optional<double> eta0;
    std::optional<double> lambda_anneal;
    std::optional<double> momentum;
    std::optional<double> adagrad_eps;
    std::optional<int> tonga_rank;
    std::optional<int> tonga_period;
    std::optional<double> tonga_eps;
    std::optional<int> lbfgs_memory;
    std::optional<double> lbfgs_reg;
    std::optional<double> lbfgs_gamma;
    std::optional<int> cg_iters;
    std::optional<double> hf_damping;
    std::optional<std::size_t> hf_batch;

    OptimizerConfig resolve() const {
        auto c = default_optimizer_config(parse_method(method));
        if (eta0) c.schedule.eta0 = *eta0;
        if (lambda_anneal) c.schedule.lambda_anneal = *lambda_anneal;
        if (momentum) c.fixed_momentum = *momentum;
        if (adagrad_eps) c.adagrad_epsilon = *adagrad_eps;
        if (tonga_rank) c.tonga_rank = *tonga_rank;
        if (tonga_period) c.tonga_period = *tonga_period;
        if (tonga_eps) c.tonga_epsilon = *tonga_eps;
        if (lbfgs_memory) c.lbfgs_memory = *lbfgs_memory;
        if (lbfgs_reg) c.lbfgs_regularizer = *lbfgs_reg;
        if (lbfgs_gamma) c.lbfgs_initial_gamma = *lbfgs_gamma;
        if (cg_iters) c.cg_iterations = *cg_iters;
        if (hf_damping) c.hf_damping = *hf_damping;
        if (hf_batch) c.hf_batch_size = *hf_batch;
        c.validate();
        return c;
    }
};

void add_optimizer_flags(CLI::App* app, OptimizerFlags& o) {
    app->add_option("--method", o.method, "sgd, cm, nag, adagrad, tonga, olbfgs or hf")->capture_default_str();
    app->add_option("--eta0", o.eta0, "Base learning rate (default: tuned per method)");
    app->add_option("--lambda-anneal", o.lambda_anneal, "Learning-rate annealing constant");
    app->add_option("--momentum", o.momentum, "Fixed momentum instead of the schedule");
    app->add_option("--adagrad-eps", o.adagrad_eps);
    app->add_option("--tonga-rank", o.tonga_rank);
    app->add_option("--tonga-period", o.tonga_period);
    app->add_option("--tonga-eps", o.tonga_eps);
    app->add_option("--lbfgs-memory", o.lbfgs_memory);
    app->add_option("--lbfgs-reg", o.lbfgs_reg);
    app->add_option("--lbfgs-gamma", o.lbfgs_gamma, "Initial inverse-Hessian scale");
    app->add_option("--cg-iters", o.cg_iters);
    app->add_option("--hf-damping", o.hf_damping);
    app->add_option("--hf-batch", o.hf_batch);
}

void add_run_flags(CLI::App* app, RunConfig& r, ShiftFlags& shifts) {
    app->add_option("--dataset", r.dataset, "Dataset directory")->required();
    app->add_option("--init", r.init_volume, "Initial volume (MRC)")->required();
    app->add_option("--out", r.output_dir, "Output directory")->required();
    add_model_flags(app, r.model, shifts);
    app->add_option("--lambda-plus", r.prior.lambda_plus)->capture_default_str();
    app->add_option("--lambda-minus", r.prior.lambda_minus)->capture_default_str();
    app->add_option("--sigma", r.sigma, "Noise std (default: from the dataset)");
    app->add_option("--batch", r.batch_size)->capture_default_str();
    app->add_option("--epochs", r.epochs)->capture_default_str();
    app->add_option("--holdout", r.holdout)->capture_default_str();
    app->add_option("--seed", r.seed)->capture_default_str();
    app->add_option("--metrics-every", r.metrics_every)->capture_default_str();
    app->add_option("--test-every", r.test_every)->capture_default_str();
    app->add_option("--snapshot-at", r.snapshot_evaluations, "Gradient-evaluation counts for extra snapshots")
        ->capture_default_str();
    app->add_flag("--force", r.force, "Overwrite existing outputs");
}

std::string toml_value(const std::string& v) {
    if (v == "true" || v == "false") {
        return v;
    }
    char* end = nullptr;
    std::strtod(v.c_str(), &end);
    if (!v.empty() && end == v.c_str() + v.size()) {
        return v;
    }
    return fmt::format("\"{}\"", v);
}

// Options of the chosen subcommand as given on the command line or defaulted,
// readable back through --config. Unset optional overrides are left out.
void write_effective_config(const CLI::App& sub, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "effective_config.toml", std::ios::trunc);
    out << '[' << sub.get_name() << "]\n";
    for (const CLI::Option* opt : sub.get_options()) {
        const auto name = opt->get_single_name();
        if (name == "help" || name == "force") {
            continue;
        }
        std::vector<std::string> values = opt->results();
        if (opt->count() == 0) {
            if (opt->get_default_str().empty()) {
                continue;
            }
            values = {opt->get_default_str()};
        }
        if (values.size() == 1 && opt->get_items_expected_max() <= 1) {
            out << fmt::format("{}={}\n", name, toml_value(values[0]));
            continue;
        }
        // Vector defaults are captured as "[a,b]".
        if (values.size() == 1 && values[0].size() >= 2 && values[0].front() == '[') {
            values = CLI::detail::split(values[0].substr(1, values[0].size() - 2), ',');
        }
        std::vector<std::string> items;
        for (const auto& v : values) {
            items.push_back(toml_value(v));
        }
        out << fmt::format("{}=[{}]\n", name, fmt::join(items, ","));
    }
}

void print_trace(std::ostream& out, const RunSummary& s) {
    out << fmt::format("steps {} gradient_evaluations {}\n", s.steps, s.gradient_evaluations);
    if (s.final_test_nll) {
        out << fmt::format("final test NLL per image {:.6f}\n", *s.final_test_nll);
    }
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Cryo-EM density reconstruction by stochastic MAP optimization"};
    app.set_config("--config", "", "TOML configuration file");
    app.require_subcommand(1);

    SynthConfig synth;
    std::string synth_volume;
    auto* synth_cmd = app.add_subcommand("synth", "Simulate a particle dataset from a phantom or volume");
    synth_cmd->add_option("--out", synth.output, "Dataset directory")->required();
    synth_cmd->add_option("--volume", synth_volume, "Ground-truth volume (default: built-in phantom)");
    synth_cmd->add_option("--side", synth.side)->capture_default_str();
    synth_cmd->add_option("--count", synth.count)->capture_default_str();
    synth_cmd->add_option("--snr", synth.snr, "Target SNR (0 disables noise)")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
    synth_cmd->add_option("--pixel-size", synth.pixel_size)->capture_default_str();
    synth_cmd->add_option("--shift-std", synth.shift_std)->capture_default_str();
    synth_cmd->add_option("--shift-radius", synth.shift_radius)->capture_default_str();
    synth_cmd->add_flag("--write-clean", synth.write_clean, "Also write the noise-free stack");
    synth_cmd->add_flag("--force", synth.force);

    InitConfig init;
    auto* init_cmd = app.add_subcommand("init", "Random-spheres initial volume");
    init_cmd->add_option("--out", init.output)->required();
    init_cmd->add_option("--side", init.side)->capture_default_str();
    init_cmd->add_option("--spheres", init.spheres)->capture_default_str();
    init_cmd->add_option("--min-radius", init.min_radius, "0 = side/16")->capture_default_str();
    init_cmd->add_option("--max-radius", init.max_radius, "0 = side/8")->capture_default_str();
    init_cmd->add_option("--seed", init.seed)->capture_default_str();
    init_cmd->add_option("--voxel-size", init.voxel_size)->capture_default_str();
    init_cmd->add_flag("--force", init.force);

    RunConfig run;
    ShiftFlags run_shifts;
    OptimizerFlags run_opt;
    auto* rec_cmd = app.add_subcommand("reconstruct", "Run one optimizer");
    add_run_flags(rec_cmd, run, run_shifts);
    add_optimizer_flags(rec_cmd, run_opt);

    EvaluateConfig eval;
    ShiftFlags eval_shifts;
    bool eval_all = false;
    auto* eval_cmd = app.add_subcommand("evaluate", "Negative log marginal likelihood of a volume");
    eval_cmd->add_option("--dataset", eval.dataset)->required();
    eval_cmd->add_option("--volume", eval.volume)->required();
    add_model_flags(eval_cmd, eval.model, eval_shifts);
    eval_cmd->add_option("--sigma", eval.sigma);
    eval_cmd->add_option("--holdout", eval.holdout)->capture_default_str();
    eval_cmd->add_option("--seed", eval.seed, "Seed of the holdout split")->capture_default_str();
    eval_cmd->add_flag("--all", eval_all, "Evaluate every image instead of the holdout set");

    CompareConfig cmp;
    ShiftFlags cmp_shifts;
    std::vector<std::string> cmp_methods{"sgd", "cm", "nag", "adagrad", "tonga", "olbfgs", "hf"};
    std::vector<std::pair<std::string, double>> cmp_eta;
    auto* cmp_cmd = app.add_subcommand("compare", "Run several optimizers on one dataset");
    add_run_flags(cmp_cmd, cmp.base, cmp_shifts);
    cmp_cmd->add_option("--methods", cmp_methods)->capture_default_str();
    cmp_cmd->add_option("--eta0", cmp_eta, "Learning-rate overrides as method value pairs");

    std::string info_path;
    auto* info_cmd = app.add_subcommand("info", "Describe a dataset, volume or pose scheme");
    info_cmd->add_option("path", info_path, "Dataset directory or MRC file");
    ModelConfig info_model;
    ShiftFlags info_shifts;
    int info_side = 0;
    info_cmd->add_option("--side", info_side, "Print the pose scheme for this grid side");
    add_model_flags(info_cmd, info_model, info_shifts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*synth_cmd) {
            if (!synth_volume.empty()) {
                synth.volume = synth_volume;
            }
            const auto r = cmd_synth(synth);
            std::cout << fmt::format("wrote {} images of side {} to {} (sigma {:.6g}, signal variance {:.6g})\n",
                                     r.manifest.count, r.manifest.side, synth.output.string(), r.manifest.sigma,
                                     r.manifest.signal_variance);
        } else if (*init_cmd) {
            const auto v = cmd_init(init);
            std::cout << fmt::format("wrote {} (side {}, sum {:.6g})\n", init.output.string(), v.side(), v.sum());
        } else if (*rec_cmd) {
            run.model.shift_prior = run_shifts.prior();
            run.optimizer = run_opt.resolve();
            run.validate();
            write_effective_config(*rec_cmd, run.output_dir);
            print_trace(std::cout, cmd_reconstruct(run));
        } else if (*eval_cmd) {
            eval.model.shift_prior = eval_shifts.prior();
            eval.subset = eval_all ? Subset::all : Subset::holdout;
            const auto r = cmd_evaluate(eval);
            std::cout << fmt::format("images {}\nper_image_nll {:.10f}\ntotal_nll {:.10f}\n", r.count, r.per_image,
                                     r.total);
        } else if (*cmp_cmd) {
            cmp.base.model.shift_prior = cmp_shifts.prior();
            for (const auto& m : cmp_methods) {
                cmp.methods.push_back(parse_method(m));
            }
            for (const auto& [m, eta] : cmp_eta) {
                cmp.eta0.emplace_back(parse_method(m), eta);
            }
            write_effective_config(*cmp_cmd, cmp.base.output_dir);
            for (const auto& t : cmd_compare(cmp)) {
                std::cout << method_name(t.method) << ": ";
                print_trace(std::cout, t.run);
            }
        } else if (*info_cmd) {
            info_model.shift_prior = info_shifts.prior();
            if (info_side > 0) {
                const auto res = orientation_resolution(info_model.cutoff, info_side);
                const auto scheme = make_pose_scheme(info_model, info_side);
                std::cout << fmt::format("lebedev_order {}\ninplane {}\nangular_spacing {:.6f}\norientations {}\n"
                                         "shifts {}\nposes {}\n",
                                         scheme.lebedev_order(), scheme.inplane_count(), res.angular_spacing,
                                         scheme.orientation_count(), scheme.shift_count(), scheme.size());
            }
            if (!info_path.empty()) {
                if (std::filesystem::is_directory(info_path)) {
                    const auto m = read_manifest(info_path);
                    std::cout << fmt::format("images {}\nside {}\npixel_size {}\nsigma {}\n", m.count, m.side,
                                             m.pixel_size, m.sigma);
                } else {
                    const auto i = read_mrc_info(info_path);
                    std::cout << fmt::format("nx {}\nny {}\nnz {}\nmode {}\nvoxel_size {}\n", i.nx, i.ny, i.nz,
                                             i.mode, i.voxel_size);
                }
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DimensionError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}

} // namespace cryostoch
