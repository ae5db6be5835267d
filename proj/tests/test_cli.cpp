#include "support.hpp"

#include "cryostoch/error.hpp"
#include "cryostoch/io.hpp"
#include "cryostoch/run.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <iterator>
#include <set>

using namespace cryostoch;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 1100 noisy 16-pixel images and a random-spheres start, shared by the run tests.
const fs::path& small_dataset() {
    static const fs::path dir = [] {
        auto d = testing::scratch_dir("cli_data");
        SynthConfig s;
        s.output = d / "ds";
        s.side = 16;
        s.count = 1100;
        s.seed = 5;
        cmd_synth(s);
        InitConfig i;
        i.output = d / "init.mrc";
        i.side = 16;
        i.seed = 2;
        cmd_init(i);
        return d;
    }();
    return dir;
}

RunConfig small_run(const fs::path& out, Method m = Method::sgd) {
    RunConfig r;
    r.dataset = small_dataset() / "ds";
    r.init_volume = small_dataset() / "init.mrc";
    r.output_dir = out;
    r.optimizer = default_optimizer_config(m);
    r.epochs = 2;
    r.metrics_every = 1;
    r.test_every = 5;
    r.force = true;
    return r;
}

std::vector<std::string> metrics_without_wall_time(const fs::path& p) {
    std::vector<std::string> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
        const auto a = line.find(',');
        const auto b = line.find(',', a + 1);
        const auto c = line.find(',', b + 1);
        out.push_back(line.substr(0, b) + line.substr(c));
    }
    return out;
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "cryostoch");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("synth output is determined by the seed and is not silently overwritten") {
    const auto dir = testing::scratch_dir("cli_synth");
    SynthConfig s;
    s.side = 16;
    s.count = 100;
    s.seed = 8;
    s.output = dir / "a";
    cmd_synth(s);
    s.output = dir / "b";
    cmd_synth(s);
    for (const char* f : {"particles.mrcs", "particles.csv", "truth.mrc", "dataset.json"}) {
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    CHECK_THROWS_AS(cmd_synth(s), ConfigError);
    s.force = true;
    CHECK_NOTHROW(cmd_synth(s));
    s.seed = 9;
    cmd_synth(s);
    CHECK(slurp(dir / "a" / "particles.mrcs") != slurp(dir / "b" / "particles.mrcs"));

    const auto m = read_manifest(dir / "a");
    CHECK(m.count == 100);
    CHECK(m.side == 16);
    CHECK(m.seed == 8);
    CHECK(std::abs(m.signal_variance / (m.sigma * m.sigma) - 0.2) < 1e-12);
}

TEST_CASE("stored poses regenerate the noise-free images") {
    const auto dir = testing::scratch_dir("cli_regen");
    SynthConfig s;
    s.output = dir;
    s.side = 16;
    s.count = 25;
    s.snr = 0.0;
    s.seed = 3;
    s.shift_std = 1.0;
    s.shift_radius = 2.0;
    s.write_clean = true;
    cmd_synth(s);
    const auto data = load_dataset(dir);
    CHECK(data.manifest.sigma == 0.0);
    REQUIRE(data.stack.has_poses());
    const auto clean = read_stack(dir / "clean.mrcs", dir / "clean.csv");
    const auto truth = read_volume(dir / "truth.mrc");
    const ImageRenderer renderer(truth, data.manifest.pixel_size);
    double worst = 0.0;
    for (std::size_t i = 0; i < data.stack.images.size(); ++i) {
        const auto& rec = data.stack.records[i];
        const auto img = renderer.render(rotation_from_quaternion(*rec.orientation), rec.shift, rec.ctf);
        double scale = 0.0;
        for (std::size_t p = 0; p < img.pixels().size(); ++p) {
            const double stored = data.stack.images[i].pixels()[p];
            CHECK(stored == clean.images[i].pixels()[p]);
            worst = std::max(worst, std::abs(static_cast<double>(static_cast<float>(img.pixels()[p])) - stored));
            scale = std::max(scale, std::abs(stored));
        }
        worst /= scale;
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("init writes a seeded random-spheres volume") {
    const auto dir = testing::scratch_dir("cli_init");
    InitConfig c;
    c.output = dir / "v.mrc";
    c.side = 24;
    c.seed = 4;
    const auto v = cmd_init(c);
    CHECK(v.values() == random_init(24, 10, 1.5, 3.0, 4).values());
    const auto back = read_volume(c.output);
    CHECK(back.side() == 24);
    for (std::size_t i = 0; i < v.size(); ++i) {
        REQUIRE(back.data()[i] == static_cast<double>(static_cast<float>(v.data()[i])));
    }
    CHECK_THROWS_AS(cmd_init(c), ConfigError);
}

TEST_CASE("holdout split") {
    const auto a = split_holdout(1000, 100, 7);
    const auto b = split_holdout(1000, 100, 7);
    const auto c = split_holdout(1000, 100, 8);
    CHECK(a.test == b.test);
    CHECK(a.test != c.test);
    CHECK(a.test.size() == 100);
    CHECK(a.train.size() == 900);
    CHECK(std::is_sorted(a.train.begin(), a.train.end()));
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all.size() == 1000);
    CHECK_THROWS_AS((void)split_holdout(10, 10, 1), ConfigError);
}

TEST_CASE("reconstruction accounting and logging cadence") {
    const auto dir = testing::scratch_dir("cli_accounting");
    const auto s = cmd_reconstruct(small_run(dir / "run"));
    CHECK(s.split.train.size() == 1000);
    CHECK(s.steps == 20);
    REQUIRE(s.rows.size() == 20);
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        CHECK(s.rows[i].iteration == i + 1);
        CHECK(s.rows[i].gradient_evaluations == 100 * (i + 1));
        CHECK(s.rows[i].test_nll_per_image.has_value() == ((i + 1) % 5 == 0));
    }
    CHECK(s.gradient_evaluations == 2000);
    const auto logged = read_metrics(dir / "run" / "metrics.csv");
    REQUIRE(logged.size() == 20);
    CHECK(logged.back().gradient_evaluations == 2000);
    CHECK(fs::exists(dir / "run" / "final.mrc"));

    const auto json = nlohmann::json::parse(slurp(dir / "run" / "run_config.json"));
    CHECK(json.at("optimizer").at("method") == "sgd");
    CHECK(json.at("batch_size") == 100);

    // Refuses to overwrite a previous run.
    auto again = small_run(dir / "run");
    again.force = false;
    CHECK_THROWS_AS(cmd_reconstruct(again), ConfigError);
}

TEST_CASE("epoch ends are always logged and tested") {
    const auto dir = testing::scratch_dir("cli_cadence");
    auto cfg = small_run(dir / "run");
    cfg.metrics_every = 7;
    cfg.test_every = 1000;
    const auto s = cmd_reconstruct(cfg);
    std::vector<std::size_t> its;
    for (const auto& r : s.rows) {
        its.push_back(r.iteration);
    }
    CHECK(its == std::vector<std::size_t>{7, 10, 14, 20});
    CHECK_FALSE(s.rows[0].test_nll_per_image.has_value());
    CHECK(s.rows[1].test_nll_per_image.has_value());
    CHECK(s.rows[3].test_nll_per_image.has_value());
}

TEST_CASE("gradient evaluations follow each method's cost") {
    const auto dir = testing::scratch_dir("cli_costs");
    auto cfg = small_run(dir / "olbfgs", Method::olbfgs);
    cfg.epochs = 1;
    const auto o = cmd_reconstruct(cfg);
    CHECK(o.steps == 10);
    CHECK(o.gradient_evaluations == 2000);

    cfg = small_run(dir / "hf", Method::hf);
    cfg.epochs = 1;
    const auto h = cmd_reconstruct(cfg);
    CHECK(h.steps == 3);
    // At most one base gradient and five products per step on 300 images.
    CHECK(h.gradient_evaluations <= 3 * 1800);
    CHECK(h.gradient_evaluations % 300 == 0);
}

TEST_CASE("reconstruction is deterministic") {
    const auto dir = testing::scratch_dir("cli_determinism");
    const auto a = cmd_reconstruct(small_run(dir / "a"));
    const auto b = cmd_reconstruct(small_run(dir / "b"));
    CHECK(a.final_volume.values() == b.final_volume.values());
    CHECK(metrics_without_wall_time(dir / "a" / "metrics.csv") == metrics_without_wall_time(dir / "b" / "metrics.csv"));
    CHECK(slurp(dir / "a" / "final.mrc") == slurp(dir / "b" / "final.mrc"));
}

TEST_CASE("the data split does not depend on the optimizer") {
    const auto dir = testing::scratch_dir("cli_split");
    auto cfg = small_run(dir / "cm", Method::cm);
    cfg.epochs = 1;
    const auto cm = cmd_reconstruct(cfg);
    cfg = small_run(dir / "adagrad", Method::adagrad);
    cfg.epochs = 1;
    const auto ada = cmd_reconstruct(cfg);
    CHECK(cm.split.test == ada.split.test);
    CHECK(cm.split.test == split_holdout(1100, 100, 1).test);
}

TEST_CASE("snapshots re-evaluate to the logged test NLL") {
    const auto dir = testing::scratch_dir("cli_snapshots");
    auto cfg = small_run(dir / "run");
    cfg.snapshot_evaluations = {500};
    const auto s = cmd_reconstruct(cfg);
    REQUIRE(s.snapshots.size() == 3);
    for (const auto& path : s.snapshots) {
        const auto name = path.stem().string();
        const std::size_t it = std::stoul(name.substr(name.find('_') + 1));
        const auto row = std::find_if(s.rows.begin(), s.rows.end(), [&](const auto& r) { return r.iteration == it; });
        REQUIRE(row != s.rows.end());
        REQUIRE(row->test_nll_per_image.has_value());
        EvaluateConfig e;
        e.dataset = cfg.dataset;
        e.volume = path;
        const auto r = cmd_evaluate(e);
        CHECK(std::abs(r.per_image - *row->test_nll_per_image) <= 1e-9 * std::abs(r.per_image));
    }
}

TEST_CASE("evaluation totals and subsets") {
    EvaluateConfig e;
    e.dataset = small_dataset() / "ds";
    e.volume = small_dataset() / "ds" / "truth.mrc";
    const auto held = cmd_evaluate(e);
    CHECK(held.count == 100);
    CHECK(std::abs(held.total - held.per_image * 100) < 1e-9 * std::abs(held.total));
    e.subset = Subset::all;
    const auto all = cmd_evaluate(e);
    CHECK(all.count == 1100);
    e.volume = small_dataset() / "init.mrc";
    e.subset = Subset::holdout;
    CHECK(cmd_evaluate(e).per_image > held.per_image);
}

TEST_CASE("compare runs every method on the same split") {
    const auto dir = testing::scratch_dir("cli_compare");
    CompareConfig c;
    c.base = small_run(dir / "cmp");
    c.base.epochs = 1;
    c.methods = {Method::sgd, Method::nag};
    c.eta0 = {{Method::nag, 1e-4}};
    const auto traces = cmd_compare(c);
    REQUIRE(traces.size() == 2);
    CHECK(traces[0].run.split.test == traces[1].run.split.test);
    CHECK(fs::exists(dir / "cmp" / "sgd" / "metrics.csv"));
    CHECK(fs::exists(dir / "cmp" / "nag" / "metrics.csv"));
    const auto json = nlohmann::json::parse(slurp(dir / "cmp" / "nag" / "run_config.json"));
    CHECK(json.at("optimizer").at("eta0") == 1e-4);
    std::ifstream in(dir / "cmp" / "compare.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "method,iteration,gradient_evaluations,test_nll_per_image,minibatch_objective");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) {
        ++rows;
    }
    CHECK(rows == traces[0].run.rows.size() + traces[1].run.rows.size());
}

TEST_CASE("numerical failures keep the last good volume") {
    const auto dir = testing::scratch_dir("cli_blowup");
    auto cfg = small_run(dir / "run");
    cfg.optimizer.schedule.eta0 = 1e200;
    CHECK_THROWS_AS(cmd_reconstruct(cfg), NumericalError);
    CHECK(fs::exists(dir / "run" / "last_good.mrc"));
}

TEST_CASE("command line exit codes") {
    const auto dir = testing::scratch_dir("cli_main");
    const auto ds = (small_dataset() / "ds").string();
    const auto init = (small_dataset() / "init.mrc").string();
    CHECK(run_cli({"info", "--side", "32"}) == 0);
    CHECK(run_cli({"info", ds}) == 0);
    CHECK(run_cli({"bogus"}) == 2);
    CHECK(run_cli({"reconstruct", "--dataset", ds, "--init", init, "--out", (dir / "a").string(), "--method", "adam"}) ==
          2);
    CHECK(run_cli({"evaluate", "--dataset", (dir / "nowhere").string(), "--volume", init}) == 3);
    CHECK(run_cli({"evaluate", "--dataset", ds, "--volume", init, "--cutoff", "2"}) == 2);
    CHECK(run_cli({"reconstruct", "--dataset", ds, "--init", init, "--out", (dir / "b").string(), "--eta0", "1e200",
                   "--epochs", "1"}) == 4);
    CHECK(run_cli({"reconstruct", "--dataset", ds, "--init", init, "--out", (dir / "c").string(), "--epochs", "1",
                   "--metrics-every", "2"}) == 0);
    CHECK(fs::exists(dir / "c" / "effective_config.toml"));
    // The written configuration reproduces the run.
    CHECK(run_cli({"--config", (dir / "c" / "effective_config.toml").string(), "reconstruct", "--out",
                   (dir / "d").string()}) == 0);
    CHECK(metrics_without_wall_time(dir / "c" / "metrics.csv") == metrics_without_wall_time(dir / "d" / "metrics.csv"));
}
