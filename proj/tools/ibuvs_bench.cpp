// Benchmark CLI: runs single experiments, suites of spec files, or the two
// built-in scenarios, and writes CSV/JSON reports.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ibuvs/ibuvs.hpp"

namespace fs = std::filesystem;
using namespace ibuvs;

namespace {

struct CommonOpts {
    std::string out_dir = "out";
    bool allow_failures = false;
    bool have_seed = false;
    std::uint64_t seed = 0;
    bool have_noise = false;
    double noise = 0.0;
    bool have_samples = false;
    int samples = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("-o,--out", o.out_dir, "output directory for CSV/JSON artifacts");
    cmd->add_flag("--allow-failures", o.allow_failures,
                  "exit 0 even when runs diverge or planning fails");
    cmd->add_option("--seed", o.seed, "override RNG seed")->each([&](const std::string&) {
        o.have_seed = true;
    });
    cmd->add_option("--noise", o.noise, "override pixel noise sigma")
        ->each([&](const std::string&) { o.have_noise = true; });
    cmd->add_option("--samples", o.samples, "override trajectory sample count")
        ->each([&](const std::string&) { o.have_samples = true; });
}

void apply_overrides(ExperimentSpec& spec, const CommonOpts& o) {
    if (o.have_seed) spec.seed = o.seed;
    if (o.have_noise) spec.noise_sigma = o.noise;
    if (o.have_samples) spec.sample_count = o.samples;
}

void write_artifacts(const fs::path& dir, const RunReport& r) {
    fs::create_directories(dir);
    const std::string stem = r.name + "_" + method_name(r.method);
    write_servo_log_csv((dir / (stem + "_log.csv")).string(), r.log);
    if (r.has_trajectory)
        write_trajectory_csv((dir / (stem + "_trajectory.csv")).string(), r.trajectory);
    auto out = open_output((dir / (stem + "_report.json")).string());
    out << report_to_json(r).dump(2) << '\n';
}

int finish(const std::vector<RunReport>& reports, const CommonOpts& o) {
    std::cout << format_suite_table(reports);
    for (const auto& r : reports) write_artifacts(o.out_dir, r);
    std::cout << "artifacts written to " << o.out_dir << "/\n";
    if (o.allow_failures) return 0;
    for (const auto& r : reports) {
        if (r.status == RunReport::Status::Diverged ||
            r.status == RunReport::Status::PlanningFailed)
            return 1;
    }
    return 0;
}

std::vector<ExperimentSpec> builtin_case(int which, const std::string& method) {
    std::vector<ExperimentSpec> specs;
    auto make = which == 1 ? case1_spec : case2_spec;
    if (method == "all") {
        specs.push_back(make(Method::Ibuvs));
        specs.push_back(make(Method::IbuvsC));
        specs.push_back(make(Method::IbuvsR));
    } else {
        specs.push_back(make(method_from_string(method)));
    }
    return specs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"homography-based trajectory planning benchmark for uncalibrated visual servoing"};
    app.require_subcommand(1);

    CommonOpts run_opts, suite_opts, c1_opts, c2_opts;
    std::string spec_path, suite_dir;
    std::string c1_method = "all", c2_method = "all";

    auto* run = app.add_subcommand("run", "run a single experiment spec file (JSON)");
    run->add_option("spec", spec_path, "experiment spec JSON file")->required();
    add_common(run, run_opts);

    auto* suite = app.add_subcommand("suite", "run every *.json spec in a directory");
    suite->add_option("dir", suite_dir, "directory of experiment spec files")->required();
    add_common(suite, suite_opts);

    auto* c1 = app.add_subcommand("case1", "built-in benchmark: moderate initial deviation");
    c1->add_option("-m,--method", c1_method, "ibuvs, ibuvs-c, ibuvs-r or all");
    add_common(c1, c1_opts);

    auto* c2 = app.add_subcommand("case2", "built-in benchmark: large initial deviation");
    c2->add_option("-m,--method", c2_method, "ibuvs, ibuvs-c, ibuvs-r or all");
    add_common(c2, c2_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            ExperimentSpec spec = load_spec(spec_path);
            apply_overrides(spec, run_opts);
            return finish({run_experiment(spec)}, run_opts);
        }
        if (suite->parsed()) {
            std::vector<ExperimentSpec> specs;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(suite_dir))
                if (e.path().extension() == ".json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                ExperimentSpec spec = load_spec(f.string());
                apply_overrides(spec, suite_opts);
                specs.push_back(spec);
            }
            const SuiteResult result = run_suite(specs);
            return finish(result.reports, suite_opts);
        }
        const int which = c1->parsed() ? 1 : 2;
        CommonOpts& opts = which == 1 ? c1_opts : c2_opts;
        std::vector<ExperimentSpec> specs = builtin_case(which, which == 1 ? c1_method : c2_method);
        for (auto& s : specs) apply_overrides(s, opts);
        const SuiteResult result = run_suite(specs);
        return finish(result.reports, opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
