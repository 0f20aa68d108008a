// sdr: command-line front end for experiments, one-shot detection, S-matrix
// export, the Gram oracle check and dataset conversion.

#include "sdr/engine.hpp"
#include "sdr/error.hpp"
#include "sdr/harness.hpp"
#include "sdr/similarity.hpp"
#include "sdr/taskgen.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>

namespace {

using sdr::Json;

void print_error(std::string_view code, const std::string& message) {
    std::cerr << Json{{"error", code}, {"message", message}}.dump() << '\n';
}

sdr::taskgen::Dataset read_any_dataset(const std::filesystem::path& path) {
    if (path.extension() == ".csv") return sdr::taskgen::read_csv_dataset(path);
    return sdr::taskgen::read_dataset(path);
}

int cmd_run(const std::string& config_path, const std::string& out_override) {
    auto config = sdr::ExperimentConfig::from_file(config_path);
    if (!out_override.empty()) config.output_dir = out_override;
    const auto report = sdr::run_experiment(config);
    sdr::emit_reports(report, config.output_dir);
    Json summary = Json::array();
    for (const auto& p : report.policies) {
        summary.push_back({{"policy", std::string(sdr::to_string(p.policy))},
                           {"accuracy", p.accuracy},
                           {"correct", p.correct},
                           {"miss", p.miss},
                           {"incorrect", p.incorrect},
                           {"unique_entries", p.unique_entries},
                           {"megabytes", p.megabytes}});
    }
    std::cout << Json{{"output_dir", config.output_dir.string()}, {"policies", summary}}.dump(2) << '\n';
    if (report.failure) {
        print_error(sdr::to_string(*report.failure_code), *report.failure);
        return 1;
    }
    return 0;
}

int cmd_detect(const std::string& repo_dir, const std::string& dataset_path, std::uint64_t seed,
               std::size_t cap, const std::string& metric) {
    const auto repo = sdr::load_repository(repo_dir);
    const auto data = read_any_dataset(dataset_path);
    sdr::require(data.geometry == repo.architecture().input, sdr::ErrorCode::ShapeMismatch,
                 "dataset geometry does not match the repository");
    sdr::DetectorConfig det;
    det.sample_cap = cap;
    det.metric = metric == "association" ? sdr::similarity::MetricVariant::Association
                                         : sdr::similarity::MetricVariant::GramOfAssociation;
    sdr::Rng rng(seed);
    const sdr::LabeledSet set{data.x, data.y};
    const auto d = sdr::detect(repo, set, data.class_count, det, rng);
    std::vector<double> consistency(d.consistency.aggregate.data(),
                                    d.consistency.aggregate.data() + d.consistency.aggregate.size());
    std::cout << Json{{"a", d.a},
                      {"b", d.b},
                      {"verdict", d.a == d.b ? "reuse" : "new"},
                      {"entry", d.a == d.b ? d.a : -1},
                      {"entries", d.entry_ids},
                      {"s_values", d.s_values},
                      {"consistency", consistency},
                      {"uniformity", d.uniformity}}
                     .dump(2)
              << '\n';
    return 0;
}

int cmd_gram(const std::string& repo_dir, const std::vector<std::string>& inputs, std::uint64_t seed,
             std::size_t cap, const std::string& out_path) {
    const auto repo = sdr::load_repository(repo_dir);
    struct Row {
        std::string name;
        sdr::LabeledSet set;
        int classes;
    };
    std::vector<Row> rows;
    if (inputs.size() == 1 && std::filesystem::path(inputs.front()).extension() == ".json") {
        for (auto& t : sdr::taskgen::load_file_sequence(inputs.front())) {
            rows.push_back({t.name, std::move(t.train), t.class_count});
        }
    } else {
        for (const auto& p : inputs) {
            auto d = read_any_dataset(p);
            rows.push_back({std::filesystem::path(p).stem().string(), {std::move(d.x), std::move(d.y)}, d.class_count});
        }
    }
    sdr::DetectorConfig det;
    det.sample_cap = cap;
    std::ostringstream csv;
    csv << "task";
    for (const auto& e : repo.entries()) csv << ",entry_" << e.id;
    csv << '\n';
    csv.precision(17);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        sdr::Rng rng = sdr::Rng(seed).fork(i);
        const auto d = sdr::detect(repo, rows[i].set, rows[i].classes, det, rng);
        csv << rows[i].name;
        for (const double s : d.s_values) csv << ',' << s;
        csv << '\n';
    }
    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) sdr::fail(sdr::ErrorCode::IoError, "cannot write " + out_path);
        out << csv.str();
    }
    return 0;
}

int cmd_oracle_check(std::size_t pairs, std::size_t samples, std::size_t dim, std::uint64_t seed, double tolerance) {
    sdr::Rng rng(seed);
    double worst = 0.0;
    Json results = Json::array();
    for (std::size_t p = 0; p < pairs; ++p) {
        // Controlled angle: v = cos(t) u + sin(t) w with w orthogonal to u.
        std::vector<double> u(dim), w(dim), v(dim);
        auto normalize = [](std::vector<double>& x) {
            double n = 0.0;
            for (const double a : x) n += a * a;
            n = std::sqrt(n);
            for (auto& a : x) a /= n;
        };
        for (auto& a : u) a = rng.normal();
        normalize(u);
        for (auto& a : w) a = rng.normal();
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += u[i] * w[i];
        for (std::size_t i = 0; i < dim; ++i) w[i] -= dot * u[i];
        normalize(w);
        const double angle = std::numbers::pi * rng.uniform();
        for (std::size_t i = 0; i < dim; ++i) v[i] = std::cos(angle) * u[i] + std::sin(angle) * w[i];
        normalize(v);
        const double closed = sdr::similarity::gram_entry(u, v);
        sdr::Rng mc = rng.fork(p + 1);
        const double estimate = sdr::similarity::gram_entry_mc(u, v, samples, mc);
        worst = std::max(worst, std::abs(closed - estimate));
        results.push_back({{"pair", p}, {"angle", angle}, {"closed_form", closed}, {"monte_carlo", estimate}});
    }
    const bool pass = worst < tolerance;
    std::cout << Json{{"pairs", pairs},
                      {"samples", samples},
                      {"max_abs_error", worst},
                      {"tolerance", tolerance},
                      {"pass", pass},
                      {"results", results}}
                     .dump(2)
              << '\n';
    if (!pass) {
        print_error("OracleMismatch", "max |closed - mc| = " + std::to_string(worst));
        return 1;
    }
    return 0;
}

int cmd_convert(const std::string& in, const std::string& out, const std::vector<int>& shape) {
    std::optional<sdr::Geometry> geometry;
    if (!shape.empty()) {
        sdr::require(shape.size() == 3, sdr::ErrorCode::InvalidArgument, "--shape takes height width channels");
        geometry = sdr::Geometry{shape[0], shape[1], shape[2]};
    }
    const auto data = sdr::taskgen::read_csv_dataset(in, geometry);
    sdr::taskgen::write_dataset(data, out);
    std::cout << Json{{"rows", data.y.size()},
                      {"classes", data.class_count},
                      {"geometry", sdr::to_json(data.geometry)},
                      {"output", out}}
                     .dump()
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Similar-task detection and repurposing for continual learning"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    auto* run = app.add_subcommand("run", "Run a full experiment and write reports");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "Override the output directory");

    std::string repo_dir, dataset_path, metric = "gram_of_association";
    std::uint64_t seed = 0;
    std::size_t cap = sdr::similarity::kDefaultSampleCap;
    auto* detect = app.add_subcommand("detect", "One-shot reuse/new decision for a dataset");
    detect->add_option("repo", repo_dir, "Repository directory")->required();
    detect->add_option("dataset", dataset_path, "Dataset (.sdrd or .csv)")->required();
    detect->add_option("--seed", seed, "Subsampling seed");
    detect->add_option("--cap", cap, "Subsample cap");
    detect->add_option("--metric", metric, "gram_of_association or association")
        ->check(CLI::IsMember({"gram_of_association", "association"}));

    std::vector<std::string> gram_inputs;
    std::string gram_out;
    auto* gram = app.add_subcommand("gram", "S(j,t) matrix as CSV (rows = tasks, columns = entries)");
    gram->add_option("repo", repo_dir, "Repository directory")->required();
    gram->add_option("sequence", gram_inputs, "Sequence manifest (.json) or dataset files")->required();
    gram->add_option("--seed", seed, "Subsampling seed");
    gram->add_option("--cap", cap, "Subsample cap");
    gram->add_option("--out", gram_out, "Write CSV here instead of stdout");

    std::size_t pairs = 50, samples = 1000000, dim = 8;
    double tolerance = 5e-3;
    auto* oracle = app.add_subcommand("oracle-check", "Closed-form Gram entries vs Monte-Carlo expectation");
    oracle->add_option("--pairs", pairs, "Random unit-vector pairs");
    oracle->add_option("--samples", samples, "Monte-Carlo samples per pair");
    oracle->add_option("--dim", dim, "Vector dimension")->check(CLI::PositiveNumber);
    oracle->add_option("--seed", seed, "Seed");
    oracle->add_option("--tolerance", tolerance, "Maximum absolute error");

    std::string csv_in, sdrd_out;
    std::vector<int> shape;
    auto* convert = app.add_subcommand("convert", "Convert a label-first CSV to the native dataset format");
    convert->add_option("input", csv_in, "CSV file")->required();
    convert->add_option("output", sdrd_out, "Output .sdrd file")->required();
    convert->add_option("--shape", shape, "height width channels")->expected(3);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("InvalidArgument", e.what());
        return 2;
    }

    try {
        if (*run) return cmd_run(config_path, out_dir);
        if (*detect) return cmd_detect(repo_dir, dataset_path, seed, cap, metric);
        if (*gram) return cmd_gram(repo_dir, gram_inputs, seed, cap, gram_out);
        if (*oracle) return cmd_oracle_check(pairs, samples, dim, seed, tolerance);
        if (*convert) return cmd_convert(csv_in, sdrd_out, shape);
    } catch (const sdr::Error& e) {
        print_error(sdr::to_string(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("Internal", e.what());
        return 1;
    }
    return 0;
}
