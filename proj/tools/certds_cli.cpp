// certds_cli: ingest demonstrations, train certified dynamics, verify, evaluate and
// export plot data. Exit status 0 = success/verified, 2 = finished but not
// verified, 1 = error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "certds/certds.hpp"

namespace fs = std::filesystem;
using namespace certds;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kNotVerified = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json file_entry(const fs::path& p) {
    return {{"path", p.string()}, {"fnv1a", fnv1a_hex(read_file(p.string()))}};
}

/// Manifest tying the inputs and artifacts of one command together.
struct Manifest {
    std::string command;
    json inputs = json::object();
    json artifacts = json::object();
    json settings = json::object();

    void input(const std::string& name, const fs::path& p) { inputs[name] = file_entry(p); }
    void artifact(const std::string& name, const fs::path& p) { artifacts[name] = p.filename().string(); }

    void write(const fs::path& dir) const {
        for (const auto& [name, rel] : artifacts.items()) {
            if (!fs::exists(dir / rel.get<std::string>())) throw Error("missing artifact '" + name + "'");
        }
        json j{{"tool", "certds_cli"}, {"version", version}, {"command", command},
               {"inputs", inputs},     {"settings", settings}, {"artifacts", artifacts}};
        save_json_file((dir / "manifest.json").string(), j);
    }
};

Point parse_point(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw Error("cannot parse '" + text + "' as a comma-separated point");
        }
    }
    if (v.empty()) throw Error("empty point");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw Error("write failed: " + p.string());
}

std::string dataset_csv(const DemonstrationSet& set) {
    std::ostringstream out;
    write_csv(out, set);
    return out.str();
}

std::string loss_log_csv(const TrainState& st) {
    std::ostringstream out;
    out << "epoch,phase,L_MSE,L_lyap,L_bar,cex\n";
    for (const auto& r : st.history) {
        out << r.epoch << ',' << (r.joint ? "joint" : "pretrain") << ',' << detail::format_double(r.mse) << ','
            << detail::format_double(r.lyap) << ',' << detail::format_double(r.bar) << ',';
        if (r.counterexamples >= 0) out << r.counterexamples;
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Subcommands

struct IngestArgs {
    std::string input;
    std::string out_dir;
    std::string attractor;
    double margin = 0.02;
    bool anisotropic = false;
};

int cmd_ingest(const IngestArgs& a) {
    const DemonstrationSet raw = load_csv(a.input);
    const Point goal = a.attractor.empty() ? estimate_attractor(raw) : parse_point(a.attractor);
    const auto [norm, tf] = normalize(raw, goal, NormalizeOptions{a.margin, a.anisotropic});
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    write_text(dir / "dataset.csv", dataset_csv(norm));
    save_json_file((dir / "transform.json").string(), to_json(tf));

    Manifest m{"ingest"};
    m.input("raw", a.input);
    m.settings = {{"attractor", detail::point_to_json(goal)}, {"margin", a.margin}, {"anisotropic", a.anisotropic}};
    m.artifact("dataset", dir / "dataset.csv");
    m.artifact("transform", dir / "transform.json");
    m.write(dir);
    std::cout << "normalized " << norm.demos.size() << " demonstrations (" << norm.num_samples() << " samples) into "
              << dir.string() << '\n';
    return kOk;
}

struct FdArgs {
    std::string input;
    std::string output;
};

int cmd_fd_velocities(const FdArgs& a) {
    std::ifstream in(a.input);
    if (!in) throw Error("cannot open dataset '" + a.input + "'");
    const DemonstrationSet set = with_finite_difference_velocities(load_csv_stream(in, false));
    write_text(a.output, dataset_csv(set));
    return kOk;
}

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<int> iters;
    std::optional<int> epochs;
    std::optional<int> pretrain_epochs;
    std::optional<int> n_ver;

    void apply(TrainConfig& c) const {
        if (seed) c.seed = *seed;
        if (workers) c.workers = *workers;
        if (iters) c.iters = *iters;
        if (epochs) c.epochs = *epochs;
        if (pretrain_epochs) c.pretrain_epochs = *pretrain_epochs;
        if (n_ver) c.n_ver = *n_ver;
    }
};

struct TrainArgs {
    std::string data;
    std::string spec;
    std::string config;
    std::string transform;
    std::string out_dir;
    bool quiet = false;
    ConfigOverrides over;
};

int cmd_train(const TrainArgs& a) {
    const DemonstrationSet data = load_csv(a.data);
    const ProblemSpec spec = load_problem(a.spec);
    TrainConfig cfg = a.config.empty() ? TrainConfig{} : config_from_json(load_json_file(a.config));
    a.over.apply(cfg);
    cfg.validate();

    // Transform: explicit flag, else transform.json beside the dataset.
    std::optional<NormalizationTransform> tf;
    fs::path tf_path = a.transform;
    if (tf_path.empty() && fs::exists(fs::path(a.data).parent_path() / "transform.json"))
        tf_path = fs::path(a.data).parent_path() / "transform.json";
    if (!tf_path.empty()) tf = transform_from_json(load_json_file(tf_path.string()));

    const auto [train, test] = split(data, cfg.test_fraction, derive_seed(cfg.seed, "split"));
    const SynthesisResult res = run_synthesis(train, spec, cfg, [&](const std::string& msg) {
        if (!a.quiet) std::cerr << msg << '\n';
    });

    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    save_model(dir, {res.state.f, res.state.v, res.state.b, tf});
    save_json_file((dir / "config.json").string(), to_json(cfg));
    write_text(dir / "log.csv", loss_log_csv(res.state));
    json split_ids{{"train", json::array()}, {"test", json::array()}};
    for (const auto& d : train.demos) split_ids["train"].push_back(d.id);
    for (const auto& d : test.demos) split_ids["test"].push_back(d.id);
    save_json_file((dir / "split.json").string(), split_ids);

    json result{{"verified", res.verified()},
                {"counterexample_free", res.counterexample_free},
                {"iterations", res.iterations},
                {"counterexample_counts", res.state.counterexample_counts},
                {"final_sample_size", res.state.samples.size()},
                {"diagnostics", res.diagnostics}};
    if (!res.counterexample_free) {
        const auto& c = res.last_counterexamples;
        json worst = json::array();
        for (std::size_t i = 0; i < std::min<std::size_t>(c.points.size(), 20); ++i)
            worst.push_back({{"x", detail::point_to_json(c.points[i])}, {"score", c.scores[i]}});
        result["counterexamples"] = {{"count", c.count}, {"per_condition", c.per_condition}, {"worst", worst}};
    }
    save_json_file((dir / "result.json").string(), result);

    Manifest m{"train"};
    m.input("dataset", a.data);
    m.input("spec", a.spec);
    if (!a.config.empty()) m.input("config", a.config);
    if (!tf_path.empty()) m.input("transform", tf_path);
    m.settings = {{"seed", cfg.seed}, {"workers", cfg.workers}};
    for (const char* name : {"dynamics.json", "lyapunov.json", "barrier.json", "config.json", "log.csv", "split.json",
                             "result.json"})
        m.artifact(fs::path(name).stem().string(), dir / name);
    if (res.calibration) {
        save_json_file((dir / "calibration.json").string(), to_json(*res.calibration));
        m.artifact("calibration", dir / "calibration.json");
    }
    m.write(dir);

    if (!res.verified()) {
        std::cerr << "not verified: " << res.diagnostics << '\n';
        return kNotVerified;
    }
    std::cout << "verified: p = " << res.calibration->p << " at confidence " << res.calibration->confidence << '\n';
    return kOk;
}

struct VerifyArgs {
    std::string model;
    std::string spec;
    std::string out;
    std::optional<int> n_ver;
    std::optional<double> epsilon;
    std::optional<double> beta;
    std::uint64_t seed = 0;
    std::optional<int> workers;
};

int cmd_verify(const VerifyArgs& a) {
    const ModelFiles m = load_model(a.model);
    const ProblemSpec spec = load_problem(a.spec);
    TrainConfig cfg = load_model_config(a.model);
    if (a.workers) cfg.workers = *a.workers;
    const long n_ver = a.n_ver.value_or(cfg.n_ver);
    const CalibrationResult r = verify(m.f, m.v, m.b, spec, n_ver, a.epsilon.value_or(cfg.miscoverage),
                                       a.beta.value_or(cfg.beta), derive_seed(a.seed, "verify"), cfg);
    const std::string text = to_json(r).dump(2) + "\n";
    if (a.out.empty())
        std::cout << text;
    else
        write_text(a.out, text);
    std::cerr << (r.verified ? "verified" : "not verified") << ": p = " << r.p << '\n';
    return r.verified ? kOk : kNotVerified;
}

struct EvalArgs {
    std::string model;
    std::string data;
    std::string spec;
    std::string out_dir;
    bool all_demos = false;
    long grid = 50;
    long area_grid = 200;
    int initial_points = 100;
    int workers = 1;
};

int cmd_eval(const EvalArgs& a) {
    const ModelFiles m = load_model(a.model);
    const ProblemSpec spec = load_problem(a.spec);
    DemonstrationSet test = load_csv(a.data);
    const fs::path split_path = fs::path(a.model) / "split.json";
    if (!a.all_demos && fs::exists(split_path))
        test = select_demos(test, load_json_file(split_path.string()).at("test").get<std::vector<std::string>>());
    if (test.demos.empty() || test.num_samples() == 0) throw Error("eval: the test split is empty");

    EvalOptions opt;
    opt.initial_points = static_cast<std::size_t>(a.initial_points);
    opt.area_grid = a.area_grid;
    opt.workers = a.workers;
    const EvalReport r = evaluate(m.f, m.b, spec, test, opt);

    const fs::path dir(a.out_dir);
    fs::create_directories(dir / "rollouts");
    save_json_file((dir / "report.json").string(), to_json(r));
    export_field(m.f, spec.workspace_box(), a.grid, (dir / "field.csv").string());
    {
        std::ofstream ls(dir / "level_sets.csv");
        export_level_sets(m.v, m.b, spec.workspace_box(), a.grid, ls);
    }
    RolloutOptions ro = opt.rollout;
    ro.workspace = spec.workspace_box();
    const auto starts = grid_points_in(spec.initial, spec.workspace_box(), opt.initial_points);
    for (std::size_t i = 0; i < starts.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "x0_%03zu.csv", i);
        std::ofstream out(dir / "rollouts" / name);
        write_trajectory_csv(out, integrate(m.f, starts[i], ro));
    }

    Manifest man{"eval"};
    man.input("dataset", a.data);
    man.input("spec", a.spec);
    for (const char* name : {"dynamics.json", "lyapunov.json", "barrier.json"})
        man.input(fs::path(name).stem().string(), fs::path(a.model) / name);
    man.settings = {{"grid", a.grid}, {"area_grid", a.area_grid}, {"initial_points", a.initial_points}};
    man.artifact("report", dir / "report.json");
    man.artifact("field", dir / "field.csv");
    man.artifact("level_sets", dir / "level_sets.csv");
    man.write(dir);
    std::cout << to_json(r).dump(2) << '\n';
    return kOk;
}

struct ExportArgs {
    std::string model;
    std::string spec;
    std::string out;
    std::string level_sets;
    long grid = 50;
};

int cmd_export_field(const ExportArgs& a) {
    const ModelFiles m = load_model(a.model);
    const ProblemSpec spec = load_problem(a.spec);
    export_field(m.f, spec.workspace_box(), a.grid, a.out);
    if (!a.level_sets.empty()) {
        std::ofstream ls(a.level_sets);
        if (!ls) throw Error("cannot open '" + a.level_sets + "' for writing");
        export_level_sets(m.v, m.b, spec.workspace_box(), a.grid, ls);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learn certified dynamical systems from demonstrations"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Normalize a raw demonstration CSV");
    c_ingest->add_option("-i,--input", ingest.input, "Raw CSV (demo_id,t,x1..xn,v1..vn)")->required();
    c_ingest->add_option("-o,--out", ingest.out_dir, "Output directory")->required();
    c_ingest->add_option("--attractor", ingest.attractor, "Attractor in raw units, e.g. 0,0 (default: mean end point)");
    c_ingest->add_option("--margin", ingest.margin, "Boundary margin inside [-1,1]")->capture_default_str();
    c_ingest->add_flag("--anisotropic", ingest.anisotropic, "Scale each axis separately");

    FdArgs fd;
    auto* c_fd = app.add_subcommand("fd-velocities", "Fill velocity columns by finite differences of positions");
    c_fd->add_option("-i,--input", fd.input, "CSV with at least demo_id,t,x1..xn")->required();
    c_fd->add_option("-o,--output", fd.output, "Output CSV")->required();

    auto add_overrides = [](CLI::App* c, ConfigOverrides& o) {
        c->add_option("--seed", o.seed, "Seed for every random choice (overrides config)");
        c->add_option("--workers", o.workers, "Worker threads (overrides config)");
        c->add_option("--iters", o.iters, "Counterexample iterations (overrides config)");
        c->add_option("--epochs", o.epochs, "Joint epochs per iteration (overrides config)");
        c->add_option("--pretrain-epochs", o.pretrain_epochs, "Dynamics pretraining epochs (overrides config)");
        c->add_option("--n-ver", o.n_ver, "Calibration sample size (overrides config)");
    };

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "Train dynamics with Lyapunov and barrier certificates, then verify");
    c_train->add_option("-d,--data", train.data, "Normalized dataset CSV")->required();
    c_train->add_option("-s,--spec", train.spec, "Problem spec JSON (workspace, X0, Xu, attractor)")->required();
    c_train->add_option("-c,--config", train.config, "Training config JSON");
    c_train->add_option("--transform", train.transform, "Normalization JSON stored in checkpoints");
    c_train->add_option("-o,--out", train.out_dir, "Checkpoint directory")->required();
    c_train->add_flag("-q,--quiet", train.quiet, "No progress on stderr");
    add_overrides(c_train, train.over);

    VerifyArgs ver;
    auto* c_verify = app.add_subcommand("verify", "Conformal verification of a checkpoint directory");
    c_verify->add_option("-m,--model", ver.model, "Checkpoint directory")->required();
    c_verify->add_option("-s,--spec", ver.spec, "Problem spec JSON")->required();
    c_verify->add_option("-o,--out", ver.out, "Result JSON (default: stdout)");
    c_verify->add_option("--n-ver", ver.n_ver, "Calibration sample size");
    c_verify->add_option("--epsilon", ver.epsilon, "Miscoverage level");
    c_verify->add_option("--beta", ver.beta, "One minus the confidence");
    c_verify->add_option("--seed", ver.seed, "Calibration sampling seed")->capture_default_str();
    c_verify->add_option("--workers", ver.workers, "Worker threads");

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Metrics, rollouts and plot data for a checkpoint");
    c_eval->add_option("-m,--model", ev.model, "Checkpoint directory")->required();
    c_eval->add_option("-d,--data", ev.data, "Normalized dataset CSV")->required();
    c_eval->add_option("-s,--spec", ev.spec, "Problem spec JSON")->required();
    c_eval->add_option("-o,--out", ev.out_dir, "Output directory")->required();
    c_eval->add_flag("--all-demos", ev.all_demos, "Evaluate on every demo instead of the stored test split");
    c_eval->add_option("--grid", ev.grid, "Field export grid per axis")->capture_default_str()->check(CLI::PositiveNumber);
    c_eval->add_option("--area-grid", ev.area_grid, "Safe-area grid per axis")->capture_default_str();
    c_eval->add_option("--initial-points", ev.initial_points, "Rollouts started from X0")->capture_default_str();
    c_eval->add_option("--workers", ev.workers, "Worker threads")->capture_default_str();

    ExportArgs ex;
    auto* c_export = app.add_subcommand("export-field", "Vector field (and optionally V, B) on a grid as CSV");
    c_export->add_option("-m,--model", ex.model, "Checkpoint directory")->required();
    c_export->add_option("-s,--spec", ex.spec, "Problem spec JSON")->required();
    c_export->add_option("-o,--out", ex.out, "Field CSV")->required();
    c_export->add_option("--level-sets", ex.level_sets, "Level-set CSV");
    c_export->add_option("--grid", ex.grid, "Grid per axis")->capture_default_str()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kError;
    }

    try {
        if (*c_ingest) return cmd_ingest(ingest);
        if (*c_fd) return cmd_fd_velocities(fd);
        if (*c_train) return cmd_train(train);
        if (*c_verify) return cmd_verify(ver);
        if (*c_eval) return cmd_eval(ev);
        if (*c_export) return cmd_export_field(ex);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
    return kError;
}
