// Command-line front end for the full workflow: generate benchmark data,
// train an emulator, fit the component basis, apply the transforms, solve
// the inverse problem, and benchmark fits across input dimensionalities.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "eca/data_io.hpp"
#include "eca/eca.hpp"
#include "eca/eca_io.hpp"
#include "eca/emulator_io.hpp"
#include "eca/mlp_train.hpp"

namespace fs = std::filesystem;
using namespace eca;

namespace {

struct Stopwatch {
    using clock = std::chrono::steady_clock;
    clock::time_point last = clock::now();
    std::vector<std::pair<std::string, double>> phases;

    void lap(const std::string& name) {
        const auto now = clock::now();
        phases.emplace_back(name, std::chrono::duration<double>(now - last).count());
        last = now;
    }
    double total() const {
        double t = 0.0;
        for (const auto& [_, s] : phases) t += s;
        return t;
    }
};

// Every run emits one manifest: the command, a replayable argument vector,
// the fully resolved options, file bindings, the seed, and phase timings.
struct ManifestBuilder {
    jsontext::Writer w;

    ManifestBuilder(const std::string& command, const std::vector<std::string>& argv) {
        w.begin_object();
        w.key("command").value(command);
        w.key("argv").begin_array();
        for (const auto& a : argv) w.value(a);
        w.end_array();
    }
    jsontext::Writer& options() { return w.key("options").begin_object(); }
    jsontext::Writer& files(const char* section) {
        return w.key(section).begin_object();
    }
    void seed(std::optional<std::uint64_t> s) {
        w.key("seed");
        if (s)
            w.value(*s);
        else
            w.null();
    }
    void write(const std::string& path, const Stopwatch& sw) {
        w.key("timings_sec").begin_object();
        for (const auto& [name, sec] : sw.phases) w.key(name).value(sec);
        w.key("total").value(sw.total());
        w.end_object();
        w.end_object();
        jsontext::write_file(path, w.str());
    }
};

std::vector<std::string> collect_argv(int argc, char** argv) {
    std::vector<std::string> out;
    for (int i = 1; i < argc; ++i) out.emplace_back(argv[i]);
    return out;
}

// Injects the resolved seed so that replaying the manifest's argv is
// bit-reproducible even when the original invocation let the seed float.
std::vector<std::string> with_seed(std::vector<std::string> argv, std::uint64_t seed) {
    for (const auto& a : argv)
        if (a == "--seed") return argv;
    argv.push_back("--seed");
    argv.push_back(std::to_string(seed));
    return argv;
}

std::vector<std::size_t> parse_size_list(const std::string& csv, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            const long long v = std::stoll(tok);
            if (v < 0) throw std::invalid_argument("negative");
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": bad list entry '" + tok + "'");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

std::size_t thread_cap() {
    const char* env = std::getenv("ECA_NUM_THREADS");
    if (!env) return std::thread::hardware_concurrency();
    try {
        const long long v = std::stoll(env);
        return v < 1 ? 1 : static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("ECA_NUM_THREADS: not an integer");
    }
}

void require_seed_in_strict(bool strict, const std::optional<std::uint64_t>& seed,
                            const char* cmd) {
    if (strict && !seed)
        throw ConfigError(std::string(cmd) +
                          ": --strict requires an explicit --seed for randomized commands");
}

std::string default_err_path(const std::string& out) {
    fs::path p(out);
    p.replace_extension(".err.csv");
    return p.string();
}

std::string relative_ref(const std::string& target, const std::string& anchor_file) {
    const fs::path t = fs::absolute(target);
    const fs::path base = fs::absolute(anchor_file).parent_path();
    const fs::path rel = t.lexically_proximate(base);
    return rel.string();
}

struct LoadedData {
    Dataset ds;  // X already standardized when the manifest asks for it
    DatasetManifest manifest;
};

LoadedData load_data(const std::string& manifest_path) {
    LoadedData out;
    out.manifest = dataset_manifest_from_json(jsontext::parse_file(manifest_path));
    out.ds = load_dataset(manifest_path, out.manifest);
    if (out.manifest.x_standardizer)
        out.ds.x = standardize(*out.manifest.x_standardizer, out.ds.x);
    return out;
}

void save_matrix_with_dirs(const std::string& path, const Matrix& m) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    save_matrix(path, m);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
    std::size_t d = 2;
    std::size_t n = 20000;
    std::optional<std::uint64_t> seed;
    bool vector_valued = false;
    std::string out_dir = ".";
    std::string manifest_out;
};

void run_gen(const GenArgs& a, const std::vector<std::string>& argv, bool strict) {
    require_seed_in_strict(strict, a.seed, "gen");
    if (a.d < 1 || a.n < 1) throw ConfigError("gen: --d and --n must be >= 1");
    const std::uint64_t seed = a.seed ? *a.seed : entropy_seed();

    Stopwatch sw;
    RudimentaryData data = gen_rudimentary(a.d, a.n, seed, a.vector_valued);
    sw.lap("generate");

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    const std::string x_path = (dir / "x.csv").string();
    const std::string y_path = (dir / "y.csv").string();
    const std::string ds_path = (dir / "dataset.json").string();
    save_matrix(x_path, data.ds.x);
    save_matrix(y_path, data.ds.y);

    DatasetManifest dm;
    dm.x_path = "x.csv";
    dm.y_path = "y.csv";
    dm.y_standardizer = data.y_standardizer;
    dm.ground_truth = data.ground_truth;
    dm.seed = seed;
    jsontext::write_file(ds_path, dataset_manifest_to_json(dm));
    sw.lap("write");

    ManifestBuilder mb("gen", with_seed(argv, seed));
    mb.options()
        .key("d").value(a.d)
        .key("n").value(a.n)
        .key("vector_valued").value(a.vector_valued)
        .end_object();
    mb.files("outputs")
        .key("x").value(x_path)
        .key("y").value(y_path)
        .key("dataset").value(ds_path)
        .end_object();
    mb.seed(seed);
    const std::string mpath =
        a.manifest_out.empty() ? (dir / "gen.manifest.json").string() : a.manifest_out;
    mb.write(mpath, sw);

    std::cout << "wrote " << ds_path << " (" << a.n << " rows, d=" << a.d
              << (a.vector_valued ? ", vector-valued" : ", scalar") << ")\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string data;
    std::string out = "emulator.json";
    std::string arch = "16,16,16,16";
    std::string activation = "relu";
    std::string output_activation = "identity";
    MlpTrainOptions opts;
    double split = 0.8;
    std::uint64_t split_seed = 0;
    bool no_split = false;
    std::string manifest_out;
};

double train_and_save(const TrainArgs& a, const std::vector<std::string>& argv,
                      bool strict) {
    require_seed_in_strict(strict, a.opts.seed, "train");
    const std::uint64_t seed = a.opts.seed ? *a.opts.seed : entropy_seed();
    MlpTrainOptions opts = a.opts;
    opts.seed = seed;

    Stopwatch sw;
    LoadedData data = load_data(a.data);
    sw.lap("load");

    Dataset train_side = data.ds;
    Dataset test_side;
    if (!a.no_split) {
        auto [tr, te] = split(data.ds, a.split, a.split_seed);
        train_side = std::move(tr);
        test_side = std::move(te);
    }

    MlpArchitecture arch;
    arch.hidden = parse_size_list(a.arch, "--arch");
    arch.hidden_activation = activation_from_name(a.activation);
    arch.output_activation = activation_from_name(a.output_activation);

    MlpEmulator emu = train_mlp(train_side.x, train_side.y, arch, opts);
    sw.lap("train");

    const Dataset& eval = a.no_split ? train_side : test_side;
    const double r2 = generalized_r2(emu.forward(eval.x), eval.y);
    sw.lap("evaluate");

    if (fs::path(a.out).has_parent_path())
        fs::create_directories(fs::path(a.out).parent_path());
    save_emulator(a.out, emu);
    sw.lap("write");

    ManifestBuilder mb("train", with_seed(argv, seed));
    mb.options()
        .key("arch").value(a.arch)
        .key("activation").value(a.activation)
        .key("output_activation").value(a.output_activation)
        .key("lr").value(opts.lr)
        .key("betas").begin_array().value(opts.betas.first).value(opts.betas.second).end_array()
        .key("weight_decay").value(opts.weight_decay)
        .key("epochs").value(opts.epochs)
        .key("batch_size").value(opts.batch_size)
        .key("patience").value(opts.patience)
        .key("val_fraction").value(opts.val_fraction)
        .key("split").value(a.split)
        .key("split_seed").value(a.split_seed)
        .key("no_split").value(a.no_split)
        .key("test_r2").value(r2)
        .end_object();
    mb.files("inputs").key("data").value(a.data).end_object();
    mb.files("outputs").key("emulator").value(a.out).end_object();
    mb.seed(seed);
    const std::string mpath =
        a.manifest_out.empty() ? a.out + ".manifest.json" : a.manifest_out;
    mb.write(mpath, sw);

    std::cout << (a.no_split ? "in-sample R2: " : "test R2: ") << r2 << "\n";
    return r2;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string data;
    std::string emulator;
    std::string model_in;
    std::string out = "model.json";
    std::size_t n_comp = 3;
    FitOptions opts;
    int keep = 0;
    double split = 0.8;
    std::uint64_t split_seed = 0;
    std::string use = "test";  // which side of the split carries the fit
    bool no_split = false;
    std::string manifest_out;
};

void run_fit(const FitArgs& a, const std::vector<std::string>& argv, bool strict) {
    require_seed_in_strict(strict, a.opts.seed, "fit");
    if (a.keep != 0 && a.model_in.empty())
        throw ConfigError("fit: --keep requires --model-in");

    Stopwatch sw;
    LoadedData data = load_data(a.data);
    Dataset fit_set = data.ds;
    if (!a.no_split) {
        auto [tr, te] = split(data.ds, a.split, a.split_seed);
        if (a.use == "train")
            fit_set = std::move(tr);
        else if (a.use == "test")
            fit_set = std::move(te);
        else if (a.use == "all")
            fit_set = data.ds;
        else
            throw ConfigError("fit: --use must be train, test or all");
    }
    sw.lap("load");

    std::optional<EcaModel> model;
    if (!a.model_in.empty()) {
        model = load_model(a.model_in);
    } else {
        auto emu = std::make_shared<const MlpEmulator>(load_emulator(a.emulator));
        model.emplace(std::move(emu));
    }

    model->fit(fit_set.x, fit_set.y, a.n_comp, a.opts, a.keep);
    sw.lap("fit");

    // Record the emulator location relative to the model file.
    std::string emu_ref;
    if (!a.emulator.empty())
        emu_ref = relative_ref(a.emulator, a.out);
    else {
        // Continued fit: keep the reference of the input model.
        const auto j = jsontext::parse_file(a.model_in);
        fs::path p = j["emulator"].get<std::string>();
        if (p.is_relative()) p = fs::absolute(a.model_in).parent_path() / p;
        emu_ref = relative_ref(p.string(), a.out);
    }
    if (fs::path(a.out).has_parent_path())
        fs::create_directories(fs::path(a.out).parent_path());
    save_model(a.out, *model, emu_ref);
    sw.lap("write");

    ManifestBuilder mb("fit", with_seed(argv, *model->seed()));
    mb.options()
        .key("n_comp").value(a.n_comp)
        .key("lr").value(a.opts.lr)
        .key("betas").begin_array().value(a.opts.betas.first).value(a.opts.betas.second).end_array()
        .key("tol").value(a.opts.tol)
        .key("epochs").value(a.opts.epochs)
        .key("batch_size").value(a.opts.batch_size)
        .key("restarts").value(a.opts.restarts)
        .key("keep").value(static_cast<std::int64_t>(a.keep))
        .key("split").value(a.split)
        .key("split_seed").value(a.split_seed)
        .key("use").value(a.use)
        .key("no_split").value(a.no_split)
        .end_object();
    auto& in = mb.files("inputs");
    in.key("data").value(a.data);
    if (!a.emulator.empty()) in.key("emulator").value(a.emulator);
    if (!a.model_in.empty()) in.key("model_in").value(a.model_in);
    in.end_object();
    mb.files("outputs").key("model").value(a.out).end_object();
    mb.seed(model->seed());
    const std::string mpath =
        a.manifest_out.empty() ? a.out + ".manifest.json" : a.manifest_out;
    mb.write(mpath, sw);

    std::cout << "seed: " << *model->seed() << "\n";
    std::cout << "rank      y_var           x_var\n";
    for (std::size_t r = 0; r < model->rank(); ++r)
        std::cout << r + 1 << "         " << jsontext::format_double(model->y_var()[r])
                  << "   " << jsontext::format_double(model->x_var()[r]) << "\n";
}

// ---------------------------------------------------------------------------
// transform / project / test

struct ApplyArgs {
    std::string model;
    std::string x;
    std::string y;
    std::string data;  // optional manifest providing an X standardizer
    std::string out;
    std::optional<std::size_t> n_comp;
    std::string manifest_out;
};

Matrix load_x_standardized(const ApplyArgs& a) {
    Matrix x = load_matrix(a.x);
    if (!a.data.empty()) {
        const auto dm = dataset_manifest_from_json(jsontext::parse_file(a.data));
        if (dm.x_standardizer) x = standardize(*dm.x_standardizer, x);
    }
    return x;
}

void run_linear_op(const std::string& cmd, const ApplyArgs& a,
                   const std::vector<std::string>& argv) {
    Stopwatch sw;
    EcaModel model = load_model(a.model);
    Matrix x = load_x_standardized(a);
    sw.lap("load");

    const std::size_t k = a.n_comp ? *a.n_comp : model.rank();
    const Matrix out = cmd == "transform" ? model.transform(x, k) : model.project(x, k);
    sw.lap(cmd);
    save_matrix_with_dirs(a.out, out);
    sw.lap("write");

    ManifestBuilder mb(cmd, argv);
    mb.options().key("n_comp").value(k).end_object();
    auto& in = mb.files("inputs");
    in.key("model").value(a.model).key("x").value(a.x);
    if (!a.data.empty()) in.key("data").value(a.data);
    in.end_object();
    mb.files("outputs").key("out").value(a.out).end_object();
    mb.seed(std::nullopt);
    const std::string mpath =
        a.manifest_out.empty() ? a.out + ".manifest.json" : a.manifest_out;
    mb.write(mpath, sw);

    std::cout << "wrote " << a.out << " (" << out.rows << " x " << out.cols << ")\n";
}

void run_test(const ApplyArgs& a, const std::vector<std::string>& argv) {
    Stopwatch sw;
    EcaModel model = load_model(a.model);
    Matrix x = load_x_standardized(a);
    Matrix y = load_matrix(a.y);
    sw.lap("load");
    const std::size_t k = a.n_comp ? *a.n_comp : model.rank();
    const double rho = model.covered_variance(x, y, k);
    sw.lap("test");

    ManifestBuilder mb("test", argv);
    mb.options().key("n_comp").value(k).key("rho").value(rho).end_object();
    auto& in = mb.files("inputs");
    in.key("model").value(a.model).key("x").value(a.x).key("y").value(a.y);
    if (!a.data.empty()) in.key("data").value(a.data);
    in.end_object();
    mb.files("outputs").begin_object().end_object();
    mb.seed(std::nullopt);
    if (!a.manifest_out.empty()) mb.write(a.manifest_out, sw);

    std::cout << "rho: " << rho << "\n";
}

// ---------------------------------------------------------------------------
// inverse / reconstruct

struct InverseArgs {
    std::string model;
    std::string y;
    std::string data;  // optional manifest; reconstruct can map back to raw X
    std::string out;
    std::string err_out;
    std::optional<std::size_t> n_comp;
    InverseOptions opts;
    bool unstandardize = false;
    std::string manifest_out;
};

void run_inverse_like(const std::string& cmd, const InverseArgs& a,
                      const std::vector<std::string>& argv) {
    Stopwatch sw;
    EcaModel model = load_model(a.model);
    Matrix y = load_matrix(a.y);
    sw.lap("load");

    const std::size_t k = a.n_comp ? *a.n_comp : model.rank();
    Matrix result;
    Vector err;
    if (cmd == "inverse") {
        auto [t, e] = model.inverse(y, k, a.opts);
        result = std::move(t);
        err = std::move(e);
    } else {
        auto [xp, e] = model.reconstruct(y, k, a.opts);
        result = std::move(xp);
        err = std::move(e);
        if (a.unstandardize) {
            if (a.data.empty())
                throw ConfigError("reconstruct: --unstandardize needs --data");
            const auto dm = dataset_manifest_from_json(jsontext::parse_file(a.data));
            if (dm.x_standardizer) result = inverse_standardize(*dm.x_standardizer, result);
        }
    }
    sw.lap(cmd);

    save_matrix_with_dirs(a.out, result);
    Matrix err_col(err.size(), 1);
    for (std::size_t i = 0; i < err.size(); ++i) err_col(i, 0) = err[i];
    const std::string err_path = a.err_out.empty() ? default_err_path(a.out) : a.err_out;
    save_matrix_with_dirs(err_path, err_col);
    sw.lap("write");

    double mean_err = 0.0, max_err = 0.0;
    for (double e : err) {
        mean_err += e;
        max_err = std::max(max_err, e);
    }
    mean_err /= err.empty() ? 1.0 : static_cast<double>(err.size());

    ManifestBuilder mb(cmd, argv);
    mb.options()
        .key("n_comp").value(k)
        .key("lr").value(a.opts.lr)
        .key("betas").begin_array().value(a.opts.betas.first).value(a.opts.betas.second).end_array()
        .key("tol").value(a.opts.tol)
        .key("epochs").value(a.opts.epochs)
        .key("unstandardize").value(a.unstandardize)
        .end_object();
    auto& in = mb.files("inputs");
    in.key("model").value(a.model).key("y").value(a.y);
    if (!a.data.empty()) in.key("data").value(a.data);
    in.end_object();
    mb.files("outputs").key("out").value(a.out).key("errors").value(err_path).end_object();
    mb.seed(a.opts.seed);
    const std::string mpath =
        a.manifest_out.empty() ? a.out + ".manifest.json" : a.manifest_out;
    mb.write(mpath, sw);

    std::cout << "wrote " << a.out << "; per-row mse mean=" << mean_err
              << " max=" << max_err << "\n";
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    std::string d_list = "2,32";
    std::size_t trials = 25;
    std::size_t n = 20000;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "bench";
    std::size_t threads = 1;
    std::string arch = "16,16,16,16";
    std::size_t train_epochs = 500;
    FitOptions fit_opts;
    std::string manifest_out;
};

struct TrialOutcome {
    double seconds = 0.0;
    double rho = 0.0;
    bool success = false;
};

void run_bench(const BenchArgs& a, const std::vector<std::string>& argv, bool strict) {
    require_seed_in_strict(strict, a.seed, "bench");
    if (a.trials < 1) throw ConfigError("bench: --trials must be >= 1");
    const std::vector<std::size_t> dims = parse_size_list(a.d_list, "--d");
    const std::uint64_t master = a.seed ? *a.seed : entropy_seed();
    const std::size_t workers =
        std::max<std::size_t>(1, std::min(a.threads, thread_cap()));

    fs::create_directories(a.out_dir);
    Stopwatch sw;
    SplitMix64 seq(master);
    std::ostringstream report;
    report << "d       emu_r2     success   median_fit_s   rho_min     rho_median  rho_max\n";

    ManifestBuilder mb("bench", with_seed(argv, master));
    mb.options()
        .key("d").value(a.d_list)
        .key("trials").value(a.trials)
        .key("n").value(a.n)
        .key("threads").value(workers)
        .key("arch").value(a.arch)
        .key("lr").value(a.fit_opts.lr)
        .key("betas").begin_array().value(a.fit_opts.betas.first).value(a.fit_opts.betas.second).end_array()
        .key("tol").value(a.fit_opts.tol)
        .key("epochs").value(a.fit_opts.epochs)
        .key("batch_size").value(a.fit_opts.batch_size)
        .key("restarts").value(a.fit_opts.restarts)
        .end_object();

    for (const std::size_t d : dims) {
        if (d < 1) throw ConfigError("bench: d must be >= 1");
        const std::uint64_t data_seed = seq.next();
        const std::uint64_t split_seed = seq.next();
        const std::uint64_t train_seed = seq.next();
        std::vector<std::uint64_t> trial_seeds(a.trials);
        for (auto& s : trial_seeds) s = seq.next();

        RudimentaryData data = gen_rudimentary(d, a.n, data_seed, false);
        auto [train_side, fit_side] = split(data.ds, 0.8, split_seed);

        MlpArchitecture arch;
        arch.hidden = parse_size_list(a.arch, "--arch");
        MlpTrainOptions topts;
        topts.epochs = a.train_epochs;
        topts.seed = train_seed;
        auto emu = std::make_shared<const MlpEmulator>(
            train_mlp(train_side.x, train_side.y, arch, topts));
        const double emu_r2 = generalized_r2(emu->forward(fit_side.x), fit_side.y);
        sw.lap("train_d" + std::to_string(d));

        std::vector<TrialOutcome> outcomes(a.trials);
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= a.trials) return;
                FitOptions fo = a.fit_opts;
                fo.seed = trial_seeds[i];
                EcaModel model(emu);
                const auto t0 = std::chrono::steady_clock::now();
                model.fit(fit_side.x, fit_side.y, 1, fo);
                const auto t1 = std::chrono::steady_clock::now();
                TrialOutcome& out = outcomes[i];
                out.seconds = std::chrono::duration<double>(t1 - t0).count();
                out.rho = model.y_var()[0];
                out.success =
                    std::abs(dot(model.components()[0], data.ground_truth)) > 0.95;
            }
        };
        if (workers == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        sw.lap("fits_d" + std::to_string(d));

        std::vector<double> times, rhos;
        std::size_t successes = 0;
        for (const auto& o : outcomes) {
            times.push_back(o.seconds);
            rhos.push_back(o.rho);
            successes += o.success ? 1 : 0;
        }
        std::sort(rhos.begin(), rhos.end());
        char line[256];
        std::snprintf(line, sizeof(line),
                      "%-7zu %-10.4f %2zu/%-6zu %-14.4f %-11.4f %-11.4f %-11.4f\n", d,
                      emu_r2, successes, a.trials, median(times), rhos.front(),
                      median(rhos), rhos.back());
        report << line;
    }

    const std::string report_path = (fs::path(a.out_dir) / "report.txt").string();
    jsontext::write_file(report_path, report.str());
    mb.files("inputs").begin_object().end_object();
    mb.files("outputs").key("report").value(report_path).end_object();
    mb.seed(master);
    const std::string mpath = a.manifest_out.empty()
                                  ? (fs::path(a.out_dir) / "bench.manifest.json").string()
                                  : a.manifest_out;
    mb.write(mpath, sw);

    std::cout << report.str();
}

int dispatch(int argc, char** argv);

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error (config): " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error (dimension): " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error (format): " << e.what() << "\n";
        return 4;
    } catch (const NumericsError& e) {
        std::cerr << "error (numerics): " << e.what() << "\n";
        return 5;
    } catch (const DegenerateDataError& e) {
        std::cerr << "error (degenerate data): " << e.what() << "\n";
        return 6;
    } catch (const DegenerateVectorError& e) {
        std::cerr << "error (degenerate vector): " << e.what() << "\n";
        return 7;
    } catch (const StateError& e) {
        std::cerr << "error (state): " << e.what() << "\n";
        return 8;
    } catch (const IoError& e) {
        std::cerr << "error (io): " << e.what() << "\n";
        return 9;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

namespace {

int dispatch(int argc, char** argv) {
    CLI::App app{"Emulator-based component analysis: find an orthonormal input-space "
                 "basis maximizing emulated covered response variance, and solve the "
                 "reduced inverse problem"};
    app.require_subcommand(1);
    bool strict = false;
    app.add_flag("--strict", strict,
                 "refuse randomized commands without an explicit --seed");

    const std::vector<std::string> argv_list = collect_argv(argc, argv);

    GenArgs gen;
    auto* cmd_gen = app.add_subcommand("gen", "generate synthetic benchmark data");
    cmd_gen->add_option("--d", gen.d, "input dimensionality");
    cmd_gen->add_option("--n", gen.n, "number of data points");
    cmd_gen->add_option("--seed", gen.seed, "RNG seed");
    cmd_gen->add_flag("--vector-valued", gen.vector_valued, "4-component response");
    cmd_gen->add_option("--out-dir", gen.out_dir, "output directory");
    cmd_gen->add_option("--manifest-out", gen.manifest_out, "run manifest path");

    TrainArgs train;
    auto* cmd_train = app.add_subcommand("train", "train an MLP emulator");
    cmd_train->add_option("--data", train.data, "dataset manifest")->required();
    cmd_train->add_option("--out", train.out, "emulator output path");
    cmd_train->add_option("--arch", train.arch, "hidden layer widths, comma-separated");
    cmd_train->add_option("--activation", train.activation, "hidden activation");
    cmd_train->add_option("--output-activation", train.output_activation,
                          "output activation");
    cmd_train->add_option("--lr", train.opts.lr, "learning rate");
    cmd_train->add_option("--betas", train.opts.betas, "Adam betas");
    cmd_train->add_option("--weight-decay", train.opts.weight_decay, "decoupled decay");
    cmd_train->add_option("--epochs", train.opts.epochs, "max epochs");
    cmd_train->add_option("--batch-size", train.opts.batch_size, "mini-batch size");
    cmd_train->add_option("--patience", train.opts.patience, "early-stopping patience");
    cmd_train->add_option("--val-fraction", train.opts.val_fraction,
                          "held-out fraction for early stopping");
    cmd_train->add_option("--seed", train.opts.seed, "RNG seed");
    cmd_train->add_option("--split", train.split, "train-side fraction of the dataset");
    cmd_train->add_option("--split-seed", train.split_seed, "split shuffle seed");
    cmd_train->add_flag("--no-split", train.no_split, "train on all rows");
    cmd_train->add_option("--manifest-out", train.manifest_out, "run manifest path");

    FitArgs fit;
    auto* cmd_fit = app.add_subcommand("fit", "fit the component basis");
    cmd_fit->add_option("--data", fit.data, "dataset manifest")->required();
    cmd_fit->add_option("--emulator", fit.emulator, "emulator file");
    cmd_fit->add_option("--model-in", fit.model_in, "existing model to continue from");
    cmd_fit->add_option("--out", fit.out, "model output path");
    cmd_fit->add_option("--n-comp", fit.n_comp, "number of components");
    cmd_fit->add_option("--lr", fit.opts.lr, "learning rate");
    cmd_fit->add_option("--betas", fit.opts.betas, "Adam betas");
    cmd_fit->add_option("--tol", fit.opts.tol, "stopping tolerance");
    cmd_fit->add_option("--epochs", fit.opts.epochs, "max epochs");
    cmd_fit->add_option("--batch-size", fit.opts.batch_size, "mini-batch size");
    cmd_fit->add_option("--seed", fit.opts.seed, "RNG seed");
    cmd_fit->add_option("--restarts", fit.opts.restarts,
                        "independent restarts per component; best kept");
    cmd_fit->add_option("--keep", fit.keep,
                        "retain first n components (n<0 drops the last |n|)");
    cmd_fit->add_option("--split", fit.split, "train-side fraction of the dataset");
    cmd_fit->add_option("--split-seed", fit.split_seed, "split shuffle seed");
    cmd_fit->add_option("--use", fit.use, "which side to fit on: train|test|all");
    cmd_fit->add_flag("--no-split", fit.no_split, "fit on all rows");
    cmd_fit->add_option("--manifest-out", fit.manifest_out, "run manifest path");

    ApplyArgs tr_args, pr_args, te_args;
    auto* cmd_transform = app.add_subcommand("transform", "x data to t scores");
    auto* cmd_project = app.add_subcommand("project", "x data onto the fitted subspace");
    auto* cmd_test = app.add_subcommand("test", "covered variance of an (x, y) pair");
    for (auto [cmd, args] : {std::pair{cmd_transform, &tr_args},
                             std::pair{cmd_project, &pr_args},
                             std::pair{cmd_test, &te_args}}) {
        cmd->add_option("--model", args->model, "model file")->required();
        cmd->add_option("--x", args->x, "X matrix (csv)")->required();
        cmd->add_option("--n-comp", args->n_comp, "components to use (default: all)");
        cmd->add_option("--data", args->data,
                        "dataset manifest providing the X standardizer");
        cmd->add_option("--manifest-out", args->manifest_out, "run manifest path");
    }
    cmd_transform->add_option("--out", tr_args.out, "output csv")->required();
    cmd_project->add_option("--out", pr_args.out, "output csv")->required();
    cmd_test->add_option("--y", te_args.y, "Y matrix (csv)")->required();

    InverseArgs inv, rec;
    auto* cmd_inverse = app.add_subcommand("inverse", "y data to best-matching t scores");
    auto* cmd_reconstruct =
        app.add_subcommand("reconstruct", "y data to approximate x in input space");
    for (auto [cmd, args] :
         {std::pair{cmd_inverse, &inv}, std::pair{cmd_reconstruct, &rec}}) {
        cmd->add_option("--model", args->model, "model file")->required();
        cmd->add_option("--y", args->y, "Y matrix (csv)")->required();
        cmd->add_option("--out", args->out, "output csv")->required();
        cmd->add_option("--err-out", args->err_out,
                        "per-row mse column (default: <out>.err.csv)");
        cmd->add_option("--n-comp", args->n_comp, "components to use (default: all)");
        cmd->add_option("--lr", args->opts.lr, "learning rate");
        cmd->add_option("--betas", args->opts.betas, "Adam betas");
        cmd->add_option("--tol", args->opts.tol, "stopping tolerance");
        cmd->add_option("--epochs", args->opts.epochs, "max epochs");
        cmd->add_option("--seed", args->opts.seed, "recorded in the manifest");
        cmd->add_option("--manifest-out", args->manifest_out, "run manifest path");
    }
    cmd_reconstruct->add_option("--data", rec.data, "dataset manifest");
    cmd_reconstruct->add_flag("--unstandardize", rec.unstandardize,
                              "map x' back through the manifest's X standardizer");

    BenchArgs bench;
    auto* cmd_bench = app.add_subcommand("bench", "fit benchmark across dimensions");
    cmd_bench->add_option("--d", bench.d_list, "input dims, comma-separated");
    cmd_bench->add_option("--trials", bench.trials, "fits per dimension");
    cmd_bench->add_option("--n", bench.n, "data points per dimension");
    cmd_bench->add_option("--seed", bench.seed, "master seed");
    cmd_bench->add_option("--out-dir", bench.out_dir, "output directory");
    cmd_bench->add_option("--threads", bench.threads,
                          "worker threads (capped by ECA_NUM_THREADS)");
    cmd_bench->add_option("--arch", bench.arch, "emulator hidden widths");
    cmd_bench->add_option("--train-epochs", bench.train_epochs, "emulator max epochs");
    cmd_bench->add_option("--lr", bench.fit_opts.lr, "fit learning rate");
    cmd_bench->add_option("--betas", bench.fit_opts.betas, "fit Adam betas");
    cmd_bench->add_option("--tol", bench.fit_opts.tol, "fit stopping tolerance");
    cmd_bench->add_option("--epochs", bench.fit_opts.epochs, "fit max epochs");
    cmd_bench->add_option("--batch-size", bench.fit_opts.batch_size, "fit batch size");
    cmd_bench->add_option("--restarts", bench.fit_opts.restarts, "fit restarts");
    cmd_bench->add_option("--manifest-out", bench.manifest_out, "run manifest path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*cmd_gen) run_gen(gen, argv_list, strict);
    if (*cmd_train) train_and_save(train, argv_list, strict);
    if (*cmd_fit) run_fit(fit, argv_list, strict);
    if (*cmd_transform) run_linear_op("transform", tr_args, argv_list);
    if (*cmd_project) run_linear_op("project", pr_args, argv_list);
    if (*cmd_test) run_test(te_args, argv_list);
    if (*cmd_inverse) run_inverse_like("inverse", inv, argv_list);
    if (*cmd_reconstruct) run_inverse_like("reconstruct", rec, argv_list);
    if (*cmd_bench) run_bench(bench, argv_list, strict);
    return 0;
}

}  // namespace
