#include "ssg/cli.hpp"

#include "ssg/bgrl.hpp"
#include "ssg/config.hpp"
#include "ssg/error.hpp"
#include "ssg/eval.hpp"
#include "ssg/grace.hpp"
#include "ssg/minibatch.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

namespace ssg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(what + " must be a non-negative integer, got '" + s + "'");
    }
}

std::uint64_t default_seed() {
    const char* s = std::getenv("SSGRAPH_SEED");
    return s && *s ? parse_u64(s, "SSGRAPH_SEED") : 0;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// Where CSV output goes: a file when a path was given, the command's stdout otherwise.
class CsvSink {
public:
    CsvSink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (path.empty()) return;
        if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
        file_.open(path);
        if (!file_) throw Error("cannot write " + path);
        os_ = &file_;
    }
    std::ostream& operator*() { return *os_; }

private:
    std::ofstream file_;
    std::ostream* os_;
};

std::pair<std::size_t, std::size_t> parse_sbm_shape(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw ConfigError("--sbm expects BLOCKSxNODES, e.g. 4x100");
    return {parse_u64(s.substr(0, x), "SBM blocks"), parse_u64(s.substr(x + 1), "SBM nodes per block")};
}

struct DataFlags {
    std::string dir;
    std::string sbm;
    SbmParams params;
    std::optional<std::uint64_t> sbm_seed;

    void add(CLI::App* cmd) {
        cmd->add_option("--data", dir, "Dataset directory (edges.txt, features.bin, labels.txt[, splits.txt])");
        cmd->add_option("--sbm", sbm, "Synthetic SBM source, BLOCKSxNODES");
        cmd->add_option("--p-in", params.p_in, "SBM intra-block edge probability");
        cmd->add_option("--p-out", params.p_out, "SBM inter-block edge probability");
        cmd->add_option("--feature-dim", params.feature_dim, "SBM feature width");
        cmd->add_option("--signal", params.signal, "SBM feature signal in [0, 1]");
        cmd->add_option("--sbm-seed", sbm_seed, "SBM generator seed (defaults to the run seed)");
    }
    /// Replaces doc["data"] when a source flag was given.
    void apply(json& doc) const {
        if (!dir.empty() && !sbm.empty()) throw ConfigError("give either --data or --sbm, not both");
        if (!dir.empty()) doc["data"] = {{"dir", dir}};
        if (!sbm.empty()) {
            RunConfig tmp;
            SbmParams p = params;
            std::tie(p.blocks, p.nodes_per_block) = parse_sbm_shape(sbm);
            p.seed = sbm_seed.value_or(doc.value("seed", std::uint64_t{0}));
            tmp.sbm = p;
            doc["data"] = to_json(tmp)["data"];
        }
    }
};

/// Options shared by every command that resolves a RunConfig.
struct ConfigFlags {
    std::string config_path;
    std::string preset_name;
    std::string method;
    std::string out;
    std::optional<std::uint64_t> seed;
    DataFlags data;

    void add(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration");
        cmd->add_option("--preset", preset_name, "Hyperparameter preset")
            ->check(CLI::IsMember(preset_names()));
        cmd->add_option("--method", method, "bgrl|grace|random-init|supervised|semisup");
        cmd->add_option("--out", out, "Output location");
        cmd->add_option("--seed", seed, "Run seed (default: $SSGRAPH_SEED or 0)");
        data.add(cmd);
        cmd->allow_extras();
        cmd->footer("Any config key can be overridden with --dotted.key VALUE, e.g. --optim.eta_base 1e-3 --grace.k all");
    }

    /// preset/defaults <- SSGRAPH_SEED <- config file <- flags <- dotted overrides.
    RunConfig resolve(const std::vector<std::string>& extras) const {
        json doc = to_json(preset_name.empty() ? RunConfig{} : preset(preset_name));
        doc["seed"] = default_seed();
        if (!config_path.empty()) doc.merge_patch(read_json_file(config_path));
        if (seed) doc["seed"] = *seed;
        if (!method.empty()) doc["method"] = method;
        if (!out.empty()) doc["out"] = out;
        data.apply(doc);
        for (std::size_t i = 0; i < extras.size(); ++i) {
            const std::string& tok = extras[i];
            if (tok.rfind("--", 0) != 0 || tok.size() == 2) throw ConfigError("unexpected argument '" + tok + "'");
            const std::string body = tok.substr(2);
            if (const auto eq = body.find('='); eq != std::string::npos) {
                apply_override(doc, body.substr(0, eq), body.substr(eq + 1));
            } else {
                if (i + 1 >= extras.size()) throw ConfigError("override " + tok + " needs a value");
                apply_override(doc, body, extras[++i]);
            }
        }
        return run_config_from_json(doc);
    }
};

/// Random 10/10/80 split over the labeled nodes only.
SplitMask labeled_split(std::span<const int> labels, std::uint64_t seed) {
    std::vector<NodeId> labeled;
    for (NodeId v = 0; v < labels.size(); ++v)
        if (labels[v] >= 0) labeled.push_back(v);
    const SplitMask local = random_split(labeled.size(), {0.1, 0.1}, seed);
    SplitMask s;
    s.train.assign(labels.size(), false);
    s.val.assign(labels.size(), false);
    s.test.assign(labels.size(), false);
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        s.train[labeled[i]] = local.train[i];
        s.val[labeled[i]] = local.val[i];
        s.test[labeled[i]] = local.test[i];
    }
    return s;
}

std::pair<double, double> mean_std(std::span<const double> xs) {
    if (xs.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

ProbeMode parse_probe_mode(const std::string& s) {
    if (s == "grid_full") return ProbeMode::grid_full;
    if (s == "gd_fast") return ProbeMode::gd_fast;
    throw ConfigError("--probe must be grid_full or gd_fast");
}

/// Runs job(i) for i in [0, n) on up to `workers` threads; rethrows the first failure.
void run_jobs(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(m);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

json dataset_summary(const Dataset& ds) {
    return {{"nodes", ds.num_nodes()},
            {"edges", ds.graph.num_edges() / 2},
            {"features", ds.feature_dim()},
            {"classes", ds.num_classes()}};
}

// ---------------------------------------------------------------------------
// Commands

void cmd_gen_data(const DataFlags& flags, std::uint64_t seed, double train_fraction, double val_fraction,
                  const fs::path& out_dir, std::ostream& out) {
    if (flags.sbm.empty()) throw ConfigError("gen-data needs --sbm BLOCKSxNODES");
    SbmParams p = flags.params;
    std::tie(p.blocks, p.nodes_per_block) = parse_sbm_shape(flags.sbm);
    p.seed = flags.sbm_seed.value_or(seed);
    p.train_fraction = train_fraction;
    p.val_fraction = val_fraction;
    const Dataset ds = generate_sbm(p);
    save_dataset_dir(out_dir, ds);
    out << "N=" << ds.num_nodes() << " M=" << ds.graph.num_edges() / 2 << " F=" << ds.feature_dim()
        << " C=" << ds.num_classes() << " -> " << out_dir.string() << '\n';
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const Dataset ds = cfg.load_data();
    ds.validate();
    if (cfg.method == Method::grace && !cfg.grace.k && ds.num_nodes() > cfg.grace.memory_cap)
        throw RefusedError("grace with k=all on N=" + std::to_string(ds.num_nodes()) + " exceeds the memory cap of " +
                           std::to_string(cfg.grace.memory_cap) + " nodes (quadratic negatives); use a finite --grace.k");

    fs::create_directories(cfg.out);
    write_json_file(cfg.out / "config.json", to_json(cfg));
    std::ofstream metrics(cfg.out / "metrics.jsonl");
    if (!metrics) throw Error("cannot write " + (cfg.out / "metrics.jsonl").string());

    json summary{{"method", method_name(cfg.method)}, {"seed", cfg.seed}, {"dataset", dataset_summary(ds)}};
    auto log_summary = [&](const std::vector<MetricsRecord>& log, std::uint64_t steps) {
        summary["steps"] = steps;
        if (!log.empty()) summary["final"] = to_json(log.back());
    };
    ParamSet enc;
    switch (cfg.method) {
        case Method::bgrl: {
            auto run = train_bgrl(ds, cfg.bgrl_config(), cfg.seed, [&](const MetricsRecord& r) { write_jsonl(metrics, r); });
            log_summary(run.log, run.state.step);
            enc = run.state.online.subset("enc.");
            break;
        }
        case Method::grace: {
            auto run = train_grace(ds, cfg.grace_config(), cfg.seed);
            for (const auto& r : run.log) write_jsonl(metrics, r);
            log_summary(run.log, run.state.step);
            enc = run.state.params.subset("enc.");
            break;
        }
        case Method::random_init:
            enc = glorot_init(cfg.encoder, ds.feature_dim(), derive_seed({cfg.seed, 1}));
            summary["steps"] = 0;
            break;
        case Method::supervised:
        case Method::semisup: {
            auto run = train_semisup(ds, cfg.semisup_config(), cfg.seed, cfg.method == Method::supervised, cfg.eval_every);
            for (const auto& r : run.log) write_jsonl(metrics, r);
            log_summary(run.log, run.state.core.step);
            summary["val_accuracy"] = run.final_val_accuracy;
            summary["test_accuracy"] = run.final_test_accuracy;
            enc = run.state.core.online.subset("enc.");
            break;
        }
    }
    const Tensor h = encode(cfg.encoder, enc, ds, Mode::eval);
    summary["embedding"] = {{"spread", ds.num_nodes() >= 2 ? embedding_spread(h) : 0.0},
                            {"mean_norm", mean_embedding_norm(h)}};

    save_checkpoint(cfg.out / "encoder.ckpt", enc);
    write_json_file(cfg.out / "encoder.json", {{"encoder", encoder_to_json(cfg.encoder)}, {"in_dim", ds.feature_dim()}});
    write_json_file(cfg.out / "summary.json", summary);
    out << method_name(cfg.method) << ": " << summary.value("steps", 0) << " steps -> " << cfg.out.string() << '\n';
}

struct EvalFlags {
    std::string ckpt;
    std::string encoder_json;
    std::string probe = "grid_full";
    std::size_t seeds = 20;
    bool fixed_split = false;
    std::string out;
};

void cmd_eval(const EvalFlags& f, const Dataset& ds, std::uint64_t base_seed, std::ostream& out) {
    const fs::path ckpt(f.ckpt);
    const fs::path sidecar = f.encoder_json.empty() ? ckpt.parent_path() / "encoder.json" : fs::path(f.encoder_json);
    const json meta = read_json_file(sidecar);
    if (!meta.contains("encoder")) throw ConfigError(sidecar.string() + " lacks an 'encoder' block");
    const EncoderConfig enc_cfg = encoder_from_json(meta.at("encoder"));
    if (meta.contains("in_dim") && meta.at("in_dim").get<std::size_t>() != ds.feature_dim())
        throw ShapeError("checkpoint expects " + std::to_string(meta.at("in_dim").get<std::size_t>()) +
                         " input features, dataset has " + std::to_string(ds.feature_dim()));
    ParamSet params = load_checkpoint(ckpt);
    if (f.seeds == 0) throw ConfigError("--seeds must be >= 1");

    ProbeConfig pc;
    pc.mode = parse_probe_mode(f.probe);
    const Tensor emb = embed_frozen(enc_cfg, params, ds);
    json per_seed = json::array();
    std::vector<double> test, val;
    for (std::size_t s = 0; s < f.seeds; ++s) {
        const std::uint64_t seed = base_seed + s;
        const SplitMask splits = f.fixed_split ? ds.splits : labeled_split(ds.labels, seed);
        const auto r = linear_probe(emb, ds.labels, splits, pc);
        per_seed.push_back({{"seed", seed},
                            {"train_accuracy", r.train_accuracy},
                            {"val_accuracy", r.val_accuracy},
                            {"test_accuracy", r.test_accuracy},
                            {"regularizer", r.regularizer}});
        test.push_back(r.test_accuracy);
        val.push_back(r.val_accuracy);
    }
    const auto [test_mean, test_std] = mean_std(test);
    const auto [val_mean, val_std] = mean_std(val);
    json probe{{"probe", f.probe},
               {"split", f.fixed_split ? "dataset" : "random-10-10-80"},
               {"seeds", per_seed},
               {"test_accuracy", {{"mean", test_mean}, {"std", test_std}}},
               {"val_accuracy", {{"mean", val_mean}, {"std", val_std}}}};

    const Tensor raw = encode(enc_cfg, params, ds, Mode::eval);
    json diag{{"spread", ds.num_nodes() >= 2 ? embedding_spread(raw) : 0.0}, {"mean_norm", mean_embedding_norm(raw)}};
    if (enc_cfg.kind == EncoderKind::gat) {
        const auto hist = attention_entropy_histogram(enc_cfg, params, ds);
        const double mean = hist.values.empty() ? 0.0
                                                : std::accumulate(hist.values.begin(), hist.values.end(), 0.0) /
                                                      static_cast<double>(hist.values.size());
        diag["attention_entropy"] = {{"nodes", hist.nodes.size()}, {"mean", mean}, {"lo", hist.lo},
                                     {"hi", hist.hi},             {"counts", hist.counts}};
    }

    const fs::path out_dir = f.out.empty() ? ckpt.parent_path() : fs::path(f.out);
    if (!out_dir.empty()) fs::create_directories(out_dir);
    write_json_file(out_dir / "probe.json", probe);
    write_json_file(out_dir / "diag.json", diag);
    char line[128];
    std::snprintf(line, sizeof line, "test accuracy %.4f +- %.4f over %zu seeds\n", test_mean, test_std, f.seeds);
    out << line;
}

struct AblateFlags {
    std::string ks;
    std::size_t seeds = 5;
    std::string probe = "grid_full";
    std::size_t workers = 1;
    bool no_bgrl = false;
};

std::vector<std::optional<std::size_t>> parse_k_list(const std::string& s) {
    std::vector<std::optional<std::size_t>> ks;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto end = std::min(s.find(',', start), s.size());
        const std::string tok = s.substr(start, end - start);
        if (tok == "all") ks.emplace_back(std::nullopt);
        else ks.emplace_back(parse_u64(tok, "k"));
        start = end + 1;
    }
    if (ks.empty()) throw ConfigError("--k needs at least one value");
    return ks;
}

/// Accuracy of a frozen encoder on the dataset's own split.
double probe_accuracy(const EncoderConfig& enc_cfg, const ParamSet& params, const Dataset& ds, ProbeMode mode) {
    ProbeConfig pc;
    pc.mode = mode;
    return linear_probe(embed_frozen(enc_cfg, params, ds), ds.labels, ds.splits, pc).test_accuracy;
}

std::int64_t peak_of(const std::vector<MetricsRecord>& log) {
    std::int64_t p = 0;
    for (const auto& r : log) p = std::max(p, r.peak_bytes);
    return p;
}

void cmd_ablate_k(const RunConfig& cfg, const AblateFlags& f, const std::string& csv_path, std::ostream& out) {
    cfg.validate();
    const auto ks = parse_k_list(f.ks);
    const ProbeMode mode = parse_probe_mode(f.probe);
    if (f.seeds == 0) throw ConfigError("--seeds must be >= 1");

    // Seeds shift the SBM draw as well as the training seed; a fixed dataset is loaded once.
    std::optional<Dataset> fixed;
    if (!cfg.sbm) fixed = cfg.load_data();
    auto dataset_for = [&](std::uint64_t seed) {
        if (fixed) return *fixed;
        SbmParams p = *cfg.sbm;
        p.seed = cfg.sbm->seed + seed;
        return generate_sbm(p);
    };

    const std::size_t rows = ks.size() + (f.no_bgrl ? 0 : 1);
    std::vector<std::vector<double>> acc(rows, std::vector<double>(f.seeds));
    std::vector<std::vector<std::int64_t>> peak(rows, std::vector<std::int64_t>(f.seeds));
    run_jobs(rows * f.seeds, f.workers, [&](std::size_t job) {
        const std::size_t row = job / f.seeds, s = job % f.seeds;
        const std::uint64_t seed = cfg.seed + s;
        const Dataset ds = dataset_for(s);
        if (row < ks.size()) {
            GraceTrainConfig g = cfg.grace_config();
            g.grace.k = ks[row];
            auto run = train_grace(ds, g, seed);
            acc[row][s] = probe_accuracy(g.encoder, run.state.params.subset("enc."), ds, mode);
            peak[row][s] = peak_of(run.log);
        } else {
            auto run = train_bgrl(ds, cfg.bgrl_config(), seed);
            acc[row][s] = probe_accuracy(cfg.encoder, run.state.online.subset("enc."), ds, mode);
            peak[row][s] = peak_of(run.log);
        }
    });

    CsvSink sink(csv_path, out);
    *sink << "method,k,seeds,mean_accuracy,std_accuracy,peak_bytes,accuracies\n";
    for (std::size_t row = 0; row < rows; ++row) {
        const bool grace = row < ks.size();
        const auto [mean, sd] = mean_std(acc[row]);
        std::string per_seed;
        for (double a : acc[row]) per_seed += (per_seed.empty() ? "" : ";") + fmt_double(a);
        const std::string k = !grace ? "" : ks[row] ? std::to_string(*ks[row]) : "all";
        *sink << (grace ? "grace" : "bgrl") << ',' << k << ',' << f.seeds << ',' << fmt_double(mean) << ','
              << fmt_double(sd) << ',' << *std::max_element(peak[row].begin(), peak[row].end()) << ',' << per_seed
              << '\n';
    }
}

void cmd_schedule_dump(const ScheduleConfig& sc, const std::string& csv_path, std::ostream& out) {
    sc.validate();
    CsvSink sink(csv_path, out);
    *sink << "step,lr,tau\n";
    for (std::uint64_t i = 0; i <= sc.n_total; ++i)
        *sink << i << ',' << fmt_double(learning_rate_at(i, sc)) << ',' << fmt_double(tau_at(i, sc)) << '\n';
}

struct BenchFlags {
    std::string sizes = "256,512,1024,2048";
    double degree = 10.0;
    std::string methods = "bgrl,grace";
    std::string grace_k = "all";
};

/// Four-block SBM whose expected degree stays at `degree` as N grows, so M grows linearly.
Dataset bench_graph(std::size_t n, double degree, std::size_t feature_dim, std::uint64_t seed) {
    SbmParams p;
    p.blocks = 4;
    p.nodes_per_block = std::max<std::size_t>(n / 4, 2);
    const double per_block = static_cast<double>(p.nodes_per_block);
    p.p_in = std::min(1.0, 0.8 * degree / (per_block - 1.0));
    p.p_out = std::min(1.0, 0.2 * degree / (3.0 * per_block));
    p.feature_dim = feature_dim;
    p.seed = seed;
    return generate_sbm(p);
}

void cmd_bench_memory(const RunConfig& cfg, const BenchFlags& f, const std::string& csv_path, std::ostream& out) {
    std::vector<std::size_t> sizes;
    for (const auto& v : parse_k_list(f.sizes)) {
        if (!v || *v < 8) throw ConfigError("--sizes must list integers >= 8");
        sizes.push_back(*v);
    }
    std::vector<std::string> methods;
    for (std::size_t start = 0; start <= f.methods.size();) {
        const auto end = std::min(f.methods.find(',', start), f.methods.size());
        methods.push_back(f.methods.substr(start, end - start));
        start = end + 1;
    }
    for (const auto& m : methods)
        if (m != "bgrl" && m != "grace") throw ConfigError("--methods accepts bgrl and grace");
    RunConfig base = cfg;
    base.grace.k = f.grace_k == "all" ? std::nullopt : std::optional<std::size_t>(parse_u64(f.grace_k, "--grace-k"));
    base.grace.memory_cap = std::numeric_limits<std::size_t>::max();
    base.optim.n_total = std::max<std::uint64_t>(base.optim.n_total, 1);
    base.optim.n_warmup = std::min(base.optim.n_warmup, base.optim.n_total);
    base.encoder.validate();
    base.optim.validate();

    CsvSink sink(csv_path, out);
    *sink << "method,N,M,peak_bytes,predicted_cost\n";
    const CostModel unit;
    for (std::size_t n : sizes) {
        const Dataset ds = bench_graph(n, f.degree, cfg.sbm ? cfg.sbm->feature_dim : 32, cfg.seed);
        const double nn = static_cast<double>(ds.num_nodes());
        const double mm = static_cast<double>(ds.graph.num_edges() / 2);
        for (const auto& m : methods) {
            std::int64_t peak = 0;
            double predicted = 0.0;
            if (m == "bgrl") {
                auto state = init_bgrl(base.bgrl_config(), ds.feature_dim(), cfg.seed);
                peak = bgrl_update_step(state, base.bgrl_config(), ds, cfg.seed).peak_bytes;
                predicted = predict_cost(CostMethod::bgrl, nn, mm, unit);
            } else {
                auto gcfg = base.grace_config();
                auto state = init_grace(gcfg, ds.feature_dim(), cfg.seed);
                peak = grace_update_step(state, gcfg, ds, cfg.seed).peak_bytes;
                predicted = predict_cost(CostMethod::grace, nn, mm, unit);
            }
            *sink << m << ',' << ds.num_nodes() << ',' << ds.graph.num_edges() / 2 << ',' << peak << ','
                  << fmt_double(predicted) << '\n';
        }
    }
}

int report(std::ostream& err, int code, const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Self-supervised graph representation learning (BGRL, GRACE) toolkit", "ssgraph"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "Write a synthetic SBM dataset");
    DataFlags gen_data;
    std::optional<std::uint64_t> gen_seed;
    double train_fraction = 0.1, val_fraction = 0.1;
    std::string gen_out;
    gen->add_option("--sbm", gen_data.sbm, "BLOCKSxNODES, e.g. 4x100")->required();
    gen->add_option("--p-in", gen_data.params.p_in, "Intra-block edge probability");
    gen->add_option("--p-out", gen_data.params.p_out, "Inter-block edge probability");
    gen->add_option("--feature-dim", gen_data.params.feature_dim, "Feature width");
    gen->add_option("--signal", gen_data.params.signal, "Feature signal in [0, 1]");
    gen->add_option("--seed", gen_seed, "Generator seed (default: $SSGRAPH_SEED or 0)");
    gen->add_option("--train-fraction", train_fraction, "Train split fraction");
    gen->add_option("--val-fraction", val_fraction, "Validation split fraction");
    gen->add_option("--out", gen_out, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train an encoder");
    ConfigFlags train_flags;
    train_flags.add(train);

    auto* eval = app.add_subcommand("eval", "Linear-probe a frozen checkpoint");
    EvalFlags eval_flags;
    DataFlags eval_data;
    std::optional<std::uint64_t> eval_seed;
    eval->add_option("--ckpt", eval_flags.ckpt, "Encoder checkpoint")->required();
    eval->add_option("--encoder", eval_flags.encoder_json, "Encoder JSON (default: encoder.json next to the checkpoint)");
    eval->add_option("--probe", eval_flags.probe, "grid_full|gd_fast");
    eval->add_option("--seeds", eval_flags.seeds, "Number of random splits");
    eval->add_option("--seed", eval_seed, "First split seed (default: $SSGRAPH_SEED or 0)");
    eval->add_flag("--fixed-split", eval_flags.fixed_split, "Use the dataset's own split for every seed");
    eval->add_option("--out", eval_flags.out, "Directory for probe.json and diag.json");
    eval_data.add(eval);

    auto* ablate = app.add_subcommand("ablate-k", "GRACE accuracy and memory across negative counts, plus BGRL");
    ConfigFlags ablate_flags;
    AblateFlags ablate_opts;
    ablate_flags.add(ablate);
    ablate->add_option("--k", ablate_opts.ks, "Comma-separated k values (integers or 'all')")->required();
    ablate->add_option("--seeds", ablate_opts.seeds, "Paired seeds per row");
    ablate->add_option("--probe", ablate_opts.probe, "grid_full|gd_fast");
    ablate->add_option("--workers", ablate_opts.workers, "Parallel jobs");
    ablate->add_flag("--no-bgrl", ablate_opts.no_bgrl, "Skip the BGRL comparison row");

    auto* sched = app.add_subcommand("schedule-dump", "Learning-rate and EMA schedule table");
    ConfigFlags sched_flags;
    sched_flags.add(sched);
    std::optional<double> eta_base, tau_base;
    std::optional<std::uint64_t> n_total, n_warmup;
    sched->add_option("--eta-base", eta_base, "Peak learning rate");
    sched->add_option("--n-total", n_total, "Total steps");
    sched->add_option("--n-warmup", n_warmup, "Warmup steps");
    sched->add_option("--tau-base", tau_base, "Initial EMA decay");

    auto* bench = app.add_subcommand("bench-memory", "Peak activation bytes of one step against the cost model");
    ConfigFlags bench_flags;
    BenchFlags bench_opts;
    bench_flags.add(bench);
    bench->add_option("--sizes", bench_opts.sizes, "Comma-separated node counts");
    bench->add_option("--degree", bench_opts.degree, "Expected node degree (M grows with N)");
    bench->add_option("--methods", bench_opts.methods, "bgrl,grace");
    bench->add_option("--grace-k", bench_opts.grace_k, "GRACE negatives per node or 'all'");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            cmd_gen_data(gen_data, gen_seed.value_or(default_seed()), train_fraction, val_fraction, gen_out, out);
        } else if (train->parsed()) {
            cmd_train(train_flags.resolve(train->remaining()), out);
        } else if (eval->parsed()) {
            json doc{{"seed", eval_seed.value_or(default_seed())}};
            eval_data.apply(doc);
            if (!doc.contains("data")) throw ConfigError("eval needs --data or --sbm");
            RunConfig src = run_config_from_json(doc);
            cmd_eval(eval_flags, src.load_data(), eval_seed.value_or(default_seed()), out);
        } else if (ablate->parsed()) {
            cmd_ablate_k(ablate_flags.resolve(ablate->remaining()), ablate_opts, ablate_flags.out, out);
        } else if (sched->parsed()) {
            auto doc = sched_flags;
            doc.out.clear();
            ScheduleConfig sc = doc.resolve(sched->remaining()).optim;
            if (eta_base) sc.eta_base = *eta_base;
            if (tau_base) sc.tau_base = *tau_base;
            if (n_total) sc.n_total = *n_total;
            if (n_warmup) sc.n_warmup = *n_warmup;
            cmd_schedule_dump(sc, sched_flags.out, out);
        } else if (bench->parsed()) {
            auto doc = bench_flags;
            doc.out.clear();
            cmd_bench_memory(doc.resolve(bench->remaining()), bench_opts, bench_flags.out, out);
        }
    } catch (const RefusedError& e) {
        return report(err, kExitRefused, e);
    } catch (const NumericError& e) {
        return report(err, kExitNumeric, e);
    } catch (const ConfigError& e) {
        return report(err, kExitConfig, e);
    } catch (const ParseError& e) {
        return report(err, kExitConfig, e);
    } catch (const IndexError& e) {
        return report(err, kExitConfig, e);
    } catch (const ShapeError& e) {
        return report(err, kExitConfig, e);
    } catch (const DegenerateError& e) {
        return report(err, kExitConfig, e);
    } catch (const KindError& e) {
        return report(err, kExitConfig, e);
    } catch (const std::exception& e) {
        return report(err, kExitFailure, e);
    }
    return kExitOk;
}

}  // namespace ssg
