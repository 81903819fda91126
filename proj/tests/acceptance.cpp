// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status 0 iff all pass.
// Usage: acceptance [criterion ...]   (default: 1-9)

#include "ssg/bgrl.hpp"
#include "ssg/eval.hpp"
#include "ssg/grace.hpp"
#include "ssg/minibatch.hpp"
#include "ssg/optim.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>

using namespace ssg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

/// One-sided paired t-test of mean(b - a) > 0.
double paired_p_greater(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
    const double m = mean(d);
    double ss = 0.0;
    for (double x : d) ss += (x - m) * (x - m);
    const double n = static_cast<double>(d.size());
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd == 0.0) return m > 0.0 ? 0.0 : 1.0;
    const double t = m / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    return boost::math::cdf(boost::math::complement(dist, t));
}

std::string join(const std::vector<double>& v, int prec = 3) {
    std::string s;
    char buf[32];
    for (double x : v) {
        std::snprintf(buf, sizeof buf, "%.*f", prec, x);
        s += (s.empty() ? "" : " ") + std::string(buf);
    }
    return s;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// 1. Gradient correctness

Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    constexpr double kStep = 1e-3, kTol = 1e-3;
    struct Sweep {
        Activation act;
        const char* label;
        double worst = 0.0, worst_screened = 0.0;
        std::string worst_name;
        std::size_t tensors = 0, entries = 0, nonsmooth = 0;
    };
    std::vector<Sweep> sweeps{{Activation::elu, "elu"}, {Activation::prelu, "prelu"}, {Activation::relu, "relu"}};
    Rng jitter_rng(77);
    // Evaluate at a random point near initialization.
    auto jitter = [&](ParamSet& ps) {
        for (auto& [name, p] : ps) {
            if (!p.trainable) continue;
            const Tensor noise = testing::random_tensor(p.value.rows(), p.value.cols(), jitter_rng, 0.1);
            for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] += noise[i];
        }
    };
    for (auto& sw : sweeps) {
        const Activation act = sw.act;
        const double h = kStep;
        auto record = [&](const std::string& what, const std::vector<testing::GradError>& errs) {
            for (const auto& e : errs) {
                ++sw.tensors;
                sw.entries += e.entries;
                sw.nonsmooth += e.nonsmooth;
                sw.worst_screened = std::max(sw.worst_screened, e.screened_rel_error);
                if (e.rel_error > sw.worst) {
                    sw.worst = e.rel_error;
                    sw.worst_name = what + " " + e.name;
                }
            }
        };

        Rng rng(2024);
        std::vector<EncoderConfig> encoders;
        for (auto norm : {NormType::none, NormType::batch, NormType::layer}) {
            encoders.push_back({.layer_sizes = {4, 3}, .activation = act, .norm = norm});
            encoders.push_back({.kind = EncoderKind::meanpool_skip, .layer_sizes = {3, 3, 3}, .activation = act, .norm = norm});
            encoders.push_back({.kind = EncoderKind::gat, .layer_sizes = {3, 3}, .activation = act, .norm = norm,
                                .gat_heads = {2, 2}});
        }
        encoders.push_back({.layer_sizes = {4, 3}, .activation = act, .norm = NormType::layer, .weight_standardization = true});

        for (int trial = 0; trial < 3; ++trial) {
            const std::size_t n = 5 + static_cast<std::size_t>(trial);
            const Graph g = testing::random_graph(n, 0.4, rng, true);
            const Tensor x = testing::random_tensor(n, 3, rng);
            const Tensor probe = testing::random_tensor(3, 2, rng);
            std::vector<int> labels(n);
            for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 3);

            for (const auto& cfg : encoders) {
                const std::string tag = "kind" + std::to_string(int(cfg.kind)) + "/norm" + std::to_string(int(cfg.norm));
                const auto adj = normalize(g, cfg.graph_norm());
                auto ps = glorot_init(cfg, 3, 10 + trial);
                jitter(ps);
                record("encoder " + tag, testing::check_gradients(ps, [&](ag::Tape& t, Binding& p) {
                    auto h = encoder_forward(cfg, p, adj, t.constant(x), Mode::train);
                    return ag::sum(ag::elu(ag::matmul(h, t.constant(probe))));
                }, h, true));

                // Cross-entropy through encoder and a linear head.
                ps.add("head.W", testing::random_tensor(3, 3, rng, 0.5));
                ps.add("head.b", testing::random_tensor(1, 3, rng, 0.1));
                jitter(ps);
                record("ce " + tag, testing::check_gradients(ps, [&](ag::Tape& t, Binding& p) {
                    auto h = encoder_forward(cfg, p, adj, t.constant(x), Mode::train);
                    return ag::softmax_cross_entropy(ag::add_bias(ag::matmul(h, p("head.W")), p("head.b")), labels);
                }, h, true));
            }

            // Predictor MLP under each norm.
            for (auto norm : {NormType::none, NormType::batch, NormType::layer}) {
                ParamSet ps;
                const MlpConfig mc{3, 5, 3, act, norm, 0.99};
                init_mlp(ps, "pred.", mc, 7 + trial);
                jitter(ps);
                const Tensor in = testing::random_tensor(n, 3, rng);
                record("predictor norm" + std::to_string(int(norm)), testing::check_gradients(ps, [&](ag::Tape& t, Binding& p) {
                    return ag::sum(ag::elu(ag::matmul(mlp_forward(mc, p, "pred.", t.constant(in), Mode::train), t.constant(probe))));
                }, h, true));
            }

            // BGRL symmetrized objective, with and without projector.
            Dataset ds;
            ds.graph = g;
            ds.features = testing::random_features(n, 3, rng);
            ds.labels = labels;
            for (bool projector : {false, true}) {
                BgrlConfig cfg;
                cfg.encoder = {.layer_sizes = {4, 3}, .activation = act};
                cfg.predictor_hidden = 5;
                cfg.projector = projector;
                cfg.projector_hidden = 4;
                cfg.augment = {0.3, 0.3, 0.3, 0.3};
                auto state = init_bgrl(cfg, 3, 30 + trial);
                jitter(state.online);
                jitter(state.target);
                auto [v1, v2] = make_views(ds, cfg.augment, 3, trial);
                const auto a1 = normalize(v1.graph, NormKind::symmetric);
                const auto a2 = normalize(v2.graph, NormKind::symmetric);
                record(projector ? "bgrl+proj" : "bgrl", testing::check_gradients(state.online, [&](ag::Tape& t, Binding& online) {
                    Binding target(t, state.target, false);
                    ViewInput in1{&a1, t.constant(to_tensor(v1.features))};
                    ViewInput in2{&a2, t.constant(to_tensor(v2.features))};
                    return bgrl_objective(cfg, online, target, in1, in2).loss;
                }, h, true));
            }

            // GRACE InfoNCE through encoder and projector, sampled and exact negatives.
            for (std::optional<std::size_t> k : {std::optional<std::size_t>(2), std::optional<std::size_t>()}) {
                GraceTrainConfig cfg;
                cfg.encoder = {.layer_sizes = {4, 3}, .activation = act};
                cfg.grace.k = k;
                cfg.grace.projector_hidden = 4;
                auto state = init_grace(cfg, 3, 50 + trial);
                jitter(state.params);
                auto [v1, v2] = make_views(ds, {0.3, 0.3, 0.3, 0.3}, 5, trial);
                const auto a1 = normalize(v1.graph, NormKind::symmetric);
                const auto a2 = normalize(v2.graph, NormKind::symmetric);
                const std::size_t kk = effective_k(cfg.grace, n);
                Rng neg_rng(trial);
                const NegativeTable neg = k ? sample_negatives(n, kk, neg_rng) : all_negatives(n);
                const auto proj = grace_projector_config(cfg);
                record(k ? "grace k2" : "grace all", testing::check_gradients(state.params, [&](ag::Tape& t, Binding& p) {
                    auto h1 = encoder_forward(cfg.encoder, p, a1, t.constant(to_tensor(v1.features)), Mode::train);
                    auto h2 = encoder_forward(cfg.encoder, p, a2, t.constant(to_tensor(v2.features)), Mode::train);
                    auto u = mlp_forward(proj, p, "proj.", h1, Mode::train);
                    auto v = mlp_forward(proj, p, "proj.", h2, Mode::train);
                    return grace_objective(u, v, neg, kk, cfg.grace.temperature);
                }, h, true));
            }
        }
    }
    const double secs = seconds_since(t0);
    bool pass = secs < 120.0;
    std::string detail;
    char buf[240];
    for (const auto& sw : sweeps) {
        pass = pass && sw.worst < kTol && sw.worst_screened < kTol;
        std::snprintf(buf, sizeof buf, "%s: worst %.2e (%s), %zu/%zu entries on a kink rechecked at h=1e-6 worst %.2e; ",
                      sw.label, sw.worst, sw.worst_name.c_str(), sw.nonsmooth, sw.entries, sw.worst_screened);
        detail += buf;
    }
    std::snprintf(buf, sizeof buf, "h=%.0e, limit %.0e; %.1f s (limit 120 s)", kStep, kTol, secs);
    return {pass, detail + buf};
}

// ---------------------------------------------------------------------------
// 2. Stop-gradient contract

Outcome stop_gradient() {
    auto ds = generate_sbm({.blocks = 4, .nodes_per_block = 25, .p_in = 0.2, .p_out = 0.02, .feature_dim = 16,
                            .signal = 0.3, .seed = 1});
    BgrlConfig cfg;
    cfg.encoder = {.layer_sizes = {32, 16}};
    cfg.predictor_hidden = 32;
    cfg.projector = true;
    cfg.projector_hidden = 32;
    cfg.augment = {0.2, 0.2, 0.3, 0.3};
    cfg.schedule = {.eta_base = 5e-3, .n_total = 100, .n_warmup = 10, .tau_base = 0.9, .weight_decay = 1e-5};
    auto state = init_bgrl(cfg, ds.feature_dim(), 3);
    std::size_t violations = 0, ema_mismatches = 0, target_tensors = 0;
    double online_grad_seen = 0.0;
    for (std::uint64_t step = 0; step < 100; ++step) {
        const ParamSet before = state.target;
        const double tau = tau_at(step, cfg.schedule);
        // Gradients are zeroed by the optimizer; observe them before it runs.
        {
            auto [v1, v2] = make_views(ds, cfg.augment, 3, step);
            const auto a1 = normalize(v1.graph, NormKind::symmetric);
            const auto a2 = normalize(v2.graph, NormKind::symmetric);
            ag::Tape tape;
            Binding online(tape, state.online, true);
            Binding target(tape, state.target, false);
            ViewInput in1{&a1, tape.constant(to_tensor(v1.features))};
            ViewInput in2{&a2, tape.constant(to_tensor(v2.features))};
            auto loss = bgrl_objective(cfg, online, target, in1, in2).loss;
            tape.backward(loss);
            online.accumulate_grads();
            target.accumulate_grads();
            for (const auto& [name, p] : state.target) {
                ++target_tensors;
                for (std::size_t i = 0; i < p.grad.size(); ++i)
                    if (p.grad[i] != 0.0) ++violations;
            }
            for (const auto& [name, p] : state.online)
                for (std::size_t i = 0; i < p.grad.size(); ++i) online_grad_seen = std::max(online_grad_seen, std::abs(p.grad[i]));
            state.online.zero_grad();
            state.target.zero_grad();
        }
        bgrl_update_step(state, cfg, ds, 3);
        for (const auto& [name, p] : state.target) {
            for (std::size_t i = 0; i < p.grad.size(); ++i)
                if (p.grad[i] != 0.0) ++violations;
            const Tensor& old = before.value(name);
            const Tensor& on = state.online.value(name);
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double expect = tau * old[i] + (1.0 - tau) * on[i];
                if (std::abs(p.value[i] - expect) > 1e-12 * (1.0 + std::abs(expect))) ++ema_mismatches;
            }
        }
    }
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "100 steps: %zu nonzero target-gradient entries over %zu tensor checks, %zu non-EMA target moves, "
                  "max |online grad| %.2e",
                  violations, target_tensors, ema_mismatches, online_grad_seen);
    return {violations == 0 && ema_mismatches == 0 && online_grad_seen > 0.0, buf};
}

// ---------------------------------------------------------------------------
// 3. Schedule exactness

Outcome schedule_exactness() {
    const std::vector<ScheduleConfig> configs{
        {.eta_base = 5e-4, .n_total = 10'000, .n_warmup = 1'000, .tau_base = 0.99},
        {.eta_base = 5e-3, .n_total = 20'000, .n_warmup = 2'000, .tau_base = 0.99},
        {.eta_base = 1e-2, .n_total = 777, .n_warmup = 0, .tau_base = 0.9},
        {.eta_base = 1e-5, .n_total = 1'001, .n_warmup = 77, .tau_base = 0.5},
    };
    constexpr double pi = 3.14159265358979323846;
    double worst = 0.0;
    bool monotone = true;
    for (const auto& c : configs) {
        const double nt = static_cast<double>(c.n_total), nw = static_cast<double>(c.n_warmup);
        auto eta = [&](double i) {
            if (i <= nw && nw > 0) return i * c.eta_base / nw;
            return c.eta_base * (1.0 + std::cos((i - nw) * pi / (nt - nw))) * 0.5;
        };
        auto tau = [&](double i) { return 1.0 - (1.0 - c.tau_base) * (std::cos(pi * i / nt) + 1.0) / 2.0; };
        for (std::uint64_t i : {std::uint64_t{0}, c.n_warmup, c.n_total / 2, c.n_total}) {
            worst = std::max(worst, std::abs(learning_rate_at(i, c) - eta(static_cast<double>(i))));
            worst = std::max(worst, std::abs(tau_at(i, c) - tau(static_cast<double>(i))));
        }
        worst = std::max(worst, std::abs(tau_at(c.n_total, c) - 1.0));
        worst = std::max(worst, std::abs(learning_rate_at(c.n_total, c)));
        for (std::uint64_t i = 1; i <= c.n_total; ++i)
            if (tau_at(i, c) < tau_at(i - 1, c)) monotone = false;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "max deviation from closed forms %.2e (limit 1e-12); tau monotone: %s", worst,
                  monotone ? "yes" : "no");
    return {worst <= 1e-12 && monotone, buf};
}

// ---------------------------------------------------------------------------
// 4 & 5. Non-collapse and representation quality on SBM(4x100)

constexpr std::size_t kSeeds = 5;

SbmParams quality_sbm(std::uint64_t seed) {
    return {.blocks = 4, .nodes_per_block = 100, .p_in = 0.1, .p_out = 0.01, .feature_dim = 32, .signal = 0.3, .seed = seed};
}

BgrlConfig quality_bgrl() {
    BgrlConfig cfg;
    cfg.encoder = {.layer_sizes = {64, 32}};
    cfg.predictor_hidden = 64;
    cfg.augment = {0.2, 0.2, 0.3, 0.3};
    cfg.schedule = {.eta_base = 5e-3, .n_total = 500, .n_warmup = 50, .tau_base = 0.99, .weight_decay = 1e-5};
    cfg.metrics_every = 1;
    return cfg;
}

struct QualityRuns {
    std::vector<double> spread, norm_ratio, ratio_min, ratio_max, late_spread_min, loss_min, loss_max, bgrl_acc, random_acc;
    double train_seconds = 0.0, total_seconds = 0.0;
};

const QualityRuns& quality_runs() {
    static const QualityRuns runs = [] {
        QualityRuns r;
        const auto t0 = Clock::now();
        const BgrlConfig cfg = quality_bgrl();
        double train = 0.0;
        for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
            const Dataset ds = generate_sbm(quality_sbm(seed));
            const auto t1 = Clock::now();
            auto run = train_bgrl(ds, cfg, seed);
            train += seconds_since(t1);
            ParamSet enc = run.state.online.subset("enc.");
            r.spread.push_back(embedding_spread(encode(cfg.encoder, enc, ds, Mode::eval)));
            const double initial = run.log.front().norm;
            double lo = INFINITY, hi = -INFINITY, rlo = INFINITY, rhi = -INFINITY, late = INFINITY;
            for (const auto& rec : run.log) {
                lo = std::min(lo, rec.loss);
                hi = std::max(hi, rec.loss);
                rlo = std::min(rlo, rec.norm / initial);
                rhi = std::max(rhi, rec.norm / initial);
                if (rec.step >= 100) late = std::min(late, rec.spread);
            }
            r.norm_ratio.push_back(run.log.back().norm / initial);
            r.ratio_min.push_back(rlo);
            r.ratio_max.push_back(rhi);
            r.late_spread_min.push_back(late);
            r.loss_min.push_back(lo);
            r.loss_max.push_back(hi);
            const ProbeConfig probe{.mode = ProbeMode::grid_full};
            r.bgrl_acc.push_back(linear_probe(embed_frozen(cfg.encoder, enc, ds), ds.labels, ds.splits, probe).test_accuracy);
            r.random_acc.push_back(random_init_baseline(cfg.encoder, ds, probe, seed).test_accuracy);
        }
        r.train_seconds = train;
        r.total_seconds = seconds_since(t0);
        return r;
    }();
    return runs;
}

Outcome non_collapse() {
    const auto& r = quality_runs();
    const double spread = mean(r.spread), ratio = mean(r.norm_ratio);
    const double rlo = *std::min_element(r.ratio_min.begin(), r.ratio_min.end());
    const double rhi = *std::max_element(r.ratio_max.begin(), r.ratio_max.end());
    const double late = *std::min_element(r.late_spread_min.begin(), r.late_spread_min.end());
    const double lo = *std::min_element(r.loss_min.begin(), r.loss_min.end());
    const double hi = *std::max_element(r.loss_max.begin(), r.loss_max.end());
    char buf[400];
    std::snprintf(buf, sizeof buf,
                  "final spread %.3f (> 0.05) [%s], min logged spread after step 100 %.3f; norm/initial final %.3f [%s], "
                  "range over all steps [%.3f, %.3f] (within [0.1, 10]); loss range [%.3f, %.3f] (within [-2, 2]); "
                  "training %.0f s (limit 300 s)",
                  spread, join(r.spread).c_str(), late, ratio, join(r.norm_ratio).c_str(), rlo, rhi, lo, hi, r.train_seconds);
    return {spread > 0.05 && late > 0.05 && rlo >= 0.1 && rhi <= 10.0 && lo >= -2.0 && hi <= 2.0 && r.train_seconds < 300.0,
            buf};
}

Outcome quality_over_random() {
    const auto& r = quality_runs();
    const double gap = 100.0 * (mean(r.bgrl_acc) - mean(r.random_acc));
    char buf[320];
    std::snprintf(buf, sizeof buf, "BGRL %.3f [%s] vs Random-Init %.3f [%s]: gap %.1f points (>= 5); %.0f s (limit 600 s)",
                  mean(r.bgrl_acc), join(r.bgrl_acc).c_str(), mean(r.random_acc), join(r.random_acc).c_str(), gap,
                  r.total_seconds);
    return {gap >= 5.0 && r.total_seconds < 600.0, buf};
}

// ---------------------------------------------------------------------------
// 6. k-sensitivity

SbmParams many_class_sbm(std::uint64_t seed) {
    return {.blocks = 20, .nodes_per_block = 40, .p_in = 0.15, .p_out = 0.005, .feature_dim = 64, .signal = 0.3, .seed = seed};
}

constexpr std::uint64_t kKSteps = 300;
EncoderConfig k_encoder() { return {.layer_sizes = {128, 128}, .norm = NormType::layer}; }

Outcome k_sensitivity() {
    const auto t0 = Clock::now();
    std::vector<double> k2, k64, bgrl;
    const ProbeConfig probe{.mode = ProbeMode::grid_full};
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        const Dataset ds = generate_sbm(many_class_sbm(seed));
        for (std::size_t k : {2, 64}) {
            GraceTrainConfig g;
            g.encoder = k_encoder();
            g.grace.k = k;
            g.augment = {0.2, 0.2, 0.3, 0.3};
            g.schedule = {.eta_base = 3e-2, .n_total = kKSteps, .n_warmup = kKSteps / 10, .tau_base = 0.99, .weight_decay = 1e-5};
            g.metrics_every = kKSteps;
            auto run = train_grace(ds, g, seed);
            const double acc =
                linear_probe(embed_frozen(g.encoder, run.state.params.subset("enc."), ds), ds.labels, ds.splits, probe).test_accuracy;
            (k == 2 ? k2 : k64).push_back(acc);
        }
        BgrlConfig b;
        b.encoder = {.layer_sizes = {128, 128}};
        b.predictor_hidden = 256;
        b.augment = {0.2, 0.2, 0.3, 0.3};
        b.schedule = {.eta_base = 3e-2, .n_total = kKSteps, .n_warmup = kKSteps / 10, .tau_base = 0.9, .weight_decay = 1e-5};
        b.metrics_every = kKSteps;
        auto run = train_bgrl(ds, b, seed);
        bgrl.push_back(
            linear_probe(embed_frozen(b.encoder, run.state.online.subset("enc."), ds), ds.labels, ds.splits, probe).test_accuracy);
    }
    const double p = paired_p_greater(k2, k64);
    const double margin = 100.0 * (mean(bgrl) - mean(k64));
    char buf[400];
    std::snprintf(buf, sizeof buf,
                  "GRACE k=2 %.3f [%s] < k=64 %.3f [%s], paired one-sided p=%.4f (< 0.05); BGRL %.3f [%s] vs k=64: "
                  "%+.1f points (>= -2); %.0f s",
                  mean(k2), join(k2).c_str(), mean(k64), join(k64).c_str(), p, mean(bgrl), join(bgrl).c_str(), margin,
                  seconds_since(t0));
    return {mean(k2) < mean(k64) && p < 0.05 && margin >= -2.0, buf};
}

// ---------------------------------------------------------------------------
// 7. Memory scaling

Dataset memory_graph(std::size_t n) {
    const double per_block = static_cast<double>(n / 4);
    return generate_sbm({.blocks = 4, .nodes_per_block = n / 4, .p_in = 8.0 / (per_block - 1.0),
                         .p_out = 2.0 / (3.0 * per_block), .feature_dim = 32, .signal = 0.5, .seed = 0});
}

Outcome memory_scaling() {
    const EncoderConfig enc{.layer_sizes = {16, 8}};
    BgrlConfig b;
    b.encoder = enc;
    b.predictor_hidden = 16;
    GraceTrainConfig g;
    g.encoder = enc;
    g.grace.k.reset();
    g.grace.projector_hidden = 16;
    std::vector<double> ns, ms, bgrl_peak, grace_peak;
    for (std::size_t n : {256, 512, 1024, 2048}) {
        const Dataset ds = memory_graph(n);
        auto bs = init_bgrl(b, ds.feature_dim(), 0);
        bgrl_peak.push_back(static_cast<double>(bgrl_update_step(bs, b, ds, 0).peak_bytes));
        auto gs = init_grace(g, ds.feature_dim(), 0);
        grace_peak.push_back(static_cast<double>(grace_update_step(gs, g, ds, 0).peak_bytes));
        ns.push_back(static_cast<double>(n));
        ms.push_back(static_cast<double>(ds.graph.num_edges() / 2));
    }
    const double sb = loglog_slope(ns, bgrl_peak), sg = loglog_slope(ns, grace_peak);

    const CostModel unit;
    bool arithmetic = predict_cost(CostMethod::bgrl, 1000, 5000, unit) == 41'000.0 &&
                      predict_cost(CostMethod::grace, 1000, 5000, unit) == 1'028'000.0;
    const CostModel c{2.0, 3.0, 5.0, 7.0};
    arithmetic = arithmetic && predict_cost(CostMethod::bgrl, 300, 900, c) == 6 * 2.0 * 1200 + 4 * 3.0 * 300 + 7.0 * 300 &&
                 predict_cost(CostMethod::grace, 300, 900, c) == 4 * 2.0 * 1200 + 4 * 5.0 * 300 + 7.0 * 300 * 300;
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "peak-bytes log-log slope over N=256..2048 (M ~ N, M/N %.1f..%.1f): GRACE k=all %.3f (> 1.7), "
                  "BGRL %.3f (< 1.3); cost formulas exact: %s",
                  ms.front() / ns.front(), ms.back() / ns.back(), sg, sb, arithmetic ? "yes" : "no");
    return {sg > 1.7 && sb < 1.3 && arithmetic, buf};
}

// ---------------------------------------------------------------------------
// 8. Semi-supervised mixing

Outcome semisup_trend() {
    const auto t0 = Clock::now();
    std::vector<double> sup, r0, r2;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        const Dataset ds = generate_sbm({.blocks = 4, .nodes_per_block = 500, .p_in = 0.02, .p_out = 0.002, .feature_dim = 32,
                                         .signal = 0.3, .seed = seed, .train_fraction = 0.01, .val_fraction = 0.1});
        SemisupConfig cfg;
        cfg.bgrl.encoder = {.layer_sizes = {64, 32}};
        cfg.bgrl.predictor_hidden = 64;
        cfg.bgrl.augment = {0.2, 0.2, 0.3, 0.3};
        cfg.bgrl.schedule = {.eta_base = 5e-3, .n_total = 200, .n_warmup = 20, .tau_base = 0.99, .weight_decay = 1e-5};
        cfg.bgrl.metrics_every = 200;
        cfg.batch = BatchSpec{256, 0.0, 0.0};
        cfg.fanout = FanoutSpec{{10, 5}};
        sup.push_back(train_semisup(ds, cfg, seed, true).final_val_accuracy);
        cfg.batch.aux_weight = 1.0;
        r0.push_back(train_semisup(ds, cfg, seed, false).final_val_accuracy);
        cfg.batch.unlabeled_ratio = 2.0;
        r2.push_back(train_semisup(ds, cfg, seed, false).final_val_accuracy);
    }
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "1%% labels, val accuracy: ratio=2 %.3f [%s] >= ratio=0 %.3f [%s] > supervised %.3f [%s]; %.0f s", mean(r2),
                  join(r2).c_str(), mean(r0), join(r0).c_str(), mean(sup), join(sup).c_str(), seconds_since(t0));
    return {mean(r2) >= mean(r0) && mean(r0) > mean(sup) && mean(r2) > mean(sup), buf};
}

// ---------------------------------------------------------------------------
// 9. Subsampler correctness

Outcome subsampler() {
    Rng rng(99);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + uniform_index(rng, 16);
        const Graph g = testing::random_graph(n, 0.2, rng, true);
        const std::vector<NodeId> seeds{static_cast<NodeId>(uniform_index(rng, n))};
        const auto sg = sample_neighborhood(g, seeds, FanoutSpec{{n, n}}, rng);

        std::set<NodeId> ball{seeds[0]};
        std::vector<NodeId> frontier{seeds[0]};
        for (int hop = 0; hop < 2; ++hop) {
            std::vector<NodeId> next;
            for (NodeId u : frontier)
                for (NodeId v : g.neighbors(u))
                    if (ball.insert(v).second) next.push_back(v);
            frontier = next;
        }
        bool ok = std::set<NodeId>(sg.nodes.begin(), sg.nodes.end()) == ball && sg.nodes.size() == ball.size() &&
                  sg.nodes[0] == seeds[0] && sg.num_central == 1;
        for (NodeId a = 0; ok && a < sg.nodes.size(); ++a) {
            std::set<NodeId> local;
            for (NodeId b : sg.graph.neighbors(a)) local.insert(sg.nodes[b]);
            std::set<NodeId> global;
            for (NodeId b : g.neighbors(sg.nodes[a]))
                if (ball.count(b)) global.insert(b);
            ok = local == global;
        }
        if (!ok) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches against the BFS 2-hop oracle over 50 connected graphs (N <= 16)"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
        {1, {"gradient-correctness", gradient_correctness}},
        {2, {"stop-gradient", stop_gradient}},
        {3, {"schedule-exactness", schedule_exactness}},
        {4, {"non-collapse", non_collapse}},
        {5, {"quality-over-random-init", quality_over_random}},
        {6, {"k-sensitivity", k_sensitivity}},
        {7, {"memory-scaling", memory_scaling}},
        {8, {"semisup-mixing", semisup_trend}},
        {9, {"subsampler-bfs", subsampler}},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    if (selected.empty())
        for (const auto& [id, c] : criteria) selected.push_back(id);

    bool all = true;
    for (int id : selected) {
        const auto it = criteria.find(id);
        if (it == criteria.end()) {
            std::printf("unknown criterion %d\n", id);
            return 2;
        }
        Outcome o;
        try {
            o = it->second.second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        std::printf("criterion %d %-26s %s  %s\n", id, it->second.first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
