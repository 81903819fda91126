#include <doctest.h>

#include "ssg/error.hpp"
#include "ssg/nn.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>

using namespace ssg;
using testing::random_tensor;
using Mat = Eigen::MatrixXd;

namespace {

Mat to_eigen(const Tensor& t) {
    Mat m(static_cast<long>(t.rows()), static_cast<long>(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) m(static_cast<long>(r), static_cast<long>(c)) = t(r, c);
    return m;
}

Mat dense_norm_adj(const Graph& g, NormKind kind) {
    auto a = testing::dense_adjacency_hat(g);
    const long n = static_cast<long>(g.num_nodes());
    Mat m = Mat::Zero(n, n);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) d(i) += a[i][j];
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            if (a[i][j] != 0.0) m(i, j) = kind == NormKind::row ? 1.0 / d(i) : 1.0 / std::sqrt(d(i) * d(j));
    return m;
}

Mat prelu(const Mat& x, double s) { return x.unaryExpr([s](double v) { return v > 0 ? v : s * v; }); }
Mat elu(const Mat& x) { return x.unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); }); }

Mat batch_norm(const Mat& x, const Tensor& g, const Tensor& b) {
    Mat y = x;
    const double n = static_cast<double>(x.rows());
    for (long c = 0; c < x.cols(); ++c) {
        const double mu = x.col(c).mean();
        const double var = (x.col(c).array() - mu).square().sum() / n;
        y.col(c) = ((x.col(c).array() - mu) / std::sqrt(var + kNormEps)) * g[c] + b[c];
    }
    return y;
}

Mat add_row(const Mat& x, const Tensor& b) {
    Mat y = x;
    for (long r = 0; r < x.rows(); ++r)
        for (long c = 0; c < x.cols(); ++c) y(r, c) += b[static_cast<std::size_t>(c)];
    return y;
}

Tensor run(const EncoderConfig& cfg, ParamSet& ps, const Graph& g, const Tensor& x, Mode mode = Mode::train,
           AttentionTrace* trace = nullptr) {
    ag::Tape tape;
    Binding bind(tape, ps, false);
    auto adj = normalize(g, cfg.graph_norm());
    return encoder_forward(cfg, bind, adj, tape.constant(x), mode, "enc.", trace).value();
}

void randomize_affine(ParamSet& ps, Rng& rng) {
    for (auto& [name, p] : ps) {
        if (name.ends_with(".b") || name.ends_with(".beta")) p.value = random_tensor(p.value.rows(), p.value.cols(), rng, 0.3);
        if (name.ends_with(".gamma")) {
            p.value = random_tensor(p.value.rows(), p.value.cols(), rng, 0.3);
            for (auto& v : p.value.flat()) v += 1.0;
        }
    }
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("glorot bounds, determinism and variance") {
    EncoderConfig cfg{.layer_sizes = {3}};
    auto ps = glorot_init(cfg, 3, 1);
    for (double v : ps.value("enc.l0.W").flat()) CHECK(std::abs(v) <= 1.0);
    CHECK(ps.value("enc.l0.prelu").item() == 0.25);
    for (double v : ps.value("enc.l0.b").flat()) CHECK(v == 0.0);
    CHECK(values_equal(glorot_init(cfg, 3, 1), glorot_init(cfg, 3, 1)));
    CHECK_FALSE(values_equal(glorot_init(cfg, 3, 1), glorot_init(cfg, 3, 2)));

    Rng rng(7);
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (int rep = 0; rep < 100; ++rep) {
        auto w = glorot_uniform(100, 100, rng);
        for (double v : w.flat()) {
            sum += v;
            sq += v * v;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - mean * mean;
    CHECK(var == doctest::Approx(0.01).epsilon(0.05));
}

TEST_CASE("gcn: isolated node, identity weight, relu") {
    EncoderConfig cfg{.layer_sizes = {2}, .activation = Activation::relu, .norm = NormType::none};
    auto ps = glorot_init(cfg, 2, 0);
    ps.value("enc.l0.W") = Tensor::identity(2);
    auto y = run(cfg, ps, Graph::from_edges(1, {}), Tensor::from_rows({{1.0, -1.0}}));
    CHECK(y(0, 0) == 1.0);
    CHECK(y(0, 1) == 0.0);
}

TEST_CASE("gcn: two connected nodes average") {
    EncoderConfig cfg{.layer_sizes = {2}, .activation = Activation::linear, .norm = NormType::none};
    auto ps = glorot_init(cfg, 2, 0);
    ps.value("enc.l0.W") = Tensor::identity(2);
    std::vector<Edge> e{{0, 1}};
    auto y = run(cfg, ps, Graph::from_edges(2, e), Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}}));
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 2; ++c) CHECK(y(r, c) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("gcn: two-layer forward matches dense oracle") {
    Rng rng(3);
    auto g = testing::random_graph(8, 0.35, rng);
    EncoderConfig cfg{.layer_sizes = {5, 3}};
    auto ps = glorot_init(cfg, 4, 9);
    randomize_affine(ps, rng);
    ps.value("enc.l0.prelu") = Tensor::scalar(0.1);
    const Tensor x = random_tensor(8, 4, rng);
    auto y = to_eigen(run(cfg, ps, g, x));

    const Mat a = dense_norm_adj(g, NormKind::symmetric);
    Mat h = to_eigen(x);
    for (int l = 0; l < 2; ++l) {
        const std::string n = "enc.l" + std::to_string(l);
        h = add_row(a * h * to_eigen(ps.value(n + ".W")), ps.value(n + ".b"));
        h = batch_norm(h, ps.value(n + ".norm.gamma"), ps.value(n + ".norm.beta"));
        h = prelu(h, ps.value(n + ".prelu").item());
    }
    CHECK((y - h).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gcn: output width follows the configured embedding size") {
    EncoderConfig cfg{.layer_sizes = {16, 8}};
    Rng rng(1);
    auto ps = glorot_init(cfg, 12, 0);
    auto g = testing::random_graph(10, 0.3, rng);
    auto y = run(cfg, ps, g, random_tensor(10, 12, rng));
    CHECK(y.rows() == 10);
    CHECK(y.cols() == 8);
    CHECK_THROWS_AS(run(cfg, ps, g, random_tensor(10, 11, rng)), ShapeError);
}

TEST_CASE("gcn rejects a row-normalized graph") {
    EncoderConfig cfg{.layer_sizes = {2}};
    auto ps = glorot_init(cfg, 2, 0);
    ag::Tape tape;
    Binding bind(tape, ps, false);
    auto adj = normalize(Graph::from_edges(2, {}), NormKind::row);
    CHECK_THROWS_AS(gcn_forward(cfg, bind, adj, tape.constant(Tensor(2, 2)), Mode::train), ConfigError);
}

TEST_CASE("meanpool: zero input, zero output") {
    EncoderConfig cfg{.kind = EncoderKind::meanpool_skip, .layer_sizes = {4, 4, 3}, .norm = NormType::none};
    auto ps = glorot_init(cfg, 5, 0);
    Rng rng(2);
    auto y = run(cfg, ps, testing::random_graph(6, 0.4, rng), Tensor(6, 5));
    for (double v : y.flat()) CHECK(v == 0.0);
}

TEST_CASE("meanpool: single node matches the dense composition") {
    EncoderConfig cfg{.kind = EncoderKind::meanpool_skip, .layer_sizes = {4, 4, 3}, .norm = NormType::none};
    auto ps = glorot_init(cfg, 5, 1);
    Rng rng(3);
    randomize_affine(ps, rng);
    const Tensor x = random_tensor(1, 5, rng);
    auto y = to_eigen(run(cfg, ps, Graph::from_edges(1, {}), x));
    auto mp = [&](int l, const Mat& in) {
        const std::string n = "enc.l" + std::to_string(l);
        return prelu(add_row(in * to_eigen(ps.value(n + ".W")), ps.value(n + ".b")), ps.value(n + ".prelu").item());
    };
    const Mat X = to_eigen(x);
    const Mat h1 = mp(0, X);
    const Mat h2 = mp(1, h1 + X * to_eigen(ps.value("enc.skip1.W")));
    const Mat out = mp(2, h2 + h1 + X * to_eigen(ps.value("enc.skip2.W")));
    CHECK((y - out).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("meanpool: needs exactly three layers") {
    EncoderConfig cfg{.kind = EncoderKind::meanpool_skip, .layer_sizes = {4, 4}};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("gat: singleton neighborhood gives full self-attention") {
    EncoderConfig cfg{.kind = EncoderKind::gat, .layer_sizes = {3}, .activation = Activation::elu,
                      .norm = NormType::none, .gat_heads = {2}};
    auto ps = glorot_init(cfg, 4, 0);
    Rng rng(4);
    const Tensor x = random_tensor(1, 4, rng);
    AttentionTrace trace;
    auto y = to_eigen(run(cfg, ps, Graph::from_edges(1, {}), x, Mode::train, &trace));
    CHECK(trace[0][0][0] == 1.0);
    const Mat X = to_eigen(x);
    Mat mean = (X * to_eigen(ps.value("enc.l0.h0.W")) + X * to_eigen(ps.value("enc.l0.h1.W"))) / 2.0;
    CHECK((y - elu(mean)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gat: identical features give uniform attention") {
    EncoderConfig cfg{.kind = EncoderKind::gat, .layer_sizes = {3}, .norm = NormType::none, .gat_heads = {1}};
    auto ps = glorot_init(cfg, 4, 0);
    Rng rng(5);
    auto g = testing::random_graph(7, 0.4, rng);
    Tensor x(7, 4);
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 4; ++c) x(r, c) = static_cast<double>(c) - 1.5;
    AttentionTrace trace;
    run(cfg, ps, g, x, Mode::train, &trace);
    auto adj = normalize(g, NormKind::symmetric);
    for (NodeId i = 0; i < 7; ++i)
        for (std::size_t k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k)
            CHECK(trace[0][0][k] == doctest::Approx(1.0 / static_cast<double>(adj.degree_hat(i))).epsilon(1e-12));
}

TEST_CASE("gat: two-layer forward matches dense softmax attention oracle") {
    EncoderConfig cfg{.kind = EncoderKind::gat, .layer_sizes = {3, 2}, .activation = Activation::elu,
                      .norm = NormType::none, .gat_heads = {2, 1}};
    Rng rng(6);
    std::vector<Edge> path{{0, 1}, {1, 2}};
    auto g = Graph::from_edges(3, path);
    auto ps = glorot_init(cfg, 4, 3);
    randomize_affine(ps, rng);
    const Tensor x = random_tensor(3, 4, rng);
    AttentionTrace trace;
    auto y = to_eigen(run(cfg, ps, g, x, Mode::train, &trace));

    auto a = testing::dense_adjacency_hat(g);
    auto head = [&](const Mat& h, const std::string& hn) {
        const Mat wh = h * to_eigen(ps.value(hn + ".W"));
        const Mat sd = wh * to_eigen(ps.value(hn + ".a_dst"));
        const Mat ss = wh * to_eigen(ps.value(hn + ".a_src"));
        Mat out = Mat::Zero(h.rows(), wh.cols());
        for (long i = 0; i < h.rows(); ++i) {
            std::vector<double> e(static_cast<std::size_t>(h.rows()), -INFINITY);
            double mx = -INFINITY;
            for (long j = 0; j < h.rows(); ++j)
                if (a[i][j] != 0.0) {
                    double v = sd(i, 0) + ss(j, 0);
                    e[j] = v > 0 ? v : 0.2 * v;
                    mx = std::max(mx, e[j]);
                }
            double z = 0.0;
            for (double& v : e) z += (v = std::exp(v - mx));
            for (long j = 0; j < h.rows(); ++j) out.row(i) += (e[j] / z) * wh.row(j);
        }
        return out;
    };
    const Mat X = to_eigen(x);
    Mat h1(3, 6);
    h1 << head(X, "enc.l0.h0"), head(X, "enc.l0.h1");
    h1 = elu(add_row(h1 + X * to_eigen(ps.value("enc.l0.skip.W")), ps.value("enc.l0.b")));
    const Mat h2 = elu(add_row(head(h1, "enc.l1.h0"), ps.value("enc.l1.b")));
    CHECK((y - h2).cwiseAbs().maxCoeff() < 1e-10);

    auto adj = normalize(g, NormKind::symmetric);
    for (const auto& layer : trace)
        for (const auto& alpha : layer)
            for (NodeId i = 0; i < 3; ++i) {
                double s = 0.0;
                for (std::size_t k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k) s += alpha[k];
                CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
            }
}

TEST_CASE("predictor: zero weights and dense oracle") {
    MlpConfig cfg{4, 6, 4, Activation::prelu, NormType::batch, 0.99};
    ParamSet ps;
    init_mlp(ps, "pred.", cfg, 1);
    CHECK(ps.value("pred.l0.W").rows() == 4);
    CHECK(ps.value("pred.l0.W").cols() == 6);
    CHECK(ps.value("pred.l1.W").cols() == 4);
    Rng rng(8);
    randomize_affine(ps, rng);
    const Tensor x = random_tensor(5, 4, rng);
    auto forward = [&] {
        ag::Tape tape;
        Binding bind(tape, ps, false);
        return mlp_forward(cfg, bind, "pred.", tape.constant(x), Mode::train).value();
    };
    Mat h = add_row(to_eigen(x) * to_eigen(ps.value("pred.l0.W")), ps.value("pred.l0.b"));
    h = prelu(batch_norm(h, ps.value("pred.l0.norm.gamma"), ps.value("pred.l0.norm.beta")),
              ps.value("pred.l0.prelu").item());
    h = add_row(h * to_eigen(ps.value("pred.l1.W")), ps.value("pred.l1.b"));
    CHECK((to_eigen(forward()) - h).cwiseAbs().maxCoeff() < 1e-10);

    ps.value("pred.l1.W").fill(0.0);
    ps.value("pred.l1.b").fill(0.0);
    const Tensor zeroed = forward();
    for (double v : zeroed.flat()) CHECK(v == 0.0);
}

TEST_CASE("batch norm running mean follows the geometric series") {
    EncoderConfig cfg{.layer_sizes = {3}, .activation = Activation::linear};
    auto ps = glorot_init(cfg, 2, 0);
    Rng rng(9);
    auto g = testing::random_graph(5, 0.5, rng);
    const Tensor x = random_tensor(5, 2, rng);
    Tensor pre;
    {
        EncoderConfig plain = cfg;
        plain.norm = NormType::none;
        auto ps2 = ps;
        pre = run(plain, ps2, g, x);
    }
    for (int k = 1; k <= 10; ++k) {
        run(cfg, ps, g, x);
        for (std::size_t c = 0; c < 3; ++c) {
            double mu = 0.0;
            for (std::size_t r = 0; r < 5; ++r) mu += pre(r, c) / 5.0;
            CHECK(ps.value("enc.l0.norm.running_mean")[c] ==
                  doctest::Approx(mu * (1.0 - std::pow(0.99, k))).epsilon(1e-10));
        }
    }
    auto before = ps.value("enc.l0.norm.running_mean");
    run(cfg, ps, g, x, Mode::eval);
    for (std::size_t c = 0; c < 3; ++c) CHECK(ps.value("enc.l0.norm.running_mean")[c] == before[c]);
}

TEST_CASE("encoders are permutation equivariant") {
    Rng rng(10);
    const std::size_t n = 9;
    auto g = testing::random_graph(n, 0.35, rng);
    std::vector<NodeId> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<NodeId>(i);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Edge> pe;
    for (const auto& [i, j] : g.undirected_edges()) pe.emplace_back(perm[i], perm[j]);
    auto pg = Graph::from_edges(n, pe);
    const Tensor x = random_tensor(n, 4, rng);
    Tensor px(n, 4);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 4; ++c) px(perm[i], c) = x(i, c);

    std::vector<EncoderConfig> cfgs{
        {.layer_sizes = {6, 3}},
        {.kind = EncoderKind::meanpool_skip, .layer_sizes = {5, 5, 3}, .norm = NormType::layer},
        {.kind = EncoderKind::gat, .layer_sizes = {3, 3}, .activation = Activation::elu, .gat_heads = {2, 1}},
    };
    for (const auto& cfg : cfgs) {
        auto ps = glorot_init(cfg, 4, 2);
        auto ps2 = ps;
        auto y = run(cfg, ps, g, x);
        auto py = run(cfg, ps2, pg, px);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < y.cols(); ++c) CHECK(std::abs(py(perm[i], c) - y(i, c)) < 1e-9);
    }
}

TEST_CASE("encoder gradients match finite differences") {
    Rng rng(11);
    auto g = testing::random_graph(7, 0.4, rng);
    const Tensor x = random_tensor(7, 3, rng);
    const Tensor probe = random_tensor(7, 2, rng);
    std::vector<EncoderConfig> cfgs;
    for (auto act : {Activation::prelu, Activation::elu, Activation::relu})
        for (auto norm : {NormType::none, NormType::batch, NormType::layer}) {
            cfgs.push_back({.layer_sizes = {4, 2}, .activation = act, .norm = norm});
            cfgs.push_back({.kind = EncoderKind::meanpool_skip, .layer_sizes = {3, 3, 2}, .activation = act, .norm = norm});
            cfgs.push_back({.kind = EncoderKind::gat, .layer_sizes = {2, 2}, .activation = act, .norm = norm, .gat_heads = {2, 2}});
        }
    cfgs.push_back({.layer_sizes = {4, 2}, .norm = NormType::layer, .weight_standardization = true});
    for (const auto& cfg : cfgs) {
        auto ps = glorot_init(cfg, 3, 5);
        randomize_affine(ps, rng);
        auto adj = normalize(g, cfg.graph_norm());
        auto errs = testing::check_gradients(ps, [&](ag::Tape& t, Binding& p) {
            auto h = encoder_forward(cfg, p, adj, t.constant(x), Mode::train);
            return ag::sum(ag::elu(ag::matmul(h, t.constant(transpose(probe)))));
        }, cfg.activation == Activation::relu ? 1e-6 : 1e-3);
        for (const auto& e : errs) {
            INFO("kind " << static_cast<int>(cfg.kind) << " act " << static_cast<int>(cfg.activation) << " norm "
                         << static_cast<int>(cfg.norm) << " " << e.name);
            CHECK(e.rel_error < 1e-3);
        }
    }
}

TEST_CASE("checkpoint round trip") {
    EncoderConfig cfg{.layer_sizes = {4, 2}};
    auto ps = glorot_init(cfg, 3, 0);
    auto path = std::filesystem::temp_directory_path() / "ssg_nn_ckpt.bin";
    save_checkpoint(path, ps);
    auto back = load_checkpoint(path);
    CHECK(back.names() == ps.names());
    for (const auto& [name, p] : ps) {
        const auto& q = back.at(name);
        REQUIRE(q.value.same_shape(p.value));
        for (std::size_t i = 0; i < p.value.size(); ++i)
            CHECK(q.value[i] == static_cast<double>(static_cast<float>(p.value[i])));
        CHECK(q.trainable == p.trainable);
    }
}

}
