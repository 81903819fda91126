#include "ssg/autograd.hpp"

#include "ssg/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ssg::ag {

const Tensor& Var::value() const {
    if (tape == nullptr) throw EngineError("use of an unbound Var");
    return tape->value(id);
}

bool Var::requires_grad() const { return tape != nullptr && tape->requires_grad(id); }

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor{}, false, nullptr});
    return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor{}, true, nullptr});
    return Var{this, nodes_.size() - 1};
}

void Tape::check_owned(Var v) const {
    if (v.tape != this || v.id >= nodes_.size()) throw EngineError("Var was not recorded on this tape");
}

const Tensor& Tape::grad(Var v) const {
    check_owned(v);
    return nodes_[v.id].grad;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (const Var& in : inputs) {
        check_owned(in);
        needs = needs || nodes_[in.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), Tensor{}, needs, needs ? std::move(fn) : nullptr});
    return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(Var loss) {
    check_owned(loss);
    if (nodes_[loss.id].value.size() != 1) throw EngineError("backward() needs a scalar loss");
    for (auto& n : nodes_) n.grad = Tensor{};
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss.id)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.empty()) continue;
        if (n.backward) n.backward(*this, n.grad);
    }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

Tape& tape_of(Var v) {
    if (v.tape == nullptr) throw EngineError("use of an unbound Var");
    return *v.tape;
}

template <typename F>
Var unary_elementwise(Var x, F&& forward, Tape::BackwardFn fn) {
    const Tensor& xv = x.value();
    Tensor out(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = forward(xv[i]);
    return tape_of(x).record(std::move(out), {x}, std::move(fn));
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense algebra

Var matmul(Var a, Var b) {
    Tensor out = ssg::matmul(a.value(), b.value());
    const auto ia = a.id, ib = b.id;
    return tape_of(a).record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) t.grad_buffer(ia) += matmul_nt(g, t.value(ib));
        if (t.requires_grad(ib)) t.grad_buffer(ib) += matmul_tn(t.value(ia), g);
    });
}

Var add(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    out += b.value();
    const auto ia = a.id, ib = b.id;
    return tape_of(a).record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) t.grad_buffer(ia) += g;
        if (t.requires_grad(ib)) t.grad_buffer(ib) += g;
    });
}

Var add_bias(Var x, Var bias) {
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != xv.cols()) throw ShapeError("add_bias: bias must be 1x" + std::to_string(xv.cols()));
    Tensor out = xv;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv[j];
    const auto ix = x.id, ib = bias.id;
    return tape_of(x).record(std::move(out), {x, bias}, [ix, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ix)) t.grad_buffer(ix) += g;
        if (t.requires_grad(ib)) {
            Tensor& gb = t.grad_buffer(ib);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
        }
    });
}

Var scale(Var x, double c) {
    return unary_elementwise(
        x, [c](double v) { return c * v; },
        [ix = x.id, c](Tape& t, const Tensor& g) {
            Tensor& gx = t.grad_buffer(ix);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
        });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols of nothing");
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    for (const Var& p : parts) {
        if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
        cols += p.cols();
    }
    Tensor out(rows, cols);
    std::vector<std::size_t> ids, widths;
    std::size_t off = 0;
    for (const Var& p : parts) {
        const Tensor& v = p.value();
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < v.cols(); ++j) out(i, off + j) = v(i, j);
        off += v.cols();
        ids.push_back(p.id);
        widths.push_back(v.cols());
    }
    return tape_of(parts.front()).record(std::move(out), parts, [ids, widths](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
            if (t.requires_grad(ids[p])) {
                Tensor& gp = t.grad_buffer(ids[p]);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < widths[p]; ++j) gp(i, j) += g(i, off + j);
            }
            off += widths[p];
        }
    });
}

Var mean_of(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("mean_of nothing");
    Tensor out(parts.front().rows(), parts.front().cols());
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        require_same_shape(out, p.value(), "mean_of");
        out += p.value();
        ids.push_back(p.id);
    }
    const double inv = 1.0 / static_cast<double>(parts.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= inv;
    return tape_of(parts.front()).record(std::move(out), parts, [ids, inv](Tape& t, const Tensor& g) {
        for (auto id : ids) {
            if (!t.requires_grad(id)) continue;
            Tensor& gp = t.grad_buffer(id);
            for (std::size_t i = 0; i < g.size(); ++i) gp[i] += inv * g[i];
        }
    });
}

Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().flat()) s += v;
    return tape_of(x).record(Tensor::scalar(s), {x}, [ix = x.id](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
    });
}

Var gather_rows(Var x, std::span<const NodeId> rows) {
    const Tensor& xv = x.value();
    Tensor out(rows.size(), xv.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] >= xv.rows()) throw IndexError("gather_rows: row out of range");
        std::copy(xv.row(rows[k]).begin(), xv.row(rows[k]).end(), out.row(k).begin());
    }
    std::vector<NodeId> idx(rows.begin(), rows.end());
    return tape_of(x).record(std::move(out), {x}, [ix = x.id, idx = std::move(idx)](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(ix);
        for (std::size_t k = 0; k < idx.size(); ++k)
            for (std::size_t j = 0; j < g.cols(); ++j) gx(idx[k], j) += g(k, j);
    });
}

// ---------------------------------------------------------------------------
// Activations

Var relu(Var x) {
    return unary_elementwise(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [ix = x.id](Tape& t, const Tensor& g) {
            const Tensor& xv = t.value(ix);
            Tensor& gx = t.grad_buffer(ix);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (xv[i] > 0.0) gx[i] += g[i];
        });
}

Var elu(Var x) {
    return unary_elementwise(
        x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
        [ix = x.id](Tape& t, const Tensor& g) {
            const Tensor& xv = t.value(ix);
            Tensor& gx = t.grad_buffer(ix);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (xv[i] > 0.0 ? 1.0 : std::exp(xv[i]));
        });
}

Var leaky_relu(Var x, double slope) {
    return unary_elementwise(
        x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [ix = x.id, slope](Tape& t, const Tensor& g) {
            const Tensor& xv = t.value(ix);
            Tensor& gx = t.grad_buffer(ix);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (xv[i] > 0.0 ? 1.0 : slope);
        });
}

Var prelu(Var x, Var slope) {
    const double a = slope.value().item();
    const Tensor& xv = x.value();
    Tensor out(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : a * xv[i];
    const auto ix = x.id, ia = slope.id;
    return tape_of(x).record(std::move(out), {x, slope}, [ix, ia](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(ix);
        const double a = t.value(ia)[0];
        if (t.requires_grad(ix)) {
            Tensor& gx = t.grad_buffer(ix);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (xv[i] > 0.0 ? 1.0 : a);
        }
        if (t.requires_grad(ia)) {
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (xv[i] <= 0.0) s += g[i] * xv[i];
            t.grad_buffer(ia)[0] += s;
        }
    });
}

// ---------------------------------------------------------------------------
// Sparse propagation

namespace {

void check_rows(const NormalizedGraph& adj, const Tensor& x, const char* op) {
    if (x.rows() != adj.num_nodes())
        throw ShapeError(std::string(op) + ": input has " + std::to_string(x.rows()) + " rows, graph has " +
                         std::to_string(adj.num_nodes()) + " nodes");
}

void check_arcs(const NormalizedGraph& adj, const Tensor& w, const char* op) {
    if (w.rows() != adj.num_arcs() || w.cols() != 1)
        throw ShapeError(std::string(op) + ": arc tensor must be " + std::to_string(adj.num_arcs()) + "x1");
}

}  // namespace

Var spmm(const NormalizedGraph& adj, Var x) {
    const Tensor& xv = x.value();
    check_rows(adj, xv, "spmm");
    const std::size_t d = xv.cols();
    Tensor out(xv.rows(), d);
    for (std::size_t i = 0; i < adj.num_nodes(); ++i) {
        auto o = out.row(i);
        for (std::size_t k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k) {
            const double w = adj.weights[k];
            auto src = xv.row(adj.col_indices[k]);
            for (std::size_t j = 0; j < d; ++j) o[j] += w * src[j];
        }
    }
    return tape_of(x).record(std::move(out), {x}, [ix = x.id, adj = &adj](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(ix);
        const std::size_t d = g.cols();
        for (std::size_t i = 0; i < adj->num_nodes(); ++i) {
            auto gi = g.row(i);
            for (std::size_t k = adj->row_offsets[i]; k < adj->row_offsets[i + 1]; ++k) {
                const double w = adj->weights[k];
                auto dst = gx.row(adj->col_indices[k]);
                for (std::size_t j = 0; j < d; ++j) dst[j] += w * gi[j];
            }
        }
    });
}

Var spmm_arcs(const NormalizedGraph& adj, Var w, Var x) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    check_rows(adj, xv, "spmm_arcs");
    check_arcs(adj, wv, "spmm_arcs");
    const std::size_t d = xv.cols();
    Tensor out(xv.rows(), d);
    for (std::size_t i = 0; i < adj.num_nodes(); ++i) {
        auto o = out.row(i);
        for (std::size_t k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k) {
            auto src = xv.row(adj.col_indices[k]);
            for (std::size_t j = 0; j < d; ++j) o[j] += wv[k] * src[j];
        }
    }
    const auto iw = w.id, ix = x.id;
    return tape_of(x).record(std::move(out), {w, x}, [iw, ix, adj = &adj](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(ix);
        const Tensor& wv = t.value(iw);
        const bool need_w = t.requires_grad(iw), need_x = t.requires_grad(ix);
        Tensor* gw = need_w ? &t.grad_buffer(iw) : nullptr;
        Tensor* gx = need_x ? &t.grad_buffer(ix) : nullptr;
        const std::size_t d = g.cols();
        for (std::size_t i = 0; i < adj->num_nodes(); ++i) {
            auto gi = g.row(i);
            for (std::size_t k = adj->row_offsets[i]; k < adj->row_offsets[i + 1]; ++k) {
                const NodeId src = adj->col_indices[k];
                if (gw) {
                    double s = 0.0;
                    auto xs = xv.row(src);
                    for (std::size_t j = 0; j < d; ++j) s += gi[j] * xs[j];
                    (*gw)[k] += s;
                }
                if (gx) {
                    auto dst = gx->row(src);
                    for (std::size_t j = 0; j < d; ++j) dst[j] += wv[k] * gi[j];
                }
            }
        }
    });
}

Var arc_scores(const NormalizedGraph& adj, Var s_dst, Var s_src) {
    const Tensor& dv = s_dst.value();
    const Tensor& sv = s_src.value();
    check_rows(adj, dv, "arc_scores");
    check_rows(adj, sv, "arc_scores");
    if (dv.cols() != 1 || sv.cols() != 1) throw ShapeError("arc_scores: scores must be single columns");
    Tensor out(adj.num_arcs(), 1);
    for (std::size_t i = 0; i < adj.num_nodes(); ++i)
        for (std::size_t k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k)
            out[k] = dv[i] + sv[adj.col_indices[k]];
    const auto id = s_dst.id, is = s_src.id;
    return tape_of(s_dst).record(std::move(out), {s_dst, s_src}, [id, is, adj = &adj](Tape& t, const Tensor& g) {
        Tensor* gd = t.requires_grad(id) ? &t.grad_buffer(id) : nullptr;
        Tensor* gs = t.requires_grad(is) ? &t.grad_buffer(is) : nullptr;
        for (std::size_t i = 0; i < adj->num_nodes(); ++i)
            for (std::size_t k = adj->row_offsets[i]; k < adj->row_offsets[i + 1]; ++k) {
                if (gd) (*gd)[i] += g[k];
                if (gs) (*gs)[adj->col_indices[k]] += g[k];
            }
    });
}

Var edge_softmax(const NormalizedGraph& adj, Var e) {
    const Tensor& ev = e.value();
    check_arcs(adj, ev, "edge_softmax");
    Tensor out(adj.num_arcs(), 1);
    for (std::size_t i = 0; i < adj.num_nodes(); ++i) {
        const std::size_t b = adj.row_offsets[i], end = adj.row_offsets[i + 1];
        if (b == end) continue;
        double mx = ev[b];
        for (std::size_t k = b; k < end; ++k) mx = std::max(mx, ev[k]);
        double z = 0.0;
        for (std::size_t k = b; k < end; ++k) z += (out[k] = std::exp(ev[k] - mx));
        for (std::size_t k = b; k < end; ++k) out[k] /= z;
    }
    auto& tape = tape_of(e);
    const std::size_t out_id = tape.size();
    return tape.record(std::move(out), {e}, [ie = e.id, out_id, adj = &adj](Tape& t, const Tensor& g) {
        const Tensor& a = t.value(out_id);
        Tensor& ge = t.grad_buffer(ie);
        for (std::size_t i = 0; i < adj->num_nodes(); ++i) {
            const std::size_t b = adj->row_offsets[i], end = adj->row_offsets[i + 1];
            double dot = 0.0;
            for (std::size_t k = b; k < end; ++k) dot += a[k] * g[k];
            for (std::size_t k = b; k < end; ++k) ge[k] += a[k] * (g[k] - dot);
        }
    });
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

/// Backward of y = x̂·γ + β where x̂ is standardized along `axis` groups.
/// For batch norm, groups are columns; for layer norm, rows.
struct StandardizeCache {
    Tensor xhat;
    std::vector<double> inv_std;
};

StandardizeCache standardize(const Tensor& x, bool over_rows, double eps, std::vector<double>* means = nullptr,
                             std::vector<double>* vars = nullptr) {
    const std::size_t groups = over_rows ? x.cols() : x.rows();
    const std::size_t len = over_rows ? x.rows() : x.cols();
    StandardizeCache c{Tensor(x.rows(), x.cols()), std::vector<double>(groups)};
    if (means) means->assign(groups, 0.0);
    if (vars) vars->assign(groups, 0.0);
    auto at = [&](const Tensor& t, std::size_t g, std::size_t k) { return over_rows ? t(k, g) : t(g, k); };
    for (std::size_t g = 0; g < groups; ++g) {
        double mu = 0.0;
        for (std::size_t k = 0; k < len; ++k) mu += at(x, g, k);
        mu /= static_cast<double>(len);
        double var = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const double d = at(x, g, k) - mu;
            var += d * d;
        }
        var /= static_cast<double>(len);
        const double inv = 1.0 / std::sqrt(var + eps);
        c.inv_std[g] = inv;
        for (std::size_t k = 0; k < len; ++k) {
            double& dst = over_rows ? c.xhat(k, g) : c.xhat(g, k);
            dst = (at(x, g, k) - mu) * inv;
        }
        if (means) (*means)[g] = mu;
        if (vars) (*vars)[g] = var;
    }
    return c;
}

/// dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)) within each group.
void standardize_backward(const Tensor& dxhat, const StandardizeCache& c, bool over_rows, Tensor& gx) {
    const std::size_t groups = over_rows ? dxhat.cols() : dxhat.rows();
    const std::size_t len = over_rows ? dxhat.rows() : dxhat.cols();
    auto at = [&](const Tensor& t, std::size_t g, std::size_t k) { return over_rows ? t(k, g) : t(g, k); };
    for (std::size_t g = 0; g < groups; ++g) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            m1 += at(dxhat, g, k);
            m2 += at(dxhat, g, k) * at(c.xhat, g, k);
        }
        m1 /= static_cast<double>(len);
        m2 /= static_cast<double>(len);
        for (std::size_t k = 0; k < len; ++k) {
            double& dst = over_rows ? gx(k, g) : gx(g, k);
            dst += c.inv_std[g] * (at(dxhat, g, k) - m1 - at(c.xhat, g, k) * m2);
        }
    }
}

Var affine_standardized(Var x, Var gamma, Var beta, double eps, bool over_rows, BatchStats* stats) {
    const Tensor& xv = x.value();
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    const std::size_t width = over_rows ? xv.cols() : xv.cols();
    if (gv.rows() != 1 || gv.cols() != width || !gv.same_shape(bv)) throw ShapeError("norm: gamma/beta must be 1xcols");
    std::vector<double> means, vars;
    auto cache = std::make_shared<StandardizeCache>(standardize(xv, over_rows, eps, &means, &vars));
    if (stats) {
        stats->mean = Tensor(1, means.size());
        stats->var = Tensor(1, vars.size());
        std::copy(means.begin(), means.end(), stats->mean.data());
        std::copy(vars.begin(), vars.end(), stats->var.data());
    }
    Tensor out(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < xv.rows(); ++i)
        for (std::size_t j = 0; j < xv.cols(); ++j) out(i, j) = cache->xhat(i, j) * gv[j] + bv[j];
    const auto ix = x.id, ig = gamma.id, ib = beta.id;
    return tape_of(x).record(std::move(out), {x, gamma, beta}, [ix, ig, ib, cache, over_rows](Tape& t, const Tensor& g) {
        const Tensor& gv = t.value(ig);
        if (t.requires_grad(ig) || t.requires_grad(ib)) {
            Tensor dg(1, g.cols()), db(1, g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) {
                    dg[j] += g(i, j) * cache->xhat(i, j);
                    db[j] += g(i, j);
                }
            if (t.requires_grad(ig)) t.grad_buffer(ig) += dg;
            if (t.requires_grad(ib)) t.grad_buffer(ib) += db;
        }
        if (t.requires_grad(ix)) {
            Tensor dxhat(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) dxhat(i, j) = g(i, j) * gv[j];
            standardize_backward(dxhat, *cache, over_rows, t.grad_buffer(ix));
        }
    });
}

}  // namespace

Var batch_norm(Var x, Var gamma, Var beta, double eps, BatchStats* stats) {
    return affine_standardized(x, gamma, beta, eps, true, stats);
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    return affine_standardized(x, gamma, beta, eps, false, nullptr);
}

Var normalize_fixed(Var x, const Tensor& mean, const Tensor& var, Var gamma, Var beta, double eps) {
    const Tensor& xv = x.value();
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    const std::size_t c = xv.cols();
    if (mean.size() != c || var.size() != c || gv.size() != c || bv.size() != c)
        throw ShapeError("normalize_fixed: statistics width mismatch");
    std::vector<double> inv(c);
    for (std::size_t j = 0; j < c; ++j) inv[j] = 1.0 / std::sqrt(var[j] + eps);
    Tensor out(xv.rows(), c);
    for (std::size_t i = 0; i < xv.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) out(i, j) = (xv(i, j) - mean[j]) * inv[j] * gv[j] + bv[j];
    std::vector<double> mu(mean.flat().begin(), mean.flat().end());
    const auto ix = x.id, ig = gamma.id, ib = beta.id;
    return tape_of(x).record(std::move(out), {x, gamma, beta},
                             [ix, ig, ib, inv = std::move(inv), mu = std::move(mu)](Tape& t, const Tensor& g) {
                                 const Tensor& xv = t.value(ix);
                                 const Tensor& gv = t.value(ig);
                                 const std::size_t c = g.cols();
                                 for (std::size_t i = 0; i < g.rows(); ++i)
                                     for (std::size_t j = 0; j < c; ++j) {
                                         if (t.requires_grad(ix)) t.grad_buffer(ix)(i, j) += g(i, j) * inv[j] * gv[j];
                                         if (t.requires_grad(ig))
                                             t.grad_buffer(ig)[j] += g(i, j) * (xv(i, j) - mu[j]) * inv[j];
                                         if (t.requires_grad(ib)) t.grad_buffer(ib)[j] += g(i, j);
                                     }
                             });
}

Var weight_standardize(Var w, double eps) {
    auto cache = std::make_shared<StandardizeCache>(standardize(w.value(), true, eps));
    Tensor out = cache->xhat;
    return tape_of(w).record(std::move(out), {w}, [iw = w.id, cache](Tape& t, const Tensor& g) {
        standardize_backward(g, *cache, true, t.grad_buffer(iw));
    });
}

Var row_normalize(Var x, double eps) {
    const Tensor& xv = x.value();
    Tensor out(xv.rows(), xv.cols());
    std::vector<double> norms(xv.rows());
    for (std::size_t i = 0; i < xv.rows(); ++i) {
        double s = 0.0;
        for (double v : xv.row(i)) s += v * v;
        norms[i] = std::sqrt(s);
        const double d = std::max(norms[i], eps);
        for (std::size_t j = 0; j < xv.cols(); ++j) out(i, j) = xv(i, j) / d;
    }
    auto& tape = tape_of(x);
    const std::size_t out_id = tape.size();
    return tape.record(std::move(out), {x}, [ix = x.id, out_id, norms = std::move(norms), eps](Tape& t, const Tensor& g) {
        const Tensor& y = t.value(out_id);
        Tensor& gx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            if (norms[i] > eps) {
                double dot = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) dot += y(i, j) * g(i, j);
                for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) += (g(i, j) - y(i, j) * dot) / norms[i];
            } else {
                for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) += g(i, j) / eps;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Losses

Var bgrl_cosine_loss(Var z, Var h, double eps) {
    const Tensor& zv = z.value();
    const Tensor& hv = h.value();
    require_same_shape(zv, hv, "bgrl_cosine_loss");
    const std::size_t n = zv.rows();
    if (n == 0) throw ShapeError("bgrl_cosine_loss on zero rows");
    std::vector<double> zn(n), hn(n), cosv(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double zz = 0.0, hh = 0.0, zh = 0.0;
        for (std::size_t j = 0; j < zv.cols(); ++j) {
            zz += zv(i, j) * zv(i, j);
            hh += hv(i, j) * hv(i, j);
            zh += zv(i, j) * hv(i, j);
        }
        zn[i] = std::sqrt(zz);
        hn[i] = std::sqrt(hh);
        cosv[i] = zh / (std::max(zn[i], eps) * std::max(hn[i], eps));
        total += cosv[i];
    }
    const double value = -2.0 * total / static_cast<double>(n);
    // Only z is listed as an input: h is a stop-gradient target by construction.
    return tape_of(z).record(
        Tensor::scalar(value), {z},
        [iz = z.id, ih = h.id, zn = std::move(zn), hn = std::move(hn), cosv = std::move(cosv), eps](Tape& t,
                                                                                                     const Tensor& g) {
            const Tensor& zv = t.value(iz);
            const Tensor& hv = t.value(ih);
            Tensor& gz = t.grad_buffer(iz);
            const std::size_t n = zv.rows();
            const double coef = -2.0 * g[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double nz = std::max(zn[i], eps), nh = std::max(hn[i], eps);
                const double radial = zn[i] > eps ? cosv[i] / (nz * zn[i]) : 0.0;
                for (std::size_t j = 0; j < zv.cols(); ++j)
                    gz(i, j) += coef * (hv(i, j) / (nz * nh) - radial * zv(i, j));
            }
        });
}

Var info_nce(Var anchors, Var others, std::span<const NodeId> negatives, std::size_t k, double temperature) {
    const Tensor& a = anchors.value();
    const Tensor& b = others.value();
    require_same_shape(a, b, "info_nce");
    const std::size_t n = a.rows(), d = a.cols();
    if (negatives.size() != n * k) throw ShapeError("info_nce: negative table must be N*k");
    if (!(temperature > 0.0)) throw ConfigError("info_nce: temperature must be > 0");
    const double inv_t = 1.0 / temperature;
    auto dot = [d](std::span<const double> x, std::span<const double> y) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += x[j] * y[j];
        return s;
    };
    // Softmax over [positive, k inter-view, k intra-view] per anchor, kept for backward.
    auto probs = std::make_shared<Tensor>(n, 1 + 2 * k);
    double total = 0.0;
    std::vector<double> logits(1 + 2 * k);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ai = a.row(i);
        logits[0] = dot(ai, b.row(i)) * inv_t;
        for (std::size_t q = 0; q < k; ++q) {
            const NodeId j = negatives[i * k + q];
            logits[1 + q] = dot(ai, b.row(j)) * inv_t;
            logits[1 + k + q] = dot(ai, a.row(j)) * inv_t;
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - mx);
        total += (mx + std::log(z)) - logits[0];
        auto p = probs->row(i);
        for (std::size_t c = 0; c < logits.size(); ++c) p[c] = std::exp(logits[c] - mx) / z;
    }
    const auto ia = anchors.id, ib = others.id;
    return tape_of(anchors).record(
        Tensor::scalar(total / static_cast<double>(n)), {anchors, others},
        [ia, ib, probs, negatives, k, inv_t](Tape& t, const Tensor& g) {
            const Tensor& a = t.value(ia);
            const Tensor& b = t.value(ib);
            const std::size_t n = a.rows(), d = a.cols();
            const double s = g[0] * inv_t / static_cast<double>(n);
            Tensor ga(n, d), gb(n, d);
            for (std::size_t i = 0; i < n; ++i) {
                const auto p = probs->row(i);
                auto gai = ga.row(i);
                const auto ai = a.row(i);
                const double c0 = s * (p[0] - 1.0);
                for (std::size_t j = 0; j < d; ++j) {
                    gai[j] += c0 * b(i, j);
                    gb(i, j) += c0 * ai[j];
                }
                for (std::size_t q = 0; q < k; ++q) {
                    const NodeId m = negatives[i * k + q];
                    const double ci = s * p[1 + q], cj = s * p[1 + k + q];
                    auto gbm = gb.row(m);
                    auto gam = ga.row(m);
                    for (std::size_t j = 0; j < d; ++j) {
                        gai[j] += ci * b(m, j) + cj * a(m, j);
                        gbm[j] += ci * ai[j];
                        gam[j] += cj * ai[j];
                    }
                }
            }
            if (t.requires_grad(ia)) t.grad_buffer(ia) += ga;
            if (t.requires_grad(ib)) t.grad_buffer(ib) += gb;
        });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
    const Tensor& x = logits.value();
    if (labels.size() != x.rows()) throw ShapeError("softmax_cross_entropy: label count mismatch");
    if (x.rows() == 0) throw ShapeError("softmax_cross_entropy on zero rows");
    auto probs = std::make_shared<Tensor>(x.rows(), x.cols());
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= x.cols()) throw IndexError("label outside logit range");
        const auto r = x.row(i);
        const double mx = *std::max_element(r.begin(), r.end());
        double z = 0.0;
        for (double v : r) z += std::exp(v - mx);
        total += mx + std::log(z) - r[static_cast<std::size_t>(y)];
        for (std::size_t c = 0; c < x.cols(); ++c) (*probs)(i, c) = std::exp(r[c] - mx) / z;
    }
    std::vector<int> ys(labels.begin(), labels.end());
    return tape_of(logits).record(Tensor::scalar(total / static_cast<double>(x.rows())), {logits},
                                  [ix = logits.id, probs, ys = std::move(ys)](Tape& t, const Tensor& g) {
                                      Tensor& gx = t.grad_buffer(ix);
                                      const double s = g[0] / static_cast<double>(ys.size());
                                      for (std::size_t i = 0; i < ys.size(); ++i)
                                          for (std::size_t c = 0; c < gx.cols(); ++c)
                                              gx(i, c) += s * ((*probs)(i, c) - (static_cast<int>(c) == ys[i] ? 1.0 : 0.0));
                                  });
}

}  // namespace ssg::ag
