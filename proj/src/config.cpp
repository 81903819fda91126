#include "ssg/config.hpp"

#include "ssg/error.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace ssg {

using nlohmann::json;

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<Method, 5> kMethods{{{Method::bgrl, "bgrl"},
                                         {Method::grace, "grace"},
                                         {Method::random_init, "random-init"},
                                         {Method::supervised, "supervised"},
                                         {Method::semisup, "semisup"}}};
constexpr NameTable<EncoderKind, 3> kKinds{
    {{EncoderKind::gcn, "gcn"}, {EncoderKind::meanpool_skip, "meanpool-skip"}, {EncoderKind::gat, "gat"}}};
constexpr NameTable<Activation, 4> kActivations{{{Activation::prelu, "prelu"},
                                                 {Activation::elu, "elu"},
                                                 {Activation::relu, "relu"},
                                                 {Activation::linear, "linear"}}};
constexpr NameTable<NormType, 3> kNorms{
    {{NormType::none, "none"}, {NormType::batch, "batch"}, {NormType::layer, "layer"}}};

template <typename E, std::size_t N>
std::string_view to_name(const NameTable<E, N>& t, E v) {
    for (const auto& [e, s] : t)
        if (e == v) return s;
    throw ConfigError("unnamed enum value");
}

template <typename E, std::size_t N>
E from_name(const NameTable<E, N>& t, std::string_view s, std::string_view what) {
    for (const auto& [e, n] : t)
        if (n == s) return e;
    std::string options;
    for (const auto& [e, n] : t) options += (options.empty() ? "" : "|") + std::string(n);
    throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "' (expected " + options + ")");
}

/// Object view that rejects unknown keys and type mismatches with ConfigError.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError("config '" + path_ + "' must be an object");
    }
    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + key(k) + "'");
    }

    bool has(const std::string& k) {
        seen_.insert(k);
        return j_.contains(k);
    }
    const json& at(const std::string& k) {
        seen_.insert(k);
        return j_.at(k);
    }
    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    template <typename T>
    void get(const std::string& k, T& out) {
        if (!has(k)) return;
        try {
            out = j_.at(k).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + key(k) + "' has the wrong type");
        }
    }
    template <typename E, std::size_t N>
    void get_enum(const std::string& k, E& out, const NameTable<E, N>& t) {
        std::string s;
        if (!has(k)) return;
        get(k, s);
        out = from_name(t, s, key(k));
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json sbm_to_json(const SbmParams& p) {
    return {{"blocks", p.blocks},       {"nodes_per_block", p.nodes_per_block}, {"p_in", p.p_in},
            {"p_out", p.p_out},         {"feature_dim", p.feature_dim},         {"signal", p.signal},
            {"seed", p.seed},           {"train_fraction", p.train_fraction},   {"val_fraction", p.val_fraction}};
}

SbmParams sbm_from_json(const json& j) {
    SbmParams p;
    Reader r(j, "data.sbm");
    r.get("blocks", p.blocks);
    r.get("nodes_per_block", p.nodes_per_block);
    r.get("p_in", p.p_in);
    r.get("p_out", p.p_out);
    r.get("feature_dim", p.feature_dim);
    r.get("signal", p.signal);
    r.get("seed", p.seed);
    r.get("train_fraction", p.train_fraction);
    r.get("val_fraction", p.val_fraction);
    return p;
}

json parse_scalar(std::string_view v) {
    try {
        return json::parse(v);
    } catch (const json::exception&) {
    }
    if (v.find(',') != std::string_view::npos) {
        json arr = json::array();
        std::size_t start = 0;
        while (start <= v.size()) {
            const auto end = std::min(v.find(',', start), v.size());
            const auto piece = v.substr(start, end - start);
            try {
                arr.push_back(json::parse(piece));
            } catch (const json::exception&) {
                arr.push_back(std::string(piece));
            }
            start = end + 1;
        }
        return arr;
    }
    return std::string(v);
}

}  // namespace

std::string_view method_name(Method m) { return to_name(kMethods, m); }
Method parse_method(std::string_view s) { return from_name(kMethods, s, "method"); }

json encoder_to_json(const EncoderConfig& e) {
    return {{"kind", to_name(kKinds, e.kind)},
            {"layer_sizes", e.layer_sizes},
            {"activation", to_name(kActivations, e.activation)},
            {"norm", to_name(kNorms, e.norm)},
            {"norm_decay", e.norm_decay},
            {"gat_heads", e.gat_heads},
            {"weight_standardization", e.weight_standardization}};
}

EncoderConfig encoder_from_json(const json& j) {
    EncoderConfig e;
    Reader r(j, "encoder");
    r.get_enum("kind", e.kind, kKinds);
    r.get("layer_sizes", e.layer_sizes);
    r.get_enum("activation", e.activation, kActivations);
    r.get_enum("norm", e.norm, kNorms);
    r.get("norm_decay", e.norm_decay);
    r.get("gat_heads", e.gat_heads);
    r.get("weight_standardization", e.weight_standardization);
    return e;
}

json to_json(const RunConfig& c) {
    json data = json::object();
    if (c.data_dir) data["dir"] = c.data_dir->string();
    if (c.sbm) data["sbm"] = sbm_to_json(*c.sbm);
    json grace_k = c.grace.k ? json(*c.grace.k) : json("all");
    return {{"data", data},
            {"method", method_name(c.method)},
            {"encoder", encoder_to_json(c.encoder)},
            {"augment", {{"p_f1", c.augment.p_f1}, {"p_f2", c.augment.p_f2}, {"p_e1", c.augment.p_e1}, {"p_e2", c.augment.p_e2}}},
            {"optim",
             {{"eta_base", c.optim.eta_base},
              {"n_total", c.optim.n_total},
              {"n_warmup", c.optim.n_warmup},
              {"tau_base", c.optim.tau_base},
              {"weight_decay", c.optim.weight_decay}}},
            {"predictor", {{"hidden", c.predictor_hidden}}},
            {"projector", {{"enabled", c.projector}, {"hidden", c.projector_hidden}}},
            {"grace",
             {{"k", grace_k},
              {"temperature", c.grace.temperature},
              {"projector_hidden", c.grace.projector_hidden},
              {"memory_cap", c.grace.memory_cap}}},
            {"batch", {{"labeled", c.batch.labeled_batch}, {"ratio", c.batch.unlabeled_ratio}, {"aux-weight", c.batch.aux_weight}}},
            {"fanout", c.fanout.caps},
            {"seed", c.seed},
            {"metrics_every", c.metrics_every},
            {"eval_every", c.eval_every},
            {"out", c.out.string()}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    Reader r(j, "");
    if (r.has("data")) {
        Reader d(r.at("data"), "data");
        if (d.has("dir")) {
            std::string dir;
            d.get("dir", dir);
            c.data_dir = dir;
        }
        if (d.has("sbm")) c.sbm = sbm_from_json(d.at("sbm"));
    }
    if (r.has("method")) {
        std::string m;
        r.get("method", m);
        c.method = parse_method(m);
    }
    if (r.has("encoder")) c.encoder = encoder_from_json(r.at("encoder"));
    if (r.has("augment")) {
        Reader a(r.at("augment"), "augment");
        a.get("p_f1", c.augment.p_f1);
        a.get("p_f2", c.augment.p_f2);
        a.get("p_e1", c.augment.p_e1);
        a.get("p_e2", c.augment.p_e2);
    }
    if (r.has("optim")) {
        Reader o(r.at("optim"), "optim");
        o.get("eta_base", c.optim.eta_base);
        o.get("n_total", c.optim.n_total);
        o.get("n_warmup", c.optim.n_warmup);
        o.get("tau_base", c.optim.tau_base);
        o.get("weight_decay", c.optim.weight_decay);
    }
    if (r.has("predictor")) {
        Reader p(r.at("predictor"), "predictor");
        p.get("hidden", c.predictor_hidden);
    }
    if (r.has("projector")) {
        Reader p(r.at("projector"), "projector");
        p.get("enabled", c.projector);
        p.get("hidden", c.projector_hidden);
    }
    if (r.has("grace")) {
        Reader g(r.at("grace"), "grace");
        if (g.has("k")) {
            const json& k = g.at("k");
            if (k.is_string() && k.get<std::string>() == "all") c.grace.k.reset();
            else if (k.is_number_unsigned()) c.grace.k = k.get<std::size_t>();
            else throw ConfigError("grace.k must be a positive integer or \"all\"");
        }
        g.get("temperature", c.grace.temperature);
        g.get("projector_hidden", c.grace.projector_hidden);
        g.get("memory_cap", c.grace.memory_cap);
    }
    if (r.has("batch")) {
        Reader b(r.at("batch"), "batch");
        b.get("labeled", c.batch.labeled_batch);
        b.get("ratio", c.batch.unlabeled_ratio);
        b.get("aux-weight", c.batch.aux_weight);
    }
    if (r.has("fanout")) {
        const json& f = r.at("fanout");
        if (f.is_number_unsigned()) c.fanout.caps = {f.get<std::size_t>()};
        else r.get("fanout", c.fanout.caps);
    }
    r.get("seed", c.seed);
    r.get("metrics_every", c.metrics_every);
    r.get("eval_every", c.eval_every);
    if (r.has("out")) {
        std::string out;
        r.get("out", out);
        c.out = out;
    }
    return c;
}

void RunConfig::validate() const {
    if (data_dir.has_value() == sbm.has_value())
        throw ConfigError("exactly one dataset source (data.dir or data.sbm) must be given");
    encoder.validate();
    augment.validate();
    optim.validate();
    if (metrics_every == 0) throw ConfigError("metrics_every must be positive");
    switch (method) {
        case Method::bgrl:
            bgrl_config().validate();
            break;
        case Method::grace:
            grace.validate();
            break;
        case Method::random_init:
            break;
        case Method::supervised:
        case Method::semisup:
            bgrl_config().validate();
            batch.validate();
            fanout.validate();
            if (fanout.caps.empty()) throw ConfigError("fanout needs at least one hop");
            break;
    }
}

Dataset RunConfig::load_data() const {
    if (data_dir) return load_dataset_dir(*data_dir);
    if (sbm) return generate_sbm(*sbm);
    throw ConfigError("no dataset source configured");
}

BgrlConfig RunConfig::bgrl_config() const {
    BgrlConfig b;
    b.encoder = encoder;
    b.predictor_hidden = predictor_hidden;
    b.projector = projector;
    b.projector_hidden = projector_hidden;
    b.augment = augment;
    b.schedule = optim;
    b.metrics_every = metrics_every;
    return b;
}

GraceTrainConfig RunConfig::grace_config() const {
    return GraceTrainConfig{encoder, grace, augment, optim, metrics_every};
}

SemisupConfig RunConfig::semisup_config() const { return SemisupConfig{bgrl_config(), batch, fanout}; }

void apply_override(json& doc, std::string_view dotted_key, std::string_view value) {
    if (dotted_key.empty()) throw ConfigError("empty override key");
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted_key.find('.', start);
        const std::string part(dotted_key.substr(start, dot == std::string_view::npos ? dotted_key.size() - start : dot - start));
        if (part.empty()) throw ConfigError("malformed override key '" + std::string(dotted_key) + "'");
        if (!node->is_object()) *node = json::object();
        node = &(*node)[part];
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    *node = parse_scalar(value);
}

namespace {

struct PresetRow {
    std::string_view name;
    double p_f1, p_f2, p_e1, p_e2;
    double eta_base;
    std::size_t embedding;
    std::vector<std::size_t> hidden;
    std::size_t predictor_hidden;
    NormType norm;
    bool weight_standardization;
    EncoderKind kind;
    std::uint64_t n_total, n_warmup;
};

const std::vector<PresetRow>& preset_rows() {
    static const std::vector<PresetRow> rows{
        {"wikics", 0.2, 0.1, 0.2, 0.3, 5e-4, 256, {512}, 512, NormType::batch, false, EncoderKind::gcn, 10'000, 1'000},
        {"am-computers", 0.2, 0.1, 0.5, 0.4, 5e-4, 128, {256}, 512, NormType::batch, false, EncoderKind::gcn, 10'000, 1'000},
        {"am-photos", 0.1, 0.2, 0.4, 0.1, 1e-4, 256, {512}, 512, NormType::batch, false, EncoderKind::gcn, 10'000, 1'000},
        {"co-cs", 0.3, 0.4, 0.3, 0.2, 1e-5, 256, {512}, 512, NormType::batch, false, EncoderKind::gcn, 10'000, 1'000},
        {"co-phy", 0.1, 0.4, 0.4, 0.1, 1e-5, 128, {256}, 512, NormType::batch, false, EncoderKind::gcn, 10'000, 1'000},
        {"arxiv", 0.0, 0.0, 0.6, 0.6, 1e-2, 256, {256, 256}, 256, NormType::layer, true, EncoderKind::gcn, 10'000, 1'000},
        {"ppi", 0.25, 0.0, 0.3, 0.25, 5e-3, 512, {512, 512}, 512, NormType::layer, false, EncoderKind::meanpool_skip,
         20'000, 2'000},
    };
    return rows;
}

}  // namespace

RunConfig preset(std::string_view name) {
    for (const auto& row : preset_rows()) {
        if (row.name != name) continue;
        RunConfig c;
        c.method = Method::bgrl;
        c.augment = {row.p_f1, row.p_f2, row.p_e1, row.p_e2};
        c.optim.eta_base = row.eta_base;
        c.optim.n_total = row.n_total;
        c.optim.n_warmup = row.n_warmup;
        c.encoder.kind = row.kind;
        c.encoder.layer_sizes = row.hidden;
        c.encoder.layer_sizes.push_back(row.embedding);
        c.encoder.activation = Activation::prelu;
        c.encoder.norm = row.norm;
        c.encoder.weight_standardization = row.weight_standardization;
        c.predictor_hidden = row.predictor_hidden;
        return c;
    }
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : "|") + n;
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected " + known + ")");
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& row : preset_rows()) names.emplace_back(row.name);
    return names;
}

}  // namespace ssg
