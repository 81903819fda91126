#include "ssg/params.hpp"

#include "ssg/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ssg {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void ParamSet::classify(const std::string& name, Param& p) {
    const bool buffer = ends_with(name, ".running_mean") || ends_with(name, ".running_var");
    p.trainable = !buffer;
    p.decay = !buffer && !ends_with(name, ".gamma") && !ends_with(name, ".beta") && !ends_with(name, ".prelu");
}

Param& ParamSet::add(const std::string& name, Tensor value) {
    if (entries_.count(name)) throw StructuralError("duplicate parameter '" + name + "'");
    Param p;
    p.grad = Tensor(value.rows(), value.cols());
    p.value = std::move(value);
    classify(name, p);
    return entries_.emplace(name, std::move(p)).first->second;
}

Param& ParamSet::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw StructuralError("unknown parameter '" + name + "'");
    return it->second;
}

const Param& ParamSet::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw StructuralError("unknown parameter '" + name + "'");
    return it->second;
}

std::vector<std::string> ParamSet::names() const {
    std::vector<std::string> out;
    for (const auto& [n, _] : entries_) out.push_back(n);
    return out;
}

ParamSet ParamSet::subset(const std::string& prefix) const {
    ParamSet out;
    for (const auto& [n, p] : entries_)
        if (n.rfind(prefix, 0) == 0) out.entries_.emplace(n, p);
    return out;
}

void ParamSet::zero_grad() {
    for (auto& [_, p] : entries_) p.grad.fill(0.0);
}

bool ParamSet::grads_all_zero() const {
    for (const auto& [_, p] : entries_)
        for (double g : p.grad.flat())
            if (g != 0.0) return false;
    return true;
}

std::size_t ParamSet::num_scalars() const {
    std::size_t n = 0;
    for (const auto& [_, p] : entries_) n += p.value.size();
    return n;
}

bool values_equal(const ParamSet& a, const ParamSet& b) {
    if (a.size() != b.size()) return false;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
        if (ia->first != ib->first || !ia->second.value.same_shape(ib->second.value)) return false;
        if (std::memcmp(ia->second.value.data(), ib->second.value.data(), ia->second.value.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

ag::Var Binding::operator()(const std::string& name) {
    if (auto it = bound_.find(name); it != bound_.end()) return it->second;
    const Param& p = params_.at(name);
    ag::Var v = (trainable_ && p.trainable) ? tape_.variable(p.value) : tape_.constant(p.value);
    bound_.emplace(name, v);
    return v;
}

void Binding::accumulate_grads() {
    if (!trainable_) return;
    for (const auto& [name, var] : bound_) {
        const Tensor& g = tape_.grad(var);
        if (!g.empty()) params_.at(name).grad += g;
    }
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

constexpr char kMagic[8] = {'S', 'S', 'G', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
    static_assert(std::endian::native == std::endian::little);
    os.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw ParseError("truncated checkpoint", 0);
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(kMagic, 8);
    put_u64(out, params.size());
    for (const auto& [name, p] : params) {
        put_u64(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u64(out, 2);
        put_u64(out, p.value.rows());
        put_u64(out, p.value.cols());
        for (double v : p.value.flat()) {
            const float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    if (!out) throw Error("write failed for " + path.string());
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw ParseError("bad checkpoint magic in " + path.string(), 0);
    ParamSet ps;
    const auto count = get_u64(in);
    for (std::uint64_t e = 0; e < count; ++e) {
        const auto len = get_u64(in);
        if (len > 4096) throw ParseError("implausible parameter name length", 0);
        std::string name(len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(len));
        const auto rank = get_u64(in);
        if (rank > 2) throw ParseError("parameter '" + name + "' has rank > 2", 0);
        std::uint64_t rows = 1, cols = 1;
        if (rank == 1) cols = get_u64(in);
        if (rank == 2) {
            rows = get_u64(in);
            cols = get_u64(in);
        }
        Tensor t(rows, cols);
        for (std::size_t i = 0; i < t.size(); ++i) {
            float f = 0.0f;
            in.read(reinterpret_cast<char*>(&f), 4);
            t[i] = f;
        }
        if (!in) throw ParseError("truncated checkpoint data for '" + name + "'", 0);
        ps.add(name, std::move(t));
    }
    return ps;
}

}  // namespace ssg
