#pragma once

#include "ssg/autograd.hpp"
#include "ssg/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ssg {

struct Param {
    Tensor value;
    Tensor grad;
    /// Receives optimizer updates. Running statistics are carried but not trained.
    bool trainable = true;
    /// Subject to decoupled weight decay (false for norm affine terms and PReLU slopes).
    bool decay = true;
};

/// Ordered name → (value, gradient) map. Iteration order is lexicographic by name.
class ParamSet {
public:
    /// Inserts a parameter; trainable/decay flags follow from the name (see classify()).
    Param& add(const std::string& name, Tensor value);
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    Tensor& value(const std::string& name) { return at(name).value; }
    const Tensor& value(const std::string& name) const { return at(name).value; }

    std::size_t size() const { return entries_.size(); }
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }
    std::vector<std::string> names() const;

    /// Subset of entries whose names start with `prefix`.
    ParamSet subset(const std::string& prefix) const;
    void zero_grad();
    bool grads_all_zero() const;
    std::size_t num_scalars() const;

    std::uint64_t step = 0;

    /// Parameter-name conventions: "*.running_mean|running_var" are buffers;
    /// "*.gamma|beta|prelu" skip weight decay.
    static void classify(const std::string& name, Param& p);

private:
    std::map<std::string, Param> entries_;
};

bool values_equal(const ParamSet& a, const ParamSet& b);

/// Binds a ParamSet's values onto a tape, either as trainable variables or
/// as constants (stop-gradient). Vars are created lazily on first use.
class Binding {
public:
    Binding(ag::Tape& tape, ParamSet& params, bool trainable) : tape_(tape), params_(params), trainable_(trainable) {}

    ag::Var operator()(const std::string& name);
    ParamSet& params() { return params_; }
    bool trainable() const { return trainable_; }
    ag::Tape& tape() { return tape_; }

    /// Adds tape gradients of bound trainable entries into their ParamSet grad buffers.
    void accumulate_grads();

private:
    ag::Tape& tape_;
    ParamSet& params_;
    bool trainable_;
    std::map<std::string, ag::Var> bound_;
};

// Checkpoint: "SSGCKPT1", u64 count, then per entry u64 name length, UTF-8 name,
// u64 rank, u64 dims[rank], f32 data. Little-endian throughout.
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace ssg
