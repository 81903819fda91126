#pragma once

#include "ssg/params.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace ssg {

struct ScheduleConfig {
    double eta_base = 5e-4;
    std::uint64_t n_total = 10'000;
    std::uint64_t n_warmup = 1'000;
    double tau_base = 0.99;
    double weight_decay = 1e-5;

    void validate() const;
    bool operator==(const ScheduleConfig&) const = default;
};

/// Linear warmup to eta_base, then cosine decay to 0 at n_total. Steps past n_total give 0.
double learning_rate_at(std::uint64_t step, const ScheduleConfig& cfg);

/// 1 - (1 - tau_base)/2 · (cos(πi/n_total) + 1); rises from tau_base to 1.
double tau_at(std::uint64_t step, const ScheduleConfig& cfg);

class AdamW {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    /// Decoupled decay (p -= lr·wd·p) then a bias-corrected Adam update on every trainable
    /// parameter; gradients are zeroed afterwards. Throws NumericError, leaving parameters
    /// and moments untouched, if any gradient is non-finite.
    void step(ParamSet& params, double lr, double weight_decay);

    std::uint64_t steps() const { return t_; }
    const Tensor& first_moment(const std::string& name) const { return m_.at(name); }
    const Tensor& second_moment(const std::string& name) const { return v_.at(name); }

private:
    std::uint64_t t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

}  // namespace ssg
