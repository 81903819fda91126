#include "ssg/optim.hpp"

#include "ssg/error.hpp"

#include <cmath>
#include <numbers>

namespace ssg {

void ScheduleConfig::validate() const {
    if (!(eta_base > 0.0)) throw ConfigError("eta_base must be > 0");
    if (n_warmup > n_total) throw ConfigError("n_warmup must not exceed n_total");
    if (!(tau_base >= 0.0 && tau_base <= 1.0)) throw ConfigError("tau_base must lie in [0, 1]");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
}

double learning_rate_at(std::uint64_t step, const ScheduleConfig& cfg) {
    if (step > cfg.n_total) return 0.0;
    const double i = static_cast<double>(step);
    const double w = static_cast<double>(cfg.n_warmup);
    const double total = static_cast<double>(cfg.n_total);
    if (step <= cfg.n_warmup) {
        if (cfg.n_warmup == 0) return cfg.eta_base;
        return i * cfg.eta_base / w;
    }
    return cfg.eta_base * (1.0 + std::cos((i - w) * std::numbers::pi / (total - w))) * 0.5;
}

double tau_at(std::uint64_t step, const ScheduleConfig& cfg) {
    if (cfg.n_total == 0 || step >= cfg.n_total) return 1.0;
    const double ratio = static_cast<double>(step) / static_cast<double>(cfg.n_total);
    return 1.0 - (1.0 - cfg.tau_base) / 2.0 * (std::cos(ratio * std::numbers::pi) + 1.0);
}

void AdamW::step(ParamSet& params, double lr, double weight_decay) {
    for (const auto& [name, p] : params)
        if (p.trainable && !p.grad.all_finite()) throw NumericError("non-finite gradient for '" + name + "'");
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (auto& [name, p] : params) {
        if (!p.trainable) continue;
        auto [mit, fresh] = m_.try_emplace(name, p.value.rows(), p.value.cols());
        auto& m = mit->second;
        auto& v = v_.try_emplace(name, p.value.rows(), p.value.cols()).first->second;
        (void)fresh;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            if (p.decay) p.value[i] -= lr * weight_decay * p.value[i];
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
            p.value[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
        }
    }
    params.zero_grad();
}

}  // namespace ssg
