#include "ssg/metrics.hpp"

#include <ostream>

namespace ssg {

nlohmann::json to_json(const MetricsRecord& r) {
    nlohmann::json j{{"step", r.step},     {"loss", r.loss},   {"loss_plus2", 2.0 + r.loss},
                     {"lr", r.lr},         {"tau", r.tau},     {"spread", r.spread},
                     {"norm", r.norm},     {"peak_bytes", r.peak_bytes}};
    if (r.ce != 0.0) j["ce"] = r.ce;
    if (r.val_accuracy >= 0.0) j["val_accuracy"] = r.val_accuracy;
    return j;
}

void write_jsonl(std::ostream& os, const MetricsRecord& r) { os << to_json(r).dump() << '\n'; }

}  // namespace ssg
