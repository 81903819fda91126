#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>

namespace ssg {

/// One row of a training log.
struct MetricsRecord {
    std::uint64_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double tau = 0.0;
    double spread = 0.0;
    double norm = 0.0;
    std::int64_t peak_bytes = 0;
    /// Supervised cross-entropy, when the step has one.
    double ce = 0.0;
    /// Validation accuracy at this step, when measured (negative = not measured).
    double val_accuracy = -1.0;
};

nlohmann::json to_json(const MetricsRecord& r);
/// One JSON object per line.
void write_jsonl(std::ostream& os, const MetricsRecord& r);

}  // namespace ssg
