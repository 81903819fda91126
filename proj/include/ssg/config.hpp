#pragma once

#include "ssg/augment.hpp"
#include "ssg/grace.hpp"
#include "ssg/graph.hpp"
#include "ssg/minibatch.hpp"
#include "ssg/nn.hpp"
#include "ssg/optim.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ssg {

enum class Method { bgrl, grace, random_init, supervised, semisup };

std::string_view method_name(Method m);
Method parse_method(std::string_view s);

/// Everything a `train` run needs. Exactly one of `data_dir` / `sbm` is set.
struct RunConfig {
    std::optional<std::filesystem::path> data_dir;
    std::optional<SbmParams> sbm;

    Method method = Method::bgrl;
    EncoderConfig encoder;
    AugmentationConfig augment;
    ScheduleConfig optim;

    std::size_t predictor_hidden = 512;
    bool projector = false;
    std::size_t projector_hidden = 512;
    GraceConfig grace;
    BatchSpec batch;
    FanoutSpec fanout;

    std::uint64_t seed = 0;
    std::uint64_t metrics_every = 50;
    std::uint64_t eval_every = 0;
    std::filesystem::path out = "run";

    void validate() const;
    Dataset load_data() const;

    BgrlConfig bgrl_config() const;
    GraceTrainConfig grace_config() const;
    SemisupConfig semisup_config() const;

    bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& c);
/// Strict: unknown keys and wrong types raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json encoder_to_json(const EncoderConfig& e);
EncoderConfig encoder_from_json(const nlohmann::json& j);

/// Sets `doc[a][b]...` from a dotted key. The value is parsed as JSON when possible,
/// as a list of numbers when comma separated, and as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view dotted_key, std::string_view value);

/// Named hyperparameter presets: wikics, am-computers, am-photos, co-cs, co-phy, arxiv, ppi.
RunConfig preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace ssg
