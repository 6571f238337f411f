#pragma once

// JSON forms of the configuration and result types.

#include <json.hpp>

#include <string>

#include "ctxscale/fit.hpp"
#include "ctxscale/idlab.hpp"
#include "ctxscale/linalg.hpp"
#include "ctxscale/nn.hpp"
#include "ctxscale/parity.hpp"
#include "ctxscale/scaling.hpp"
#include "ctxscale/sweep.hpp"
#include "ctxscale/train.hpp"

namespace ctxscale {

using Json = nlohmann::json;

/// Parses JSON text; throws ConfigError with the parser's message.
Json parse_json(const std::string& text, const std::string& what);

/// Pretty-printed, trailing newline; keys sorted, so output is byte-stable.
std::string dump_json(const Json& j);

void to_json(Json& j, const EigenSpectrum& s);
void from_json(const Json& j, EigenSpectrum& s);
void to_json(Json& j, const PowerLawFit& f);
void from_json(const Json& j, PowerLawFit& f);
void to_json(Json& j, const LinearFit& f);
void to_json(Json& j, const SpectrumDecayFit& f);

namespace parity {
void to_json(Json& j, const TaskSpec& t);
void from_json(const Json& j, TaskSpec& t);
void to_json(Json& j, const MaskPolicy& m);
void from_json(const Json& j, MaskPolicy& m);
/// "seed" is mandatory. {"preset": "canonical"} supplies the canonical tasks
/// and context width; explicit fields still override.
void to_json(Json& j, const ParityConfig& c);
void from_json(const Json& j, ParityConfig& c);
}  // namespace parity

namespace nn {
void to_json(Json& j, const MlpSpec& s);
void from_json(const Json& j, MlpSpec& s);
void to_json(Json& j, const ModelSpec& s);
void from_json(const Json& j, ModelSpec& s);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);
void to_json(Json& j, const TrainHistory& h);
void from_json(const Json& j, TrainHistory& h);
}  // namespace nn

namespace idlab {
void to_json(Json& j, const IdMeasurement& m);
void to_json(Json& j, const EntropyEstimate& e);
void to_json(Json& j, const ThresholdInterval& t);
void to_json(Json& j, const CeIdReport& r);
}  // namespace idlab

namespace scaling {
void to_json(Json& j, const LossModelParams& p);
void from_json(const Json& j, LossModelParams& p);
void to_json(Json& j, const NnScalingResult& r);
void to_json(Json& j, const RunRecord& r);
void from_json(const Json& j, RunRecord& r);
void to_json(Json& j, const OptimalContext& o);
void to_json(Json& j, const SweepReport& r);
/// Model fields default to the reference MLP and the desk training config.
void to_json(Json& j, const SweepConfig& c);
void from_json(const Json& j, SweepConfig& c);
}  // namespace scaling

}  // namespace ctxscale
