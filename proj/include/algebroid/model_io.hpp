#ifndef ALGEBROID_MODEL_IO_HPP
#define ALGEBROID_MODEL_IO_HPP

#include <json.hpp>
#include <memory>
#include <string>

#include "algebroid/riemann.hpp"
#include "algebroid/sigma.hpp"

namespace algebroid {

inline constexpr const char* kToolVersion = "0.1.0";

/// Model file violates the schema (bad indices, unparseable expressions,
/// undeclared names, explicit symmetric bracket entries, ...). Maps to CLI
/// exit code 2.
class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct LoadedModel {
  std::unique_ptr<AlgebroidModel> model;
  MetricModel metric;
  /// Present when the file spelled out the full metric matrix; kept so the
  /// symmetry of the redundant entries can be validated by sampling.
  std::shared_ptr<Array2<Expr>> metric_full;
};

LoadedModel load_model_file(const std::string& path);
LoadedModel load_model_json(const nlohmann::json& doc, const std::string& origin = "<json>");

/// 0 when the file stored only the upper triangle; otherwise the sampled
/// max |G_ab - G_ba| of the redundant entries.
double metric_symmetry_residual(const LoadedModel& lm, int samples, std::uint64_t seed);

/// Report skeleton with tool version, model name, seed and the fixed
/// convention notes every report embeds.
nlohmann::ordered_json new_report(const std::string& model_name, std::uint64_t seed);

}  // namespace algebroid

#endif
