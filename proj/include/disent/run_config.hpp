#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "disent/flf.hpp"
#include "disent/metric_training.hpp"
#include "disent/probe.hpp"
#include "disent/synthdata.hpp"

namespace disent {

/// Rejected configuration. `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "config line " + std::to_string(line) + ": " + what
                                : "config: " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Every section with every default filled in.
nlohmann::ordered_json default_run_config();

/// Parses JSON text, rejects unknown sections/keys and type mismatches, and
/// overlays the values on the defaults. The result is fully materialized.
nlohmann::ordered_json resolve_run_config(const std::string& text);
nlohmann::ordered_json load_run_config(const std::filesystem::path& path);

// Typed views of a resolved config.
std::uint64_t config_seed(const nlohmann::ordered_json& cfg);
FactorSpec factor_spec(const nlohmann::ordered_json& cfg);
std::size_t factor_sample_count(const nlohmann::ordered_json& cfg);
/// Rows [0, train_count) train the model; the rest are held out for probes.
std::size_t factor_train_count(const nlohmann::ordered_json& cfg);
IdentityExpressionSpec identity_spec(const nlohmann::ordered_json& cfg);
MetricTrainConfig metric_config(const nlohmann::ordered_json& cfg);
FLFConfig flf_config(const nlohmann::ordered_json& cfg, std::size_t input_dim, std::size_t num_classes,
                     std::size_t num_attrs);
FLFRunConfig flf_run_config(const nlohmann::ordered_json& cfg);
ProbeConfig probe_config(const nlohmann::ordered_json& cfg);

}  // namespace disent
