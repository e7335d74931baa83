#pragma once

#include <json.hpp>

#include <string>

#include "flpflow/core.hpp"
#include "flpflow/generator.hpp"
#include "flpflow/oracle.hpp"

namespace flpflow {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Every top-level document carries {"schema": <kind>, "version": 1}. Readers
// reject other kinds and newer versions with ConfigError.

Json to_json(const Instance& instance);
Instance instance_from_json(const Json& j);

Json to_json(const FlowConfig& config);
FlowConfig flow_config_from_json(const Json& j);
Json to_json(const AnnealConfig& config);
AnnealConfig anneal_config_from_json(const Json& j);

Json to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const Json& j);

Json to_json(const State& state);
State state_from_json(const Json& j);

Json to_json(const HardAssignment& hard);
HardAssignment hard_assignment_from_json(const Json& j);

/// The config goes into the document so a report is enough to replay a run.
Json to_json(const SolveReport& report, const AnnealConfig& config);
SolveReport report_from_json(const Json& j);

Json to_json(const OracleResult& result);

/// Instance document with an optional "generator" block recording the spec
/// (and so the seed) that produced it.
Json instance_document(const Instance& instance, const GeneratorSpec* spec = nullptr);

Json read_json_file(const std::string& path);
/// Pretty-printed with a trailing newline. Throws ConfigError on I/O failure.
void write_json_file(const Json& j, const std::string& path);

}  // namespace flpflow
