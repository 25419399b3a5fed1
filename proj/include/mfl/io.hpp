#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mfl/dynamics.hpp"
#include "mfl/meanfield.hpp"
#include "mfl/measure.hpp"

namespace mfl {

using json = nlohmann::json;

/// Full-precision decimal formatting (17 significant digits).
std::string format_double(double v);

/// FNV-1a hash of the canonical JSON dump, as a hex string.
std::string config_hash(const json& config);

void write_measure_csv(const std::filesystem::path& path, const DiscreteMeasure& mu,
                       const std::string& comment = {});
DiscreteMeasure read_measure_csv(const std::filesystem::path& path);

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          const std::string& comment = {});
void write_controls_csv(const std::filesystem::path& path, const ControlSignal& u,
                        const TimeGrid& grid, const std::string& comment = {});
void write_control_measure_csv(const std::filesystem::path& path, const ControlMeasure& nu,
                               const std::string& comment = {});
void write_plan_csv(const std::filesystem::path& path, const TransportPlan& plan,
                    const std::string& comment = {});
void write_sweep_csv(const std::filesystem::path& path, const GammaSweepResult& result,
                     const std::string& comment = {});
void write_json(const std::filesystem::path& path, const json& j);

}  // namespace mfl
