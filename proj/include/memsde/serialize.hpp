#pragma once

// Text formats: RFC-4180 CSV with a header row, JSON with sorted keys and
// whitespace-separated .dat tables with a '#' header.

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "memsde/drift.hpp"
#include "memsde/girsanov.hpp"
#include "memsde/history.hpp"
#include "memsde/integrator.hpp"
#include "memsde/stationary.hpp"

namespace memsde {

using Json = nlohmann::json;

/// Shortest form that carries 17 significant digits; "nan", "inf", "-inf" otherwise.
std::string format_double(double v);
double parse_double(const std::string& s);

std::string path_csv(const PathRecord& path);
std::string trajectory_csv(const Trajectory& traj);
/// Inverse of path_csv. Times are checked against the uniform grid.
PathRecord parse_path_csv(const std::string& text);

Json to_json(const PastHistory& h);
PastHistory past_history_from_json(const Json& j);

Json trajectory_sidecar(const Trajectory& traj, const DriftSpec& spec);
Json to_json(const DriftSpec& spec);
Json to_json(const ConditionReport& r);
Json to_json(const BoundCheckReport& r);
Json to_json(const GirsanovReport& r);
/// Scalars only; the curves go to .dat files.
Json to_json(const CouplingReport& r);
Json to_json(const DensityEnsemble& e);

std::string measure_csv(const EmpiricalMeasure& m);
Json measure_sidecar(const EmpiricalMeasure& m);

/// Whitespace-separated table with a '#'-prefixed header line.
std::string dat_table(const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows);
std::string discrepancy_dat(const DiscrepancyProfile& p);
std::string coupling_dat(const CouplingReport& r);

/// Pretty-printed, two-space indent, trailing newline.
std::string dump(const Json& j);

}  // namespace memsde
