#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "dbd/conic_solver.hpp"
#include "dbd/dual_sdp.hpp"
#include "dbd/localization.hpp"
#include "dbd/signal_model.hpp"

namespace dbd {

using json = nlohmann::ordered_json;

json complex_to_json(cdouble z);
cdouble complex_from_json(const json& j);

json to_json(const SceneConfig& config);
json to_json(const DelayDopplerChannel& channel);
DelayDopplerChannel channel_from_json(const json& j);
json to_json(const SolveReport& report, bool include_timing);
json to_json(const DualSolution& solution, bool include_timing);
json to_json(const SideCertificate& cert);
json to_json(const CertificateReport& report);
json to_json(const SideResult& side);

/// {config, radar_channel, comm_channel, bases_seed}
json scene_document(const LiftedProblem& problem);

/// CSV with header "v,re,im".
void write_measurements_csv(const ComplexVector& y, std::ostream& out);
/// CSV with header "tau,nu,norm", one row per grid node, tau-major.
void write_grid_csv(const NormGrid& grid, std::ostream& out);

/// Shortest decimal that round-trips, as used in the JSON and CSV outputs.
std::string format_double(double x);

}  // namespace dbd
