#include "dbd/serialization.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace dbd {

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json complex_to_json(cdouble z) { return json::array({z.real(), z.imag()}); }

cdouble complex_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("complex values are [re, im] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

json to_json(const SceneConfig& config) {
  json j;
  j["N"] = config.N;
  j["M"] = config.M;
  j["P"] = config.P;
  j["J"] = config.J;
  j["L"] = config.L;
  j["Q"] = config.Q;
  j["seed"] = config.seed;
  if (config.pri_T) j["pri_T"] = *config.pri_T;
  if (config.delta_f) j["delta_f"] = *config.delta_f;
  return j;
}

json to_json(const DelayDopplerChannel& channel) {
  json amps = json::array();
  for (cdouble a : channel.amplitudes) amps.push_back(complex_to_json(a));
  return json{{"amplitudes", amps}, {"delays", channel.delays}, {"dopplers", channel.dopplers}};
}

DelayDopplerChannel channel_from_json(const json& j) {
  DelayDopplerChannel ch;
  for (const json& a : j.at("amplitudes")) ch.amplitudes.push_back(complex_from_json(a));
  ch.delays = j.at("delays").get<std::vector<double>>();
  ch.dopplers = j.at("dopplers").get<std::vector<double>>();
  ch.validate();
  return ch;
}

json to_json(const SolveReport& report, bool include_timing) {
  json j{{"status", to_string(report.status)},
         {"iterations", report.iterations},
         {"primal_residual", report.primal_residual},
         {"dual_residual", report.dual_residual},
         {"duality_gap", report.duality_gap},
         {"objective_value", report.objective_value},
         {"rho", report.rho},
         {"removed_rows", report.removed_rows}};
  if (include_timing) j["seconds"] = report.seconds;
  return j;
}

json to_json(const DualSolution& solution, bool include_timing) {
  json q = json::array();
  for (const cdouble& z : solution.q) q.push_back(complex_to_json(z));
  return json{{"objective", solution.objective}, {"report", to_json(solution.report, include_timing)}, {"q", q}};
}

json to_json(const SideCertificate& cert) {
  return json{{"support_norms", cert.support_norms},
              {"alignment", cert.alignment},
              {"grid_max", cert.grid_max},
              {"off_support_max", cert.off_support_max},
              {"support_ok", cert.support_ok},
              {"bounded_ok", cert.bounded_ok},
              {"off_support_ok", cert.off_support_ok},
              {"passed", cert.passed()}};
}

json to_json(const CertificateReport& report) {
  return json{{"tol", report.tol},
              {"exclusion_radius", report.exclusion_radius},
              {"radar", to_json(report.radar)},
              {"comm", to_json(report.comm)},
              {"passed", report.passed()}};
}

json to_json(const SideResult& side) {
  json peaks = json::array();
  for (std::size_t i = 0; i < side.peaks.size(); ++i) {
    const Peak& pk = side.peaks[i];
    peaks.push_back({{"tau", pk.tau},
                     {"nu", pk.nu},
                     {"norm", pk.norm},
                     {"amplitude", complex_to_json(side.estimates.amplitudes[i])},
                     {"cells", pk.cells},
                     {"local_maxima", pk.local_maxima},
                     {"merged", pk.merged},
                     {"ridge", pk.ridge},
                     {"refined", pk.refined}});
  }
  json j{{"count", side.peaks.size()}, {"peaks", peaks}, {"success", side.success}};
  if (side.match) {
    j["match"] = {{"estimate_of_truth", side.match->estimate_of_truth}, {"errors", side.match->errors}};
  }
  return j;
}

json scene_document(const LiftedProblem& problem) {
  json j{{"config", to_json(problem.config)}};
  if (problem.ground_truth) {
    j["radar_channel"] = to_json(problem.ground_truth->first);
    j["comm_channel"] = to_json(problem.ground_truth->second);
  }
  j["bases_seed"] = problem.config.seed;
  return j;
}

void write_measurements_csv(const ComplexVector& y, std::ostream& out) {
  out << "v,re,im\n";
  for (Eigen::Index v = 0; v < y.size(); ++v)
    out << v << ',' << format_double(y(v).real()) << ',' << format_double(y(v).imag()) << '\n';
}

void write_grid_csv(const NormGrid& grid, std::ostream& out) {
  out << "tau,nu,norm\n";
  std::string line;
  for (int i = 0; i < grid.size(); ++i)
    for (int k = 0; k < grid.size(); ++k) {
      line = format_double(grid.tau(i));
      line += ',';
      line += format_double(grid.nu(k));
      line += ',';
      line += format_double(grid.values(i, k));
      line += '\n';
      out << line;
    }
}

}  // namespace dbd
