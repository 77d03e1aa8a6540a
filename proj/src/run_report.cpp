#include "epirk/run_report.hpp"

#include "json.hpp"

namespace epirk {

std::string RunReport::to_json(int indent) const {
  nlohmann::json j;
  j["method"] = method;
  j["strategy"] = strategy;
  j["problem"] = problem;
  j["N"] = N;
  if (h) j["h"] = *h;
  if (atol) j["atol"] = *atol;
  if (rtol) j["rtol"] = *rtol;
  j["krylov_tol"] = krylov_tol;
  nlohmann::json steps_j = nlohmann::json::array();
  for (const auto& s : steps) {
    nlohmann::json e{{"t", s.t}, {"h", s.h}, {"accepted", s.accepted}, {"projections", s.projections},
                     {"matvecs", s.matvecs}, {"substeps", s.substeps}};
    if (s.err_weighted) e["err_weighted"] = *s.err_weighted;
    if (s.h_next) e["h_next"] = *s.h_next;
    steps_j.push_back(std::move(e));
  }
  j["steps"] = std::move(steps_j);
  j["final_error"] = final_error ? nlohmann::json(*final_error) : nlohmann::json(nullptr);
  j["total_matvecs"] = total_matvecs;
  j["wall_time_s"] = wall_time_s;
  j["t_final"] = t_final;
  j["accepted"] = accepted;
  j["rejected"] = rejected;
  j["expected_projections"] = expected_projections;
  j["projection_contract_ok"] = projection_contract_ok;
  j["completed"] = completed;
  if (!completed) j["failure"] = failure;
  return j.dump(indent);
}

}  // namespace epirk
