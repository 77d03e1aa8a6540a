#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epirk/phi.hpp"

namespace epirk {

struct StepRecord {
  double t = 0.0;  // start of the step
  double h = 0.0;
  bool accepted = true;
  std::optional<double> err_weighted;
  std::optional<double> h_next;
  int projections = 0;
  long matvecs = 0;
  int substeps = 0;
};

struct RunReport {
  std::string method;
  std::string strategy;
  std::string problem;
  long N = 0;
  std::optional<double> h;
  std::optional<double> atol, rtol;
  double krylov_tol = 0.0;
  std::vector<StepRecord> steps;
  std::optional<double> final_error;
  long total_matvecs = 0;
  double wall_time_s = 0.0;
  double t_final = 0.0;
  Vector final_state;
  long accepted = 0, rejected = 0;
  int expected_projections = 0;
  bool projection_contract_ok = true;
  bool completed = true;
  std::string failure;
  bool numeric_failure = false;

  std::string to_json(int indent = 2) const;
};

}  // namespace epirk
