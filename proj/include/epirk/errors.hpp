#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace epirk {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what, double value = 0.0)
      : std::runtime_error(what), value_(value) {}
  double value() const { return value_; }

 private:
  double value_;
};

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, Eigen::VectorXd best, double est_error)
      : std::runtime_error(what), best_(std::move(best)), est_error_(est_error) {}
  const Eigen::VectorXd& best() const { return best_; }
  double est_error() const { return est_error_; }

 private:
  Eigen::VectorXd best_;
  double est_error_;
};

class PlanInfeasible : public std::runtime_error {
 public:
  PlanInfeasible(const std::string& what, int stage)
      : std::runtime_error(what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

class NotAvailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StiffnessFailure : public std::runtime_error {
 public:
  StiffnessFailure(const std::string& what, double h)
      : std::runtime_error(what), h_(h) {}
  double h() const { return h_; }

 private:
  double h_;
};

// Krylov failure inside a step, tagged with the stage being assembled.
class StepFailure : public std::runtime_error {
 public:
  StepFailure(const std::string& what, int stage, bool numeric)
      : std::runtime_error(what), stage_(stage), numeric_(numeric) {}
  int stage() const { return stage_; }
  bool numeric() const { return numeric_; }

 private:
  int stage_;
  bool numeric_;
};

}  // namespace epirk
