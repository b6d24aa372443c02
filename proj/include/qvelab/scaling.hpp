#pragma once

#include "qvelab/model.hpp"

#include <optional>
#include <string_view>

namespace qvelab {

enum class ScalingStatus { Unique, NonUnique, NotScalable, Undetermined };
std::string_view to_string(ScalingStatus status);

struct ScalingResult {
  std::optional<RVec> v;
  double residual = 0.0;  // || v (eta + S v) - 1 ||_inf
  ScalingStatus status = ScalingStatus::Undetermined;
  std::optional<double> j_value;
  long iterations = 0;
  double final_theta = 0.0;
  double max_norm = 0.0;  // largest ||v||_inf seen
};

struct ScalingOptions {
  double tol = 1e-12;
  long max_iter = 2'000'000;
  double blowup_norm = 1e6;
  double theta0 = 0.5;
};

// Damped iteration v <- (1 - theta) v + theta / (eta + S v) from v = 1.
// Requires a = 0 (InvalidArgument) and eta >= 0.
ScalingResult scale_symmetric(const ModelSpec& model, double eta, const ScalingOptions& options = {});

// J_eta(w) = <w, S w> - 2 <log w> + 2 eta <w>. Throws NonPositiveInput.
double j_functional(const ModelSpec& model, const RVec& w, double eta);

// Every nonzero entry lies on a permutation of nonzero entries (and one exists).
// n <= 12, otherwise DimensionTooLarge.
bool has_total_support(const Pattern& pattern);

// Unique iff fully indecomposable, NonUnique iff total support only,
// NotScalable otherwise.
ScalingStatus diagnose_scalability(const Pattern& pattern);

}  // namespace qvelab
