#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace coarsecrop::losses {

struct InfoNceResult {
  double loss = 0.0;
  std::vector<double> grad_q;
};

/// -log softmax of the positive logit q.k+/tau among {q.k+/tau} U {q.k-/tau},
/// evaluated with log-sum-exp. Gradient is with respect to q.
/// Throws std::invalid_argument if tau <= 0 or vector lengths differ.
InfoNceResult infonce_loss(std::span<const double> q, std::span<const double> k_pos,
                           const std::vector<std::vector<double>>& k_negs, double tau);

/// Same loss from precomputed dot products (positive first).
double infonce_from_logits(std::span<const double> dots, double tau);

struct ByolResult {
  double loss = 0.0;
  std::vector<double> grad_q;
  std::vector<double> grad_z;
};

/// 2 - 2 cos(q, z). Throws std::invalid_argument for a zero vector or a
/// length mismatch.
ByolResult byol_loss(std::span<const double> q, std::span<const double> z);

/// Central-difference check of both analytic gradients over random
/// instances. Error per instance is max|analytic - numeric| / max(|analytic|_inf, |numeric|_inf).
struct GradientCheck {
  int instances = 0;
  double infonce_max_rel_error = 0.0;
  double byol_max_rel_error = 0.0;
};

struct GradientCheckConfig {
  std::uint64_t seed = 0;
  int instances = 100;
  double tau = 0.2;
  int infonce_dim = 8;
  int infonce_negatives = 16;
  int byol_dim = 16;
  double step = 1e-5;
};

GradientCheck check_gradients(const GradientCheckConfig& cfg);

}  // namespace coarsecrop::losses
