#include "coarsecrop/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "coarsecrop/rng.hpp"

namespace coarsecrop::losses {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> random_vector(Rng& rng, int dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return v;
}

std::vector<double> unit(std::vector<double> v) {
  const double n = norm(v);
  for (auto& x : v) x /= n;
  return v;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
  const double scale = std::max(max_abs(analytic), max_abs(numeric));
  return scale > 0.0 ? diff / scale : diff;
}

template <typename F>
std::vector<double> central_difference(F&& f, std::vector<double> x, double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace

double infonce_from_logits(std::span<const double> dots, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("infonce: tau must be positive");
  if (dots.empty()) throw std::invalid_argument("infonce: need at least the positive logit");
  double top = -INFINITY;
  for (double d : dots) top = std::max(top, d / tau);
  double sum = 0.0;
  for (double d : dots) sum += std::exp(d / tau - top);
  return std::log(sum) + top - dots[0] / tau;
}

InfoNceResult infonce_loss(std::span<const double> q, std::span<const double> k_pos,
                           const std::vector<std::vector<double>>& k_negs, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("infonce: tau must be positive");
  if (k_pos.size() != q.size()) throw std::invalid_argument("infonce: k_pos length differs from q");
  for (const auto& k : k_negs)
    if (k.size() != q.size()) throw std::invalid_argument("infonce: negative key length differs from q");

  std::vector<double> dots;
  dots.reserve(k_negs.size() + 1);
  dots.push_back(dot(q, k_pos));
  for (const auto& k : k_negs) dots.push_back(dot(q, k));

  InfoNceResult r;
  r.loss = infonce_from_logits(dots, tau);

  // d/dq = (sum_i p_i k_i - k_pos) / tau with p = softmax(dots / tau).
  double top = -INFINITY;
  for (double d : dots) top = std::max(top, d / tau);
  std::vector<double> p(dots.size());
  double z = 0.0;
  for (std::size_t i = 0; i < dots.size(); ++i) z += p[i] = std::exp(dots[i] / tau - top);
  for (auto& v : p) v /= z;

  r.grad_q.assign(q.size(), 0.0);
  for (std::size_t d = 0; d < q.size(); ++d) {
    double g = (p[0] - 1.0) * k_pos[d];
    for (std::size_t i = 0; i < k_negs.size(); ++i) g += p[i + 1] * k_negs[i][d];
    r.grad_q[d] = g / tau;
  }
  return r;
}

ByolResult byol_loss(std::span<const double> q, std::span<const double> z) {
  if (q.size() != z.size()) throw std::invalid_argument("byol: vector lengths differ");
  const double nq = norm(q);
  const double nz = norm(z);
  if (nq == 0.0 || nz == 0.0) throw std::invalid_argument("byol: zero vector");
  const double qz = dot(q, z);
  const double cos = qz / (nq * nz);

  ByolResult r;
  r.loss = 2.0 - 2.0 * cos;
  r.grad_q.resize(q.size());
  r.grad_z.resize(z.size());
  // d cos / dq = z / (|q||z|) - cos * q / |q|^2
  for (std::size_t i = 0; i < q.size(); ++i) {
    r.grad_q[i] = -2.0 * (z[i] / (nq * nz) - cos * q[i] / (nq * nq));
    r.grad_z[i] = -2.0 * (q[i] / (nq * nz) - cos * z[i] / (nz * nz));
  }
  return r;
}

GradientCheck check_gradients(const GradientCheckConfig& cfg) {
  Rng rng(cfg.seed);
  GradientCheck out;
  out.instances = cfg.instances;
  for (int n = 0; n < cfg.instances; ++n) {
    const auto q = unit(random_vector(rng, cfg.infonce_dim));
    const auto k_pos = unit(random_vector(rng, cfg.infonce_dim));
    std::vector<std::vector<double>> k_negs;
    for (int k = 0; k < cfg.infonce_negatives; ++k) k_negs.push_back(unit(random_vector(rng, cfg.infonce_dim)));
    const auto analytic = infonce_loss(q, k_pos, k_negs, cfg.tau).grad_q;
    const auto numeric = central_difference(
        [&](const std::vector<double>& x) { return infonce_loss(x, k_pos, k_negs, cfg.tau).loss; }, q, cfg.step);
    out.infonce_max_rel_error = std::max(out.infonce_max_rel_error, relative_error(analytic, numeric));

    const auto bq = random_vector(rng, cfg.byol_dim);
    const auto bz = random_vector(rng, cfg.byol_dim);
    const auto res = byol_loss(bq, bz);
    const auto num_q = central_difference([&](const std::vector<double>& x) { return byol_loss(x, bz).loss; }, bq, cfg.step);
    const auto num_z = central_difference([&](const std::vector<double>& x) { return byol_loss(bq, x).loss; }, bz, cfg.step);
    out.byol_max_rel_error =
        std::max({out.byol_max_rel_error, relative_error(res.grad_q, num_q), relative_error(res.grad_z, num_z)});
  }
  return out;
}

}  // namespace coarsecrop::losses
