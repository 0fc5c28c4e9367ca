#include "dvos/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include <torch/torch.h>

namespace dvos::diffusion {

VarianceSchedule::VarianceSchedule(int steps, double beta_start, double beta_end)
    : beta_start_(beta_start), beta_end_(beta_end) {
  if (steps < 1) throw Error("invalid_argument", "schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw Error("invalid_argument", "schedule requires 0 < beta_start <= beta_end < 1");
  }
  betas_.resize(static_cast<std::size_t>(steps));
  alpha_bars_.resize(static_cast<std::size_t>(steps));
  double prod = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    betas_[static_cast<std::size_t>(i)] = beta_start + (beta_end - beta_start) * frac;
    prod *= 1.0 - betas_[static_cast<std::size_t>(i)];
    alpha_bars_[static_cast<std::size_t>(i)] = prod;
  }
}

double VarianceSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps()) throw Error("out_of_range", "diffusion step " + std::to_string(t) + " outside [0, T]");
  return t == 0 ? 1.0 : alpha_bars_[static_cast<std::size_t>(t - 1)];
}

VarianceSchedule make_schedule(int steps, double beta_start, double beta_end) {
  return VarianceSchedule(steps, beta_start, beta_end);
}

torch::Tensor forward_diffuse(const torch::Tensor& x0, int t, const torch::Tensor& eps,
                              const VarianceSchedule& schedule) {
  if (x0.sizes() != eps.sizes()) throw Error("shape_mismatch", "eps must match x0 in shape");
  const double ab = schedule.alpha_bar(t);
  if (t == 0) return x0;
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

torch::Tensor forward_diffuse(const torch::Tensor& x0, const std::vector<int>& t, const torch::Tensor& eps,
                              const VarianceSchedule& schedule) {
  if (x0.sizes() != eps.sizes()) throw Error("shape_mismatch", "eps must match x0 in shape");
  if (x0.dim() < 1 || static_cast<std::size_t>(x0.size(0)) != t.size()) {
    throw Error("shape_mismatch", "need one diffusion step per batch entry");
  }
  std::vector<double> signal(t.size()), noise(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double ab = schedule.alpha_bar(t[i]);
    signal[i] = std::sqrt(ab);
    noise[i] = std::sqrt(1.0 - ab);
  }
  std::vector<int64_t> shape(static_cast<std::size_t>(x0.dim()), 1);
  shape[0] = x0.size(0);
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto s = torch::tensor(signal, opts).to(x0.scalar_type()).view(shape);
  auto n = torch::tensor(noise, opts).to(x0.scalar_type()).view(shape);
  return s * x0 + n * eps;
}

double beta_function(double a, double b) { return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)); }

namespace {
void check_shapes(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("invalid_argument", "beta shape parameters must be positive");
}
}  // namespace

double beta_pdf(double x, double a, double b) {
  check_shapes(a, b);
  if (x < 0.0 || x > 1.0) return 0.0;
  const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  // x^(a-1) and (1-x)^(b-1) with the conventions 0^0 = 1 at the endpoints.
  const double left = a == 1.0 ? 1.0 : std::pow(x, a - 1.0);
  const double right = b == 1.0 ? 1.0 : std::pow(1.0 - x, b - 1.0);
  return std::exp(log_norm) * left * right;
}

double beta_mean(double a, double b) {
  check_shapes(a, b);
  return a / (a + b);
}

double beta_var(double a, double b) {
  check_shapes(a, b);
  const double s = a + b;
  return a * b / (s * s * (s + 1.0));
}

double sample_beta(double a, double b, Rng& rng) {
  check_shapes(a, b);
  const double x = rng.gamma(a);
  const double y = rng.gamma(b);
  if (x + y == 0.0) return 0.0;
  return x / (x + y);
}

void LevelScheduler::validate() const {
  if (!(alpha0 > 0.0)) throw Error("invalid_config", "alpha0 must be positive");
  if (n_levels < 1) throw Error("invalid_config", "n_levels must be positive");
  if (!(beta0 - beta_c * (n_levels - 1) > 0.0)) {
    throw Error("invalid_config", "beta0 - beta_c * (n_levels - 1) must be positive");
  }
}

BetaParams level_params(const LevelScheduler& sched, int level) {
  sched.validate();
  if (level < 0 || level >= sched.n_levels) {
    throw Error("out_of_range", "level " + std::to_string(level) + " outside [0, " +
                                    std::to_string(sched.n_levels) + ")");
  }
  return {sched.alpha0 + level, sched.beta0 - sched.beta_c * level};
}

int sample_level_timestep(const LevelScheduler& sched, int level, int schedule_steps, Rng& rng) {
  const BetaParams p = level_params(sched, level);
  const double u = sample_beta(p.alpha, p.beta, rng);
  const int t = static_cast<int>(std::floor(u * schedule_steps));
  return std::clamp(t, 0, schedule_steps - 1);
}

PatchDiffusion patch_diffuse_batch(const torch::Tensor& references, double p, const VarianceSchedule& schedule,
                                   Rng& rng, int max_step) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("invalid_argument", "diffusion rate must lie in [0, 1]");
  if (references.dim() != 5) throw Error("shape_mismatch", "expected (B, tau, C, H, W) references");
  const int64_t b = references.size(0), tau = references.size(1);
  const int upper = std::min(max_step, schedule.steps());
  PatchDiffusion out;
  out.diffused.assign(static_cast<std::size_t>(b * tau), false);
  out.timesteps.assign(static_cast<std::size_t>(b * tau), 0);
  bool any = false;
  for (std::size_t i = 0; i < out.diffused.size(); ++i) {
    if (rng.bernoulli(p)) {
      out.diffused[i] = true;
      out.timesteps[i] = static_cast<int>(rng.uniform_int(0, upper - 1));
      any = true;
    }
  }
  if (!any) {
    out.frames = references;
    return out;
  }
  auto flat = references.reshape({b * tau, references.size(2), references.size(3), references.size(4)});
  auto gen = rng.tensor_generator();
  auto eps = torch::randn(flat.sizes(), gen, flat.options());
  auto noisy = forward_diffuse(flat, out.timesteps, eps, schedule);
  std::vector<float> keep(out.diffused.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = out.diffused[i] ? 1.0f : 0.0f;
  auto sel = torch::tensor(keep, flat.options()).view({b * tau, 1, 1, 1});
  out.frames = (sel * noisy + (1 - sel) * flat).view(references.sizes());
  return out;
}

}  // namespace dvos::diffusion
