#pragma once

#include <cstdint>
#include <vector>

#include <torch/types.h>

#include "dvos/common.hpp"

namespace dvos::diffusion {

/// Linear variance schedule with cumulative signal retention
/// alpha_bar(t) = prod_{i<=t} (1 - beta_i) and alpha_bar(0) = 1.
class VarianceSchedule {
 public:
  VarianceSchedule() = default;
  VarianceSchedule(int steps, double beta_start, double beta_end);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  /// beta_1 ... beta_T (index 0 holds beta_1).
  const std::vector<double>& betas() const { return betas_; }
  /// alpha_bar_1 ... alpha_bar_T (index 0 holds alpha_bar_1).
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }
  /// alpha_bar at step t in [0, T]; t = 0 gives 1.
  double alpha_bar(int t) const;

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
};

VarianceSchedule make_schedule(int steps, double beta_start, double beta_end);

/// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
torch::Tensor forward_diffuse(const torch::Tensor& x0, int t, const torch::Tensor& eps,
                              const VarianceSchedule& schedule);

/// Per-sample variant: `t` holds one step per leading-dimension entry of x0.
torch::Tensor forward_diffuse(const torch::Tensor& x0, const std::vector<int>& t, const torch::Tensor& eps,
                              const VarianceSchedule& schedule);

double beta_function(double a, double b);
double beta_pdf(double x, double a, double b);
double beta_mean(double a, double b);
double beta_var(double a, double b);
/// Exact draw via the ratio of two gamma variates.
double sample_beta(double a, double b, Rng& rng);

struct BetaParams {
  double alpha;
  double beta;
};

/// Per-skip-level Beta parameters: alpha = alpha0 + l, beta = beta0 - beta_c * l.
/// l = 0 is the deepest skip (next to the latent), n_levels - 1 the
/// highest-resolution one.
struct LevelScheduler {
  double alpha0 = 1.0;
  double beta0 = 13.0;
  double beta_c = 2.0;
  int n_levels = 6;

  void validate() const;
  bool operator==(const LevelScheduler&) const = default;
};

BetaParams level_params(const LevelScheduler& sched, int level);

/// t = floor(u * T) clamped to [0, T-1] with u ~ Beta(level_params(level)).
int sample_level_timestep(const LevelScheduler& sched, int level, int schedule_steps, Rng& rng);

struct PatchDiffusion {
  torch::Tensor frames;           // same shape as the input
  std::vector<bool> diffused;     // one flag per frame, batch-major
  std::vector<int> timesteps;     // 0 where not diffused
};

/// Each reference frame of a (B, tau, C, H, W) batch is independently, with
/// probability p, replaced by its forward diffusion at a step drawn
/// uniformly from [0, min(max_step, T)).
PatchDiffusion patch_diffuse_batch(const torch::Tensor& references, double p, const VarianceSchedule& schedule,
                                   Rng& rng, int max_step = 1000);

}  // namespace dvos::diffusion
