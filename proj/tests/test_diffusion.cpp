#include <cmath>

#include <torch/torch.h>

#include "dvos/diffusion.hpp"
#include "unit.hpp"

using namespace dvos;
using namespace dvos::diffusion;

TEST_CASE("single-step schedule") {
  const VarianceSchedule s(1, 0.1, 0.1);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK_THROWS_AS(s.alpha_bar(2), Error);
  CHECK_THROWS_AS(s.alpha_bar(-1), Error);
}

TEST_CASE("schedule endpoints and monotonicity") {
  const VarianceSchedule s(1000, 1e-4, 0.02);
  CHECK(s.betas().front() == doctest::Approx(1e-4));
  CHECK(s.betas().back() == doctest::Approx(0.02));
  CHECK(s.betas()[1] - s.betas()[0] == doctest::Approx((0.02 - 1e-4) / 999));
  for (int t = 1; t <= 1000; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  CHECK(s.alpha_bar(2) == doctest::Approx((1 - s.betas()[0]) * (1 - s.betas()[1])).epsilon(1e-14));
  CHECK_THROWS_AS(VarianceSchedule(0, 1e-4, 0.02), Error);
  CHECK_THROWS_AS(VarianceSchedule(10, 0.02, 1e-4), Error);
  CHECK_THROWS_AS(VarianceSchedule(10, 0.0, 0.02), Error);
  CHECK_THROWS_AS(VarianceSchedule(10, 0.1, 1.0), Error);
}

TEST_CASE("forward diffusion closed form") {
  // Two steps with beta = 1 - 0.5 each give alpha_bar = 0.25.
  const VarianceSchedule s(2, 0.5, 0.5);
  auto x0 = torch::ones({2, 3});
  auto eps = torch::ones({2, 3});
  auto xt = forward_diffuse(x0, 2, eps, s);
  CHECK(xt.max().item<double>() == doctest::Approx(0.5 + std::sqrt(0.75)).epsilon(1e-6));
  CHECK(xt.min().item<double>() == doctest::Approx(1.3660).epsilon(1e-4));
  CHECK(torch::equal(forward_diffuse(x0, 0, eps, s), x0));
  CHECK_THROWS_AS(forward_diffuse(x0, 1, torch::ones({3}), s), Error);

  auto batch = forward_diffuse(x0, std::vector<int>{0, 2}, eps, s);
  CHECK(batch[0][0].item<double>() == doctest::Approx(1.0));
  CHECK(batch[1][0].item<double>() == doctest::Approx(1.3660).epsilon(1e-4));
  CHECK_THROWS_AS(forward_diffuse(x0, std::vector<int>{0}, eps, s), Error);
}

TEST_CASE("beta distribution helpers") {
  CHECK(beta_mean(1, 13) == doctest::Approx(1.0 / 14));
  CHECK(beta_var(2, 3) == doctest::Approx(6.0 / (25 * 6)));
  CHECK(beta_function(2, 3) == doctest::Approx(1.0 / 12));
  CHECK(beta_pdf(0.3, 1, 1) == doctest::Approx(1.0));
  CHECK(beta_pdf(0.0, 1, 13) == doctest::Approx(13.0));
  CHECK(beta_pdf(1.5, 2, 2) == 0.0);
  CHECK_THROWS_AS(beta_pdf(0.5, 0.0, 1.0), Error);

  for (auto [a, b] : {std::pair{1.0, 13.0}, std::pair{3.0, 9.0}, std::pair{6.0, 3.0}}) {
    // Trapezoid rule on a fine grid.
    const int n = 200000;
    double integral = 0, first = 0, second = 0;
    for (int i = 0; i <= n; ++i) {
      const double x = static_cast<double>(i) / n;
      const double w = (i == 0 || i == n) ? 0.5 / n : 1.0 / n;
      const double f = beta_pdf(x, a, b);
      integral += w * f;
      first += w * f * x;
      second += w * f * x * x;
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(first == doctest::Approx(beta_mean(a, b)).epsilon(1e-6));
    CHECK(second - first * first == doctest::Approx(beta_var(a, b)).epsilon(1e-5));
  }
}

TEST_CASE("Beta(1,1) draws are uniform") {
  Rng rng(3);
  const int n = 50000, bins = 10;
  std::vector<int> counts(bins, 0);
  for (int i = 0; i < n; ++i) {
    const double u = sample_beta(1, 1, rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u <= 1.0);
    counts[std::min(bins - 1, static_cast<int>(u * bins))]++;
  }
  double chi2 = 0;
  const double expected = static_cast<double>(n) / bins;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 27.88);  // chi-square 9 dof, p = 0.001
}

TEST_CASE("level parameters") {
  const LevelScheduler sched;
  const BetaParams p0 = level_params(sched, 0);
  CHECK(p0.alpha == 1.0);
  CHECK(p0.beta == 13.0);
  const BetaParams p5 = level_params(sched, 5);
  CHECK(p5.alpha == 6.0);
  CHECK(p5.beta == 3.0);
  CHECK_THROWS_AS(level_params(sched, 6), Error);
  CHECK_THROWS_AS(level_params(sched, -1), Error);

  LevelScheduler bad;
  bad.n_levels = 7;  // beta0 - 2 * 6 = 1 is still valid
  CHECK_NOTHROW(bad.validate());
  bad.n_levels = 8;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = LevelScheduler{};
  bad.alpha0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("level timesteps stay in range and rise with level") {
  const LevelScheduler sched;
  Rng rng(1);
  double previous = -1;
  for (int level = 0; level < sched.n_levels; ++level) {
    double sum = 0;
    for (int i = 0; i < 4000; ++i) {
      const int t = sample_level_timestep(sched, level, 1000, rng);
      REQUIRE(t >= 0);
      REQUIRE(t <= 999);
      sum += t;
    }
    const double mean = sum / 4000;
    CHECK(mean > previous);
    previous = mean;
  }
  // floor(u * T) with u < 1 stays below T for a one-step schedule too.
  for (int i = 0; i < 100; ++i) CHECK(sample_level_timestep(sched, 5, 1, rng) == 0);
}

TEST_CASE("patch diffusion rates and identity cases") {
  const VarianceSchedule s(1000, 1e-4, 0.02);
  auto refs = torch::rand({3, 4, 3, 8, 8});
  Rng rng(2);

  const auto none = patch_diffuse_batch(refs, 0.0, s, rng);
  CHECK(torch::equal(none.frames, refs));
  for (bool d : none.diffused) CHECK_FALSE(d);

  const auto all = patch_diffuse_batch(refs, 1.0, s, rng);
  REQUIRE(all.diffused.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(all.diffused[i]);
    CHECK(all.timesteps[i] >= 0);
    CHECK(all.timesteps[i] < 1000);
  }

  // max_step = 1 only allows t = 0, which is the identity.
  const auto zero = patch_diffuse_batch(refs, 1.0, s, rng, 1);
  for (int t : zero.timesteps) CHECK(t == 0);
  CHECK(torch::allclose(zero.frames, refs, 0, 0));

  // Untouched frames are bit-identical.
  const auto some = patch_diffuse_batch(refs, 0.5, s, rng);
  auto flat_in = refs.reshape({12, 3, 8, 8});
  auto flat_out = some.frames.reshape({12, 3, 8, 8});
  for (std::size_t i = 0; i < 12; ++i) {
    if (!some.diffused[i]) CHECK(torch::equal(flat_out[static_cast<int64_t>(i)], flat_in[static_cast<int64_t>(i)]));
  }

  CHECK_THROWS_AS(patch_diffuse_batch(refs, 1.5, s, rng), Error);
  CHECK_THROWS_AS(patch_diffuse_batch(torch::rand({2, 3, 8, 8}), 0.5, s, rng), Error);
}

TEST_CASE("patch diffusion is reproducible from the seed") {
  const VarianceSchedule s(1000, 1e-4, 0.02);
  auto refs = torch::rand({2, 4, 3, 6, 6});
  Rng a(9), b(9);
  const auto x = patch_diffuse_batch(refs, 0.5, s, a);
  const auto y = patch_diffuse_batch(refs, 0.5, s, b);
  CHECK(x.timesteps == y.timesteps);
  CHECK(torch::equal(x.frames, y.frames));
}
