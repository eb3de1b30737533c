#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "entdist/channel_grid.hpp"
#include "entdist/link.hpp"
#include "test_support.hpp"

using namespace entdist;

namespace {

std::vector<ChannelPair> default_plan() { return build_plan(GridParams{}); }

double wrap_pi(double a) {
  a = std::fmod(a + pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - pi;
}

}  // namespace

TEST_CASE("fiber transmission follows the dB law", "[link]") {
  LinkParams link;
  link.length = 5.0;
  link.attenuation = 0.25;
  REQUIRE(transmission(link) == Catch::Approx(std::pow(10.0, -0.125)).margin(1e-15));
  link.attenuation = 0.6;  // 3 dB total over 5 km
  REQUIRE(transmission(link) == Catch::Approx(0.501187).margin(1e-6));
  link.attenuation = 0.0;
  REQUIRE(transmission(link) == 1.0);
}

TEST_CASE("matched arm delays cancel the channel phase exactly", "[link]") {
  LinkParams link;
  link.dgd_signal = 0.35;
  link.dgd_idler = 0.35;
  const double theta_ref = 0.6;
  for (const ChannelPair& ch : default_plan())
    REQUIRE(channel_theta(ch, link, theta_ref) == theta_ref);  // bitwise, not approximate
}

TEST_CASE("the reference channel keeps the reference phase", "[link]") {
  LinkParams link;
  link.dgd_signal = 0.35;
  link.dgd_idler = 0.15;
  const ChannelPair ch1 = default_plan().front();
  REQUIRE(channel_theta(ch1, link, 1.23) == 1.23);  // detuning is exactly zero
}

TEST_CASE("phase span across the comb equals 2*pi*dgd*span", "[link]") {
  LinkParams link;
  link.dgd_signal = 1.0;
  link.dgd_idler = 0.0;
  const auto plan = default_plan();
  const double span = channel_theta(plan.front(), link, 0.0) -
                      channel_theta(plan.back(), link, 0.0);
  REQUIRE(span == Catch::Approx(two_pi * 2.58).margin(1e-9));
}

TEST_CASE("channel phase is affine in signal frequency with slope 2*pi*(tau_s - tau_i)",
          "[link]") {
  LinkParams link;
  link.dgd_signal = 0.35;
  link.dgd_idler = 0.15;
  const auto plan = default_plan();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const auto n = static_cast<double>(plan.size());
  for (const ChannelPair& ch : plan) {
    const double x = ch.signal_freq_thz;
    const double y = channel_theta(ch, link, 0.4);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double expected = two_pi * (link.dgd_signal - link.dgd_idler);
  REQUIRE(std::abs(slope - expected) <= 1e-9 * std::abs(expected));
}

TEST_CASE("zero elapsed intervals leave the drift at the identity", "[link]") {
  LinkParams link;
  link.drift_step = 0.1;
  RngStream rng = drift_stream(link, Arm::signal);
  const PolarizationUnitary u = drift_unitary(0, link, rng);
  REQUIRE(test_support::frob_dist(u.mat(), Mat2::Identity()) == 0.0);
  REQUIRE(deviation_angle(u) == 0.0);
  RngStream rng2 = drift_stream(link, Arm::idler);
  REQUIRE_THROWS_AS(drift_unitary(-1, link, rng2), std::invalid_argument);
}

TEST_CASE("drift streams are deterministic and separated by arm and window", "[link]") {
  LinkParams link;
  link.drift_step = 0.05;
  link.seed = 42;

  RngStream a = drift_stream(link, Arm::signal, 3);
  RngStream b = drift_stream(link, Arm::signal, 3);
  const PolarizationUnitary ua = drift_unitary(25, link, a);
  const PolarizationUnitary ub = drift_unitary(25, link, b);
  REQUIRE(test_support::frob_dist(ua.mat(), ub.mat()) == 0.0);

  RngStream c = drift_stream(link, Arm::idler, 3);
  RngStream d = drift_stream(link, Arm::signal, 4);
  const PolarizationUnitary uc = drift_unitary(25, link, c);
  const PolarizationUnitary ud = drift_unitary(25, link, d);
  REQUIRE(test_support::frob_dist(ua.mat(), uc.mat()) > 1e-6);
  REQUIRE(test_support::frob_dist(ua.mat(), ud.mat()) > 1e-6);
}

TEST_CASE("accumulated drift grows diffusively with elapsed intervals", "[link]") {
  LinkParams link;
  link.drift_step = 0.01;
  const std::vector<std::int64_t> ks = {64, 256, 1024};
  std::vector<double> mean_dev;
  for (const std::int64_t k : ks) {
    double acc = 0.0;
    const int trials = 400;
    for (int s = 0; s < trials; ++s) {
      link.seed = static_cast<std::uint64_t>(1000 + s);
      RngStream rng = drift_stream(link, Arm::signal);
      acc += deviation_angle(drift_unitary(k, link, rng));
    }
    mean_dev.push_back(acc / trials);
  }
  // Random-walk scaling: quadrupling the interval count doubles the mean
  // deviation angle.
  REQUIRE(mean_dev[1] / mean_dev[0] == Catch::Approx(2.0).margin(0.25));
  REQUIRE(mean_dev[2] / mean_dev[1] == Catch::Approx(2.0).margin(0.25));
}

TEST_CASE("an ideal link leaves the state untouched", "[link]") {
  LinkParams link;  // all impairments default to zero
  const DensityMatrix in = werner_state(0.9, 0.3);
  const DensityMatrix out = apply_link(in, default_plan()[7], link, 12);
  REQUIRE(test_support::frob_dist(in.mat(), out.mat()) <= 1e-14);
}

TEST_CASE("pure DGD keeps states pure and dials the predicted phase", "[link]") {
  LinkParams link;
  link.dgd_signal = 0.35;
  link.dgd_idler = 0.15;
  const double theta0 = 0.6;
  const DensityMatrix in = DensityMatrix::pure(bell_state(theta0));
  for (const ChannelPair& ch : default_plan()) {
    const DensityMatrix out = apply_link(in, ch, link, 0);
    const auto [fmax, theta_star] = fidelity_max_phase(out);
    REQUIRE(fmax == Catch::Approx(1.0).margin(1e-12));
    const double expected = wrap_pi(channel_theta(ch, link, theta0));
    REQUIRE(test_support::ang_dist(theta_star, expected) <= 1e-9);
  }
}

TEST_CASE("depolarization shaves the Bell fidelity by the Werner amount", "[link]") {
  LinkParams link;
  link.depol = 0.1;
  const DensityMatrix in = DensityMatrix::pure(bell_state(0.0));
  const DensityMatrix out = apply_link(in, default_plan().front(), link, 0);
  REQUIRE(fidelity_pure(out, bell_state(0.0)) == Catch::Approx(0.925).margin(1e-12));
  REQUIRE(out.purity() < in.purity());
}

TEST_CASE("unitary impairments preserve the eigenvalue spectrum", "[link]") {
  LinkParams link;
  link.dgd_signal = 0.4;
  link.dgd_idler = 0.1;
  link.drift_step = 0.2;
  link.seed = 7;
  RngStream rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix in = test_support::random_state(rng);
    const DensityMatrix out = apply_link(in, default_plan()[trial % 44], link, 30);
    const auto ev_in = test_support::sorted_eigenvalues(in.mat());
    const auto ev_out = test_support::sorted_eigenvalues(out.mat());
    for (int i = 0; i < 4; ++i) REQUIRE(ev_out[i] == Catch::Approx(ev_in[i]).margin(1e-12));
    REQUIRE(out.purity() == Catch::Approx(in.purity()).margin(1e-12));
  }
}

TEST_CASE("link parameter validation rejects bad values", "[link]") {
  LinkParams link;
  link.attenuation = -0.1;
  REQUIRE_THROWS_AS(link.validate(), std::invalid_argument);
  link = LinkParams{};
  link.depol = 1.5;
  REQUIRE_THROWS_AS(link.validate(), std::invalid_argument);
  link = LinkParams{};
  link.drift_step = -0.01;
  REQUIRE_THROWS_AS(link.validate(), std::invalid_argument);
  link = LinkParams{};
  link.ref_signal_freq = 0.0;
  REQUIRE_THROWS_AS(link.validate(), std::invalid_argument);
}
