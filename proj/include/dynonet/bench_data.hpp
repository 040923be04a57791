#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "dynonet/signal.hpp"

namespace dynonet::data {

/// Random-phase multisine: unit-amplitude cosines on every DFT bin k with
/// f_lo <= k fs / T <= f_hi (DC and Nyquist bins excluded), rescaled to `rms`.
struct MultisineConfig {
  std::size_t samples = 1024;
  double fs = 1.0;
  double f_lo = 0.0;
  double f_hi = 0.5;
  double rms = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A band that contains no bin yields an all-zero signal.
TimeSeries generate_multisine(const MultisineConfig& cfg);

/// Frequency bins (indices k of exp(2 pi i k t / T)) excited by cfg.
std::vector<std::size_t> multisine_bins(const MultisineConfig& cfg);

using StaticMap = std::function<double(double)>;

/// y = G2( f( G1 u ) ), f applied per sample.
TimeSeries simulate_wh_reference(const TransferFunction& g1, const StaticMap& f, const TransferFunction& g2,
                                 const TimeSeries& u);

/// Mass-spring-damper with Bouc-Wen hysteretic force z:
///   m y'' + k y + c y' + z = u
///   z' = alpha y' - beta (gamma |y'| |z|^(nu-1) z + delta y' |z|^nu)
/// Integrated with classical RK4, `substeps` steps per sample, input held
/// constant over each sample period.
struct BoucWenParams {
  double mass = 0.04;
  double stiffness = 1000.0;
  double damping = 0.2;
  double alpha = 1000.0;
  double beta = 1000.0;
  double gamma = 0.8;
  double delta = -1.1;
  double nu = 1.0;
  double fs = 750.0;
  std::size_t substeps = 800;
  /// Displacement is reported multiplied by this factor (1000: m -> mm).
  double output_scale = 1000.0;

  void validate() const;
};

struct BoucWenTrajectory {
  std::vector<double> displacement;  // scaled by output_scale
  std::vector<double> velocity;
  std::vector<double> hysteretic_force;
};

BoucWenTrajectory simulate_boucwen_states(const BoucWenParams& p, std::span<const double> u);
TimeSeries simulate_boucwen(const BoucWenParams& p, const TimeSeries& u);

/// Either an absolute noise standard deviation or a signal-to-noise ratio in
/// dB relative to the variance of the clean signal.
struct NoiseSpec {
  std::optional<double> sigma;
  std::optional<double> snr_db;
};

/// Standard deviation implied by `spec` for signal y.
double noise_sigma(const TimeSeries& y, const NoiseSpec& spec);
TimeSeries add_noise(const TimeSeries& y, const NoiseSpec& spec, std::uint64_t seed);

/// Paired input/output record. Samples [0, split) are training data and
/// [split, T) test data.
struct Dataset {
  TimeSeries u;
  TimeSeries y;
  double fs = 1.0;
  std::size_t split = 0;

  std::size_t samples() const { return u.samples(); }
  void validate() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

class CsvError : public std::runtime_error {
 public:
  CsvError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Layout:
///   # fs=<hz>,split=<index>
///   u0,...,u{p-1},y0,...,y{m-1}
///   one row per sample, values printed with 17 significant digits
void save_csv(const Dataset& d, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path);

}  // namespace dynonet::data
