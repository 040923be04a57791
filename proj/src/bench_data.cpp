#include "dynonet/bench_data.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace dynonet::data {

void MultisineConfig::validate() const {
  if (samples < 2) throw std::invalid_argument("multisine: need at least 2 samples");
  if (!(fs > 0.0)) throw std::invalid_argument("multisine: sampling frequency must be positive");
  if (!(f_lo >= 0.0 && f_lo < f_hi && f_hi <= fs / 2.0)) {
    throw std::invalid_argument("multisine: band must satisfy 0 <= f_lo < f_hi <= fs/2");
  }
  if (!(rms >= 0.0)) throw std::invalid_argument("multisine: rms must be non-negative");
}

std::vector<std::size_t> multisine_bins(const MultisineConfig& cfg) {
  cfg.validate();
  const std::size_t T = cfg.samples;
  std::vector<std::size_t> bins;
  for (std::size_t k = 1; 2 * k < T; ++k) {
    const double f = static_cast<double>(k) * cfg.fs / static_cast<double>(T);
    if (f >= cfg.f_lo && f <= cfg.f_hi) bins.push_back(k);
  }
  return bins;
}

TimeSeries generate_multisine(const MultisineConfig& cfg) {
  const auto bins = multisine_bins(cfg);
  const std::size_t T = cfg.samples;
  std::vector<double> cos_table(T);
  std::vector<double> sin_table(T);
  for (std::size_t n = 0; n < T; ++n) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(T);
    cos_table[n] = std::cos(angle);
    sin_table[n] = std::sin(angle);
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> u(T, 0.0);
  for (std::size_t k : bins) {
    const double phi = phase(rng);
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t n = (k * t) % T;
      u[t] += cos_table[n] * c - sin_table[n] * s;
    }
  }
  double power = 0.0;
  for (double v : u) power += v * v;
  power /= static_cast<double>(T);
  if (power > 0.0) {
    const double gain = cfg.rms / std::sqrt(power);
    for (double& v : u) v *= gain;
  }
  return TimeSeries::column(std::move(u));
}

TimeSeries simulate_wh_reference(const TransferFunction& g1, const StaticMap& f, const TransferFunction& g2,
                                 const TimeSeries& u) {
  if (u.channels() != 1) throw ShapeError("simulate_wh_reference: SISO input expected");
  auto x = signal::iir_filter(g1, u.values());
  for (double& v : x) v = f(v);
  return TimeSeries::column(signal::iir_filter(g2, x));
}

void BoucWenParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("bouc-wen: mass must be positive");
  if (!(fs > 0.0)) throw std::invalid_argument("bouc-wen: fs must be positive");
  if (!(nu >= 1.0)) throw std::invalid_argument("bouc-wen: nu must be >= 1");
  if (substeps < 1) throw std::invalid_argument("bouc-wen: substeps must be >= 1");
}

namespace {

using State = std::array<double, 3>;  // displacement, velocity, hysteretic force

State boucwen_rhs(const BoucWenParams& p, const State& x, double u) {
  const double v = x[1];
  const double z = x[2];
  const double az = std::fabs(z);
  const double zdot =
      p.alpha * v - p.beta * (p.gamma * std::fabs(v) * std::pow(az, p.nu - 1.0) * z + p.delta * v * std::pow(az, p.nu));
  return {v, (u - p.stiffness * x[0] - p.damping * v - z) / p.mass, zdot};
}

State axpy(const State& x, double h, const State& k) { return {x[0] + h * k[0], x[1] + h * k[1], x[2] + h * k[2]}; }

}  // namespace

BoucWenTrajectory simulate_boucwen_states(const BoucWenParams& p, std::span<const double> u) {
  p.validate();
  const double h = 1.0 / (p.fs * static_cast<double>(p.substeps));
  BoucWenTrajectory out;
  out.displacement.resize(u.size());
  out.velocity.resize(u.size());
  out.hysteretic_force.resize(u.size());
  State x{0.0, 0.0, 0.0};
  for (std::size_t t = 0; t < u.size(); ++t) {
    out.displacement[t] = p.output_scale * x[0];
    out.velocity[t] = x[1];
    out.hysteretic_force[t] = x[2];
    for (std::size_t s = 0; s < p.substeps; ++s) {
      const State k1 = boucwen_rhs(p, x, u[t]);
      const State k2 = boucwen_rhs(p, axpy(x, h / 2.0, k1), u[t]);
      const State k3 = boucwen_rhs(p, axpy(x, h / 2.0, k2), u[t]);
      const State k4 = boucwen_rhs(p, axpy(x, h, k3), u[t]);
      for (std::size_t i = 0; i < 3; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || !std::isfinite(x[2])) {
      throw NumericalRangeError("bouc-wen: non-finite state at sample " + std::to_string(t));
    }
  }
  return out;
}

TimeSeries simulate_boucwen(const BoucWenParams& p, const TimeSeries& u) {
  if (u.channels() != 1) throw ShapeError("simulate_boucwen: SISO input expected");
  return TimeSeries::column(simulate_boucwen_states(p, u.values()).displacement);
}

double noise_sigma(const TimeSeries& y, const NoiseSpec& spec) {
  if (spec.sigma && spec.snr_db) throw std::invalid_argument("noise: give either sigma or snr_db, not both");
  if (spec.sigma) {
    if (!(*spec.sigma >= 0.0)) throw std::invalid_argument("noise: sigma must be non-negative");
    return *spec.sigma;
  }
  if (!spec.snr_db) return 0.0;
  const auto v = y.values();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return std::sqrt(var * std::pow(10.0, -*spec.snr_db / 10.0));
}

TimeSeries add_noise(const TimeSeries& y, const NoiseSpec& spec, std::uint64_t seed) {
  const double sigma = noise_sigma(y, spec);
  TimeSeries out = y;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out.values()) v += noise(rng);
  return out;
}

void Dataset::validate() const {
  if (u.samples() != y.samples()) throw ShapeError("dataset: input and output lengths differ");
  if (!(fs > 0.0)) throw std::invalid_argument("dataset: fs must be positive");
  if (split > u.samples()) throw std::invalid_argument("dataset: split beyond the last sample");
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  d.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d.fs);
  out << "# fs=" << buf << ",split=" << d.split << '\n';
  for (std::size_t k = 0; k < d.u.channels(); ++k) out << (k ? "," : "") << 'u' << k;
  for (std::size_t k = 0; k < d.y.channels(); ++k) out << ",y" << k;
  out << '\n';
  for (std::size_t t = 0; t < d.samples(); ++t) {
    for (std::size_t k = 0; k < d.u.channels(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", d.u(t, k));
      out << (k ? "," : "") << buf;
    }
    for (std::size_t k = 0; k < d.y.channels(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", d.y(t, k));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("error while writing " + path.string());
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, const std::string& path, std::size_t line) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw CsvError(path, line, "not a number: '" + text + "'");
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + name);

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw CsvError(name, line_no, "expected metadata line '# fs=...,split=...'");
  }
  Dataset d;
  std::optional<double> fs;
  std::optional<std::size_t> split;
  for (const auto& kv : split_fields(line.substr(2))) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CsvError(name, line_no, "malformed metadata entry '" + kv + "'");
    const auto key = kv.substr(0, eq);
    const auto value = kv.substr(eq + 1);
    if (key == "fs") {
      fs = parse_number(value, name, line_no);
    } else if (key == "split") {
      const double s = parse_number(value, name, line_no);
      if (s < 0 || s != std::floor(s)) throw CsvError(name, line_no, "split must be a non-negative integer");
      split = static_cast<std::size_t>(s);
    }
  }
  if (!fs || !split) throw CsvError(name, line_no, "metadata must define fs and split");

  ++line_no;
  if (!std::getline(in, line)) throw CsvError(name, line_no, "missing column header");
  const auto header = split_fields(line);
  std::size_t p = 0;
  std::size_t m = 0;
  for (const auto& col : header) {
    const bool is_u = col == "u" + std::to_string(p);
    const bool is_y = col == "y" + std::to_string(m);
    if (is_u && m == 0) {
      ++p;
    } else if (is_y && p > 0) {
      ++m;
    } else {
      throw CsvError(name, line_no, "unexpected column '" + col + "' (expected u0..,y0..)");
    }
  }
  if (p == 0 || m == 0) throw CsvError(name, line_no, "need at least one input and one output column");

  std::vector<double> u;
  std::vector<double> y;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != p + m) {
      throw CsvError(name, line_no,
                     "row has " + std::to_string(fields.size()) + " columns, header declares " + std::to_string(p + m));
    }
    for (std::size_t i = 0; i < p; ++i) u.push_back(parse_number(fields[i], name, line_no));
    for (std::size_t i = 0; i < m; ++i) y.push_back(parse_number(fields[p + i], name, line_no));
  }
  const std::size_t T = u.size() / p;
  if (T == 0) throw CsvError(name, line_no, "no data rows");
  d.u = TimeSeries(T, p, std::move(u));
  d.y = TimeSeries(T, m, std::move(y));
  d.fs = *fs;
  d.split = *split;
  if (d.split > T) throw CsvError(name, 1, "split exceeds the number of rows");
  return d;
}

}  // namespace dynonet::data
