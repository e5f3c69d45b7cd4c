#include "dbd/signal_model.hpp"

#include <numeric>
#include <string>

namespace dbd {

SceneConfig SceneConfig::with_samples(int M, int P, int J, int L, int Q, std::uint64_t seed) {
  if (M < 1 || M % 2 == 0) throw DomainError("M must be a positive odd integer, got " + std::to_string(M));
  SceneConfig c;
  c.M = M;
  c.N = (M - 1) / 2;
  c.P = P;
  c.J = J;
  c.L = L;
  c.Q = Q;
  c.seed = seed;
  c.validate();
  return c;
}

void SceneConfig::validate() const {
  if (N < 0) throw DomainError("N must be non-negative");
  if (M != 2 * N + 1) throw DomainError("M must equal 2N+1");
  if (P < 1) throw DomainError("P must be positive");
  if (J < 1) throw DomainError("J must be positive");
  if (L < 1) throw DomainError("L must be positive");
  if (Q < 1) throw DomainError("Q must be positive");
  if (pri_T && !(*pri_T > 0.0)) throw DomainError("pri_T must be positive");
  if (delta_f && !(*delta_f > 0.0)) throw DomainError("delta_f must be positive");
}

double SceneConfig::normalize_delay(double delay_seconds) const {
  if (!pri_T) throw DomainError("normalize_delay needs pri_T");
  return delay_seconds / *pri_T;
}

double SceneConfig::normalize_doppler(double doppler_hz) const {
  if (!delta_f) throw DomainError("normalize_doppler needs delta_f");
  return doppler_hz / *delta_f;
}

std::vector<DelayDoppler> DelayDopplerChannel::points() const {
  std::vector<DelayDoppler> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(point(i));
  return out;
}

double DelayDopplerChannel::l1_norm() const {
  return std::accumulate(amplitudes.begin(), amplitudes.end(), 0.0,
                         [](double acc, const cdouble& a) { return acc + std::abs(a); });
}

void DelayDopplerChannel::validate() const {
  if (delays.size() != amplitudes.size() || dopplers.size() != amplitudes.size())
    throw ShapeMismatch("channel sequences differ in length");
  for (std::size_t i = 0; i < size(); ++i) {
    if (!(delays[i] >= 0.0 && delays[i] < 1.0) || !(dopplers[i] >= 0.0 && dopplers[i] < 1.0))
      throw DomainError("channel parameters must lie in [0,1)");
    for (std::size_t k = 0; k < i; ++k) {
      if (delays[i] == delays[k] && dopplers[i] == dopplers[k])
        throw DomainError("channel parameter tuples must be distinct");
    }
  }
}

int index_map(int n, int p, const SceneConfig& config) {
  if (n < -config.N || n > config.N) throw DomainError("frequency index out of range: " + std::to_string(n));
  if (p < 0 || p >= config.P) throw DomainError("block index out of range: " + std::to_string(p));
  return n + config.N + config.M * p;
}

std::pair<int, int> inverse_index_map(int v, const SceneConfig& config) {
  if (v < 0 || v >= config.MP()) throw DomainError("sample index out of range: " + std::to_string(v));
  return {v % config.M - config.N, v / config.M};
}

ComplexVector steering_vector(double tau, double nu, const SceneConfig& config) {
  ComplexVector a(config.MP());
  for (int p = 0; p < config.P; ++p) {
    for (int n = -config.N; n <= config.N; ++n) {
      a(index_map(n, p, config)) = std::polar(1.0, kTwoPi * (tau * n + nu * p));
    }
  }
  return a;
}

ComplexVector basis_row(double sigma, int J) {
  ComplexVector b(J);
  for (int k = 0; k < J; ++k) b(k) = std::polar(1.0, kTwoPi * k * sigma);
  return b;
}

namespace {

ComplexVector unit_complex_normal(int n, Rng& rng) {
  ComplexVector x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.complex_normal();
  return x / x.norm();
}

}  // namespace

SubspaceBases generate_bases(const SceneConfig& config, Rng& basis_rng, Rng& coefficient_rng) {
  config.validate();
  const int M = config.M, P = config.P, J = config.J;
  SubspaceBases out;
  out.B.resize(M, J);
  for (int r = 0; r < M; ++r) out.B.row(r) = basis_row(basis_rng.normal(), J).adjoint();
  out.D = ComplexMatrix::Zero(config.MP(), config.PJ());
  for (int p = 0; p < P; ++p) {
    for (int r = 0; r < M; ++r) {
      out.D.block(p * M + r, p * J, 1, J) = basis_row(basis_rng.normal(), J).adjoint();
    }
  }
  out.u = unit_complex_normal(J, coefficient_rng);
  out.v = unit_complex_normal(config.PJ(), coefficient_rng);
  return out;
}

SubspaceBases generate_bases(const SceneConfig& config) {
  Rng basis_rng(config.seed, StreamRole::Bases);
  Rng coefficient_rng(config.seed, StreamRole::Coefficients);
  return generate_bases(config, basis_rng, coefficient_rng);
}

cdouble draw_unit_amplitude(Rng& rng) { return std::polar(1.0, kTwoPi * rng.uniform()); }

namespace {

DelayDopplerChannel draw_channel(int count, Rng& rng, const ChannelOptions& options) {
  DelayDopplerChannel ch;
  int attempts = 0;
  while (static_cast<int>(ch.delays.size()) < count) {
    const DelayDoppler cand{rng.uniform(), rng.uniform()};
    bool ok = true;
    for (std::size_t k = 0; k < ch.delays.size(); ++k) {
      const double gap = torus_distance_linf(cand, {ch.delays[k], ch.dopplers[k]});
      if (gap < options.min_separation || gap == 0.0) {
        ok = false;
        break;
      }
    }
    if (ok) {
      ch.delays.push_back(cand.tau);
      ch.dopplers.push_back(cand.nu);
    } else if (++attempts > options.max_attempts) {
      throw DomainError("minimum separation " + std::to_string(options.min_separation) +
                        " cannot be met for " + std::to_string(count) + " tuples");
    }
  }
  for (int i = 0; i < count; ++i) ch.amplitudes.push_back(draw_unit_amplitude(rng));
  return ch;
}

}  // namespace

std::pair<DelayDopplerChannel, DelayDopplerChannel> generate_channels(const SceneConfig& config, Rng& radar_rng,
                                                                      Rng& comm_rng, const ChannelOptions& options) {
  config.validate();
  return {draw_channel(config.L, radar_rng, options), draw_channel(config.Q, comm_rng, options)};
}

std::pair<DelayDopplerChannel, DelayDopplerChannel> generate_channels(const SceneConfig& config,
                                                                      const ChannelOptions& options) {
  Rng radar_rng(config.seed, StreamRole::RadarChannel);
  Rng comm_rng(config.seed, StreamRole::CommChannel);
  return generate_channels(config, radar_rng, comm_rng, options);
}

std::pair<DelayDopplerChannel, DelayDopplerChannel> reference_scene_channels(const SceneConfig& config) {
  if (config.L != 3 || config.Q != 3) throw DomainError("the reference scene has L = Q = 3");
  Rng radar_rng(config.seed, StreamRole::RadarChannel);
  Rng comm_rng(config.seed, StreamRole::CommChannel);
  DelayDopplerChannel radar{{}, {0.23, 0.68, 0.87}, {0.45, 0.42, 0.71}};
  DelayDopplerChannel comm{{}, {0.12, 0.21, 0.95}, {0.09, 0.25, 0.87}};
  for (int i = 0; i < 3; ++i) radar.amplitudes.push_back(draw_unit_amplitude(radar_rng));
  for (int i = 0; i < 3; ++i) comm.amplitudes.push_back(draw_unit_amplitude(comm_rng));
  return {radar, comm};
}

ComplexMatrix SensingPair::dense_G(int MP) const {
  ComplexMatrix G = ComplexMatrix::Zero(MP, b.size());
  G.row(v) = b.adjoint();
  return G;
}

ComplexMatrix SensingPair::dense_A(int MP) const {
  ComplexMatrix A = ComplexMatrix::Zero(MP, d.size());
  A.row(v) = d.adjoint();
  return A;
}

SensingPair sensing_matrices(int v, const SubspaceBases& bases, const SceneConfig& config) {
  const auto [n, p] = inverse_index_map(v, config);
  (void)p;
  SensingPair s;
  s.v = v;
  s.b = bases.B.row(n + config.N).adjoint();
  s.d = bases.D.row(v).adjoint();
  return s;
}

namespace {

void check_problem(const LiftedProblem& problem) {
  const auto& c = problem.config;
  if (problem.bases.B.rows() != c.M || problem.bases.B.cols() != c.J) throw ShapeMismatch("B must be M x J");
  if (problem.bases.D.rows() != c.MP() || problem.bases.D.cols() != c.PJ()) throw ShapeMismatch("D must be MP x PJ");
}

}  // namespace

ComplexVector radar_operator(const ComplexMatrix& Zr, const LiftedProblem& problem) {
  check_problem(problem);
  const auto& c = problem.config;
  if (Zr.rows() != c.J || Zr.cols() != c.MP()) throw ShapeMismatch("Z_r must be J x MP");
  ComplexVector y(c.MP());
  for (int v = 0; v < c.MP(); ++v) {
    // Tr(e_v b_n^H Z) = b_n^H Z e_v
    y(v) = (problem.bases.B.row(v % c.M) * Zr.col(v))(0);
  }
  return y;
}

ComplexVector comm_operator(const ComplexMatrix& Zc, const LiftedProblem& problem) {
  check_problem(problem);
  const auto& c = problem.config;
  if (Zc.rows() != c.PJ() || Zc.cols() != c.MP()) throw ShapeMismatch("Z_c must be PJ x MP");
  ComplexVector y(c.MP());
  for (int v = 0; v < c.MP(); ++v) {
    y(v) = (problem.bases.D.row(v) * Zc.col(v))(0);
  }
  return y;
}

ComplexVector forward_operator(const ComplexMatrix& Zr, const ComplexMatrix& Zc, const LiftedProblem& problem) {
  return radar_operator(Zr, problem) + comm_operator(Zc, problem);
}

std::pair<ComplexMatrix, ComplexMatrix> adjoint_operators(const ComplexVector& q, const LiftedProblem& problem) {
  check_problem(problem);
  const auto& c = problem.config;
  if (q.size() != c.MP()) throw ShapeMismatch("q must have length MP");
  ComplexMatrix Ar(c.J, c.MP());
  ComplexMatrix Ac(c.PJ(), c.MP());
  for (int v = 0; v < c.MP(); ++v) {
    Ar.col(v) = q(v) * problem.bases.B.row(v % c.M).adjoint();
    Ac.col(v) = q(v) * problem.bases.D.row(v).adjoint();
  }
  return {Ar, Ac};
}

ComplexVector channel_vector(const DelayDopplerChannel& channel, const SceneConfig& config) {
  ComplexVector h = ComplexVector::Zero(config.MP());
  for (std::size_t i = 0; i < channel.size(); ++i)
    h += std::conj(channel.amplitudes[i]) * steering_vector(channel.delays[i], channel.dopplers[i], config);
  return h;
}

std::pair<ComplexMatrix, ComplexMatrix> lifted_matrices(const LiftedProblem& problem) {
  if (!problem.ground_truth) throw DomainError("lifted matrices need ground truth");
  const auto& [radar, comm] = *problem.ground_truth;
  return {problem.bases.u * channel_vector(radar, problem.config).adjoint(),
          problem.bases.v * channel_vector(comm, problem.config).adjoint()};
}

LiftedProblem synthesize(const SceneConfig& config, const DelayDopplerChannel& radar, const DelayDopplerChannel& comm,
                         const SubspaceBases& bases, const SynthesisOptions& options) {
  config.validate();
  radar.validate();
  comm.validate();
  LiftedProblem out{config, bases, ComplexVector::Zero(config.MP()), std::make_pair(radar, comm)};
  check_problem(out);
  const ComplexVector s = bases.pulse();
  const ComplexVector g = bases.symbols();
  for (int p = 0; p < config.P; ++p) {
    for (int n = -config.N; n <= config.N; ++n) {
      const int v = index_map(n, p, config);
      cdouble acc = 0.0;
      for (std::size_t l = 0; l < radar.size(); ++l)
        acc += radar.amplitudes[l] * s(n + config.N) *
               std::polar(1.0, -kTwoPi * (n * radar.delays[l] + p * radar.dopplers[l]));
      for (std::size_t q = 0; q < comm.size(); ++q)
        acc += comm.amplitudes[q] * g(v) * std::polar(1.0, -kTwoPi * (n * comm.delays[q] + p * comm.dopplers[q]));
      out.y(v) = acc;
    }
  }
  if (options.noise_std > 0.0) {
    Rng noise(options.noise_seed, StreamRole::Noise);
    const double scale = options.noise_std / std::sqrt(2.0);
    for (int v = 0; v < config.MP(); ++v) out.y(v) += scale * noise.complex_normal();
  }
  return out;
}

}  // namespace dbd
