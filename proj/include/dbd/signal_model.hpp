#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dbd/rng.hpp"
#include "dbd/types.hpp"

namespace dbd {

/// Problem dimensions. Frequency samples n = -N..N (M = 2N+1 per block),
/// P pulses / symbol blocks, subspace size J, L radar targets, Q comm paths.
struct SceneConfig {
  int N = 6;
  int M = 13;
  int P = 9;
  int J = 3;
  int L = 3;
  int Q = 3;
  std::uint64_t seed = 0;
  std::optional<double> pri_T;    // seconds
  std::optional<double> delta_f;  // Hz

  static SceneConfig with_samples(int M, int P, int J, int L, int Q, std::uint64_t seed = 0);

  int MP() const { return M * P; }
  int PJ() const { return P * J; }

  /// Throws DomainError when an invariant is broken.
  void validate() const;

  /// Physical delay (s) divided by the PRI. Requires pri_T.
  double normalize_delay(double delay_seconds) const;
  /// Physical Doppler (Hz) divided by the subcarrier spacing. Requires delta_f.
  double normalize_doppler(double doppler_hz) const;
};

/// (amplitude, delay, Doppler) triples on the normalized torus.
struct DelayDopplerChannel {
  std::vector<cdouble> amplitudes;
  std::vector<double> delays;
  std::vector<double> dopplers;

  std::size_t size() const { return amplitudes.size(); }
  DelayDoppler point(std::size_t i) const { return {delays[i], dopplers[i]}; }
  std::vector<DelayDoppler> points() const;
  double l1_norm() const;
  void validate() const;
};

/// Known representation bases and the unknown coefficient vectors.
/// B is M x J with row n+N equal to b_n^H; D is the MP x PJ block-diagonal
/// stack of the per-block M x J bases.
struct SubspaceBases {
  ComplexMatrix B;
  ComplexMatrix D;
  ComplexVector u;
  ComplexVector v;

  ComplexVector pulse() const { return B * u; }
  ComplexVector symbols() const { return D * v; }
  /// Block p of D (M x J).
  ComplexMatrix symbol_block(int p, int M, int J) const { return D.block(p * M, p * J, M, J); }
};

struct LiftedProblem {
  SceneConfig config;
  SubspaceBases bases;
  ComplexVector y;
  std::optional<std::pair<DelayDopplerChannel, DelayDopplerChannel>> ground_truth;
};

/// Row index of sample (n, p): v = n + N + M p.
int index_map(int n, int p, const SceneConfig& config);
/// Inverse of index_map, returns (n, p).
std::pair<int, int> inverse_index_map(int v, const SceneConfig& config);

/// a([tau, nu]) with entries exp(j 2 pi (tau n + nu p)) ordered by index_map.
ComplexVector steering_vector(double tau, double nu, const SceneConfig& config);

/// One basis row [1, e^{j2 pi s}, ..., e^{j2 pi (J-1) s}]^H.
ComplexVector basis_row(double sigma, int J);

SubspaceBases generate_bases(const SceneConfig& config, Rng& basis_rng, Rng& coefficient_rng);
/// Convenience overload deriving both streams from config.seed.
SubspaceBases generate_bases(const SceneConfig& config);

struct ChannelOptions {
  /// Minimum wrap-around l-infinity gap between tuples of the same side;
  /// 0 disables rejection sampling.
  double min_separation = 0.0;
  int max_attempts = 100000;
};

std::pair<DelayDopplerChannel, DelayDopplerChannel> generate_channels(const SceneConfig& config,
                                                                      Rng& radar_rng, Rng& comm_rng,
                                                                      const ChannelOptions& options = {});
std::pair<DelayDopplerChannel, DelayDopplerChannel> generate_channels(const SceneConfig& config,
                                                                      const ChannelOptions& options = {});

/// Fixed delay/Doppler values of the reference scene (L = Q = 3); amplitude
/// phases are drawn from the scene's channel streams.
std::pair<DelayDopplerChannel, DelayDopplerChannel> reference_scene_channels(const SceneConfig& config);

/// Unit-modulus amplitude with uniform phase.
cdouble draw_unit_amplitude(Rng& rng);

/// G_v = e_v b_n^H and A_v = e_v d_v^H, stored implicitly by their nonzero rows.
struct SensingPair {
  int v = 0;
  ComplexVector b;  // b_n, length J
  ComplexVector d;  // d_v, length PJ

  ComplexMatrix dense_G(int MP) const;
  ComplexMatrix dense_A(int MP) const;
};

SensingPair sensing_matrices(int v, const SubspaceBases& bases, const SceneConfig& config);

/// y_v = Tr(G_v Z_r) + Tr(A_v Z_c).
ComplexVector forward_operator(const ComplexMatrix& Zr, const ComplexMatrix& Zc, const LiftedProblem& problem);
ComplexVector radar_operator(const ComplexMatrix& Zr, const LiftedProblem& problem);
ComplexVector comm_operator(const ComplexMatrix& Zc, const LiftedProblem& problem);

/// Returns (sum_v q_v G_v^H, sum_v q_v A_v^H), of sizes J x MP and PJ x MP.
std::pair<ComplexMatrix, ComplexMatrix> adjoint_operators(const ComplexVector& q, const LiftedProblem& problem);

/// h = sum_l conj(alpha_l) a(r_l), so that Z = u h^H carries alpha_l on atom u a(r_l)^H.
ComplexVector channel_vector(const DelayDopplerChannel& channel, const SceneConfig& config);

/// (Z_r, Z_c) = (u h_r^H, v h_c^H) from the stored ground truth.
std::pair<ComplexMatrix, ComplexMatrix> lifted_matrices(const LiftedProblem& problem);

struct SynthesisOptions {
  /// Standard deviation of additive circular complex white noise (per
  /// complex sample). Zero keeps the model noiseless.
  double noise_std = 0.0;
  std::uint64_t noise_seed = 0;
};

/// Evaluates the measurement sums directly (not through the lifted operators).
LiftedProblem synthesize(const SceneConfig& config, const DelayDopplerChannel& radar,
                         const DelayDopplerChannel& comm, const SubspaceBases& bases,
                         const SynthesisOptions& options = {});

}  // namespace dbd
