#pragma once

#include "radloc/geometry.hpp"
#include "radloc/rng.hpp"

#include <complex>
#include <vector>

namespace radloc {

using cdouble = std::complex<double>;
using CVecX = Eigen::VectorXcd;
using PathGains = std::vector<cdouble>;

/// Element positions (columns, metres) relative to the array phase centre.
struct ArrayGeometry {
  Eigen::Matrix3Xd displacements;

  int size() const { return static_cast<int>(displacements.cols()); }
};

/// side x side planar array in the local XY plane. Element (i, j), 1-based,
/// sits at [j - (side+1)/2, -i + (side+1)/2, 0] * spacing.
ArrayGeometry upa_geometry(int side, double spacing);

/// exp(j 2pi/lambda * delta_n^T d(angles)) for every element n.
CVecX array_response(const ArrayGeometry& geometry, const SphericalAngles& angles, double wavelength);

struct SignalConfig {
  double carrier_frequency = 28e9;   // Hz
  double subcarrier_spacing = 120e3;  // Hz
  int num_subcarriers = 3333;
  int num_symbols = 10;
  double transmit_power = 1e-2;        // W
  double noise_psd = 3.981071705534973e-21;  // W/Hz (-174 dBm/Hz)
  double noise_figure = 19.952623149688797;  // linear (13 dB)
  double propagation_speed = kSpeedOfLight;
  ArrayGeometry bs_array;
  ArrayGeometry ue_array;
  std::vector<CVecX> precoders;  // one per symbol, length N_BS
  std::vector<CVecX> combiners;  // one per symbol, length N_UE

  double wavelength() const { return propagation_speed / carrier_frequency; }
  double bandwidth() const { return num_subcarriers * subcarrier_spacing; }
  double symbol_energy() const { return transmit_power / bandwidth(); }

  /// Throws PreconditionError on inconsistent sizes, non-unit beams or
  /// non-positive scalars.
  void validate() const;
};

double dbm_to_watts(double dbm);
double db_to_linear(double db);

/// K unit-norm vectors of length N with entries exp(j phi) / sqrt(N).
std::vector<CVecX> random_beams(Rng& rng, int n, int k);

/// Square UPAs at half-wavelength spacing plus freshly drawn beams.
void set_arrays(SignalConfig& config, int bs_side, int ue_side);
void draw_beams(SignalConfig& config, Rng& rng);

/// Free-space gain magnitude squared with cos^2 element patterns at both ends.
double channel_gain_power(const Scene& scene, std::size_t m, double wavelength);
cdouble channel_gain(const Scene& scene, std::size_t m, double wavelength, Rng& rng);
PathGains channel_gains(const Scene& scene, double wavelength, Rng& rng);

/// Noise-free received symbol y_{k,n}, k and n are 1-based.
cdouble noise_free_symbol(const ChannelParams& params, const PathGains& gains,
                          const SignalConfig& config, int k, int n);
cdouble noise_free_symbol(const Scene& scene, const PathGains& gains, const SignalConfig& config,
                          int k, int n);

/// Every y_{k,n} as a K x N_f matrix.
Eigen::MatrixXcd noise_free_observation(const ChannelParams& params, const PathGains& gains,
                                        const SignalConfig& config);

}  // namespace radloc
