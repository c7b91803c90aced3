#pragma once

// Offline synthesis of H2-optimal estimator gains.
//
// For the error plant
//
//     x' = A x + Bw w,   y = Cy x + Dw w,   z = Cz x
//
// and the estimator xh' = A xh + L (Cy xh - y), the gain comes from
//
//     min trace(Q)  s.t.  [ XA + WCy + (.)'   XBw + WDw ]         [ -Q   Cz ]
//                         [       *              -I     ] < 0,    [  *   -X ] < 0
//
// with L = X^-1 W and gamma = sqrt(trace Q) >= ||G_zw||_2. The steady-state
// Kalman-Bucy gain from the filter Riccati equation is the independent check.

#include "attiq/attitude.hpp"
#include "attiq/sdp.hpp"
#include "attiq/sensor_sim.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace attiq {

using Eigen::MatrixXd;

class SynthesisError : public std::runtime_error {
 public:
  SynthesisError(const std::string& what, int octant = 0)
      : std::runtime_error(octant ? "octant " + std::to_string(octant) + ": " + what : what), octant_(octant) {}
  int octant() const { return octant_; }

 private:
  int octant_;
};

/// Linearization attitudes (roll, pitch, yaw), index 1..8.
inline constexpr int kOctantCount = 8;
Euler linearization_point(int octant);
/// DCM of the octant's attitude.
Dcm linearization_dcm(int octant);
/// Octant whose (roll, pitch, yaw) triple is each in {0, pi}, given as bits;
/// inverse of linearization_point.
int octant_of_triple(bool roll_pi, bool pitch_pi, bool yaw_pi);

/// Disturbance w stacks process and measurement channels, so Bw and Dw are
/// n x p and l x p with p = process + measurement channel count.
struct LinearErrorPlant {
  MatrixXd a;
  MatrixXd bw;
  MatrixXd cy;
  MatrixXd dw;
  MatrixXd cz;

  int states() const { return static_cast<int>(a.rows()); }
  int outputs() const { return static_cast<int>(cy.rows()); }
  int disturbances() const { return static_cast<int>(bw.cols()); }
  int performance() const { return static_cast<int>(cz.rows()); }

  /// Dimension checks, Dw Dw' nonsingular, and (A, Cy) detectable.
  void validate() const;
};

/// PBH test over the eigenvalues of A with nonnegative real part.
bool is_detectable(const MatrixXd& a, const MatrixXd& c, double tol = 1e-9);

double max_real_eigenvalue(const MatrixXd& a);

/// Error plant of the attitude/bias estimator linearized at the octant.
/// Throws SynthesisError when g or h is zero or the two are parallel.
LinearErrorPlant build_plant(int octant, const NoiseParams& noise, const Vec3& g, const Vec3& h);

struct LmiOptions {
  sdp::Options sdp{};
  /// A loose first solve supplies a diagonal state scaling and noise scale for
  /// the final solve.
  bool rescale = true;
};

struct LmiSolution {
  MatrixXd gain;  ///< L = X^-1 W
  double gamma = 0.0;
  MatrixXd x, w, q;
  /// Largest eigenvalues of the two LMI blocks (negative when strictly feasible).
  double lmi_max_eigenvalue[2] = {0.0, 0.0};
  double x_min_eigenvalue = 0.0;
  sdp::Result solver;
};

LmiSolution solve_h2_lmi(const LinearErrorPlant& plant, const LmiOptions& options = {});

struct CareSolution {
  MatrixXd p;
  MatrixXd gain;  ///< L = -(P Cy' + Bw Dw') (Dw Dw')^-1
  double residual = 0.0;  ///< Frobenius norm of the Riccati residual
};

/// Stabilizing solution of the filter Riccati equation from the ordered Schur
/// form of the Hamiltonian. Throws SynthesisError for eigenvalues on the
/// imaginary axis.
CareSolution solve_h2_care(const LinearErrorPlant& plant);

/// P with A P + P A' + Q = 0. Throws SynthesisError if A is not Hurwitz.
MatrixXd solve_lyapunov(const MatrixXd& a, const MatrixXd& q);

double h2_norm(const MatrixXd& a_cl, const MatrixXd& b_cl, const MatrixXd& cz);

/// ||G_zw||_2 of the estimator error system for gain L.
double closed_loop_h2_norm(const LinearErrorPlant& plant, const MatrixXd& gain);

struct GainSchedule {
  std::array<Mat6, kOctantCount> gains{};
  std::array<double, kOctantCount> gamma{};
  /// ||L_lmi - L_care||_F / ||L_care||_F per octant.
  std::array<double, kOctantCount> care_difference{};
  NoiseParams noise;
  ReferenceVectors reference;
  Mat6 cz = Mat6::Identity();

  /// octant in 1..8
  const Mat6& gain(int octant) const { return gains.at(octant - 1); }
};

inline constexpr double kCareAgreementTolerance = 1e-3;

/// All eight octants; each LMI gain must agree with the Riccati gain within
/// kCareAgreementTolerance.
GainSchedule synthesize_schedule(const NoiseParams& noise, const Vec3& g, const Vec3& h,
                                 const LmiOptions& options = {});

inline constexpr int kGainFileVersion = 1;
inline constexpr const char* kGainFileFormat = "attiq-gains";

class GainFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string gain_file_text(const GainSchedule& schedule);
void write_gain_file(const GainSchedule& schedule, const std::filesystem::path& path);
/// Throws GainFileError on schema violations or version mismatch.
GainSchedule read_gain_file(const std::filesystem::path& path);
GainSchedule parse_gain_file(const std::string& text);

}  // namespace attiq
