#pragma once

// Co-calibration of the X-ray source (X) with the gantry tracker (H) from
// paired relative motions, AX = XB with X = ^X T_H.

#include "frustum/geom.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace frustum {

// One relative-motion pair over the same interval [t_i, t_{i+1}]:
// a moves the source frame (X -> X), b moves the tracker frame (H -> H).
struct PosePair {
  RigidTransform a = RigidTransform::identity(FrameId::X, FrameId::X);
  RigidTransform b = RigidTransform::identity(FrameId::H, FrameId::H);
};

struct CalibrationResult {
  RigidTransform x = RigidTransform::identity(FrameId::H, FrameId::X);
  double rotation_residual_deg = 0.0;
  double translation_residual_mm = 0.0;
  int n_pairs = 0;
};

struct NoiseModel {
  double rot_sigma_deg = 0.0;   // per-component std of the axis-angle perturbation
  double trans_sigma_mm = 0.0;  // per-axis std
  std::uint64_t seed = 0;

  void validate() const;
};

struct MotionRange {
  double rot_deg = 60.0;
  double trans_mm = 100.0;
};

// 4x4 block mapping q_X to q_A q_X - q_X q_B.
Mat4 quaternion_constraint_block(const UnitQuaternion& qa, const UnitQuaternion& qb);

// Unit q minimizing |M q| over the stacked blocks. Throws InsufficientData
// for fewer than two pairs, DegenerateMotion when no two rotation axes are
// more than 1 degree apart.
UnitQuaternion solve_rotation(std::span<const PosePair> pairs);

// Least-squares t_X of (R_A - I) t_X = R_X t_B - t_A. Throws DegenerateMotion
// when the stacked system has sigma_min <= 1e-6.
Vec3 solve_translation(std::span<const PosePair> pairs, const Mat3& r_x);

CalibrationResult calibrate(std::span<const PosePair> pairs);

// Random A motions, B = X^-1 A X, independent noise on A and B.
std::vector<PosePair> generate_pose_pairs(const RigidTransform& ground_truth_x, int n,
                                          const MotionRange& range, const NoiseModel& noise);

struct PoseError {
  double rot_deg = 0.0;
  double trans_mm = 0.0;
};

PoseError pose_error(const RigidTransform& estimate, const RigidTransform& truth);

struct SamplingRow {
  int n = 0;
  double mean_rot_err = 0.0;
  double sd_rot_err = 0.0;
  double mean_trans_err = 0.0;
  double sd_trans_err = 0.0;
  double mean_rot_residual = 0.0;
  double sd_rot_residual = 0.0;
  double mean_trans_residual = 0.0;
  double sd_trans_residual = 0.0;
  int draws = 0;
  int degenerate = 0;
};

struct SamplingOptions {
  std::uint64_t seed = 0;
  // Errors are measured against this when given, otherwise the error
  // columns repeat the residual statistics.
  std::optional<RigidTransform> ground_truth;
  unsigned threads = 1;
};

std::vector<SamplingRow> sampling_experiment(std::span<const PosePair> pairs,
                                             std::span<const int> sample_sizes, int repeats,
                                             const SamplingOptions& options = {});

}  // namespace frustum
