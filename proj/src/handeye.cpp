#include "frustum/handeye.hpp"

#include "frustum/error.hpp"
#include "frustum/stats.hpp"
#include "sampling.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace frustum {

namespace {

constexpr double kMinAxisSeparationDeg = 1.0;
constexpr double kMinTranslationSigma = 1e-6;

void check_pairs(std::span<const PosePair> pairs) {
  if (pairs.size() < 2) {
    throw Error(ErrorCode::InsufficientData, "at least two pose pairs are required");
  }
  for (const auto& p : pairs) {
    if (p.a.from() != p.a.to() || p.b.from() != p.b.to()) {
      throw Error(ErrorCode::FrameMismatch, "pose pairs must be relative motions");
    }
    if (p.a.from() != pairs.front().a.from() || p.b.from() != pairs.front().b.from()) {
      throw Error(ErrorCode::FrameMismatch, "pose pairs mix frames");
    }
  }
}

bool has_two_distinct_axes(std::span<const PosePair> pairs) {
  const double min_sin = std::sin(deg2rad(kMinAxisSeparationDeg));
  std::vector<Vec3> axes;
  for (const auto& p : pairs) {
    const Vec3 w = log_so3(p.a.rotation());
    if (w.norm() < 1e-9) continue;
    const Vec3 axis = w.normalized();
    for (const auto& other : axes) {
      if (axis.cross(other).norm() > min_sin) return true;
    }
    axes.push_back(axis);
  }
  return false;
}

Vec3 noisy_translation(const Vec3& t, const Vec3& unit_noise, double sigma) {
  return sigma > 0.0 ? Vec3(t + sigma * unit_noise) : t;
}

Mat3 noisy_rotation(const Mat3& r, const Vec3& unit_noise, double sigma_deg) {
  return sigma_deg > 0.0 ? Mat3(exp_so3(deg2rad(sigma_deg) * unit_noise) * r) : r;
}

}  // namespace

void NoiseModel::validate() const {
  if (!(rot_sigma_deg >= 0.0) || !(trans_sigma_mm >= 0.0)) {
    throw Error(ErrorCode::InvalidParams, "noise sigmas must be >= 0");
  }
}

Mat4 quaternion_constraint_block(const UnitQuaternion& qa, const UnitQuaternion& qb) {
  const double ds = qa.s() - qb.s();
  const Vec3 dv = qa.v() - qb.v();
  Mat4 m;
  m(0, 0) = ds;
  m.block<1, 3>(0, 1) = -dv.transpose();
  m.block<3, 1>(1, 0) = dv;
  m.block<3, 3>(1, 1) = ds * Mat3::Identity() + skew(qa.v() + qb.v());
  return m;
}

UnitQuaternion solve_rotation(std::span<const PosePair> pairs) {
  check_pairs(pairs);
  if (!has_two_distinct_axes(pairs)) {
    throw Error(ErrorCode::DegenerateMotion, "rotation axes are parallel; X is not identifiable");
  }
  Eigen::MatrixXd m(4 * pairs.size(), 4);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    m.block<4, 4>(4 * i, 0) =
        quaternion_constraint_block(pairs[i].a.quaternion(), pairs[i].b.quaternion());
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(2) <= 1e-12 * std::max(sv(0), 1.0)) {
    throw Error(ErrorCode::DegenerateMotion, "rotation null space has dimension > 1");
  }
  const Vec4 q = svd.matrixV().col(3);
  return {q(0), q.tail<3>()};
}

Vec3 solve_translation(std::span<const PosePair> pairs, const Mat3& r_x) {
  check_pairs(pairs);
  Eigen::MatrixXd c(3 * pairs.size(), 3);
  Eigen::VectorXd d(3 * pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    c.block<3, 3>(3 * i, 0) = pairs[i].a.rotation() - Mat3::Identity();
    d.segment<3>(3 * i) = r_x * pairs[i].b.translation() - pairs[i].a.translation();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(2) <= kMinTranslationSigma) {
    throw Error(ErrorCode::DegenerateMotion, "translation system is rank deficient");
  }
  return svd.solve(d);
}

CalibrationResult calibrate(std::span<const PosePair> pairs) {
  const UnitQuaternion q = solve_rotation(pairs);
  const Mat3 r_x = q.rotation();
  const Vec3 t_x = solve_translation(pairs, r_x);

  double rot_ss = 0.0;
  double trans_ss = 0.0;
  for (const auto& p : pairs) {
    const Mat3& ra = p.a.rotation();
    const double angle = rotation_angle(ra * r_x * (r_x * p.b.rotation()).transpose());
    rot_ss += angle * angle;
    trans_ss += (ra * t_x + p.a.translation() - r_x * p.b.translation() - t_x).squaredNorm();
  }
  const double n = static_cast<double>(pairs.size());
  CalibrationResult out;
  out.x = RigidTransform(r_x, t_x, pairs.front().b.from(), pairs.front().a.from());
  out.rotation_residual_deg = rad2deg(std::sqrt(rot_ss / n));
  out.translation_residual_mm = std::sqrt(trans_ss / n);
  out.n_pairs = static_cast<int>(pairs.size());
  return out;
}

std::vector<PosePair> generate_pose_pairs(const RigidTransform& ground_truth_x, int n,
                                          const MotionRange& range, const NoiseModel& noise) {
  if (n < 2) throw Error(ErrorCode::InvalidParams, "n must be >= 2");
  if (!(range.rot_deg > 0.0) || !(range.trans_mm >= 0.0)) {
    throw Error(ErrorCode::InvalidParams, "motion range must be positive");
  }
  noise.validate();
  const FrameId fx = ground_truth_x.to();
  const FrameId fh = ground_truth_x.from();
  const RigidTransform x_inv = invert(ground_truth_x);

  detail::Rng rng(noise.seed);
  std::vector<PosePair> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Vec3 axis = detail::random_unit_vector(rng);
    const double angle = detail::uniform(rng, 0.0, deg2rad(range.rot_deg));
    const double tx = detail::uniform(rng, -range.trans_mm, range.trans_mm);
    const double ty = detail::uniform(rng, -range.trans_mm, range.trans_mm);
    const double tz = detail::uniform(rng, -range.trans_mm, range.trans_mm);
    const RigidTransform a(exp_so3(angle * axis), Vec3(tx, ty, tz), fx, fx);
    const RigidTransform b = compose(x_inv, compose(a, ground_truth_x));

    // noise is always drawn so streams stay aligned across sigma values
    const Vec3 na_r = detail::gaussian3(rng);
    const Vec3 na_t = detail::gaussian3(rng);
    const Vec3 nb_r = detail::gaussian3(rng);
    const Vec3 nb_t = detail::gaussian3(rng);
    PosePair pair;
    pair.a = RigidTransform(noisy_rotation(a.rotation(), na_r, noise.rot_sigma_deg),
                            noisy_translation(a.translation(), na_t, noise.trans_sigma_mm), fx, fx);
    pair.b = RigidTransform(noisy_rotation(b.rotation(), nb_r, noise.rot_sigma_deg),
                            noisy_translation(b.translation(), nb_t, noise.trans_sigma_mm), fh, fh);
    out.push_back(pair);
  }
  return out;
}

PoseError pose_error(const RigidTransform& estimate, const RigidTransform& truth) {
  return {rotation_angle_deg(estimate.rotation().transpose() * truth.rotation()),
          (estimate.translation() - truth.translation()).norm()};
}

std::vector<SamplingRow> sampling_experiment(std::span<const PosePair> pairs,
                                             std::span<const int> sample_sizes, int repeats,
                                             const SamplingOptions& options) {
  if (repeats < 1) throw Error(ErrorCode::InvalidParams, "repeats must be >= 1");
  for (int size : sample_sizes) {
    if (size < 1 || static_cast<std::size_t>(size) > pairs.size()) {
      throw Error(ErrorCode::InvalidParams, "sample size exceeds the number of pairs");
    }
  }

  // All subsets are drawn up front so results do not depend on evaluation order.
  struct Draw {
    std::vector<int> indices;
    bool ok = false;
    std::exception_ptr failure;
    PoseError error;
    CalibrationResult result;
  };
  detail::Rng rng(options.seed);
  std::vector<int> all(pairs.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<Draw> draws;
  for (int size : sample_sizes) {
    for (int r = 0; r < repeats; ++r) {
      Draw d;
      std::sample(all.begin(), all.end(), std::back_inserter(d.indices), size, rng);
      draws.push_back(std::move(d));
    }
  }

  auto evaluate = [&](Draw& d) {
    std::vector<PosePair> subset;
    subset.reserve(d.indices.size());
    for (int i : d.indices) subset.push_back(pairs[static_cast<std::size_t>(i)]);
    try {
      d.result = calibrate(subset);
      if (options.ground_truth) d.error = pose_error(d.result.x, *options.ground_truth);
      d.ok = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateMotion && e.code() != ErrorCode::InsufficientData) {
        d.failure = std::current_exception();
      }
    } catch (...) {
      d.failure = std::current_exception();
    }
  };

  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1) {
    for (auto& d : draws) evaluate(d);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < draws.size(); i += threads) evaluate(draws[i]);
      });
    }
  }
  for (const auto& d : draws) {
    if (d.failure) std::rethrow_exception(d.failure);
  }

  std::vector<SamplingRow> rows;
  std::size_t k = 0;
  for (int size : sample_sizes) {
    std::vector<double> rot_err, trans_err, rot_res, trans_res;
    SamplingRow row;
    row.n = size;
    row.draws = repeats;
    for (int r = 0; r < repeats; ++r, ++k) {
      const Draw& d = draws[k];
      if (!d.ok) {
        ++row.degenerate;
        continue;
      }
      rot_res.push_back(d.result.rotation_residual_deg);
      trans_res.push_back(d.result.translation_residual_mm);
      rot_err.push_back(options.ground_truth ? d.error.rot_deg : d.result.rotation_residual_deg);
      trans_err.push_back(options.ground_truth ? d.error.trans_mm
                                               : d.result.translation_residual_mm);
    }
    const MeanSd re = mean_sd(rot_err), te = mean_sd(trans_err);
    const MeanSd rr = mean_sd(rot_res), tr = mean_sd(trans_res);
    row.mean_rot_err = re.mean;
    row.sd_rot_err = re.sd;
    row.mean_trans_err = te.mean;
    row.sd_trans_err = te.sd;
    row.mean_rot_residual = rr.mean;
    row.sd_rot_residual = rr.sd;
    row.mean_trans_residual = tr.mean;
    row.sd_trans_residual = tr.sd;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace frustum
