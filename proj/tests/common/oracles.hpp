#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the solver being checked.

#include <frustum/geom.hpp>

#include <algorithm>
#include <cmath>
#include <utility>
#include <random>
#include <vector>

namespace oracle {

using frustum::Mat3;
using frustum::Vec2;
using frustum::Vec3;

// Rodrigues' formula written out by hand.
inline Mat3 rodrigues(const Vec3& axis, double angle) {
  const Vec3 k = axis.normalized();
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(angle) * kx + (1.0 - std::cos(angle)) * kx * kx;
}

// exp of a 3x3 matrix by truncated power series.
inline Mat3 expm_series(const Mat3& a) {
  Mat3 sum = Mat3::Identity();
  Mat3 term = Mat3::Identity();
  for (int k = 1; k < 40; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

// Rotation angle from the trace only (accurate away from 0 and pi).
inline double trace_angle(const Mat3& r) {
  return std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
}

inline Mat3 euler_zyx(double z, double y, double x) {
  return rodrigues(Vec3::UnitZ(), z) * rodrigues(Vec3::UnitY(), y) * rodrigues(Vec3::UnitX(), x);
}

struct RotPair {
  Mat3 ra;
  Mat3 rb;
};

// Brute-force minimiser of sum |R_A R - R R_B|_F^2 over Euler angles: a
// full 10 degree grid followed by a 2 degree grid around the best cell.
inline Mat3 grid_hand_eye_rotation(const std::vector<RotPair>& pairs) {
  const auto cost = [&](const Mat3& r) {
    double c = 0.0;
    for (const auto& p : pairs) c += (p.ra * r - r * p.rb).squaredNorm();
    return c;
  };
  const double d2r = 3.14159265358979323846 / 180.0;
  double best = 1e300;
  double bz = 0, by = 0, bx = 0;
  for (int z = -180; z < 180; z += 10) {
    for (int y = -90; y <= 90; y += 10) {
      for (int x = -180; x < 180; x += 10) {
        const double c = cost(euler_zyx(z * d2r, y * d2r, x * d2r));
        if (c < best) {
          best = c;
          bz = z;
          by = y;
          bx = x;
        }
      }
    }
  }
  const double cz = bz, cy = by, cx = bx;
  for (int dz = -10; dz <= 10; dz += 2) {
    for (int dy = -10; dy <= 10; dy += 2) {
      for (int dx = -10; dx <= 10; dx += 2) {
        const double z = cz + dz, y = cy + dy, x = cx + dx;
        const double c = cost(euler_zyx(z * d2r, y * d2r, x * d2r));
        if (c < best) {
          best = c;
          bz = z;
          by = y;
          bx = x;
        }
      }
    }
  }
  return euler_zyx(bz * d2r, by * d2r, bx * d2r);
}

// Sum of squared point-to-line distances, in long double so that the grid
// search below can resolve the minimum well under a micrometre.
inline long double ray_objective(const Vec3& p, const std::vector<Vec3>& origins,
                                 const std::vector<Vec3>& dirs) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const Vec3 u = dirs[i].normalized();
    long double d[3], dot = 0.0L;
    for (int k = 0; k < 3; ++k) {
      d[k] = static_cast<long double>(p[k]) - origins[i][k];
      dot += d[k] * u[k];
    }
    for (int k = 0; k < 3; ++k) {
      const long double e = d[k] - dot * u[k];
      s += e * e;
    }
  }
  return s;
}

// Grid + refine: a 21^3 grid over a cube, recentred on the best node and
// shrunk by 0.6 until the cube is below `tol`.
inline Vec3 grid_refine_min(const std::vector<Vec3>& origins, const std::vector<Vec3>& dirs,
                            const Vec3& centre0, double half0, double tol = 1e-10) {
  Vec3 centre = centre0;
  double half = half0;
  while (half > tol) {
    Vec3 best_p = centre;
    long double best = ray_objective(centre, origins, dirs);
    for (int i = -10; i <= 10; ++i) {
      for (int j = -10; j <= 10; ++j) {
        for (int k = -10; k <= 10; ++k) {
          const Vec3 p = centre + (half / 10.0) * Vec3(i, j, k);
          const long double c = ray_objective(p, origins, dirs);
          if (c < best) {
            best = c;
            best_p = p;
          }
        }
      }
    }
    centre = best_p;
    half *= 0.6;
  }
  return centre;
}

// Same grid + refine scheme for an arbitrary scalar cost of a 3-vector.
template <class F>
Vec3 grid_refine_min_fn(F&& cost, const Vec3& centre0, double half0, double tol = 1e-10) {
  Vec3 centre = centre0;
  double half = half0;
  while (half > tol) {
    Vec3 best_p = centre;
    double best = cost(centre);
    for (int i = -10; i <= 10; ++i) {
      for (int j = -10; j <= 10; ++j) {
        for (int k = -10; k <= 10; ++k) {
          const Vec3 p = centre + (half / 10.0) * Vec3(i, j, k);
          const double c = cost(p);
          if (c < best) {
            best = c;
            best_p = p;
          }
        }
      }
    }
    centre = best_p;
    half *= 0.6;
  }
  return centre;
}

// Pyramid membership from half-spaces: the point must be in front of the
// source and inside the four planes through the source and the image edges.
inline bool in_pyramid(const frustum::CameraIntrinsics& k, const Mat3& r_x_to_or,
                       const Vec3& source, const Vec3& x) {
  const Vec3 p = r_x_to_or.transpose() * (x - source);  // X frame
  if (p.z() <= 0.0) return false;
  const double f = k.focal_length;
  const double pitch = k.pixel_pitch;
  // image corners on the detector plane, X frame
  const double u0 = (0.0 - k.principal_point.x()) * pitch;
  const double u1 = (k.image_size.x() - k.principal_point.x()) * pitch;
  const double v0 = (0.0 - k.principal_point.y()) * pitch;
  const double v1 = (k.image_size.y() - k.principal_point.y()) * pitch;
  const Vec3 c00(u0, v0, f), c10(u1, v0, f), c11(u1, v1, f), c01(u0, v1, f);
  const Vec3 inside(0.5 * (u0 + u1), 0.5 * (v0 + v1), f);
  for (const auto& [a, b] : {std::pair{c00, c10}, std::pair{c10, c11}, std::pair{c11, c01},
                             std::pair{c01, c00}}) {
    const Vec3 n = a.cross(b);
    const double s = n.dot(inside) > 0 ? 1.0 : -1.0;
    if (s * n.dot(p) < -1e-9 * p.norm()) return false;
  }
  return true;
}

// Pixel -> unit direction in the X frame via the inverse intrinsics matrix.
inline Vec3 kinv_direction(const frustum::CameraIntrinsics& k, const Vec2& px) {
  Mat3 km;
  km << k.focal_length / k.pixel_pitch, 0, k.principal_point.x(), 0,
      k.focal_length / k.pixel_pitch, k.principal_point.y(), 0, 0, 1;
  return (km.inverse() * Vec3(px.x(), px.y(), 1.0)).normalized();
}

}  // namespace oracle
