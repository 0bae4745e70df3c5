#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>

namespace ruelle {

/// Largest chart dimension supported. Vectors and matrices are stack-allocated
/// up to this size.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Chart coordinates of a point.
using Point = Vec;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Sentinel for a Lyapunov exponent equal to minus infinity.
inline constexpr double kMinusInfinity = -std::numeric_limits<double>::infinity();

/// Absolute tolerance for geometric comparisons.
inline constexpr double kGeomTol = 1e-12;

inline Point point1(double x) {
    Point p(1);
    p[0] = x;
    return p;
}

inline Point point2(double x, double y) {
    Point p(2);
    p << x, y;
    return p;
}

inline bool all_finite(const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) return false;
    }
    return true;
}

} // namespace ruelle
