#ifndef WAIR_SPATIAL_HPP
#define WAIR_SPATIAL_HPP

// Rotation and Euler-angle primitives shared by the rest of the library.
//
// Attitude is Z-Y-X (yaw, pitch, roll): R = Rz(yaw) * Ry(pitch) * Rx(roll)
// rotates body-frame vectors into the world frame. Euler-angle rates are
// stacked in the same order as the angles, (yaw_dot, pitch_dot, roll_dot).

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>

#include "wair/errors.hpp"

namespace wair {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rotation = Eigen::Matrix3d;

/// Pitch may not come closer than this to +-pi/2 when E(Phi) is used.
inline constexpr double kGimbalGuard = 1e-6;

struct EulerZYX {
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;

    static EulerZYX from_vector(const Vec3& v) { return {v[0], v[1], v[2]}; }
    Vec3 as_vector() const { return {yaw, pitch, roll}; }

    bool operator==(const EulerZYX&) const = default;
};

inline Rotation rot_x(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Rotation r;
    r << 1, 0, 0,
         0, c, -s,
         0, s, c;
    return r;
}

inline Rotation rot_y(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Rotation r;
    r << c, 0, s,
         0, 1, 0,
         -s, 0, c;
    return r;
}

inline Rotation rot_z(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Rotation r;
    r << c, -s, 0,
         s, c, 0,
         0, 0, 1;
    return r;
}

inline Rotation euler_to_rotation(const EulerZYX& e) {
    return rot_z(e.yaw) * rot_y(e.pitch) * rot_x(e.roll);
}

inline Mat3 skew(const Vec3& v) {
    Mat3 s;
    s << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
         -v.y(), v.x(), 0;
    return s;
}

/// Inverse of skew() for a (numerically) skew-symmetric matrix.
inline Vec3 vee(const Mat3& s) {
    return {0.5 * (s(2, 1) - s(1, 2)), 0.5 * (s(0, 2) - s(2, 0)), 0.5 * (s(1, 0) - s(0, 1))};
}

inline bool near_gimbal(const EulerZYX& e) {
    return std::abs(e.pitch) >= std::numbers::pi / 2.0 - kGimbalGuard;
}

inline void check_gimbal(const EulerZYX& e) {
    if (near_gimbal(e) || !std::isfinite(e.pitch)) {
        std::ostringstream os;
        os << "pitch " << e.pitch << " rad is within " << kGimbalGuard << " rad of +-pi/2";
        throw GimbalProximity(os.str());
    }
}

/// Body-frame angular velocity from Euler rates: omega_B = E(Phi) * Phi_dot.
inline Mat3 euler_rate_matrix(const EulerZYX& e) {
    check_gimbal(e);
    const double sp = std::sin(e.pitch), cp = std::cos(e.pitch);
    const double sr = std::sin(e.roll), cr = std::cos(e.roll);
    Mat3 m;
    m << -sp, 0, 1,
         cp * sr, cr, 0,
         cp * cr, -sr, 0;
    return m;
}

/// Time derivative of E(Phi) along the Euler rates `rates`.
inline Mat3 euler_rate_matrix_dot(const EulerZYX& e, const Vec3& rates) {
    check_gimbal(e);
    const double sp = std::sin(e.pitch), cp = std::cos(e.pitch);
    const double sr = std::sin(e.roll), cr = std::cos(e.roll);
    const double pitch_dot = rates[1], roll_dot = rates[2];
    Mat3 d_pitch;
    d_pitch << -cp, 0, 0,
               -sp * sr, 0, 0,
               -sp * cr, 0, 0;
    Mat3 d_roll;
    d_roll << 0, 0, 0,
              cp * cr, -sr, 0,
              -cp * sr, -cr, 0;
    return d_pitch * pitch_dot + d_roll * roll_dot;
}

/// 2-norm condition number of E(Phi); |det E| = cos(pitch).
inline double euler_rate_condition(const EulerZYX& e) {
    const Eigen::JacobiSVD<Mat3> svd(euler_rate_matrix(e));
    return svd.singularValues().maxCoeff() / svd.singularValues().minCoeff();
}

inline bool is_rotation(const Mat3& r, double tol = 1e-12) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace wair

#endif  // WAIR_SPATIAL_HPP
