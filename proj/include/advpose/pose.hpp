#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "advpose/error.hpp"
#include "advpose/linalg.hpp"

namespace advpose {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

// 6-D rigid transformation parameters: Tait-Bryan angles in degrees
// (intrinsic Z-Y-X order: yaw about Z, then pitch about Y, then roll
// about X), planar translation in scene units, and a uniform scale.
struct PoseParams {
    double yaw = 0.0;      // degrees, rotation about Z
    double pitch = 0.0;    // degrees, rotation about Y
    double roll = 0.0;     // degrees, rotation about X
    double dx = 0.0;       // scene units along x
    double dy = 0.0;       // scene units along y
    double scale = 1.0;    // > 0

    Vec6 to_vec() const { return {yaw, pitch, roll, dx, dy, scale}; }

    static PoseParams from_vec(const Vec6& v) {
        return {v[0], v[1], v[2], v[3], v[4], v[5]};
    }

    bool finite() const {
        for (double x : to_vec())
            if (!std::isfinite(x)) return false;
        return true;
    }

    void validate() const {
        if (!finite()) throw InvalidInput("pose has non-finite components");
        if (scale <= 0.0) throw InvalidInput("pose scale must be positive");
    }
};

// Box constraint [theta_min, theta_max] together with the derived tanh map
// coefficients: theta = scale_a * tanh(z) + offset_b keeps any real latent z
// strictly inside the box. scale_a/offset_b are recomputed from the bounds
// on construction and never stored independently.
struct PoseBounds {
    Vec6 theta_min;
    Vec6 theta_max;
    Vec6 scale_a;    // (max - min) / 2
    Vec6 offset_b;   // (max + min) / 2

    PoseBounds(const Vec6& lo, const Vec6& hi) : theta_min(lo), theta_max(hi) {
        for (std::size_t i = 0; i < 6; ++i) {
            if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]))
                throw InvalidInput("bounds must be finite");
            if (!(lo[i] < hi[i]))
                throw InvalidInput("theta_min must be strictly below theta_max in every component");
            scale_a[i] = 0.5 * (hi[i] - lo[i]);
            offset_b[i] = 0.5 * (hi[i] + lo[i]);
        }
        if (theta_min[5] <= 0.0)
            throw InvalidInput("scale lower bound must be positive");
    }

    // The search box reported alongside the published setup: yaw over the
    // full turn, pitch 160..200, roll 80..100, translation ±100 units,
    // scale 0.5..1.5.
    static PoseBounds standard() {
        return PoseBounds({0.0, 160.0, 80.0, -100.0, -100.0, 0.5},
                          {360.0, 200.0, 100.0, 100.0, 100.0, 1.5});
    }

    PoseParams midpoint() const { return PoseParams::from_vec(offset_b); }
};

// theta = A * tanh(z) + B, elementwise. Monotone in each latent component
// and always strictly inside the open box for finite z.
inline PoseParams reparameterize(const Vec6& z, const PoseBounds& bounds) {
    Vec6 theta;
    for (std::size_t i = 0; i < 6; ++i) {
        if (!std::isfinite(z[i])) throw InvalidInput("latent vector has non-finite components");
        theta[i] = bounds.scale_a[i] * std::tanh(z[i]) + bounds.offset_b[i];
    }
    return PoseParams::from_vec(theta);
}

// Inverse of reparameterize for poses strictly inside the box:
// z = atanh((theta - B) / A).
inline Vec6 latent_for_pose(const PoseParams& pose, const PoseBounds& bounds) {
    Vec6 z;
    Vec6 theta = pose.to_vec();
    for (std::size_t i = 0; i < 6; ++i) {
        double u = (theta[i] - bounds.offset_b[i]) / bounds.scale_a[i];
        if (!(u > -1.0 && u < 1.0))
            throw InvalidInput("pose must lie strictly inside the open bounds interval");
        z[i] = std::atanh(u);
    }
    return z;
}

// Rotation + planar translation + uniform scale. Rotation is kept as an
// explicit 3x3 matrix; orthonormality is a construction invariant.
struct RigidTransform {
    Mat3 rotation = Mat3::identity();
    Vec3 translation{0.0, 0.0, 0.0};   // z component always 0
    double scale = 1.0;
};

inline Mat3 rotation_z(double rad) {
    Mat3 r = Mat3::identity();
    double c = std::cos(rad), s = std::sin(rad);
    r[0][0] = c; r[0][1] = -s;
    r[1][0] = s; r[1][1] = c;
    return r;
}

inline Mat3 rotation_y(double rad) {
    Mat3 r = Mat3::identity();
    double c = std::cos(rad), s = std::sin(rad);
    r[0][0] = c;  r[0][2] = s;
    r[2][0] = -s; r[2][2] = c;
    return r;
}

inline Mat3 rotation_x(double rad) {
    Mat3 r = Mat3::identity();
    double c = std::cos(rad), s = std::sin(rad);
    r[1][1] = c; r[1][2] = -s;
    r[2][1] = s; r[2][2] = c;
    return r;
}

// R = Rz(yaw) * Ry(pitch) * Rx(roll); angles arrive in degrees.
inline RigidTransform to_rigid_transform(const PoseParams& pose) {
    if (!pose.finite()) throw InvalidInput("pose has non-finite components");
    if (pose.scale <= 0.0) throw InvalidInput("invalid scale: must be positive");
    RigidTransform t;
    t.rotation = matmul(rotation_z(pose.yaw * kDegToRad),
                        matmul(rotation_y(pose.pitch * kDegToRad),
                               rotation_x(pose.roll * kDegToRad)));
    t.translation = {pose.dx, pose.dy, 0.0};
    t.scale = pose.scale;
    return t;
}

inline bool is_identity(const RigidTransform& t) {
    if (t.scale != 1.0 || t.translation != Vec3{0.0, 0.0, 0.0}) return false;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (t.rotation[i][j] != (i == j ? 1.0 : 0.0)) return false;
    return true;
}

// p -> s * R * (p - pivot) + pivot + translation. Rotation and scaling act
// about the pivot so they do not drag the object across the scene. The
// identity transform maps points to themselves exactly (no round trip
// through the pivot subtraction).
inline Vec3 apply_transform(const RigidTransform& t, const Vec3& p, const Vec3& pivot) {
    if (is_identity(t)) return p;
    Vec3 local = p - pivot;
    Vec3 rotated = matvec(t.rotation, local);
    return t.scale * rotated + pivot + t.translation;
}

inline std::vector<Vec3> apply_transform(const RigidTransform& t, const std::vector<Vec3>& points,
                                         const Vec3& pivot) {
    std::vector<Vec3> out;
    out.reserve(points.size());
    for (const Vec3& p : points) {
        for (double c : p)
            if (!std::isfinite(c)) throw InvalidInput("point has non-finite components");
        out.push_back(apply_transform(t, p, pivot));
    }
    return out;
}

}  // namespace advpose
