#include <gtest/gtest.h>

#include <cmath>

#include "advpose/pose.hpp"
#include "advpose/rng.hpp"

using namespace advpose;

namespace {

void expect_vec_near(const Vec3& got, const Vec3& want, double tol) {
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(got[i], want[i], tol) << "component " << i;
}

}  // namespace

TEST(PoseBounds, StandardValuesAndDerivedCoefficients) {
    PoseBounds b = PoseBounds::standard();
    EXPECT_DOUBLE_EQ(b.theta_min[0], 0.0);
    EXPECT_DOUBLE_EQ(b.theta_max[0], 360.0);
    EXPECT_DOUBLE_EQ(b.theta_min[5], 0.5);
    EXPECT_DOUBLE_EQ(b.theta_max[5], 1.5);
    EXPECT_DOUBLE_EQ(b.scale_a[0], 180.0);
    EXPECT_DOUBLE_EQ(b.offset_b[0], 180.0);
    EXPECT_DOUBLE_EQ(b.scale_a[1], 20.0);
    EXPECT_DOUBLE_EQ(b.offset_b[1], 180.0);
    EXPECT_DOUBLE_EQ(b.scale_a[5], 0.5);
    EXPECT_DOUBLE_EQ(b.offset_b[5], 1.0);
}

TEST(PoseBounds, RejectsDegenerateBox) {
    Vec6 lo{0, 0, 0, 0, 0, 1};
    Vec6 hi{1, 1, 1, 1, 1, 1};    // equal in the last component
    EXPECT_THROW(PoseBounds(lo, hi), InvalidInput);
}

TEST(Reparameterize, ZeroMapsToMidpoint) {
    PoseBounds b = PoseBounds::standard();
    PoseParams p = reparameterize(Vec6{}, b);
    EXPECT_DOUBLE_EQ(p.yaw, 180.0);
    EXPECT_DOUBLE_EQ(p.pitch, 180.0);
    EXPECT_DOUBLE_EQ(p.roll, 90.0);
    EXPECT_DOUBLE_EQ(p.dx, 0.0);
    EXPECT_DOUBLE_EQ(p.dy, 0.0);
    EXPECT_DOUBLE_EQ(p.scale, 1.0);
}

TEST(Reparameterize, SaturatesAtBoxEdges) {
    PoseBounds b = PoseBounds::standard();
    PoseParams hi = reparameterize(Vec6{40, 40, 40, 40, 40, 40}, b);
    PoseParams lo = reparameterize(Vec6{-40, -40, -40, -40, -40, -40}, b);
    Vec6 hv = hi.to_vec(), lv = lo.to_vec();
    for (int i = 0; i < 6; ++i) {
        EXPECT_NEAR(hv[i], b.theta_max[i], 1e-9);
        EXPECT_LE(hv[i], b.theta_max[i]);
        EXPECT_NEAR(lv[i], b.theta_min[i], 1e-9);
        EXPECT_GE(lv[i], b.theta_min[i]);
    }
}

TEST(Reparameterize, UnitLatentYawComponent) {
    // 180 + 180 * tanh(1), cross-checked against a high-precision evaluation.
    PoseBounds b = PoseBounds::standard();
    PoseParams p = reparameterize(Vec6{1, 1, 1, 1, 1, 1}, b);
    EXPECT_NEAR(p.yaw, 317.08694807203768, 1e-10);
}

TEST(Reparameterize, RejectsNonFiniteLatent) {
    PoseBounds b = PoseBounds::standard();
    Vec6 z{};
    z[2] = std::nan("");
    EXPECT_THROW(reparameterize(z, b), InvalidInput);
}

TEST(Reparameterize, InsideBoundsForManyDraws) {
    PoseBounds b = PoseBounds::standard();
    Rng rng(123);
    for (int i = 0; i < 100000; ++i) {
        Vec6 z;
        for (int j = 0; j < 6; ++j) z[j] = rng.normal();
        Vec6 theta = reparameterize(z, b).to_vec();
        for (int j = 0; j < 6; ++j) {
            ASSERT_GE(theta[j], b.theta_min[j]);
            ASSERT_LE(theta[j], b.theta_max[j]);
        }
    }
}

TEST(Reparameterize, StrictlyMonotonePerComponent) {
    PoseBounds b = PoseBounds::standard();
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        Vec6 z;
        for (int j = 0; j < 6; ++j) z[j] = 2.0 * rng.normal();
        int j = trial % 6;
        Vec6 z2 = z;
        z2[j] += 0.25 + rng.uniform();
        Vec6 a = reparameterize(z, b).to_vec();
        Vec6 c = reparameterize(z2, b).to_vec();
        ASSERT_GT(c[j], a[j]);
    }
}

TEST(LatentForPose, InvertsReparameterize) {
    PoseBounds b = PoseBounds::standard();
    // atanh(-1/2) for the yaw preimage of 90 degrees.
    Vec6 z = latent_for_pose(PoseParams{90, 180, 90, 0, 0, 1.0}, b);
    EXPECT_NEAR(z[0], -0.54930614433405484, 1e-14);
    for (int j = 1; j < 6; ++j) EXPECT_DOUBLE_EQ(z[j], 0.0);

    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        Vec6 latent;
        for (int j = 0; j < 6; ++j) latent[j] = 1.5 * rng.normal();
        Vec6 back = latent_for_pose(reparameterize(latent, b), b);
        for (int j = 0; j < 6; ++j) ASSERT_NEAR(back[j], latent[j], 1e-9);
    }

    EXPECT_THROW(latent_for_pose(PoseParams{0, 180, 90, 0, 0, 1.0}, b), InvalidInput);
}

TEST(RigidTransform, IdentityPose) {
    RigidTransform t = to_rigid_transform(PoseParams{0, 0, 0, 0, 0, 1});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(t.rotation[i][j], i == j ? 1.0 : 0.0);
    expect_vec_near(t.translation, Vec3{0, 0, 0}, 0.0);
    EXPECT_DOUBLE_EQ(t.scale, 1.0);
    EXPECT_TRUE(is_identity(t));
}

TEST(RigidTransform, QuarterTurnAboutZMapsXToY) {
    RigidTransform t = to_rigid_transform(PoseParams{90, 0, 0, 0, 0, 1});
    Vec3 r = matvec(t.rotation, Vec3{1, 0, 0});
    expect_vec_near(r, Vec3{0, 1, 0}, 1e-15);
}

TEST(RigidTransform, YawPitchComposition) {
    // Rz(90) Ry(90) applied to (1,0,0): Ry takes x to -z, Rz leaves -z fixed.
    RigidTransform t = to_rigid_transform(PoseParams{90, 90, 0, 0, 0, 1});
    Vec3 r = matvec(t.rotation, Vec3{1, 0, 0});
    expect_vec_near(r, Vec3{0, 0, -1}, 1e-15);
}

TEST(RigidTransform, AlwaysOrthonormalWithUnitDeterminant) {
    Rng rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        PoseParams p{rng.uniform(-720, 720), rng.uniform(-720, 720), rng.uniform(-720, 720),
                     rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 3.0)};
        Mat3 r = to_rigid_transform(p).rotation;
        Mat3 rtr = matmul(transpose(r), r);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) ASSERT_NEAR(rtr[i][j], i == j ? 1.0 : 0.0, 1e-9);
        double det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                     r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                     r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        ASSERT_NEAR(det, 1.0, 1e-9);
    }
}

TEST(RigidTransform, RejectsNonPositiveScale) {
    EXPECT_THROW(to_rigid_transform(PoseParams{0, 0, 0, 0, 0, 0.0}), InvalidInput);
    EXPECT_THROW(to_rigid_transform(PoseParams{0, 0, 0, 0, 0, -1.0}), InvalidInput);
}

TEST(ApplyTransform, IdentityIsExact) {
    RigidTransform id;
    Vec3 p{0.1 + 0.2, 1e-17, 3.0000000001};
    Vec3 out = apply_transform(id, p, Vec3{11.0, -3.0, 0.5});
    EXPECT_EQ(out[0], p[0]);
    EXPECT_EQ(out[1], p[1]);
    EXPECT_EQ(out[2], p[2]);
}

TEST(ApplyTransform, PureScalingAboutOrigin) {
    RigidTransform t;
    t.scale = 2.0;
    Vec3 out = apply_transform(t, Vec3{1, 2, 3}, Vec3{0, 0, 0});
    expect_vec_near(out, Vec3{2, 4, 6}, 0.0);
}

TEST(ApplyTransform, RotationAboutPivot) {
    RigidTransform t;
    t.rotation = rotation_z(90.0 * kDegToRad);
    Vec3 out = apply_transform(t, Vec3{2, 0, 0}, Vec3{1, 0, 0});
    expect_vec_near(out, Vec3{1, 1, 0}, 1e-15);
}

TEST(ApplyTransform, VectorOverloadAndValidation) {
    RigidTransform t;
    t.translation = Vec3{1, 0, 0};
    std::vector<Vec3> pts{{0, 0, 0}, {1, 1, 1}};
    auto out = apply_transform(t, pts, Vec3{0, 0, 0});
    EXPECT_DOUBLE_EQ(out[0][0], 1.0);
    EXPECT_DOUBLE_EQ(out[1][0], 2.0);

    std::vector<Vec3> bad{{std::nan(""), 0, 0}};
    EXPECT_THROW(apply_transform(t, bad, Vec3{0, 0, 0}), InvalidInput);
}
