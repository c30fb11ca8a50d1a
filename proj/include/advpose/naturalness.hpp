#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "advpose/linalg.hpp"
#include "advpose/pose.hpp"
#include "advpose/raster.hpp"
#include "advpose/scene.hpp"

namespace advpose {

// Scoring provider contract: visual-fidelity and physical-plausibility
// ratings on the continuous [1, 5] scale.
struct NaturalnessScorer {
    virtual ~NaturalnessScorer() = default;
    virtual std::pair<double, double> score(const Raster& image, const PoseParams& pose) = 0;
};

// Always (5, 5); disables the regularizer.
struct ConstantNaturalness : NaturalnessScorer {
    std::pair<double, double> score(const Raster&, const PoseParams&) override { return {5.0, 5.0}; }
};

// Deterministic heuristic scorer with verifiable arithmetic.
//
// Score_R = min(scale term, clipping term):
//   scale term   — 5 while s is in [0.6, 1.4], dropping linearly to 1 as s
//                  leaves that band by 0.1 (i.e. 1 at s = 0.5 or s = 1.5).
//   clipping term — 5 when no foreground pixel touches the outermost pixel
//                  ring, dropping linearly with the fraction q of ring
//                  pixels covered: 5 - 4 * min(1, 10 q). A fully
//                  out-of-frame object scores 1.
//
// Score_P rates the resting orientation: with n' the rotated base normal
// and phi its angle from world-down (0, 0, -1), the score is 5 for
// phi <= 90 deg and falls linearly to 1 at phi = 180 deg (upside down).
class HeuristicNaturalness : public NaturalnessScorer {
public:
    HeuristicNaturalness(Mesh mesh, Camera camera) : mesh_(std::move(mesh)), camera_(camera) {
        mesh_.validate();
        camera_.validate();
    }

    static double scale_term(double s) {
        double excess = std::max({0.0, (0.6 - s) / 0.1, (s - 1.4) / 0.1});
        return 5.0 - 4.0 * std::min(1.0, excess);
    }

    static double clipping_term(const Mask& mask) {
        if (mask.count() == 0) return 1.0;
        std::size_t ring = 0, touched = 0;
        for (int y = 0; y < mask.height; ++y) {
            for (int x = 0; x < mask.width; ++x) {
                bool border = x == 0 || y == 0 || x == mask.width - 1 || y == mask.height - 1;
                if (!border) continue;
                ++ring;
                touched += mask.at(x, y);
            }
        }
        double q = static_cast<double>(touched) / static_cast<double>(ring);
        return 5.0 - 4.0 * std::min(1.0, 10.0 * q);
    }

    static double resting_term(const Mesh& mesh, const PoseParams& pose) {
        Mat3 rot = to_rigid_transform(pose).rotation;
        Vec3 rotated = matvec(rot, mesh.base_normal);
        double c = std::clamp(dot(rotated, Vec3{0.0, 0.0, -1.0}), -1.0, 1.0);
        double phi = std::acos(c);
        constexpr double half_pi = 0.5 * 3.14159265358979323846;
        if (phi <= half_pi) return 5.0;
        return 5.0 - 4.0 * std::min(1.0, (phi - half_pi) / half_pi);
    }

    std::pair<double, double> score(const Raster&, const PoseParams& pose) override {
        Mask mask = foreground_mask(mesh_, pose, camera_);
        double score_r = std::min(scale_term(pose.scale), clipping_term(mask));
        double score_p = resting_term(mesh_, pose);
        return {std::clamp(score_r, 1.0, 5.0), std::clamp(score_p, 1.0, 5.0)};
    }

private:
    Mesh mesh_;
    Camera camera_;
};

}  // namespace advpose
