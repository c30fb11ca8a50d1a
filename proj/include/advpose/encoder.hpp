#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "advpose/error.hpp"
#include "advpose/objective.hpp"
#include "advpose/raster.hpp"
#include "advpose/rng.hpp"
#include "advpose/scene.hpp"

namespace advpose {

// Synthetic encoder pair: a deterministic, pose-sensitive stand-in victim
// whose vulnerability landscape is engineered through anchor poses, so the
// worst-case region is known and brute-forceable.

struct SyntheticEncoderConfig {
    int grid = 8;                          // g: image partitioned into g x g cells
    int embed_dim = 64;                    // d
    std::uint64_t projection_seed = 9001;

    void validate() const {
        if (grid < 1 || embed_dim < 1) throw InvalidInput("grid and embed_dim must be >= 1");
    }
};

// Image embedding: per-cell mean RGB (3 g^2 features in [0,1], cell-major
// then channel) pushed through a fixed pseudorandom projection to d dims,
// unit-normalized.
//
// The projection matrix is part of the reproducibility contract: entries are
// standard normals scaled by 1/sqrt(d), drawn row-major (row = output dim)
// from Rng(projection_seed) — splitmix64 core, 53-bit uniforms, Box-Muller.
class SyntheticImageEncoder : public ImageEncoder {
public:
    explicit SyntheticImageEncoder(SyntheticEncoderConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        const std::size_t features = feature_count();
        projection_.resize(static_cast<std::size_t>(cfg_.embed_dim) * features);
        Rng rng(cfg_.projection_seed);
        double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.embed_dim));
        for (double& entry : projection_) entry = scale * rng.normal();
    }

    std::size_t feature_count() const { return 3u * cfg_.grid * cfg_.grid; }

    std::vector<double> features(const Raster& image) const {
        const int g = cfg_.grid;
        if (image.width < g || image.height < g)
            throw InvalidInput("image smaller than the encoder grid");
        std::vector<double> feat(feature_count(), 0.0);
        for (int cy = 0; cy < g; ++cy) {
            int y0 = cy * image.height / g;
            int y1 = (cy + 1) * image.height / g;
            for (int cx = 0; cx < g; ++cx) {
                int x0 = cx * image.width / g;
                int x1 = (cx + 1) * image.width / g;
                double sum[3] = {0.0, 0.0, 0.0};
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) {
                        const std::uint8_t* px = image.at(x, y);
                        sum[0] += px[0];
                        sum[1] += px[1];
                        sum[2] += px[2];
                    }
                double count = static_cast<double>(y1 - y0) * (x1 - x0) * 255.0;
                std::size_t base = (static_cast<std::size_t>(cy) * g + cx) * 3;
                for (int ch = 0; ch < 3; ++ch) feat[base + ch] = sum[ch] / count;
            }
        }
        return feat;
    }

    Embedding embed_image(const Raster& image) override { return embed_features(features(image)); }

    Embedding embed_features(const std::vector<double>& feat) const {
        if (feat.size() != feature_count()) throw InvalidInput("feature vector has wrong length");
        Embedding out(cfg_.embed_dim, 0.0);
        for (int row = 0; row < cfg_.embed_dim; ++row) {
            const double* prow = projection_.data() + static_cast<std::size_t>(row) * feat.size();
            double acc = 0.0;
            for (std::size_t col = 0; col < feat.size(); ++col) acc += prow[col] * feat[col];
            out[row] = acc;
        }
        double n = 0.0;
        for (double v : out) n += v * v;
        if (n == 0.0) throw ProviderError("degenerate embedding: zero norm");
        n = std::sqrt(n);
        for (double& v : out) v /= n;
        return out;
    }

    const SyntheticEncoderConfig& config() const { return cfg_; }

private:
    SyntheticEncoderConfig cfg_;
    std::vector<double> projection_;    // embed_dim x feature_count, row-major
};

// Yaw/pitch offsets averaged into every anchor embedding; the small spread
// keeps label embeddings representative of a neighborhood, not a single
// render.
inline const std::array<std::pair<double, double>, 5>& anchor_jitter_pattern() {
    static const std::array<std::pair<double, double>, 5> pattern = {
        {{0.0, 0.0}, {5.0, 0.0}, {-5.0, 0.0}, {0.0, 5.0}, {0.0, -5.0}}};
    return pattern;
}

// Text encoder for the synthetic victim. Each label is tied to an anchor
// pose; its embedding is the unit-normalized mean of image embeddings over
// renders at the anchor pose plus the fixed jitter pattern. The ground
// truth anchors at the canonical pose, distractors at distinct poses, which
// makes p(truth | image) high near canonical and low near the distractors.
class SyntheticTextEncoder : public TextEncoder {
public:
    SyntheticTextEncoder(std::map<std::string, PoseParams> anchors, Scene scene,
                         const SyntheticImageEncoder& image_encoder)
        : anchors_(std::move(anchors)), scene_(std::move(scene)), image_encoder_(image_encoder) {
        if (anchors_.empty()) throw InvalidInput("anchor map is empty");
        scene_.mesh.validate();
        scene_.camera.validate();
    }

    Embedding label_embed(const std::string& label) const {
        auto it = anchors_.find(label);
        if (it == anchors_.end()) throw InvalidInput("unknown label: " + label);
        const PoseParams& anchor = it->second;

        Embedding mean;
        for (const auto& [dyaw, dpitch] : anchor_jitter_pattern()) {
            PoseParams jittered = anchor;
            jittered.yaw += dyaw;
            jittered.pitch += dpitch;
            Raster img = render(scene_.mesh, jittered, scene_.background, scene_.camera);
            Embedding e = image_encoder_.embed_features(image_encoder_.features(img));
            if (mean.empty()) mean.assign(e.size(), 0.0);
            for (std::size_t i = 0; i < e.size(); ++i) mean[i] += e[i];
        }
        double n = 0.0;
        for (double v : mean) n += v * v;
        if (n == 0.0) throw ProviderError("degenerate embedding: zero norm");
        n = std::sqrt(n);
        for (double& v : mean) v /= n;
        return mean;
    }

    // The scorer hands over full prompts ("a photo of a box"); the label is
    // recovered as the longest anchor key occurring in the text.
    Embedding embed_text(const std::string& text) override {
        const std::string* best = nullptr;
        for (const auto& [label, pose] : anchors_) {
            (void)pose;
            if (text.find(label) == std::string::npos) continue;
            if (!best || label.size() > best->size()) best = &label;
        }
        if (!best) throw InvalidInput("unknown label: no anchor matches text '" + text + "'");
        return label_embed(*best);
    }

    const std::map<std::string, PoseParams>& anchors() const { return anchors_; }

private:
    std::map<std::string, PoseParams> anchors_;
    Scene scene_;
    const SyntheticImageEncoder& image_encoder_;
};

}  // namespace advpose
