#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "advpose/error.hpp"
#include "advpose/linalg.hpp"
#include "advpose/pose.hpp"
#include "advpose/raster.hpp"
#include "advpose/selection.hpp"

namespace advpose {

using Embedding = std::vector<double>;

// Encoder contracts. Implementations must return unit-norm vectors of a
// fixed dimension and must tolerate concurrent calls.
struct ImageEncoder {
    virtual ~ImageEncoder() = default;
    virtual Embedding embed_image(const Raster& image) = 0;
};

struct TextEncoder {
    virtual ~TextEncoder() = default;
    virtual Embedding embed_text(const std::string& text) = 0;
};

// Ordered semantic label set with ground truth and the prompt template
// applied before text encoding ("a photo of a {}" by default).
struct LabelSet {
    std::vector<std::string> labels;
    int truth_index = 0;
    std::string prompt_template = "a photo of a {}";

    void validate() const {
        if (labels.size() < 2) throw InvalidInput("label set needs at least 2 labels");
        if (truth_index < 0 || truth_index >= static_cast<int>(labels.size()))
            throw InvalidInput("truth_index out of range");
        for (std::size_t i = 0; i < labels.size(); ++i)
            for (std::size_t j = i + 1; j < labels.size(); ++j)
                if (labels[i] == labels[j]) throw InvalidInput("duplicate label: " + labels[i]);
        if (prompt_template.find("{}") == std::string::npos)
            throw InvalidInput("prompt_template must contain a {} placeholder");
    }

    std::string prompt(int i) const {
        std::string out = prompt_template;
        out.replace(out.find("{}"), 2, labels[i]);
        return out;
    }
};

struct SimilarityResult {
    std::vector<double> similarities;    // cosine per label, in [-1, 1]
    std::vector<double> probabilities;   // softmax of similarities
    double isp_loss = 0.0;               // -log p(truth)
    int argmax = 0;
};

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size())
        throw ProviderError("embedding dimension mismatch: " + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()));
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw ProviderError("degenerate embedding: zero norm");
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

// Max-shifted softmax; exact shift invariance is part of the contract.
inline std::vector<double> softmax(const std::vector<double>& s) {
    double hi = *std::max_element(s.begin(), s.end());
    std::vector<double> p(s.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        p[i] = std::exp(s[i] - hi);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

// Similarities are used raw (no logit scale); an optional temperature is
// available for remote encoders whose similarity ranges differ, and is a
// documented deviation from the default behavior.
inline SimilarityResult isp_from_similarities(const std::vector<double>& sims, int truth_index,
                                              double temperature = 1.0) {
    if (sims.empty()) throw InvalidInput("empty similarity vector");
    if (temperature <= 0.0) throw InvalidInput("temperature must be positive");
    std::vector<double> scaled = sims;
    if (temperature != 1.0)
        for (double& x : scaled) x /= temperature;
    SimilarityResult r;
    r.similarities = sims;
    r.probabilities = softmax(scaled);
    r.argmax = static_cast<int>(std::max_element(r.probabilities.begin(), r.probabilities.end()) -
                                r.probabilities.begin());
    r.isp_loss = -std::log(r.probabilities[truth_index]);
    return r;
}

// Holds the per-label text embeddings, computed once; immutable afterwards
// so concurrent scoring needs no locks.
class SimilarityScorer {
public:
    SimilarityScorer(LabelSet labels, ImageEncoder& image_encoder, TextEncoder& text_encoder,
                     double temperature = 1.0)
        : labels_(std::move(labels)), image_encoder_(image_encoder), temperature_(temperature) {
        labels_.validate();
        text_embeddings_.reserve(labels_.labels.size());
        for (std::size_t i = 0; i < labels_.labels.size(); ++i) {
            Embedding e = text_encoder.embed_text(labels_.prompt(static_cast<int>(i)));
            if (!text_embeddings_.empty() && e.size() != text_embeddings_.front().size())
                throw ProviderError("text encoder changed embedding dimension between labels");
            text_embeddings_.push_back(std::move(e));
        }
    }

    SimilarityResult score(const Raster& image) const {
        Embedding img = image_encoder_.embed_image(image);
        std::vector<double> sims(text_embeddings_.size());
        for (std::size_t i = 0; i < text_embeddings_.size(); ++i)
            sims[i] = cosine_similarity(img, text_embeddings_[i]);
        return isp_from_similarities(sims, labels_.truth_index, temperature_);
    }

    const LabelSet& labels() const { return labels_; }
    const std::vector<Embedding>& text_embeddings() const { return text_embeddings_; }

private:
    LabelSet labels_;
    ImageEncoder& image_encoder_;
    std::vector<Embedding> text_embeddings_;
    double temperature_;
};

// L_Nat = -(Score_R + Score_P) / 2, scores on the continuous 5-point scale.
inline double naturalness_loss(double score_r, double score_p) {
    if (!(score_r >= 1.0 && score_r <= 5.0) || !(score_p >= 1.0 && score_p <= 5.0))
        throw InvalidInput("naturalness scores must lie in [1, 5]");
    return -0.5 * (score_r + score_p);
}

// One evaluated sample: latent, decoded pose, rendered image and losses.
struct Candidate {
    Vec6 z{};
    PoseParams pose;
    Raster image;
    double isp = 0.0;
    double nat = 0.0;
    double score_r = 5.0;
    double score_p = 5.0;
};

inline RankedPopulation select(const std::vector<Candidate>& candidates, int m, int k,
                               SelectionMode mode, double lambda) {
    std::vector<FitnessRecord> records;
    records.reserve(candidates.size());
    for (const Candidate& c : candidates) records.push_back({c.isp, c.nat});
    return select(records, m, k, mode, lambda);
}

}  // namespace advpose
