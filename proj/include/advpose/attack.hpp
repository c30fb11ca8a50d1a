#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "advpose/cma.hpp"
#include "advpose/config.hpp"
#include "advpose/encoder.hpp"
#include "advpose/error.hpp"
#include "advpose/naturalness.hpp"
#include "advpose/objective.hpp"
#include "advpose/pose.hpp"
#include "advpose/remote.hpp"
#include "advpose/scene.hpp"

namespace advpose {

enum class ProviderKind { Synthetic, Remote };

struct AttackConfig {
    std::string scene_path;
    LabelSet labels;
    std::map<std::string, PoseParams> anchors;    // synthetic victim landscape
    PoseBounds bounds = PoseBounds::standard();
    StrategyParams strategy = default_strategy(6);
    PoseParams init_pose = standard_init_pose();
    int budget = 15;
    std::uint64_t seed = 0;
    int threads = 1;
    ProviderKind provider = ProviderKind::Synthetic;
    std::string endpoint;
    SyntheticEncoderConfig encoder;
    double temperature = 1.0;
    std::string output_dir = "out";

    void validate() const {
        labels.validate();
        strategy.validate();
        if (budget < 1) throw InvalidInput("budget must be >= 1");
        if (threads < 1) throw InvalidInput("threads must be >= 1");
        if (scene_path.empty()) throw InvalidInput("scene path is required");
        if (provider == ProviderKind::Remote && endpoint.empty())
            throw InvalidInput("remote provider requires an endpoint");
        if (provider == ProviderKind::Synthetic) {
            encoder.validate();
            for (const std::string& label : labels.labels)
                if (!anchors.count(label))
                    throw InvalidInput("label '" + label + "' has no anchor pose");
        }
    }

    static AttackConfig load(const std::string& path);
};

// A ready-to-query victim: scene, encoders, cached label embeddings and the
// naturalness scorer, assembled per the provider selection.
struct Victim {
    Scene scene;
    PoseBounds bounds = PoseBounds::standard();
    LabelSet labels;
    PoseParams canonical_pose = standard_init_pose();
    std::shared_ptr<SyntheticImageEncoder> synthetic_image;
    std::shared_ptr<SyntheticTextEncoder> synthetic_text;
    std::shared_ptr<RemoteScorer> remote;
    std::shared_ptr<SimilarityScorer> similarity;
    std::shared_ptr<NaturalnessScorer> naturalness;

    Raster render_pose(const PoseParams& pose) const {
        return render(scene.mesh, pose, scene.background, scene.camera);
    }

    SimilarityResult classify(const PoseParams& pose) const {
        return similarity->score(render_pose(pose));
    }

    bool misclassified(const PoseParams& pose) const {
        return classify(pose).argmax != labels.truth_index;
    }
};

// Remote naturalness is an optional endpoint: score via the server while it
// answers, and switch permanently to the heuristic scorer the first time the
// endpoint reports itself missing.
class RemoteNaturalnessFallback : public NaturalnessScorer {
public:
    RemoteNaturalnessFallback(std::shared_ptr<RemoteScorer> remote, Mesh mesh, Camera camera)
        : remote_(std::move(remote)), heuristic_(std::move(mesh), camera) {}

    std::pair<double, double> score(const Raster& image, const PoseParams& pose) override {
        if (!remote_disabled_.load()) {
            try {
                return remote_->score(image, pose);
            } catch (const EndpointMissing&) {
                remote_disabled_.store(true);
            }
        }
        return heuristic_.score(image, pose);
    }

    bool using_heuristic() const { return remote_disabled_.load(); }

private:
    std::shared_ptr<RemoteScorer> remote_;
    HeuristicNaturalness heuristic_;
    std::atomic<bool> remote_disabled_{false};
};

inline Victim make_victim(const AttackConfig& cfg) {
    cfg.validate();
    Victim v;
    v.scene = load_scene(cfg.scene_path);
    v.bounds = cfg.bounds;
    v.labels = cfg.labels;

    if (cfg.provider == ProviderKind::Synthetic) {
        v.naturalness = std::make_shared<HeuristicNaturalness>(v.scene.mesh, v.scene.camera);
        v.synthetic_image = std::make_shared<SyntheticImageEncoder>(cfg.encoder);
        v.synthetic_text =
            std::make_shared<SyntheticTextEncoder>(cfg.anchors, v.scene, *v.synthetic_image);
        v.similarity = std::make_shared<SimilarityScorer>(cfg.labels, *v.synthetic_image,
                                                          *v.synthetic_text, cfg.temperature);
        v.canonical_pose = cfg.anchors.at(cfg.labels.labels[cfg.labels.truth_index]);
    } else {
        v.remote = std::make_shared<RemoteScorer>(parse_endpoint(cfg.endpoint));
        v.similarity =
            std::make_shared<SimilarityScorer>(cfg.labels, *v.remote, *v.remote, cfg.temperature);
        v.naturalness =
            std::make_shared<RemoteNaturalnessFallback>(v.remote, v.scene.mesh, v.scene.camera);
        v.canonical_pose = cfg.init_pose;
    }
    return v;
}

// One classified sample inside a report.
struct SampleRecord {
    std::string protocol;
    PoseParams pose;
    double isp = 0.0;
    std::string predicted;
    bool misclassified = false;
};

namespace detail {

inline double classify_fraction(const Victim& victim, const std::vector<PoseParams>& poses,
                                const std::string& protocol, std::vector<SampleRecord>* records) {
    int wrong = 0;
    for (const PoseParams& pose : poses) {
        SimilarityResult r = victim.classify(pose);
        bool miss = r.argmax != victim.labels.truth_index;
        wrong += miss ? 1 : 0;
        if (records)
            records->push_back({protocol, pose, r.isp_loss, victim.labels.labels[r.argmax], miss});
    }
    return static_cast<double>(wrong) / static_cast<double>(poses.size());
}

}  // namespace detail

// ASR over n samples drawn from the optimized distribution N(mu*, sigma*^2 Sigma*).
inline double evaluate_pstar(const Victim& victim, const SearchDistribution<6>& dist,
                             int n_samples, std::uint64_t seed,
                             std::vector<SampleRecord>* records = nullptr) {
    if (n_samples < 1) throw InvalidInput("n_samples must be >= 1");
    Rng rng(seed);
    std::vector<Vec6> zs = sample_latents(dist, n_samples, 1.0, rng);
    std::vector<PoseParams> poses;
    poses.reserve(zs.size());
    for (const Vec6& z : zs) poses.push_back(reparameterize(z, victim.bounds));
    return detail::classify_fraction(victim, poses, "pstar", records);
}

// The single sample at the distribution center.
inline std::pair<bool, PoseParams> evaluate_thetastar(const Victim& victim,
                                                      const SearchDistribution<6>& dist,
                                                      std::vector<SampleRecord>* records = nullptr) {
    PoseParams pose = reparameterize(dist.mean, victim.bounds);
    double frac = detail::classify_fraction(victim, {pose}, "thetastar", records);
    return {frac > 0.5, pose};
}

// ASR over poses drawn uniformly from the bounds box.
inline double evaluate_random(const Victim& victim, int n_samples, std::uint64_t seed,
                              std::vector<SampleRecord>* records = nullptr) {
    if (n_samples < 1) throw InvalidInput("n_samples must be >= 1");
    Rng rng(seed);
    std::vector<PoseParams> poses;
    poses.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        Vec6 theta;
        for (std::size_t j = 0; j < 6; ++j)
            theta[j] = rng.uniform(victim.bounds.theta_min[j], victim.bounds.theta_max[j]);
        poses.push_back(PoseParams::from_vec(theta));
    }
    return detail::classify_fraction(victim, poses, "random", records);
}

// ASR as the sampling spread is scaled: N(mu*, (c sigma*)^2 Sigma*) per scale c.
// Every scale restarts from Rng(seed), so scale 1 reproduces evaluate_pstar
// exactly and scales share their underlying normal draws.
inline std::vector<std::pair<double, double>> sigma_sweep(const Victim& victim,
                                                          const SearchDistribution<6>& dist,
                                                          const std::vector<double>& scales,
                                                          int n_per_scale, std::uint64_t seed) {
    if (n_per_scale < 1) throw InvalidInput("n_per_scale must be >= 1");
    std::vector<std::pair<double, double>> out;
    out.reserve(scales.size());
    for (double scale : scales) {
        if (scale < 0.0) throw InvalidInput("sweep scales must be non-negative");
        Rng rng(seed);
        std::vector<Vec6> zs = sample_latents(dist, n_per_scale, scale, rng);
        std::vector<PoseParams> poses;
        poses.reserve(zs.size());
        for (const Vec6& z : zs) poses.push_back(reparameterize(z, victim.bounds));
        out.emplace_back(scale, detail::classify_fraction(victim, poses, "sweep", nullptr));
    }
    return out;
}

// Exhaustive grid search over the bounds box; the independent oracle the
// attack is judged against. counts[i] == 1 pins dimension i to the box
// midpoint; otherwise samples are evenly spaced including both endpoints.
struct GridSpec {
    std::array<int, 6> counts{36, 9, 5, 1, 1, 1};
    long cell_budget = 200000;
};

struct GridCell {
    PoseParams pose;
    double isp = 0.0;
    int argmax = 0;
};

struct OracleResult {
    PoseParams best_pose;
    double best_isp = -1e300;
    std::vector<GridCell> cells;
};

inline OracleResult brute_force_oracle(const Victim& victim, const GridSpec& spec,
                                       bool keep_cells = true) {
    long total = 1;
    for (int c : spec.counts) {
        if (c < 1) throw InvalidInput("grid counts must be >= 1");
        total *= c;
    }
    if (total > spec.cell_budget)
        throw InvalidInput("grid has " + std::to_string(total) + " cells, over the budget of " +
                           std::to_string(spec.cell_budget));

    std::array<std::vector<double>, 6> axes;
    for (std::size_t d = 0; d < 6; ++d) {
        int n = spec.counts[d];
        double lo = victim.bounds.theta_min[d], hi = victim.bounds.theta_max[d];
        if (n == 1) {
            axes[d].push_back(0.5 * (lo + hi));
        } else {
            for (int i = 0; i < n; ++i)
                axes[d].push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
        }
    }

    OracleResult out;
    if (keep_cells) out.cells.reserve(total);
    std::array<int, 6> idx{};
    for (long cell = 0; cell < total; ++cell) {
        Vec6 theta;
        for (std::size_t d = 0; d < 6; ++d) theta[d] = axes[d][idx[d]];
        PoseParams pose = PoseParams::from_vec(theta);
        SimilarityResult r = victim.classify(pose);
        if (keep_cells) out.cells.push_back({pose, r.isp_loss, r.argmax});
        if (r.isp_loss > out.best_isp) {
            out.best_isp = r.isp_loss;
            out.best_pose = pose;
        }
        for (int d = 5; d >= 0; --d) {
            if (++idx[d] < spec.counts[d]) break;
            idx[d] = 0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization. Distribution files and reports are JSON; doubles are
// emitted with shortest-round-trip formatting, so save/load is lossless.
// ---------------------------------------------------------------------------

inline nlohmann::json pose_to_json(const PoseParams& pose) {
    return nlohmann::json{{"yaw", pose.yaw}, {"pitch", pose.pitch}, {"roll", pose.roll},
                          {"dx", pose.dx},   {"dy", pose.dy},       {"scale", pose.scale}};
}

inline PoseParams pose_from_json(const nlohmann::json& j) {
    return {j.at("yaw").get<double>(), j.at("pitch").get<double>(), j.at("roll").get<double>(),
            j.at("dx").get<double>(),  j.at("dy").get<double>(),    j.at("scale").get<double>()};
}

inline nlohmann::json distribution_to_json(const SearchDistribution<6>& dist) {
    nlohmann::json j;
    j["dimension"] = 6;
    j["mean"] = dist.mean;
    j["step_size"] = dist.step_size;
    j["evolution_path"] = dist.evolution_path;
    j["csa_path"] = dist.csa_path;
    j["iteration"] = dist.iteration;
    nlohmann::json cov = nlohmann::json::array();
    for (std::size_t i = 0; i < 6; ++i) cov.push_back(dist.covariance[i]);
    j["covariance"] = cov;
    return j;
}

inline SearchDistribution<6> distribution_from_json(const nlohmann::json& j) {
    if (j.value("dimension", 0) != 6) throw ParseError("distribution file must have dimension 6");
    SearchDistribution<6> dist;
    dist.mean = j.at("mean").get<Vec6>();
    dist.step_size = j.at("step_size").get<double>();
    dist.evolution_path = j.at("evolution_path").get<Vec6>();
    dist.csa_path = j.value("csa_path", Vec6{});
    dist.iteration = j.at("iteration").get<long>();
    const auto& cov = j.at("covariance");
    if (!cov.is_array() || cov.size() != 6) throw ParseError("covariance must be a 6x6 array");
    for (std::size_t i = 0; i < 6; ++i) {
        auto row = cov[i].get<std::array<double, 6>>();
        for (std::size_t k = 0; k < 6; ++k) dist.covariance[i][k] = row[k];
    }
    return dist;
}

inline void save_distribution(const SearchDistribution<6>& dist, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open for writing: " + path);
    f << distribution_to_json(dist).dump(2) << "\n";
    if (!f) throw Error("write failed: " + path);
}

inline SearchDistribution<6> load_distribution(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return distribution_from_json(j);
}

// Run log: one JSON object per line, fields fixed for the harness.
inline void write_run_log(const std::vector<IterationRecord<6>>& log, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open for writing: " + path);
    for (const auto& rec : log) {
        nlohmann::json j;
        j["iteration"] = rec.iteration;
        j["best_isp"] = rec.best_isp;
        j["mean_isp"] = rec.mean_isp;
        j["best_nat"] = rec.best_nat;
        j["sigma"] = rec.sigma;
        j["mu"] = rec.mu;
        j["sigma_diag"] = rec.sigma_diag;
        j["wall_ms"] = rec.wall_ms;
        f << j.dump() << "\n";
    }
    if (!f) throw Error("write failed: " + path);
}

struct AttackReport {
    bool clean_correct = false;
    double asr_random = 0.0;
    double asr_pstar = 0.0;
    double asr_thetastar = 0.0;
    Vec6 mu_star{};
    Vec6 sigma_star_diag{};
    double step_size_star = 0.0;
    PoseParams theta_star;
    double best_isp = 0.0;
    std::vector<SampleRecord> samples;
    std::string iteration_log_path;
    std::uint64_t seed = 0;
    int budget = 0;
};

inline nlohmann::json report_to_json(const AttackReport& r) {
    nlohmann::json j;
    j["clean_correct"] = r.clean_correct;
    j["asr_random"] = r.asr_random;
    j["asr_pstar"] = r.asr_pstar;
    j["asr_thetastar"] = r.asr_thetastar;
    j["mu_star"] = r.mu_star;
    j["sigma_star_diag"] = r.sigma_star_diag;
    j["step_size_star"] = r.step_size_star;
    j["theta_star"] = pose_to_json(r.theta_star);
    j["best_isp"] = r.best_isp;
    j["iteration_log_path"] = r.iteration_log_path;
    j["seed"] = r.seed;
    j["budget"] = r.budget;
    nlohmann::json samples = nlohmann::json::array();
    for (const SampleRecord& s : r.samples) {
        samples.push_back({{"protocol", s.protocol},
                           {"pose", pose_to_json(s.pose)},
                           {"isp", s.isp},
                           {"predicted", s.predicted},
                           {"misclassified", s.misclassified}});
    }
    j["samples"] = samples;
    return j;
}

// Protocol sub-seeds derived from the run seed; fixed tags keep reports
// reproducible for a given seed.
constexpr std::uint64_t kSeedTagPstar = 1;
constexpr std::uint64_t kSeedTagRandom = 2;
constexpr std::uint64_t kSeedTagSweep = 3;

struct AttackOutcome {
    SearchDistribution<6> dist;
    RunResult<6> run;
    AttackReport report;
};

// Full optimization + evaluation pass. Renders nothing to disk; callers
// persist via write_attack_outputs.
inline AttackOutcome run_attack(const AttackConfig& cfg, const Victim& victim) {
    AttackOutcome out;
    out.dist = init_distribution(cfg.bounds, cfg.init_pose);

    Rng rng(cfg.seed);
    EvolveOptions options;
    options.budget = cfg.budget;
    options.threads = cfg.threads;

    auto evaluate = [&](int, const Vec6& z) -> FitnessRecord {
        PoseParams pose = reparameterize(z, victim.bounds);
        Raster img = victim.render_pose(pose);
        SimilarityResult sim = victim.similarity->score(img);
        auto [score_r, score_p] = victim.naturalness->score(img, pose);
        return {sim.isp_loss, naturalness_loss(score_r, score_p)};
    };
    out.run = evolve(out.dist, cfg.strategy, rng, evaluate, options);

    AttackReport& rep = out.report;
    rep.seed = cfg.seed;
    rep.budget = cfg.budget;
    rep.mu_star = out.dist.mean;
    for (std::size_t i = 0; i < 6; ++i) rep.sigma_star_diag[i] = out.dist.covariance[i][i];
    rep.step_size_star = out.dist.step_size;
    rep.best_isp = out.run.best_isp;
    rep.clean_correct = !victim.misclassified(victim.canonical_pose);
    auto [miss_center, center_pose] = evaluate_thetastar(victim, out.dist, &rep.samples);
    rep.theta_star = center_pose;
    rep.asr_thetastar = miss_center ? 1.0 : 0.0;
    rep.asr_pstar =
        evaluate_pstar(victim, out.dist, 10, derive_seed(cfg.seed, kSeedTagPstar), &rep.samples);
    rep.asr_random =
        evaluate_random(victim, 10, derive_seed(cfg.seed, kSeedTagRandom), &rep.samples);
    return out;
}

inline AttackOutcome run_attack(const AttackConfig& cfg) {
    Victim victim = make_victim(cfg);
    return run_attack(cfg, victim);
}

// Persist distribution, run log and report under cfg.output_dir.
inline void write_attack_outputs(const AttackOutcome& outcome, const AttackConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    std::filesystem::path dir(cfg.output_dir);
    save_distribution(outcome.dist, (dir / "final_dist.json").string());
    write_run_log(outcome.run.log, (dir / "run_log.jsonl").string());
    AttackReport rep = outcome.report;
    rep.iteration_log_path = "run_log.jsonl";
    std::ofstream f(dir / "report.json");
    if (!f) throw Error("cannot open for writing: " + (dir / "report.json").string());
    f << report_to_json(rep).dump(2) << "\n";
    if (!f) throw Error("write failed: " + (dir / "report.json").string());
}

// ---------------------------------------------------------------------------
// Config file loading
// ---------------------------------------------------------------------------

inline AttackConfig AttackConfig::load(const std::string& path) {
    KvDoc doc = KvDoc::parse_file(path);
    AttackConfig cfg;

    cfg.scene_path = doc.str("scene", "path");
    if (std::filesystem::path(cfg.scene_path).is_relative())
        cfg.scene_path =
            (std::filesystem::path(path).parent_path() / cfg.scene_path).lexically_normal().string();

    cfg.labels.labels = doc.strings("labels", "names");
    cfg.labels.truth_index = static_cast<int>(doc.integer_or("labels", "truth_index", 0));
    cfg.labels.prompt_template = doc.str_or("labels", "prompt_template", "a photo of a {}");

    auto pose_from = [](const std::vector<double>& v, const std::string& what) {
        if (v.size() != 6) throw ParseError(what + " must have 6 numbers");
        return PoseParams{v[0], v[1], v[2], v[3], v[4], v[5]};
    };

    if (doc.has_section("anchors"))
        for (const std::string& key : doc.keys("anchors"))
            cfg.anchors[key] = pose_from(doc.numbers("anchors", key), "anchor '" + key + "'");

    if (doc.has("bounds", "theta_min") || doc.has("bounds", "theta_max")) {
        std::vector<double> lo = doc.numbers("bounds", "theta_min");
        std::vector<double> hi = doc.numbers("bounds", "theta_max");
        if (lo.size() != 6 || hi.size() != 6) throw ParseError("bounds must have 6 numbers each");
        cfg.bounds = PoseBounds({lo[0], lo[1], lo[2], lo[3], lo[4], lo[5]},
                                {hi[0], hi[1], hi[2], hi[3], hi[4], hi[5]});
    }

    StrategyParams& s = cfg.strategy;
    s.population_size = static_cast<int>(doc.integer_or("strategy", "population_size", s.population_size));
    s.isp_pool = static_cast<int>(doc.integer_or("strategy", "isp_pool", s.isp_pool));
    s.elite_count = static_cast<int>(doc.integer_or("strategy", "elite_count", s.elite_count));
    if (s.elite_count != static_cast<int>(s.weights.size())) {
        s.weights.assign(s.elite_count, 1.0 / s.elite_count);
        double sumsq = 0.0;
        for (double w : s.weights) sumsq += w * w;
        s.variance_effective = 1.0 / sumsq;
        double n = static_cast<double>(s.dimension);
        s.rankmu_rate = std::min(s.variance_effective / (n * n), 1.0 - s.rank1_rate - 0.01);
    }
    s.rankmu_count = s.elite_count;
    s.path_rate = doc.number_or("strategy", "path_rate", s.path_rate);
    s.rank1_rate = doc.number_or("strategy", "rank1_rate", s.rank1_rate);
    s.rankmu_rate = doc.number_or("strategy", "rankmu_rate", s.rankmu_rate);
    s.sigma_decay = doc.number_or("strategy", "sigma_decay", s.sigma_decay);
    s.nat_weight = doc.number_or("strategy", "nat_weight", s.nat_weight);
    std::string selection = doc.str_or("strategy", "selection", "two-stage");
    if (selection == "two-stage") s.selection = SelectionMode::TwoStage;
    else if (selection == "scalarized") s.selection = SelectionMode::Scalarized;
    else throw ParseError("strategy selection must be 'two-stage' or 'scalarized'");
    std::string rule = doc.str_or("strategy", "step_rule", "decay");
    if (rule == "decay") s.step_rule = StepSizeRule::ExponentialDecay;
    else if (rule == "csa") s.step_rule = StepSizeRule::Csa;
    else throw ParseError("strategy step_rule must be 'decay' or 'csa'");

    std::string kind = doc.str_or("provider", "kind", "synthetic");
    if (kind == "synthetic") cfg.provider = ProviderKind::Synthetic;
    else if (kind == "remote") cfg.provider = ProviderKind::Remote;
    else throw ParseError("provider kind must be 'synthetic' or 'remote'");
    cfg.endpoint = doc.str_or("provider", "endpoint", "");
    cfg.encoder.grid = static_cast<int>(doc.integer_or("provider", "grid", cfg.encoder.grid));
    cfg.encoder.embed_dim =
        static_cast<int>(doc.integer_or("provider", "embed_dim", cfg.encoder.embed_dim));
    cfg.encoder.projection_seed = static_cast<std::uint64_t>(
        doc.integer_or("provider", "projection_seed",
                       static_cast<long>(cfg.encoder.projection_seed)));
    cfg.temperature = doc.number_or("provider", "temperature", 1.0);

    cfg.budget = static_cast<int>(doc.integer_or("run", "budget", 15));
    cfg.seed = static_cast<std::uint64_t>(doc.integer_or("run", "seed", 0));
    cfg.threads = static_cast<int>(doc.integer_or("run", "threads", 1));
    cfg.output_dir = doc.str_or("run", "output_dir", "out");
    if (doc.has("run", "init_pose"))
        cfg.init_pose = pose_from(doc.numbers("run", "init_pose"), "init_pose");

    cfg.validate();
    return cfg;
}

}  // namespace advpose
