// Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
// Tolerances and budgets are pinned in code; the shared 20-seed attack run
// feeds the end-to-end, ordering and sweep criteria.

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "advpose/advpose.hpp"

using namespace advpose;

namespace {

const std::string kConfig = std::string(ADVPOSE_ASSETS_DIR) + "/cube_attack.toml";
constexpr int kSeeds = 20;

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void report(int criterion, const char* name, bool ok, const std::string& detail) {
    std::printf("[ACCEPTANCE] %2d %-34s %s  (%s)\n", criterion, name, ok ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    EXPECT_TRUE(ok) << "criterion " << criterion << " " << name << ": " << detail;
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), format, a, b, c, d);
    return buf;
}

const AttackConfig& config() {
    static AttackConfig cfg = AttackConfig::load(kConfig);
    return cfg;
}

const Victim& victim() {
    static Victim v = make_victim(config());
    return v;
}

const OracleResult& oracle() {
    static OracleResult o = brute_force_oracle(victim(), GridSpec{}, false);
    return o;
}

const std::vector<AttackOutcome>& outcomes() {
    static std::vector<AttackOutcome> all = [] {
        std::vector<AttackOutcome> out;
        out.reserve(kSeeds);
        for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
            AttackConfig cfg = config();
            cfg.seed = seed;
            out.push_back(run_attack(cfg, victim()));
        }
        return out;
    }();
    return all;
}

}  // namespace

TEST(Acceptance, C01_SingleStepOracle) {
    Stopwatch watch;
    StrategyParams params = default_strategy(6);

    SearchDistribution<6> dist;
    dist.mean = Vec6{0.1, -0.2, 0.3, 0.0, -0.1, 0.2};
    dist.step_size = 0.5;
    dist.evolution_path = Vec6{0.05, 0.0, -0.1, 0.2, 0.0, 0.1};
    dist.covariance = Mat6::identity();
    dist.covariance[0][0] = 1.5;
    dist.covariance[1][2] = dist.covariance[2][1] = 0.3;

    // Fixed population with a known two-stage ranking outcome: first by isp
    // (descending), then the most .nat-favored five of that pool.
    std::vector<Vec6> zs;
    std::vector<FitnessRecord> records;
    Rng gen(404);
    for (int i = 0; i < 20; ++i) {
        Vec6 z;
        for (int j = 0; j < 6; ++j) z[j] = dist.mean[j] + 0.5 * gen.normal();
        zs.push_back(z);
        records.push_back({2.0 - 0.1 * i, -5.0 + 0.2 * i});
    }
    RankedPopulation ranked = select(records, params.isp_pool, params.elite_count,
                                     SelectionMode::TwoStage, params.nat_weight);
    std::vector<Vec6> selected;
    for (int idx : ranked.selected) selected.push_back(zs[idx]);

    Vec6 lib_mean = update_mean(selected, params);
    Vec6 lib_path = update_evolution_path(dist, lib_mean, params);
    SearchDistribution<6> staged = dist;
    staged.evolution_path = lib_path;
    Mat6 lib_cov = update_covariance(staged, selected, dist.mean, params);
    double lib_sigma = update_step_size(dist, params);

    // Straight-line transcription of the update rules.
    double c = 0.4, mu_w = 5.0, sigma = 0.5, e1 = 2.0 / 36.0, emu = 5.0 / 36.0;
    double mu2[6] = {0};
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 6; ++j) mu2[j] += 0.2 * selected[i][j];
    double path2[6];
    for (int j = 0; j < 6; ++j)
        path2[j] = (1.0 - c) * dist.evolution_path[j] +
                   std::sqrt(c * (2.0 - c)) * std::sqrt(mu_w) * (mu2[j] - dist.mean[j]) / sigma;
    double cov2[6][6];
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            cov2[i][j] = (1.0 - e1 - emu) * dist.covariance[i][j] + e1 * path2[i] * path2[j];
            for (int s = 0; s < 5; ++s)
                cov2[i][j] += emu * 0.2 * (selected[s][i] - dist.mean[i]) / sigma *
                              (selected[s][j] - dist.mean[j]) / sigma;
        }
    double sigma2 = 0.9 * sigma;

    double worst = 0.0;
    for (int j = 0; j < 6; ++j) {
        worst = std::max(worst, std::abs(lib_mean[j] - mu2[j]));
        worst = std::max(worst, std::abs(lib_path[j] - path2[j]));
    }
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) worst = std::max(worst, std::abs(lib_cov[i][j] - cov2[i][j]));
    worst = std::max(worst, std::abs(lib_sigma - sigma2));

    double secs = watch.seconds();
    report(1, "single-step transcription oracle", worst <= 1e-12 && secs < 1.0,
           fmt("max |delta| = %.2e, %.2fs", worst, secs));
}

TEST(Acceptance, C02_SphereConvergence) {
    Stopwatch watch;
    const Vec6 target{0.3, -0.4, 0.2, 0.1, -0.2, 0.25};
    int converged = 0;
    double worst_err = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SearchDistribution<6> dist;
        dist.step_size = 0.5;
        StrategyParams params = default_strategy(6);
        Rng rng(seed);
        EvolveOptions opt;
        opt.budget = 200;
        evolve(dist, params, rng,
               [&](int, const Vec6& z) -> FitnessRecord {
                   Vec6 d = z - target;
                   return {-dot(d, d), 0.0};
               },
               opt);
        double err = norm(dist.mean - target);
        worst_err = std::max(worst_err, err);
        if (err < 1e-2) ++converged;
    }
    double secs = watch.seconds();
    report(2, "sphere convergence 10/10 seeds", converged == 10 && secs < 10.0,
           fmt("%.0f/10 converged, worst |mu - z*| = %.2e, %.2fs", converged, worst_err, secs));
}

TEST(Acceptance, C03_BoundsSafety) {
    Stopwatch watch;
    PoseBounds bounds = PoseBounds::standard();
    Rng rng(2024);
    long violations = 0;
    const long n = 1000000;
    for (long i = 0; i < n; ++i) {
        Vec6 z;
        for (int j = 0; j < 6; ++j) z[j] = rng.normal();
        Vec6 theta = reparameterize(z, bounds).to_vec();
        for (int j = 0; j < 6; ++j)
            if (theta[j] < bounds.theta_min[j] || theta[j] > bounds.theta_max[j]) ++violations;
    }
    double secs = watch.seconds();
    report(3, "bounds safety over 1e6 latents", violations == 0 && secs < 5.0,
           fmt("%.0f violations, %.2fs", static_cast<double>(violations), secs));
}

TEST(Acceptance, C04_AttackReachesOracleOptimum) {
    Stopwatch watch;
    double grid_best = oracle().best_isp;
    std::vector<double> ratios;
    for (const AttackOutcome& out : outcomes()) ratios.push_back(out.run.best_isp / grid_best);
    std::sort(ratios.begin(), ratios.end());
    double median = 0.5 * (ratios[kSeeds / 2 - 1] + ratios[kSeeds / 2]);
    double secs = watch.seconds();
    report(4, "attack vs brute-force oracle", median >= 0.95 && secs < 300.0,
           fmt("median best/oracle = %.4f (min %.4f), grid best %.4f, %.1fs", median,
               ratios.front(), grid_best, secs));
}

TEST(Acceptance, C05_ProtocolOrdering) {
    Stopwatch watch;
    double mean_t = 0.0, mean_p = 0.0, mean_r = 0.0;
    for (const AttackOutcome& out : outcomes()) {
        mean_t += out.report.asr_thetastar;
        mean_p += out.report.asr_pstar;
        mean_r += out.report.asr_random;
    }
    mean_t /= kSeeds;
    mean_p /= kSeeds;
    mean_r /= kSeeds;
    bool ok = mean_t >= mean_p - 0.05 && mean_p >= mean_r - 0.05;
    double secs = watch.seconds();
    report(5, "ASR ordering theta* >= p* >= random", ok && secs < 300.0,
           fmt("theta* %.3f, p* %.3f, random %.3f", mean_t, mean_p, mean_r));
}

TEST(Acceptance, C06_SigmaScalingSweep) {
    Stopwatch watch;
    const std::vector<double> scales{1.0, 2.0, 4.0, 8.0};
    std::vector<double> mean_asr(scales.size(), 0.0);
    for (std::size_t i = 0; i < outcomes().size(); ++i) {
        auto rows = sigma_sweep(victim(), outcomes()[i].dist, scales, 100,
                                derive_seed(i, kSeedTagSweep));
        for (std::size_t s = 0; s < scales.size(); ++s) mean_asr[s] += rows[s].second;
    }
    for (double& v : mean_asr) v /= kSeeds;
    bool ok = true;
    for (std::size_t s = 1; s < mean_asr.size(); ++s)
        if (mean_asr[s] > mean_asr[s - 1] + 0.05) ok = false;
    double secs = watch.seconds();
    report(6, "sigma sweep ASR non-increasing", ok && secs < 300.0,
           fmt("scales 1/2/4/8 -> %.3f %.3f %.3f %.3f", mean_asr[0], mean_asr[1], mean_asr[2],
               mean_asr[3]));
}

TEST(Acceptance, C07_SoftmaxIspCorrectness) {
    Rng rng(555);
    double worst_sum = 0.0, worst_shift = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform() * 15);
        std::vector<double> s(n);
        for (double& x : s) x = rng.uniform(-1.0, 1.0);
        SimilarityResult r = isp_from_similarities(s, 0);
        double sum = 0.0;
        for (double p : r.probabilities) sum += p;
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));

        std::vector<double> shifted = s;
        double c = rng.uniform(-5.0, 5.0);
        for (double& x : shifted) x += c;
        SimilarityResult r2 = isp_from_similarities(shifted, 0);
        for (int i = 0; i < n; ++i)
            worst_shift = std::max(worst_shift, std::abs(r.probabilities[i] - r2.probabilities[i]));
    }

    double worst_uniform = 0.0;
    for (int n : {2, 3, 5, 10, 100}) {
        SimilarityResult r = isp_from_similarities(std::vector<double>(n, 0.123), 0);
        worst_uniform = std::max(worst_uniform, std::abs(r.isp_loss - std::log(double(n))));
    }

    bool ok = worst_sum <= 1e-9 && worst_shift <= 1e-9 && worst_uniform <= 1e-12;
    report(7, "softmax/ISP correctness", ok,
           fmt("sum err %.1e, shift err %.1e, ln N err %.1e", worst_sum, worst_shift,
               worst_uniform));
}

TEST(Acceptance, C08_CovarianceHealth) {
    const Vec6 target{0.3, -0.4, 0.2, 0.1, -0.2, 0.25};
    SearchDistribution<6> dist;
    dist.step_size = 0.5;
    StrategyParams params = default_strategy(6);
    Rng rng(77);
    EvolveOptions opt;
    opt.budget = 200;
    double worst_asym = 0.0, worst_eig = 1e300;
    long checked = 0;
    evolve(dist, params, rng,
           [&](int, const Vec6& z) -> FitnessRecord {
               Vec6 d = z - target;
               return {-dot(d, d), 0.0};
           },
           opt,
           std::function<void(const SearchDistribution<6>&, const IterationRecord<6>&)>(
               [&](const SearchDistribution<6>& d, const IterationRecord<6>&) {
                   worst_asym = std::max(worst_asym, max_abs_asymmetry(d.covariance));
                   worst_eig = std::min(worst_eig, min_eigenvalue(d.covariance));
                   ++checked;
               }));
    bool ok = checked == 200 && worst_asym <= 1e-12 && worst_eig >= 1e-12;
    report(8, "covariance health over 200 iters", ok,
           fmt("max asym %.1e, min eig %.1e over %.0f iters", worst_asym, worst_eig,
               static_cast<double>(checked)));
}

TEST(Acceptance, C09_RenderDeterminismAndEquivariance) {
    const Scene& scene = victim().scene;
    PoseParams canonical = victim().canonical_pose;

    Raster a = render(scene.mesh, canonical, scene.background, scene.camera);
    Raster b = render(scene.mesh, canonical, scene.background, scene.camera);
    bool deterministic = a == b;

    PoseParams identity{0, 0, 0, 0, 0, 1.0};
    Rng rng(99);
    int exact = 0;
    for (int trial = 0; trial < 50; ++trial) {
        PoseParams pose{rng.uniform(0, 360),    rng.uniform(160, 200), rng.uniform(80, 100),
                        rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(0.5, 1.5)};
        Raster direct = render(scene.mesh, pose, scene.background, scene.camera);
        Mesh pre = scene.mesh;
        pre.vertices =
            apply_transform(to_rigid_transform(pose), scene.mesh.vertices, scene.mesh.aabb_centroid());
        Raster staged = render(pre, identity, scene.background, scene.camera);
        if (direct == staged) ++exact;
    }
    report(9, "render determinism + equivariance", deterministic && exact == 50,
           fmt("repeat identical: %.0f, equivariant poses %.0f/50", deterministic ? 1.0 : 0.0,
               static_cast<double>(exact)));
}

TEST(Acceptance, C10_WireProtocolConformance) {
    Stopwatch watch;
    bool ok = true;
    std::string note = "all round trips green";

    Raster img(16, 16, 30, 60, 90);
    img.at(3, 4)[0] = 250;

    try {
        {
            StubServer server;
            RemoteConfig cfg;
            cfg.port = server.start();
            cfg.retries = 0;
            RemoteScorer client(cfg);
            Embedding e1 = client.embed_image(img);
            Embedding e2 = client.embed_image(img);
            Embedding t = client.embed_text("a photo of a box");
            auto [r, p] = client.score(img, PoseParams{});
            double n = 0.0;
            for (double v : e1) n += v * v;
            if (e1 != e2 || e1.size() != 64 || t.size() != 64) {
                ok = false;
                note = "embed round trip mismatch";
            }
            if (std::abs(std::sqrt(n) - 1.0) > 1e-9 || r < 1.0 || r > 5.0 || p < 1.0 || p > 5.0) {
                ok = false;
                note = "embed norm or score range violated";
            }
        }
        if (ok) {
            StubServerOptions opt;
            opt.text_dim = 32;
            StubServer server(opt);
            RemoteConfig cfg;
            cfg.port = server.start();
            cfg.retries = 0;
            RemoteScorer client(cfg);
            client.embed_image(img);
            try {
                client.embed_text("x");
                ok = false;
                note = "dimension mismatch not rejected";
            } catch (const ProtocolError&) {
            }
        }
        if (ok) {
            StubServerOptions opt;
            opt.norm_scale = 2.0;
            StubServer server(opt);
            RemoteConfig cfg;
            cfg.port = server.start();
            cfg.retries = 0;
            RemoteScorer client(cfg);
            Embedding e = client.embed_image(img);
            double n = 0.0;
            for (double v : e) n += v * v;
            if (std::abs(std::sqrt(n) - 1.0) > 1e-9 || client.normalized_responses() != 1) {
                ok = false;
                note = "non-unit response not normalized";
            }
        }
    } catch (const std::exception& e) {
        ok = false;
        note = e.what();
    }
    double secs = watch.seconds();
    report(10, "wire protocol conformance", ok && secs < 10.0, note + fmt(", %.2fs", secs));
}
