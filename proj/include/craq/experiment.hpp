#pragma once

// Synthetic classification study: five crack families, a few
// source images each, augmented into patches, then grouped cross-validation
// of three SVM variants (statistical features, GIN embeddings, both).

#include <atomic>
#include <cstdio>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "craq/learn.hpp"
#include "craq/pipeline.hpp"
#include "craq/synth.hpp"

namespace craq {

struct CorpusOptions {
    std::vector<Family> families = {Family::Grid, Family::Honeycomb, Family::Voronoi, Family::BranchingTree, Family::Spiral};
    int sources_per_family = 8;
    int source_size = 320;
    int crops = 9;  // 0 keeps whole sources
    int crop_size = 160;
    std::optional<double> density, jitter;  // fixed values; unset draws per source
    std::uint64_t seed = 0;
};

struct CorpusSample {
    std::string name;
    GrayImage image;
    int label = 0;  // family index
    int group = 0;  // source index
};

/// Unless fixed, each source draws its own density and jitter so that samples
/// of one family are not copies of each other.
inline std::vector<CorpusSample> build_corpus(const CorpusOptions& opt) {
    if (opt.sources_per_family < 1) throw Error("sources_per_family must be >= 1");
    if (opt.crops < 0) throw Error("crops must be >= 0");
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> density(0.8, 1.25), jitter(0.6, 1.4);
    std::vector<CorpusSample> out;
    int group = 0;
    for (Family f : opt.families) {
        const auto fi = static_cast<std::size_t>(f);
        for (int s = 0; s < opt.sources_per_family; ++s, ++group) {
            SyntheticSpec spec;
            spec.family = f;
            spec.size = opt.source_size;
            spec.density = density(rng);
            spec.jitter = jitter(rng);
            spec.seed = rng();
            if (opt.density) spec.density = *opt.density;
            if (opt.jitter) spec.jitter = *opt.jitter;
            const std::uint64_t crop_seed = rng();
            char name[64];
            if (opt.crops == 0) {
                std::snprintf(name, sizeof name, "%s-%02d", kFamilyNames[fi], s);
                out.push_back({name, generate(spec), static_cast<int>(f), group});
                continue;
            }
            const auto patches = augment(generate(spec), static_cast<int>(f), group, opt.crops, opt.crop_size, crop_seed);
            for (std::size_t k = 0; k < patches.size(); ++k) {
                std::snprintf(name, sizeof name, "%s-%02d-%02zu", kFamilyNames[fi], s, k);
                out.push_back({name, patches[k].image, patches[k].label, patches[k].group});
            }
        }
    }
    return out;
}

struct PatchFeatures {
    std::vector<double> stats;
    GinGraph graph;
    std::vector<std::string> warnings;
};

/// Runs the pipeline on one patch. A patch without a usable network gets
/// zero statistics and a single isolated node, so it stays in the study.
inline PatchFeatures patch_features(const GrayImage& img, const PipelineConfig& cfg) {
    PatchFeatures p;
    const auto a = analyse(img, cfg);
    p.warnings = a.warnings;
    if (a.features) {
        const auto arr = a.features->to_array();
        p.stats.assign(arr.begin(), arr.end());
    } else {
        p.stats.assign(StatFeatures::kSize, 0.0);
    }
    p.graph = GinGraph::from_crack_graph(a.graph);
    if (p.graph.size() == 0) {
        p.graph = GinGraph::from_edges(1, {});
        p.warnings.push_back("empty graph replaced by a single node");
    }
    return p;
}

inline std::vector<PatchFeatures> corpus_features(const std::vector<CorpusSample>& corpus, const PipelineConfig& cfg, int jobs = 1) {
    std::vector<PatchFeatures> out(corpus.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < corpus.size(); i = next++) out[i] = patch_features(corpus[i].image, cfg);
    };
    const int threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(1, corpus.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

struct ExperimentResult {
    CvResult stats, gnn, combined;
};

/// Per fold: a GIN is trained on the training graphs for cfg.learn.cv_epochs
/// epochs, its embeddings feed the GNN and combined SVMs. Nothing computed on
/// held-out samples reaches training.
inline ExperimentResult run_experiment(const std::vector<PatchFeatures>& data, const std::vector<int>& labels,
                                       const std::vector<int>& groups, const PipelineConfig& cfg, int jobs = 1) {
    cfg.validate();
    if (data.size() != labels.size() || data.size() != groups.size()) throw Error("features, labels and groups differ in length");
    GinConfig gin = cfg.gin_config();
    gin.epochs = cfg.learn.cv_epochs;
    const SvmParams svm{cfg.learn.c_reg};
    const CvOptions opt{cfg.learn.folds, cfg.learn.grouped, cfg.seed, jobs};

    auto results = cross_validate(labels, groups, opt, 3, [&](const auto& train, const auto& test) {
        std::vector<GinGraph> graphs;
        std::vector<int> ys;
        for (auto i : train) {
            graphs.push_back(data[i].graph);
            ys.push_back(labels[i]);
        }
        const GinModel model = craq::train(graphs, ys, gin);
        std::vector<Eigen::VectorXd> emb(data.size());
        for (auto i : train) emb[i] = embed(model, data[i].graph);
        for (auto i : test) emb[i] = embed(model, data[i].graph);

        auto sample = [&](std::size_t i, int variant) {
            Sample s{{}, labels[i], groups[i]};
            if (variant != 1) s.features = data[i].stats;
            if (variant != 0) s.features.insert(s.features.end(), emb[i].data(), emb[i].data() + emb[i].size());
            return s;
        };
        std::vector<std::vector<int>> out;
        for (int v = 0; v < 3; ++v) {
            std::vector<Sample> tr;
            for (auto i : train) tr.push_back(sample(i, v));
            const auto m = train_svm(tr, svm);
            std::vector<int> pred;
            for (auto i : test) pred.push_back(predict(m, sample(i, v).features).label);
            out.push_back(std::move(pred));
        }
        return out;
    });
    return {results[0], results[1], results[2]};
}

}  // namespace craq
