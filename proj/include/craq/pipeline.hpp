#pragma once

// Image -> mask -> skeleton -> graph -> node types -> edge fits -> features,
// plus the versioned configuration document and graph JSON.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "craq/gin.hpp"
#include "craq/imaging.hpp"
#include "craq/stats.hpp"
#include "json.hpp"

namespace craq {

struct LearnSettings {
    int folds = 10;
    bool grouped = true;
    double c_reg = 1.0;
    int cv_epochs = 100;  // per-fold GIN epochs; the final model uses gin.epochs
    int crops = 10;
    int crop_size = 0;    // 0: half the source's smaller side
};

struct PipelineConfig {
    static constexpr int kVersion = 1;
    SegmentationParams segmentation;
    int border_margin = 2;
    double merge_dist = 5.0;
    int order = 4;
    StatsParams stats;
    GinConfig gin;
    LearnSettings learn;
    std::uint64_t seed = 0;

    void validate() const {
        segmentation.validate();
        if (border_margin < 0) throw Error("border_margin must be >= 0");
        if (!(merge_dist >= 0)) throw Error("merge_dist must be >= 0");
        if (order < 1 || order > kMaxOrder) throw Error("order must be in 1.." + std::to_string(kMaxOrder));
        if (stats.orientation_bins < 2) throw Error("orientation_bins must be >= 2");
        if (stats.curvature_samples < 1) throw Error("curvature_samples must be >= 1");
        gin.validate();
        if (learn.folds < 2) throw Error("folds must be >= 2");
        if (!(learn.c_reg > 0)) throw Error("c_reg must be positive");
        if (learn.cv_epochs < 0) throw Error("cv_epochs must be >= 0");
        if (learn.crops < 1) throw Error("crops must be >= 1");
        if (learn.crop_size < 0) throw Error("crop_size must be >= 0");
    }

    /// GIN settings with the seed taken from the root seed.
    GinConfig gin_config() const {
        GinConfig g = gin;
        g.seed = seed;
        return g;
    }
};

namespace detail {

template <class F>
void read_object(const nlohmann::json& j, const std::string& where, F&& on_key) {
    if (!j.is_object()) throw Error(where + " must be an object");
    for (const auto& [key, val] : j.items())
        if (!on_key(key, val)) throw Error("unknown key '" + key + "' in " + where);
}

}  // namespace detail

inline nlohmann::json to_json(const PipelineConfig& c) {
    auto gin = to_json(c.gin);
    gin.erase("seed");
    return {{"version", PipelineConfig::kVersion},
            {"seed", c.seed},
            {"segmentation",
             {{"strel_radius", c.segmentation.strel_radius},
              {"adapt_window", c.segmentation.adapt_window},
              {"adapt_sensitivity", c.segmentation.adapt_sensitivity},
              {"min_area", c.segmentation.min_area}}},
            {"graph", {{"border_margin", c.border_margin}, {"merge_dist", c.merge_dist}}},
            {"fit", {{"order", c.order}}},
            {"stats", {{"orientation_bins", c.stats.orientation_bins}, {"curvature_samples", c.stats.curvature_samples}}},
            {"gin", gin},
            {"learn",
             {{"folds", c.learn.folds},
              {"grouped", c.learn.grouped},
              {"c_reg", c.learn.c_reg},
              {"cv_epochs", c.learn.cv_epochs},
              {"crops", c.learn.crops},
              {"crop_size", c.learn.crop_size}}}};
}

/// Parses a configuration document. Missing sections keep their defaults;
/// unknown keys and a missing or different version are errors.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("version")) throw Error("config: missing version");
    if (j.at("version").get<int>() != PipelineConfig::kVersion)
        throw Error("config: unsupported version " + j.at("version").dump());
    PipelineConfig c;
    detail::read_object(j, "config", [&](const std::string& k, const nlohmann::json& v) {
        if (k == "version") return true;
        if (k == "seed") {
            c.seed = v.get<std::uint64_t>();
        } else if (k == "segmentation") {
            detail::read_object(v, "segmentation", [&](const std::string& k2, const nlohmann::json& v2) {
                if (k2 == "strel_radius") c.segmentation.strel_radius = v2.get<int>();
                else if (k2 == "adapt_window") c.segmentation.adapt_window = v2.get<int>();
                else if (k2 == "adapt_sensitivity") c.segmentation.adapt_sensitivity = v2.get<double>();
                else if (k2 == "min_area") c.segmentation.min_area = v2.get<int>();
                else return false;
                return true;
            });
        } else if (k == "graph") {
            detail::read_object(v, "graph", [&](const std::string& k2, const nlohmann::json& v2) {
                if (k2 == "border_margin") c.border_margin = v2.get<int>();
                else if (k2 == "merge_dist") c.merge_dist = v2.get<double>();
                else return false;
                return true;
            });
        } else if (k == "fit") {
            detail::read_object(v, "fit", [&](const std::string& k2, const nlohmann::json& v2) {
                if (k2 != "order") return false;
                c.order = v2.get<int>();
                return true;
            });
        } else if (k == "stats") {
            detail::read_object(v, "stats", [&](const std::string& k2, const nlohmann::json& v2) {
                if (k2 == "orientation_bins") c.stats.orientation_bins = v2.get<int>();
                else if (k2 == "curvature_samples") c.stats.curvature_samples = v2.get<int>();
                else return false;
                return true;
            });
        } else if (k == "gin") {
            if (v.is_object() && v.contains("seed")) throw Error("config: gin.seed is not allowed; use the root seed");
            nlohmann::json merged = to_json(c.gin);
            merged.erase("seed");
            if (!v.is_object()) throw Error("gin must be an object");
            for (const auto& [k2, v2] : v.items()) merged[k2] = v2;
            c.gin = gin_config_from_json(merged);
        } else if (k == "learn") {
            detail::read_object(v, "learn", [&](const std::string& k2, const nlohmann::json& v2) {
                if (k2 == "folds") c.learn.folds = v2.get<int>();
                else if (k2 == "grouped") c.learn.grouped = v2.get<bool>();
                else if (k2 == "c_reg") c.learn.c_reg = v2.get<double>();
                else if (k2 == "cv_epochs") c.learn.cv_epochs = v2.get<int>();
                else if (k2 == "crops") c.learn.crops = v2.get<int>();
                else if (k2 == "crop_size") c.learn.crop_size = v2.get<int>();
                else return false;
                return true;
            });
        } else {
            return false;
        }
        return true;
    });
    c.gin.seed = 0;
    c.validate();
    return c;
}

// ---- running the pipeline ----

struct ImageAnalysis {
    BinaryMask mask;
    BinaryMask skeleton;
    CrackGraph graph;
    NodeTypeMap types;
    std::vector<EdgeFit> fits;
    std::optional<StatFeatures> features;
    std::vector<std::string> warnings;
};

/// Fits every edge; an edge whose chain cannot be fitted keeps no pieces and
/// is reported in `warnings`.
inline std::vector<EdgeFit> fit_edges(const CrackGraph& g, int order, std::vector<std::string>* warnings = nullptr) {
    std::vector<EdgeFit> fits;
    for (const auto& e : g.edges) {
        EdgeFit f{e.id, {}};
        try {
            f.pieces = fit_chain(e.chain, order);
        } catch (const Error& err) {
            if (warnings) warnings->push_back("edge " + std::to_string(e.id) + ": " + err.what());
        }
        fits.push_back(std::move(f));
    }
    return fits;
}

/// Graph stage alone: skeleton, extraction, border removal, node merging.
inline CrackGraph graph_from_mask(const BinaryMask& mask, const PipelineConfig& cfg, BinaryMask* skeleton_out = nullptr) {
    BinaryMask skel = skeletonize(mask);
    CrackGraph g = extract_graph(skel);
    g = remove_border_nodes(g, cfg.border_margin);
    g = merge_close_nodes(g, cfg.merge_dist);
    if (skeleton_out) *skeleton_out = std::move(skel);
    return g;
}

inline ImageAnalysis analyse(const GrayImage& img, const PipelineConfig& cfg) {
    cfg.validate();
    ImageAnalysis a;
    a.mask = segment(img, cfg.segmentation);
    a.graph = graph_from_mask(a.mask, cfg, &a.skeleton);
    a.types = classify_nodes(a.graph);
    a.fits = fit_edges(a.graph, cfg.order, &a.warnings);
    try {
        a.features = compute_features(a.graph, a.fits, a.types, cfg.stats);
    } catch (const Error& e) {
        a.warnings.push_back(std::string("features: ") + e.what());
    }
    return a;
}

// ---- graph JSON ----

inline nlohmann::json poly_to_json(const PolyEdge& p) {
    return {{"n", p.order},
            {"coeffs", p.coeffs},
            {"chord", {p.start.x, p.start.y, p.end.x, p.end.y}},
            {"rms", p.residual_rms}};
}

inline PolyEdge poly_from_json(const nlohmann::json& j) {
    PolyEdge p;
    p.order = j.at("n").get<int>();
    p.coeffs = j.at("coeffs").get<std::vector<double>>();
    const auto chord = j.at("chord").get<std::vector<double>>();
    if (chord.size() != 4 || static_cast<int>(p.coeffs.size()) != p.order + 1) throw Error("malformed poly entry");
    p.start = {chord[0], chord[1]};
    p.end = {chord[2], chord[3]};
    p.chord_len = norm(p.end - p.start);
    p.chord_angle = std::atan2(p.end.y - p.start.y, p.end.x - p.start.x);
    p.residual_rms = j.value("rms", 0.0);
    return p;
}

/// `fits` and `types` are optional; an edge split into two pieces stores
/// "poly" as an array, a single piece as one object.
inline nlohmann::json graph_to_json(const CrackGraph& g, const NodeTypeMap* types = nullptr, const std::vector<EdgeFit>* fits = nullptr,
                                    bool chains = true) {
    nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
    for (const auto& n : g.nodes) {
        nlohmann::json jn{{"id", n.id}, {"x", n.x}, {"y", n.y}, {"degree", n.degree}};
        nlohmann::json type = nullptr;
        if (types)
            if (auto it = types->find(n.id); it != types->end()) type = std::string(1, to_char(it->second));
        jn["type"] = type;
        if (n.artificial) jn["artificial"] = true;
        nodes.push_back(std::move(jn));
    }
    for (const auto& e : g.edges) {
        nlohmann::json je{{"id", e.id}, {"u", e.u == kNoNode ? nlohmann::json(nullptr) : nlohmann::json(e.u)},
                          {"v", e.v == kNoNode ? nlohmann::json(nullptr) : nlohmann::json(e.v)}};
        if (chains) {
            nlohmann::json c = nlohmann::json::array();
            for (auto p : e.chain) c.push_back({p.x, p.y});
            je["chain"] = std::move(c);
        }
        if (fits) {
            const auto& pieces = (*fits)[static_cast<std::size_t>(e.id)].pieces;
            if (pieces.size() == 1) {
                je["poly"] = poly_to_json(pieces.front());
            } else if (!pieces.empty()) {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& p : pieces) arr.push_back(poly_to_json(p));
                je["poly"] = std::move(arr);
            }
        }
        edges.push_back(std::move(je));
    }
    return {{"width", g.width}, {"height", g.height}, {"nodes", nodes}, {"edges", edges}};
}

struct GraphDocument {
    CrackGraph graph;
    std::vector<EdgeFit> fits;  // empty pieces where no "poly" was stored
    bool has_chains = true;
};

inline GraphDocument graph_from_json(const nlohmann::json& j) {
    GraphDocument d;
    auto& g = d.graph;
    g.width = j.at("width").get<int>();
    g.height = j.at("height").get<int>();
    for (const auto& jn : j.at("nodes")) {
        Node n;
        n.id = jn.at("id").get<int>();
        n.x = jn.at("x").get<int>();
        n.y = jn.at("y").get<int>();
        n.artificial = jn.value("artificial", false);
        if (n.id != static_cast<int>(g.nodes.size())) throw Error("node ids must be 0..n-1 in order");
        g.nodes.push_back(std::move(n));
    }
    auto end = [&](const nlohmann::json& v) {
        if (v.is_null()) return kNoNode;
        const int id = v.get<int>();
        if (id < 0 || id >= static_cast<int>(g.nodes.size())) throw Error("edge refers to unknown node");
        return id;
    };
    for (const auto& je : j.at("edges")) {
        Edge e;
        e.id = je.at("id").get<int>();
        if (e.id != static_cast<int>(g.edges.size())) throw Error("edge ids must be 0..m-1 in order");
        e.u = end(je.at("u"));
        e.v = end(je.at("v"));
        if (je.contains("chain")) {
            for (const auto& p : je.at("chain")) e.chain.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        } else {
            d.has_chains = false;
        }
        EdgeFit f{e.id, {}};
        if (je.contains("poly")) {
            const auto& jp = je.at("poly");
            if (jp.is_array())
                for (const auto& x : jp) f.pieces.push_back(poly_from_json(x));
            else
                f.pieces.push_back(poly_from_json(jp));
        }
        d.fits.push_back(std::move(f));
        g.edges.push_back(std::move(e));
    }
    recompute_degrees(g);
    for (const auto& jn : j.at("nodes"))
        if (jn.contains("degree") && jn.at("degree").get<int>() != g.nodes[static_cast<std::size_t>(jn.at("id").get<int>())].degree)
            throw Error("stored node degree disagrees with the edge list");
    return d;
}

}  // namespace craq
