#pragma once

// Graph Isomorphism Network used as a trainable whole-graph feature
// extractor. Layer update:
//   h_v <- MLP((1 - eps) h_v + sum_{u in N(v)} h_u)
// with sum readout per layer, the readouts concatenated into the embedding.
// Training is hand-differentiated, full double precision, single-threaded.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "craq/graph.hpp"
#include "json.hpp"

namespace craq {

enum class EpsilonMode { FixedZero, Learnable };
enum class NodeFeatures { DegreeOneHot, Constant };

inline constexpr int kMaxGinNodes = 20000;

struct GinConfig {
    int num_layers = 5;
    int mlp_layers = 2;
    int hidden_dim = 64;
    EpsilonMode epsilon_mode = EpsilonMode::FixedZero;
    NodeFeatures features = NodeFeatures::DegreeOneHot;
    int max_degree = 8;
    std::uint64_t seed = 0;
    double learning_rate = 1e-3;
    int epochs = 350;
    int batch_size = 32;

    int input_dim() const { return features == NodeFeatures::Constant ? 1 : max_degree + 1; }
    int embedding_dim() const { return num_layers * hidden_dim; }

    void validate() const {
        if (num_layers < 1) throw Error("num_layers must be >= 1");
        if (mlp_layers < 1) throw Error("mlp_layers must be >= 1");
        if (hidden_dim < 1) throw Error("hidden_dim must be >= 1");
        if (max_degree < 0) throw Error("max_degree must be >= 0");
        if (!(learning_rate > 0)) throw Error("learning_rate must be positive");
        if (epochs < 0) throw Error("epochs must be >= 0");
        if (batch_size < 1) throw Error("batch_size must be >= 1");
    }
};

/// Undirected multigraph as the network sees it. A self-loop (u, u) adds the
/// node's own feature to its neighbour sum once.
struct GinGraph {
    std::vector<int> degree;
    std::vector<std::pair<int, int>> edges;

    int size() const { return static_cast<int>(degree.size()); }

    static GinGraph from_edges(int n, std::vector<std::pair<int, int>> edges) {
        GinGraph g;
        g.degree.assign(static_cast<std::size_t>(n), 0);
        for (auto [u, v] : edges) {
            if (u < 0 || v < 0 || u >= n || v >= n) throw Error("edge endpoint out of range");
            ++g.degree[static_cast<std::size_t>(u)];
            ++g.degree[static_cast<std::size_t>(v)];
        }
        g.edges = std::move(edges);
        return g;
    }

    /// Open edges (one end removed at the border) keep counting towards the
    /// remaining node's degree but carry no message.
    static GinGraph from_crack_graph(const CrackGraph& cg) {
        GinGraph g;
        for (const auto& n : cg.nodes) g.degree.push_back(n.degree);
        for (const auto& e : cg.edges)
            if (!e.open()) g.edges.emplace_back(e.u, e.v);
        return g;
    }

    GinGraph permuted(const std::vector<int>& perm) const {
        GinGraph g;
        g.degree.assign(degree.size(), 0);
        for (std::size_t i = 0; i < degree.size(); ++i) g.degree[static_cast<std::size_t>(perm[i])] = degree[i];
        for (auto [u, v] : edges) g.edges.emplace_back(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]);
        return g;
    }
};

/// h_v^(0): one-hot of min(degree, max_degree), or the constant 1.
inline Eigen::MatrixXd init_node_features(const GinGraph& g, const GinConfig& cfg) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(g.size(), cfg.input_dim());
    for (int v = 0; v < g.size(); ++v) {
        if (cfg.features == NodeFeatures::Constant)
            h(v, 0) = 1.0;
        else
            h(v, std::min(g.degree[static_cast<std::size_t>(v)], cfg.max_degree)) = 1.0;
    }
    return h;
}

struct Dense {
    Eigen::MatrixXd w;     // in x out; y = x w + b
    Eigen::RowVectorXd b;
};

struct GinLayer {
    std::vector<Dense> mlp;
    double eps = 0.0;
};

struct GinModel {
    GinConfig config;
    std::vector<GinLayer> layers;
    Dense head;
    int num_classes = 0;

    /// Same shapes, all zeros; used as a gradient accumulator.
    GinModel zeros_like() const {
        GinModel z = *this;
        z.for_each_param([](double& p) { p = 0.0; });
        return z;
    }

    /// Visits every trainable scalar in a fixed order. eps is included only
    /// when it is learnable.
    template <class F>
    void for_each_param(F&& f) {
        auto dense = [&](Dense& d) {
            for (Eigen::Index i = 0; i < d.w.size(); ++i) f(d.w.data()[i]);
            for (Eigen::Index i = 0; i < d.b.size(); ++i) f(d.b.data()[i]);
        };
        for (auto& l : layers) {
            for (auto& d : l.mlp) dense(d);
            if (config.epsilon_mode == EpsilonMode::Learnable) f(l.eps);
        }
        dense(head);
    }

    std::vector<double> pack() const {
        std::vector<double> out;
        const_cast<GinModel*>(this)->for_each_param([&](double& p) { out.push_back(p); });
        return out;
    }

    void unpack(const std::vector<double>& v) {
        std::size_t i = 0;
        for_each_param([&](double& p) { p = v.at(i++); });
        if (i != v.size()) throw Error("parameter count mismatch");
    }
};

/// Uniform(+-1/sqrt(fan_in)) for weights and biases.
inline GinModel init_model(const GinConfig& cfg, int num_classes) {
    cfg.validate();
    if (num_classes < 2) throw Error("need at least two classes");
    std::mt19937_64 rng(cfg.seed);
    auto dense = [&](int in, int out) {
        std::uniform_real_distribution<double> u(-1.0 / std::sqrt(in), 1.0 / std::sqrt(in));
        Dense d{Eigen::MatrixXd(in, out), Eigen::RowVectorXd(out)};
        for (Eigen::Index i = 0; i < d.w.size(); ++i) d.w.data()[i] = u(rng);
        for (Eigen::Index i = 0; i < d.b.size(); ++i) d.b.data()[i] = u(rng);
        return d;
    };
    GinModel m;
    m.config = cfg;
    m.num_classes = num_classes;
    int in = cfg.input_dim();
    for (int k = 0; k < cfg.num_layers; ++k) {
        GinLayer l;
        for (int j = 0; j < cfg.mlp_layers; ++j) {
            l.mlp.push_back(dense(in, cfg.hidden_dim));
            in = cfg.hidden_dim;
        }
        m.layers.push_back(std::move(l));
    }
    m.head = dense(cfg.embedding_dim(), num_classes);
    return m;
}

namespace detail {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline void check_graph(const GinGraph& g) {
    if (g.size() == 0) throw Error("empty graph");
    if (g.size() > kMaxGinNodes) throw Error("graph too large (" + std::to_string(g.size()) + " nodes, limit " + std::to_string(kMaxGinNodes) + ")");
}

/// Several graphs stacked as one disjoint union.
struct GinBatch {
    SpMat adj;
    Eigen::MatrixXd h0;
    std::vector<int> graph_of;  // node -> position in batch
    int num_graphs = 0;
};

inline GinBatch make_batch(const std::vector<const GinGraph*>& graphs, const GinConfig& cfg) {
    GinBatch b;
    b.num_graphs = static_cast<int>(graphs.size());
    int total = 0;
    for (const auto* g : graphs) {
        check_graph(*g);
        total += g->size();
    }
    b.h0.resize(total, cfg.input_dim());
    std::vector<Eigen::Triplet<double>> trip;
    int off = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const auto& g = *graphs[gi];
        b.h0.middleRows(off, g.size()) = init_node_features(g, cfg);
        for (auto [u, v] : g.edges) {
            trip.emplace_back(off + u, off + v, 1.0);
            if (u != v) trip.emplace_back(off + v, off + u, 1.0);
        }
        b.graph_of.insert(b.graph_of.end(), static_cast<std::size_t>(g.size()), static_cast<int>(gi));
        off += g.size();
    }
    b.adj.resize(total, total);
    b.adj.setFromTriplets(trip.begin(), trip.end());
    return b;
}

struct LayerCache {
    Eigen::MatrixXd z;                 // aggregated input to the MLP
    std::vector<Eigen::MatrixXd> act;  // post-activation of each dense layer
};

struct ForwardState {
    std::vector<Eigen::MatrixXd> h;  // h[0] input, h[k] output of layer k
    std::vector<LayerCache> cache;
    Eigen::MatrixXd embedding;       // graphs x (layers * hidden)
};

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

inline ForwardState forward(const GinModel& m, const GinBatch& b) {
    const int K = static_cast<int>(m.layers.size());
    const int H = m.config.hidden_dim;
    ForwardState s;
    s.h.push_back(b.h0);
    s.embedding = Eigen::MatrixXd::Zero(b.num_graphs, K * H);
    for (int k = 0; k < K; ++k) {
        const auto& layer = m.layers[static_cast<std::size_t>(k)];
        LayerCache c;
        c.z = (1.0 - layer.eps) * s.h.back() + b.adj * s.h.back();
        const Eigen::MatrixXd* x = &c.z;
        for (const auto& d : layer.mlp) {
            Eigen::MatrixXd y = *x * d.w;
            y.rowwise() += d.b;
            c.act.push_back(relu(y));
            x = &c.act.back();
        }
        s.h.push_back(c.act.back());
        // Readout sums nodes in index order, a fixed accumulation order.
        const auto& hk = s.h.back();
        for (Eigen::Index v = 0; v < hk.rows(); ++v)
            s.embedding.block(b.graph_of[static_cast<std::size_t>(v)], k * H, 1, H) += hk.row(v);
        s.cache.push_back(std::move(c));
    }
    return s;
}

/// Mean cross-entropy of the head over the batch; optionally accumulates the
/// gradient into `grad` (same shapes as the model).
inline double loss_and_grad(const GinModel& m, const GinBatch& b, const std::vector<int>& labels, GinModel* grad) {
    const ForwardState s = forward(m, b);
    const int G = b.num_graphs;
    Eigen::MatrixXd logits = s.embedding * m.head.w;
    logits.rowwise() += m.head.b;

    double loss = 0.0;
    Eigen::MatrixXd dlogits(G, m.num_classes);
    for (int g = 0; g < G; ++g) {
        const double mx = logits.row(g).maxCoeff();
        const Eigen::RowVectorXd e = (logits.row(g).array() - mx).exp().matrix();
        const double z = e.sum();
        const int y = labels[static_cast<std::size_t>(g)];
        if (y < 0 || y >= m.num_classes) throw Error("label out of range");
        loss += std::log(z) - (logits(g, y) - mx);
        dlogits.row(g) = e / z;
        dlogits(g, y) -= 1.0;
    }
    loss /= G;
    if (!grad) return loss;
    dlogits /= G;

    grad->head.w += s.embedding.transpose() * dlogits;
    grad->head.b += dlogits.colwise().sum();
    const Eigen::MatrixXd demb = dlogits * m.head.w.transpose();

    const int K = static_cast<int>(m.layers.size());
    const int H = m.config.hidden_dim;
    Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(s.h.back().rows(), H);
    for (int k = K - 1; k >= 0; --k) {
        const auto& layer = m.layers[static_cast<std::size_t>(k)];
        auto& glayer = grad->layers[static_cast<std::size_t>(k)];
        const auto& c = s.cache[static_cast<std::size_t>(k)];
        for (Eigen::Index v = 0; v < dh.rows(); ++v)
            dh.row(v) += demb.block(b.graph_of[static_cast<std::size_t>(v)], k * H, 1, H);

        Eigen::MatrixXd dy = dh;
        for (int j = static_cast<int>(layer.mlp.size()) - 1; j >= 0; --j) {
            const auto ju = static_cast<std::size_t>(j);
            dy = dy.cwiseProduct((c.act[ju].array() > 0.0).cast<double>().matrix());
            const Eigen::MatrixXd& x = j == 0 ? c.z : c.act[ju - 1];
            glayer.mlp[ju].w += x.transpose() * dy;
            glayer.mlp[ju].b += dy.colwise().sum();
            dy = dy * layer.mlp[ju].w.transpose();
        }
        // dy is now dL/dz.
        const auto& hprev = s.h[static_cast<std::size_t>(k)];
        if (m.config.epsilon_mode == EpsilonMode::Learnable) glayer.eps -= hprev.cwiseProduct(dy).sum();
        if (k > 0) dh = (1.0 - layer.eps) * dy + b.adj.transpose() * dy;
    }
    return loss;
}

/// Plain Adam with bias correction.
struct Adam {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    long t = 0;

    explicit Adam(double rate) : lr(rate) {}

    void step(std::vector<double>& p, const std::vector<double>& g) {
        if (m.empty()) {
            m.assign(p.size(), 0.0);
            v.assign(p.size(), 0.0);
        }
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
            p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

inline void check_shapes(const GinModel& m) {
    const auto& c = m.config;
    bool ok = static_cast<int>(m.layers.size()) == c.num_layers && m.head.w.rows() == c.embedding_dim() &&
              m.head.w.cols() == m.num_classes && m.head.b.size() == m.num_classes;
    int in = c.input_dim();
    for (const auto& l : m.layers) {
        ok = ok && static_cast<int>(l.mlp.size()) == c.mlp_layers;
        for (const auto& d : l.mlp) {
            ok = ok && d.w.rows() == in && d.w.cols() == c.hidden_dim && d.b.size() == c.hidden_dim;
            in = c.hidden_dim;
        }
    }
    if (!ok) throw Error("model shape does not match its config");
}

}  // namespace detail

/// Per-layer node features and the concatenated readout of one graph.
struct GinForward {
    std::vector<Eigen::MatrixXd> node_features;  // [0] input, [k] after layer k
    Eigen::VectorXd embedding;
};

inline GinForward forward(const GinModel& m, const GinGraph& g) {
    detail::check_shapes(m);
    const auto b = detail::make_batch({&g}, m.config);
    auto s = detail::forward(m, b);
    return {std::move(s.h), s.embedding.row(0).transpose()};
}

inline Eigen::VectorXd embed(const GinModel& m, const GinGraph& g) { return forward(m, g).embedding; }

/// Embeddings of many graphs, one row each, computed in batches.
inline Eigen::MatrixXd embed_all(const GinModel& m, const std::vector<GinGraph>& graphs) {
    detail::check_shapes(m);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(graphs.size()), m.config.embedding_dim());
    const std::size_t bs = static_cast<std::size_t>(m.config.batch_size);
    for (std::size_t start = 0; start < graphs.size(); start += bs) {
        std::vector<const GinGraph*> chunk;
        for (std::size_t i = start; i < std::min(graphs.size(), start + bs); ++i) chunk.push_back(&graphs[i]);
        const auto s = detail::forward(m, detail::make_batch(chunk, m.config));
        out.middleRows(static_cast<Eigen::Index>(start), s.embedding.rows()) = s.embedding;
    }
    return out;
}

/// Mean loss and flattened gradient over a set of graphs (one batch).
inline double loss_and_gradient(const GinModel& m, const std::vector<const GinGraph*>& graphs, const std::vector<int>& labels,
                                std::vector<double>* grad) {
    const auto b = detail::make_batch(graphs, m.config);
    if (!grad) return detail::loss_and_grad(m, b, labels, nullptr);
    GinModel g = m.zeros_like();
    const double loss = detail::loss_and_grad(m, b, labels, &g);
    *grad = g.pack();
    return loss;
}

struct TrainLog {
    double initial_loss = 0.0;
    std::vector<double> epoch_loss;  // mean batch loss during each epoch
};

/// Mini-batch Adam on the mean cross-entropy of a linear head over the
/// embedding. Deterministic given config.seed.
inline GinModel train(const std::vector<GinGraph>& graphs, const std::vector<int>& labels, const GinConfig& cfg,
                      TrainLog* log = nullptr) {
    cfg.validate();
    if (graphs.size() != labels.size()) throw Error("graphs and labels differ in length");
    if (graphs.empty()) throw Error("empty training set");
    const int max_label = *std::max_element(labels.begin(), labels.end());
    if (*std::min_element(labels.begin(), labels.end()) < 0) throw Error("negative label");
    if (std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels.front(); }))
        throw Error("training set has a single class");

    GinModel m = init_model(cfg, max_label + 1);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(graphs.size());
    std::iota(order.begin(), order.end(), 0);
    detail::Adam opt(cfg.learning_rate);
    std::vector<double> params = m.pack(), grad;

    auto batch_of = [&](std::size_t start) {
        std::vector<const GinGraph*> gs;
        std::vector<int> ys;
        for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++i) {
            gs.push_back(&graphs[order[i]]);
            ys.push_back(labels[order[i]]);
        }
        return std::pair{gs, ys};
    };

    if (log) {
        double total = 0.0;
        for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
            auto [gs, ys] = batch_of(s);
            total += loss_and_gradient(m, gs, ys, nullptr) * static_cast<double>(gs.size());
        }
        log->initial_loss = total / static_cast<double>(order.size());
    }

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
            auto [gs, ys] = batch_of(s);
            const double loss = loss_and_gradient(m, gs, ys, &grad);
            if (!std::isfinite(loss)) throw Error("training diverged (loss NaN) at epoch " + std::to_string(epoch));
            total += loss * static_cast<double>(gs.size());
            opt.step(params, grad);
            m.unpack(params);
        }
        if (log) log->epoch_loss.push_back(total / static_cast<double>(order.size()));
    }
    return m;
}

/// Class predicted by the training head.
inline int predict_head(const GinModel& m, const GinGraph& g) {
    const Eigen::RowVectorXd logits = embed(m, g).transpose() * m.head.w + m.head.b;
    Eigen::Index arg = 0;
    logits.maxCoeff(&arg);
    return static_cast<int>(arg);
}

// ---- serialisation ----

namespace detail {

inline nlohmann::json dense_to_json(const Dense& d) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index i = 0; i < d.w.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(d.w.cols()));
        for (Eigen::Index j = 0; j < d.w.cols(); ++j) row[static_cast<std::size_t>(j)] = d.w(i, j);
        w.push_back(row);
    }
    return {{"w", w}, {"b", std::vector<double>(d.b.data(), d.b.data() + d.b.size())}};
}

inline Dense dense_from_json(const nlohmann::json& j) {
    const auto& w = j.at("w");
    const auto rows = static_cast<Eigen::Index>(w.size());
    const auto cols = rows ? static_cast<Eigen::Index>(w.at(0).size()) : 0;
    Dense d{Eigen::MatrixXd(rows, cols), Eigen::RowVectorXd()};
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto row = w.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("ragged weight matrix");
        for (Eigen::Index c = 0; c < cols; ++c) d.w(i, c) = row[static_cast<std::size_t>(c)];
    }
    const auto b = j.at("b").get<std::vector<double>>();
    d.b = Eigen::Map<const Eigen::RowVectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    return d;
}

}  // namespace detail

inline nlohmann::json to_json(const GinConfig& c) {
    return {{"num_layers", c.num_layers},
            {"mlp_layers", c.mlp_layers},
            {"hidden_dim", c.hidden_dim},
            {"epsilon_mode", c.epsilon_mode == EpsilonMode::Learnable ? "learnable" : "fixed-zero"},
            {"node_features", c.features == NodeFeatures::Constant ? "constant" : "degree-onehot"},
            {"max_degree", c.max_degree},
            {"seed", c.seed},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size}};
}

inline GinConfig gin_config_from_json(const nlohmann::json& j) {
    GinConfig c;
    for (const auto& [key, val] : j.items()) {
        if (key == "num_layers") c.num_layers = val.get<int>();
        else if (key == "mlp_layers") c.mlp_layers = val.get<int>();
        else if (key == "hidden_dim") c.hidden_dim = val.get<int>();
        else if (key == "epsilon_mode") {
            const auto s = val.get<std::string>();
            if (s == "learnable") c.epsilon_mode = EpsilonMode::Learnable;
            else if (s == "fixed-zero") c.epsilon_mode = EpsilonMode::FixedZero;
            else throw Error("unknown epsilon_mode '" + s + "'");
        } else if (key == "node_features") {
            const auto s = val.get<std::string>();
            if (s == "constant") c.features = NodeFeatures::Constant;
            else if (s == "degree-onehot") c.features = NodeFeatures::DegreeOneHot;
            else throw Error("unknown node_features '" + s + "'");
        } else if (key == "max_degree") c.max_degree = val.get<int>();
        else if (key == "seed") c.seed = val.get<std::uint64_t>();
        else if (key == "learning_rate") c.learning_rate = val.get<double>();
        else if (key == "epochs") c.epochs = val.get<int>();
        else if (key == "batch_size") c.batch_size = val.get<int>();
        else throw Error("unknown gin config key '" + key + "'");
    }
    c.validate();
    return c;
}

inline nlohmann::json to_json(const GinModel& m) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.layers) {
        nlohmann::json mlp = nlohmann::json::array();
        for (const auto& d : l.mlp) mlp.push_back(detail::dense_to_json(d));
        layers.push_back({{"eps", l.eps}, {"mlp", mlp}});
    }
    return {{"format", "craq-gin"}, {"version", 1},       {"config", to_json(m.config)},
            {"num_classes", m.num_classes}, {"layers", layers}, {"head", detail::dense_to_json(m.head)}};
}

inline GinModel gin_model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "craq-gin") throw Error("not a GIN model file");
    if (j.value("version", 0) != 1) throw Error("unsupported GIN model version");
    GinModel m;
    m.config = gin_config_from_json(j.at("config"));
    m.num_classes = j.at("num_classes").get<int>();
    for (const auto& jl : j.at("layers")) {
        GinLayer l;
        l.eps = jl.at("eps").get<double>();
        for (const auto& jd : jl.at("mlp")) l.mlp.push_back(detail::dense_from_json(jd));
        m.layers.push_back(std::move(l));
    }
    m.head = detail::dense_from_json(j.at("head"));
    detail::check_shapes(m);
    for (double p : m.pack())
        if (!std::isfinite(p)) throw Error("non-finite parameter in model file");
    return m;
}

}  // namespace craq
