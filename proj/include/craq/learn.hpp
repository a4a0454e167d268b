#pragma once

// Patch augmentation, one-vs-rest linear SVM and grouped stratified
// cross-validation.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "craq/image.hpp"
#include "json.hpp"

namespace craq {

// ---- augmentation ----

struct Patch {
    GrayImage image;
    int label = 0;
    int group = 0;
    int x0 = 0, y0 = 0;
    bool flipped_h = false, flipped_v = false;
};

/// `crops` random square crops, each flipped horizontally and vertically with
/// probability 1/2. All patches keep the source's group id.
inline std::vector<Patch> augment(const GrayImage& img, int label, int group, int crops, int crop_size, std::uint64_t seed) {
    if (crops < 1) throw Error("crops must be >= 1");
    if (crop_size < 1 || crop_size > img.width || crop_size > img.height) throw Error("crop larger than image");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> ux(0, img.width - crop_size), uy(0, img.height - crop_size);
    std::bernoulli_distribution coin(0.5);
    std::vector<Patch> out;
    for (int i = 0; i < crops; ++i) {
        Patch p;
        p.label = label;
        p.group = group;
        p.x0 = ux(rng);
        p.y0 = uy(rng);
        p.flipped_h = coin(rng);
        p.flipped_v = coin(rng);
        p.image = crop(img, p.x0, p.y0, crop_size, crop_size);
        if (p.flipped_h) p.image = flip_horizontal(p.image);
        if (p.flipped_v) p.image = flip_vertical(p.image);
        out.push_back(std::move(p));
    }
    return out;
}

// ---- linear SVM ----

struct Sample {
    std::vector<double> features;
    int label = 0;
    int group = 0;
};

struct SvmParams {
    double c_reg = 1.0;
    double tolerance = 1e-4;    // relative objective change between T and 2T
    long max_iterations = 1 << 17;
};

struct SvmModel {
    int num_classes = 0;
    int input_dim = 0;
    std::vector<int> kept;      // input columns used after dropping constants
    Eigen::VectorXd mean, scale;
    Eigen::MatrixXd w;          // kept x classes
    Eigen::VectorXd b;          // per class
    std::vector<double> objective;
    std::vector<std::string> warnings;
};

namespace detail {

/// One-vs-rest objective 0.5 |w~|^2 + C mean_i hinge(y_i w~ . x~_i) per class,
/// with x~ = (x, 1) so the bias shares the regulariser.
inline Eigen::VectorXd ovr_objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& W, double c) {
    const Eigen::MatrixXd margin = (X * W).cwiseProduct(Y);
    const Eigen::MatrixXd hinge = (1.0 - margin.array()).cwiseMax(0.0).matrix();
    return 0.5 * W.colwise().squaredNorm().transpose() + c * hinge.colwise().mean().transpose();
}

}  // namespace detail

/// Full-batch projected subgradient descent (step 1/(lambda t), lambda = 1/C)
/// with iterate averaging. Checkpoints at T = 64, 128, 256, ...; a class is
/// done once its best objective changes by less than `tolerance` (relative)
/// between T and 2T.
inline SvmModel train_svm(const std::vector<Sample>& samples, const SvmParams& params = {}) {
    if (!(params.c_reg > 0)) throw Error("c_reg must be positive");
    if (samples.empty()) throw Error("empty training set");
    const int d = static_cast<int>(samples.front().features.size());
    std::map<int, int> per_class;
    for (const auto& s : samples) {
        if (static_cast<int>(s.features.size()) != d) throw Error("inconsistent feature dimension");
        if (s.label < 0) throw Error("negative label");
        for (double v : s.features)
            if (!std::isfinite(v)) throw Error("non-finite feature");
        ++per_class[s.label];
    }
    if (per_class.size() < 2) throw Error("need at least two classes");
    for (auto [cls, n] : per_class)
        if (n < 2) throw Error("class " + std::to_string(cls) + " has fewer than two samples");

    SvmModel m;
    m.input_dim = d;
    m.num_classes = per_class.rbegin()->first + 1;
    const auto n = static_cast<Eigen::Index>(samples.size());

    Eigen::MatrixXd raw(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) raw(i, j) = samples[static_cast<std::size_t>(i)].features[static_cast<std::size_t>(j)];
    for (int j = 0; j < d; ++j) {
        const double mu = raw.col(j).mean();
        const double sd = std::sqrt((raw.col(j).array() - mu).square().mean());
        if (sd <= 1e-12 * (1.0 + std::abs(mu))) {
            m.warnings.push_back("feature " + std::to_string(j) + " is constant; dropped");
            continue;
        }
        m.kept.push_back(j);
    }
    const auto dk = static_cast<Eigen::Index>(m.kept.size());
    m.mean.resize(dk);
    m.scale.resize(dk);
    Eigen::MatrixXd X(n, dk + 1);
    for (Eigen::Index k = 0; k < dk; ++k) {
        const auto col = raw.col(m.kept[static_cast<std::size_t>(k)]);
        m.mean(k) = col.mean();
        m.scale(k) = std::sqrt((col.array() - m.mean(k)).square().mean());
        X.col(k) = (col.array() - m.mean(k)) / m.scale(k);
    }
    X.col(dk).setOnes();

    const int C = m.num_classes;
    Eigen::MatrixXd Y(n, C);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int c = 0; c < C; ++c) Y(i, c) = samples[static_cast<std::size_t>(i)].label == c ? 1.0 : -1.0;

    const double c_reg = params.c_reg, lambda = 1.0 / c_reg, radius = std::sqrt(2.0 * c_reg);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(dk + 1, C), avg = W, best = W;
    Eigen::VectorXd best_obj = detail::ovr_objective(X, Y, W, c_reg);
    Eigen::VectorXd checkpoint = best_obj;
    std::vector<bool> done(static_cast<std::size_t>(C), false);
    long next_check = 64;
    bool converged = false;
    for (long t = 1; t <= params.max_iterations; ++t) {
        const Eigen::MatrixXd viol = ((X * W).cwiseProduct(Y).array() < 1.0).cast<double>().matrix().cwiseProduct(Y);
        // Subgradient of the objective divided by C.
        const Eigen::MatrixXd g = lambda * W - X.transpose() * viol / static_cast<double>(n);
        W -= g / (lambda * static_cast<double>(t));
        for (int c = 0; c < C; ++c) {
            const double nrm = W.col(c).norm();
            if (nrm > radius) W.col(c) *= radius / nrm;
        }
        avg += (W - avg) / static_cast<double>(t);
        if (t % 8 == 0 || t == next_check) {
            const Eigen::VectorXd oa = detail::ovr_objective(X, Y, avg, c_reg), ow = detail::ovr_objective(X, Y, W, c_reg);
            for (int c = 0; c < C; ++c) {
                if (oa(c) < best_obj(c)) {
                    best_obj(c) = oa(c);
                    best.col(c) = avg.col(c);
                }
                if (ow(c) < best_obj(c)) {
                    best_obj(c) = ow(c);
                    best.col(c) = W.col(c);
                }
            }
        }
        if (t == next_check) {
            converged = true;
            for (int c = 0; c < C; ++c) {
                const auto cu = static_cast<std::size_t>(c);
                done[cu] = std::abs(checkpoint(c) - best_obj(c)) <= params.tolerance * std::max(best_obj(c), 1e-12);
                converged = converged && done[cu];
            }
            if (converged) break;
            checkpoint = best_obj;
            next_check *= 2;
        }
    }
    if (!converged) m.warnings.push_back("subgradient solver hit the iteration limit before reaching tolerance");
    m.w = best.topRows(dk);
    m.b = best.row(dk).transpose();
    m.objective.assign(best_obj.data(), best_obj.data() + best_obj.size());
    return m;
}

struct Prediction {
    int label = 0;
    std::vector<double> scores;
};

inline Prediction predict(const SvmModel& m, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != m.input_dim) throw Error("feature dimension mismatch");
    Eigen::VectorXd z(static_cast<Eigen::Index>(m.kept.size()));
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = (x[static_cast<std::size_t>(m.kept[static_cast<std::size_t>(k)])] - m.mean(k)) / m.scale(k);
    const Eigen::VectorXd s = m.w.transpose() * z + m.b;
    Prediction p;
    p.scores.assign(s.data(), s.data() + s.size());
    // First maximum: ties go to the lowest class id.
    p.label = static_cast<int>(std::max_element(p.scores.begin(), p.scores.end()) - p.scores.begin());
    return p;
}

inline nlohmann::json to_json(const SvmModel& m) {
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.w.cols(); ++c) w.push_back(vec(m.w.col(c)));
    return {{"format", "craq-svm"}, {"version", 1},          {"num_classes", m.num_classes}, {"input_dim", m.input_dim},
            {"kept", m.kept},       {"mean", vec(m.mean)},   {"scale", vec(m.scale)},        {"w", w},
            {"b", vec(m.b)},        {"warnings", m.warnings}};
}

inline SvmModel svm_model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "craq-svm" || j.value("version", 0) != 1) throw Error("not a craq SVM model");
    auto vec = [](const nlohmann::json& a) {
        const auto v = a.get<std::vector<double>>();
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    SvmModel m;
    m.num_classes = j.at("num_classes").get<int>();
    m.input_dim = j.at("input_dim").get<int>();
    m.kept = j.at("kept").get<std::vector<int>>();
    m.mean = vec(j.at("mean"));
    m.scale = vec(j.at("scale"));
    m.b = vec(j.at("b"));
    const auto dk = static_cast<Eigen::Index>(m.kept.size());
    m.w.resize(dk, m.num_classes);
    const auto& w = j.at("w");
    if (static_cast<int>(w.size()) != m.num_classes || m.b.size() != m.num_classes || m.mean.size() != dk || m.scale.size() != dk)
        throw Error("SVM model shapes are inconsistent");
    for (int c = 0; c < m.num_classes; ++c) {
        const auto col = vec(w.at(static_cast<std::size_t>(c)));
        if (col.size() != dk) throw Error("SVM model shapes are inconsistent");
        m.w.col(c) = col;
    }
    m.warnings = j.value("warnings", std::vector<std::string>{});
    return m;
}

// ---- cross-validation ----

struct CvOptions {
    int folds = 10;
    bool grouped = true;
    std::uint64_t seed = 0;
    int jobs = 1;
};

/// Stratified fold index per sample. Groups (or single samples when
/// ungrouped) are shuffled within each class and dealt round-robin, the
/// starting fold rotating from class to class so fold sizes stay balanced.
/// A group takes the label of its first sample.
inline std::vector<int> assign_folds(const std::vector<int>& labels, const std::vector<int>& groups, const CvOptions& opt) {
    if (opt.folds < 2) throw Error("folds must be >= 2");
    if (labels.size() != groups.size()) throw Error("labels and groups differ in length");
    std::map<int, std::vector<int>> units_by_class;  // class -> unit ids
    std::vector<int> unit_of(labels.size());
    if (opt.grouped) {
        std::map<int, int> unit_id;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            auto [it, fresh] = unit_id.try_emplace(groups[i], static_cast<int>(unit_id.size()));
            if (fresh) units_by_class[labels[i]].push_back(it->second);
            unit_of[i] = it->second;
        }
        if (static_cast<int>(unit_id.size()) < opt.folds)
            throw Error("too few groups (" + std::to_string(unit_id.size()) + ") for " + std::to_string(opt.folds) + " folds");
    } else {
        if (static_cast<int>(labels.size()) < opt.folds) throw Error("too few samples for the number of folds");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            unit_of[i] = static_cast<int>(i);
            units_by_class[labels[i]].push_back(static_cast<int>(i));
        }
    }
    std::mt19937_64 rng(opt.seed);
    std::map<int, int> fold_of_unit;
    int next = 0;
    for (auto& [cls, units] : units_by_class) {
        std::shuffle(units.begin(), units.end(), rng);
        for (int u : units) {
            fold_of_unit[u] = next;
            next = (next + 1) % opt.folds;
        }
    }
    std::vector<int> fold(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) fold[i] = fold_of_unit[unit_of[i]];
    return fold;
}

struct CvResult {
    double accuracy = 0.0;  // trace(confusion) / total
    std::vector<double> fold_accuracies;
    std::vector<std::vector<int>> confusion;  // rows true, columns predicted
    std::vector<int> predictions;             // held-out prediction per sample
};

/// Train on train indices, return one prediction vector (aligned with test
/// indices) per variant.
using FoldFn = std::function<std::vector<std::vector<int>>(const std::vector<std::size_t>& train,
                                                           const std::vector<std::size_t>& test)>;

/// Runs `fit_predict` on every fold and scores each variant it returns.
/// Folds may run on up to opt.jobs threads; results are merged by fold index.
inline std::vector<CvResult> cross_validate(const std::vector<int>& labels, const std::vector<int>& groups, const CvOptions& opt,
                                            int variants, const FoldFn& fit_predict) {
    const auto fold = assign_folds(labels, groups, opt);
    const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<std::vector<int>>> out(static_cast<std::size_t>(opt.folds));
    std::vector<std::vector<std::size_t>> test_of(static_cast<std::size_t>(opt.folds));
    for (std::size_t i = 0; i < labels.size(); ++i) test_of[static_cast<std::size_t>(fold[i])].push_back(i);

    std::atomic<int> next{0};
    std::vector<std::string> errors(static_cast<std::size_t>(opt.folds));
    auto worker = [&] {
        for (int f = next++; f < opt.folds; f = next++) {
            const auto fu = static_cast<std::size_t>(f);
            std::vector<std::size_t> train;
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (fold[i] != f) train.push_back(i);
            try {
                out[fu] = fit_predict(train, test_of[fu]);
                if (static_cast<int>(out[fu].size()) != variants) throw Error("fold function returned wrong number of variants");
                for (const auto& p : out[fu])
                    if (p.size() != test_of[fu].size()) throw Error("fold function returned wrong number of predictions");
            } catch (const std::exception& e) {
                errors[fu] = e.what();
            }
        }
    };
    const int threads = std::clamp(opt.jobs, 1, opt.folds);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (int f = 0; f < opt.folds; ++f)
        if (!errors[static_cast<std::size_t>(f)].empty()) throw Error("fold " + std::to_string(f) + ": " + errors[static_cast<std::size_t>(f)]);

    std::vector<CvResult> results(static_cast<std::size_t>(variants));
    for (int v = 0; v < variants; ++v) {
        auto& r = results[static_cast<std::size_t>(v)];
        r.confusion.assign(static_cast<std::size_t>(classes), std::vector<int>(static_cast<std::size_t>(classes), 0));
        r.predictions.assign(labels.size(), -1);
        for (int f = 0; f < opt.folds; ++f) {
            const auto& test = test_of[static_cast<std::size_t>(f)];
            const auto& pred = out[static_cast<std::size_t>(f)][static_cast<std::size_t>(v)];
            int hit = 0;
            for (std::size_t k = 0; k < test.size(); ++k) {
                const int p = pred[k];
                if (p < 0 || p >= classes) throw Error("prediction out of range");
                r.predictions[test[k]] = p;
                ++r.confusion[static_cast<std::size_t>(labels[test[k]])][static_cast<std::size_t>(p)];
                hit += p == labels[test[k]];
            }
            r.fold_accuracies.push_back(test.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(test.size()));
        }
        long trace = 0;
        for (int c = 0; c < classes; ++c) trace += r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        r.accuracy = static_cast<double>(trace) / static_cast<double>(labels.size());
    }
    return results;
}

/// Linear SVM on fixed feature vectors.
inline CvResult cross_validate(const std::vector<Sample>& samples, const CvOptions& opt, const SvmParams& svm = {}) {
    std::vector<int> labels, groups;
    for (const auto& s : samples) {
        labels.push_back(s.label);
        groups.push_back(s.group);
    }
    return cross_validate(labels, groups, opt, 1, [&](const auto& train, const auto& test) {
        std::vector<Sample> tr;
        for (auto i : train) tr.push_back(samples[i]);
        const auto model = train_svm(tr, svm);
        std::vector<int> pred;
        for (auto i : test) pred.push_back(predict(model, samples[i].features).label);
        return std::vector<std::vector<int>>{pred};
    }).front();
}

inline nlohmann::json to_json(const CvResult& r) {
    return {{"accuracy", r.accuracy}, {"fold_accuracies", r.fold_accuracies}, {"confusion", r.confusion}};
}

/// Confusion matrix as an SVG heatmap, rows true class, columns predicted.
inline std::string render_confusion_svg(const CvResult& r, const std::vector<std::string>& names, const std::string& title) {
    const int k = static_cast<int>(r.confusion.size());
    const int cell = 56, left = 130, top = 60;
    const int w = left + k * cell + 20, h = top + k * cell + 110;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << left << "\" y=\"24\" font-size=\"15\">" << title << " (accuracy " << std::fixed << std::setprecision(2)
      << 100.0 * r.accuracy << "%)</text>\n";
    for (int i = 0; i < k; ++i) {
        int row_total = 0;
        for (int v : r.confusion[static_cast<std::size_t>(i)]) row_total += v;
        const std::string name = i < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(i)] : std::to_string(i);
        s << "<text x=\"" << left - 8 << "\" y=\"" << top + i * cell + cell / 2 + 4 << "\" font-size=\"12\" text-anchor=\"end\">" << name << "</text>\n";
        s << "<text x=\"" << left + i * cell + cell / 2 << "\" y=\"" << top + k * cell + 16 << "\" font-size=\"12\" text-anchor=\"end\" transform=\"rotate(-40 "
          << left + i * cell + cell / 2 << ' ' << top + k * cell + 16 << ")\">" << name << "</text>\n";
        for (int j = 0; j < k; ++j) {
            const int v = r.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            const double frac = row_total ? static_cast<double>(v) / row_total : 0.0;
            const int shade = static_cast<int>(std::lround(255 * (1.0 - frac)));
            s << "<rect x=\"" << left + j * cell << "\" y=\"" << top + i * cell << "\" width=\"" << cell << "\" height=\"" << cell
              << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\" stroke=\"#888\"/>\n";
            s << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top + i * cell + cell / 2 + 4
              << "\" font-size=\"13\" text-anchor=\"middle\" fill=\"" << (frac > 0.5 ? "white" : "black") << "\">" << v << "</text>\n";
        }
    }
    s << "<text x=\"12\" y=\"" << top + k * cell / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << top + k * cell / 2
      << ")\" text-anchor=\"middle\">true</text>\n";
    s << "<text x=\"" << left + k * cell / 2 << "\" y=\"" << h - 8 << "\" font-size=\"12\" text-anchor=\"middle\">predicted</text>\n";
    s << "</svg>\n";
    return s.str();
}

}  // namespace craq
