// craq: command-line front end. Every subcommand reads images (or graph JSON
// where that makes sense), writes its artifacts under --out, and records the
// effective configuration in run.json next to them.

#include <atomic>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "craq/experiment.hpp"
#include "craq/io.hpp"
#include "craq/learn.hpp"
#include "craq/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace craq;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0, kExitPartial = 1, kExitUsage = 2;

struct UsageError : Error {
    using Error::Error;
};

// ---- options shared by the subcommands ----

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> order;
    int jobs = 1;
    bool no_chains = false;
    bool ungrouped = false;
    bool augment = false;
    std::string out = ".";
    std::vector<std::string> inputs;
    std::string manifest;
};

PipelineConfig load_config(const Options& o) {
    PipelineConfig c;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw UsageError("cannot read config '" + o.config_path + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw UsageError("config '" + o.config_path + "': " + e.what());
        }
        try {
            c = config_from_json(j);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    if (o.seed) c.seed = *o.seed;
    if (o.order) c.order = *o.order;
    if (o.ungrouped) c.learn.grouped = false;
    try {
        c.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return c;
}

// ---- text output ----

std::string num(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// ---- inputs ----

struct Item {
    fs::path path;
    std::string key;  // file stem, unique within a run
    std::string label;
    int group = -1;
};

bool is_graph_json(const fs::path& p) { return p.extension() == ".json"; }

std::string key_of(const fs::path& p) {
    std::string name = p.filename().string();
    for (const char* ext : {".graph.json", ".json", ".png", ".pgm", ".pnm"})
        if (name.size() > std::strlen(ext) && name.ends_with(ext)) return name.substr(0, name.size() - std::strlen(ext));
    return p.stem().string();
}

std::vector<Item> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read manifest '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    if (split_csv(line) != std::vector<std::string>{"image", "label", "group"}) throw UsageError("manifest header must be image,label,group");
    std::vector<Item> items;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 3) throw UsageError("malformed manifest line: " + line);
        Item it;
        it.path = path.parent_path() / cells[0];
        it.key = key_of(it.path);
        it.label = cells[1];
        try {
            it.group = std::stoi(cells[2]);
        } catch (const std::exception&) {
            throw UsageError("bad group id in manifest line: " + line);
        }
        items.push_back(std::move(it));
    }
    return items;
}

/// Inputs from --manifest and positional files or directories, sorted by key.
std::vector<Item> gather(const Options& o, bool need_labels = false) {
    std::vector<Item> items;
    if (!o.manifest.empty()) items = read_manifest(o.manifest);
    // Files named both in the manifest and on the command line are taken once.
    std::set<fs::path> listed;
    for (const auto& it : items) listed.insert(fs::weakly_canonical(it.path));
    auto add = [&](const fs::path& p) {
        if (!listed.insert(fs::weakly_canonical(p)).second) return;
        items.push_back({p, key_of(p), "", -1});
    };
    for (const auto& in : o.inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            for (const auto& e : fs::directory_iterator(p)) {
                const auto ext = e.path().extension();
                if (e.is_regular_file() && (ext == ".png" || ext == ".pgm" || ext == ".pnm")) add(e.path());
            }
        } else {
            add(p);
        }
    }
    if (items.empty()) throw UsageError("no inputs");
    if (need_labels)
        for (const auto& it : items)
            if (it.label.empty()) throw UsageError("'" + it.key + "' has no label; pass --manifest");
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.key < b.key; });
    for (std::size_t i = 1; i < items.size(); ++i)
        if (items[i].key == items[i - 1].key) throw UsageError("duplicate input name '" + items[i].key + "'");
    return items;
}

/// Class ids in order of first appearance in the manifest.
std::vector<std::string> class_names(const Options& o) {
    std::vector<std::string> names;
    for (const auto& it : read_manifest(o.manifest))
        if (std::find(names.begin(), names.end(), it.label) == names.end()) names.push_back(it.label);
    return names;
}

int class_id(const std::vector<std::string>& names, const std::string& label) {
    const auto it = std::find(names.begin(), names.end(), label);
    if (it == names.end()) throw Error("unknown class '" + label + "'");
    return static_cast<int>(it - names.begin());
}

/// Runs fn(i) for every item on up to `jobs` threads. Returns the error text
/// per item, empty on success.
template <class F>
std::vector<std::string> for_each_item(std::size_t n, int jobs, F&& fn) {
    std::vector<std::string> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(n, 1))); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return errors;
}

int report(const std::vector<Item>& items, const std::vector<std::string>& errors) {
    int failed = 0;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (!errors[i].empty()) {
            std::cerr << items[i].path.string() << ": " << errors[i] << "\n";
            ++failed;
        }
    if (failed) std::cerr << failed << " of " << items.size() << " inputs failed\n";
    return failed ? kExitPartial : kExitOk;
}

void write_run_record(const Options& o, const std::string& command, const PipelineConfig& cfg, const std::vector<Item>& items) {
    json inputs = json::array();
    for (const auto& it : items) inputs.push_back(it.key);
    write_json(fs::path(o.out) / "run.json", {{"command", command}, {"seed", cfg.seed}, {"config", to_json(cfg)}, {"inputs", inputs}});
}

// ---- per-image analysis, from an image or a stored graph ----

struct Analysis {
    CrackGraph graph;
    NodeTypeMap types;
    std::vector<EdgeFit> fits;
    std::optional<StatFeatures> features;
    BinaryMask mask;
};

Analysis analyse_item(const Item& it, const PipelineConfig& cfg) {
    Analysis a;
    if (is_graph_json(it.path)) {
        std::ifstream in(it.path);
        if (!in) throw Error("cannot open '" + it.path.string() + "'");
        auto doc = graph_from_json(json::parse(in));
        a.graph = std::move(doc.graph);
        const bool have_fits = std::any_of(doc.fits.begin(), doc.fits.end(), [](const EdgeFit& f) { return !f.pieces.empty(); });
        if (have_fits) {
            a.fits = std::move(doc.fits);
        } else if (doc.has_chains) {
            a.fits = fit_edges(a.graph, cfg.order);
        } else {
            throw Error("graph has neither chains nor fits");
        }
        a.types = classify_nodes(a.graph);
        a.features = compute_features(a.graph, a.fits, a.types, cfg.stats);
        return a;
    }
    auto r = analyse(io::read_image(it.path), cfg);
    a.graph = std::move(r.graph);
    a.types = std::move(r.types);
    a.fits = std::move(r.fits);
    a.features = r.features;
    a.mask = std::move(r.mask);
    return a;
}

std::string features_header() {
    std::string h = "image";
    for (const char* n : StatFeatures::kNames) h += std::string(",") + n;
    return h + ",label\n";
}

std::string features_row(const Item& it, const StatFeatures& f) {
    std::string row = it.key;
    for (double v : f.to_array()) row += "," + num(v);
    return row + "," + it.label + "\n";
}

std::string ternary_row(const Item& it, const TernaryCoords& t) {
    return it.key + "," + num(t.n_o) + "," + num(t.n_y) + "," + num(t.n_x) + "\n";
}

// ---- subcommands ----

int cmd_generate(const Options& o, const std::string& family, int count, int size, int crops, int crop_size,
                 std::optional<double> density, std::optional<double> jitter) {
    const PipelineConfig cfg = load_config(o);
    CorpusOptions c;
    if (family != "all") c.families = {family_from_string(family)};
    c.sources_per_family = count;
    c.source_size = size;
    c.crops = crops;
    c.crop_size = crop_size > 0 ? crop_size : size / 2;
    c.density = density;
    c.jitter = jitter;
    c.seed = cfg.seed;
    const auto corpus = build_corpus(c);
    fs::create_directories(o.out);
    std::string manifest = "image,label,group\n";
    for (const auto& s : corpus) {
        io::write_png(fs::path(o.out) / (s.name + ".png"), s.image);
        manifest += s.name + ".png," + kFamilyNames[static_cast<std::size_t>(s.label)] + "," + std::to_string(s.group) + "\n";
    }
    write_text(fs::path(o.out) / "manifest.csv", manifest);
    write_run_record(o, "generate", cfg, {});
    return kExitOk;
}

int cmd_segment(const Options& o) {
    const auto cfg = load_config(o);
    const auto items = gather(o);
    fs::create_directories(o.out);
    const auto errors = for_each_item(items.size(), o.jobs, [&](std::size_t i) {
        if (is_graph_json(items[i].path)) throw Error("segment needs an image");
        io::write_png(fs::path(o.out) / (items[i].key + ".mask.png"), segment(io::read_image(items[i].path), cfg.segmentation));
    });
    write_run_record(o, "segment", cfg, items);
    return report(items, errors);
}

/// graph (types only), fit (types and polynomials) and pipeline share this.
int cmd_graphs(const Options& o, const std::string& command, bool with_fits, bool with_tables) {
    const auto cfg = load_config(o);
    const auto items = gather(o);
    fs::create_directories(o.out);
    std::vector<std::optional<StatFeatures>> feats(items.size());
    std::vector<std::optional<TernaryCoords>> coords(items.size());
    auto errors = for_each_item(items.size(), o.jobs, [&](std::size_t i) {
        const auto a = analyse_item(items[i], cfg);
        write_json(fs::path(o.out) / (items[i].key + ".graph.json"),
                   graph_to_json(a.graph, &a.types, with_fits ? &a.fits : nullptr, !o.no_chains));
        if (!with_tables) return;
        if (!a.features) throw Error("no classified nodes; no statistics");
        feats[i] = a.features;
        coords[i] = ternary_coords(a.types);
    });
    if (with_tables) {
        std::string fcsv = features_header(), tcsv = "image,n_o,n_y,n_x\n";
        std::vector<ChartPoint> pts;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (!feats[i]) continue;
            fcsv += features_row(items[i], *feats[i]);
            tcsv += ternary_row(items[i], *coords[i]);
            pts.push_back({*coords[i], items[i].key});
        }
        write_text(fs::path(o.out) / "features.csv", fcsv);
        write_text(fs::path(o.out) / "ternary.csv", tcsv);
        if (!pts.empty()) write_ternary_chart(fs::path(o.out) / "ternary.svg", pts);
    }
    write_run_record(o, command, cfg, items);
    return report(items, errors);
}

int cmd_stats(const Options& o) {
    const auto cfg = load_config(o);
    const auto items = gather(o);
    fs::create_directories(o.out);
    std::vector<StatFeatures> feats(items.size());
    auto errors = for_each_item(items.size(), o.jobs, [&](std::size_t i) {
        const auto a = analyse_item(items[i], cfg);
        if (!a.features) throw Error("no classified nodes; no statistics");
        feats[i] = *a.features;
    });
    std::string csv = features_header();
    for (std::size_t i = 0; i < items.size(); ++i)
        if (errors[i].empty()) csv += features_row(items[i], feats[i]);
    write_text(fs::path(o.out) / "features.csv", csv);
    write_run_record(o, "stats", cfg, items);
    return report(items, errors);
}

int cmd_chart(const Options& o) {
    const auto cfg = load_config(o);
    const auto items = gather(o);
    fs::create_directories(o.out);
    std::vector<TernaryCoords> coords(items.size());
    auto errors = for_each_item(items.size(), o.jobs, [&](std::size_t i) { coords[i] = ternary_coords(analyse_item(items[i], cfg).types); });
    std::string csv = "image,n_o,n_y,n_x\n";
    std::vector<ChartPoint> pts;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (errors[i].empty()) {
            csv += ternary_row(items[i], coords[i]);
            pts.push_back({coords[i], items[i].key});
        }
    write_text(fs::path(o.out) / "ternary.csv", csv);
    if (!pts.empty()) write_ternary_chart(fs::path(o.out) / "ternary.svg", pts);
    write_run_record(o, "chart", cfg, items);
    return report(items, errors);
}

/// GIN graph per item; an empty network becomes a single isolated node.
std::vector<GinGraph> gin_graphs(const std::vector<Item>& items, const PipelineConfig& cfg, int jobs, std::vector<std::string>& errors) {
    std::vector<GinGraph> graphs(items.size());
    errors = for_each_item(items.size(), jobs, [&](std::size_t i) {
        graphs[i] = GinGraph::from_crack_graph(analyse_item(items[i], cfg).graph);
        if (graphs[i].size() == 0) graphs[i] = GinGraph::from_edges(1, {});
    });
    return graphs;
}

int cmd_gnn_train(const Options& o) {
    if (o.manifest.empty()) throw UsageError("gnn-train needs --manifest");
    const auto cfg = load_config(o);
    const auto items = gather(o, true);
    const auto names = class_names(o);
    std::vector<std::string> errors;
    const auto graphs = gin_graphs(items, cfg, o.jobs, errors);
    if (report(items, errors) != kExitOk) return kExitPartial;
    std::vector<int> labels;
    for (const auto& it : items) labels.push_back(class_id(names, it.label));
    TrainLog log;
    const auto model = train(graphs, labels, cfg.gin_config(), &log);
    fs::create_directories(o.out);
    json j = to_json(model);
    j["seed"] = cfg.seed;
    j["classes"] = names;
    j["loss"] = {{"initial", log.initial_loss}, {"final", log.epoch_loss.empty() ? log.initial_loss : log.epoch_loss.back()}};
    write_json(fs::path(o.out) / "gin_model.json", j);
    write_run_record(o, "gnn-train", cfg, items);
    return kExitOk;
}

GinModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read model '" + path + "'");
    return gin_model_from_json(json::parse(in));
}

int cmd_gnn_embed(const Options& o, const std::string& model_path) {
    const auto cfg = load_config(o);
    const auto model = load_model(model_path);
    const auto items = gather(o);
    std::vector<std::string> errors;
    const auto graphs = gin_graphs(items, cfg, o.jobs, errors);
    std::string csv = "image";
    for (int k = 0; k < model.config.embedding_dim(); ++k) csv += ",e" + std::to_string(k);
    csv += ",label\n";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!errors[i].empty()) continue;
        const Eigen::VectorXd e = embed(model, graphs[i]);
        csv += items[i].key;
        for (Eigen::Index k = 0; k < e.size(); ++k) csv += "," + num(e(k));
        csv += "," + items[i].label + "\n";
    }
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "embeddings.csv", csv);
    write_run_record(o, "gnn-embed", cfg, items);
    return report(items, errors);
}

/// Rows of one or more feature tables (image,...,label), joined on image by
/// concatenating their feature columns.
struct Table {
    std::vector<std::string> keys, labels;
    std::vector<std::vector<double>> rows;
};

Table read_tables(const std::vector<std::string>& paths) {
    Table t;
    std::map<std::string, std::size_t> index;
    for (std::size_t f = 0; f < paths.size(); ++f) {
        std::ifstream in(paths[f]);
        if (!in) throw UsageError("cannot read '" + paths[f] + "'");
        std::string line;
        std::getline(in, line);
        const auto header = split_csv(line);
        if (header.size() < 3 || header.front() != "image" || header.back() != "label")
            throw UsageError("'" + paths[f] + "': header must start with image and end with label");
        std::set<std::string> seen;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = split_csv(line);
            if (cells.size() != header.size()) throw UsageError("'" + paths[f] + "': ragged row for " + cells.front());
            std::vector<double> v;
            for (std::size_t c = 1; c + 1 < cells.size(); ++c) v.push_back(std::stod(cells[c]));
            seen.insert(cells.front());
            if (f == 0) {
                index[cells.front()] = t.keys.size();
                t.keys.push_back(cells.front());
                t.labels.push_back(cells.back());
                t.rows.push_back(std::move(v));
                continue;
            }
            const auto it = index.find(cells.front());
            if (it == index.end()) throw UsageError("'" + cells.front() + "' missing from " + paths.front());
            if (t.labels[it->second] != cells.back()) throw UsageError("label mismatch for '" + cells.front() + "'");
            auto& row = t.rows[it->second];
            row.insert(row.end(), v.begin(), v.end());
        }
        if (f > 0 && seen.size() != t.keys.size()) throw UsageError("'" + paths[f] + "' does not cover every image of " + paths.front());
    }
    return t;
}

int cmd_classify(const Options& o, const std::vector<std::string>& train_paths, const std::vector<std::string>& predict_paths) {
    const auto cfg = load_config(o);
    const Table train = read_tables(train_paths);
    std::vector<std::string> names;
    for (const auto& l : train.labels) {
        if (l.empty()) throw UsageError("training rows need labels");
        if (std::find(names.begin(), names.end(), l) == names.end()) names.push_back(l);
    }
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < train.rows.size(); ++i) samples.push_back({train.rows[i], class_id(names, train.labels[i]), 0});
    const auto model = train_svm(samples, SvmParams{cfg.learn.c_reg});
    for (std::size_t k = 0; k < std::min<std::size_t>(model.warnings.size(), 3); ++k) std::cerr << "warning: " << model.warnings[k] << "\n";
    if (model.warnings.size() > 3) std::cerr << "warning: ... and " << model.warnings.size() - 3 << " more\n";
    fs::create_directories(o.out);
    json j = to_json(model);
    j["classes"] = names;
    write_json(fs::path(o.out) / "svm_model.json", j);

    const Table test = predict_paths.empty() ? train : read_tables(predict_paths);
    std::string csv = "image,predicted,label\n";
    int hit = 0, labelled = 0;
    for (std::size_t i = 0; i < test.rows.size(); ++i) {
        const auto p = predict(model, test.rows[i]);
        const auto& name = names[static_cast<std::size_t>(p.label)];
        csv += test.keys[i] + "," + name + "," + test.labels[i] + "\n";
        if (!test.labels[i].empty()) {
            ++labelled;
            hit += name == test.labels[i];
        }
    }
    write_text(fs::path(o.out) / "predictions.csv", csv);
    if (labelled) std::cout << "accuracy " << num(static_cast<double>(hit) / labelled) << " (" << hit << "/" << labelled << ")\n";
    write_run_record(o, "classify", cfg, {});
    return kExitOk;
}

std::string cv_text(const std::string& title, const CvResult& r, const std::vector<std::string>& names) {
    std::ostringstream s;
    s << title << ": accuracy " << std::fixed << std::setprecision(2) << 100.0 * r.accuracy << "%\n  folds:";
    for (double a : r.fold_accuracies) s << ' ' << 100.0 * a;
    s << "\n  confusion (rows true, columns predicted):\n";
    std::size_t w = 5;
    for (const auto& n : names) w = std::max(w, n.size());
    for (std::size_t i = 0; i < r.confusion.size(); ++i) {
        s << "  " << std::setw(static_cast<int>(w)) << names[i];
        for (int v : r.confusion[i]) s << std::setw(5) << v;
        s << "\n";
    }
    return s.str();
}

int cmd_crossval(const Options& o) {
    if (o.manifest.empty()) throw UsageError("crossval needs --manifest");
    const auto cfg = load_config(o);
    const auto items = gather(o, true);
    const auto names = class_names(o);
    const int crops = o.augment ? cfg.learn.crops : 1;
    if (o.augment)
        for (const auto& it : items)
            if (is_graph_json(it.path)) throw UsageError("--augment needs images, got '" + it.path.string() + "'");

    std::vector<PatchFeatures> data(items.size() * static_cast<std::size_t>(crops));
    const auto errors = for_each_item(items.size(), o.jobs, [&](std::size_t i) {
        if (is_graph_json(items[i].path)) {
            const auto a = analyse_item(items[i], cfg);
            const auto arr = a.features->to_array();
            data[i].stats.assign(arr.begin(), arr.end());
            data[i].graph = GinGraph::from_crack_graph(a.graph);
            return;
        }
        const auto img = io::read_image(items[i].path);
        if (!o.augment) {
            data[i] = patch_features(img, cfg);
            return;
        }
        const int side = cfg.learn.crop_size > 0 ? cfg.learn.crop_size : std::min(img.width, img.height) / 2;
        const auto patches = augment(img, 0, 0, crops, side, std::mt19937_64(cfg.seed + i)());
        for (std::size_t k = 0; k < patches.size(); ++k) data[i * patches.size() + k] = patch_features(patches[k].image, cfg);
    });
    if (report(items, errors) != kExitOk) return kExitPartial;
    // Patches keep their source's group, so grouped folds never split a source.
    std::vector<int> labels, groups;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const int group = items[i].group >= 0 ? items[i].group : static_cast<int>(i);
        for (int k = 0; k < crops; ++k) {
            labels.push_back(class_id(names, items[i].label));
            groups.push_back(group);
        }
    }
    const auto r = run_experiment(data, labels, groups, cfg, o.jobs);
    fs::create_directories(o.out);
    json j{{"seed", cfg.seed}, {"folds", cfg.learn.folds}, {"grouped", cfg.learn.grouped}, {"classes", names},
           {"samples", data.size()}, {"augmented", o.augment}};
    std::string text;
    for (auto [name, res] : {std::pair{"stats", &r.stats}, {"gnn", &r.gnn}, {"combined", &r.combined}}) {
        j[name] = to_json(*res);
        text += cv_text(name, *res, names);
        write_text(fs::path(o.out) / (std::string("confusion_") + name + ".svg"), render_confusion_svg(*res, names, name));
    }
    write_json(fs::path(o.out) / "crossval.json", j);
    write_text(fs::path(o.out) / "crossval.txt", text);
    std::cout << text;
    write_run_record(o, "crossval", cfg, items);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"craq: craquelure pattern analysis from crack images"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* c, bool inputs) {
        c->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
        c->add_option("--seed", o.seed, "root random seed (overrides the config)");
        c->add_option("--order", o.order, "polynomial order n for edge fits");
        c->add_option("--jobs", o.jobs, "files processed concurrently")->check(CLI::PositiveNumber);
        c->add_option("--out", o.out, "output directory");
        if (inputs) {
            c->add_option("inputs", o.inputs, "images, graph JSON files or directories");
            c->add_option("--manifest", o.manifest, "CSV with image,label,group")->check(CLI::ExistingFile);
        }
    };

    std::string family = "all";
    int count = 8, size = 320, crops = 0, crop_size = 0;
    std::optional<double> density, jitter;
    auto* gen = app.add_subcommand("generate", "synthetic crack images and manifest.csv");
    common(gen, false);
    gen->add_option("--family", family, "family name or 'all'");
    gen->add_option("--count", count, "source images per family")->check(CLI::PositiveNumber);
    gen->add_option("--size", size, "source image side in pixels");
    gen->add_option("--crops", crops, "random crops per source (0 writes whole sources)");
    gen->add_option("--crop-size", crop_size, "crop side (default half the source)");
    gen->add_option("--density", density, "fixed density (default drawn per source)");
    gen->add_option("--jitter", jitter, "fixed jitter (default drawn per source)");

    auto* seg = app.add_subcommand("segment", "binary crack masks");
    common(seg, true);
    auto* gra = app.add_subcommand("graph", "crack graphs with node types");
    common(gra, true);
    gra->add_flag("--no-chains", o.no_chains, "omit pixel chains from graph JSON");
    auto* fit = app.add_subcommand("fit", "crack graphs with polynomial edge fits");
    common(fit, true);
    fit->add_flag("--no-chains", o.no_chains, "omit pixel chains from graph JSON");
    auto* sta = app.add_subcommand("stats", "statistical feature table");
    common(sta, true);
    auto* cha = app.add_subcommand("chart", "ternary O/Y/X table and chart");
    common(cha, true);
    auto* pip = app.add_subcommand("pipeline", "graphs, fits, features and ternary chart in one pass");
    common(pip, true);
    pip->add_flag("--no-chains", o.no_chains, "omit pixel chains from graph JSON");

    auto* gtr = app.add_subcommand("gnn-train", "train a GIN on labelled images");
    common(gtr, true);
    std::string model_path;
    auto* gem = app.add_subcommand("gnn-embed", "GIN embeddings table");
    common(gem, true);
    gem->add_option("--model", model_path, "model written by gnn-train")->required()->check(CLI::ExistingFile);

    std::vector<std::string> train_tables, predict_tables;
    auto* cls = app.add_subcommand("classify", "linear SVM on feature tables");
    common(cls, false);
    cls->add_option("--train", train_tables, "feature CSVs joined on image")->required();
    cls->add_option("--predict", predict_tables, "feature CSVs to label (default: the training rows)");

    auto* cv = app.add_subcommand("crossval", "cross-validated stats, GNN and combined classifiers");
    common(cv, true);
    cv->add_flag("--ungrouped", o.ungrouped, "let patches of one source straddle folds");
    cv->add_flag("--augment", o.augment, "crop each image into learn.crops flipped patches first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) return cmd_generate(o, family, count, size, crops, crop_size, density, jitter);
        if (*seg) return cmd_segment(o);
        if (*gra) return cmd_graphs(o, "graph", false, false);
        if (*fit) return cmd_graphs(o, "fit", true, false);
        if (*pip) return cmd_graphs(o, "pipeline", true, true);
        if (*sta) return cmd_stats(o);
        if (*cha) return cmd_chart(o);
        if (*gtr) return cmd_gnn_train(o);
        if (*gem) return cmd_gnn_embed(o, model_path);
        if (*cls) return cmd_classify(o, train_tables, predict_tables);
        if (*cv) return cmd_crossval(o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartial;
    }
    return kExitUsage;
}
