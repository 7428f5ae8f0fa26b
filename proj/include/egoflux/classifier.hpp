#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <tuple>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "egoflux/error.hpp"
#include "egoflux/features.hpp"
#include "egoflux/random.hpp"

namespace egoflux {

struct TrainConfig {
    double c = 1.0;  // regularization: lambda = 1 / (c * n_train)
    int epochs = 200;
    std::uint64_t seed = 42;
    double validation_fraction = 0.2;
};

/// One-vs-rest linear classifier: class scores are w_c . v + b_c.
struct LinearClassifier {
    std::vector<int> classes;                  // topic index per row
    std::vector<std::vector<double>> weights;  // classes.size() x dim
    std::vector<double> biases;
    std::size_t dim = 0;
    TrainConfig config;
    std::size_t n_train = 0;

    /// Row (not topic) with the highest score; ties go to the lowest row.
    std::size_t best_row(const std::vector<double>& v) const {
        if (v.size() != dim) {
            throw InvalidArgument("classifier expects dimension " + std::to_string(dim) + ", got " +
                                  std::to_string(v.size()));
        }
        std::size_t best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < weights.size(); ++c) {
            double s = biases[c];
            for (std::size_t j = 0; j < dim; ++j) s += weights[c][j] * v[j];
            if (s > best_score) {
                best_score = s;
                best = c;
            }
        }
        return best;
    }

    int predict_one(const std::vector<double>& v) const { return classes[best_row(v)]; }
};

struct ClassMetrics {
    int label = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct EvalReport {
    std::vector<ClassMetrics> per_class;                  // ascending label
    std::vector<std::vector<std::size_t>> confusion;      // [truth][predicted], same label order
    double weighted_f1 = 0.0;
};

/// Per-class precision/recall/F1 with 0/0 taken as 0, and the support-weighted F1.
inline EvalReport evaluate(const std::map<std::string, int>& pred, const std::map<std::string, int>& truth) {
    if (pred.size() != truth.size()) throw InvalidArgument("evaluate: prediction and truth key sets differ");
    std::set<int> label_set;
    for (const auto& [id, t] : truth) {
        auto it = pred.find(id);
        if (it == pred.end()) throw InvalidArgument("evaluate: no prediction for id '" + id + "'");
        label_set.insert(t);
        label_set.insert(it->second);
    }
    const std::vector<int> labels(label_set.begin(), label_set.end());
    std::map<int, std::size_t> pos;
    for (std::size_t i = 0; i < labels.size(); ++i) pos[labels[i]] = i;

    EvalReport r;
    r.confusion.assign(labels.size(), std::vector<std::size_t>(labels.size(), 0));
    for (const auto& [id, t] : truth) ++r.confusion[pos[t]][pos[pred.at(id)]];

    std::size_t total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ClassMetrics m;
        m.label = labels[i];
        std::size_t predicted = 0;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            m.support += r.confusion[i][j];
            predicted += r.confusion[j][i];
        }
        const double tp = static_cast<double>(r.confusion[i][i]);
        m.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
        m.recall = m.support ? tp / static_cast<double>(m.support) : 0.0;
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        total += m.support;
        r.per_class.push_back(m);
    }
    for (const auto& m : r.per_class) {
        r.weighted_f1 += total ? static_cast<double>(m.support) / static_cast<double>(total) * m.f1 : 0.0;
    }
    return r;
}

struct TrainResult {
    LinearClassifier classifier;
    EvalReport validation;
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
    std::vector<std::string> warnings;
};

/// Stratified split: within each class (ids in sorted order, then a seeded
/// shuffle) round(fraction * n_c) members go to validation, clamped to
/// [1, n_c - 1].
inline std::pair<std::vector<std::string>, std::vector<std::string>> stratified_split(
    const std::map<std::string, int>& labels, double fraction, std::uint64_t seed) {
    std::map<int, std::vector<std::string>> by_class;
    for (const auto& [id, c] : labels) by_class[c].push_back(id);
    Rng rng(seed);
    std::vector<std::string> train, val;
    for (auto& [c, ids] : by_class) {
        if (ids.size() < 2) throw InvalidArgument("class " + std::to_string(c) + " has a single member; cannot stratify");
        rng.shuffle(ids);
        auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
        val.insert(val.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
        train.insert(train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

/// Fits one hinge-loss linear model per class by Pegasos-style subgradient
/// descent (step 1 / (lambda * t)); the bias is an extra constant feature.
/// Training visits examples in one seeded order, identical for every epoch.
inline LinearClassifier fit_linear_ovr(const EmbeddingSet& emb, const std::map<std::string, int>& labels,
                                       const std::vector<std::string>& ids, const TrainConfig& cfg) {
    std::set<int> class_set;
    for (const auto& id : ids) class_set.insert(labels.at(id));
    if (class_set.size() < 2) throw InvalidArgument("training requires at least two classes");

    LinearClassifier clf;
    clf.classes.assign(class_set.begin(), class_set.end());
    clf.dim = emb.dim;
    clf.config = cfg;
    clf.n_train = ids.size();

    std::vector<const std::vector<double>*> xs;
    for (const auto& id : ids) {
        const auto& v = emb.at(id);
        if (v.size() != emb.dim) throw InvalidArgument("embedding dimension mismatch for id '" + id + "'");
        xs.push_back(&v);
    }
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed + 1);
    rng.shuffle(order);

    const double lambda = 1.0 / (cfg.c * static_cast<double>(ids.size()));
    const std::size_t d = emb.dim;
    for (int label : clf.classes) {
        std::vector<double> w(d + 1, 0.0);
        std::uint64_t t = 0;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            for (auto idx : order) {
                ++t;
                const double eta = 1.0 / (lambda * static_cast<double>(t));
                const auto& x = *xs[idx];
                const double y = labels.at(ids[idx]) == label ? 1.0 : -1.0;
                double margin = w[d];
                for (std::size_t j = 0; j < d; ++j) margin += w[j] * x[j];
                const double shrink = 1.0 - eta * lambda;
                for (double& wj : w) wj *= shrink;
                if (y * margin < 1.0) {
                    for (std::size_t j = 0; j < d; ++j) w[j] += eta * y * x[j];
                    w[d] += eta * y;
                }
            }
        }
        clf.biases.push_back(w[d]);
        w.pop_back();
        clf.weights.push_back(std::move(w));
    }
    return clf;
}

inline std::map<std::string, int> predict(const LinearClassifier& clf, const EmbeddingSet& emb) {
    if (emb.dim != clf.dim) {
        throw InvalidArgument("embedding dimension " + std::to_string(emb.dim) + " does not match classifier dimension " +
                              std::to_string(clf.dim));
    }
    std::map<std::string, int> out;
    for (const auto& [id, v] : emb.vectors) out[id] = clf.predict_one(v);
    return out;
}

/// Stratified train/validation split, one-vs-rest training on the train part,
/// and an evaluation on the held-out part.
inline TrainResult train(const EmbeddingSet& emb, const std::map<std::string, int>& labels,
                         const TrainConfig& cfg = {}) {
    TrainResult r;
    std::map<int, std::size_t> counts;
    for (const auto& [id, c] : labels) {
        if (!emb.contains(id)) throw InvalidArgument("labeled id '" + id + "' has no embedding");
        ++counts[c];
    }
    if (counts.size() < 2) throw InvalidArgument("training requires at least two classes");
    for (const auto& [c, n] : counts) {
        if (n < 5) r.warnings.push_back("class " + std::to_string(c) + " has only " + std::to_string(n) + " member(s)");
    }
    std::tie(r.train_ids, r.validation_ids) = stratified_split(labels, cfg.validation_fraction, cfg.seed);
    r.classifier = fit_linear_ovr(emb, labels, r.train_ids, cfg);

    std::map<std::string, int> pred, truth;
    for (const auto& id : r.validation_ids) {
        pred[id] = r.classifier.predict_one(emb.at(id));
        truth[id] = labels.at(id);
    }
    r.validation = evaluate(pred, truth);
    return r;
}

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["weighted_f1"] = r.weighted_f1;
    j["confusion"] = r.confusion;
    j["per_class"] = nlohmann::json::array();
    for (const auto& m : r.per_class) {
        j["per_class"].push_back({{"label", m.label},
                                  {"precision", m.precision},
                                  {"recall", m.recall},
                                  {"f1", m.f1},
                                  {"support", m.support}});
    }
    return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.weighted_f1 = j.at("weighted_f1").get<double>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    for (const auto& m : j.at("per_class")) {
        r.per_class.push_back({m.at("label").get<int>(), m.at("precision").get<double>(), m.at("recall").get<double>(),
                               m.at("f1").get<double>(), m.at("support").get<std::size_t>()});
    }
    return r;
}

inline constexpr int kClassifierVersion = 1;

inline nlohmann::json classifier_to_json(const LinearClassifier& c) {
    nlohmann::json j;
    j["format"] = "egoflux.linear_classifier";
    j["version"] = kClassifierVersion;
    j["classes"] = c.classes;
    j["weights"] = c.weights;
    j["biases"] = c.biases;
    j["dim"] = c.dim;
    j["n_train"] = c.n_train;
    j["config"] = {{"c", c.config.c},
                   {"epochs", c.config.epochs},
                   {"seed", c.config.seed},
                   {"validation_fraction", c.config.validation_fraction}};
    return j;
}

inline LinearClassifier classifier_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "egoflux.linear_classifier") throw ParseError("not a linear classifier");
    if (j.value("version", 0) != kClassifierVersion) throw ParseError("unsupported classifier version");
    LinearClassifier c;
    c.classes = j.at("classes").get<std::vector<int>>();
    c.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    c.biases = j.at("biases").get<std::vector<double>>();
    c.dim = j.at("dim").get<std::size_t>();
    c.n_train = j.at("n_train").get<std::size_t>();
    const auto& cfg = j.at("config");
    c.config.c = cfg.at("c").get<double>();
    c.config.epochs = cfg.at("epochs").get<int>();
    c.config.seed = cfg.at("seed").get<std::uint64_t>();
    c.config.validation_fraction = cfg.at("validation_fraction").get<double>();
    if (c.weights.size() != c.classes.size() || c.biases.size() != c.classes.size()) {
        throw ParseError("classifier weights, biases and classes disagree in size");
    }
    return c;
}

}  // namespace egoflux
