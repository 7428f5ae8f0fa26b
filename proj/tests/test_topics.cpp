#include <bit>
#include <cmath>

#include <gtest/gtest.h>

#include "egoflux/classifier.hpp"
#include "egoflux/random.hpp"
#include "egoflux/topics.hpp"

using namespace egoflux;

namespace {

DistanceMatrix euclidean(const std::vector<std::vector<double>>& pts) {
    DistanceMatrix dm(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            double s = 0;
            for (std::size_t d = 0; d < pts[i].size(); ++d) s += (pts[i][d] - pts[j][d]) * (pts[i][d] - pts[j][d]);
            dm.set(i, j, std::sqrt(s));
        }
    }
    return dm;
}

std::vector<std::vector<double>> clouds(std::size_t per, std::size_t count, double spread, Rng& rng) {
    std::vector<std::vector<double>> pts;
    for (std::size_t c = 0; c < count; ++c) {
        for (std::size_t i = 0; i < per; ++i) pts.push_back({10.0 * c + spread * rng.uniform(), 3.0 * (c % 2) + spread * rng.uniform()});
    }
    return pts;
}

double exhaustive_min(const DistanceMatrix& dm, std::size_t k) {
    const std::size_t n = dm.size();
    double best = INFINITY;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
        double cost = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double near = INFINITY;
            for (std::size_t j = 0; j < n; ++j) {
                if (mask >> j & 1u) near = std::min(near, dm(i, j));
            }
            cost += near;
        }
        best = std::min(best, cost);
    }
    return best;
}

double set_cost(const DistanceMatrix& dm, const std::vector<std::size_t>& medoids) {
    double cost = 0;
    for (std::size_t i = 0; i < dm.size(); ++i) {
        double near = INFINITY;
        for (auto m : medoids) near = std::min(near, dm(i, m));
        cost += near;
    }
    return cost;
}

}  // namespace

TEST(CosineDistance, IdentityOrthogonalAntiparallel) {
    EmbeddingSet e;
    e.dim = 2;
    e.vectors = {{"a", {1, 0}}, {"b", {2, 0}}, {"c", {0, 3}}, {"d", {-1, 0}}};
    const auto dm = cosine_distance_matrix(e, {"a", "b", "c", "d"});
    EXPECT_NEAR(dm(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(dm(0, 2), 1.0, 1e-12);
    EXPECT_NEAR(dm(0, 3), 2.0, 1e-12);
    e.vectors["z"] = {0, 0};
    EXPECT_THROW(cosine_distance_matrix(e, {"a", "z"}), InvalidArgument);
}

TEST(Kmedoids, SeparatesTwoClouds) {
    Rng rng(1);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({0.05 * rng.uniform(), 0.05 * rng.uniform()});
    for (int i = 0; i < 10; ++i) pts.push_back({1.0 + 0.05 * rng.uniform(), 0.05 * rng.uniform()});
    const auto c = kmedoids(euclidean(pts), 2);
    for (int i = 1; i < 10; ++i) EXPECT_EQ(c.assignment[i], c.assignment[0]);
    for (int i = 11; i < 20; ++i) EXPECT_EQ(c.assignment[i], c.assignment[10]);
    EXPECT_NE(c.assignment[0], c.assignment[10]);
}

TEST(Kmedoids, CollinearThreePoints) {
    const auto dm = euclidean({{0.0}, {1.0}, {5.0}});
    const auto c = kmedoids(dm, 2);
    EXPECT_DOUBLE_EQ(c.total_cost, exhaustive_min(dm, 2));
    EXPECT_DOUBLE_EQ(c.total_cost, 1.0);
    EXPECT_THROW(kmedoids(dm, 3), InvalidArgument);
    EXPECT_THROW(kmedoids(dm, 1), InvalidArgument);
}

// BUILD+SWAP is a local search: the result is swap-optimal and never worse
// than BUILD, and it usually (not always) reaches the exhaustive optimum.
TEST(Kmedoids, SwapOptimalAndMostlyGloballyOptimal) {
    Rng rng(2024);
    int optimal = 0;
    const int instances = 300;
    for (int inst = 0; inst < instances; ++inst) {
        const std::size_t n = 4 + rng.below(5);
        const std::size_t k = 2 + rng.below(std::min<std::size_t>(2, n - 2));
        std::vector<std::vector<double>> pts(n);
        for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
        const auto dm = euclidean(pts);
        const auto c = kmedoids(dm, k, inst);
        EXPECT_NEAR(c.total_cost, set_cost(dm, c.medoids), 1e-12);
        for (std::size_t s = 0; s < k; ++s) {
            for (std::size_t h = 0; h < n; ++h) {
                if (std::find(c.medoids.begin(), c.medoids.end(), h) != c.medoids.end()) continue;
                auto m = c.medoids;
                m[s] = h;
                EXPECT_GE(set_cost(dm, m), c.total_cost - 1e-12);
            }
        }
        if (std::abs(c.total_cost - exhaustive_min(dm, k)) < 1e-9) ++optimal;
    }
    EXPECT_GE(optimal, instances * 85 / 100);
}

TEST(Kmedoids, CostTraceNonincreasingAndSwapOptimalAtScale) {
    Rng rng(8);
    const auto pts = clouds(12, 4, 4.0, rng);
    const auto dm = euclidean(pts);
    const auto c = kmedoids(dm, 4, 3);
    for (std::size_t i = 1; i < c.cost_trace.size(); ++i) EXPECT_LE(c.cost_trace[i], c.cost_trace[i - 1]);
    EXPECT_NEAR(c.cost_trace.back(), c.total_cost, 1e-9);
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t h = 0; h < dm.size(); ++h) {
            auto m = c.medoids;
            if (std::find(m.begin(), m.end(), h) != m.end()) continue;
            m[s] = h;
            EXPECT_GE(set_cost(dm, m), c.total_cost - 1e-9);
        }
    }
}

TEST(Kmedoids, SameSeedSameResult) {
    Rng rng(4);
    const auto dm = euclidean(clouds(15, 3, 6.0, rng));
    const auto a = kmedoids(dm, 3, 11), b = kmedoids(dm, 3, 11);
    EXPECT_EQ(a.medoids, b.medoids);
    EXPECT_EQ(a.assignment, b.assignment);
}

TEST(Silhouette, HandComputedFourPoints) {
    DistanceMatrix dm(4);
    dm.set(0, 1, 0.1);
    dm.set(2, 3, 0.1);
    for (int i : {0, 1}) {
        for (int j : {2, 3}) dm.set(i, j, 1.0);
    }
    Clustering c;
    c.k = 2;
    c.medoids = {0, 2};
    c.assignment = {0, 0, 1, 1};
    EXPECT_NEAR(silhouette(dm, c), 0.9, 1e-12);
    // Relabeling clusters leaves the score unchanged.
    c.assignment = {1, 1, 0, 0};
    c.medoids = {2, 0};
    EXPECT_NEAR(silhouette(dm, c), 0.9, 1e-12);
}

TEST(Silhouette, IdenticalPointsScoreZero) {
    DistanceMatrix dm(5);
    const auto c = kmedoids(dm, 2);
    EXPECT_EQ(silhouette(dm, c), 0.0);
}

TEST(Silhouette, SeparatedCloudsAndBounds) {
    Rng rng(1);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({0.05 * rng.uniform(), 0.0});
    for (int i = 0; i < 10; ++i) pts.push_back({1.0 + 0.05 * rng.uniform(), 0.0});
    const auto dm = euclidean(pts);
    EXPECT_GT(silhouette(dm, kmedoids(dm, 2)), 0.8);
    for (std::size_t k = 2; k < 8; ++k) {
        const double s = silhouette(dm, kmedoids(dm, k));
        EXPECT_GE(s, -1.0);
        EXPECT_LE(s, 1.0);
    }
}

TEST(SelectK, FindsThreeClouds) {
    Rng rng(6);
    const auto dm = euclidean(clouds(15, 3, 1.0, rng));
    const auto sel = select_k(dm, 2, 6);
    EXPECT_EQ(sel.k, 3u);
    EXPECT_EQ(sel.scores.size(), 5u);
    EXPECT_EQ(select_k(dm, 2, 2).k, 2u);
    EXPECT_THROW(select_k(dm, 3, 2), InvalidArgument);
}

TEST(Summaries, MeanTfidfRanking) {
    const std::vector<TokenDoc> docs{{"1", {"t", "u"}}, {"2", {"t", "v", "v"}}, {"3", {"w"}}, {"4", {"w", "u"}}};
    const auto model = fit_tfidf(docs, 1);
    Clustering c;
    c.k = 2;
    c.medoids = {0, 2};
    c.assignment = {0, 0, 1, 1};
    const auto topics = summarize_topics(c, model, docs, 3);
    ASSERT_EQ(topics.size(), 2u);
    EXPECT_EQ(topics[0].label, "topic_0");
    // Oracle: average the normalized rows by hand.
    std::map<std::string, double> mean;
    for (int i : {0, 1}) {
        const auto v = transform_tfidf(model, docs[i]);
        const auto toks = model.tokens_by_column();
        for (std::size_t j = 0; j < v.indices.size(); ++j) mean[toks[v.indices[j]]] += v.values[j] / 2.0;
    }
    std::vector<std::pair<std::string, double>> want(mean.begin(), mean.end());
    std::sort(want.begin(), want.end(), [](auto& a, auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
    want.resize(3);
    ASSERT_EQ(topics[0].top_words.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(topics[0].top_words[i].first, want[i].first);
        EXPECT_NEAR(topics[0].top_words[i].second, want[i].second, 1e-12);
    }
}

TEST(Summaries, SharedTokenMeans) {
    // Token counts 4:3 and 3:4 give rows (0.8, 0.6) and (0.6, 0.8).
    TfidfModel m;
    m.vocabulary = {{"t", 0}, {"x", 1}};
    m.idf = {1.0, 1.0};
    m.doc_count = 2;
    Clustering c;
    c.k = 1;
    c.medoids = {0};
    c.assignment = {0, 0};
    const std::vector<TokenDoc> docs{{"1", {"t", "t", "t", "t", "x", "x", "x"}}, {"2", {"t", "t", "t", "x", "x", "x", "x"}}};
    const auto topics = summarize_topics(c, m, docs, 2);
    EXPECT_NEAR(topics[0].top_words[0].second, 0.7, 1e-12);
    EXPECT_NEAR(topics[0].top_words[1].second, 0.7, 1e-12);
}

TEST(Evaluate, HandComputedBinary) {
    std::map<std::string, int> truth, pred;
    int id = 0;
    auto add = [&](int t, int p, int n) {
        for (int i = 0; i < n; ++i) {
            truth[std::to_string(id)] = t;
            pred[std::to_string(id++)] = p;
        }
    };
    add(1, 1, 8);
    add(0, 1, 2);
    add(1, 0, 2);
    add(0, 0, 8);
    const auto r = evaluate(pred, truth);
    for (const auto& c : r.per_class) EXPECT_NEAR(c.f1, 0.8, 1e-12);
    EXPECT_NEAR(r.weighted_f1, 0.8, 1e-12);
    EXPECT_EQ(r.confusion[1][0], 2u);
}

TEST(Evaluate, PerfectAndMissingClass) {
    std::map<std::string, int> truth{{"a", 0}, {"b", 0}, {"c", 1}, {"d", 2}};
    EXPECT_DOUBLE_EQ(evaluate(truth, truth).weighted_f1, 1.0);
    std::map<std::string, int> pred{{"a", 0}, {"b", 0}, {"c", 0}, {"d", 2}};
    const auto r = evaluate(pred, truth);
    EXPECT_EQ(r.per_class[1].f1, 0.0);
    // class 0: p=2/3 r=1 f1=0.8; class 2: f1=1.
    EXPECT_NEAR(r.weighted_f1, 0.5 * 0.8 + 0.25 * 1.0, 1e-12);
}

namespace {

EmbeddingSet blobs(std::size_t n, std::size_t classes, double sep, std::uint64_t seed, std::map<std::string, int>& labels) {
    Rng rng(seed);
    EmbeddingSet e;
    e.dim = 6;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % classes);
        std::vector<double> v(6);
        for (std::size_t d = 0; d < 6; ++d) v[d] = (d == static_cast<std::size_t>(c) ? sep : 0.0) + 0.3 * rng.normal();
        const std::string id = "x" + std::to_string(1000 + i);
        e.vectors[id] = v;
        labels[id] = c;
    }
    return e;
}

}  // namespace

TEST(Classifier, SeparableBlobs) {
    std::map<std::string, int> labels;
    const auto e = blobs(300, 2, 3.0, 1, labels);
    const auto r = train(e, labels);
    EXPECT_GE(r.validation.weighted_f1, 0.99);
    EXPECT_EQ(r.classifier.predict_one({3, 0, 0, 0, 0, 0}), 0);
    EXPECT_EQ(r.classifier.predict_one({0, 3, 0, 0, 0, 0}), 1);
    EXPECT_EQ(r.train_ids.size() + r.validation_ids.size(), 300u);
    EXPECT_EQ(r.validation_ids.size(), 60u);
}

TEST(Classifier, ShuffledLabelsNearChance) {
    std::map<std::string, int> labels;
    const auto e = blobs(1000, 2, 3.0, 2, labels);
    std::vector<int> values;
    for (const auto& [id, c] : labels) values.push_back(c);
    Rng rng(5);
    rng.shuffle(values);
    std::size_t i = 0;
    for (auto& [id, c] : labels) c = values[i++];
    EXPECT_NEAR(train(e, labels).validation.weighted_f1, 0.5, 0.1);
}

TEST(Classifier, ZeroVectorTieGoesToFirstClass) {
    LinearClassifier clf;
    clf.classes = {0, 1, 2};
    clf.dim = 2;
    clf.weights = {{1, 0}, {0, 1}, {-1, -1}};
    clf.biases = {0, 0, 0};
    EXPECT_EQ(clf.predict_one({0, 0}), 0);
    EXPECT_THROW(clf.predict_one({0, 0, 0}), InvalidArgument);
}

TEST(Classifier, StratifiedSplitKeepsEveryClass) {
    std::map<std::string, int> labels;
    for (int i = 0; i < 50; ++i) labels["a" + std::to_string(i)] = 0;
    for (int i = 0; i < 5; ++i) labels["b" + std::to_string(i)] = 1;
    const auto [tr, va] = stratified_split(labels, 0.2, 42);
    EXPECT_EQ(va.size(), 10u + 1u);
    EXPECT_EQ(tr.size() + va.size(), 55u);
    labels["lonely"] = 7;
    EXPECT_THROW(stratified_split(labels, 0.2, 42), InvalidArgument);
}

TEST(Classifier, DeterministicAndSerializable) {
    std::map<std::string, int> labels;
    const auto e = blobs(120, 3, 2.0, 3, labels);
    const auto a = train(e, labels), b = train(e, labels);
    EXPECT_EQ(a.classifier.weights, b.classifier.weights);
    const auto back = classifier_from_json(nlohmann::json::parse(classifier_to_json(a.classifier).dump()));
    EXPECT_EQ(predict(back, e), predict(a.classifier, e));
    EXPECT_EQ(back.weights, a.classifier.weights);
}
