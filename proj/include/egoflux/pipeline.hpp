#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "egoflux/classifier.hpp"
#include "egoflux/corpus.hpp"
#include "egoflux/features.hpp"
#include "egoflux/granger.hpp"
#include "egoflux/report.hpp"
#include "egoflux/series.hpp"
#include "egoflux/stopwords.hpp"
#include "egoflux/textpipe.hpp"
#include "egoflux/topics.hpp"
#include "egoflux/version.hpp"

namespace egoflux {

struct TopicsConfig {
    std::uint64_t phrase_min_count = 5;
    double phrase_threshold = 10.0;
    std::size_t min_df = 2;
    std::size_t fallback_dim = 64;  // clamped to the vocabulary size
    std::uint64_t seed = 42;
    std::size_t k_min = 2;
    std::size_t k_max = 12;
    std::optional<std::size_t> k;  // overrides silhouette selection
    std::size_t top_words = 50;
    std::size_t sample_size = 0;  // 0: PAM on every post; otherwise PAM on a uniform sample
    TrainConfig classifier;
};

/// Everything needed to label new posts exactly as the ego's posts were labeled.
struct TopicModelBundle {
    std::string ego;
    PhraseModel phrases;
    std::vector<std::string> stopwords;
    TfidfModel tfidf;
    EmbeddingSource embedding_source = EmbeddingSource::tfidf_fallback;
    std::size_t embedding_dim = 0;
    std::optional<FallbackEncoder> encoder;
    std::size_t k = 0;
    std::vector<std::string> medoid_ids;
    std::vector<std::vector<double>> medoid_vectors;
    std::vector<TopicSummary> topics;
    std::map<std::size_t, double> silhouette;
    LinearClassifier classifier;
    EvalReport validation;
    std::map<std::string, int> ego_labels;  // post id -> topic
    TopicsConfig config;

    std::set<std::string> stopword_set() const { return {stopwords.begin(), stopwords.end()}; }
};

struct TopicFitResult {
    TopicModelBundle bundle;
    std::vector<std::string> unlabeled_ids;  // empty documents or missing embeddings
    std::vector<std::string> warnings;
};

inline nlohmann::json topics_config_to_json(const TopicsConfig& c) {
    return {{"phrase_min_count", c.phrase_min_count},
            {"phrase_threshold", c.phrase_threshold},
            {"min_df", c.min_df},
            {"fallback_dim", c.fallback_dim},
            {"seed", c.seed},
            {"k_min", c.k_min},
            {"k_max", c.k_max},
            {"k", c.k ? nlohmann::json(*c.k) : nlohmann::json(nullptr)},
            {"top_words", c.top_words},
            {"sample_size", c.sample_size},
            {"classifier",
             {{"c", c.classifier.c},
              {"epochs", c.classifier.epochs},
              {"seed", c.classifier.seed},
              {"validation_fraction", c.classifier.validation_fraction}}}};
}

inline TopicsConfig topics_config_from_json(const nlohmann::json& j) {
    TopicsConfig c;
    c.phrase_min_count = j.at("phrase_min_count").get<std::uint64_t>();
    c.phrase_threshold = j.at("phrase_threshold").get<double>();
    c.min_df = j.at("min_df").get<std::size_t>();
    c.fallback_dim = j.at("fallback_dim").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.k_min = j.at("k_min").get<std::size_t>();
    c.k_max = j.at("k_max").get<std::size_t>();
    if (!j.at("k").is_null()) c.k = j.at("k").get<std::size_t>();
    c.top_words = j.at("top_words").get<std::size_t>();
    c.sample_size = j.at("sample_size").get<std::size_t>();
    const auto& t = j.at("classifier");
    c.classifier.c = t.at("c").get<double>();
    c.classifier.epochs = t.at("epochs").get<int>();
    c.classifier.seed = t.at("seed").get<std::uint64_t>();
    c.classifier.validation_fraction = t.at("validation_fraction").get<double>();
    return c;
}

/// Embeddings for `docs`: read from `embeddings_path` when given, otherwise
/// produced by the bundle's fallback encoder.
inline EmbeddingSet embed_docs(const TopicModelBundle& b, const std::vector<TokenDoc>& docs,
                               const std::optional<std::string>& embeddings_path) {
    if (embeddings_path) {
        EmbeddingSet e = load_embeddings(*embeddings_path, docs, false);
        if (!e.vectors.empty() && b.embedding_dim && e.dim != b.embedding_dim) {
            throw InvalidArgument("embedding dimension " + std::to_string(e.dim) + " does not match the topic model (" +
                                  std::to_string(b.embedding_dim) + ")");
        }
        return e;
    }
    if (!b.encoder) throw InvalidArgument("topic model was fitted on external embeddings; an embedding file is required");
    return encode_fallback(*b.encoder, b.tfidf, docs);
}

inline bool usable_vector(const std::vector<double>& v) {
    for (double x : v) {
        if (x != 0.0) return true;
    }
    return false;
}

/// Fits the ego-only topic model: phrases, TF-IDF, embeddings, PAM clustering
/// with silhouette-based k selection, topic summaries, and the classifier.
inline TopicFitResult fit_topic_model(const Corpus& ego, const std::string& ego_handle, const TopicsConfig& cfg,
                                      const std::optional<std::string>& embeddings_path = std::nullopt,
                                      const std::set<std::string>& stopwords = default_stopwords()) {
    TopicFitResult r;
    TopicModelBundle& b = r.bundle;
    b.ego = canonical_handle(ego_handle);
    b.config = cfg;
    b.stopwords.assign(stopwords.begin(), stopwords.end());
    b.phrases = fit_phrases(tokenize_posts(ego.posts), cfg.phrase_min_count, cfg.phrase_threshold);
    const auto docs = make_token_docs(ego.posts, b.phrases, stopwords);
    b.tfidf = fit_tfidf(docs, cfg.min_df);

    EmbeddingSet emb;
    if (embeddings_path) {
        emb = load_embeddings(*embeddings_path, docs, false);
        b.embedding_source = EmbeddingSource::external_file;
        if (!emb.missing_ids.empty()) {
            r.warnings.push_back(std::to_string(emb.missing_ids.size()) + " ego post(s) have no embedding");
        }
    } else {
        const std::size_t dim = std::min(cfg.fallback_dim, b.tfidf.dim());
        b.encoder = fit_fallback_encoder(b.tfidf, docs, dim, kDefaultFallbackSeed);
        emb = encode_fallback(*b.encoder, b.tfidf, docs);
        b.embedding_source = EmbeddingSource::tfidf_fallback;
    }
    b.embedding_dim = emb.dim;

    std::vector<std::string> ids;
    std::vector<TokenDoc> cluster_docs;
    for (const auto& d : docs) {
        if (emb.contains(d.post_id) && usable_vector(emb.at(d.post_id))) {
            ids.push_back(d.post_id);
            cluster_docs.push_back(d);
        } else {
            r.unlabeled_ids.push_back(d.post_id);
        }
    }
    if (ids.size() < 3) throw InvalidArgument("fit_topic_model: fewer than three ego posts with usable embeddings");

    Clustering clustering;
    auto cluster_at = [&](std::size_t k) -> std::pair<Clustering, double> {
        if (cfg.sample_size > 0 && cfg.sample_size < ids.size()) {
            auto sc = kmedoids_sampled(emb, ids, k, cfg.sample_size, cfg.seed);
            return {sc.clustering, silhouette(sc.sample_distances, sc.sample_clustering)};
        }
        const auto dm = cosine_distance_matrix(emb, ids);
        Clustering c = kmedoids(dm, k, cfg.seed);
        const double s = silhouette(dm, c);
        return {std::move(c), s};
    };
    if (cfg.k) {
        auto [c, s] = cluster_at(*cfg.k);
        b.silhouette[*cfg.k] = s;
        clustering = std::move(c);
        b.k = *cfg.k;
    } else {
        const std::size_t n = cfg.sample_size > 0 ? std::min(cfg.sample_size, ids.size()) : ids.size();
        const std::size_t k_min = std::max<std::size_t>(2, cfg.k_min);
        const std::size_t k_max = std::min(cfg.k_max, n - 1);
        if (k_min > k_max) throw InvalidArgument("fit_topic_model: empty k range");
        if (cfg.sample_size == 0) {
            const auto dm = cosine_distance_matrix(emb, ids);
            auto sel = select_k(dm, k_min, k_max, cfg.seed);
            b.silhouette = sel.scores;
            b.k = sel.k;
            clustering = std::move(sel.clustering);
        } else {
            double best = -2.0;
            for (std::size_t k = k_min; k <= k_max; ++k) {
                auto [c, s] = cluster_at(k);
                b.silhouette[k] = s;
                if (s > best) {
                    best = s;
                    b.k = k;
                    clustering = std::move(c);
                }
            }
        }
    }
    for (auto m : clustering.medoids) {
        b.medoid_ids.push_back(ids[m]);
        b.medoid_vectors.push_back(emb.at(ids[m]));
    }
    b.topics = summarize_topics(clustering, b.tfidf, cluster_docs, cfg.top_words);
    for (std::size_t i = 0; i < ids.size(); ++i) b.ego_labels[ids[i]] = static_cast<int>(clustering.assignment[i]);

    TrainResult tr = train(emb, b.ego_labels, cfg.classifier);
    b.classifier = std::move(tr.classifier);
    b.validation = std::move(tr.validation);
    r.warnings.insert(r.warnings.end(), tr.warnings.begin(), tr.warnings.end());
    return r;
}

struct Classification {
    std::map<std::string, int> labels;
    std::vector<std::string> unlabeled_ids;
};

/// Labels posts with the bundle's text pipeline and classifier.
inline Classification classify_posts(const TopicModelBundle& b, const std::vector<Post>& posts,
                                     const std::optional<std::string>& embeddings_path = std::nullopt) {
    const auto docs = make_token_docs(posts, b.phrases, b.stopword_set());
    const EmbeddingSet emb = embed_docs(b, docs, embeddings_path);
    Classification out;
    for (const auto& d : docs) {
        if (!emb.contains(d.post_id) || !usable_vector(emb.at(d.post_id))) {
            out.unlabeled_ids.push_back(d.post_id);
            continue;
        }
        out.labels[d.post_id] = b.classifier.predict_one(emb.at(d.post_id));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bundle directory

inline constexpr int kBundleVersion = 1;

inline void write_labels_csv(std::ostream& out, const std::vector<Post>& posts, const std::map<std::string, int>& labels) {
    csv::write_record(out, {"post_id", "author", "created_at", "topic"});
    for (const auto& p : posts) {
        auto it = labels.find(p.id);
        if (it == labels.end()) continue;
        csv::write_record(out, {p.id, p.author, format_iso8601(p.created_at), std::to_string(it->second)});
    }
}

inline std::vector<LabeledPost> read_labels_csv(std::istream& in) {
    csv::Reader reader(in);
    auto header = reader.next();
    if (!header) return {};
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;
    for (const char* name : {"post_id", "author", "created_at", "topic"}) {
        if (!col.count(name)) throw ParseError(std::string("labels CSV is missing column '") + name + "'");
    }
    std::vector<LabeledPost> out;
    while (auto rec = reader.next()) {
        if (rec->size() == 1 && rec->front().empty()) continue;
        if (reader.malformed() || rec->size() != header->size()) throw ParseError("malformed labels CSV row");
        auto t = parse_iso8601((*rec)[col["created_at"]]);
        if (!t) throw ParseError("bad created_at in labels CSV");
        out.push_back({canonical_handle((*rec)[col["author"]]), *t, std::stoi((*rec)[col["topic"]])});
    }
    return out;
}

inline void save_bundle(const TopicModelBundle& b, const std::filesystem::path& dir, const Corpus& ego_corpus) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "egoflux.topic_model_bundle";
    manifest["version"] = kBundleVersion;
    manifest["egoflux_version"] = kVersion;
    manifest["ego"] = b.ego;
    manifest["k"] = b.k;
    manifest["embedding_source"] = to_string(b.embedding_source);
    manifest["embedding_dim"] = b.embedding_dim;
    manifest["stopwords"] = b.stopwords;
    manifest["config"] = topics_config_to_json(b.config);
    nlohmann::json sil = nlohmann::json::object();
    for (const auto& [k, s] : b.silhouette) sil[std::to_string(k)] = s;
    manifest["silhouette"] = sil;
    write_file((dir / "manifest.json").string(), dump_stable(manifest));
    write_file((dir / "phrases.json").string(), dump_stable(phrase_model_to_json(b.phrases)));
    write_file((dir / "tfidf.json").string(), dump_stable(tfidf_model_to_json(b.tfidf)));
    if (b.encoder) write_file((dir / "encoder.json").string(), dump_stable(fallback_encoder_to_json(*b.encoder)));
    nlohmann::json medoids = nlohmann::json::array();
    for (std::size_t i = 0; i < b.medoid_ids.size(); ++i) {
        medoids.push_back({{"topic", i}, {"id", b.medoid_ids[i]}, {"vector", b.medoid_vectors[i]}});
    }
    write_file((dir / "medoids.json").string(), dump_stable(medoids));
    write_file((dir / "topics.json").string(), dump_stable(topics_to_json(b.topics)));
    nlohmann::json clf = classifier_to_json(b.classifier);
    clf["validation"] = eval_report_to_json(b.validation);
    write_file((dir / "classifier.json").string(), dump_stable(clf));
    std::ostringstream labels;
    write_labels_csv(labels, ego_corpus.posts, b.ego_labels);
    write_file((dir / "ego_labels.csv").string(), labels.str());
}

inline TopicModelBundle load_bundle(const std::filesystem::path& dir) {
    auto parse = [&](const char* name) { return nlohmann::json::parse(read_file((dir / name).string())); };
    const auto manifest = parse("manifest.json");
    if (manifest.value("format", "") != "egoflux.topic_model_bundle") throw ParseError("not a topic model bundle: " + dir.string());
    if (manifest.value("version", 0) != kBundleVersion) throw ParseError("unsupported topic model bundle version");
    TopicModelBundle b;
    b.ego = manifest.at("ego").get<std::string>();
    b.k = manifest.at("k").get<std::size_t>();
    b.embedding_source = manifest.at("embedding_source").get<std::string>() == "external_file" ? EmbeddingSource::external_file
                                                                                               : EmbeddingSource::tfidf_fallback;
    b.embedding_dim = manifest.at("embedding_dim").get<std::size_t>();
    b.stopwords = manifest.at("stopwords").get<std::vector<std::string>>();
    b.config = topics_config_from_json(manifest.at("config"));
    for (const auto& [k, s] : manifest.at("silhouette").items()) b.silhouette[std::stoul(k)] = s.get<double>();
    b.phrases = phrase_model_from_json(parse("phrases.json"));
    b.tfidf = tfidf_model_from_json(parse("tfidf.json"));
    if (std::filesystem::exists(dir / "encoder.json")) b.encoder = fallback_encoder_from_json(parse("encoder.json"));
    for (const auto& m : parse("medoids.json")) {
        b.medoid_ids.push_back(m.at("id").get<std::string>());
        b.medoid_vectors.push_back(m.at("vector").get<std::vector<double>>());
    }
    b.topics = topics_from_json(parse("topics.json"));
    const auto clf = parse("classifier.json");
    b.classifier = classifier_from_json(clf);
    b.validation = eval_report_from_json(clf.at("validation"));
    std::ifstream labels(dir / "ego_labels.csv", std::ios::binary);
    if (labels) {
        csv::Reader reader(labels);
        reader.next();
        while (auto rec = reader.next()) {
            if (rec->size() >= 4) b.ego_labels[(*rec)[0]] = std::stoi((*rec)[3]);
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Full run

struct PipelineConfig {
    std::string ego_path;
    std::string alters_path;
    CorpusFormat format = CorpusFormat::csv;
    TimeWindow window;
    bool strict = false;
    std::string ego_handle;
    std::vector<std::string> alters;  // empty: rank the ego's retweets
    std::size_t top_n = 12;
    std::set<std::string> exclude;
    std::optional<std::string> ego_embeddings;
    std::optional<std::string> alter_embeddings;
    std::optional<std::string> stopwords_path;  // default: built-in English list
    TopicsConfig topics;
    ScanConfig scan;
    std::map<std::string, std::string> grouping;
};

inline nlohmann::json pipeline_config_to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["ego_path"] = c.ego_path;
    j["alters_path"] = c.alters_path;
    j["format"] = c.format == CorpusFormat::csv ? "csv" : "jsonl";
    j["window"] = {{"start", format_iso8601(c.window.start)}, {"end", format_iso8601(c.window.end)}};
    j["strict"] = c.strict;
    j["ego_handle"] = canonical_handle(c.ego_handle);
    j["alters"] = c.alters;
    j["top_n"] = c.top_n;
    j["exclude"] = c.exclude;
    j["ego_embeddings"] = c.ego_embeddings ? nlohmann::json(*c.ego_embeddings) : nlohmann::json(nullptr);
    j["alter_embeddings"] = c.alter_embeddings ? nlohmann::json(*c.alter_embeddings) : nlohmann::json(nullptr);
    j["stopwords_path"] = c.stopwords_path ? nlohmann::json(*c.stopwords_path) : nlohmann::json(nullptr);
    j["topics"] = topics_config_to_json(c.topics);
    j["fallback_seed"] = kDefaultFallbackSeed;
    j["scan"] = {{"max_lag", c.scan.max_lag},
                 {"alpha", c.scan.alpha},
                 {"correction", to_string(c.scan.correction)},
                 {"max_diff", c.scan.max_diff},
                 {"adf_alpha", c.scan.adf_alpha ? nlohmann::json(*c.scan.adf_alpha) : nlohmann::json(nullptr)}};
    return j;
}

struct RunOutputs {
    LoadedCorpus ego;
    LoadedCorpus alters;
    AlterRanking ranking;
    TopicFitResult topic_fit;
    Classification alter_labels;
    SeriesSet series;
    ReportBundle report;
    std::vector<std::string> warnings;
};

inline RunOutputs run_pipeline(const PipelineConfig& cfg) {
    RunOutputs out;
    const LoadOptions opts{cfg.format, cfg.window, cfg.strict};
    out.ego = load_corpus(cfg.ego_path, opts);
    out.alters = load_corpus(cfg.alters_path, opts);
    const std::string ego = canonical_handle(cfg.ego_handle);

    // Only the ego's own posts feed the topic model and the ego series.
    std::erase_if(out.ego.corpus.posts, [&](const Post& p) { return p.author != ego; });

    std::vector<std::string> alters;
    if (cfg.alters.empty()) {
        out.ranking = rank_alters(out.ego.corpus, ego, cfg.exclude, cfg.top_n);
        alters = out.ranking.handles();
        out.warnings.insert(out.warnings.end(), out.ranking.warnings.begin(), out.ranking.warnings.end());
    } else {
        for (const auto& a : cfg.alters) alters.push_back(canonical_handle(a));
    }
    const std::set<std::string> alter_set(alters.begin(), alters.end());
    std::vector<Post> alter_posts;
    for (const auto& p : out.alters.corpus.posts) {
        if (alter_set.count(p.author)) alter_posts.push_back(p);
    }

    out.topic_fit = fit_topic_model(out.ego.corpus, ego, cfg.topics, cfg.ego_embeddings,
                                    cfg.stopwords_path ? load_stopwords(*cfg.stopwords_path) : default_stopwords());
    const TopicModelBundle& b = out.topic_fit.bundle;
    out.warnings.insert(out.warnings.end(), out.topic_fit.warnings.begin(), out.topic_fit.warnings.end());
    out.alter_labels = classify_posts(b, alter_posts, cfg.alter_embeddings);

    std::vector<LabeledPost> labeled;
    for (const auto& p : out.ego.corpus.posts) {
        if (auto it = b.ego_labels.find(p.id); it != b.ego_labels.end()) labeled.push_back({p.author, p.created_at, it->second});
    }
    for (const auto& p : alter_posts) {
        if (auto it = out.alter_labels.labels.find(p.id); it != out.alter_labels.labels.end()) {
            labeled.push_back({p.author, p.created_at, it->second});
        }
    }
    std::vector<std::string> accounts = alters;
    accounts.push_back(ego);
    out.series = bin_posts(labeled, build_week_index(cfg.window), b.k, accounts);

    ReportBundle& r = out.report;
    r.matrix = causality_scan(out.series, ego, alters, cfg.scan);
    r.topics = b.topics;
    r.classifier_eval = b.validation;
    r.silhouette = b.silhouette;
    r.configuration = pipeline_config_to_json(cfg);
    r.grouping = cfg.grouping;
    r.metrics = {{"ego_posts", out.ego.corpus.posts.size()},
                 {"ego_unlabeled", out.topic_fit.unlabeled_ids.size()},
                 {"alter_posts", alter_posts.size()},
                 {"alter_unlabeled", out.alter_labels.unlabeled_ids.size()},
                 {"dropped_rows", out.ego.stats.dropped() + out.alters.stats.dropped()},
                 {"selected_k", b.k},
                 {"embedding_source", to_string(b.embedding_source)},
                 {"embedding_dim", b.embedding_dim},
                 {"n_weeks", out.series.weeks.n_weeks},
                 {"alters", alters}};
    return out;
}

/// Writes report.json, matrix.csv, heatmap.csv and causality.csv into `dir`.
inline void write_report_dir(const ReportBundle& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ostringstream report, matrix, heatmap, flat;
    emit_run_report(report, r);
    emit_matrix_csv(matrix, r.matrix, r.grouping, r.topics);
    emit_heatmap_data(heatmap, r.matrix);
    write_causality_csv(flat, r.matrix);
    write_file((dir / "report.json").string(), report.str());
    write_file((dir / "matrix.csv").string(), matrix.str());
    write_file((dir / "heatmap.csv").string(), heatmap.str());
    write_file((dir / "causality.csv").string(), flat.str());
}

}  // namespace egoflux
