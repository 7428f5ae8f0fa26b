#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egoflux/egoflux.hpp"

namespace fs = std::filesystem;
using namespace egoflux;

namespace {

struct CorpusArgs {
    std::string format = "csv";
    std::string start;
    std::string end;
    bool strict = false;

    void add(CLI::App* app, bool window_required) {
        app->add_option("--format", format, "Input format")->check(CLI::IsMember({"csv", "jsonl"}));
        auto* s = app->add_option("--start", start, "Window start (ISO-8601, inclusive)");
        auto* e = app->add_option("--end", end, "Window end (ISO-8601, inclusive; a bare date means end of day)");
        if (window_required) {
            s->required();
            e->required();
        }
        app->add_flag("--strict", strict, "Fail on the first malformed row instead of skipping it");
    }

    TimeWindow window() const {
        TimeWindow w{UtcTime{std::numeric_limits<std::int64_t>::min() / 2}, UtcTime{std::numeric_limits<std::int64_t>::max() / 2}};
        if (!start.empty()) w.start = parse_window_bound(start, false);
        if (!end.empty()) w.end = parse_window_bound(end, true);
        return w;
    }

    LoadOptions options() const { return {format == "csv" ? CorpusFormat::csv : CorpusFormat::jsonl, window(), strict}; }
};

void report_load(const std::string& what, const LoadStats& s) {
    std::fprintf(stderr, "%s: %zu rows read, dropped %zu out of window, %zu malformed, %zu duplicate\n", what.c_str(),
                 s.rows_read, s.dropped_out_of_window, s.dropped_malformed, s.dropped_duplicate);
    for (const auto& w : s.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

void emit(const std::string& path, const std::string& body) {
    if (path.empty() || path == "-") {
        std::cout << body;
    } else {
        write_file(path, body);
    }
}

std::set<std::string> split_handles(const std::vector<std::string>& raw) {
    std::set<std::string> out;
    for (const auto& r : raw) out.insert(canonical_handle(r));
    return out;
}

struct TopicsArgs {
    TopicsConfig cfg;
    std::optional<std::size_t> k;
    std::string stopwords;

    void add(CLI::App* app) {
        app->add_option("--k-min", cfg.k_min, "Smallest k tried by silhouette selection")->capture_default_str();
        app->add_option("--k-max", cfg.k_max, "Largest k tried by silhouette selection")->capture_default_str();
        app->add_option("--k", k, "Fixed number of topics (skips selection)");
        app->add_option("--top-words", cfg.top_words, "Top words kept per topic")->capture_default_str();
        app->add_option("--seed", cfg.seed, "Clustering seed")->capture_default_str();
        app->add_option("--phrase-min-count", cfg.phrase_min_count, "Phrase detector min_count")->capture_default_str();
        app->add_option("--phrase-threshold", cfg.phrase_threshold, "Phrase detector threshold")->capture_default_str();
        app->add_option("--min-df", cfg.min_df, "TF-IDF min document frequency")->capture_default_str();
        app->add_option("--fallback-dim", cfg.fallback_dim, "Dimension of the TF-IDF fallback embedding")->capture_default_str();
        app->add_option("--sample-size", cfg.sample_size, "Cluster a uniform sample of this size (0 = all posts)")->capture_default_str();
        app->add_option("--svm-c", cfg.classifier.c, "Classifier regularization C")->capture_default_str();
        app->add_option("--epochs", cfg.classifier.epochs, "Classifier epochs")->capture_default_str();
        app->add_option("--stopwords", stopwords, "Stopword file, one word per line (default: built-in English list)");
    }

    TopicsConfig config() const {
        TopicsConfig c = cfg;
        c.k = k;
        c.classifier.seed = cfg.seed;
        return c;
    }

    std::set<std::string> stopword_set() const { return stopwords.empty() ? default_stopwords() : load_stopwords(stopwords); }
};

void print_topics(const TopicModelBundle& b) {
    std::fprintf(stderr, "k=%zu embedding=%s dim=%zu validation weighted F1=%.4f\n", b.k, to_string(b.embedding_source).c_str(),
                 b.embedding_dim, b.validation.weighted_f1);
    for (const auto& [k, s] : b.silhouette) std::fprintf(stderr, "  silhouette k=%zu: %.4f\n", k, s);
    for (const auto& t : b.topics) {
        std::string words;
        for (std::size_t i = 0; i < t.top_words.size() && i < 8; ++i) words += (i ? " " : "") + t.top_words[i].first;
        std::fprintf(stderr, "  %s: %s\n", t.label.c_str(), words.c_str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"egoflux: topic-level influence of alters on an ego account"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Load and filter a corpus, optionally ranking the ego's alters");
    CorpusArgs ingest_corpus;
    ingest_corpus.add(ingest, false);
    std::string ingest_path, ingest_out, ingest_ego, ingest_ranking;
    std::size_t ingest_top = 12;
    std::vector<std::string> ingest_exclude;
    ingest->add_option("path", ingest_path, "Corpus file")->required();
    ingest->add_option("--out", ingest_out, "Normalized corpus JSONL (default: stdout)");
    ingest->add_option("--ego", ingest_ego, "Ego handle; enables alter ranking");
    ingest->add_option("--top-n", ingest_top, "Number of alters to rank")->capture_default_str();
    ingest->add_option("--exclude", ingest_exclude, "Handles excluded from ranking")->delimiter(',');
    ingest->add_option("--ranking", ingest_ranking, "Write the alter ranking CSV here");

    // topics
    auto* topics = app.add_subcommand("topics", "Fit the ego topic model and save it as a bundle directory");
    CorpusArgs topics_corpus;
    topics_corpus.add(topics, false);
    TopicsArgs topics_args;
    topics_args.add(topics);
    std::string topics_path, topics_ego, topics_out, topics_emb;
    topics->add_option("corpus", topics_path, "Ego corpus")->required();
    topics->add_option("--ego", topics_ego, "Ego handle (only this author's posts are used)")->required();
    topics->add_option("--embeddings", topics_emb, "Precomputed embeddings (JSONL or CSV) for the ego posts");
    topics->add_option("--out", topics_out, "Bundle directory")->required();

    // classify
    auto* classify = app.add_subcommand("classify", "Label alter posts with a topic-model bundle");
    CorpusArgs classify_corpus;
    classify_corpus.add(classify, false);
    std::string classify_model, classify_emb, classify_path, classify_out;
    std::vector<std::string> classify_alters;
    classify->add_option("--model", classify_model, "Bundle directory written by 'topics'")->required();
    classify->add_option("--embeddings", classify_emb, "Precomputed embeddings for the alter posts");
    classify->add_option("--alters", classify_alters, "Only label these authors")->delimiter(',');
    classify->add_option("--out", classify_out, "Labels CSV (default: stdout)");
    classify->add_option("corpus", classify_path, "Alter corpus")->required();

    // series
    auto* series = app.add_subcommand("series", "Bin labeled posts into weekly per-topic counts");
    CorpusArgs series_window;
    series_window.add(series, true);
    std::vector<std::string> series_labels;
    std::string series_out, series_model;
    std::size_t series_topics = 0;
    int rolling_length = 0, rolling_stride = 1;
    series->add_option("labels", series_labels, "Labels CSVs (post_id,author,created_at,topic)")->required();
    series->add_option("--topics", series_topics, "Number of topics (default: from --model or the largest label + 1)");
    series->add_option("--model", series_model, "Bundle directory; supplies the topic count and the ego labels");
    series->add_option("--rolling-days", rolling_length, "Rolling window length in days (experimental; 0 = weekly bins)");
    series->add_option("--stride-days", rolling_stride, "Rolling window stride in days")->capture_default_str();
    series->add_option("--out", series_out, "Series CSV (default: stdout)");

    // causality
    auto* causality = app.add_subcommand("causality", "Granger scan of every alter against the ego, per topic");
    std::string causality_ego, causality_path, causality_out, causality_csv;
    std::vector<std::string> causality_alters;
    ScanConfig scan;
    bool bh = false;
    double adf_alpha = -1.0;
    causality->add_option("series", causality_path, "Series CSV")->required();
    causality->add_option("--ego", causality_ego, "Ego handle")->required();
    causality->add_option("--alters", causality_alters, "Alters to test (default: every other account)")->delimiter(',');
    causality->add_option("--max-lag", scan.max_lag, "Largest lag tested")->capture_default_str();
    causality->add_option("--alpha", scan.alpha, "Significance level")->capture_default_str();
    causality->add_option("--max-diff", scan.max_diff, "Largest differencing order")->capture_default_str();
    causality->add_option("--adf-alpha", adf_alpha, "ADF level (default: --alpha)");
    causality->add_flag("--bh", bh, "Benjamini-Hochberg adjustment across pairs");
    causality->add_option("--out", causality_out, "Causality matrix JSON (default: stdout)");
    causality->add_option("--csv", causality_csv, "Also write one row per pair and lag here");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Generate synthetic series (and optionally posts) with planted couplings");
    std::string sim_spec, sim_out;
    bool sim_corpus = false;
    std::size_t sim_retweets = 1;
    simulate->add_option("--spec", sim_spec, "Spec JSON")->required();
    simulate->add_option("--out", sim_out, "Output directory")->required();
    simulate->add_flag("--corpus", sim_corpus, "Also write ego_posts.csv and alter_posts.csv");
    simulate->add_option("--retweets-per-week", sim_retweets, "Ego retweets of each alter per week in the corpus")->capture_default_str();

    // report
    auto* report = app.add_subcommand("report", "Render a causality matrix");
    std::string report_matrix, report_groups, report_out, report_model;
    report->add_option("--matrix", report_matrix, "Causality matrix JSON")->required();
    report->add_option("--groups", report_groups, "alter,group CSV");
    report->add_option("--model", report_model, "Bundle directory; adds topic labels, silhouette and classifier metrics");
    report->add_option("--out", report_out, "Output directory")->required();

    // run
    auto* run = app.add_subcommand("run", "Full pipeline: ingest, topics, classify, series, causality, report");
    CorpusArgs run_corpus;
    run_corpus.add(run, true);
    TopicsArgs run_topics;
    run_topics.add(run);
    PipelineConfig pc;
    std::string run_out, run_groups, run_ego_emb, run_alter_emb, run_model_out;
    std::vector<std::string> run_exclude;
    bool run_bh = false;
    double run_adf_alpha = -1.0;
    run->add_option("--ego-corpus", pc.ego_path, "Ego corpus")->required();
    run->add_option("--alter-corpus", pc.alters_path, "Alter corpus")->required();
    run->add_option("--ego", pc.ego_handle, "Ego handle")->required();
    run->add_option("--alters", pc.alters, "Explicit alters (default: rank the ego's retweets)")->delimiter(',');
    run->add_option("--top-n", pc.top_n, "Number of ranked alters")->capture_default_str();
    run->add_option("--exclude", run_exclude, "Handles excluded from ranking")->delimiter(',');
    run->add_option("--ego-embeddings", run_ego_emb, "Precomputed embeddings for ego posts");
    run->add_option("--alter-embeddings", run_alter_emb, "Precomputed embeddings for alter posts");
    run->add_option("--max-lag", pc.scan.max_lag, "Largest lag tested")->capture_default_str();
    run->add_option("--alpha", pc.scan.alpha, "Significance level")->capture_default_str();
    run->add_option("--max-diff", pc.scan.max_diff, "Largest differencing order")->capture_default_str();
    run->add_option("--adf-alpha", run_adf_alpha, "ADF level (default: --alpha)");
    run->add_flag("--bh", run_bh, "Benjamini-Hochberg adjustment across pairs");
    run->add_option("--groups", run_groups, "alter,group CSV");
    run->add_option("--model-out", run_model_out, "Also save the topic-model bundle here");
    run->add_option("--out", run_out, "Report directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            const auto loaded = load_corpus(ingest_path, ingest_corpus.options());
            report_load(ingest_path, loaded.stats);
            std::ostringstream body;
            write_corpus_jsonl(body, loaded.corpus);
            emit(ingest_out, body.str());
            if (!ingest_ego.empty()) {
                const auto ranking = rank_alters(loaded.corpus, ingest_ego, split_handles(ingest_exclude), ingest_top);
                for (const auto& w : ranking.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
                std::ostringstream r;
                csv::write_record(r, {"rank", "alter", "retweets"});
                for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
                    csv::write_record(r, {std::to_string(i + 1), ranking.entries[i].handle, std::to_string(ranking.entries[i].retweet_count)});
                }
                if (ingest_ranking.empty()) {
                    std::cerr << r.str();
                } else {
                    write_file(ingest_ranking, r.str());
                }
            }
        } else if (*topics) {
            auto loaded = load_corpus(topics_path, topics_corpus.options());
            report_load(topics_path, loaded.stats);
            const std::string ego = canonical_handle(topics_ego);
            std::erase_if(loaded.corpus.posts, [&](const Post& p) { return p.author != ego; });
            const auto fit = fit_topic_model(loaded.corpus, ego, topics_args.config(),
                                             topics_emb.empty() ? std::nullopt : std::optional<std::string>(topics_emb),
                                             topics_args.stopword_set());
            for (const auto& w : fit.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            if (!fit.unlabeled_ids.empty()) std::fprintf(stderr, "%zu ego post(s) left unlabeled\n", fit.unlabeled_ids.size());
            save_bundle(fit.bundle, topics_out, loaded.corpus);
            print_topics(fit.bundle);
        } else if (*classify) {
            const auto bundle = load_bundle(classify_model);
            auto loaded = load_corpus(classify_path, classify_corpus.options());
            report_load(classify_path, loaded.stats);
            if (!classify_alters.empty()) {
                const auto keep = split_handles(classify_alters);
                std::erase_if(loaded.corpus.posts, [&](const Post& p) { return !keep.count(p.author); });
            }
            const auto c = classify_posts(bundle, loaded.corpus.posts,
                                          classify_emb.empty() ? std::nullopt : std::optional<std::string>(classify_emb));
            if (!c.unlabeled_ids.empty()) std::fprintf(stderr, "%zu post(s) left unlabeled\n", c.unlabeled_ids.size());
            std::ostringstream body;
            write_labels_csv(body, loaded.corpus.posts, c.labels);
            emit(classify_out, body.str());
        } else if (*series) {
            std::vector<LabeledPost> posts;
            std::size_t k = series_topics;
            if (!series_model.empty()) {
                const auto bundle = load_bundle(series_model);
                if (k == 0) k = bundle.k;
                std::ifstream in(fs::path(series_model) / "ego_labels.csv", std::ios::binary);
                for (auto& p : read_labels_csv(in)) posts.push_back(p);
            }
            for (const auto& path : series_labels) {
                std::ifstream in(path, std::ios::binary);
                if (!in) throw IoError("cannot open " + path);
                for (auto& p : read_labels_csv(in)) posts.push_back(p);
            }
            if (k == 0) {
                for (const auto& p : posts) k = std::max(k, static_cast<std::size_t>(p.topic) + 1);
            }
            const auto window = series_window.window();
            std::erase_if(posts, [&](const LabeledPost& p) { return !window.contains(p.created_at); });
            std::ostringstream body;
            if (rolling_length > 0) {
                std::map<std::pair<std::string, int>, std::vector<UtcTime>> groups;
                for (const auto& p : posts) groups[{p.account, p.topic}].push_back(p.created_at);
                csv::write_record(body, {"window_start", "account", "topic", "count"});
                for (const auto& [key, times] : groups) {
                    const auto counts = rolling_counts(times, window.start, window.end, rolling_length, rolling_stride);
                    for (std::size_t i = 0; i < counts.size(); ++i) {
                        const UtcTime at{window.start.seconds + static_cast<std::int64_t>(i) * rolling_stride * kSecondsPerDay};
                        csv::write_record(body, {format_iso8601(at), key.first, std::to_string(key.second), std::to_string(counts[i])});
                    }
                }
            } else {
                write_series_csv(body, bin_posts(posts, build_week_index(window), k));
            }
            emit(series_out, body.str());
        } else if (*causality) {
            const auto set = read_series_csv(causality_path);
            scan.correction = bh ? Correction::benjamini_hochberg : Correction::none;
            if (adf_alpha > 0) scan.adf_alpha = adf_alpha;
            std::vector<std::string> alters;
            for (const auto& a : causality_alters) alters.push_back(canonical_handle(a));
            const auto m = causality_scan(set, causality_ego, alters, scan);
            emit(causality_out, dump_stable(causality_to_json(m)));
            if (!causality_csv.empty()) {
                std::ostringstream flat;
                write_causality_csv(flat, m);
                write_file(causality_csv, flat.str());
            }
            std::size_t significant = 0;
            for (const auto& p : m.pairs) significant += p.significant ? 1 : 0;
            std::fprintf(stderr, "%zu pairs tested, %zu significant, %zu skipped\n", m.pairs.size(), significant, m.skipped());
        } else if (*simulate) {
            const auto spec = synth::spec_from_json(nlohmann::json::parse(read_file(sim_spec)));
            fs::create_directories(sim_out);
            const fs::path out(sim_out);
            if (sim_corpus) {
                synth::CorpusSpec cs;
                cs.series = spec;
                cs.retweets_per_alter_week = sim_retweets;
                const auto c = synth::generate_corpus(cs);
                std::ostringstream ego, alters, series_csv;
                write_corpus_csv(ego, c.ego);
                write_corpus_csv(alters, c.alters);
                write_series_csv(series_csv, c.series.series);
                write_file((out / "ego_posts.csv").string(), ego.str());
                write_file((out / "alter_posts.csv").string(), alters.str());
                write_file((out / "series.csv").string(), series_csv.str());
                write_file((out / "truth.json").string(), dump_stable(synth::truth_to_json(c.series.truth)));
                std::fprintf(stderr, "%zu ego posts, %zu alter posts\n", c.ego.posts.size(), c.alters.posts.size());
            } else {
                const auto s = synth::generate_series(spec);
                std::ostringstream series_csv;
                write_series_csv(series_csv, s.series);
                write_file((out / "series.csv").string(), series_csv.str());
                write_file((out / "truth.json").string(), dump_stable(synth::truth_to_json(s.truth)));
            }
            write_file((out / "spec.json").string(), dump_stable(synth::spec_to_json(spec)));
        } else if (*report) {
            ReportBundle b;
            b.matrix = causality_from_json(nlohmann::json::parse(read_file(report_matrix)));
            if (!report_groups.empty()) {
                std::ifstream in(report_groups, std::ios::binary);
                if (!in) throw IoError("cannot open " + report_groups);
                b.grouping = read_groups_csv(in);
            }
            if (!report_model.empty()) {
                const auto bundle = load_bundle(report_model);
                b.topics = bundle.topics;
                b.silhouette = bundle.silhouette;
                b.classifier_eval = bundle.validation;
            }
            b.configuration = {{"matrix", report_matrix}, {"groups", report_groups}, {"model", report_model}};
            write_report_dir(b, report_out);
        } else if (*run) {
            const auto w = run_corpus.window();
            pc.format = run_corpus.format == "csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
            pc.window = w;
            pc.strict = run_corpus.strict;
            pc.exclude = split_handles(run_exclude);
            if (!run_ego_emb.empty()) pc.ego_embeddings = run_ego_emb;
            if (!run_alter_emb.empty()) pc.alter_embeddings = run_alter_emb;
            if (!run_topics.stopwords.empty()) pc.stopwords_path = run_topics.stopwords;
            pc.topics = run_topics.config();
            pc.scan.correction = run_bh ? Correction::benjamini_hochberg : Correction::none;
            if (run_adf_alpha > 0) pc.scan.adf_alpha = run_adf_alpha;
            if (!run_groups.empty()) {
                std::ifstream in(run_groups, std::ios::binary);
                if (!in) throw IoError("cannot open " + run_groups);
                pc.grouping = read_groups_csv(in);
            }
            const auto out = run_pipeline(pc);
            report_load(pc.ego_path, out.ego.stats);
            report_load(pc.alters_path, out.alters.stats);
            for (const auto& w2 : out.warnings) std::fprintf(stderr, "warning: %s\n", w2.c_str());
            print_topics(out.topic_fit.bundle);
            write_report_dir(out.report, run_out);
            if (!run_model_out.empty()) save_bundle(out.topic_fit.bundle, run_model_out, out.ego.corpus);
            std::ostringstream series_csv;
            write_series_csv(series_csv, out.series);
            write_file((fs::path(run_out) / "series.csv").string(), series_csv.str());
            std::fprintf(stderr, "%zu pairs tested, %zu skipped; report in %s\n", out.report.matrix.pairs.size(),
                         out.report.matrix.skipped(), run_out.c_str());
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "egoflux: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "egoflux: unexpected error: %s\n", e.what());
        return 3;
    }
    return 0;
}
