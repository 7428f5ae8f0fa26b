#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "egoflux/corpus.hpp"
#include "egoflux/error.hpp"
#include "egoflux/granger.hpp"
#include "egoflux/random.hpp"
#include "egoflux/series.hpp"

namespace egoflux::synth {

struct Coupling {
    int topic = 0;
    int lag = 1;
    double strength = 0.0;
};

struct AlterSpec {
    std::string handle;
    std::vector<Coupling> couplings;
};

struct SynthSpec {
    std::size_t n_weeks = 300;
    std::size_t topics = 4;
    std::string ego = "ego";
    std::vector<AlterSpec> alters;
    double rho = 0.3;             // AR(1) coefficient; 1.0 gives random walks
    double noise_variance = 1.0;
    double mean_level = 10.0;     // offset added before rounding to counts
    std::uint64_t seed = 42;
    std::string start = "2017-01-16";  // a Monday
    std::size_t burn_in = 100;
};

struct PlantedCoupling {
    std::string alter;
    int topic = 0;
    int lag = 1;
    double strength = 0.0;
};

struct SynthOutput {
    SeriesSet series;
    std::vector<PlantedCoupling> truth;
    std::map<std::string, std::vector<std::vector<double>>> latent;  // account -> topic -> pre-rounding level
};

inline void validate(const SynthSpec& spec) {
    if (spec.n_weeks < 8) throw InvalidArgument("synth: n_weeks must be >= 8");
    if (spec.topics < 1) throw InvalidArgument("synth: topics must be >= 1");
    if (!(spec.noise_variance > 0.0)) throw InvalidArgument("synth: noise_variance must be positive");
    if (!parse_iso8601(spec.start)) throw InvalidArgument("synth: bad start date '" + spec.start + "'");
    std::set<std::string> handles{canonical_handle(spec.ego)};
    for (const auto& a : spec.alters) {
        if (!handles.insert(canonical_handle(a.handle)).second) throw InvalidArgument("synth: duplicate handle '" + a.handle + "'");
        for (const auto& c : a.couplings) {
            if (c.topic < 0 || static_cast<std::size_t>(c.topic) >= spec.topics) throw InvalidArgument("synth: coupling topic out of range");
            if (c.lag < 1 || static_cast<std::size_t>(c.lag) > spec.n_weeks / 4) throw InvalidArgument("synth: coupling lag must be in [1, n_weeks/4]");
            if (!std::isfinite(c.strength)) throw InvalidArgument("synth: coupling strength must be finite");
        }
    }
}

/// Alter series a_t = rho a_{t-1} + e; ego series
/// e_t = rho e_{t-1} + sum(strength * a_{t-lag}) + e. Counts are
/// max(0, round(level + mean_level)). All randomness comes from `seed`.
inline SynthOutput generate_series(const SynthSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    const double sd = std::sqrt(spec.noise_variance);
    const std::size_t total = spec.n_weeks + spec.burn_in;
    const std::string ego = canonical_handle(spec.ego);

    std::map<std::string, std::vector<std::vector<double>>> levels;
    auto ar = [&](std::vector<double>& v, std::size_t t) { return t == 0 ? 0.0 : spec.rho * v[t - 1]; };
    for (const auto& a : spec.alters) {
        auto& per_topic = levels[canonical_handle(a.handle)];
        per_topic.assign(spec.topics, std::vector<double>(total, 0.0));
        for (std::size_t k = 0; k < spec.topics; ++k) {
            for (std::size_t t = 0; t < total; ++t) per_topic[k][t] = ar(per_topic[k], t) + sd * rng.normal();
        }
    }
    auto& ego_levels = levels[ego];
    ego_levels.assign(spec.topics, std::vector<double>(total, 0.0));
    SynthOutput out;
    for (std::size_t k = 0; k < spec.topics; ++k) {
        for (std::size_t t = 0; t < total; ++t) {
            double v = ar(ego_levels[k], t) + sd * rng.normal();
            for (const auto& a : spec.alters) {
                for (const auto& c : a.couplings) {
                    if (static_cast<std::size_t>(c.topic) != k || t < static_cast<std::size_t>(c.lag)) continue;
                    v += c.strength * levels[canonical_handle(a.handle)][k][t - static_cast<std::size_t>(c.lag)];
                }
            }
            ego_levels[k][t] = v;
        }
    }
    for (const auto& a : spec.alters) {
        for (const auto& c : a.couplings) out.truth.push_back({canonical_handle(a.handle), c.topic, c.lag, c.strength});
    }

    const auto start = parse_window_bound(spec.start, false);
    out.series.weeks = build_week_index({start, start});
    out.series.weeks.n_weeks = spec.n_weeks;
    out.series.topics = spec.topics;
    for (auto& [account, per_topic] : levels) {
        auto& kept = out.latent[account];
        for (std::size_t k = 0; k < spec.topics; ++k) {
            std::vector<double> tail(per_topic[k].begin() + static_cast<std::ptrdiff_t>(spec.burn_in), per_topic[k].end());
            TopicSeries s{account, static_cast<int>(k), {}};
            for (double v : tail) s.counts.push_back(std::max<std::int64_t>(0, std::llround(v + spec.mean_level)));
            out.series.series.push_back(std::move(s));
            kept.push_back(std::move(tail));
        }
    }
    return out;
}

struct DetectionScore {
    double precision = 1.0;
    double recall = 1.0;
    double lag_accuracy = 1.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    bool precision_undefined = false;     // no detections: precision reported as 1.0
    bool lag_accuracy_undefined = false;  // no true positives: lag accuracy reported as 1.0
};

/// A detection is a pair whose best-lag p-value is below alpha.
inline DetectionScore score_detection(const CausalityMatrix& m, const std::vector<PlantedCoupling>& truth, double alpha) {
    std::map<std::pair<std::string, int>, std::set<int>> planted;
    for (const auto& c : truth) planted[{canonical_handle(c.alter), c.topic}].insert(c.lag);
    DetectionScore s;
    std::size_t lag_hits = 0;
    std::set<std::pair<std::string, int>> found;
    for (const auto& p : m.pairs) {
        if (!p.best_lag || !(p.best_p < alpha)) continue;
        auto it = planted.find({p.alter, p.topic});
        if (it == planted.end()) {
            ++s.false_positives;
            continue;
        }
        ++s.true_positives;
        found.insert(it->first);
        if (it->second.count(*p.best_lag)) ++lag_hits;
    }
    s.false_negatives = planted.size() - found.size();
    const std::size_t detections = s.true_positives + s.false_positives;
    if (detections == 0) {
        s.precision = 1.0;
        s.precision_undefined = true;
    } else {
        s.precision = static_cast<double>(s.true_positives) / static_cast<double>(detections);
    }
    s.recall = planted.empty() ? 1.0 : static_cast<double>(found.size()) / static_cast<double>(planted.size());
    if (s.true_positives == 0) {
        s.lag_accuracy = 1.0;
        s.lag_accuracy_undefined = true;
    } else {
        s.lag_accuracy = static_cast<double>(lag_hits) / static_cast<double>(s.true_positives);
    }
    return s;
}

// ---------------------------------------------------------------------------
// JSON

inline SynthSpec spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    s.n_weeks = j.value("n_weeks", s.n_weeks);
    s.topics = j.value("topics", s.topics);
    s.ego = j.value("ego", s.ego);
    s.rho = j.value("rho", s.rho);
    s.noise_variance = j.value("noise_variance", s.noise_variance);
    s.mean_level = j.value("mean_level", s.mean_level);
    s.seed = j.value("seed", s.seed);
    s.start = j.value("start", s.start);
    s.burn_in = j.value("burn_in", s.burn_in);
    for (const auto& a : j.value("alters", nlohmann::json::array())) {
        AlterSpec alter;
        alter.handle = a.at("handle").get<std::string>();
        for (const auto& c : a.value("couplings", nlohmann::json::array())) {
            alter.couplings.push_back({c.at("topic").get<int>(), c.at("lag").get<int>(), c.at("strength").get<double>()});
        }
        s.alters.push_back(std::move(alter));
    }
    validate(s);
    return s;
}

inline nlohmann::json spec_to_json(const SynthSpec& s) {
    nlohmann::json j;
    j["n_weeks"] = s.n_weeks;
    j["topics"] = s.topics;
    j["ego"] = s.ego;
    j["rho"] = s.rho;
    j["noise_variance"] = s.noise_variance;
    j["mean_level"] = s.mean_level;
    j["seed"] = s.seed;
    j["start"] = s.start;
    j["burn_in"] = s.burn_in;
    j["alters"] = nlohmann::json::array();
    for (const auto& a : s.alters) {
        nlohmann::json aj{{"handle", a.handle}, {"couplings", nlohmann::json::array()}};
        for (const auto& c : a.couplings) aj["couplings"].push_back({{"topic", c.topic}, {"lag", c.lag}, {"strength", c.strength}});
        j["alters"].push_back(std::move(aj));
    }
    return j;
}

inline nlohmann::json truth_to_json(const std::vector<PlantedCoupling>& truth) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& c : truth) j.push_back({{"alter", c.alter}, {"topic", c.topic}, {"lag", c.lag}, {"strength", c.strength}});
    return j;
}

inline std::vector<PlantedCoupling> truth_from_json(const nlohmann::json& j) {
    std::vector<PlantedCoupling> out;
    for (const auto& c : j) {
        out.push_back({c.at("alter").get<std::string>(), c.at("topic").get<int>(), c.at("lag").get<int>(),
                       c.at("strength").get<double>()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Text corpora

/// Word pools for the synthetic text generator, one per topic.
inline const std::vector<std::vector<std::string>>& topic_vocabularies() {
    static const std::vector<std::vector<std::string>> pools = {
        {"jobs", "economy", "market", "stocks", "growth", "trade", "tariffs", "china", "record", "unemployment",
         "workers", "manufacturing", "deals", "taxes", "factories", "wages"},
        {"fake", "news", "media", "cnn", "failing", "story", "reporters", "ratings", "dishonest", "press",
         "coverage", "sources", "anonymous", "networks", "pundits", "headlines"},
        {"border", "wall", "security", "immigration", "crime", "illegal", "caravan", "laws", "agents", "dangerous",
         "sanctuary", "cities", "gangs", "drugs", "patrol", "asylum"},
        {"congress", "senate", "vote", "bill", "republicans", "house", "healthcare", "passed", "leader", "schumer",
         "pelosi", "impeachment", "hoax", "hearing", "committee", "majority"},
        {"rally", "crowd", "campaign", "maga", "tonight", "arena", "supporters", "tickets", "speech", "election",
         "voters", "ohio", "florida", "pennsylvania", "victory", "polls"},
        {"military", "veterans", "troops", "defense", "navy", "army", "generals", "heroes", "salute", "strength",
         "missiles", "allies", "nato", "iran", "korea", "peace"},
    };
    return pools;
}

inline const std::vector<std::vector<std::string>>& topic_phrases() {
    static const std::vector<std::vector<std::string>> phrases = {
        {"tax cuts", "stock market"},
        {"fake news", "enemy of the people"},
        {"border security", "build the wall"},
        {"witch hunt", "do nothing democrats"},
        {"make america great again", "keep america great"},
        {"our great military", "god bless"},
    };
    return phrases;
}

struct CorpusSpec {
    SynthSpec series;
    std::size_t retweets_per_alter_week = 0;  // ego retweets; alter i gets (n_alters - i) per 4 weeks
    int words_min = 7;
    int words_max = 14;
};

struct SynthCorpus {
    Corpus ego;
    Corpus alters;
    SynthOutput series;
};

/// Turns synthetic weekly counts into posts with topic-typed text, spread over
/// each week. The ego also retweets alters (original text prefixed "RT @handle:").
inline SynthCorpus generate_corpus(const CorpusSpec& spec) {
    if (spec.series.topics > topic_vocabularies().size()) {
        throw InvalidArgument("synth: text generator supports at most " + std::to_string(topic_vocabularies().size()) + " topics");
    }
    SynthCorpus out;
    out.series = generate_series(spec.series);
    Rng rng(spec.series.seed ^ 0xC0FFEEULL);
    static const std::vector<std::string> filler = {"the", "very", "great", "big", "today", "thank", "you", "we",
                                                    "are", "will", "is", "a", "for", "and", "so", "many", "people",
                                                    "really", "must", "now"};
    const auto& pools = topic_vocabularies();
    const auto& phrases = topic_phrases();
    auto make_text = [&](std::size_t topic) {
        const int n = spec.words_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.words_max - spec.words_min + 1)));
        std::string text;
        for (int i = 0; i < n; ++i) {
            std::string w;
            const double u = rng.uniform();
            if (u < 0.6) {
                w = pools[topic][rng.below(pools[topic].size())];
            } else if (u < 0.72) {
                w = phrases[topic][rng.below(phrases[topic].size())];
            } else {
                w = filler[rng.below(filler.size())];
            }
            if (rng.uniform() < 0.1) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
            if (rng.uniform() < 0.04) w = "#" + w;
            if (!text.empty()) text += ' ';
            text += w;
        }
        const double tail = rng.uniform();
        if (tail < 0.3) text += "!";
        else if (tail < 0.4) text += " https://t.co/" + std::to_string(rng.below(1000000));
        return text;
    };

    const WeekIndex& wi = out.series.series.weeks;
    const std::string ego = canonical_handle(spec.series.ego);
    std::size_t serial = 0;
    for (const auto& s : out.series.series.series) {
        Corpus& target = s.account == ego ? out.ego : out.alters;
        for (std::size_t w = 0; w < s.counts.size(); ++w) {
            for (std::int64_t c = 0; c < s.counts[w]; ++c) {
                Post p;
                p.id = (s.account == ego ? "e" : "a") + std::to_string(++serial);
                p.author = s.account;
                p.created_at = UtcTime{wi.week_start(w).seconds + static_cast<std::int64_t>(rng.below(kSecondsPerWeek))};
                p.text = make_text(static_cast<std::size_t>(s.topic));
                target.posts.push_back(std::move(p));
            }
        }
    }
    if (spec.retweets_per_alter_week > 0) {
        for (std::size_t i = 0; i < spec.series.alters.size(); ++i) {
            const std::string handle = canonical_handle(spec.series.alters[i].handle);
            const std::size_t per_four = spec.retweets_per_alter_week * (spec.series.alters.size() - i);
            for (std::size_t w = 0; w + 4 <= wi.n_weeks; w += 4) {
                for (std::size_t r = 0; r < per_four; ++r) {
                    Post p;
                    p.id = "r" + std::to_string(++serial);
                    p.author = ego;
                    p.created_at = UtcTime{wi.week_start(w).seconds + static_cast<std::int64_t>(rng.below(4 * kSecondsPerWeek))};
                    p.text = "RT @" + handle + ": " + make_text(rng.below(spec.series.topics));
                    p.retweeted_author = handle;
                    out.ego.posts.push_back(std::move(p));
                }
            }
        }
    }
    const TimeWindow window{wi.epoch_week_start, UtcTime{wi.week_start(wi.n_weeks).seconds - 1}};
    for (Corpus* c : {&out.ego, &out.alters}) {
        c->window = window;
        std::sort(c->posts.begin(), c->posts.end(), [](const Post& a, const Post& b) {
            return a.created_at != b.created_at ? a.created_at < b.created_at : a.id < b.id;
        });
    }
    return out;
}

}  // namespace egoflux::synth
