#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "egoflux/adf.hpp"
#include "egoflux/csv.hpp"
#include "egoflux/distributions.hpp"
#include "egoflux/error.hpp"
#include "egoflux/ols.hpp"
#include "egoflux/series.hpp"

namespace egoflux {

/// Reason codes for pairs or lags that were not tested.
namespace skip {
inline constexpr const char* degenerate = "DEGEN";      // constant series at some differencing stage
inline constexpr const char* too_short = "SHORT";       // below the effective-sample floor
inline constexpr const char* nonstationary = "NONSTAT"; // still nonstationary at max differencing
inline constexpr const char* singular = "SINGULAR";     // rank-deficient regression
inline constexpr const char* missing = "MISSING";       // alter has no series for the topic
}  // namespace skip

/// y[i+1] - y[i].
template <typename T>
std::vector<double> difference(std::span<const T> y) {
    if (y.size() < 2) throw InsufficientDataError("difference: need at least two values");
    std::vector<double> out(y.size() - 1);
    for (std::size_t i = 0; i + 1 < y.size(); ++i) out[i] = static_cast<double>(y[i + 1]) - static_cast<double>(y[i]);
    return out;
}

inline std::vector<double> difference(const std::vector<double>& y) { return difference(std::span<const double>(y)); }

struct StationaryPair {
    std::vector<double> x;
    std::vector<double> y;
    int diff_order = 0;
    std::optional<std::string> skip_reason;
    std::string detail;
};

/// Differences both series together until each passes ADF at `alpha`, so the
/// pair always shares one differencing order. Gives up at `max_diff`.
inline StationaryPair make_stationary_pair(std::vector<double> x, std::vector<double> y, int max_diff = 2,
                                           double alpha = 0.05) {
    if (x.size() != y.size()) throw InvalidArgument("make_stationary_pair: series lengths differ");
    StationaryPair out;
    for (;;) {
        bool both = false;
        try {
            const bool xs = adf_test(x, std::nullopt, alpha).is_stationary;
            const bool ys = adf_test(y, std::nullopt, alpha).is_stationary;
            both = xs && ys;
        } catch (const DegenerateSeriesError& e) {
            out.skip_reason = skip::degenerate;
            out.detail = e.what();
        } catch (const InsufficientDataError& e) {
            out.skip_reason = skip::too_short;
            out.detail = e.what();
        } catch (const SingularDesignError& e) {
            out.skip_reason = skip::singular;
            out.detail = e.what();
        }
        if (out.skip_reason) break;
        if (both) break;
        if (out.diff_order >= max_diff) {
            out.skip_reason = skip::nonstationary;
            out.detail = "not stationary after " + std::to_string(max_diff) + " difference(s)";
            break;
        }
        x = difference(x);
        y = difference(y);
        ++out.diff_order;
    }
    out.x = std::move(x);
    out.y = std::move(y);
    return out;
}

struct GrangerResult {
    std::string alter;
    int topic = 0;
    int lag = 1;
    double f_stat = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    int diff_order = 0;
    std::size_t n_obs_effective = 0;
    double rss_restricted = 0.0;
    double rss_unrestricted = 0.0;
    bool perfect_fit = false;
    std::optional<std::string> skip_reason;
};

inline std::size_t granger_min_length(int lag) { return 3 * static_cast<std::size_t>(lag) + 10; }

/// SSR F-test of "x Granger-causes y" at one lag. Restricted model:
/// y_t ~ 1 + y_{t-1..t-lag}; unrestricted adds x_{t-1..t-lag}.
/// F = ((RSS_r - RSS_u) / lag) / (RSS_u / (n - 2 lag - 1)), n = T - lag.
inline GrangerResult granger_test(std::span<const double> x, std::span<const double> y, int lag) {
    if (lag < 1) throw InvalidArgument("granger_test: lag must be >= 1");
    if (x.size() != y.size()) throw InvalidArgument("granger_test: series lengths differ");
    GrangerResult g;
    g.lag = lag;
    const std::size_t t_len = y.size();
    if (t_len < granger_min_length(lag)) {
        g.skip_reason = skip::too_short;
        return g;
    }
    const std::size_t n = t_len - static_cast<std::size_t>(lag);
    const auto rows = static_cast<Eigen::Index>(n);
    Eigen::VectorXd resp(rows);
    Eigen::MatrixXd xr(rows, lag + 1), xu(rows, 2 * lag + 1);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t t = r + static_cast<std::size_t>(lag);
        const auto i = static_cast<Eigen::Index>(r);
        resp(i) = y[t];
        xr(i, 0) = xu(i, 0) = 1.0;
        for (int l = 1; l <= lag; ++l) {
            xr(i, l) = xu(i, l) = y[t - static_cast<std::size_t>(l)];
            xu(i, lag + l) = x[t - static_cast<std::size_t>(l)];
        }
    }
    g.n_obs_effective = n;
    try {
        const OlsFit restricted = ols(resp, xr);
        const OlsFit unrestricted = ols(resp, xu);
        g.rss_restricted = restricted.rss;
        g.rss_unrestricted = unrestricted.rss;
    } catch (const SingularDesignError&) {
        g.skip_reason = skip::singular;
        return g;
    }
    const double df2 = static_cast<double>(n) - 2.0 * lag - 1.0;
    if (g.rss_unrestricted == 0.0) {
        g.perfect_fit = true;
        g.f_stat = std::numeric_limits<double>::infinity();
        g.p_value = 0.0;
        return g;
    }
    const double gain = std::max(0.0, g.rss_restricted - g.rss_unrestricted);
    g.f_stat = (gain / lag) / (g.rss_unrestricted / df2);
    g.p_value = f_sf(g.f_stat, lag, df2);
    return g;
}

enum class Correction { none, benjamini_hochberg };

inline std::string to_string(Correction c) { return c == Correction::none ? "none" : "benjamini_hochberg"; }

inline Correction correction_from_string(const std::string& s) {
    if (s == "none") return Correction::none;
    if (s == "benjamini_hochberg") return Correction::benjamini_hochberg;
    throw ParseError("unknown correction '" + s + "'");
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
inline std::vector<double> benjamini_hochberg(const std::vector<double>& p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> adj(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const double v = p[order[r]] * static_cast<double>(m) / static_cast<double>(r + 1);
        running = std::min(running, v);
        adj[order[r]] = std::min(1.0, running);
    }
    return adj;
}

struct PairResult {
    std::string alter;
    int topic = 0;
    int diff_order = 0;
    std::vector<GrangerResult> lags;  // one entry per lag 1..max_lag when tested
    std::optional<int> best_lag;
    double best_p = std::numeric_limits<double>::quiet_NaN();
    double best_f = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> adjusted_p;
    bool significant = false;
    std::optional<std::string> skip_reason;
    std::string skip_detail;
};

struct ScanConfig {
    int max_lag = 8;
    double alpha = 0.05;
    Correction correction = Correction::none;
    int max_diff = 2;
    std::optional<double> adf_alpha;  // defaults to alpha
};

struct CausalityMatrix {
    std::string ego;
    std::vector<std::string> alters;  // ascending
    std::size_t topics = 0;
    ScanConfig config;
    std::string best_lag_rule = "argmin_p_smaller_lag_on_tie";
    std::vector<PairResult> pairs;  // ordered by (alter, topic)

    const PairResult* find(const std::string& alter, int topic) const {
        for (const auto& p : pairs) {
            if (p.alter == alter && p.topic == topic) return &p;
        }
        return nullptr;
    }

    std::size_t skipped() const {
        return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.skip_reason.has_value(); }));
    }
};

inline std::vector<double> to_doubles(const std::vector<std::int64_t>& v) { return {v.begin(), v.end()}; }

/// Tests every (alter, topic) pair: paired differencing to stationarity, then
/// one F-test per lag 1..max_lag. An empty `alters` means every account but
/// the ego. The best lag is the smallest p (smaller lag on
/// ties). Benjamini-Hochberg, when requested, runs over all best-lag p-values.
inline CausalityMatrix causality_scan(const SeriesSet& set, const std::string& ego, std::vector<std::string> alters,
                                      const ScanConfig& cfg = {}) {
    if (cfg.max_lag < 1) throw InvalidArgument("causality_scan: max_lag must be >= 1");
    bool ego_present = false;
    for (const auto& s : set.series) ego_present = ego_present || s.account == ego;
    if (!ego_present) throw InvalidArgument("causality_scan: ego '" + ego + "' has no series");

    if (alters.empty()) alters = set.accounts();
    std::sort(alters.begin(), alters.end());
    alters.erase(std::unique(alters.begin(), alters.end()), alters.end());
    std::erase(alters, ego);

    CausalityMatrix m;
    m.ego = ego;
    m.alters = alters;
    m.topics = set.topics;
    m.config = cfg;
    const double adf_alpha = cfg.adf_alpha.value_or(cfg.alpha);

    for (const auto& alter : alters) {
        for (std::size_t t = 0; t < set.topics; ++t) {
            PairResult pr;
            pr.alter = alter;
            pr.topic = static_cast<int>(t);
            const TopicSeries* xs = set.find(alter, pr.topic);
            const TopicSeries* ys = set.find(ego, pr.topic);
            if (!xs || !ys) {
                pr.skip_reason = skip::missing;
                pr.skip_detail = "no series for this account/topic";
                m.pairs.push_back(std::move(pr));
                continue;
            }
            StationaryPair sp = make_stationary_pair(to_doubles(xs->counts), to_doubles(ys->counts), cfg.max_diff, adf_alpha);
            pr.diff_order = sp.diff_order;
            if (sp.skip_reason) {
                pr.skip_reason = sp.skip_reason;
                pr.skip_detail = sp.detail;
                m.pairs.push_back(std::move(pr));
                continue;
            }
            for (int lag = 1; lag <= cfg.max_lag; ++lag) {
                GrangerResult g = granger_test(sp.x, sp.y, lag);
                g.alter = alter;
                g.topic = pr.topic;
                g.diff_order = sp.diff_order;
                if (!g.skip_reason && (!pr.best_lag || g.p_value < pr.best_p)) {
                    pr.best_lag = lag;
                    pr.best_p = g.p_value;
                    pr.best_f = g.f_stat;
                }
                pr.lags.push_back(std::move(g));
            }
            if (!pr.best_lag) {
                pr.skip_reason = pr.lags.empty() ? skip::too_short : *pr.lags.front().skip_reason;
                pr.skip_detail = "no lag could be tested";
            }
            m.pairs.push_back(std::move(pr));
        }
    }

    std::vector<std::size_t> tested;
    std::vector<double> ps;
    for (std::size_t i = 0; i < m.pairs.size(); ++i) {
        if (m.pairs[i].best_lag) {
            tested.push_back(i);
            ps.push_back(m.pairs[i].best_p);
        }
    }
    if (cfg.correction == Correction::benjamini_hochberg) {
        const auto adj = benjamini_hochberg(ps);
        for (std::size_t i = 0; i < tested.size(); ++i) {
            m.pairs[tested[i]].adjusted_p = adj[i];
            m.pairs[tested[i]].significant = adj[i] < cfg.alpha;
        }
    } else {
        for (auto i : tested) m.pairs[i].significant = m.pairs[i].best_p < cfg.alpha;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline double number_or(const nlohmann::json& j, double fallback) { return j.is_null() ? fallback : j.get<double>(); }

}  // namespace detail

inline constexpr int kCausalityMatrixVersion = 1;

inline nlohmann::json causality_to_json(const CausalityMatrix& m) {
    nlohmann::json j;
    j["format"] = "egoflux.causality_matrix";
    j["version"] = kCausalityMatrixVersion;
    j["ego"] = m.ego;
    j["alters"] = m.alters;
    j["topics"] = m.topics;
    j["best_lag_rule"] = m.best_lag_rule;
    j["config"] = {{"max_lag", m.config.max_lag},
                   {"alpha", m.config.alpha},
                   {"correction", to_string(m.config.correction)},
                   {"max_diff", m.config.max_diff},
                   {"adf_alpha", m.config.adf_alpha ? nlohmann::json(*m.config.adf_alpha) : nlohmann::json(nullptr)}};
    j["pairs"] = nlohmann::json::array();
    for (const auto& p : m.pairs) {
        nlohmann::json pj;
        pj["alter"] = p.alter;
        pj["topic"] = p.topic;
        pj["diff_order"] = p.diff_order;
        pj["best_lag"] = p.best_lag ? nlohmann::json(*p.best_lag) : nlohmann::json(nullptr);
        pj["best_p"] = detail::finite_or_null(p.best_p);
        pj["best_f"] = detail::finite_or_null(p.best_f);
        pj["adjusted_p"] = p.adjusted_p ? nlohmann::json(*p.adjusted_p) : nlohmann::json(nullptr);
        pj["significant"] = p.significant;
        pj["skip_reason"] = p.skip_reason ? nlohmann::json(*p.skip_reason) : nlohmann::json(nullptr);
        pj["skip_detail"] = p.skip_detail;
        pj["lags"] = nlohmann::json::array();
        for (const auto& g : p.lags) {
            pj["lags"].push_back({{"lag", g.lag},
                                  {"f_stat", detail::finite_or_null(g.f_stat)},
                                  {"p_value", detail::finite_or_null(g.p_value)},
                                  {"n_obs_effective", g.n_obs_effective},
                                  {"rss_restricted", g.rss_restricted},
                                  {"rss_unrestricted", g.rss_unrestricted},
                                  {"perfect_fit", g.perfect_fit},
                                  {"skip_reason", g.skip_reason ? nlohmann::json(*g.skip_reason) : nlohmann::json(nullptr)}});
        }
        j["pairs"].push_back(std::move(pj));
    }
    return j;
}

inline CausalityMatrix causality_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "egoflux.causality_matrix") throw ParseError("not a causality matrix");
    if (j.value("version", 0) != kCausalityMatrixVersion) throw ParseError("unsupported causality matrix version");
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    CausalityMatrix m;
    m.ego = j.at("ego").get<std::string>();
    m.alters = j.at("alters").get<std::vector<std::string>>();
    m.topics = j.at("topics").get<std::size_t>();
    m.best_lag_rule = j.at("best_lag_rule").get<std::string>();
    const auto& c = j.at("config");
    m.config.max_lag = c.at("max_lag").get<int>();
    m.config.alpha = c.at("alpha").get<double>();
    m.config.correction = correction_from_string(c.at("correction").get<std::string>());
    m.config.max_diff = c.at("max_diff").get<int>();
    if (!c.at("adf_alpha").is_null()) m.config.adf_alpha = c.at("adf_alpha").get<double>();
    for (const auto& pj : j.at("pairs")) {
        PairResult p;
        p.alter = pj.at("alter").get<std::string>();
        p.topic = pj.at("topic").get<int>();
        p.diff_order = pj.at("diff_order").get<int>();
        if (!pj.at("best_lag").is_null()) p.best_lag = pj.at("best_lag").get<int>();
        p.best_p = detail::number_or(pj.at("best_p"), nan);
        p.best_f = detail::number_or(pj.at("best_f"), p.best_lag ? std::numeric_limits<double>::infinity() : nan);
        if (!pj.at("adjusted_p").is_null()) p.adjusted_p = pj.at("adjusted_p").get<double>();
        p.significant = pj.at("significant").get<bool>();
        if (!pj.at("skip_reason").is_null()) p.skip_reason = pj.at("skip_reason").get<std::string>();
        p.skip_detail = pj.at("skip_detail").get<std::string>();
        for (const auto& gj : pj.at("lags")) {
            GrangerResult g;
            g.alter = p.alter;
            g.topic = p.topic;
            g.diff_order = p.diff_order;
            g.lag = gj.at("lag").get<int>();
            g.perfect_fit = gj.at("perfect_fit").get<bool>();
            if (!gj.at("skip_reason").is_null()) g.skip_reason = gj.at("skip_reason").get<std::string>();
            const double f_missing = g.perfect_fit ? std::numeric_limits<double>::infinity() : nan;
            g.f_stat = detail::number_or(gj.at("f_stat"), f_missing);
            g.p_value = detail::number_or(gj.at("p_value"), nan);
            g.n_obs_effective = gj.at("n_obs_effective").get<std::size_t>();
            g.rss_restricted = gj.at("rss_restricted").get<double>();
            g.rss_unrestricted = gj.at("rss_unrestricted").get<double>();
            p.lags.push_back(std::move(g));
        }
        m.pairs.push_back(std::move(p));
    }
    return m;
}

/// alter,topic,best_lag,f_stat,p_value,diff_order,skip_reason
inline void write_causality_csv(std::ostream& out, const CausalityMatrix& m) {
    auto num = [](double v) {
        if (std::isnan(v)) return std::string();
        if (std::isinf(v)) return std::string("inf");
        std::ostringstream s;
        s.precision(17);
        s << v;
        return s.str();
    };
    csv::write_record(out, {"alter", "topic", "best_lag", "f_stat", "p_value", "diff_order", "skip_reason"});
    for (const auto& p : m.pairs) {
        csv::write_record(out, {p.alter, std::to_string(p.topic), p.best_lag ? std::to_string(*p.best_lag) : "",
                                num(p.best_f), num(p.best_p), std::to_string(p.diff_order),
                                p.skip_reason.value_or("")});
    }
}

}  // namespace egoflux
