#include <cmath>

#include <gtest/gtest.h>

#include "egoflux/adf.hpp"
#include "egoflux/distributions.hpp"
#include "egoflux/granger.hpp"
#include "egoflux/ols.hpp"
#include "egoflux/random.hpp"
#include "egoflux/synth.hpp"

using namespace egoflux;

namespace {

// Normal-equations OLS; deliberately a different route from the QR solver.
struct NeOls {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    double rss;
};

NeOls normal_equations(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd xtx = x.transpose() * x;
    const Eigen::MatrixXd inv = xtx.inverse();
    NeOls out;
    out.beta = inv * (x.transpose() * y);
    out.rss = (y - x * out.beta).squaredNorm();
    const double s2 = out.rss / static_cast<double>(x.rows() - x.cols());
    out.se = (inv.diagonal() * s2).cwiseSqrt();
    return out;
}

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
    Rng r(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = r.normal();
    return v;
}

std::vector<double> random_walk(std::size_t n, std::uint64_t seed) {
    auto v = white_noise(n, seed);
    for (std::size_t i = 1; i < n; ++i) v[i] += v[i - 1];
    return v;
}

}  // namespace

TEST(Ols, ExactFitAndMean) {
    Eigen::VectorXd x(4), y(4);
    x << 1, 2, 3, 4;
    y = 2.0 * x;
    const auto f = ols(y, Eigen::MatrixXd(x));
    EXPECT_NEAR(f.coefficients(0), 2.0, 1e-12);
    EXPECT_NEAR(f.rss, 0.0, 1e-20);

    Eigen::VectorXd y3(3);
    y3 << 1, 2, 3;
    const auto m = ols(y3, Eigen::MatrixXd::Ones(3, 1));
    EXPECT_NEAR(m.coefficients(0), 2.0, 1e-12);
    EXPECT_NEAR(m.rss, 2.0, 1e-12);
}

TEST(Ols, DuplicatedColumnIsSingular) {
    Eigen::MatrixXd x(5, 2);
    x << 1, 1, 2, 2, 3, 3, 4, 4, 5, 5;
    EXPECT_THROW(ols(Eigen::VectorXd::Ones(5), x), SingularDesignError);
    EXPECT_THROW(ols(Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Ones(2, 2)), InsufficientDataError);
}

TEST(Ols, AgreesWithNormalEquations) {
    Rng r(12);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 30 + trial, p = 1 + trial % 5;
        Eigen::MatrixXd x(n, p);
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            x(i, 0) = 1.0;
            for (Eigen::Index j = 1; j < p; ++j) x(i, j) = r.normal();
            y(i) = r.normal() + x.row(i).sum();
        }
        const auto a = ols(y, x);
        const auto b = normal_equations(y, x);
        EXPECT_LT((a.coefficients - b.beta).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((a.standard_errors - b.se).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_NEAR(a.rss, b.rss, 1e-9);
    }
}

TEST(Distributions, IncompleteBetaKnownValues) {
    EXPECT_DOUBLE_EQ(incomplete_beta(0.0, 2, 3), 0.0);
    EXPECT_DOUBLE_EQ(incomplete_beta(1.0, 2, 3), 1.0);
    // I_x(1, b) = 1 - (1-x)^b, I_x(a, 1) = x^a.
    EXPECT_NEAR(incomplete_beta(0.3, 1, 4), 1 - std::pow(0.7, 4), 1e-14);
    EXPECT_NEAR(incomplete_beta(0.3, 5, 1), std::pow(0.3, 5), 1e-14);
    EXPECT_NEAR(incomplete_beta(0.5, 7, 7), 0.5, 1e-14);
}

TEST(Distributions, FSurvivalSymmetryAndClosedForm) {
    for (double d : {1.0, 4.0, 17.0, 250.0}) EXPECT_NEAR(f_sf(1.0, d, d), 0.5, 1e-10);
    // F(2, d2): sf(x) = (1 + 2x/d2)^(-d2/2).
    for (double x : {0.3, 1.0, 4.0}) EXPECT_NEAR(f_sf(x, 2, 12), std::pow(1 + 2 * x / 12, -6.0), 1e-12);
    EXPECT_DOUBLE_EQ(f_sf(0.0, 3, 9), 1.0);
    EXPECT_NEAR(f_cdf(2.5, 3, 9) + f_sf(2.5, 3, 9), 1.0, 1e-14);
}

TEST(Distributions, NormalCdf) {
    EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
    EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
}

TEST(Adf, MacKinnonCriticalValues) {
    EXPECT_NEAR(mackinnon_p_value(-3.43), 0.01, 0.002);
    EXPECT_NEAR(mackinnon_p_value(-2.86), 0.05, 0.002);
    EXPECT_NEAR(mackinnon_p_value(-2.57), 0.10, 0.002);
    EXPECT_EQ(mackinnon_p_value(-30.0), 0.0);
    EXPECT_EQ(mackinnon_p_value(3.0), 1.0);
    double prev = 0.0;
    for (double t = -18.0; t < 2.7; t += 0.05) {
        const double p = mackinnon_p_value(t);
        EXPECT_GE(p, prev - 1e-12);
        prev = p;
    }
}

TEST(Adf, WhiteNoiseIsStationaryWalkIsNot) {
    const auto noise = adf_test(white_noise(200, 1));
    EXPECT_LT(noise.p_value, 0.01);
    EXPECT_TRUE(noise.is_stationary);
    const auto walk = adf_test(random_walk(200, 2));
    EXPECT_GT(walk.p_value, 0.10);
    EXPECT_FALSE(walk.is_stationary);
    EXPECT_EQ(walk.regression, "constant");
}

TEST(Adf, DegenerateAndShortInputs) {
    EXPECT_THROW(adf_test(std::vector<double>(50, 3.0)), DegenerateSeriesError);
    EXPECT_THROW(adf_test(white_noise(12, 1)), InsufficientDataError);
    EXPECT_NO_THROW(adf_test(white_noise(13, 1)));
    EXPECT_THROW(adf_test(white_noise(20, 1), 10), InsufficientDataError);
}

TEST(Adf, FixedLagMatchesNormalEquations) {
    const auto y = random_walk(120, 5);
    for (int p : {0, 2}) {
        const auto res = adf_test(y, p);
        if (res.lags_used != p) continue;  // AIC may prefer a shorter lag
        Eigen::VectorXd resp;
        Eigen::MatrixXd design;
        detail::adf_design(y, p, static_cast<std::size_t>(p) + 1, resp, design);
        const auto ne = normal_equations(resp, design);
        EXPECT_NEAR(res.statistic, ne.beta(1) / ne.se(1), 1e-9);
    }
}

TEST(Differencing, Examples) {
    EXPECT_EQ(difference(std::vector<double>{1, 3, 6}), (std::vector<double>{2, 3}));
    EXPECT_EQ(difference(std::vector<double>{4, 4, 4}), (std::vector<double>{0, 0}));
    EXPECT_THROW(difference(std::vector<double>{1}), InsufficientDataError);
}

TEST(Differencing, PairedOrders) {
    const auto a = white_noise(200, 3), b = white_noise(200, 4);
    const auto both = make_stationary_pair(a, b);
    EXPECT_EQ(both.diff_order, 0);
    EXPECT_EQ(both.x, a);

    const auto w1 = random_walk(200, 2), w2 = random_walk(200, 6);
    const auto walks = make_stationary_pair(w1, w2);
    EXPECT_EQ(walks.diff_order, 1);
    EXPECT_EQ(walks.x, difference(w1));
    EXPECT_EQ(walks.y, difference(w2));

    // x passes ADF on its own but is differenced with y anyway.
    ASSERT_TRUE(adf_test(a).is_stationary);
    const auto mixed = make_stationary_pair(a, w1);
    EXPECT_EQ(mixed.diff_order, 1);
    EXPECT_EQ(mixed.x, difference(a));
}

TEST(Differencing, ConstantPairIsDegenerate) {
    const auto p = make_stationary_pair(std::vector<double>(40, 1.0), white_noise(40, 1));
    ASSERT_TRUE(p.skip_reason);
    EXPECT_EQ(*p.skip_reason, skip::degenerate);
}

TEST(Granger, NullFixture) {
    const auto x = white_noise(300, 10);
    Rng r(11);
    std::vector<double> y(300);
    for (std::size_t t = 1; t < 300; ++t) y[t] = 0.5 * y[t - 1] + r.normal();
    const auto g = granger_test(x, y, 2);
    EXPECT_GT(g.p_value, 0.05);
    EXPECT_EQ(g.n_obs_effective, 298u);
}

TEST(Granger, PlantedLagThreeMatchesIndependentF) {
    const auto x = white_noise(300, 20);
    Rng r(21);
    std::vector<double> y(300);
    for (std::size_t t = 3; t < 300; ++t) y[t] = 0.5 * y[t - 1] + 0.8 * x[t - 3] + r.normal();
    const auto g = granger_test(x, y, 3);
    EXPECT_LT(g.p_value, 0.001);

    const Eigen::Index n = 297;
    Eigen::VectorXd resp(n);
    Eigen::MatrixXd xr(n, 4), xu(n, 7);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t t = static_cast<std::size_t>(i) + 3;
        resp(i) = y[t];
        xr(i, 0) = xu(i, 0) = 1;
        for (int l = 1; l <= 3; ++l) {
            xr(i, l) = xu(i, l) = y[t - l];
            xu(i, 3 + l) = x[t - l];
        }
    }
    const double rr = normal_equations(resp, xr).rss, ru = normal_equations(resp, xu).rss;
    EXPECT_NEAR(g.rss_restricted, rr, 1e-8);
    EXPECT_NEAR(g.rss_unrestricted, ru, 1e-8);
    const double f = ((rr - ru) / 3) / (ru / (297 - 7));
    EXPECT_NEAR(g.f_stat, f, 1e-8 * f);
}

TEST(Granger, SelfExplanationIsNearPerfect) {
    const auto x = white_noise(100, 30);
    std::vector<double> y(100, 0.0);
    for (std::size_t t = 1; t < 100; ++t) y[t] = x[t - 1];
    const auto g = granger_test(x, y, 1);
    EXPECT_LT(g.p_value, 1e-12);
}

TEST(Granger, ShortSeriesSkipped) {
    const auto g = granger_test(white_noise(20, 1), white_noise(20, 2), 4);
    ASSERT_TRUE(g.skip_reason);
    EXPECT_EQ(*g.skip_reason, skip::too_short);
}

TEST(BenjaminiHochberg, HandValues) {
    const auto adj = benjamini_hochberg({0.001, 0.01, 0.02, 0.9});
    EXPECT_NEAR(adj[0], 0.004, 1e-12);
    EXPECT_NEAR(adj[1], 0.02, 1e-12);
    EXPECT_NEAR(adj[2], 0.02666666666666667, 1e-12);
    EXPECT_NEAR(adj[3], 0.9, 1e-12);
    // Order of the input does not matter.
    const auto perm = benjamini_hochberg({0.9, 0.02, 0.001, 0.01});
    EXPECT_NEAR(perm[0], 0.9, 1e-12);
    EXPECT_NEAR(perm[2], 0.004, 1e-12);
}

namespace {

SeriesSet two_alter_ecosystem(std::uint64_t seed) {
    synth::SynthSpec spec;
    spec.seed = seed;
    spec.alters = {{"a", {{0, 2, 0.8}}}, {"b", {}}};
    return synth::generate_series(spec).series;
}

}  // namespace

TEST(CausalityScan, RecoversPlantedLag) {
    const auto m = causality_scan(two_alter_ecosystem(42), "ego", {"a", "b"});
    const auto* a0 = m.find("a", 0);
    ASSERT_NE(a0, nullptr);
    ASSERT_TRUE(a0->best_lag);
    EXPECT_EQ(*a0->best_lag, 2);
    EXPECT_LT(a0->best_p, 0.001);
    EXPECT_TRUE(a0->significant);
    const auto* b0 = m.find("b", 0);
    EXPECT_GT(b0->best_p, 0.05);
    EXPECT_EQ(m.pairs.size(), 2u * 4u);
}

TEST(CausalityScan, MaxLagOneGivesOneResultPerPair) {
    ScanConfig cfg;
    cfg.max_lag = 1;
    const auto m = causality_scan(two_alter_ecosystem(1), "ego", {}, cfg);
    for (const auto& p : m.pairs) {
        if (!p.skip_reason) EXPECT_EQ(p.lags.size(), 1u);
    }
}

TEST(CausalityScan, SkipsAndErrors) {
    auto set = two_alter_ecosystem(3);
    for (auto& s : set.series) {
        if (s.account == "b" && s.topic == 1) std::fill(s.counts.begin(), s.counts.end(), 4);
    }
    std::erase_if(set.series, [](const TopicSeries& s) { return s.account == "b" && s.topic == 2; });
    const auto m = causality_scan(set, "ego", {"a", "b"});
    EXPECT_EQ(*m.find("b", 1)->skip_reason, skip::degenerate);
    EXPECT_EQ(*m.find("b", 2)->skip_reason, skip::missing);
    EXPECT_EQ(m.skipped(), 2u);
    EXPECT_THROW(causality_scan(set, "nobody", {"a"}), InvalidArgument);
}

TEST(CausalityScan, BhAdjustsAcrossPairs) {
    ScanConfig cfg;
    cfg.correction = Correction::benjamini_hochberg;
    const auto m = causality_scan(two_alter_ecosystem(42), "ego", {}, cfg);
    std::vector<double> raw;
    for (const auto& p : m.pairs) raw.push_back(p.best_p);
    const auto adj = benjamini_hochberg(raw);
    for (std::size_t i = 0; i < m.pairs.size(); ++i) {
        ASSERT_TRUE(m.pairs[i].adjusted_p);
        EXPECT_DOUBLE_EQ(*m.pairs[i].adjusted_p, adj[i]);
        EXPECT_EQ(m.pairs[i].significant, adj[i] < cfg.alpha);
    }
}

TEST(CausalityScan, JsonRoundTrip) {
    ScanConfig cfg;
    cfg.correction = Correction::benjamini_hochberg;
    auto set = two_alter_ecosystem(9);
    for (auto& s : set.series) {
        if (s.account == "b" && s.topic == 3) std::fill(s.counts.begin(), s.counts.end(), 0);
    }
    const auto m = causality_scan(set, "ego", {}, cfg);
    const auto j = causality_to_json(m);
    EXPECT_EQ(causality_to_json(causality_from_json(nlohmann::json::parse(j.dump()))), j);
}

TEST(CausalityScan, LagOneCalibrationAtEcosystemScale) {
    // With no couplings the per-lag test holds its level across many pairs.
    std::size_t hits = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        synth::SynthSpec spec;
        spec.seed = seed;
        spec.alters = {{"a", {}}, {"b", {}}, {"c", {}}, {"d", {}}, {"e", {}}};
        ScanConfig cfg;
        cfg.max_lag = 1;
        for (const auto& p : causality_scan(synth::generate_series(spec).series, "ego", {}, cfg).pairs) {
            if (p.skip_reason) continue;
            ++total;
            hits += p.best_p < 0.05 ? 1 : 0;
        }
    }
    EXPECT_LE(static_cast<double>(hits) / static_cast<double>(total), 0.10);
}
