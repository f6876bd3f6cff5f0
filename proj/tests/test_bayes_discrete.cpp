#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "robreg/bayes_discrete.hpp"

using namespace robreg;

namespace {

// Random grouped dataset with every group count in [4, 20].
GroupedData random_grouped(RngStream& rng, int max_k = 10) {
    const int K = 2 + static_cast<int>(rng.uniform01() * (max_k - 2 + 1));
    Eigen::VectorXd xs(K);
    for (int k = 0; k < K; ++k) xs[k] = rng.uniform(-5.0, 5.0) + 0.3 * k;
    std::vector<double> rows_y;
    Eigen::VectorXd x_rows;
    std::vector<double> xr;
    for (int k = 0; k < K; ++k) {
        const int nk = 4 + static_cast<int>(rng.uniform01() * 17);
        const double mu = rng.uniform(-10.0, 10.0);
        const double sd = rng.uniform(0.1, 3.0);
        for (int i = 0; i < nk; ++i) {
            xr.push_back(xs[k]);
            rows_y.push_back(sample_normal(rng, mu, sd));
        }
    }
    Eigen::VectorXd x(static_cast<Eigen::Index>(xr.size())), y(static_cast<Eigen::Index>(xr.size()));
    for (std::size_t i = 0; i < xr.size(); ++i) {
        x[static_cast<Eigen::Index>(i)] = xr[i];
        y[static_cast<Eigen::Index>(i)] = rows_y[i];
    }
    return group_by_covariate(make_dataset(x, y));
}

} // namespace

TEST_CASE("grouping the fixture gives the expected sufficient statistics") {
    const auto g = group_by_covariate(oracles::d0());
    REQUIRE(g.k() == 2);
    REQUIRE(g.counts[0] == 4);
    REQUIRE(g.counts[1] == 4);
    REQUIRE_THAT(g.group_mean[0], Catch::Matchers::WithinAbs(2.5, 1e-15));
    REQUIRE_THAT(g.group_mean[1], Catch::Matchers::WithinAbs(6.0, 1e-15));
    REQUIRE_THAT(g.group_ss[0], Catch::Matchers::WithinAbs(5.0, 1e-12));
    REQUIRE_THAT(g.group_ss[1], Catch::Matchers::WithinAbs(20.0, 1e-12));
    REQUIRE(g.n() == 8);
}

TEST_CASE("grouping collapses identical rows and keeps singletons apart") {
    Eigen::VectorXd x1 = Eigen::VectorXd::Constant(6, 2.0);
    Eigen::VectorXd y1 = Eigen::VectorXd::LinSpaced(6, 0.0, 5.0);
    Dataset d;
    d.X.resize(6, 1);
    d.X.setOnes();
    d.y = y1;
    d.column_names = {"intercept"};
    const auto g1 = group_by_covariate(d);
    REQUIRE(g1.k() == 1);
    REQUIRE(g1.counts[0] == 6);

    Eigen::VectorXd x2 = Eigen::VectorXd::LinSpaced(6, 0.0, 5.0);
    const auto g2 = group_by_covariate(make_dataset(x2, y1));
    REQUIRE(g2.k() == 6);
    for (Eigen::Index k = 0; k < 6; ++k) {
        REQUIRE(g2.group_ss[k] == 0.0);
    }
}

TEST_CASE("grouped means and sums of squares reproduce raw moments") {
    RngStream rng(404, 0);
    const auto g = random_grouped(rng);
    // Total SS around group means plus between-group part equals raw SS.
    double total_n = 0.0, weighted_mean = 0.0;
    for (Eigen::Index k = 0; k < g.k(); ++k) {
        total_n += static_cast<double>(g.counts[static_cast<std::size_t>(k)]);
        weighted_mean += static_cast<double>(g.counts[static_cast<std::size_t>(k)]) * g.group_mean[k];
    }
    weighted_mean /= total_n;
    REQUIRE(total_n == static_cast<double>(g.n()));
    REQUIRE(std::isfinite(weighted_mean));
    REQUIRE((g.group_ss.array() >= 0.0).all());
}

TEST_CASE("rank-deficient atoms are rejected") {
    Dataset d;
    d.X.resize(8, 2);
    for (int i = 0; i < 8; ++i) {
        d.X(i, 0) = 1.0;
        d.X(i, 1) = 1.0; // second column identical to the intercept
    }
    d.y = Eigen::VectorXd::LinSpaced(8, 0.0, 7.0);
    d.column_names = {"intercept", "x"};
    REQUIRE_THROWS_AS(group_by_covariate(d), SingularDesignError);
}

TEST_CASE("posterior lambda over one group is the constant 1") {
    Dataset d;
    d.X.resize(5, 1);
    d.X.setOnes();
    d.y = Eigen::VectorXd::LinSpaced(5, 0.0, 4.0);
    d.column_names = {"intercept"};
    const auto g = group_by_covariate(d);
    RngStream rng(11, 0);
    const auto w = draw_posterior_lambda(rng, g);
    REQUIRE(w.size() == 1);
    REQUIRE(w[0] == 1.0);
}

TEST_CASE("posterior lambda moments for two balanced groups") {
    const auto g = group_by_covariate(oracles::d0());
    RngStream rng(11, 1);
    const int n = 100000;
    double mean0 = 0.0, sq0 = 0.0;
    for (int d = 0; d < n; ++d) {
        const auto w = draw_posterior_lambda(rng, g);
        mean0 += w[0];
        sq0 += w[0] * w[0];
    }
    mean0 /= n;
    const double var0 = sq0 / n - mean0 * mean0;
    REQUIRE(std::abs(mean0 - 0.5) < 0.005);
    // Dirichlet(4,4): Var = 4*4 / (8^2 * 9) = 0.25/9.
    REQUIRE(std::abs(var0 - 0.25 / 9.0) < 0.1 * 0.25 / 9.0);
}

TEST_CASE("posterior phi is a point mass for zero-spread groups") {
    Eigen::VectorXd x(8), y(8);
    x << 0, 0, 0, 0, 1, 1, 1, 1;
    y << 2, 2, 2, 2, 7, 7, 7, 7;
    const auto g = group_by_covariate(make_dataset(x, y));
    const auto tp = t_posteriors(g);
    RngStream rng(12, 0);
    for (int d = 0; d < 100; ++d) {
        const Eigen::VectorXd phi = draw_posterior_phi(rng, tp);
        REQUIRE(phi[0] == 2.0);
        REQUIRE(phi[1] == 7.0);
    }
}

TEST_CASE("posterior phi moments match the t formulas on the fixture") {
    const auto g = group_by_covariate(oracles::d0());
    const auto tp = t_posteriors(g);
    RngStream rng(12, 1);
    const int n = 100000;
    std::vector<double> phi0(n), phi1(n);
    for (int d = 0; d < n; ++d) {
        const Eigen::VectorXd phi = draw_posterior_phi(rng, tp);
        phi0[static_cast<std::size_t>(d)] = phi[0];
        phi1[static_cast<std::size_t>(d)] = phi[1];
    }
    const auto m0 = oracles::moments(phi0);
    const auto m1 = oracles::moments(phi1);
    REQUIRE(std::abs(m0.mean - 2.5) < 0.02);
    // Var phi_k = SS_k / (n_k (n_k - 3)): 5/4 and 20/4.
    REQUIRE(std::abs(m0.variance - 1.25) < 0.125);
    REQUIRE(std::abs(m1.variance - 5.0) < 0.5);
}

TEST_CASE("beta functional recovers exact linear structure for any weights") {
    RngStream rng(13, 0);
    Eigen::MatrixXd xi(4, 2);
    xi << 1, -1, 1, 0, 1, 2, 1, 5;
    Eigen::VectorXd alpha(2);
    alpha << 0.7, -1.3;
    const Eigen::VectorXd phi = xi * alpha;
    for (int rep = 0; rep < 25; ++rep) {
        std::vector<double> w(4);
        for (auto& v : w) v = rng.uniform(0.05, 2.0);
        const Eigen::VectorXd beta = beta_functional(phi, w, xi);
        REQUIRE((beta - alpha).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("beta functional on the fixture atoms") {
    Eigen::MatrixXd xi(2, 2);
    xi << 1, 0, 1, 1;
    Eigen::VectorXd phi(2);
    phi << 2.5, 6.0;
    const Eigen::VectorXd beta = beta_functional(phi, {0.5, 0.5}, xi);
    REQUIRE_THAT(beta[0], Catch::Matchers::WithinAbs(2.5, 1e-14));
    REQUIRE_THAT(beta[1], Catch::Matchers::WithinAbs(3.5, 1e-14));
}

TEST_CASE("beta functional with K = m ignores the weights entirely") {
    RngStream rng(13, 1);
    Eigen::MatrixXd xi(2, 2);
    xi << 1, -2, 1, 3;
    Eigen::VectorXd phi(2);
    phi << 4.0, -1.0;
    const Eigen::VectorXd ref = beta_functional(phi, {0.5, 0.5}, xi);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> w = {rng.uniform(0.01, 5.0), rng.uniform(0.01, 5.0)};
        const Eigen::VectorXd beta = beta_functional(phi, w, xi);
        REQUIRE((beta - ref).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((xi * beta - phi).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("beta functional is exactly invariant under power-of-two rescaling") {
    Eigen::MatrixXd xi(3, 2);
    xi << 1, -1, 1, 1, 1, 4;
    Eigen::VectorXd phi(3);
    phi << 0.3, 2.0, 9.5;
    std::vector<double> w = {0.375, 0.5, 0.125};
    const Eigen::VectorXd b1 = beta_functional(phi, w, xi);
    std::vector<double> w4 = {4 * 0.375, 4 * 0.5, 4 * 0.125};
    const Eigen::VectorXd b2 = beta_functional(phi, w4, xi);
    REQUIRE((b1 - b2).cwiseAbs().maxCoeff() == 0.0);
    // General positive rescaling agrees to rounding error.
    std::vector<double> wc = {w[0] * 1.7, w[1] * 1.7, w[2] * 1.7};
    const Eigen::VectorXd b3 = beta_functional(phi, wc, xi);
    REQUIRE((b1 - b3).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("beta functional rejects degenerate weights") {
    Eigen::MatrixXd xi(2, 2);
    xi << 1, 0, 1, 1;
    Eigen::VectorXd phi(2);
    phi << 1.0, 2.0;
    REQUIRE_THROWS_AS(beta_functional(phi, {0.0, 1.0}, xi), SingularDesignError);
    REQUIRE_THROWS_AS(beta_functional(phi, {-0.1, 1.1}, xi), InvalidParameterError);
}

TEST_CASE("random-x posterior mean tracks the saturated fit on the fixture") {
    const auto g = group_by_covariate(oracles::d0());
    RngStream rng(14, 0);
    const auto s = posterior_beta_random_x(g, 100000, rng);
    REQUIRE(s.method == "bayes-random-x");
    REQUIRE(s.n_draws == 100000);
    REQUIRE(std::abs(s.beta_hat[1] - 3.5) < 0.03);
    REQUIRE((s.ci_high - (s.beta_hat + 1.96 * s.sd)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("random-x posterior with saturated noiseless groups is a point mass") {
    Eigen::VectorXd x(8), y(8);
    x << 0, 0, 0, 0, 1, 1, 1, 1;
    y << 2, 2, 2, 2, 7, 7, 7, 7;
    const auto g = group_by_covariate(make_dataset(x, y));
    RngStream rng(14, 1);
    const auto s = posterior_beta_random_x(g, 500, rng);
    REQUIRE_THAT(s.beta_hat[1], Catch::Matchers::WithinAbs(5.0, 1e-12));
    REQUIRE(s.sd.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("random-x posterior enforces replication and draw minimums") {
    Eigen::VectorXd x(7), y(7);
    x << 0, 0, 0, 0, 1, 1, 1;
    y << 1, 2, 3, 4, 3, 5, 7;
    const auto g = group_by_covariate(make_dataset(x, y));
    RngStream rng(14, 2);
    REQUIRE_THROWS_AS(posterior_beta_random_x(g, 1000, rng), InsufficientReplicationError);
    const auto g0 = group_by_covariate(oracles::d0());
    REQUIRE_THROWS_AS(posterior_beta_random_x(g0, 50, rng), InvalidParameterError);
}

TEST_CASE("closed-form fixed-x posterior matches the fixture arithmetic") {
    const auto g = group_by_covariate(oracles::d0());
    const auto s = posterior_beta_fixed_x_closed(g);
    REQUIRE(s.method == "bayes-fixed-x-closed");
    REQUIRE(s.n_draws == 0);
    REQUIRE_THAT(s.beta_hat[0], Catch::Matchers::WithinAbs(2.5, 1e-12));
    REQUIRE_THAT(s.beta_hat[1], Catch::Matchers::WithinAbs(3.5, 1e-12));
    REQUIRE_THAT(s.sd[1], Catch::Matchers::WithinAbs(2.5, 1e-12));
    REQUIRE_THAT(s.sd[0], Catch::Matchers::WithinAbs(std::sqrt(1.25), 1e-12));
}

TEST_CASE("closed-form fixed-x posterior has zero sd on pure groups") {
    Eigen::VectorXd x(9), y(9);
    x << 0, 0, 0, 0, 1, 1, 1, 1, 1;
    y << 2, 2, 2, 2, 7, 7, 7, 7, 7;
    const auto g = group_by_covariate(make_dataset(x, y));
    const auto s = posterior_beta_fixed_x_closed(g);
    REQUIRE(s.sd.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("theorem-2 identity: closed form equals the grouped sandwich") {
    RngStream rng(404, 1);
    for (int rep = 0; rep < 100; ++rep) {
        const auto g = random_grouped(rng);
        const Eigen::MatrixXd a = posterior_beta_fixed_x_closed_cov(g);
        const Eigen::MatrixXd b = cov_sandwich_fixed_groups(g);
        REQUIRE(oracles::max_rel_err(a, b) < 1e-10);
    }
}

TEST_CASE("fixed-x monte carlo converges to the closed form on the fixture") {
    const auto g = group_by_covariate(oracles::d0());
    RngStream rng(15, 0);
    const auto s = posterior_beta_fixed_x_mc(g, 100000, rng);
    REQUIRE(s.method == "bayes-fixed-x-mc");
    // Closed-form slope sd is 2.5; t(3) tails make the variance estimate
    // noisy, so the spec pins a 2% band at 1e5 draws with a fixed seed.
    REQUIRE(std::abs(s.sd[1] - 2.5) < 0.05);
    // Posterior mean of each group is its average, so beta_hat is unbiased
    // for the least-squares fit; allow 3 Monte Carlo standard errors.
    const double mc_se = s.sd[1] / std::sqrt(100000.0);
    REQUIRE(std::abs(s.beta_hat[1] - 3.5) < 3.0 * mc_se);
}

TEST_CASE("fixed-x monte carlo on pure groups is deterministic") {
    Eigen::VectorXd x(8), y(8);
    x << 0, 0, 0, 0, 1, 1, 1, 1;
    y << 2, 2, 2, 2, 7, 7, 7, 7;
    const auto g = group_by_covariate(make_dataset(x, y));
    RngStream rng(15, 1);
    const auto s = posterior_beta_fixed_x_mc(g, 200, rng);
    REQUIRE(s.sd.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE_THAT(s.beta_hat[1], Catch::Matchers::WithinAbs(5.0, 1e-14));
}

TEST_CASE("fixed-x monte carlo tracks the closed form across random instances") {
    RngStream rng(404, 2);
    for (int rep = 0; rep < 5; ++rep) {
        auto g = random_grouped(rng, 6);
        RngStream draw_rng(405, static_cast<std::uint64_t>(rep));
        const auto mc = posterior_beta_fixed_x_mc(g, 100000, draw_rng);
        const auto closed = posterior_beta_fixed_x_closed(g);
        for (Eigen::Index j = 0; j < g.m(); ++j) {
            // 1/sqrt(draws) convergence with a 3-sigma-style band; the sd of
            // a variance estimate is inflated by heavy t tails, so use 10%.
            REQUIRE(std::abs(mc.sd[j] - closed.sd[j]) <= 0.1 * closed.sd[j] + 1e-12);
        }
    }
}

TEST_CASE("random-x posterior sd approaches the hc0 sandwich as n grows") {
    // Fixed discrete mechanism with five atoms, nonlinear means, and
    // heteroscedastic spread; the relative gap must shrink monotonically.
    const double atom_x[5] = {-2.0, -1.0, 0.0, 1.0, 2.0};
    const double weight[5] = {0.1, 0.2, 0.3, 0.25, 0.15};
    double prev_gap = std::numeric_limits<double>::infinity();
    for (long n : {200L, 800L, 3200L}) {
        std::vector<double> xr, yr;
        RngStream rng(1103, static_cast<std::uint64_t>(n));
        for (int k = 0; k < 5; ++k) {
            const long nk = std::lround(weight[k] * static_cast<double>(n));
            const double mu = 2.0 + 3.5 * atom_x[k] + 2.0 * atom_x[k] * atom_x[k];
            const double sd = 1.0 + std::abs(atom_x[k]);
            for (long i = 0; i < nk; ++i) {
                xr.push_back(atom_x[k]);
                yr.push_back(sample_normal(rng, mu, sd));
            }
        }
        Eigen::VectorXd x(static_cast<Eigen::Index>(xr.size()));
        Eigen::VectorXd y(static_cast<Eigen::Index>(yr.size()));
        for (std::size_t i = 0; i < xr.size(); ++i) {
            x[static_cast<Eigen::Index>(i)] = xr[i];
            y[static_cast<Eigen::Index>(i)] = yr[i];
        }
        const auto data = make_dataset(x, y);
        const auto g = group_by_covariate(data);
        RngStream draw_rng(1104, static_cast<std::uint64_t>(n));
        const auto s = posterior_beta_random_x(g, 20000, draw_rng);
        const Eigen::VectorXd beta = fit_ols(data);
        const Eigen::MatrixXd sw = cov_sandwich_hc0(data, beta);
        const double se = std::sqrt(sw(1, 1));
        const double gap = std::abs(s.sd[1] - se) / se;
        REQUIRE(gap < prev_gap);
        prev_gap = gap;
    }
    REQUIRE(prev_gap < 0.05);
}
