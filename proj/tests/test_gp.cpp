#include "bspm/errors.hpp"
#include "bspm/gp.hpp"
#include "bspm/rng.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace bspm;
using namespace testsupport;

namespace {

// Cycles through kernel families so the dense-oracle sweep exercises each.
KernelSpec kernel_for_trial(int trial) {
    switch (trial % 4) {
    case 0: return KernelSpec::se(1.0 + 0.1 * (trial % 7), 1.2);
    case 1: return KernelSpec::matern52(0.8, 0.9);
    case 2: return KernelSpec::rq_ard({1.1, 0.7, 1.9}, 1.4, 1.0);
    default: return KernelSpec::sum({KernelSpec::se(1.5, 0.6), KernelSpec::white_noise(0.05)});
    }
}

GpModel random_model(Rng& rng, int n, const KernelSpec& kernel, double noise) {
    const auto x = random_matrix(rng, n, 3, -2.0, 2.0);
    const auto y = random_vector(rng, n, -1.5, 1.5);
    return make_gp(x, y, kernel, noise);
}

} // namespace

TEST_SUITE("gp") {

TEST_CASE("noise-free model interpolates its training targets") {
    Rng rng(21);
    const auto x = random_matrix(rng, 12, 2, -3.0, 3.0);
    const auto y = random_vector(rng, 12, -2.0, 2.0);
    const auto model = make_gp(x, y, KernelSpec::se(1.0, 1.0), 0.0);
    const auto pred = gp_predict(model, x);
    CHECK((pred.mean - y).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("single training point matches the scalar posterior formula") {
    const auto kernel = KernelSpec::se(1.5, 2.0);
    Eigen::MatrixXd x(1, 1);
    x << 0.4;
    Eigen::VectorXd y(1);
    y << 1.3;
    const double noise = 0.2;
    const auto model = make_gp(x, y, kernel, noise);
    Eigen::MatrixXd xs(1, 1);
    xs << 1.1;
    const auto pred = gp_predict(model, xs);

    const double kxx = 2.0;
    const double kxs = 2.0 * std::exp(-(1.1 - 0.4) * (1.1 - 0.4) / (2.0 * 1.5 * 1.5));
    const double expected_mean = kxs * y[0] / (kxx + noise + model.jitter);
    const double expected_var = kxx - kxs * kxs / (kxx + noise + model.jitter);
    CHECK(std::abs(pred.mean[0] - expected_mean) < 1e-12);
    CHECK(std::abs(pred.cov(0, 0) - expected_var) < 1e-12);
}

TEST_CASE("posterior variance never exceeds the prior variance") {
    Rng rng(22);
    const auto kernel = KernelSpec::matern52(1.0, 1.7);
    const auto model = random_model(rng, 25, kernel, 0.05);
    const auto xs = random_matrix(rng, 40, 3, -3.0, 3.0);
    const auto pred = gp_predict(model, xs);
    const Eigen::VectorXd prior = kernel_diag(kernel, xs);
    for (int i = 0; i < 40; ++i) CHECK(pred.cov(i, i) <= prior[i] + 1e-8);
}

TEST_CASE("prediction matches a dense-solve oracle on 100 random problems") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.integer(49));
        const int m = 1 + static_cast<int>(rng.integer(8));
        const auto kernel = kernel_for_trial(trial);
        const int d = (kernel.kind == KernelSpec::Kind::RationalQuadratic) ? 3 : 3;
        const auto x = random_matrix(rng, n, d, -2.0, 2.0);
        const auto y = random_vector(rng, n, -1.0, 1.0);
        const double noise = 0.01 + 0.2 * rng.uniform();
        const auto model = make_gp(x, y, kernel, noise);
        const auto xs = random_matrix(rng, m, d, -2.0, 2.0);
        const auto pred = gp_predict(model, xs);
        const auto oracle = dense_posterior(x, y, kernel, noise + model.jitter, xs);
        CHECK((pred.mean - oracle.mean).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((pred.cov - oracle.cov).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("log marginal likelihood matches the scalar formula at n=1") {
    Eigen::MatrixXd x(1, 1);
    x << 0.0;
    Eigen::VectorXd y(1);
    y << 0.7;
    const double s2 = 1.3, noise = 0.2;
    const auto model = make_gp(x, y, KernelSpec::se(1.0, s2), noise);
    const double denom = s2 + noise + model.jitter;
    const double expected =
        -0.5 * y[0] * y[0] / denom - 0.5 * std::log(denom) - 0.5 * std::log(2.0 * M_PI);
    CHECK(log_marginal_likelihood(model) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("log marginal likelihood matches the dense oracle") {
    Rng rng(24);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.integer(40));
        const auto kernel = kernel_for_trial(trial);
        const auto x = random_matrix(rng, n, 3, -2.0, 2.0);
        const auto y = random_vector(rng, n, -1.0, 1.0);
        const double noise = 0.05 + 0.3 * rng.uniform();
        const auto model = make_gp(x, y, kernel, noise);
        const double oracle = dense_lml(x, y, kernel, noise + model.jitter);
        CHECK(std::abs(log_marginal_likelihood(model) - oracle) < 1e-8);
    }
}

TEST_CASE("moving variance between the kernel diagonal and the noise term is neutral") {
    Rng rng(25);
    const auto x = random_matrix(rng, 15, 2, -2.0, 2.0);
    const auto y = random_vector(rng, 15, -1.0, 1.0);
    const double a = 0.07, b = 0.13;
    const auto m1 = make_gp(x, y, KernelSpec::sum({KernelSpec::se(1.0, 1.0), KernelSpec::white_noise(a)}),
                            b);
    const auto m2 = make_gp(x, y, KernelSpec::se(1.0, 1.0), a + b);
    CHECK(log_marginal_likelihood(m1) ==
          doctest::Approx(log_marginal_likelihood(m2)).epsilon(1e-12));
}

TEST_CASE("LML gradients match central finite differences on every hyperparameter") {
    Rng rng(26);
    const auto x = random_matrix(rng, 22, 4, 0.0, 6.0);
    const auto y = random_vector(rng, 22, -1.5, 1.5);
    const auto kernel = example_st_kernel();
    const double noise = 0.15;
    const auto model = make_gp(x, y, kernel, noise);

    const auto grads = lml_gradient(model, true);
    const auto packed = pack_params(kernel);
    REQUIRE(grads.size() == packed.size() + 1);

    const double h = 1e-6;
    auto lml_at = [&](const std::vector<double>& params, double noise_value) {
        auto k = kernel;
        unpack_params(k, params);
        return log_marginal_likelihood(make_gp(x, y, k, noise_value));
    };
    for (std::size_t p = 0; p < packed.size(); ++p) {
        auto plus = packed, minus = packed;
        plus[p] += h;
        minus[p] -= h;
        const double fd = (lml_at(plus, noise) - lml_at(minus, noise)) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grads[p]), 1e-2});
        CHECK(std::abs(grads[p] - fd) / denom < 1e-4);
    }
    // noise enters as log(noise_var)
    const double fd_noise = (lml_at(packed, noise * std::exp(h)) - lml_at(packed, noise * std::exp(-h))) /
                            (2.0 * h);
    const double denom = std::max({std::abs(fd_noise), std::abs(grads.back()), 1e-2});
    CHECK(std::abs(grads.back() - fd_noise) / denom < 1e-4);
}

TEST_CASE("fit with exhausted budget returns the input parameters unchanged") {
    Rng rng(27);
    const auto model = random_model(rng, 18, KernelSpec::se(1.0, 1.0), 0.1);
    FitOptions opts;
    opts.budget = 1; // enough to score the initial point only
    opts.n_restarts = 0;
    const auto fitted = fit_hyperparameters(model, opts);
    CHECK(kernel_equal_bits(fitted.kernel, model.kernel));
    CHECK(fitted.noise_var == model.noise_var);
}

TEST_CASE("fit never lowers the LML and is deterministic in the seed") {
    Rng rng(28);
    const auto model = random_model(rng, 30, KernelSpec::se(0.3, 0.5), 0.3);
    FitOptions opts;
    opts.budget = 25;
    opts.n_restarts = 2;
    opts.seed = 99;
    const auto a = fit_hyperparameters(model, opts);
    const auto b = fit_hyperparameters(model, opts);
    CHECK(log_marginal_likelihood(a) >= log_marginal_likelihood(model));
    CHECK(kernel_equal_bits(a.kernel, b.kernel));
    CHECK(a.noise_var == b.noise_var);
}

TEST_CASE("fit recovers a known lengthscale within a factor of two (median of 10 seeds)") {
    std::vector<double> recovered;
    for (int seed = 0; seed < 10; ++seed) {
        Rng rng(1000 + seed);
        const int n = 80;
        Eigen::MatrixXd x(n, 1);
        for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform(0.0, 20.0);
        const auto truth = KernelSpec::se(2.0, 1.0);
        Eigen::MatrixXd gram = kernel_eval(truth, x, x);
        gram.diagonal().array() += 1e-10;
        const Eigen::MatrixXd chol = gram.llt().matrixL();
        Eigen::VectorXd z(n);
        for (int i = 0; i < n; ++i) z[i] = rng.normal();
        Eigen::VectorXd y = chol * z;
        for (int i = 0; i < n; ++i) y[i] += 0.1 * rng.normal();

        auto model = make_gp(x, y, KernelSpec::se(0.7, 0.7), 0.05);
        FitOptions opts;
        opts.budget = 60;
        opts.n_restarts = 3;
        opts.seed = seed;
        const auto fitted = fit_hyperparameters(model, opts);
        recovered.push_back(fitted.kernel.lengthscale);
    }
    const double med = median_of(recovered);
    CHECK(med > 1.0);
    CHECK(med < 4.0);
}

TEST_CASE("construction rejects malformed inputs") {
    Rng rng(29);
    const auto x = random_matrix(rng, 5, 2, -1.0, 1.0);
    const auto y = random_vector(rng, 5, -1.0, 1.0);
    CHECK_THROWS_AS(make_gp(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), KernelSpec::se(1, 1), 0.1),
                    ParamError);
    CHECK_THROWS_AS(make_gp(x, y.head(4), KernelSpec::se(1, 1), 0.1), ParamError);
    CHECK_THROWS_AS(make_gp(x, y, KernelSpec::se(1, 1), -0.1), ParamError);
    CHECK_THROWS_AS(make_gp(x, y, KernelSpec::se(-1, 1), 0.1), ParamError);
    const auto model = make_gp(x, y, KernelSpec::se(1, 1), 0.1);
    CHECK_THROWS_AS(gp_predict(model, random_matrix(rng, 3, 4, -1.0, 1.0)), ParamError);
}

TEST_CASE("fit reports a numerical error when no start yields a finite LML") {
    Rng rng(30);
    const auto x = random_matrix(rng, 6, 1, -1.0, 1.0);
    Eigen::VectorXd y(6);
    y.setConstant(1e200); // y' K^-1 y overflows, every start's LML is non-finite
    const auto model = make_gp(x, y, KernelSpec::se(1.0, 1.0), 0.1);
    FitOptions opts;
    opts.budget = 6;
    opts.n_restarts = 1;
    CHECK_THROWS_AS(fit_hyperparameters(model, opts), NumericalError);
}

} // TEST_SUITE
