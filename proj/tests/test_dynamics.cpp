#include <gtest/gtest.h>

#include <cmath>

#include "starkloc/dynamics.hpp"
#include "support/oracles.hpp"

using namespace starkloc;

namespace {

const auto unit_field = PotentialSpec::linear_field(1.0);

const SpectralData& laplacian200() {
    static const SpectralData sd = diagonalize(build_operator(nearest_neighbor_kernel(), unit_field, 200));
    return sd;
}

const SpectralData& power_law4(int n) {
    static const SpectralData n200 = diagonalize(build_operator(power_law_kernel(4.0), unit_field, 200));
    static const SpectralData n400 = diagonalize(build_operator(power_law_kernel(4.0), unit_field, 400));
    return n == 200 ? n200 : n400;
}

Eigen::VectorXcd delta(int half_width, long site) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(2 * half_width + 1);
    v(site + half_width) = 1.0;
    return v;
}

// small boxes need a narrower window than the default of at least 10
SpectralData diagonalize_small(const HoppingKernel& kernel, const PotentialSpec& pot, int half_width) {
    SpectralOptions options;
    options.window = 2;
    return diagonalize(build_operator(kernel, pot, half_width), options);
}

TimeGrid short_grid(double step, double horizon) {
    TimeGrid grid;
    grid.step = step;
    grid.horizon = horizon;
    grid.quasi_random_count = 0;
    return grid;
}

} // namespace

TEST(Evolve, ZeroKernelOnlyPicksUpAPhase) {
    const auto pot = PotentialSpec::linear_field(1.0, perturbation::UniformRandom{0.7, 5});
    const auto sd = diagonalize_small(HoppingKernel{}, pot, 10);
    for (long k : {-3L, 0L, 4L}) {
        for (double t : {0.3, 2.0, 17.5}) {
            const auto packet = evolve(sd, k, t);
            const complex expected = std::polar(1.0, -(k + pot.perturbation_at(k)) * t);
            EXPECT_NEAR(std::abs(packet.at(k) - expected), 0.0, 1e-12);
            EXPECT_NEAR(packet.norm(), 1.0, 1e-12);
            EXPECT_EQ((packet.amplitudes - packet.at(k) * delta(10, k)).cwiseAbs().maxCoeff(), 0.0);
        }
    }
}

TEST(Evolve, TimeZeroIsTheSourceDelta) {
    for (const auto* sd : {&laplacian200(), &power_law4(200)}) {
        const auto packet = evolve(*sd, 7, 0.0);
        EXPECT_LE((packet.amplitudes - delta(sd->half_width, 7)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Evolve, MatchesOdeIntegrationForLaplacianField) {
    const auto op = build_operator(nearest_neighbor_kernel(), unit_field, 200);
    const auto reference = oracle::integrate_schroedinger(op.matrix(), delta(200, 0), 1.0);
    const auto packet = evolve(laplacian200(), 0, 1.0);
    EXPECT_LE((packet.amplitudes - reference).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Evolve, MatchesOdeIntegrationForComplexKernel) {
    KernelParams p;
    p.positive_half = {complex(0.5, 0.3), complex(0.0, -0.2)};
    const auto pot = PotentialSpec::linear_field(1.0, perturbation::UniformRandom{1.0, 8});
    const auto op = build_operator(build_kernel(KernelFamily::FiniteSupport, p), pot, 50);
    const auto sd = diagonalize(op);
    for (double t : {0.5, 4.0, 10.0}) {
        const auto reference = oracle::integrate_schroedinger(op.matrix(), delta(50, 3), t, 1e-12);
        EXPECT_LE((evolve(sd, 3, t).amplitudes - reference).cwiseAbs().maxCoeff(), 1e-7) << "t=" << t;
    }
}

TEST(Evolve, UnitarityAndGroupLaw) {
    const auto& sd = power_law4(200);
    for (double t1 : {0.7, 3.0, 40.0}) {
        for (double t2 : {0.2, 11.0}) {
            const auto direct = evolve(sd, -5, t1 + t2);
            const auto stepped = evolve(sd, evolve(sd, -5, t1), t2);
            EXPECT_NEAR(direct.norm(), 1.0, 1e-10);
            EXPECT_NEAR(stepped.norm(), 1.0, 1e-10);
            EXPECT_LE((direct.amplitudes - stepped.amplitudes).cwiseAbs().maxCoeff(), 1e-8);
            EXPECT_DOUBLE_EQ(stepped.time, t1 + t2);
        }
    }
}

TEST(Evolve, SourceMustBeInterior) {
    const auto& sd = laplacian200();
    EXPECT_THROW(evolve(sd, 151, 1.0), SourceOutsideInterior);
    EXPECT_NO_THROW(evolve(sd, 150, 1.0));
    const double q[] = {2.0};
    EXPECT_THROW(envelope(sd, -200, q), SourceOutsideInterior);
}

TEST(Moments, StationaryUnderZeroKernel) {
    const auto sd = diagonalize_small(HoppingKernel{}, unit_field, 10);
    EXPECT_EQ(moment(evolve(sd, 0, 3.0), 2.0), 0.0);
    const double q[] = {2.0, 1.0};
    const auto run = moment_series(sd, 5, q, short_grid(0.5, 20.0).times());
    // |e^{-i lambda t}|^2 = 1 only up to rounding
    for (const double v : run.series[0].values) {
        EXPECT_NEAR(v, 25.0, 25.0 * 1e-14);
    }
    for (const double v : run.series[1].values) {
        EXPECT_NEAR(v, 5.0, 5.0 * 1e-14);
    }
    EXPECT_THROW(moment(evolve(sd, 0, 1.0), 0.0), std::invalid_argument);
}

TEST(Moments, SeriesAgreesWithSinglePackets) {
    const auto& sd = power_law4(200);
    const double q[] = {1.0, 2.5};
    const std::vector<double> times = {0.0, 0.4, 3.3, 90.0, 12345.6};
    MomentRunOptions options;
    options.block = 2;
    const auto run = moment_series(sd, 2, q, times, options);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const auto packet = evolve(sd, 2, times[i]);
        EXPECT_NEAR(run.series[0].values[i], moment(packet, 1.0), 1e-10);
        EXPECT_NEAR(run.series[1].values[i], moment(packet, 2.5), 1e-10);
    }
    EXPECT_EQ(run.series[1].running_sup, *std::max_element(run.series[1].values.begin(), run.series[1].values.end()));
    EXPECT_LE(run.max_norm_defect, 1e-10);
}

TEST(Moments, ThreadCountDoesNotChangeValues) {
    const auto& sd = power_law4(200);
    const double q[] = {2.5};
    const auto times = short_grid(0.5, 100.0).times();
    MomentRunOptions serial;
    serial.block = 16;
    MomentRunOptions pooled = serial;
    pooled.threads = 4;
    EXPECT_EQ(moment_series(sd, 0, q, times, serial).series[0].values,
              moment_series(sd, 0, q, times, pooled).series[0].values);
}

TEST(Moments, LaplacianRunningSupSettlesEarly) {
    const double q[] = {1.0};
    const auto short_run = moment_series(laplacian200(), 0, q, short_grid(1.0, 100.0).times());
    const auto long_run = moment_series(laplacian200(), 0, q, short_grid(1.0, 1000.0).times());
    const double a = short_run.series[0].running_sup;
    const double b = long_run.series[0].running_sup;
    EXPECT_TRUE(std::isfinite(a));
    EXPECT_LE(relative_drift(a, b), 0.02) << a << " vs " << b;
}

TEST(TimeGridTest, RegularPlusQuasiRandom) {
    TimeGrid grid;
    grid.step = 0.25;
    grid.horizon = 1.0;
    grid.quasi_random_count = 3;
    grid.quasi_random_horizon = 100.0;
    const auto t = grid.times();
    ASSERT_EQ(t.size(), 8u);
    EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
    EXPECT_EQ(t.front(), 0.0);
    EXPECT_EQ(TimeGrid{}.times().size(), 20001u + 100u);
}

TEST(Envelope, ZeroKernelIsTheDelta) {
    const auto sd = diagonalize_small(HoppingKernel{}, unit_field, 12);
    const double q[] = {1.0, 2.0, 3.5};
    const auto env = envelope(sd, -2, q);
    EXPECT_EQ(env.majorant, delta(12, -2).real());
    EXPECT_EQ(env.find(2.0)->value, 4.0);
    EXPECT_DOUBLE_EQ(env.find(3.5)->value, std::pow(2.0, 3.5));
    EXPECT_EQ(env.find(1.0)->boundary_share, 0.0);
    EXPECT_EQ(env.find(4.0), nullptr);
}

TEST(Envelope, DominatesLaplacianMoments) {
    const auto& sd = laplacian200();
    const double q[] = {2.0};
    const auto env = envelope(sd, 0, q);
    EXPECT_NEAR(env.diagonal(), 1.0, 1e-8);
    EXPECT_TRUE(std::isfinite(env.find(2.0)->value));
    MomentRunOptions options;
    options.envelope = &env;
    TimeGrid grid = short_grid(0.5, 200.0);
    grid.quasi_random_count = 20;
    const auto run = moment_series(sd, 0, q, grid.times(), options);
    EXPECT_LE(run.series[0].running_sup, env.find(2.0)->value + 1e-10);
    EXPECT_LE(*run.max_domination_excess, 1e-10);
}

TEST(Envelope, PowerLawMomentStableUnderDoubling) {
    const double q[] = {2.5};
    const auto small = envelope(power_law4(200), 0, q);
    const auto large = envelope(power_law4(400), 0, q);
    EXPECT_LT(relative_drift(small.find(2.5)->value, large.find(2.5)->value), 0.10);
    EXPECT_LT(small.find(2.5)->boundary_share, 0.01);
    EXPECT_NEAR(small.diagonal(), 1.0, 1e-8);
}

TEST(Verdict, HypothesisArithmetic) {
    EXPECT_TRUE(ule_hypothesis(10.0, 2.0));
    EXPECT_TRUE(ule_hypothesis(5.0, 4.0));
    EXPECT_FALSE(ule_hypothesis(2.0, 3.0));
    EXPECT_FALSE(ule_hypothesis(3.0, 3.0));
}

TEST(Verdict, ZeroKernelIsBoundedWithUnitRatio) {
    const double q[] = {2.0};
    const auto small = diagonalize(build_operator(HoppingKernel{}, unit_field, 20));
    const auto large = diagonalize(build_operator(HoppingKernel{}, unit_field, 40));
    const auto ule = ule_constants(small, 10.0);
    const auto base = envelope(small, 3, q);
    const auto doubled = envelope(large, 3, q);
    const auto v = ule_implies_bounded_moments_check(ule, 2.0, base, &doubled);
    EXPECT_TRUE(v.hypothesis);
    EXPECT_EQ(v.envelope_moment, 9.0);
    EXPECT_EQ(*v.doubling_ratio, 1.0);
    EXPECT_EQ(v.status, VerdictStatus::Bounded);
}

TEST(Verdict, LaplacianDoublingRatio) {
    const double q[] = {4.0};
    const auto large = diagonalize(build_operator(nearest_neighbor_kernel(), unit_field, 400));
    const auto ule = ule_constants(laplacian200(), 5.0);
    const auto base = envelope(laplacian200(), 0, q);
    const auto doubled = envelope(large, 0, q);
    const auto v = ule_implies_bounded_moments_check(ule, 4.0, base, &doubled);
    EXPECT_TRUE(v.hypothesis);
    EXPECT_LT(*v.doubling_ratio, 1.1);
    EXPECT_EQ(v.status, VerdictStatus::Bounded);
    EXPECT_TRUE(v.pass());
    EXPECT_EQ(ule_implies_bounded_moments_check(ule, 4.0, base).status, VerdictStatus::NoDoubling);
    EXPECT_EQ(to_string(VerdictStatus::NoDoubling), "n/a");
}

TEST(Verdict, HypothesisNotSatisfiedMakesNoClaim) {
    const auto sd = diagonalize(build_operator(power_law_kernel(3.0), unit_field, 60));
    const double q[] = {3.0};
    const auto v = ule_implies_bounded_moments_check(ule_constants(sd, 2.0), 3.0, envelope(sd, 0, q));
    EXPECT_FALSE(v.hypothesis);
    EXPECT_EQ(v.status, VerdictStatus::HypothesisNotSatisfied);
    EXPECT_TRUE(v.pass());
}

TEST(Verdict, LeakyBoxIsInconclusive) {
    const double q[] = {2.0};
    EnvelopeBound env;
    env.moments.push_back({2.0, 10.0, 0.2});
    ULEReport ule;
    ule.alpha = 5.0;
    EnvelopeBound doubled;
    doubled.moments.push_back({2.0, 30.0, 0.1});
    const auto v = ule_implies_bounded_moments_check(ule, q[0], env, &doubled);
    EXPECT_EQ(v.status, VerdictStatus::Inconclusive);
    EXPECT_TRUE(v.pass());
    env.moments[0].boundary_share = 0.0;
    EXPECT_EQ(ule_implies_bounded_moments_check(ule, q[0], env, &doubled).status, VerdictStatus::Unstable);
}
