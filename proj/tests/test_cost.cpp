#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mfl/cost.hpp"
#include "mfl/penalty.hpp"

using namespace mfl;

TEST_CASE("variance cost values") {
    auto var = make_variance_cost(InteractionModel::Structure::first_order);
    auto same = DiscreteMeasure::uniform(1, {2.0, 2.0, 2.0});
    const double at[1] = {2.0};
    CHECK(var.eval(std::span<const double>{at, 1}, same) == doctest::Approx(0.0).epsilon(1e-15));

    auto two = DiscreteMeasure::uniform(1, {0.0, 2.0});
    const double zero[1] = {0.0};
    CHECK(var.eval(std::span<const double>{zero, 1}, two) == doctest::Approx(1.0).epsilon(1e-15));

    auto vel = make_variance_cost(InteractionModel::Structure::second_order);
    auto aligned = DiscreteMeasure::uniform(2, {0.0, 3.0, 10.0, 3.0});
    const double x[2] = {-5.0, 3.0};
    CHECK(vel.eval(std::span<const double>{x, 2}, aligned) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("finite cost: zero and single-agent closed forms") {
    auto model = make_zero_model(1);
    TimeGrid grid{1.0, 50};
    auto psi = make_power_penalty(2.0, Subspace::full(1));

    std::vector<double> x0 = {0.0};
    auto u = ControlSignal::zeros(grid.steps, 1, 1);
    auto traj = integrate(model, x0, 1, u, grid);
    auto rep = finite_cost(traj, u, make_zero_cost(), psi);
    CHECK(rep.total == 0.0);

    for (auto& v : u.values) v = 0.8;
    traj = integrate(model, x0, 1, u, grid);
    rep = finite_cost(traj, u, make_zero_cost(), psi);
    CHECK(rep.penalty_term == doctest::Approx(0.5 * 0.8 * 0.8).epsilon(1e-14));
    CHECK(rep.total == doctest::Approx(rep.running_term + rep.penalty_term).epsilon(1e-15));
}

TEST_CASE("measure penalty grouping") {
    auto psi = make_power_penalty(2.0, Subspace::full(1));

    SUBCASE("all distinct positions reduce to the per-agent mean") {
        const double pos[3] = {0.0, 1.0, 2.0};
        const double ctl[3] = {1.0, -2.0, 0.5};
        const double grouped = measure_penalty(std::span<const double>{pos, 3}, 3, 1,
                                               std::span<const double>{ctl, 3}, 1, psi);
        double mean = 0.0;
        for (double c : ctl) mean += 0.5 * c * c;
        CHECK(grouped == doctest::Approx(mean / 3.0).epsilon(1e-14));
        CHECK(jensen_gap(std::span<const double>{pos, 3}, 3, 1, std::span<const double>{ctl, 3}, 1,
                         psi) == doctest::Approx(0.0).epsilon(1e-15));
    }

    SUBCASE("coincident agents with opposite controls give a strict gap") {
        const double pos[3] = {1.0, 1.0, 5.0};
        const double ctl[3] = {2.0, -2.0, 0.0};
        const double grouped = measure_penalty(std::span<const double>{pos, 3}, 3, 1,
                                               std::span<const double>{ctl, 3}, 1, psi);
        CHECK(grouped == doctest::Approx(0.0).epsilon(1e-15));  // the pair's mean control is 0
        const double gap = jensen_gap(std::span<const double>{pos, 3}, 3, 1,
                                      std::span<const double>{ctl, 3}, 1, psi);
        CHECK(gap == doctest::Approx((0.5 * 4.0 + 0.5 * 4.0) / 3.0).epsilon(1e-14));
        CHECK(gap > 0.0);
    }

    SUBCASE("coincident agents with equal controls give equality") {
        const double pos[2] = {1.0, 1.0};
        const double ctl[2] = {0.7, 0.7};
        CHECK(jensen_gap(std::span<const double>{pos, 2}, 2, 1, std::span<const double>{ctl, 2}, 1,
                         psi) == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("grouping is transitive within the tolerance") {
        // chain 0 ~ eps ~ 2eps collapses to one group
        const double eps = 1e-12;
        const double pos[3] = {0.0, eps, 2.0 * eps};
        const double ctl[3] = {3.0, 0.0, -3.0};
        const double grouped = measure_penalty(std::span<const double>{pos, 3}, 3, 1,
                                               std::span<const double>{ctl, 3}, 1, psi);
        CHECK(grouped == doctest::Approx(0.0).epsilon(1e-15));
    }
}

TEST_CASE("jensen inequality on seeded grouping instances") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> nagents(2, 12);
    std::uniform_int_distribution<int> cluster(1, 4);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    const auto psis = {make_power_penalty(2.0, Subspace::full(2)),
                       make_power_penalty(3.0, Subspace::full(2)),
                       make_hybrid_penalty(2.0, Subspace::full(2))};
    for (int trial = 0; trial < 300; ++trial) {
        const int n = nagents(rng);
        std::vector<double> pos(2 * n), ctl(2 * n);
        // positions drawn from a few cluster centers so coincidences occur
        const int nc = cluster(rng);
        std::vector<double> centers(2 * nc);
        for (auto& c : centers) c = unif(rng);
        std::uniform_int_distribution<int> pick(0, nc - 1);
        for (int i = 0; i < n; ++i) {
            const int c = pick(rng);
            pos[2 * i] = centers[2 * c];
            pos[2 * i + 1] = centers[2 * c + 1];
            ctl[2 * i] = unif(rng);
            ctl[2 * i + 1] = unif(rng);
        }
        for (const auto& psi : psis) {
            const double gap = jensen_gap(pos, n, 2, ctl, 2, psi);
            CHECK(gap >= -1e-12);
        }
    }
}

TEST_CASE("finite cost invariants on a coupled run") {
    auto model = make_cucker_smale(0.5, 1);
    TimeGrid grid{1.0, 25};
    const int N = 4;
    std::vector<double> x0 = {0, 1, 1, -1, 2, 0.5, -1, 0};
    auto u = ControlSignal::zeros(grid.steps, N, 1);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(-1, 1);
    for (auto& v : u.values) v = unif(rng);
    auto psi = make_power_penalty(2.0, Subspace::velocity_half(1));
    auto L = make_variance_cost(InteractionModel::Structure::second_order);
    auto traj = integrate(model, x0, N, u, grid);
    auto rep = finite_cost(traj, u, L, psi);

    CHECK(rep.total == doctest::Approx(rep.running_term + rep.penalty_term).epsilon(1e-15));
    CHECK(rep.jensen_gap >= -1e-12);
    // distinct positions: grouped penalty equals the per-agent mean exactly
    CHECK(rep.measure_penalty == doctest::Approx(rep.penalty_term).epsilon(1e-12));

    // permutation invariance
    const std::vector<int> perm = {3, 1, 0, 2};
    std::vector<double> x0p(x0.size());
    auto up = ControlSignal::zeros(grid.steps, N, 1);
    for (int i = 0; i < N; ++i) {
        x0p[2 * i] = x0[2 * perm[i]];
        x0p[2 * i + 1] = x0[2 * perm[i] + 1];
        for (int k = 0; k < grid.steps; ++k) up.at(k, i)[0] = u.at(k, perm[i])[0];
    }
    auto trajp = integrate(model, x0p, N, up, grid);
    auto repp = finite_cost(trajp, up, L, psi);
    CHECK(repp.total == doctest::Approx(rep.total).epsilon(1e-12));
}

TEST_CASE("equality certificate for identically initialized agents") {
    auto model = make_cucker_smale(0.3, 1);
    TimeGrid grid{1.0, 20};
    const int N = 3;
    // agents 0 and 1 identical, with identical controls
    std::vector<double> x0 = {0.5, 1.0, 0.5, 1.0, -1.0, 0.0};
    auto u = ControlSignal::zeros(grid.steps, N, 1);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unif(-1, 1);
    for (int k = 0; k < grid.steps; ++k) {
        const double shared = unif(rng);
        u.at(k, 0)[0] = shared;
        u.at(k, 1)[0] = shared;
        u.at(k, 2)[0] = unif(rng);
    }
    auto psi = make_power_penalty(2.0, Subspace::velocity_half(1));
    auto traj = integrate(model, x0, N, u, grid);
    for (int k = 0; k < grid.steps; ++k) {
        const std::span<const double> uk{u.values.data() + static_cast<std::size_t>(k) * N,
                                         static_cast<std::size_t>(N)};
        CHECK(jensen_gap(traj.frame(k), N, 2, uk, 1, psi) <= 1e-9);
    }
}

TEST_CASE("penalty approximation by inf-convolution never increases the cost") {
    auto model = make_zero_model(1);
    TimeGrid grid{1.0, 8};
    const int N = 2;
    std::vector<double> x0 = {0.4, -0.6};
    auto u = ControlSignal::zeros(grid.steps, N, 1);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> unif(-2, 2);
    for (auto& v : u.values) v = unif(rng);
    auto psi = make_power_penalty(2.0, Subspace::full(1));
    auto theta = make_power_reference(2.0);
    auto traj = integrate(model, x0, N, u, grid);
    const double exact = finite_cost(traj, u, make_zero_cost(), psi).total;

    double prev = -1e300;
    for (int n : {1, 2, 4, 8}) {
        ModeratedPenalty approx = psi;
        approx.name = "psi_" + std::to_string(n);
        auto base = psi.eval;
        auto theval = theta.eval;
        approx.eval = [base, theval, n](std::span<const double> x) {
            return inf_convolution(base, theval, n, x);
        };
        const double total = finite_cost(traj, u, make_zero_cost(), approx).total;
        CHECK(total <= exact + 1e-9);
        CHECK(total >= prev - 1e-7);
        prev = total;
    }
}
