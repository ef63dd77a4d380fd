#include "sles/error.hpp"
#include "sles/lp.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <optional>
#include <random>

using namespace sles;

namespace {

struct Constraint {
    std::vector<double> a;
    lp::Sense sense;
    double rhs;
};

// Solves a small dense system; false when singular.
bool solve_dense(std::vector<std::vector<double>> m, std::vector<double>& x)
{
    const size_t n = m.size();
    for (size_t c = 0; c < n; ++c) {
        size_t p = c;
        for (size_t r = c + 1; r < n; ++r) {
            if (std::abs(m[r][c]) > std::abs(m[p][c])) p = r;
        }
        if (std::abs(m[p][c]) < 1e-10) return false;
        std::swap(m[c], m[p]);
        for (size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = m[r][c] / m[c][c];
            for (size_t k = c; k <= n; ++k) m[r][k] -= f * m[c][k];
        }
    }
    x.resize(n);
    for (size_t i = 0; i < n; ++i) x[i] = m[i][n] / m[i][i];
    return true;
}

// Minimum over all vertices of a bounded polytope (every variable boxed).
std::optional<double> vertex_minimum(const std::vector<double>& cost, const std::vector<double>& lo,
                                     const std::vector<double>& hi, const std::vector<Constraint>& rows)
{
    const size_t n = cost.size();
    std::vector<Constraint> planes = rows;
    for (size_t j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        planes.push_back({e, lp::Sense::greater_equal, lo[j]});
        planes.push_back({e, lp::Sense::less_equal, hi[j]});
    }
    auto feasible = [&](const std::vector<double>& x) {
        for (size_t j = 0; j < n; ++j) {
            if (x[j] < lo[j] - 1e-7 || x[j] > hi[j] + 1e-7) return false;
        }
        for (const auto& r : rows) {
            double s = 0.0;
            for (size_t j = 0; j < n; ++j) s += r.a[j] * x[j];
            if (r.sense == lp::Sense::less_equal && s > r.rhs + 1e-7) return false;
            if (r.sense == lp::Sense::greater_equal && s < r.rhs - 1e-7) return false;
            if (r.sense == lp::Sense::equal && std::abs(s - r.rhs) > 1e-7) return false;
        }
        return true;
    };
    std::optional<double> best;
    std::vector<size_t> pick(n);
    const size_t P = planes.size();
    std::function<void(size_t, size_t)> rec = [&](size_t depth, size_t from) {
        if (depth == n) {
            std::vector<std::vector<double>> m;
            for (size_t i : pick) {
                auto row = planes[i].a;
                row.push_back(planes[i].rhs);
                m.push_back(row);
            }
            std::vector<double> x;
            if (!solve_dense(m, x) || !feasible(x)) return;
            double c = 0.0;
            for (size_t j = 0; j < n; ++j) c += cost[j] * x[j];
            if (!best || c < *best) best = c;
            return;
        }
        for (size_t i = from; i < P; ++i) {
            pick[depth] = i;
            rec(depth + 1, i + 1);
        }
    };
    rec(0, 0);
    return best;
}

} // namespace

TEST_CASE("textbook maximization")
{
    // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
    lp::Problem p;
    const auto x = p.add_variable(-3.0, 0.0, lp::kInfinity);
    const auto y = p.add_variable(-5.0, 0.0, lp::kInfinity);
    p.add_row({{x, 1.0}}, lp::Sense::less_equal, 4.0);
    p.add_row({{y, 2.0}}, lp::Sense::less_equal, 12.0);
    p.add_row({{x, 3.0}, {y, 2.0}}, lp::Sense::less_equal, 18.0);
    const auto r = lp::solve(p);
    REQUIRE(r.status == lp::Status::optimal);
    CHECK(r.objective == doctest::Approx(-36.0));
    CHECK(r.x[x] == doctest::Approx(2.0));
    CHECK(r.x[y] == doctest::Approx(6.0));
}

TEST_CASE("equality and greater-equal rows, nonzero lower bounds")
{
    // min x + 2y st x + y = 10, x >= 3 (row), y in [2, 20], x in [1, 6] -> x = 6, y = 4.
    lp::Problem p;
    const auto x = p.add_variable(1.0, 1.0, 6.0);
    const auto y = p.add_variable(2.0, 2.0, 20.0);
    p.add_row({{x, 1.0}, {y, 1.0}}, lp::Sense::equal, 10.0);
    p.add_row({{x, 1.0}}, lp::Sense::greater_equal, 3.0);
    const auto r = lp::solve(p);
    REQUIRE(r.status == lp::Status::optimal);
    CHECK(r.x[x] == doctest::Approx(6.0));
    CHECK(r.x[y] == doctest::Approx(4.0));
    CHECK(r.objective == doctest::Approx(14.0));
}

TEST_CASE("infeasible and unbounded")
{
    lp::Problem inf;
    const auto a = inf.add_variable(1.0, 0.0, 5.0);
    inf.add_row({{a, 1.0}}, lp::Sense::greater_equal, 6.0);
    CHECK(lp::solve(inf).status == lp::Status::infeasible);

    lp::Problem unb;
    const auto u = unb.add_variable(-1.0, 0.0, lp::kInfinity);
    const auto v = unb.add_variable(0.0, 0.0, lp::kInfinity);
    unb.add_row({{u, 1.0}, {v, -1.0}}, lp::Sense::less_equal, 1.0);
    CHECK(lp::solve(unb).status == lp::Status::unbounded);

    lp::Problem empty;
    const auto r = lp::solve(empty);
    CHECK(r.status == lp::Status::optimal);
    CHECK(r.objective == 0.0);

    lp::Problem bad;
    CHECK_THROWS_AS(bad.add_variable(0.0, -lp::kInfinity, 1.0), InputError);
    CHECK_THROWS_AS(bad.add_variable(0.0, 2.0, 1.0), InputError);
    CHECK_THROWS_AS(bad.add_row({{3, 1.0}}, lp::Sense::equal, 0.0), InputError);
    CHECK(lp::to_string(lp::Status::optimal) == "optimal");
}

TEST_CASE("property: random boxed LPs match vertex enumeration")
{
    for (uint64_t seed = 1; seed <= 300; ++seed) {
        CAPTURE(seed);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const size_t n = 2 + seed % 3;
        const size_t m = 1 + seed % 4;
        std::vector<double> cost(n), lo(n), hi(n);
        lp::Problem p;
        for (size_t j = 0; j < n; ++j) {
            cost[j] = 10.0 * u(rng);
            lo[j] = 5.0 * u(rng);
            hi[j] = lo[j] + 1.0 + 9.0 * (u(rng) + 1.0);
            p.add_variable(cost[j], lo[j], hi[j]);
        }
        std::vector<Constraint> rows;
        for (size_t i = 0; i < m; ++i) {
            Constraint c{std::vector<double>(n), lp::Sense::less_equal, 0.0};
            std::vector<lp::Term> terms;
            for (size_t j = 0; j < n; ++j) {
                c.a[j] = std::round(4.0 * u(rng) * 100.0) / 100.0;
                terms.push_back({j, c.a[j]});
            }
            const double pick = u(rng);
            c.sense = pick < -0.5 ? lp::Sense::greater_equal : pick < 0.8 ? lp::Sense::less_equal : lp::Sense::equal;
            c.rhs = 10.0 * u(rng);
            rows.push_back(c);
            p.add_row(terms, c.sense, c.rhs);
        }
        const auto want = vertex_minimum(cost, lo, hi, rows);
        const auto got = lp::solve(p);
        if (!want) {
            CHECK(got.status == lp::Status::infeasible);
            continue;
        }
        REQUIRE(got.status == lp::Status::optimal);
        CHECK(got.objective == doctest::Approx(*want).epsilon(1e-7).scale(1.0));
        double obj = 0.0;
        for (size_t j = 0; j < n; ++j) {
            CHECK(got.x[j] >= lo[j] - 1e-7);
            CHECK(got.x[j] <= hi[j] + 1e-7);
            obj += cost[j] * got.x[j];
        }
        CHECK(obj == doctest::Approx(got.objective));
    }
}
