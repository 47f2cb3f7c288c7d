#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "td2ip/rng.hpp"
#include "td2ip/tensor.hpp"

using namespace td2ip;

namespace {

// Independent oracle: naive triple-loop product.
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 int m, int k, int n) {
    std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < k; ++l)
                c[i * n + j] += a[i * k + l] * b[l * n + j];
    return c;
}

// Independent oracle: central finite differences of a scalar program over a
// flat parameter vector.
double fd_derivative(const std::function<double(const std::vector<double>&)>& f,
                     std::vector<double> x, std::size_t i, double eps) {
    x[i] += eps;
    const double fp = f(x);
    x[i] -= 2.0 * eps;
    const double fm = f(x);
    return (fp - fm) / (2.0 * eps);
}

std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Checks analytic gradients of `build` against finite differences for one
// taped input of the given shape.
void check_grad_matches_fd(const Shape& shape,
                           const std::function<Tensor(Tape&, const Tensor&)>& build,
                           std::uint64_t seed, double tol = 1e-4) {
    Rng rng(seed);
    const std::vector<double> x0 = random_values(rng, numel(shape));
    Tape tape;
    Tensor x = tape.leaf(shape, x0);
    Tensor loss = build(tape, x);
    REQUIRE(loss.is_scalar());
    tape.backward(loss);
    const std::vector<double> analytic = tape.grad(x);

    auto eval = [&](const std::vector<double>& vals) {
        Tape t;
        return build(t, t.leaf(shape, vals)).scalar();
    };
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const double numeric = fd_derivative(eval, x0, i, 1e-5);
        const double rel = std::abs(analytic[i] - numeric) /
                           std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric));
        CAPTURE(i);
        CHECK(rel < tol);
    }
}

}  // namespace

TEST_CASE("matmul identity and frozen oracle values") {
    Tape tape;
    Tensor a = make_constant({2, 2}, {1, 2, 3, 4});
    Tensor eye = make_constant({2, 2}, {1, 0, 0, 1});
    CHECK(tape.matmul(a, eye).values == std::vector<double>{1, 2, 3, 4});

    // [[1,2],[3,4]] * [[5],[6]] -> [[17],[39]], frozen from the naive oracle.
    Tensor b = make_constant({2, 1}, {5, 6});
    const auto got = tape.matmul(a, b).values;
    CHECK(got == std::vector<double>{17, 39});
    CHECK(got == naive_matmul(a.values, b.values, 2, 2, 1));

    Tensor z = make_constant({2, 3}, std::vector<double>(6, 0.0));
    Rng rng(3);
    Tensor any = make_constant({3, 4}, random_values(rng, 12));
    const auto zeros = tape.matmul(z, any).values;
    CHECK(zeros == std::vector<double>(8, 0.0));
}

TEST_CASE("matmul agrees with the naive oracle on random shapes") {
    Rng rng(17);
    for (int round = 0; round < 20; ++round) {
        const int m = 1 + static_cast<int>(rng.uniform_index(4));
        const int k = 1 + static_cast<int>(rng.uniform_index(4));
        const int n = 1 + static_cast<int>(rng.uniform_index(4));
        const auto a = random_values(rng, static_cast<std::size_t>(m) * k);
        const auto b = random_values(rng, static_cast<std::size_t>(k) * n);
        Tape tape;
        const auto got = tape.matmul(make_constant({m, k}, a), make_constant({k, n}, b)).values;
        const auto want = naive_matmul(a, b, m, k, n);
        for (std::size_t i = 0; i < want.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("matmul dimension error names both shapes") {
    Tape tape;
    Tensor a = make_constant({2, 3}, std::vector<double>(6, 1.0));
    Tensor b = make_constant({4, 5}, std::vector<double>(20, 1.0));
    CHECK_THROWS_WITH_AS(tape.matmul(a, b),
                         doctest::Contains("[2,3]"), DimensionError);
    try {
        tape.matmul(a, b);
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("[4,5]") != std::string::npos);
    }
}

TEST_CASE("elementwise examples") {
    Tape tape;
    Tensor x = make_constant({3}, {-1, 0, 2});
    CHECK(tape.relu(x).values == std::vector<double>{0, 0, 2});
    Tensor a = make_constant({2}, {1, 2});
    Tensor b = make_constant({2}, {3, 4});
    CHECK(tape.add(a, b).values == std::vector<double>{4, 6});
    CHECK(tape.tanh(make_scalar(0.0)).values[0] == 0.0);

    // bias broadcast along the trailing axis
    Tensor m = make_constant({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor bias = make_constant({3}, {10, 20, 30});
    CHECK(tape.add(m, bias).values == std::vector<double>{11, 22, 33, 14, 25, 36});

    Tensor bad = make_constant({4}, {1, 2, 3, 4});
    CHECK_THROWS_AS(tape.add(m, bad), DimensionError);
}

TEST_CASE("exp-based ops stay finite at extreme inputs") {
    Tape tape;
    for (double v : {-1000.0, -50.0, 0.0, 50.0, 1000.0}) {
        CHECK(std::isfinite(tape.sigmoid(make_scalar(v)).values[0]));
        CHECK(std::isfinite(tape.tanh(make_scalar(v)).values[0]));
    }
    CHECK(tape.sigmoid(make_scalar(1000.0)).values[0] == doctest::Approx(1.0));
    CHECK(tape.sigmoid(make_scalar(-1000.0)).values[0] == doctest::Approx(0.0));
}

TEST_CASE("concat preserves order and handles an empty operand") {
    Tape tape;
    Tensor hist = make_constant({3, 1, 1}, {0, 1, 2});
    Tensor fut = make_constant({2, 1, 1}, {3, 4});
    Tensor merged = tape.concat(hist, fut, 0);
    CHECK(merged.shape == Shape{5, 1, 1});
    CHECK(merged.values == std::vector<double>{0, 1, 2, 3, 4});

    Tensor empty = make_constant({0, 1, 1}, {});
    CHECK(tape.concat(hist, empty, 0).values == hist.values);

    Tensor off = make_constant({2, 2, 1}, {0, 0, 0, 0});
    CHECK_THROWS_AS(tape.concat(hist, off, 0), DimensionError);
}

TEST_CASE("concat then slicing back reproduces the inputs bitwise") {
    Rng rng(5);
    const auto av = random_values(rng, 2 * 3 * 2);
    const auto bv = random_values(rng, 2 * 4 * 2);
    Tape tape;
    Tensor a = make_constant({2, 3, 2}, av);
    Tensor b = make_constant({2, 4, 2}, bv);
    Tensor merged = tape.concat(a, b, 1);
    CHECK(tape.slice(merged, 1, 0, 3).values == av);
    CHECK(tape.slice(merged, 1, 3, 4).values == bv);
}

TEST_CASE("concat gradient splits into the operand slices") {
    // d(f(concat(a,b))) restricted to a equals the gradient of f with b held
    // fixed; checked against finite differences.
    Rng rng(7);
    const auto bv = random_values(rng, 2 * 1 * 3);
    check_grad_matches_fd({2, 1, 3}, [&](Tape& t, const Tensor& a) {
        Tensor merged = t.concat(a, t.scale(make_constant({2, 1, 3}, bv), 1.0), 0);
        return t.mean_sq_norm(merged, make_constant({4, 1, 3}, std::vector<double>(12, 0.25)));
    }, 71);
}

TEST_CASE("flip examples and involution") {
    Tape tape;
    Tensor x = make_constant({3, 1}, {1, 2, 3});
    CHECK(tape.flip(x, 0).values == std::vector<double>{3, 2, 1});

    Rng rng(9);
    const auto v = random_values(rng, 4 * 2 * 3);
    Tensor y = make_constant({4, 2, 3}, v);
    CHECK(tape.flip(tape.flip(y, 0), 0).values == v);

    Tensor single = make_constant({1, 2}, {5, 6});
    CHECK(tape.flip(single, 0).values == single.values);

    CHECK_THROWS_AS(tape.flip(x, 2), DimensionError);
}

TEST_CASE("mean_sq_norm hand-evaluated values") {
    Tape tape;
    Tensor p1 = make_constant({1, 1, 3}, {1, 0, 0});
    Tensor g1 = make_constant({1, 1, 3}, {0, 0, 0});
    CHECK(tape.mean_sq_norm(p1, g1).scalar() == 1.0);

    // two joints each displaced by (0,3,4): (25 + 25) / 2 = 25
    Tensor p2 = make_constant({1, 2, 3}, {0, 3, 4, 0, 3, 4});
    Tensor g2 = make_constant({1, 2, 3}, std::vector<double>(6, 0.0));
    CHECK(tape.mean_sq_norm(p2, g2).scalar() == 25.0);

    CHECK(tape.mean_sq_norm(p2, p2).scalar() == 0.0);
    CHECK(tape.mean_sq_norm(g2, p2).scalar() == tape.mean_sq_norm(p2, g2).scalar());

    Tensor other = make_constant({2, 1, 3}, std::vector<double>(6, 0.0));
    CHECK_THROWS_AS(tape.mean_sq_norm(p2, other), DimensionError);
}

TEST_CASE("backward basics") {
    Tape tape;
    Tensor x = tape.leaf({2, 2}, {1, 2, 3, 4});
    Tensor loss = tape.sum(x);
    tape.backward(loss);
    CHECK(tape.grad(x) == std::vector<double>(4, 1.0));

    Tape tape2;
    Tensor y = tape2.leaf({1}, {3});
    Tensor sq = tape2.sum(tape2.mul(y, y));
    tape2.backward(sq);
    CHECK(tape2.grad(y) == std::vector<double>{6.0});

    Tape tape3;
    Tensor v = tape3.leaf({2}, {1, 2});
    CHECK_THROWS_AS(tape3.backward(v), ContractError);
}

TEST_CASE("analytic gradients match finite differences for every op") {
    // Randomized small shapes; loss is a sum-based scalar around each op.
    for (std::uint64_t seed = 100; seed < 104; ++seed) {
        const Shape frames{4, 2, 3};
        Rng rng(seed);
        const auto target = random_values(rng, numel(frames));
        const auto other = random_values(rng, numel(frames));

        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            return t.mean_sq_norm(x, make_constant(frames, target));
        }, seed * 31 + 1);
        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            return t.mean_norm(x, make_constant(frames, target));
        }, seed * 31 + 2);
        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            return t.sum(t.mul(x, make_constant(frames, other)));
        }, seed * 31 + 3);
        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            return t.sum(t.sub(t.scale(x, 1.7), make_constant(frames, other)));
        }, seed * 31 + 4);
        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            return t.sum(t.tanh(x));
        }, seed * 31 + 5);
        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            return t.sum(t.sigmoid(x));
        }, seed * 31 + 6);
        // relu probed away from its kink
        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            return t.sum(t.relu(t.add(x, make_constant(frames, other))));
        }, seed * 31 + 7);
        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            return t.sum(t.mul(t.flip(x, 0), t.flip(make_constant(frames, other), 1)));
        }, seed * 31 + 8);
        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            Tensor s = t.slice(x, 0, 1, 2);
            return t.sum(t.mul(s, s));
        }, seed * 31 + 9);
        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            Tensor r = t.reshape(t.swap01(x), {6, 4});
            return t.sum(t.mul(r, r));
        }, seed * 31 + 10);
        check_grad_matches_fd({3, 4}, [&](Tape& t, const Tensor& x) {
            Tensor w = make_constant({4, 2}, std::vector<double>(other.begin(), other.begin() + 8));
            Tensor y = t.matmul(x, w);
            return t.sum(t.mul(y, y));
        }, seed * 31 + 11);
        // bias broadcast gradient (the suffix operand)
        check_grad_matches_fd({3}, [&](Tape& t, const Tensor& bias) {
            Tensor m = make_constant({4, 3}, std::vector<double>(other.begin(), other.begin() + 12));
            Tensor y = t.add(m, bias);
            return t.sum(t.mul(y, y));
        }, seed * 31 + 12);
        check_grad_matches_fd(frames, [&](Tape& t, const Tensor& x) {
            Tensor merged = t.concat(x, make_constant(frames, other), 0);
            return t.mean_sq_norm(merged, make_constant({8, 2, 3},
                                                        random_values(rng, 8 * 2 * 3)));
        }, seed * 31 + 13);
    }
}

TEST_CASE("tape evaluation is deterministic") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tape tape;
        Tensor x = tape.leaf({3, 2, 3}, random_values(rng, 18));
        Tensor w = tape.leaf({6, 6}, random_values(rng, 36));
        Tensor y = tape.matmul(tape.reshape(x, {3, 6}), w);
        Tensor loss = tape.mean_sq_norm(tape.reshape(y, {3, 2, 3}),
                                        make_constant({3, 2, 3}, random_values(rng, 18)));
        tape.backward(loss);
        auto g = tape.grad(w);
        g.push_back(loss.scalar());
        return g;
    };
    CHECK(run(42) == run(42));
}

TEST_CASE("grad_check oracle examples") {
    // linear layer y = W x, scalar loss
    Rng rng(11);
    GradCheckProgram prog;
    prog.shapes = {{3, 2}, {2, 1}};
    prog.values = {random_values(rng, 6), random_values(rng, 2)};
    prog.build = [](Tape& t, const std::vector<Tensor>& p) {
        Tensor y = t.matmul(p[0], p[1]);
        return t.sum(t.mul(y, y));
    };
    CHECK(grad_check(prog, 1e-5) < 1e-6);

    GradCheckProgram constant;
    constant.shapes = {{2}};
    constant.values = {{1.0, 2.0}};
    constant.build = [](Tape& t, const std::vector<Tensor>& p) {
        return t.sum(t.sub(p[0], p[0]));
    };
    CHECK(grad_check(constant, 1e-5) == 0.0);

    CHECK_THROWS_AS(grad_check(prog, 0.0), ContractError);
}
