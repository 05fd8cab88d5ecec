#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "feast/errors.hpp"
#include "feast/feast_conv.hpp"
#include "feast/graph.hpp"
#include "feast/rng.hpp"
#include "oracles.hpp"

using namespace feast;

namespace {

Graph complete_graph(int n) {
    Graph g = Graph::with_nodes(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) g.add_edge(i, j);
    return g;
}

FeastConvParams zero_params(int M, int D, int E, bool ti) {
    FeastConvParams p;
    p.W.assign(M, Matrix(E, D));
    p.u = Matrix(M, D);
    p.v = ti ? Matrix(0, 0) : Matrix(M, D);
    p.c.assign(M, 0.0);
    p.b.assign(E, 0.0);
    p.translation_invariant = ti;
    return p;
}

} // namespace

TEST_CASE("zero assignment parameters spread mass uniformly") {
    Graph g = complete_graph(3);
    FeastConvParams p = zero_params(2, 2, 2, false);
    Rng rng_3(3);
    Matrix X = oracles::random_matrix(rng_3, 3, 2);
    Assignments a = compute_assignments(p, X, g);
    for (std::size_t pair = 0; pair < a.num_pairs(); ++pair) {
        CHECK(a.pair(pair)[0] == doctest::Approx(0.5));
        CHECK(a.pair(pair)[1] == doctest::Approx(0.5));
    }
}

TEST_CASE("opposing one-dimensional steering vectors give the logistic weight") {
    Graph g = complete_graph(2);
    FeastConvParams p = zero_params(2, 1, 1, false);
    p.u(0, 0) = 1.0;
    p.u(1, 0) = -1.0;
    Matrix X(2, 1);
    X(0, 0) = 0.5;
    X(1, 0) = -7.25;
    Assignments a = compute_assignments(p, X, g);
    const double expected = 1.0 / (1.0 + std::exp(-1.0));
    // Pairs starting at node 0 see x_i = 0.5 regardless of the neighbor.
    CHECK(a.at(0, 0)[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(a.at(0, 1)[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.731059).epsilon(1e-6));
}

TEST_CASE("translation-invariant assignments ignore constant feature shifts") {
    Rng rng(7);
    Graph g = oracles::random_connected_graph(rng, 12, 6);
    FeastConvParams p = init_feast_params(3, 4, 2, 19, true);
    Matrix X = oracles::random_matrix(rng, 12, 4);
    Matrix shifted = X;
    for (int i = 0; i < shifted.rows(); ++i) {
        auto r = shifted.row(i);
        r[0] += 3.25;
        r[1] -= 11.0;
        r[2] += 0.125;
        r[3] += 1e3;
    }
    Assignments a = compute_assignments(p, X, g);
    Assignments b = compute_assignments(p, shifted, g);
    REQUIRE(a.q.size() == b.q.size());
    // The shift cancels analytically; only rounding of x + t survives.
    for (std::size_t k = 0; k < a.q.size(); ++k)
        CHECK(a.q[k] == doctest::Approx(b.q[k]).epsilon(1e-9));

    FeastConvParams full = init_feast_params(3, 4, 2, 19, false);
    Assignments c = compute_assignments(full, X, g);
    Assignments d = compute_assignments(full, shifted, g);
    double moved = 0.0;
    for (std::size_t k = 0; k < c.q.size(); ++k)
        moved = std::max(moved, std::abs(c.q[k] - d.q[k]));
    CHECK(moved > 1e-3);
}

TEST_CASE("assignments normalize to one for every pair") {
    Rng rng(23);
    for (bool ti : {false, true}) {
        Graph g = oracles::random_connected_graph(rng, 20, 15);
        FeastConvParams p = init_feast_params(4, 3, 2, rng.next_u64(), ti);
        Matrix X = oracles::random_matrix(rng, 20, 3, 2.0);
        Assignments a = compute_assignments(p, X, g);
        for (std::size_t pair = 0; pair < a.num_pairs(); ++pair) {
            double sum = 0.0;
            for (int m = 0; m < a.M; ++m) {
                CHECK(a.pair(pair)[m] >= 0.0);
                sum += a.pair(pair)[m];
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("per-node aggregation mass is one regardless of degree") {
    Rng rng(29);
    Graph g = Graph::with_nodes(12);
    for (int i = 1; i < 10; ++i) g.add_edge(0, i); // hub
    g.add_edge(10, 11);                            // pendant pair; node 11 degree 1
    FeastConvParams p = init_feast_params(3, 2, 2, 5, false);
    Matrix X = oracles::random_matrix(rng, 12, 2);
    Assignments a = compute_assignments(p, X, g);
    for (int i = 0; i < g.n; ++i) {
        const double inv = 1.0 / g.degree_count(i);
        double mass = 0.0;
        for (int k = 0; k < g.degree_count(i); ++k)
            for (int m = 0; m < a.M; ++m) mass += inv * a.at(i, k)[m];
        CHECK(std::abs(mass - 1.0) <= 1e-12);
    }
}

TEST_CASE("assignments stay finite for logits of magnitude ten thousand") {
    Graph g = complete_graph(2);
    FeastConvParams p = zero_params(2, 1, 1, false);
    p.u(0, 0) = 1e4;
    p.u(1, 0) = -1e4;
    Matrix X(2, 1);
    X(0, 0) = 1.0;
    X(1, 0) = -1.0;
    Assignments a = compute_assignments(p, X, g);
    for (double q : a.q) {
        CHECK(std::isfinite(q));
        CHECK(q >= 0.0);
        CHECK(q <= 1.0);
    }
}

TEST_CASE("an isolated node with an identity weight matrix maps to itself") {
    Graph g = Graph::with_nodes(1);
    FeastConvParams p = zero_params(1, 3, 3, false);
    for (int d = 0; d < 3; ++d) p.W[0](d, d) = 1.0;
    Matrix X(1, 3);
    X(0, 0) = 0.25;
    X(0, 1) = -2.0;
    X(0, 2) = 7.5;
    Matrix Y = feast_forward(p, X, g);
    CHECK(Y(0, 0) == doctest::Approx(0.25));
    CHECK(Y(0, 1) == doctest::Approx(-2.0));
    CHECK(Y(0, 2) == doctest::Approx(7.5));
}

TEST_CASE("two-node average under uniform assignments") {
    Graph g = complete_graph(2);
    FeastConvParams p = zero_params(2, 1, 1, false);
    p.W[0](0, 0) = 2.0;
    p.W[1](0, 0) = -1.0;
    Matrix X(2, 1);
    X(0, 0) = 1.0;
    X(1, 0) = 2.0;
    Matrix Y = feast_forward(p, X, g);
    CHECK(Y(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(Y(1, 0) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("zero weight matrices leave only the bias") {
    Rng rng(31);
    Graph g = oracles::random_connected_graph(rng, 6, 3);
    FeastConvParams p = zero_params(2, 2, 1, false);
    p.b[0] = 5.0;
    Matrix X = oracles::random_matrix(rng, 6, 2);
    Matrix Y = feast_forward(p, X, g);
    for (int i = 0; i < 6; ++i) CHECK(Y(i, 0) == doctest::Approx(5.0));
}

TEST_CASE("node relabeling permutes convolution outputs identically") {
    Rng rng(37);
    const int n = 10;
    Graph g = oracles::random_connected_graph(rng, n, 8);
    Matrix X = oracles::random_matrix(rng, n, 3);
    FeastConvParams p = init_feast_params(3, 3, 4, 77, false);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);

    Graph pg = Graph::with_nodes(n);
    for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < g.neighbors[i].size(); ++k) {
            const int j = g.neighbors[i][k];
            if (j > i) pg.add_edge(perm[i], perm[j], g.weights[i][k]);
        }
    Matrix pX(n, 3);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < 3; ++d) pX(perm[i], d) = X(i, d);

    Matrix Y = feast_forward(p, X, g);
    Matrix pY = feast_forward(p, pX, pg);
    for (int i = 0; i < n; ++i)
        for (int e = 0; e < 4; ++e)
            CHECK(std::abs(pY(perm[i], e) - Y(i, e)) <= 1e-12);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
    Rng rng(41);
    Graph g = oracles::random_connected_graph(rng, 8, 4);
    FeastConvParams p = init_feast_params(2, 3, 2, 13, false);
    Matrix X = oracles::random_matrix(rng, 8, 3);
    FeastConvGrads grads = feast_backward(p, X, g, Matrix(8, 2));
    for (double v : grads.dX.data()) CHECK(v == 0.0);
    for (const Matrix& dw : grads.dW)
        for (double v : dw.data()) CHECK(v == 0.0);
    for (double v : grads.du.data()) CHECK(v == 0.0);
    for (double v : grads.dc) CHECK(v == 0.0);
    for (double v : grads.db) CHECK(v == 0.0);
}

TEST_CASE("bias gradient sums the upstream rows") {
    Rng rng(43);
    Graph g = oracles::random_connected_graph(rng, 7, 5);
    FeastConvParams p = init_feast_params(2, 2, 3, 17, true);
    Matrix X = oracles::random_matrix(rng, 7, 2);
    Matrix dY = oracles::random_matrix(rng, 7, 3);
    FeastConvGrads grads = feast_backward(p, X, g, dY);
    for (int e = 0; e < 3; ++e) {
        double expected = 0.0;
        for (int i = 0; i < 7; ++i) expected += dY(i, e);
        CHECK(grads.db[e] == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("analytic convolution gradients match finite differences") {
    Rng rng(47);
    for (bool ti : {false, true}) {
        Graph g = oracles::random_connected_graph(rng, 9, 6);
        FeastConvParams p = init_feast_params(3, 3, 2, rng.next_u64(), ti);
        Matrix X = oracles::random_matrix(rng, 9, 3);
        Matrix dY = oracles::random_matrix(rng, 9, 2);

        auto loss = [&] {
            Matrix Y = feast_forward(p, X, g);
            double s = 0.0;
            for (std::size_t k = 0; k < Y.data().size(); ++k) s += Y.data()[k] * dY.data()[k];
            return s;
        };
        FeastConvGrads grads = feast_backward(p, X, g, dY);

        std::vector<oracles::GradBlock> blocks;
        blocks.push_back({X.data().data(), grads.dX.data().data(), X.data().size()});
        for (std::size_t m = 0; m < p.W.size(); ++m)
            blocks.push_back(
                {p.W[m].data().data(), grads.dW[m].data().data(), p.W[m].data().size()});
        blocks.push_back({p.u.data().data(), grads.du.data().data(), p.u.data().size()});
        if (!ti)
            blocks.push_back({p.v.data().data(), grads.dv.data().data(), p.v.data().size()});
        blocks.push_back({p.c.data(), grads.dc.data(), p.c.size()});
        blocks.push_back({p.b.data(), grads.db.data(), p.b.size()});

        CHECK(oracles::worst_fd_error(blocks, loss) <= 1e-5);
    }
}

TEST_CASE("zero reference points make Mahalanobis assignments uniform") {
    Matrix Sigma(2, 2);
    Sigma(0, 0) = 2.0;
    Sigma(1, 1) = 3.0;
    MahalanobisParams mp(Matrix(3, 2), Sigma);
    AssignmentCoeffs coeffs = from_mahalanobis(mp);
    for (double x : coeffs.u.data()) CHECK(x == 0.0);
    for (double x : coeffs.v.data()) CHECK(x == 0.0);
    for (double x : coeffs.c) CHECK(x == 0.0);
}

TEST_CASE("one-dimensional Mahalanobis coefficients oppose each other") {
    Matrix Z(1, 1);
    Z(0, 0) = 2.0;
    Matrix Sigma(1, 1);
    Sigma(0, 0) = 1.0;
    AssignmentCoeffs coeffs = from_mahalanobis(MahalanobisParams(Z, Sigma));
    CHECK(coeffs.u(0, 0) == doctest::Approx(-4.0));
    CHECK(coeffs.v(0, 0) == doctest::Approx(4.0));
    CHECK(coeffs.v(0, 0) == doctest::Approx(-coeffs.u(0, 0)));
}

TEST_CASE("Mahalanobis construction validates its matrix") {
    Matrix Z(2, 2);
    SUBCASE("asymmetric") {
        Matrix S(2, 2);
        S(0, 0) = 1.0;
        S(1, 1) = 1.0;
        S(0, 1) = 0.5;
        S(1, 0) = -0.5;
        CHECK_THROWS_AS(MahalanobisParams(Z, S), ValueError);
    }
    SUBCASE("not positive definite") {
        Matrix S(2, 2);
        S(0, 0) = 1.0;
        S(1, 1) = -1.0;
        CHECK_THROWS_AS(MahalanobisParams(Z, S), ValueError);
    }
}

TEST_CASE("mapped parameters reproduce the distance softmax") {
    Rng rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        const int D = 1 + static_cast<int>(rng.uniform_below(4));
        const int M = 1 + static_cast<int>(rng.uniform_below(4));
        Matrix A = oracles::random_matrix(rng, D, D);
        Matrix Sigma(D, D);
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b) {
                double s = a == b ? 0.1 : 0.0;
                for (int k = 0; k < D; ++k) s += A(a, k) * A(b, k);
                Sigma(a, b) = s;
            }
        Matrix Z = oracles::random_matrix(rng, M, D, 2.0);
        MahalanobisParams mp(Z, Sigma);

        Graph g = complete_graph(3);
        Matrix X = oracles::random_matrix(rng, 3, D, 2.0);

        std::vector<Matrix> W(M, Matrix(1, D));
        FeastConvParams ti = make_mahalanobis_params(mp, W, {0.0});
        CHECK(ti.translation_invariant);
        Assignments ati = compute_assignments(ti, X, g);

        AssignmentCoeffs coeffs = from_mahalanobis(mp);
        FeastConvParams full = zero_params(M, D, 1, false);
        full.u = coeffs.u;
        full.v = coeffs.v;
        full.c = coeffs.c;
        Assignments afull = compute_assignments(full, X, g);

        for (int i = 0; i < g.n; ++i)
            for (int k = 0; k < g.degree_count(i); ++k) {
                auto q = oracles::softmax_neg_distances(Sigma, Z, X.row(i),
                                                        X.row(g.neighbors[i][k]));
                for (int m = 0; m < M; ++m) {
                    CHECK(std::abs(ati.at(i, k)[m] - q[m]) <= 1e-12);
                    CHECK(std::abs(afull.at(i, k)[m] - q[m]) <= 1e-12);
                }
            }
    }
}

TEST_CASE("one-by-one identity filter reproduces the image") {
    Rng rng_59(59);
    Matrix image = oracles::random_matrix(rng_59, 12, 2);
    std::vector<Matrix> filters(1, Matrix(2, 2));
    filters[0](0, 0) = 1.0;
    filters[0](1, 1) = 1.0;
    Matrix out = grid_reference_conv(filters, 1, 1, {0.0, 0.0}, image, 3, 4);
    CHECK(max_abs_diff(out, image) == 0.0);
}

TEST_CASE("averaging filter keeps a constant image constant in the interior") {
    const int H = 5, W = 5;
    Matrix image(H * W, 1);
    image.fill(3.5);
    std::vector<Matrix> filters(9, Matrix(1, 1));
    for (auto& f : filters) f(0, 0) = 1.0 / 9.0;
    Matrix out = grid_reference_conv(filters, 3, 3, {0.0}, image, H, W);
    for (int r = 1; r < H - 1; ++r)
        for (int c = 1; c < W - 1; ++c)
            CHECK(out(r * W + c, 0) == doctest::Approx(3.5).epsilon(1e-14));
    // Border pixels lose window mass to the zero padding.
    CHECK(out(0, 0) == doctest::Approx(3.5 * 4.0 / 9.0));
}

TEST_CASE("grid convolution matches the nested-loop oracle") {
    Rng rng(61);
    Matrix image = oracles::random_matrix(rng, 25, 1);
    std::vector<Matrix> filters;
    for (int m = 0; m < 9; ++m) filters.push_back(oracles::random_matrix(rng, 1, 1));
    std::vector<double> bias = {0.25};
    Matrix lib = grid_reference_conv(filters, 3, 3, bias, image, 5, 5);
    Matrix ref = oracles::grid_conv_loops(filters, 3, 3, bias, image, 5, 5);
    CHECK(max_abs_diff(lib, ref) == 0.0);
}

TEST_CASE("grid convolution rejects a filter count that misses the window") {
    std::vector<Matrix> filters(8, Matrix(1, 1));
    CHECK_THROWS_AS(grid_reference_conv(filters, 3, 3, {0.0}, Matrix(25, 1), 5, 5),
                    ShapeError);
}

TEST_CASE("grid graph links full windows inside and truncated windows at corners") {
    Graph g = grid_graph(3, 3, 3, 3);
    CHECK(g.degree_count(4) == 9);
    CHECK(g.degree_count(0) == 4);
    CHECK(g.neighbors[0] == std::vector<int>{0, 1, 3, 4});
    validate_graph(g);
}

TEST_CASE("parameter initialization is deterministic with zero offsets") {
    FeastConvParams a = init_feast_params(3, 4, 5, 101, false);
    FeastConvParams b = init_feast_params(3, 4, 5, 101, false);
    CHECK(a.u == b.u);
    CHECK(a.v == b.v);
    for (int m = 0; m < 3; ++m) CHECK(a.W[m] == b.W[m]);
    for (double x : a.c) CHECK(x == 0.0);
    for (double x : a.b) CHECK(x == 0.0);
    FeastConvParams ti = init_feast_params(3, 4, 5, 101, true);
    CHECK(ti.v.rows() == 0);
    CHECK(ti.u.rows() == 3);
}

TEST_CASE("weight variance tracks two over fan-in times matrix count") {
    const int M = 4, D = 50, E = 500;
    FeastConvParams p = init_feast_params(M, D, E, 4242, true);
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const Matrix& w : p.W)
        for (double x : w.data()) {
            sum += x;
            sq += x * x;
            ++n;
        }
    REQUIRE(n == 100000);
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    const double target = 2.0 / (D * M);
    CHECK(var > 0.95 * target);
    CHECK(var < 1.05 * target);
}

TEST_CASE("steering vector variance tracks one over the feature dimension") {
    const int M = 1000, D = 100;
    FeastConvParams p = init_feast_params(M, D, 1, 555, false);
    for (const Matrix* mat : {&p.u, &p.v}) {
        double sum = 0.0, sq = 0.0;
        for (double x : mat->data()) {
            sum += x;
            sq += x * x;
        }
        const double n = static_cast<double>(mat->data().size());
        const double var = sq / n - (sum / n) * (sum / n);
        CHECK(var > 0.95 / D);
        CHECK(var < 1.05 / D);
    }
}

TEST_CASE("parameter count formula") {
    CHECK(feast_parameter_count(9, 16, 32, false) == 4937);
    CHECK(feast_parameter_count(1, 1, 1, false) == 5);
    CHECK(feast_parameter_count(9, 16, 32, true) == 4937 - 9 * 16);
    Rng rng(67);
    for (int t = 0; t < 10; ++t) {
        const long long M = 1 + static_cast<long long>(rng.uniform_below(12));
        const long long D = 1 + static_cast<long long>(rng.uniform_below(64));
        const long long E = 1 + static_cast<long long>(rng.uniform_below(64));
        const long long no_bias =
            feast_parameter_count(static_cast<int>(M), static_cast<int>(D),
                                  static_cast<int>(E), false) -
            M - E;
        // The assignment overhead relative to the weight matrices is (E+2)/E.
        CHECK(no_bias * E == (E + 2) * (M * D * E));
    }
}

TEST_CASE("convolution parameters validate their shapes") {
    FeastConvParams p = zero_params(2, 3, 2, false);
    p.validate();
    p.u = Matrix(1, 3);
    CHECK_THROWS_AS(p.validate(), ShapeError);
}
