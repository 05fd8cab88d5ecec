#include "feast/feast_conv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "feast/errors.hpp"
#include "feast/parallel.hpp"
#include "feast/rng.hpp"

namespace feast {

void FeastConvParams::validate() const {
    const int M = num_matrices();
    if (M == 0) throw ShapeError("conv params: no weight matrices");
    const int E = W[0].rows(), D = W[0].cols();
    for (const auto& Wm : W)
        if (Wm.rows() != E || Wm.cols() != D)
            throw ShapeError("conv params: inconsistent W shapes");
    require_shape(u, M, D, "conv params u");
    if (translation_invariant) {
        if (v.rows() != 0) throw ShapeError("conv params: v must be empty in translation-invariant mode");
    } else {
        require_shape(v, M, D, "conv params v");
    }
    if (static_cast<int>(c.size()) != M) throw ShapeError("conv params: c size");
    if (static_cast<int>(b.size()) != E) throw ShapeError("conv params: b size");
    for (const auto& Wm : W)
        if (!Wm.all_finite()) throw ValueError("conv params: non-finite W");
    if (!u.all_finite() || !v.all_finite()) throw ValueError("conv params: non-finite u/v");
    for (double x : c)
        if (!std::isfinite(x)) throw ValueError("conv params: non-finite c");
    for (double x : b)
        if (!std::isfinite(x)) throw ValueError("conv params: non-finite b");
}

namespace {

void check_conv_inputs(const FeastConvParams& p, const Matrix& X, const Graph& g) {
    require_cols(X, p.in_dim(), "conv input");
    if (X.rows() != g.n)
        throw ShapeError("conv input: " + std::to_string(X.rows()) + " feature rows vs " +
                         std::to_string(g.n) + " graph nodes");
}

// Softmax over logits, in place, with max subtraction.
inline void softmax_inplace(double* l, int M) {
    double mx = l[0];
    for (int m = 1; m < M; ++m) mx = std::max(mx, l[m]);
    double sum = 0.0;
    for (int m = 0; m < M; ++m) {
        l[m] = std::exp(l[m] - mx);
        sum += l[m];
    }
    const double inv = 1.0 / sum;
    for (int m = 0; m < M; ++m) l[m] *= inv;
}

// Fills q (pair-major, M per pair) for every (i, j in N_i).
// Translation-invariant logits are computed from the feature difference
// itself, so a common shift of all rows cancels exactly.
void fill_assignments(const FeastConvParams& p, const Matrix& X, const Graph& g,
                      std::vector<std::size_t>& pair_offset, std::vector<double>& q) {
    const int M = p.num_matrices();
    const int D = p.in_dim();
    const int n = g.n;

    pair_offset.assign(n + 1, 0);
    for (int i = 0; i < n; ++i)
        pair_offset[i + 1] = pair_offset[i] + g.neighbors[i].size();
    q.assign(pair_offset[n] * M, 0.0);

    if (p.translation_invariant) {
        parallel_for(n, [&](int begin, int end) {
            std::vector<double> diff(D);
            for (int i = begin; i < end; ++i) {
                const auto xi = X.row(i);
                std::size_t pair = pair_offset[i];
                for (int j : g.neighbors[i]) {
                    const auto xj = X.row(j);
                    for (int d = 0; d < D; ++d) diff[d] = xj[d] - xi[d];
                    double* logits = q.data() + pair * M;
                    for (int m = 0; m < M; ++m)
                        logits[m] = dot(p.u.row(m), diff) + p.c[m];
                    softmax_inplace(logits, M);
                    ++pair;
                }
            }
        });
    } else {
        // a(i, m) = u_m . x_i and b(j, m) = v_m . x_j, computed once per node.
        Matrix A(n, M), B(n, M);
        parallel_for(n, [&](int begin, int end) {
            for (int i = begin; i < end; ++i) {
                const auto xi = X.row(i);
                for (int m = 0; m < M; ++m) {
                    A(i, m) = dot(p.u.row(m), xi);
                    B(i, m) = dot(p.v.row(m), xi);
                }
            }
        });
        parallel_for(n, [&](int begin, int end) {
            for (int i = begin; i < end; ++i) {
                std::size_t pair = pair_offset[i];
                for (int j : g.neighbors[i]) {
                    double* logits = q.data() + pair * M;
                    for (int m = 0; m < M; ++m)
                        logits[m] = A(i, m) + B(j, m) + p.c[m];
                    softmax_inplace(logits, M);
                    ++pair;
                }
            }
        });
    }
}

// P[m] = X W_m^T, one N x E block per weight matrix.
std::vector<Matrix> projected_features(const FeastConvParams& p, const Matrix& X) {
    const int M = p.num_matrices();
    const int D = p.in_dim();
    const int E = p.out_dim();
    const int n = X.rows();
    std::vector<Matrix> P(M);
    for (int m = 0; m < M; ++m) P[m] = Matrix(n, E);
    parallel_for(n, [&](int begin, int end) {
        for (int m = 0; m < M; ++m) {
            const Matrix& Wm = p.W[m];
            for (int j = begin; j < end; ++j) {
                const auto xj = X.row(j);
                auto pj = P[m].row(j);
                for (int e = 0; e < E; ++e) {
                    double s = 0.0;
                    for (int d = 0; d < D; ++d) s += Wm(e, d) * xj[d];
                    pj[e] = s;
                }
            }
        }
    });
    return P;
}

} // namespace

Assignments compute_assignments(const FeastConvParams& p, const Matrix& X, const Graph& g) {
    check_conv_inputs(p, X, g);
    Assignments a;
    a.M = p.num_matrices();
    fill_assignments(p, X, g, a.pair_offset, a.q);
    return a;
}

Matrix feast_forward(const FeastConvParams& p, const Matrix& X, const Graph& g) {
    check_conv_inputs(p, X, g);
    const int M = p.num_matrices();
    const int E = p.out_dim();
    const int n = g.n;

    std::vector<std::size_t> pair_offset;
    std::vector<double> q;
    fill_assignments(p, X, g, pair_offset, q);
    const std::vector<Matrix> P = projected_features(p, X);

    Matrix Y(n, E);
    parallel_for(n, [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            auto yi = Y.row(i);
            for (int e = 0; e < E; ++e) yi[e] = p.b[e];
            const double scale = 1.0 / static_cast<double>(g.neighbors[i].size());
            std::size_t pair = pair_offset[i];
            for (int j : g.neighbors[i]) {
                const double* qm = q.data() + pair * M;
                for (int m = 0; m < M; ++m) {
                    const double coef = scale * qm[m];
                    const auto pj = P[m].row(j);
                    for (int e = 0; e < E; ++e) yi[e] += coef * pj[e];
                }
                ++pair;
            }
        }
    });
    return Y;
}

FeastConvGrads feast_backward(const FeastConvParams& p, const Matrix& X, const Graph& g,
                              const Matrix& dY) {
    check_conv_inputs(p, X, g);
    const int M = p.num_matrices();
    const int D = p.in_dim();
    const int E = p.out_dim();
    const int n = g.n;
    require_shape(dY, n, E, "conv dY");

    std::vector<std::size_t> pair_offset;
    std::vector<double> q;
    fill_assignments(p, X, g, pair_offset, q);
    const std::vector<Matrix> P = projected_features(p, X);

    FeastConvGrads grads;
    grads.dX = Matrix(n, D);
    grads.dW.assign(M, Matrix(E, D));
    grads.du = Matrix(M, D);
    grads.dv = p.translation_invariant ? Matrix(0, 0) : Matrix(M, D);
    grads.dc.assign(M, 0.0);
    grads.db.assign(E, 0.0);

    for (int i = 0; i < n; ++i)
        for (int e = 0; e < E; ++e) grads.db[e] += dY(i, e);

    // r[m](j, e): accumulated s_i q_mij dY_i for each projected feature,
    // alpha/beta: per-node row and column sums of the logit gradients.
    std::vector<Matrix> r(M, Matrix(n, E));
    Matrix alpha(n, M), beta(n, M);
    std::vector<double> ghat(M);

    for (int i = 0; i < n; ++i) {
        const auto dyi = dY.row(i);
        const double scale = 1.0 / static_cast<double>(g.neighbors[i].size());
        std::size_t pair = pair_offset[i];
        for (int j : g.neighbors[i]) {
            const double* qm = q.data() + pair * M;
            double expected = 0.0;
            for (int m = 0; m < M; ++m) {
                ghat[m] = scale * dot(dyi, P[m].row(j));
                expected += qm[m] * ghat[m];
            }
            for (int m = 0; m < M; ++m) {
                const double coef = scale * qm[m];
                auto rj = r[m].row(j);
                for (int e = 0; e < E; ++e) rj[e] += coef * dyi[e];
                // Softmax Jacobian: dL/d logit_m couples all m via `expected`.
                const double t = qm[m] * (ghat[m] - expected);
                alpha(i, m) += t;
                beta(j, m) += t;
            }
            ++pair;
        }
    }

    // Weight and feature gradients from the projection path.
    for (int m = 0; m < M; ++m) {
        const Matrix& Wm = p.W[m];
        Matrix& dWm = grads.dW[m];
        const Matrix& rm = r[m];
        for (int j = 0; j < n; ++j) {
            const auto xj = X.row(j);
            const auto rj = rm.row(j);
            auto dxj = grads.dX.row(j);
            for (int e = 0; e < E; ++e) {
                const double re = rj[e];
                if (re == 0.0) continue;
                auto dwe = dWm.row(e);
                const auto we = Wm.row(e);
                for (int d = 0; d < D; ++d) {
                    dwe[d] += re * xj[d];
                    dxj[d] += re * we[d];
                }
            }
        }
    }

    // Assignment-parameter and feature gradients from the logit path.
    if (p.translation_invariant) {
        for (int m = 0; m < M; ++m) {
            auto dum = grads.du.row(m);
            const auto um = p.u.row(m);
            for (int k = 0; k < n; ++k) {
                const double w = beta(k, m) - alpha(k, m);
                grads.dc[m] += alpha(k, m);
                if (w == 0.0) continue;
                const auto xk = X.row(k);
                auto dxk = grads.dX.row(k);
                for (int d = 0; d < D; ++d) {
                    dum[d] += w * xk[d];
                    dxk[d] += w * um[d];
                }
            }
        }
    } else {
        for (int m = 0; m < M; ++m) {
            auto dum = grads.du.row(m);
            auto dvm = grads.dv.row(m);
            const auto um = p.u.row(m);
            const auto vm = p.v.row(m);
            for (int k = 0; k < n; ++k) {
                const double a = alpha(k, m);
                const double bcol = beta(k, m);
                grads.dc[m] += a;
                const auto xk = X.row(k);
                auto dxk = grads.dX.row(k);
                for (int d = 0; d < D; ++d) {
                    dum[d] += a * xk[d];
                    dvm[d] += bcol * xk[d];
                    dxk[d] += a * um[d] + bcol * vm[d];
                }
            }
        }
    }

    return grads;
}

MahalanobisParams::MahalanobisParams(Matrix Z_, Matrix Sigma_) : Z(std::move(Z_)), Sigma(std::move(Sigma_)) {
    const int D = Z.cols();
    require_shape(Sigma, D, D, "Sigma");
    for (int a = 0; a < D; ++a)
        for (int bidx = a + 1; bidx < D; ++bidx)
            if (std::abs(Sigma(a, bidx) - Sigma(bidx, a)) > 1e-12)
                throw ValueError("Sigma: not symmetric within 1e-12");

    // Cholesky factorization succeeds exactly for positive-definite input.
    Matrix L(D, D);
    for (int a = 0; a < D; ++a) {
        for (int bidx = 0; bidx <= a; ++bidx) {
            double s = Sigma(a, bidx);
            for (int k = 0; k < bidx; ++k) s -= L(a, k) * L(bidx, k);
            if (a == bidx) {
                if (s <= 0.0) throw ValueError("Sigma: not positive definite");
                L(a, a) = std::sqrt(s);
            } else {
                L(a, bidx) = s / L(bidx, bidx);
            }
        }
    }
}

double MahalanobisParams::distance(std::span<const double> x, int m) const {
    const int D = Z.cols();
    double out = 0.0;
    for (int a = 0; a < D; ++a) {
        const double da = x[a] - Z(m, a);
        for (int bidx = 0; bidx < D; ++bidx)
            out += da * Sigma(a, bidx) * (x[bidx] - Z(m, bidx));
    }
    return out;
}

AssignmentCoeffs from_mahalanobis(const MahalanobisParams& mp) {
    const int M = mp.Z.rows();
    const int D = mp.Z.cols();
    AssignmentCoeffs out;
    out.u = Matrix(M, D);
    out.v = Matrix(M, D);
    out.c.assign(M, 0.0);
    for (int m = 0; m < M; ++m) {
        for (int a = 0; a < D; ++a) {
            double s = 0.0;
            for (int bidx = 0; bidx < D; ++bidx) s += mp.Sigma(a, bidx) * mp.Z(m, bidx);
            out.u(m, a) = -2.0 * s;
            out.v(m, a) = 2.0 * s;
            out.c[m] -= mp.Z(m, a) * s;
        }
    }
    return out;
}

FeastConvParams make_mahalanobis_params(const MahalanobisParams& mp, std::vector<Matrix> W,
                                        std::vector<double> b) {
    AssignmentCoeffs coeffs = from_mahalanobis(mp);
    FeastConvParams p;
    p.W = std::move(W);
    // v multiplies x_j; in translation-invariant storage the kept vector
    // multiplies x_j - x_i, which is v = -u.
    p.u = std::move(coeffs.v);
    p.v = Matrix(0, 0);
    p.c = std::move(coeffs.c);
    p.b = std::move(b);
    p.translation_invariant = true;
    p.validate();
    return p;
}

FeastConvParams init_feast_params(int M, int D, int E, std::uint64_t seed,
                                  bool translation_invariant) {
    if (M < 1 || D < 1 || E < 1) throw ValueError("init_feast_params: dims must be >= 1");
    Rng rng(seed);
    FeastConvParams p;
    p.translation_invariant = translation_invariant;
    const double w_std = std::sqrt(2.0 / (static_cast<double>(D) * M));
    const double uv_std = std::sqrt(1.0 / static_cast<double>(D));

    p.W.assign(M, Matrix(E, D));
    for (int m = 0; m < M; ++m)
        for (double& x : p.W[m].data()) x = rng.normal(0.0, w_std);
    p.u = Matrix(M, D);
    for (double& x : p.u.data()) x = rng.normal(0.0, uv_std);
    if (!translation_invariant) {
        p.v = Matrix(M, D);
        for (double& x : p.v.data()) x = rng.normal(0.0, uv_std);
    }
    p.c.assign(M, 0.0);
    p.b.assign(E, 0.0);
    return p;
}

long long feast_parameter_count(int M, int D, int E, bool translation_invariant) {
    if (M < 1 || D < 1 || E < 1) throw ValueError("parameter_count: dims must be >= 1");
    const long long md = static_cast<long long>(M) * D;
    long long total = md * E + (translation_invariant ? md : 2 * md) + M + E;
    return total;
}

Matrix grid_reference_conv(const std::vector<Matrix>& filters, int window_h, int window_w,
                           const std::vector<double>& bias, const Matrix& image, int H, int W) {
    const int M = static_cast<int>(filters.size());
    if (M != window_h * window_w)
        throw ShapeError("grid conv: " + std::to_string(M) + " filters for a " +
                         std::to_string(window_h) + "x" + std::to_string(window_w) + " window");
    if (image.rows() != H * W) throw ShapeError("grid conv: image rows != H*W");
    const int D = image.cols();
    const int E = filters[0].rows();
    for (const auto& f : filters)
        if (f.rows() != E || f.cols() != D) throw ShapeError("grid conv: inconsistent filter shapes");
    if (static_cast<int>(bias.size()) != E) throw ShapeError("grid conv: bias size");

    const int ch = (window_h - 1) / 2;
    const int cw = (window_w - 1) / 2;
    Matrix Y(H * W, E);
    for (int rpix = 0; rpix < H; ++rpix) {
        for (int cpix = 0; cpix < W; ++cpix) {
            auto y = Y.row(rpix * W + cpix);
            for (int e = 0; e < E; ++e) y[e] = bias[e];
            for (int m = 0; m < M; ++m) {
                const int nr = rpix + m / window_w - ch;
                const int nc = cpix + m % window_w - cw;
                if (nr < 0 || nr >= H || nc < 0 || nc >= W) continue; // zero padding
                const auto x = image.row(nr * W + nc);
                const Matrix& f = filters[m];
                for (int e = 0; e < E; ++e) y[e] += dot(f.row(e), x);
            }
        }
    }
    return Y;
}

Graph grid_graph(int H, int W, int window_h, int window_w) {
    Graph g = Graph::with_nodes(H * W);
    const int ch = (window_h - 1) / 2;
    const int cw = (window_w - 1) / 2;
    for (int rpix = 0; rpix < H; ++rpix)
        for (int cpix = 0; cpix < W; ++cpix) {
            const int i = rpix * W + cpix;
            for (int dr = -ch; dr < window_h - ch; ++dr)
                for (int dc = -cw; dc < window_w - cw; ++dc) {
                    const int nr = rpix + dr, nc = cpix + dc;
                    if (nr < 0 || nr >= H || nc < 0 || nc >= W) continue;
                    const int j = nr * W + nc;
                    if (j > i) g.add_edge(i, j, 1.0);
                }
        }
    return g;
}

} // namespace feast
