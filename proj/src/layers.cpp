#include "feast/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "feast/errors.hpp"

namespace feast {

void LinearParams::validate() const {
    if (W.rows() < 1 || W.cols() < 1) throw ShapeError("linear params: empty W");
    if (static_cast<int>(b.size()) != W.rows()) throw ShapeError("linear params: b size");
    if (!W.all_finite()) throw ValueError("linear params: non-finite W");
    for (double x : b)
        if (!std::isfinite(x)) throw ValueError("linear params: non-finite b");
}

Matrix linear_forward(const LinearParams& p, const Matrix& X) {
    require_cols(X, p.in_dim(), "linear input");
    const int n = X.rows(), D = p.in_dim(), E = p.out_dim();
    Matrix Y(n, E);
    for (int i = 0; i < n; ++i) {
        const auto xi = X.row(i);
        auto yi = Y.row(i);
        for (int e = 0; e < E; ++e) {
            double s = p.b[e];
            const auto we = p.W.row(e);
            for (int d = 0; d < D; ++d) s += we[d] * xi[d];
            yi[e] = s;
        }
    }
    return Y;
}

LinearGrads linear_backward(const LinearParams& p, const Matrix& X, const Matrix& dY) {
    require_cols(X, p.in_dim(), "linear input");
    require_shape(dY, X.rows(), p.out_dim(), "linear dY");
    const int n = X.rows(), D = p.in_dim(), E = p.out_dim();
    LinearGrads g;
    g.dX = Matrix(n, D);
    g.dW = Matrix(E, D);
    g.db.assign(E, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto xi = X.row(i);
        const auto dyi = dY.row(i);
        auto dxi = g.dX.row(i);
        for (int e = 0; e < E; ++e) {
            const double de = dyi[e];
            g.db[e] += de;
            if (de == 0.0) continue;
            const auto we = p.W.row(e);
            auto dwe = g.dW.row(e);
            for (int d = 0; d < D; ++d) {
                dwe[d] += de * xi[d];
                dxi[d] += de * we[d];
            }
        }
    }
    return g;
}

Matrix relu_forward(const Matrix& X) {
    Matrix Y = X;
    for (double& x : Y.data()) x = std::max(x, 0.0);
    return Y;
}

Matrix relu_backward(const Matrix& X, const Matrix& dY) {
    require_shape(dY, X.rows(), X.cols(), "relu dY");
    Matrix dX = dY;
    const auto& xs = X.data();
    auto& ds = dX.data();
    for (std::size_t k = 0; k < xs.size(); ++k)
        if (xs[k] <= 0.0) ds[k] = 0.0;
    return dX;
}

SoftmaxLoss softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets,
                                  const std::vector<int>& valid_classes) {
    const int n = logits.rows(), C = logits.cols();
    if (n == 0) throw ValueError("cross entropy: no rows");
    if (static_cast<int>(targets.size()) != n)
        throw ShapeError("cross entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");

    std::vector<char> valid(C, valid_classes.empty() ? 1 : 0);
    for (int cls : valid_classes) {
        if (cls < 0 || cls >= C) throw ValueError("cross entropy: valid class out of range");
        valid[cls] = 1;
    }
    for (int t : targets) {
        if (t < 0 || t >= C) throw ValueError("cross entropy: target out of range");
        if (!valid[t]) throw ValueError("cross entropy: target class " + std::to_string(t) +
                                        " is masked out");
    }

    SoftmaxLoss out;
    out.dLogits = Matrix(n, C);
    const double inv_n = 1.0 / n;
    std::vector<double> prob(C);
    for (int i = 0; i < n; ++i) {
        const auto li = logits.row(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (int cls = 0; cls < C; ++cls)
            if (valid[cls]) mx = std::max(mx, li[cls]);
        double sum = 0.0;
        for (int cls = 0; cls < C; ++cls) {
            prob[cls] = valid[cls] ? std::exp(li[cls] - mx) : 0.0;
            sum += prob[cls];
        }
        const double inv_sum = 1.0 / sum;
        auto di = out.dLogits.row(i);
        for (int cls = 0; cls < C; ++cls) {
            prob[cls] *= inv_sum;
            di[cls] = prob[cls] * inv_n;
        }
        out.loss -= std::log(prob[targets[i]]);
        di[targets[i]] -= inv_n;
    }
    out.loss *= inv_n;
    return out;
}

void PoolMap::validate() const {
    if (num_coarse < 1) throw ShapeError("pool map: empty");
    if (static_cast<int>(fine_is_fake.size()) != num_fine())
        throw ShapeError("pool map: fine mask size");
    if (static_cast<int>(coarse_is_fake.size()) != num_coarse)
        throw ShapeError("pool map: coarse mask size");
    for (int k = 0; k < num_coarse; ++k) {
        const bool both_fake = fine_is_fake[2 * k] && fine_is_fake[2 * k + 1];
        if (static_cast<bool>(coarse_is_fake[k]) != both_fake)
            throw ValueError("pool map: coarse mask inconsistent with children");
    }
}

PoolResult max_pool(const Matrix& X, const PoolMap& pm) {
    if (X.rows() != pm.num_fine())
        throw ShapeError("max pool: " + std::to_string(X.rows()) + " rows vs ordering length " +
                         std::to_string(pm.num_fine()));
    const int C = X.cols();
    PoolResult res;
    res.out = Matrix(pm.num_coarse, C);
    res.argmax.assign(static_cast<std::size_t>(pm.num_coarse) * C, -1);
    for (int k = 0; k < pm.num_coarse; ++k) {
        const int a = 2 * k, b = 2 * k + 1;
        const bool a_real = !pm.fine_is_fake[a];
        const bool b_real = !pm.fine_is_fake[b];
        auto yk = res.out.row(k);
        int* amk = res.argmax.data() + static_cast<std::size_t>(k) * C;
        if (!a_real && !b_real) continue; // padding row, stays zero
        for (int ch = 0; ch < C; ++ch) {
            if (a_real && (!b_real || X(a, ch) >= X(b, ch))) {
                yk[ch] = X(a, ch);
                amk[ch] = a;
            } else {
                yk[ch] = X(b, ch);
                amk[ch] = b;
            }
        }
    }
    return res;
}

Matrix max_pool_backward(const std::vector<int>& argmax, const PoolMap& pm, int channels,
                         const Matrix& dCoarse) {
    require_shape(dCoarse, pm.num_coarse, channels, "max pool dY");
    if (argmax.size() != static_cast<std::size_t>(pm.num_coarse) * channels)
        throw ShapeError("max pool backward: argmax size");
    Matrix dX(pm.num_fine(), channels);
    for (int k = 0; k < pm.num_coarse; ++k) {
        const int* amk = argmax.data() + static_cast<std::size_t>(k) * channels;
        for (int ch = 0; ch < channels; ++ch)
            if (amk[ch] >= 0) dX(amk[ch], ch) += dCoarse(k, ch);
    }
    return dX;
}

void UnpoolParams::validate() const {
    const std::size_t C = k0.size();
    if (C == 0) throw ShapeError("unpool params: empty");
    if (k1.size() != C || b.size() != C) throw ShapeError("unpool params: size mismatch");
    for (std::size_t ch = 0; ch < C; ++ch)
        if (!std::isfinite(k0[ch]) || !std::isfinite(k1[ch]) || !std::isfinite(b[ch]))
            throw ValueError("unpool params: non-finite entry");
}

UnpoolParams init_unpool_params(int channels) {
    if (channels < 1) throw ValueError("unpool params: channels must be >= 1");
    UnpoolParams up;
    up.k0.assign(channels, 1.0);
    up.k1.assign(channels, 1.0);
    up.b.assign(channels, 0.0);
    return up;
}

Matrix unpool(const Matrix& Xc, const UnpoolParams& up, const PoolMap& pm) {
    const int C = up.channels();
    require_shape(Xc, pm.num_coarse, C, "unpool input");
    Matrix Y(pm.num_fine(), C);
    for (int k = 0; k < pm.num_coarse; ++k) {
        const auto xk = Xc.row(k);
        auto y0 = Y.row(2 * k);
        auto y1 = Y.row(2 * k + 1);
        for (int ch = 0; ch < C; ++ch) {
            y0[ch] = up.k0[ch] * xk[ch] + up.b[ch];
            y1[ch] = up.k1[ch] * xk[ch] + up.b[ch];
        }
    }
    for (int f = 0; f < pm.num_fine(); ++f)
        if (pm.fine_is_fake[f]) {
            auto yf = Y.row(f);
            std::fill(yf.begin(), yf.end(), 0.0);
        }
    return Y;
}

UnpoolGrads unpool_backward(const Matrix& Xc, const UnpoolParams& up, const PoolMap& pm,
                            const Matrix& dFine) {
    const int C = up.channels();
    require_shape(Xc, pm.num_coarse, C, "unpool input");
    require_shape(dFine, pm.num_fine(), C, "unpool dY");
    UnpoolGrads g;
    g.dXc = Matrix(pm.num_coarse, C);
    g.dk0.assign(C, 0.0);
    g.dk1.assign(C, 0.0);
    g.db.assign(C, 0.0);
    for (int k = 0; k < pm.num_coarse; ++k) {
        const auto xk = Xc.row(k);
        auto dxk = g.dXc.row(k);
        if (!pm.fine_is_fake[2 * k]) {
            const auto d0 = dFine.row(2 * k);
            for (int ch = 0; ch < C; ++ch) {
                dxk[ch] += up.k0[ch] * d0[ch];
                g.dk0[ch] += xk[ch] * d0[ch];
                g.db[ch] += d0[ch];
            }
        }
        if (!pm.fine_is_fake[2 * k + 1]) {
            const auto d1 = dFine.row(2 * k + 1);
            for (int ch = 0; ch < C; ++ch) {
                dxk[ch] += up.k1[ch] * d1[ch];
                g.dk1[ch] += xk[ch] * d1[ch];
                g.db[ch] += d1[ch];
            }
        }
    }
    return g;
}

GlobalMaxConcatResult global_max_concat(const std::vector<const Matrix*>& inputs) {
    if (inputs.empty()) throw ValueError("global max concat: no inputs");
    const int n = inputs[0]->rows();
    int width = 0;
    for (const Matrix* m : inputs) {
        if (m->rows() != n) throw ShapeError("global max concat: row-count mismatch");
        width += m->cols();
    }
    const Matrix& last = *inputs.back();
    const int lc = last.cols();
    width += lc;

    GlobalMaxConcatResult res;
    res.argmax.assign(lc, 0);
    for (int ch = 0; ch < lc; ++ch) {
        int best = 0;
        for (int i = 1; i < n; ++i)
            if (last(i, ch) > last(best, ch)) best = i;
        res.argmax[ch] = best;
    }

    res.out = Matrix(n, width);
    for (int i = 0; i < n; ++i) {
        auto out_row = res.out.row(i);
        int at = 0;
        for (const Matrix* m : inputs) {
            const auto src = m->row(i);
            std::copy(src.begin(), src.end(), out_row.begin() + at);
            at += m->cols();
        }
        for (int ch = 0; ch < lc; ++ch) out_row[at + ch] = last(res.argmax[ch], ch);
    }
    return res;
}

std::vector<Matrix> global_max_concat_backward(const std::vector<const Matrix*>& inputs,
                                               const std::vector<int>& argmax,
                                               const Matrix& dOut) {
    const int n = inputs[0]->rows();
    int width = inputs.back()->cols();
    for (const Matrix* m : inputs) width += m->cols();
    require_shape(dOut, n, width, "global max concat dY");
    std::vector<Matrix> grads;
    grads.reserve(inputs.size());
    for (const Matrix* m : inputs) grads.emplace_back(n, m->cols());

    for (int i = 0; i < n; ++i) {
        const auto drow = dOut.row(i);
        int at = 0;
        for (std::size_t li = 0; li < inputs.size(); ++li) {
            auto dst = grads[li].row(i);
            for (int ch = 0; ch < inputs[li]->cols(); ++ch) dst[ch] += drow[at + ch];
            at += inputs[li]->cols();
        }
        const int lc = inputs.back()->cols();
        Matrix& dlast = grads.back();
        for (int ch = 0; ch < lc; ++ch) dlast(argmax[ch], ch) += drow[at + ch];
    }
    return grads;
}

} // namespace feast
