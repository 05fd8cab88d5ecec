#pragma once

#include <vector>

#include "feast/matrix.hpp"

namespace feast {

// Dense per-node map: y_i = W x_i + b.
struct LinearParams {
    Matrix W;              // E x D
    std::vector<double> b; // E

    int in_dim() const { return W.cols(); }
    int out_dim() const { return W.rows(); }
    void validate() const;
};

Matrix linear_forward(const LinearParams& p, const Matrix& X);

struct LinearGrads {
    Matrix dX;
    Matrix dW;
    std::vector<double> db;
};

LinearGrads linear_backward(const LinearParams& p, const Matrix& X, const Matrix& dY);

Matrix relu_forward(const Matrix& X);

// Subgradient at exactly 0 is fixed to 0: gradient flows only where X > 0.
Matrix relu_backward(const Matrix& X, const Matrix& dY);

struct SoftmaxLoss {
    double loss = 0.0;
    Matrix dLogits;
};

// Mean negative log-likelihood over rows. A non-empty `valid_classes` list
// restricts the softmax to those classes (the rest get -inf logits); every
// target must then be one of them.
SoftmaxLoss softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets,
                                  const std::vector<int>& valid_classes = {});

// Pairing of 2*num_coarse fine positions (children 2k, 2k+1 of coarse k)
// with masks marking padding rows that carry no real node.
struct PoolMap {
    int num_coarse = 0;
    std::vector<char> fine_is_fake;   // 2 * num_coarse
    std::vector<char> coarse_is_fake; // num_coarse, set when both children are fake

    int num_fine() const { return 2 * num_coarse; }
    void validate() const;
};

struct PoolResult {
    Matrix out;
    // Winning fine row per (coarse row, channel), -1 where both children are fake.
    std::vector<int> argmax;
};

PoolResult max_pool(const Matrix& X, const PoolMap& pm);

Matrix max_pool_backward(const std::vector<int>& argmax, const PoolMap& pm, int channels,
                         const Matrix& dCoarse);

// Width-2 stride-2 transposed convolution: coarse row k emits fine rows
// 2k (kernel k0) and 2k+1 (kernel k1), one scalar pair and bias per channel.
struct UnpoolParams {
    std::vector<double> k0;
    std::vector<double> k1;
    std::vector<double> b;

    int channels() const { return static_cast<int>(k0.size()); }
    void validate() const;
};

UnpoolParams init_unpool_params(int channels);

Matrix unpool(const Matrix& Xc, const UnpoolParams& up, const PoolMap& pm);

struct UnpoolGrads {
    Matrix dXc;
    std::vector<double> dk0;
    std::vector<double> dk1;
    std::vector<double> db;
};

UnpoolGrads unpool_backward(const Matrix& Xc, const UnpoolParams& up, const PoolMap& pm,
                            const Matrix& dFine);

struct GlobalMaxConcatResult {
    Matrix out;
    // Row index of the per-channel maximum of the last input (first row wins ties).
    std::vector<int> argmax;
};

// Concatenates all inputs per row, then appends the column-wise max of the
// last input broadcast to every row.
GlobalMaxConcatResult global_max_concat(const std::vector<const Matrix*>& inputs);

std::vector<Matrix> global_max_concat_backward(const std::vector<const Matrix*>& inputs,
                                               const std::vector<int>& argmax,
                                               const Matrix& dOut);

} // namespace feast
