#pragma once

#include <cstdint>
#include <vector>

#include "feast/graph.hpp"
#include "feast/matrix.hpp"

namespace feast {

// Parameters of one feature-steered convolution: M weight matrices W_m
// (each E x D), assignment vectors u_m / v_m, assignment offsets c_m and an
// output bias b. In translation-invariant mode only u is stored and
// v_m = -u_m is implied, so the constraint cannot drift during optimization.
struct FeastConvParams {
    std::vector<Matrix> W;  // M matrices, E x D
    Matrix u;               // M x D
    Matrix v;               // M x D; 0 x 0 in translation-invariant mode
    std::vector<double> c;  // M
    std::vector<double> b;  // E
    bool translation_invariant = false;

    int num_matrices() const { return static_cast<int>(W.size()); }
    int in_dim() const { return W.empty() ? 0 : W[0].cols(); }
    int out_dim() const { return W.empty() ? 0 : W[0].rows(); }

    void validate() const;
};

// Soft assignments q_m(x_i, x_j) for every ordered pair (i, j) with
// j in N_i, laid out node by node in neighbor-list order.
struct Assignments {
    int M = 0;
    std::vector<std::size_t> pair_offset; // size n + 1, prefix sums of |N_i|
    std::vector<double> q;                // size pair_offset[n] * M

    std::size_t num_pairs() const { return pair_offset.empty() ? 0 : pair_offset.back(); }
    const double* pair(std::size_t p) const { return q.data() + p * M; }
    // Assignment vector for node i and its k-th neighbor.
    const double* at(int i, int k) const { return pair(pair_offset[i] + k); }
};

// Softmax over m of u_m.x_i + v_m.x_j + c_m (or u_m.(x_j - x_i) + c_m in
// translation-invariant mode), stabilized by subtracting the per-pair
// maximum logit.
Assignments compute_assignments(const FeastConvParams& p, const Matrix& X, const Graph& g);

// y_i = b + sum_m (1/|N_i|) sum_{j in N_i} q_m(x_i, x_j) W_m x_j.
// Accumulation order is fixed (ascending j, then m) for reproducibility.
Matrix feast_forward(const FeastConvParams& p, const Matrix& X, const Graph& g);

// Exact gradients of L = sum_i dY_i . y_i. In translation-invariant mode
// dv is empty and its contribution is folded into du.
struct FeastConvGrads {
    Matrix dX;
    std::vector<Matrix> dW;
    Matrix du;
    Matrix dv;
    std::vector<double> dc;
    std::vector<double> db;
};

FeastConvGrads feast_backward(const FeastConvParams& p, const Matrix& X, const Graph& g,
                              const Matrix& dY);

// Mahalanobis assignment parameterization: reference points z_m and a shared
// symmetric positive-definite matrix Sigma. Construction checks symmetry
// (within 1e-12) and positive definiteness.
struct MahalanobisParams {
    Matrix Z;     // M x D
    Matrix Sigma; // D x D

    MahalanobisParams(Matrix Z_, Matrix Sigma_);

    // d(x, z_m) = (x - z_m)^T Sigma (x - z_m).
    double distance(std::span<const double> x, int m) const;
};

// Linear assignment coefficients that reproduce softmax over negative
// Mahalanobis distances: u_m = -2 Sigma z_m (pairs x_i), v_m = -u_m
// (pairs x_j), c_m = -z_m^T Sigma z_m. The x^T Sigma x term is independent
// of m and cancels in the softmax.
struct AssignmentCoeffs {
    Matrix u;
    Matrix v;
    std::vector<double> c;
};

AssignmentCoeffs from_mahalanobis(const MahalanobisParams& mp);

// Assembles full conv params with Mahalanobis-derived assignments.
FeastConvParams make_mahalanobis_params(const MahalanobisParams& mp, std::vector<Matrix> W,
                                        std::vector<double> b);

// W ~ N(0, 2/(D*M)) (fan-in scaled by the expected 1/M assignment mass),
// u and v ~ N(0, 1/D), c and b zero. Deterministic per seed.
FeastConvParams init_feast_params(int M, int D, int E, std::uint64_t seed,
                                  bool translation_invariant);

// MDE + 2MD + M + E, with MD dropped once when v is derived from u.
long long feast_parameter_count(int M, int D, int E, bool translation_invariant);

// Reference grid convolution: filters ordered row-major over an h x w
// window centered on each pixel, zero padding at the borders. The image is
// (H*W) x D with pixel (r, c) at row r*W + c; output is (H*W) x E.
Matrix grid_reference_conv(const std::vector<Matrix>& filters, int window_h, int window_w,
                           const std::vector<double>& bias, const Matrix& image, int H, int W);

// Full grid graph on H x W pixels under the same window (every pixel linked
// to the in-range pixels of its window, plus itself).
Graph grid_graph(int H, int W, int window_h, int window_w);

} // namespace feast
