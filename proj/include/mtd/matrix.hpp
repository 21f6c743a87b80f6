#pragma once

#include <span>
#include <vector>

namespace mtd {

class Rng;

// Row-major dense matrix of 64-bit floats. Vectors are stored as 1 x n.
// Everything runs in double precision so finite-difference gradient checks
// have headroom.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(int r, int c, double fill = 0.0);

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::span<double> row(int r) {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;
    void fill(double v);
    void zero() { fill(0.0); }

    static DenseMatrix identity(int n);
    static DenseMatrix gaussian(int r, int c, double stddev, Rng& rng);
};

// c = a * b. Summation runs over k in ascending order for each output entry,
// matching the naive triple-loop definition bit for bit.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

// c = a * b^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

// c = a^T * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);

// dst += src * scale
void add_scaled(DenseMatrix& dst, const DenseMatrix& src, double scale = 1.0);

// dst += u * v^T  (u: len rows, v: len cols)
void add_outer(DenseMatrix& dst, std::span<const double> u, std::span<const double> v);

// w * x for a (rows x cols) matrix and a column vector x of length cols.
std::vector<double> matvec(const DenseMatrix& w, std::span<const double> x);

// w^T * x, x of length rows.
std::vector<double> matvec_t(const DenseMatrix& w, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);

// Row-wise softmax with per-row max subtraction.
DenseMatrix softmax_rows(const DenseMatrix& m);

// Given a = softmax(s) row-wise and upstream da, returns ds.
DenseMatrix softmax_rows_backward(const DenseMatrix& da, const DenseMatrix& a);

enum class Activation { relu, sigmoid };

DenseMatrix elementwise(const DenseMatrix& m, Activation fn);

double sigmoid(double x);

// log(sigmoid(x)) with the probability clamped to [1e-12, 1 - 1e-12], so the
// result is finite for every input.
double log_sigmoid_clamped(double x);

// In-place softmax over a plain vector; returns the normalized weights.
void softmax_inplace(std::vector<double>& v);

// Stable log(sum(exp(z))) over a span.
double log_sum_exp(std::span<const double> z);

}  // namespace mtd
