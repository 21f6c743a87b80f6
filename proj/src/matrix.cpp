#include "mtd/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mtd/error.hpp"
#include "mtd/rng.hpp"

namespace mtd {

namespace {

std::string shape_str(const DenseMatrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace

DenseMatrix::DenseMatrix(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

bool DenseMatrix::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void DenseMatrix::fill(double v) { std::fill(data.begin(), data.end(), v); }

DenseMatrix DenseMatrix::identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::gaussian(int r, int c, double stddev, Rng& rng) {
    DenseMatrix m(r, c);
    for (double& v : m.data) v = rng.gaussian(0.0, stddev);
    return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows) {
        throw DimensionError("matmul: shape mismatch " + shape_str(a) + " * " + shape_str(b));
    }
    // i-k-j loop order: per output entry the k terms accumulate in ascending
    // order, bit-identical to the naive i-j-k definition.
    DenseMatrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
        double* crow = c.data.data() + static_cast<std::size_t>(i) * c.cols;
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.data.data() + static_cast<std::size_t>(k) * b.cols;
            for (int j = 0; j < b.cols; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.cols) {
        throw DimensionError("matmul_nt: shape mismatch " + shape_str(a) + " * " + shape_str(b) + "^T");
    }
    DenseMatrix c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < b.rows; ++j) {
            c.at(i, j) = dot(a.row(i), b.row(j));
        }
    }
    return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows) {
        throw DimensionError("matmul_tn: shape mismatch " + shape_str(a) + "^T * " + shape_str(b));
    }
    DenseMatrix c(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = a.data.data() + static_cast<std::size_t>(k) * a.cols;
        const double* brow = b.data.data() + static_cast<std::size_t>(k) * b.cols;
        for (int i = 0; i < a.cols; ++i) {
            double* crow = c.data.data() + static_cast<std::size_t>(i) * c.cols;
            const double aki = arow[i];
            for (int j = 0; j < b.cols; ++j) {
                crow[j] += aki * brow[j];
            }
        }
    }
    return c;
}

void add_scaled(DenseMatrix& dst, const DenseMatrix& src, double scale) {
    if (!dst.same_shape(src)) {
        throw DimensionError("add_scaled: shape mismatch " + shape_str(dst) + " += " + shape_str(src));
    }
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += scale * src.data[i];
}

void add_outer(DenseMatrix& dst, std::span<const double> u, std::span<const double> v) {
    if (dst.rows != static_cast<int>(u.size()) || dst.cols != static_cast<int>(v.size())) {
        throw DimensionError("add_outer: shape mismatch");
    }
    for (int i = 0; i < dst.rows; ++i) {
        double* drow = dst.data.data() + static_cast<std::size_t>(i) * dst.cols;
        const double ui = u[static_cast<std::size_t>(i)];
        for (int j = 0; j < dst.cols; ++j) drow[j] += ui * v[static_cast<std::size_t>(j)];
    }
}

std::vector<double> matvec(const DenseMatrix& w, std::span<const double> x) {
    if (w.cols != static_cast<int>(x.size())) {
        throw DimensionError("matvec: shape mismatch " + shape_str(w) + " * vec" + std::to_string(x.size()));
    }
    std::vector<double> y(static_cast<std::size_t>(w.rows));
    for (int i = 0; i < w.rows; ++i) y[static_cast<std::size_t>(i)] = dot(w.row(i), x);
    return y;
}

std::vector<double> matvec_t(const DenseMatrix& w, std::span<const double> x) {
    if (w.rows != static_cast<int>(x.size())) {
        throw DimensionError("matvec_t: shape mismatch " + shape_str(w) + "^T * vec" + std::to_string(x.size()));
    }
    std::vector<double> y(static_cast<std::size_t>(w.cols), 0.0);
    for (int i = 0; i < w.rows; ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        const double* wrow = w.data.data() + static_cast<std::size_t>(i) * w.cols;
        for (int j = 0; j < w.cols; ++j) y[static_cast<std::size_t>(j)] += xi * wrow[j];
    }
    return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

DenseMatrix softmax_rows(const DenseMatrix& m) {
    DenseMatrix out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m.cols; ++j) mx = std::max(mx, m.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < m.cols; ++j) {
            const double e = std::exp(m.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < m.cols; ++j) out.at(i, j) /= sum;
    }
    return out;
}

DenseMatrix softmax_rows_backward(const DenseMatrix& da, const DenseMatrix& a) {
    // ds_i = a_i .* (da_i - <a_i, da_i>)
    DenseMatrix ds(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double inner = dot(a.row(i), da.row(i));
        for (int j = 0; j < a.cols; ++j) {
            ds.at(i, j) = a.at(i, j) * (da.at(i, j) - inner);
        }
    }
    return ds;
}

DenseMatrix elementwise(const DenseMatrix& m, Activation fn) {
    DenseMatrix out(m.rows, m.cols);
    if (fn == Activation::relu) {
        for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = m.data[i] > 0.0 ? m.data[i] : 0.0;
    } else {
        for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = sigmoid(m.data[i]);
    }
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sigmoid_clamped(double x) {
    // -softplus(-x), floored at log(1e-12).
    static const double kFloor = std::log(1e-12);
    double v;
    if (x > 0.0) {
        v = -std::log1p(std::exp(-x));
    } else {
        v = x - std::log1p(std::exp(x));
    }
    return std::max(v, kFloor);
}

void softmax_inplace(std::vector<double>& v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

double log_sum_exp(std::span<const double> z) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : z) mx = std::max(mx, x);
    double sum = 0.0;
    for (double x : z) sum += std::exp(x - mx);
    return mx + std::log(sum);
}

}  // namespace mtd
