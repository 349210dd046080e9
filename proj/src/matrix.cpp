#include "lowrank/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "lowrank/error.hpp"

namespace lowrank {

namespace {

void require_positive_shape(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw ShapeError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

Matrix checked(Matrix m, const char* op) {
    if (!all_finite(m)) throw NumericError(std::string(op) + ": produced a non-finite entry");
    return m;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    require_positive_shape(rows, cols);
    data_.assign(rows * cols, 0.0);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require_positive_shape(rows, cols);
    if (data_.size() != rows * cols) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                         shape_string());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("from_rows: ragged row lengths");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

std::string Matrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ for " + a.shape_string() + " * " +
                         b.shape_string());
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    auto od = out.data();
    auto bd = b.data();
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = od.data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = bd.data() + k * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    return checked(std::move(out), "matmul");
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    auto od = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
    return checked(std::move(out), "add");
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix out = a;
    auto od = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
    return checked(std::move(out), "subtract");
}

Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (double& v : out.data()) v *= s;
    return checked(std::move(out), "scale");
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
    return m;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

bool all_finite(const Matrix& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), re_(rows * cols, 0.0), im_(rows * cols, 0.0) {
    require_positive_shape(rows, cols);
}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<double> re,
                             std::vector<double> im)
    : rows_(rows), cols_(cols), re_(std::move(re)), im_(std::move(im)) {
    require_positive_shape(rows, cols);
    if (re_.size() != rows * cols || im_.size() != rows * cols) {
        throw ShapeError("complex matrix planes do not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
}

ComplexMatrix::ComplexMatrix(const Matrix& real)
    : rows_(real.rows()),
      cols_(real.cols()),
      re_(real.data().begin(), real.data().end()),
      im_(real.size(), 0.0) {}

ComplexMatrix ComplexMatrix::conj_transposed() const {
    ComplexMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            t.re(c, r) = re(r, c);
            t.im(c, r) = -im(r, c);
        }
    }
    return t;
}

Matrix ComplexMatrix::real_embedding() const {
    Matrix e(2 * rows_, 2 * cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            e(r, c) = re(r, c);
            e(r, c + cols_) = -im(r, c);
            e(r + rows_, c) = im(r, c);
            e(r + rows_, c + cols_) = re(r, c);
        }
    }
    return e;
}

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("complex matmul: inner dimensions differ (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
    }
    ComplexMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double ar = a.re(i, k);
            const double ai = a.im(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out.re(i, j) += ar * b.re(k, j) - ai * b.im(k, j);
                out.im(i, j) += ar * b.im(k, j) + ai * b.re(k, j);
            }
        }
    }
    return out;
}

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("complex max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            m = std::max(m, std::hypot(a.re(r, c) - b.re(r, c), a.im(r, c) - b.im(r, c)));
        }
    }
    return m;
}

}  // namespace lowrank
