#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lowrank {

/// Dense row-major matrix of doubles.
///
/// Shapes are always at least 1x1. Shape violations raise ShapeError.
class Matrix {
public:
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    Matrix transposed() const;
    std::string shape_string() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& a);
bool all_finite(const Matrix& a);

/// Dense complex matrix stored as separate real and imaginary planes.
class ComplexMatrix {
public:
    ComplexMatrix(std::size_t rows, std::size_t cols);
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<double> re, std::vector<double> im);
    explicit ComplexMatrix(const Matrix& real);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double re(std::size_t r, std::size_t c) const noexcept { return re_[r * cols_ + c]; }
    double im(std::size_t r, std::size_t c) const noexcept { return im_[r * cols_ + c]; }
    double& re(std::size_t r, std::size_t c) noexcept { return re_[r * cols_ + c]; }
    double& im(std::size_t r, std::size_t c) noexcept { return im_[r * cols_ + c]; }

    Matrix real_part() const { return Matrix(rows_, cols_, re_); }
    Matrix imag_part() const { return Matrix(rows_, cols_, im_); }

    ComplexMatrix conj_transposed() const;

    /// [[Re, -Im], [Im, Re]]; its rank is exactly twice the complex rank.
    Matrix real_embedding() const;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> re_;
    std::vector<double> im_;
};

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);
double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b);

}  // namespace lowrank
