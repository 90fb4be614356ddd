#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmra {

using Complex = std::complex<double>;
using RealVector = std::vector<double>;
using ComplexVector = std::vector<Complex>;

/// Dense row-major matrix. Used for the bispectrum (complex) and the bias matrix (real).
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    [[nodiscard]] std::span<const T> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    [[nodiscard]] std::vector<T>& data() noexcept { return data_; }
    [[nodiscard]] const std::vector<T>& data() const noexcept { return data_; }

    Matrix& operator+=(const Matrix& other) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;

/// A real signal of length L >= 2 with finite entries.
class Signal {
public:
    explicit Signal(RealVector values);

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    operator std::span<const double>() const noexcept { return values_; }  // NOLINT

private:
    RealVector values_;
};

/// K signals of common length L, stored row-major (one row per signal).
class SignalSet {
public:
    SignalSet() = default;
    SignalSet(std::size_t K, std::size_t L);
    explicit SignalSet(const std::vector<RealVector>& rows);

    [[nodiscard]] std::size_t count() const noexcept { return K_; }
    [[nodiscard]] std::size_t length() const noexcept { return L_; }

    [[nodiscard]] std::span<double> operator[](std::size_t k) noexcept { return {data_.data() + k * L_, L_}; }
    [[nodiscard]] std::span<const double> operator[](std::size_t k) const noexcept {
        return {data_.data() + k * L_, L_};
    }

    [[nodiscard]] RealVector& data() noexcept { return data_; }
    [[nodiscard]] const RealVector& data() const noexcept { return data_; }

    [[nodiscard]] std::vector<RealVector> rows() const;

private:
    std::size_t K_ = 0;
    std::size_t L_ = 0;
    RealVector data_;
};

/// Unnormalized forward DFT: out[k] = sum_n x[n] exp(-2 pi i n k / L).
[[nodiscard]] ComplexVector dft(std::span<const double> x);
[[nodiscard]] ComplexVector dft(std::span<const Complex> x);

/// Inverse DFT carrying the 1/L factor.
[[nodiscard]] ComplexVector idft(std::span<const Complex> xhat);

/// Real part of the inverse DFT. Appropriate when xhat is conjugate symmetric.
[[nodiscard]] RealVector idft_real(std::span<const Complex> xhat);

/// (R_r x)[n] = x[(n - r) mod L]; any integer r.
[[nodiscard]] RealVector cyclic_shift(std::span<const double> x, std::int64_t r);

/// Reduces any integer index into [0, L).
[[nodiscard]] inline std::size_t wrap_index(std::int64_t i, std::size_t L) noexcept {
    const auto n = static_cast<std::int64_t>(L);
    auto m = i % n;
    if (m < 0) m += n;
    return static_cast<std::size_t>(m);
}

/// Shift-invariant features of a single signal.
struct Features {
    double mean = 0.0;
    RealVector power;
    ComplexMatrix bispectrum;
};

/// B[k, l] = xhat[k] * conj(xhat[l]) * xhat[l - k], indices mod L.
[[nodiscard]] ComplexMatrix bispectrum_from_spectrum(std::span<const Complex> xhat);

[[nodiscard]] Features features_from_spectrum(std::span<const Complex> xhat);
[[nodiscard]] Features invariant_features(std::span<const double> x);

/// The L x L matrix multiplying mu * sigma^2 * L^2 in the expected bispectrum of noisy data:
/// A[0,0] = 3, ones on the rest of the diagonal and on the first row and column.
[[nodiscard]] RealMatrix bias_matrix(std::size_t L);

}  // namespace hmra
