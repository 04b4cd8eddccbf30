#pragma once

#include <cstddef>
#include <cstdint>
#include <iostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dualspace {

/// Runtime failure: malformed input, numeric breakdown, I/O errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration supplied by the caller.
class UsageError : public Error {
public:
    using Error::Error;
};

using TokenId = std::uint32_t;

inline constexpr std::string_view kToolVersion = "0.3.1";

namespace detail {

inline bool& quiet_flag() {
    static bool quiet = false;
    return quiet;
}

inline void warn(std::string_view msg) {
    if (!quiet_flag()) std::clog << "warning: " << msg << '\n';
}

}  // namespace detail

/// Silences warnings emitted on std::clog (tests, sweeps).
inline void set_quiet(bool quiet) { detail::quiet_flag() = quiet; }

/// Per-epoch training loss: mean per example for SGNS, total objective for GloVe.
struct TrainingLog {
    std::vector<double> epoch_loss;
};

/// Dense row-major matrix. Rows are exposed as spans.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

template <typename T, typename U>
double dot(std::span<T> a, std::span<U> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    return s;
}

/// 64-bit FNV-1a. Used for content fingerprints and seed labels, not security.
class Fnv1a {
public:
    void update(std::string_view bytes) noexcept {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view bytes) noexcept {
    Fnv1a h;
    h.update(bytes);
    return h.digest();
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    return out;
}

}  // namespace dualspace
