#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace ssg {

/// Per-thread accounting of live tensor-buffer bytes. Deterministic, unlike OS RSS.
class MemoryCounter {
public:
    static std::int64_t live();
    static std::int64_t peak();
    static void reset_peak();
    static void add(std::int64_t bytes);
    static void sub(std::int64_t bytes);
};

template <typename T>
struct TrackingAllocator {
    using value_type = T;
    TrackingAllocator() = default;
    template <typename U>
    TrackingAllocator(const TrackingAllocator<U>&) {}

    T* allocate(std::size_t n) {
        MemoryCounter::add(static_cast<std::int64_t>(n * sizeof(T)));
        return std::allocator<T>{}.allocate(n);
    }
    void deallocate(T* p, std::size_t n) {
        MemoryCounter::sub(static_cast<std::int64_t>(n * sizeof(T)));
        std::allocator<T>{}.deallocate(p, n);
    }
    template <typename U>
    bool operator==(const TrackingAllocator<U>&) const { return true; }
};

/// Peak bytes that became live while `step` ran, over and above what was live before it.
std::int64_t measure_peak_activation(const std::function<void()>& step);

/// Dense row-major matrix of doubles. Vectors are 1×n, scalars 1×1.
class Tensor {
public:
    using Storage = std::vector<double, TrackingAllocator<double>>;

    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Tensor scalar(double v) { return Tensor(1, 1, v); }
    static Tensor from_rows(const std::vector<std::vector<double>>& rows);
    static Tensor identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> flat() { return {data_.data(), data_.size()}; }
    std::span<const double> flat() const { return {data_.data(), data_.size()}; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double item() const;
    void fill(double v);
    Tensor& operator+=(const Tensor& o);
    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Storage data_;
};

// Dense kernels. Eigen-backed.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // aᵀ b
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a bᵀ
Tensor transpose(const Tensor& a);

}  // namespace ssg
