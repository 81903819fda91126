#include "ssg/tensor.hpp"

#include "ssg/error.hpp"

#include <Eigen/Core>

#include <malloc.h>

#include <algorithm>
#include <cmath>

namespace ssg {

namespace {

thread_local std::int64_t g_live = 0;
thread_local std::int64_t g_peak = 0;

// Keep large tensor buffers on the heap instead of fresh mmap pages each step.
const bool g_malloc_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
}();

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t) {
    return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap view(Tensor& t) {
    return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

}  // namespace

std::int64_t MemoryCounter::live() { return g_live; }
std::int64_t MemoryCounter::peak() { return g_peak; }
void MemoryCounter::reset_peak() { g_peak = g_live; }
void MemoryCounter::add(std::int64_t bytes) {
    g_live += bytes;
    g_peak = std::max(g_peak, g_live);
}
void MemoryCounter::sub(std::int64_t bytes) { g_live -= bytes; }

std::int64_t measure_peak_activation(const std::function<void()>& step) {
    const std::int64_t before = MemoryCounter::live();
    MemoryCounter::reset_peak();
    step();
    return MemoryCounter::peak() - before;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    Tensor t(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (rows[i].size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
        std::copy(rows[i].begin(), rows[i].end(), t.row(i).begin());
    }
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on a tensor with " + std::to_string(size()) + " elements");
    return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& o) {
    if (!same_shape(o)) throw ShapeError("shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Tensor out(a.rows(), b.cols());
    if (!out.empty() && a.cols() > 0) view(out).noalias() = view(a) * view(b);
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row mismatch");
    Tensor out(a.cols(), b.cols());
    if (!out.empty() && a.rows() > 0) view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column mismatch");
    Tensor out(a.rows(), b.rows());
    if (!out.empty() && a.cols() > 0) view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

Tensor transpose(const Tensor& a) {
    Tensor out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

}  // namespace ssg
