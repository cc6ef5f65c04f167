#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <numeric>
#include <vector>

#include "tsonet/core/error.hpp"

namespace tsonet {

// 64-byte-aligned storage. Pinning the alignment keeps SIMD traversal
// (prologue peeling in vectorized kernels) identical across allocations,
// which is what makes repeated forwards bit-stable.
template <class T>
struct aligned_allocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    aligned_allocator() = default;
    template <class U>
    aligned_allocator(const aligned_allocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), alignment));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const aligned_allocator<U>&) const noexcept { return true; }
    template <class U>
    bool operator!=(const aligned_allocator<U>&) const noexcept { return false; }
};

// Dense row-major tensor. Rank is small (<= 4 in practice); shape is dynamic.
// This is plain storage: all math lives in kernels.hpp / ops.hpp.
template <class T>
class tensor {
public:
    tensor() = default;

    explicit tensor(std::vector<int64_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), T(0)) {}

    tensor(std::vector<int64_t> shape, T fill)
        : shape_(std::move(shape)), data_(count(shape_), fill) {}

    tensor(std::vector<int64_t> shape, const std::vector<T>& data)
        : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        check_contract(static_cast<int64_t>(data_.size()) == count(shape_),
                       "tensor: data size does not match shape");
    }

    static tensor zeros(std::vector<int64_t> shape) { return tensor(std::move(shape)); }
    static tensor full(std::vector<int64_t> shape, T v) { return tensor(std::move(shape), v); }

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 2D / 3D accessors (row-major).
    T& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
    const T& at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
    T& at(int64_t c, int64_t y, int64_t x) {
        return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
    }
    const T& at(int64_t c, int64_t y, int64_t x) const {
        return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const tensor& o) const { return shape_ == o.shape_; }

    // Reinterpret as [rows, numel/rows]; data untouched.
    void reshape(std::vector<int64_t> shape) {
        check_contract(count(shape) == numel(), "tensor: reshape changes element count");
        shape_ = std::move(shape);
    }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    static int64_t count(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<int64_t> shape_;
    std::vector<T, aligned_allocator<T>> data_;
};

template <class T>
tensor<T> tensor_cast(const tensor<float>& src) {
    tensor<T> out(src.shape());
    for (int64_t i = 0; i < src.numel(); ++i) out[i] = static_cast<T>(src[i]);
    return out;
}

template <class T>
tensor<float> tensor_to_float(const tensor<T>& src) {
    tensor<float> out(src.shape());
    for (int64_t i = 0; i < src.numel(); ++i) out[i] = static_cast<float>(src[i]);
    return out;
}

} // namespace tsonet
