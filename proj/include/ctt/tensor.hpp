#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "ctt/common.hpp"

namespace ctt {

/// Dense row-major double tensor. Rank is dynamic but small (1..4); image
/// batches use NCHW order by convention.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
        data_.assign(numel_of(dims_), 0.0);
    }
    Tensor(std::initializer_list<int> dims) : Tensor(std::vector<int>(dims)) {}

    static std::size_t numel_of(const std::vector<int>& dims) {
        std::size_t n = 1;
        for (int d : dims) {
            if (d < 0) throw ShapeError("negative tensor dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    const std::vector<int>& dims() const { return dims_; }
    int dim(int i) const { return dims_.at(static_cast<std::size_t>(i)); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // NCHW accessors (rank 4).
    double& at4(int n, int c, int h, int w) {
        return data_[((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }
    double at4(int n, int c, int h, int w) const {
        return data_[((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }
    double& at3(int n, int h, int w) {
        return data_[(static_cast<std::size_t>(n) * dims_[1] + h) * dims_[2] + w];
    }
    double at3(int n, int h, int w) const {
        return data_[(static_cast<std::size_t>(n) * dims_[1] + h) * dims_[2] + w];
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + ")";
    }

private:
    std::vector<int> dims_;
    std::vector<double> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

/// Integer label map, (N, H, W). Values are class indices or kIgnoreLabel.
struct LabelMap {
    std::vector<int> dims;  // {N, H, W}
    std::vector<int> v;

    LabelMap() = default;
    LabelMap(int n, int h, int w) : dims{n, h, w}, v(static_cast<std::size_t>(n) * h * w, 0) {}

    int& at(int n, int h, int w) {
        return v[(static_cast<std::size_t>(n) * dims[1] + h) * dims[2] + w];
    }
    int at(int n, int h, int w) const {
        return v[(static_cast<std::size_t>(n) * dims[1] + h) * dims[2] + w];
    }
    std::size_t numel() const { return v.size(); }
};

}  // namespace ctt
