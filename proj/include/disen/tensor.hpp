#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace disen {

// Dense row-major tensor of doubles. Ranks 1 through 4 cover everything this
// project needs: vectors {n}, matrices {rows, cols}, images/feature maps
// {channels, height, width}, conv weights {out_ch, in_ch, kh, kw}.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        std::size_t n = 1;
        for (int d : shape_) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
            n *= static_cast<std::size_t>(d);
        }
        data_.assign(n, 0.0);
    }

    static Tensor scalar(double v) {
        Tensor t(std::vector<int>{1});
        t.data_[0] = v;
        return t;
    }

    static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape_); }

    static Tensor from(std::vector<int> shape, std::vector<double> values) {
        Tensor t(std::move(shape));
        if (values.size() != t.data_.size())
            throw std::invalid_argument("Tensor::from: value count does not match shape");
        t.data_ = std::move(values);
        return t;
    }

    int ndim() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // 2-d accessors
    int rows() const { require_ndim(2); return shape_[0]; }
    int cols() const { require_ndim(2); return shape_[1]; }

    // 3-d accessors (channels, height, width)
    int channels() const { require_ndim(3); return shape_[0]; }
    int height() const { require_ndim(3); return shape_[1]; }
    int width() const { require_ndim(3); return shape_[2]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data_[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double& at(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double& at4(int a, int b, int c, int d) {
        return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }
    double at4(int a, int b, int c, int d) const {
        return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    void add_inplace(const Tensor& o) {
        check_same_shape(o, "add_inplace");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    }

    void scale_inplace(double s) {
        for (double& v : data_) v *= s;
    }

    double item() const {
        if (data_.size() != 1) throw std::logic_error("Tensor::item: not a scalar");
        return data_[0];
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

    void check_same_shape(const Tensor& o, const char* where) const {
        if (!same_shape(o))
            throw std::invalid_argument(std::string(where) + ": shape mismatch " + shape_str() +
                                        " vs " + o.shape_str());
    }

private:
    void require_ndim(int n) const {
        if (ndim() != n)
            throw std::logic_error("Tensor: expected rank " + std::to_string(n) + ", got " +
                                   shape_str());
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace disen
