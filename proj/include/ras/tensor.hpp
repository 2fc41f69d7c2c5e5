#ifndef RAS_TENSOR_HPP
#define RAS_TENSOR_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ras {

struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    std::int64_t numel() const {
        return std::int64_t(n) * c * h * w;
    }
    bool operator==(const Shape4&) const = default;

    std::string str() const {
        std::ostringstream os;
        os << "[" << n << "," << c << "," << h << "," << w << "]";
        return os.str();
    }
};

struct TensorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense NCHW tensor backed by a flat row-major Eigen array.
template <typename Scalar>
class Tensor {
public:
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Tensor() = default;
    explicit Tensor(Shape4 s) : shape_(s), data_(Array::Zero(s.numel())) {
        if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
            throw TensorError("negative tensor dimension " + s.str());
    }
    Tensor(Shape4 s, Array values) : shape_(s), data_(std::move(values)) {
        if (data_.size() != shape_.numel())
            throw TensorError("data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_.str());
    }

    static Tensor zeros(Shape4 s) { return Tensor(s); }
    static Tensor constant(Shape4 s, Scalar v) {
        Tensor t(s);
        t.data_.setConstant(v);
        return t;
    }
    static Tensor scalar(Scalar v) { return constant({1, 1, 1, 1}, v); }

    const Shape4& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::int64_t numel() const { return data_.size(); }

    Array& array() { return data_; }
    const Array& array() const { return data_; }
    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    std::int64_t index(int in, int ic, int ih, int iw) const {
        return ((std::int64_t(in) * shape_.c + ic) * shape_.h + ih) * shape_.w + iw;
    }
    Scalar& at(int in, int ic, int ih, int iw) { return data_[index(in, ic, ih, iw)]; }
    Scalar at(int in, int ic, int ih, int iw) const { return data_[index(in, ic, ih, iw)]; }

    bool all_finite() const { return data_.isFinite().all(); }

    void assert_finite(const char* what = "tensor") const {
#ifndef NDEBUG
        if (!all_finite())
            throw TensorError(std::string(what) + " contains NaN/Inf, shape " + shape_.str());
#else
        (void)what;
#endif
    }

private:
    Shape4 shape_{0, 0, 0, 0};
    Array data_;
};

using Tensord = Tensor<double>;
using Tensorf = Tensor<float>;

} // namespace ras

#endif
