#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ttrk/common.hpp"

namespace ttrk {

enum class DType : std::uint8_t { F32 = 0, I8 = 1, I32 = 2 };

inline const char* dtype_name(DType t) {
    switch (t) {
        case DType::F32: return "f32";
        case DType::I8: return "i8";
        case DType::I32: return "i32";
    }
    return "?";
}

inline std::size_t dtype_size(DType t) {
    return t == DType::I8 ? 1 : 4;
}

/// Tensor extents. Activations are channels-last (batch, height, width,
/// channels); convolution weights are (out-channels, kh, kw, in-channels).
struct Shape {
    std::vector<std::int64_t> dims;

    Shape() = default;
    Shape(std::initializer_list<std::int64_t> d) : dims(d) {}
    explicit Shape(std::vector<std::int64_t> d) : dims(std::move(d)) {}

    int rank() const { return static_cast<int>(dims.size()); }

    std::int64_t elements() const {
        return std::accumulate(dims.begin(), dims.end(), std::int64_t{1},
                               [](std::int64_t a, std::int64_t b) { return a * b; });
    }

    std::int64_t operator[](int i) const { return dims[static_cast<std::size_t>(i)]; }

    bool operator==(const Shape& o) const = default;

    void validate() const {
        require(rank() >= 1 && rank() <= 4, "shape rank must be in [1,4], got " + std::to_string(rank()));
        for (auto d : dims)
            require(d >= 1, "shape dims must be >= 1, got " + str());
    }

    std::string str() const {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
        os << ")";
        return os.str();
    }
};

enum class QuantScheme : std::uint8_t { PerTensor = 0, PerChannel = 1 };

/// Affine quantization: real = scale * (code - zero_point). Per-channel
/// params carry one (scale, zero_point) pair per element of the quantized
/// axis; symmetric weight params have all zero points at 0.
struct QuantParams {
    QuantScheme scheme = QuantScheme::PerTensor;
    int axis = -1; // quantized axis for per-channel
    std::vector<float> scales;
    std::vector<std::int32_t> zero_points;

    static QuantParams per_tensor(float scale, std::int32_t zero_point) {
        return {QuantScheme::PerTensor, -1, {scale}, {zero_point}};
    }
    static QuantParams per_channel(int axis, std::vector<float> scales,
                                   std::vector<std::int32_t> zero_points) {
        return {QuantScheme::PerChannel, axis, std::move(scales), std::move(zero_points)};
    }

    bool per_channel_scheme() const { return scheme == QuantScheme::PerChannel; }

    float scale() const { return scales[0]; }
    std::int32_t zero_point() const { return zero_points[0]; }

    bool symmetric() const {
        for (auto z : zero_points)
            if (z != 0) return false;
        return true;
    }

    bool operator==(const QuantParams& o) const = default;

    void validate() const {
        require(!scales.empty(), "quant params need at least one scale");
        require(scales.size() == zero_points.size(), "scales/zero_points length mismatch");
        if (scheme == QuantScheme::PerTensor)
            require(scales.size() == 1, "per-tensor params must have exactly one scale");
        for (auto s : scales)
            require(std::isfinite(s) && s > 0.0f, "scales must be positive and finite");
        for (auto z : zero_points)
            require(z >= -128 && z <= 127, "zero points must fit int8");
    }

    void validate_for(const Shape& shape) const {
        validate();
        if (scheme == QuantScheme::PerChannel) {
            require(axis >= 0 && axis < shape.rank(),
                    "per-channel axis " + std::to_string(axis) + " out of range for " + shape.str());
            require(static_cast<std::int64_t>(scales.size()) == shape[axis],
                    "per-channel params length " + std::to_string(scales.size()) +
                        " does not match axis size " + std::to_string(shape[axis]));
        }
    }
};

/// Shaped numeric buffer, row-major. I8 tensors always carry quantization
/// params; F32 and I32 tensors never do.
class Tensor {
public:
    Tensor() = default;

    static Tensor f32(Shape shape, std::vector<float> data = {}) {
        shape.validate();
        if (data.empty()) data.resize(static_cast<std::size_t>(shape.elements()), 0.0f);
        require(static_cast<std::int64_t>(data.size()) == shape.elements(),
                "data length does not match shape " + shape.str());
        Tensor t;
        t.shape_ = std::move(shape);
        t.dtype_ = DType::F32;
        t.data_ = std::move(data);
        return t;
    }

    static Tensor i8(Shape shape, QuantParams qp, std::vector<std::int8_t> data = {}) {
        shape.validate();
        qp.validate_for(shape);
        if (data.empty()) data.resize(static_cast<std::size_t>(shape.elements()), 0);
        require(static_cast<std::int64_t>(data.size()) == shape.elements(),
                "data length does not match shape " + shape.str());
        Tensor t;
        t.shape_ = std::move(shape);
        t.dtype_ = DType::I8;
        t.data_ = std::move(data);
        t.qparams_ = std::move(qp);
        return t;
    }

    static Tensor i32(Shape shape, std::vector<std::int32_t> data = {}) {
        shape.validate();
        if (data.empty()) data.resize(static_cast<std::size_t>(shape.elements()), 0);
        require(static_cast<std::int64_t>(data.size()) == shape.elements(),
                "data length does not match shape " + shape.str());
        Tensor t;
        t.shape_ = std::move(shape);
        t.dtype_ = DType::I32;
        t.data_ = std::move(data);
        return t;
    }

    const Shape& shape() const { return shape_; }
    DType dtype() const { return dtype_; }
    std::int64_t elements() const { return shape_.elements(); }

    bool has_qparams() const { return qparams_.has_value(); }
    const QuantParams& qparams() const {
        require(qparams_.has_value(), "tensor carries no quantization params");
        return *qparams_;
    }

    std::span<const float> f() const { return as<float>(DType::F32); }
    std::span<float> f() { return as<float>(DType::F32); }
    std::span<const std::int8_t> q() const { return as<std::int8_t>(DType::I8); }
    std::span<std::int8_t> q() { return as<std::int8_t>(DType::I8); }
    std::span<const std::int32_t> i() const { return as<std::int32_t>(DType::I32); }
    std::span<std::int32_t> i() { return as<std::int32_t>(DType::I32); }

    const void* raw_data() const {
        switch (dtype_) {
            case DType::F32: return std::get<std::vector<float>>(data_).data();
            case DType::I8: return std::get<std::vector<std::int8_t>>(data_).data();
            case DType::I32: return std::get<std::vector<std::int32_t>>(data_).data();
        }
        return nullptr;
    }
    std::size_t byte_size() const { return static_cast<std::size_t>(elements()) * dtype_size(dtype_); }

    bool operator==(const Tensor& o) const = default;

    /// Stride (in elements) of one step along `axis`, and a helper mapping a
    /// flat index to its coordinate along that axis.
    std::int64_t stride(int axis) const {
        std::int64_t s = 1;
        for (int i = axis + 1; i < shape_.rank(); ++i) s *= shape_[i];
        return s;
    }
    std::int64_t axis_index(std::int64_t flat, int axis) const {
        return (flat / stride(axis)) % shape_[axis];
    }

private:
    template <typename T>
    std::span<const T> as(DType expect) const {
        require(dtype_ == expect, std::string("tensor is ") + dtype_name(dtype_) + ", expected " +
                                      dtype_name(expect));
        const auto& v = std::get<std::vector<T>>(data_);
        return {v.data(), v.size()};
    }
    template <typename T>
    std::span<T> as(DType expect) {
        require(dtype_ == expect, std::string("tensor is ") + dtype_name(dtype_) + ", expected " +
                                      dtype_name(expect));
        auto& v = std::get<std::vector<T>>(data_);
        return {v.data(), v.size()};
    }

    Shape shape_;
    DType dtype_ = DType::F32;
    std::variant<std::vector<float>, std::vector<std::int8_t>, std::vector<std::int32_t>> data_;
    std::optional<QuantParams> qparams_;
};

} // namespace ttrk
