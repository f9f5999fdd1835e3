#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace statconsist {

using Shape = std::vector<std::size_t>;

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Raised when an operation would produce NaN or Inf.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/**
 * Dense row-major float64 array with explicit shape.
 *
 * A rank-0 tensor (empty shape) holds exactly one value. There is no implicit
 * reshaping: every operation checks shapes and throws ShapeError on mismatch.
 */
class Tensor {
public:
    Tensor();
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor vector(std::initializer_list<double> values);
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const;

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    // Only valid for single-element tensors.
    double item() const;

    Tensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;
    void require_finite(const char* where) const;

    double max_abs() const noexcept;
    double sum() const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    std::size_t offset(std::initializer_list<std::size_t> index) const;

    Shape shape_;
    std::vector<double> data_;
};

// Elementwise helpers on plain tensors (no differentiation).
Tensor map(const Tensor& t, double (*fn)(double));
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace statconsist
