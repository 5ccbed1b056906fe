#include "tride/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tride/error.hpp"

namespace tride {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill)
{
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
{
    if (data_.size() != rows * cols)
        fail(ErrorKind::Shape, "matrix data length " + std::to_string(data_.size()) + " != " +
                                   std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix Matrix::gather(std::span<const std::size_t> indices) const
{
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_)
            fail(ErrorKind::Shape, "gather index " + std::to_string(indices[i]) + " out of range");
        std::ranges::copy(row(indices[i]), out.row(i).begin());
    }
    return out;
}

bool Matrix::all_finite() const noexcept
{
    return std::ranges::all_of(data_, [](double v) { return std::isfinite(v); });
}

Matrix vstack(std::span<const Matrix* const> parts)
{
    std::size_t rows = 0;
    const std::size_t cols = parts.empty() ? 0 : parts.front()->cols();
    for (const Matrix* m : parts) {
        if (m->cols() != cols)
            fail(ErrorKind::Shape, "vstack column mismatch");
        rows += m->rows();
    }
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const Matrix* m : parts)
        data.insert(data.end(), m->storage().begin(), m->storage().end());
    return Matrix(rows, cols, std::move(data));
}

} // namespace tride
