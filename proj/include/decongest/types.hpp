#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace decongest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Every failure surfaced by the library is reported through this type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw Error(message);
    }
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// k-hot selector over d item features. A revealed feature has bit 1.
class Mask {
public:
    Mask() = default;

    explicit Mask(std::vector<int> bits) : bits_(std::move(bits))
    {
        for (int b : bits_) {
            require(b == 0 || b == 1, "mask bits must be 0 or 1");
            k_ += b;
        }
    }

    static Mask full(std::size_t d) { return Mask(std::vector<int>(d, 1)); }
    static Mask empty(std::size_t d) { return Mask(std::vector<int>(d, 0)); }

    static Mask from_indices(std::size_t d, const std::vector<int>& revealed)
    {
        std::vector<int> bits(d, 0);
        for (int idx : revealed) {
            require(idx >= 0 && static_cast<std::size_t>(idx) < d, "mask index out of range");
            require(bits[idx] == 0, "duplicate mask index");
            bits[idx] = 1;
        }
        return Mask(std::move(bits));
    }

    std::size_t dim() const { return bits_.size(); }
    int cardinality() const { return k_; }
    int operator[](std::size_t l) const { return bits_[l]; }
    bool revealed(std::size_t l) const { return bits_[l] == 1; }
    const std::vector<int>& bits() const { return bits_; }

    std::vector<int> indices() const
    {
        std::vector<int> out;
        for (std::size_t l = 0; l < bits_.size(); ++l) {
            if (bits_[l]) out.push_back(static_cast<int>(l));
        }
        return out;
    }

    Mask inverted() const
    {
        std::vector<int> bits(bits_.size());
        for (std::size_t l = 0; l < bits_.size(); ++l) bits[l] = 1 - bits_[l];
        return Mask(std::move(bits));
    }

    /// Bits as a length-d column vector of 0.0 / 1.0.
    Vector as_vector() const
    {
        Vector v(bits_.size());
        for (std::size_t l = 0; l < bits_.size(); ++l) v(l) = bits_[l];
        return v;
    }

    std::string to_string() const
    {
        std::string s;
        s.reserve(bits_.size());
        for (int b : bits_) s.push_back(b ? '1' : '0');
        return s;
    }

    friend bool operator==(const Mask& a, const Mask& b) { return a.bits_ == b.bits_; }
    friend bool operator<(const Mask& a, const Mask& b) { return a.bits_ < b.bits_; }

private:
    std::vector<int> bits_;
    int k_ = 0;
};

}  // namespace decongest
