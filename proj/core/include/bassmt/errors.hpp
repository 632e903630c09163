#pragma once

#include <stdexcept>
#include <string>

namespace bassmt {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidMeasureError : public Error { public: using Error::Error; };
class DimensionError : public Error { public: using Error::Error; };
class InfeasibleError : public Error { public: using Error::Error; };
class QuadratureError : public Error { public: using Error::Error; };
class OutOfRangeError : public Error { public: using Error::Error; };
class RankError : public Error { public: using Error::Error; };
class IndexError : public Error { public: using Error::Error; };
class NotConvexOrderError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class ConvergenceError : public Error { public: using Error::Error; };

// Raised when the marginals are in convex order but not irreducible, so no
// Bass martingale exists. Carries the blocking (mu-atom, nu-atom) index pair.
class NotIrreducibleError : public Error {
public:
    NotIrreducibleError(const std::string& what, std::size_t mu_index, std::size_t nu_index)
        : Error(what), mu_index_(mu_index), nu_index_(nu_index) {}

    std::size_t mu_index() const noexcept { return mu_index_; }
    std::size_t nu_index() const noexcept { return nu_index_; }

private:
    std::size_t mu_index_;
    std::size_t nu_index_;
};

}  // namespace bassmt
