#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gasket {

// Closed interval [lo, hi] enclosing an exact real. Every arithmetic
// operation widens its result by one ulp in each direction, which is enough
// to absorb round-to-nearest error of a single IEEE operation.
struct IntervalValue {
    double lo = 0.0;
    double hi = 0.0;

    IntervalValue() = default;
    explicit IntervalValue(double v) : lo(v), hi(v) {}
    IntervalValue(double l, double h) : lo(l), hi(h)
    {
        if (!(l <= h))
            throw std::invalid_argument("IntervalValue: lo > hi");
    }

    double mid() const { return 0.5 * (lo + hi); }
    double width() const { return hi - lo; }
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains(const IntervalValue& o) const { return lo <= o.lo && o.hi <= hi; }
    double mag() const { return std::max(std::fabs(lo), std::fabs(hi)); }
};

namespace detail {
inline double down(double x) { return std::nextafter(x, -std::numeric_limits<double>::infinity()); }
inline double up(double x) { return std::nextafter(x, std::numeric_limits<double>::infinity()); }
} // namespace detail

inline IntervalValue outward(double lo, double hi) { return {detail::down(lo), detail::up(hi)}; }

inline IntervalValue hull(const IntervalValue& a, const IntervalValue& b)
{
    return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

inline IntervalValue operator+(const IntervalValue& a, const IntervalValue& b)
{
    return outward(a.lo + b.lo, a.hi + b.hi);
}

inline IntervalValue operator-(const IntervalValue& a, const IntervalValue& b)
{
    return outward(a.lo - b.hi, a.hi - b.lo);
}

inline IntervalValue operator-(const IntervalValue& a) { return {-a.hi, -a.lo}; }

inline IntervalValue operator*(double s, const IntervalValue& a)
{
    if (s >= 0)
        return outward(s * a.lo, s * a.hi);
    return outward(s * a.hi, s * a.lo);
}

inline IntervalValue operator*(const IntervalValue& a, double s) { return s * a; }

inline IntervalValue operator*(const IntervalValue& a, const IntervalValue& b)
{
    const double p[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
    return outward(*std::min_element(p, p + 4), *std::max_element(p, p + 4));
}

// Division by an interval that is strictly positive.
inline IntervalValue operator/(const IntervalValue& a, const IntervalValue& b)
{
    if (!(b.lo > 0))
        throw std::domain_error("IntervalValue: divisor must be strictly positive");
    const double p[4] = {a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi};
    return outward(*std::min_element(p, p + 4), *std::max_element(p, p + 4));
}

inline IntervalValue& operator+=(IntervalValue& a, const IntervalValue& b) { return a = a + b; }

} // namespace gasket
