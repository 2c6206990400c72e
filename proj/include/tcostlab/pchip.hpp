#pragma once
// Shape-preserving piecewise-cubic Hermite interpolation (Fritsch-Carlson slopes).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace tcostlab {

class Pchip {
public:
    Pchip() = default;

    // xs strictly increasing, |xs| == |ys| >= 2.
    Pchip(std::vector<double> xs, std::vector<double> ys)
        : x_(std::move(xs)), y_(std::move(ys)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw std::invalid_argument("Pchip: need >= 2 points with matching sizes");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw std::invalid_argument("Pchip: abscissae must be strictly increasing");
        m_.assign(n, 0.0);
        std::vector<double> h(n - 1), d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = x_[i + 1] - x_[i];
            d[i] = (y_[i + 1] - y_[i]) / h[i];
        }
        if (n == 2) {
            m_[0] = m_[1] = d[0];
        } else {
            for (std::size_t i = 1; i + 1 < n; ++i) {
                if (d[i - 1] == 0.0 || d[i] == 0.0 || (d[i - 1] > 0) != (d[i] > 0)) {
                    m_[i] = 0.0;    // local extremum in the data: flat tangent
                } else {
                    const double w1 = 2.0 * h[i] + h[i - 1];
                    const double w2 = h[i] + 2.0 * h[i - 1];
                    m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
                }
            }
            m_[0] = end_slope(h[0], h[1], d[0], d[1]);
            m_[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
        }
    }

    double min_x() const { return x_.front(); }
    double max_x() const { return x_.back(); }

    double operator()(double x) const { return eval(x); }

    double eval(double x) const {
        const auto [i, t, h] = locate(x);
        const double t2 = t * t, t3 = t2 * t;
        return y_[i] * (2 * t3 - 3 * t2 + 1) + h * m_[i] * (t3 - 2 * t2 + t)
             + y_[i + 1] * (-2 * t3 + 3 * t2) + h * m_[i + 1] * (t3 - t2);
    }

    double deriv(double x) const {
        const auto [i, t, h] = locate(x);
        const double t2 = t * t;
        return (y_[i] * (6 * t2 - 6 * t) + h * m_[i] * (3 * t2 - 4 * t + 1)
              + y_[i + 1] * (-6 * t2 + 6 * t) + h * m_[i + 1] * (3 * t2 - 2 * t)) / h;
    }

private:
    static double end_slope(double h0, double h1, double d0, double d1) {
        // one-sided three-point estimate, clamped so the end segment stays shape-safe
        double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (d0 == 0.0 || (m > 0) != (d0 > 0)) return 0.0;
        if ((d0 > 0) != (d1 > 0) && std::fabs(m) > 3.0 * std::fabs(d0)) return 3.0 * d0;
        return m;
    }

    struct Cell { std::size_t i; double t; double h; };

    Cell locate(double x) const {
        // tolerate sub-ulp overshoot from upstream arithmetic, reject real range errors
        const double span = x_.back() - x_.front();
        if (x < x_.front() || x > x_.back()) {
            if (x < x_.front() - 1e-9 * span || x > x_.back() + 1e-9 * span)
                throw std::domain_error("Pchip: abscissa outside data range");
            x = std::clamp(x, x_.front(), x_.back());
        }
        std::size_t i = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
        i = std::clamp<std::size_t>(i, 1, x_.size() - 1) - 1;
        const double h = x_[i + 1] - x_[i];
        return {i, (x - x_[i]) / h, h};
    }

    std::vector<double> x_, y_, m_;
};

} // namespace tcostlab
