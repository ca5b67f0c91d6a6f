#include "sml/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <utility>

namespace sml::linalg {

bool solve_inplace(std::vector<double>& a, std::vector<double>& b, int n) {
    const double tiny = 1e-300;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::abs(a[size_t(col) * n + col]);
        for (int r = col + 1; r < n; ++r) {
            double v = std::abs(a[size_t(r) * n + col]);
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best < tiny) return false;
        if (pivot != col) {
            for (int c = col; c < n; ++c)
                std::swap(a[size_t(pivot) * n + c], a[size_t(col) * n + c]);
            std::swap(b[size_t(pivot)], b[size_t(col)]);
        }
        const double inv = 1.0 / a[size_t(col) * n + col];
        for (int r = col + 1; r < n; ++r) {
            double f = a[size_t(r) * n + col] * inv;
            if (f == 0.0) continue;
            a[size_t(r) * n + col] = 0.0;
            for (int c = col + 1; c < n; ++c)
                a[size_t(r) * n + c] -= f * a[size_t(col) * n + c];
            b[size_t(r)] -= f * b[size_t(col)];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[size_t(r)];
        for (int c = r + 1; c < n; ++c) s -= a[size_t(r) * n + c] * b[size_t(c)];
        b[size_t(r)] = s / a[size_t(r) * n + r];
    }
    return true;
}

}  // namespace sml::linalg
