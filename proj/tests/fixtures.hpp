#pragma once

#include <algorithm>
#include <vector>

#include "servoforge/lti.hpp"

namespace servoforge::testing {

/// Stereotypical servomechanism 1/(s(s+1)):
/// F = [[0,1],[0,-1]], G = [0;1], H = [1,0].
inline StateSpace servo_plant() {
    return StateSpace::siso(Matrix{{0.0, 1.0}, {0.0, -1.0}}, Matrix::column_vector({0.0, 1.0}),
                            Matrix::row_vector({1.0, 0.0}));
}

/// 2x2 Type-[0 0] loop with poles {-1, -2}, no finite transmission zeros and
/// unit DC gain:
///   L(s) = [[-47s+2, 56s],[-42s, 50s+2]] / ((s+1)(s+2)),
/// realized minimally from its rank-one residues.
inline StateSpace coupled_type0_loop() {
    Matrix f{{-1.0, 0.0}, {0.0, -2.0}};
    Matrix g{{7.0, -8.0}, {-12.0, 14.0}};
    Matrix h{{7.0, 8.0}, {6.0, 7.0}};
    return StateSpace(f, g, h, Matrix(2, 2));
}

/// 2x2 Type-[1 1] loop
///   L(s) = [[1/(s(s+1)), 1/(s+1)],[1/s, 4/(s(s+2))]]
/// with poles {0, 0, -1, -2} and transmission zeros -1 +/- sqrt(5);
/// minimal (Gilbert) realization from the partial-fraction residues.
inline StateSpace coupled_type1_loop() {
    Matrix f(4, 4);
    f(2, 2) = -1.0;
    f(3, 3) = -2.0;
    Matrix g{{1.0, 0.0}, {1.0, 2.0}, {-1.0, 1.0}, {0.0, -2.0}};
    Matrix h{{1.0, 0.0, 1.0, 0.0}, {0.0, 1.0, 0.0, 1.0}};
    return StateSpace(f, g, h, Matrix(2, 2));
}

inline bool matches_multiset(std::vector<Complex> got, std::vector<Complex> want, double tol) {
    if (got.size() != want.size()) return false;
    for (const Complex& w : want) {
        auto it = std::min_element(got.begin(), got.end(), [&](const Complex& a, const Complex& b) {
            return std::abs(a - w) < std::abs(b - w);
        });
        if (it == got.end() || std::abs(*it - w) > tol) return false;
        got.erase(it);
    }
    return true;
}

} // namespace servoforge::testing
