#pragma once

#include "opweigh/opweigh.hpp"

namespace fixtures {

using namespace opweigh;

inline Matrix mat2(double a, double b, double c, double d) {
    Matrix M(2, 2);
    M << a, b, c, d;
    return M;
}

inline Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

// A = diag(0, -1), B = [[1, 1], [0, 0]], C = [[0, 0], [1, 1]], Q = (1, 0), Q_dag = (2, 1).
struct Worked2D {
    Matrix B = mat2(1, 1, 0, 0);
    Matrix C = mat2(0, 0, 1, 1);
    Vector Q = vec2(1, 0);
    Vector Qdag = vec2(2, 1);
    Bracket bracket{-3.0, -0.5};

    CombinedFamily family() const { return twoD_family(B, C, Q, Qdag); }
};

inline Bracket oned_bracket() { return {-1.0, 0.9}; }

} // namespace fixtures
