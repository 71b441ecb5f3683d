#ifndef NONHOLO_VEC3_HPP
#define NONHOLO_VEC3_HPP

#include <cmath>

namespace nonholo {

// Point / tangent vector in R^3 with the usual dot and cross products.
struct Vec3 {
    double x1 = 0.0, x2 = 0.0, x3 = 0.0;

    double& operator[](int i) { return i == 0 ? x1 : (i == 1 ? x2 : x3); }
    double operator[](int i) const { return i == 0 ? x1 : (i == 1 ? x2 : x3); }

    Vec3 operator+(const Vec3& o) const { return {x1 + o.x1, x2 + o.x2, x3 + o.x3}; }
    Vec3 operator-(const Vec3& o) const { return {x1 - o.x1, x2 - o.x2, x3 - o.x3}; }
    Vec3 operator-() const { return {-x1, -x2, -x3}; }
    Vec3 operator*(double s) const { return {x1 * s, x2 * s, x3 * s}; }
    Vec3 operator/(double s) const { return {x1 / s, x2 / s, x3 / s}; }
    Vec3& operator+=(const Vec3& o) { x1 += o.x1; x2 += o.x2; x3 += o.x3; return *this; }
    Vec3& operator-=(const Vec3& o) { x1 -= o.x1; x2 -= o.x2; x3 -= o.x3; return *this; }
    Vec3& operator*=(double s) { x1 *= s; x2 *= s; x3 *= s; return *this; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x1 * b.x1 + a.x2 * b.x2 + a.x3 * b.x3; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.x2 * b.x3 - a.x3 * b.x2,
            a.x3 * b.x1 - a.x1 * b.x3,
            a.x1 * b.x2 - a.x2 * b.x1};
}

inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }

inline double triple(const Vec3& a, const Vec3& b, const Vec3& c) { return dot(a, cross(b, c)); }

inline bool finite(const Vec3& v) {
    return std::isfinite(v.x1) && std::isfinite(v.x2) && std::isfinite(v.x3);
}

} // namespace nonholo

#endif
